//! Per-trial rows, their CSV form and the aggregates derived from them.

use std::cmp::Ordering;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const FIXED_COLUMNS: [&str; 5] = ["rule", "sweep", "trial", "seed", "status"];

/// One (rule, sweep value, trial) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rule: String,
    pub sweep: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    /// `ok`, `unreachable`, or the lower-case error code of a failed cell.
    pub status: String,
    /// Metric values in column order; `None` where the cell has no value.
    pub values: Vec<Option<f64>>,
}

impl TrialRecord {
    pub fn key(&self) -> (String, Option<u64>, usize) {
        (self.rule.clone(), self.sweep.map(f64::to_bits), self.trial)
    }
}

/// Sorts rows by rule (in `rule_order`), sweep value and trial.
pub fn sort_records(rows: &mut [TrialRecord], rule_order: &[String]) {
    let rank = |r: &str| rule_order.iter().position(|x| x == r).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        rank(&a.rule)
            .cmp(&rank(&b.rule))
            .then_with(|| match (a.sweep, b.sweep) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
            })
            .then(a.trial.cmp(&b.trial))
    });
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_records<W: Write>(rows: &[TrialRecord], metrics: &[&str], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = FIXED_COLUMNS.iter().chain(metrics).copied().collect();
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut fields = vec![
            r.rule.clone(),
            cell(r.sweep),
            r.trial.to_string(),
            r.seed.to_string(),
            r.status.clone(),
        ];
        fields.extend(r.values.iter().map(|v| cell(*v)));
        w.write_record(&fields).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        },
    }
}

fn parse_cell<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} '{s}'"),
    })
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_cell(s, line, "number").map(Some)
    }
}

/// Reads rows written by [`write_records`]; the header must list exactly
/// `metrics` after the fixed columns.
pub fn read_records<R: Read>(reader: R, metrics: &[&str]) -> Result<Vec<TrialRecord>> {
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let want: Vec<&str> = FIXED_COLUMNS.iter().chain(metrics).copied().collect();
    if header != want {
        return Err(Error::Config(format!(
            "existing trial file has columns {header:?}, expected {want:?}"
        )));
    }
    let mut rows = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = idx + 2;
        rows.push(TrialRecord {
            rule: rec[0].to_string(),
            sweep: parse_opt(&rec[1], line)?,
            trial: parse_cell(&rec[2], line, "trial")?,
            seed: parse_cell(&rec[3], line, "seed")?,
            status: rec[4].to_string(),
            values: (5..rec.len())
                .map(|i| parse_opt(&rec[i], line))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

/// Writes `bytes` to `path` through a temporary file and a rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rule: String,
    pub sweep: Option<f64>,
    pub metric: String,
    /// Rows with a value for this metric.
    pub count: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n − 1 denominator).
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusCount {
    pub rule: String,
    pub sweep: Option<f64>,
    pub status: String,
    pub count: usize,
}

/// Mean, sample standard deviation, min and max of `values`, summed in the
/// given order.
pub fn describe(values: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None, None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (Some(mean), std, Some(min), Some(max))
}

/// Aggregates per (rule, sweep, metric) over rows already in canonical order.
pub fn aggregate(rows: &[TrialRecord], metrics: &[&str]) -> (Vec<Aggregate>, Vec<StatusCount>) {
    let mut aggregates = Vec::new();
    let mut statuses = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let head = &rows[start];
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| r.rule == head.rule && r.sweep.map(f64::to_bits) == head.sweep.map(f64::to_bits))
                .count();
        let group = &rows[start..end];
        for (i, metric) in metrics.iter().enumerate() {
            let values: Vec<f64> = group.iter().filter_map(|r| r.values[i]).collect();
            let (mean, std, min, max) = describe(&values);
            aggregates.push(Aggregate {
                rule: head.rule.clone(),
                sweep: head.sweep,
                metric: metric.to_string(),
                count: values.len(),
                mean,
                std,
                min,
                max,
            });
        }
        let mut seen: Vec<(String, usize)> = Vec::new();
        for r in group {
            match seen.iter_mut().find(|(s, _)| *s == r.status) {
                Some((_, c)) => *c += 1,
                None => seen.push((r.status.clone(), 1)),
            }
        }
        seen.sort();
        statuses.extend(seen.into_iter().map(|(status, count)| StatusCount {
            rule: head.rule.clone(),
            sweep: head.sweep,
            status,
            count,
        }));
        start = end;
    }
    (aggregates, statuses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(rule: &str, sweep: Option<f64>, trial: usize, v: Option<f64>) -> TrialRecord {
        TrialRecord {
            rule: rule.into(),
            sweep,
            trial,
            seed: 7,
            status: if v.is_some() { "ok".into() } else { "unreachable".into() },
            values: vec![v],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = vec![
            row("mean", Some(0.1), 0, Some(0.1 + 0.2)),
            row("mean", Some(0.1), 1, None),
            row("midpoint", None, 0, Some(1e-17)),
        ];
        let mut buf = Vec::new();
        write_records(&rows, &["cost"], &mut buf).unwrap();
        let back = read_records(&buf[..], &["cost"]).unwrap();
        assert_eq!(back, rows);
        let mut again = Vec::new();
        write_records(&back, &["cost"], &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_mismatch_is_a_config_error() {
        let mut buf = Vec::new();
        write_records(&[], &["cost"], &mut buf).unwrap();
        assert!(matches!(read_records(&buf[..], &["gini"]), Err(Error::Config(_))));
    }

    #[test]
    fn canonical_order() {
        let mut rows = vec![
            row("b", Some(0.2), 1, None),
            row("a", Some(0.2), 0, None),
            row("b", Some(0.1), 3, None),
            row("b", Some(0.1), 2, None),
        ];
        sort_records(&mut rows, &["b".into(), "a".into()]);
        let keys: Vec<_> = rows.iter().map(|r| (r.rule.as_str(), r.trial)).collect();
        assert_eq!(keys, vec![("b", 2), ("b", 3), ("b", 1), ("a", 0)]);
    }

    #[test]
    fn aggregates_skip_missing_values() {
        let rows = vec![
            row("mean", Some(0.1), 0, Some(1.0)),
            row("mean", Some(0.1), 1, Some(3.0)),
            row("mean", Some(0.1), 2, None),
        ];
        let (agg, status) = aggregate(&rows, &["cost"]);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].count, 2);
        assert_eq!(agg[0].mean, Some(2.0));
        assert_eq!(agg[0].std, Some(2f64.sqrt()));
        assert_eq!((agg[0].min, agg[0].max), (Some(1.0), Some(3.0)));
        assert_eq!(status.len(), 2);
        assert_eq!(describe(&[5.0]).1, None);
    }
}
