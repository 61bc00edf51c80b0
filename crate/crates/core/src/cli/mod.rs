//! The `retrofund` command line: `allocate`, `generate`, `experiment` and
//! `axioms`.
//!
//! Failures print one line `error: code=<CODE> message=<text>` on stderr and
//! exit with [`Error::exit_code`].

pub mod experiment;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::axioms::{matrix_rule, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{
    load_ballots_csv, write_ballots_csv, Profile, QuorumBasis, RuleKind, RuleSpec, DEFAULT_K1,
    DEFAULT_K2, DEFAULT_Q1, DEFAULT_Q2,
};
use crate::rules::allocate;
use crate::votegen::{generate_profile, GenSpec};

pub use experiment::{
    run_axioms, run_experiment, run_experiment_to_dir, write_axioms_report, AxiomsReport,
    ExperimentConfig, ExperimentKind, ExperimentReport, GenerationConfig, ReportFormat, RuleEntry,
};

#[derive(Debug, Parser)]
#[command(name = "retrofund", version, about = "Budget aggregation rules and manipulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisArg {
    MedianTokens,
    NormalizedShare,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    IndependentMarkets,
    Majoritarian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn parse_rule(s: &str) -> std::result::Result<RuleKind, String> {
    s.parse::<RuleKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate a ballot file with one rule.
    Allocate {
        /// Ballot CSV: a header of project ids, one row of tokens per voter.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_rule)]
        rule: Option<RuleKind>,
        /// Picks the phantom rule of this family.
        #[arg(long, value_enum)]
        phantom_family: Option<FamilyArg>,
        #[arg(long, default_value_t = DEFAULT_Q1)]
        q1: f64,
        #[arg(long, default_value_t = DEFAULT_Q2)]
        q2: usize,
        #[arg(long, default_value_t = DEFAULT_K1)]
        k1: f64,
        #[arg(long, default_value_t = DEFAULT_K2)]
        k2: f64,
        #[arg(long, value_enum, default_value = "median-tokens")]
        quorum_basis: BasisArg,
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Write a synthetic profile and its base vote.
    Generate {
        #[arg(long)]
        voters: usize,
        #[arg(long)]
        projects: usize,
        #[arg(long, default_value_t = 0.5)]
        mix_weight: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Ground-truth file; defaults to `<output>.truth.csv`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay the worked examples and search the property matrix.
    Axioms {
        /// Comma-separated rule names; all rules by default.
        #[arg(long, value_delimiter = ',', value_parser = parse_rule)]
        rules: Vec<RuleKind>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `matrix.csv`, `axioms.json` and witness files.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}

/// The one-line machine-readable error report.
pub fn error_line(e: &Error) -> String {
    format!("error: code={} message={}", e.code(), e.to_string().replace('\n', " "))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Allocate {
            input,
            rule,
            phantom_family,
            q1,
            q2,
            k1,
            k2,
            quorum_basis,
            budget,
            output,
            format,
        } => {
            let kind = resolve_rule(rule, phantom_family)?;
            let spec = RuleSpec {
                rule: kind,
                q1,
                q2,
                k1,
                k2,
                quorum_basis: match quorum_basis {
                    BasisArg::MedianTokens => QuorumBasis::MedianTokens,
                    BasisArg::NormalizedShare => QuorumBasis::NormalizedShare,
                },
            };
            let text = cmd_allocate(&input, &spec, budget, format == FormatArg::Json)?;
            emit(output.as_deref(), text.as_bytes())
        }
        Command::Generate {
            voters,
            projects,
            mix_weight,
            alpha,
            seed,
            output,
            truth,
        } => {
            let spec = GenSpec {
                n: voters,
                m: projects,
                mix_weight,
                dirichlet_alpha: alpha,
                seed,
            };
            let truth = truth.unwrap_or_else(|| default_truth_path(&output));
            cmd_generate(&spec, &output, &truth)
        }
        Command::Experiment { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::Config("no output directory in config or on the command line".into()))?;
            let rep = run_experiment_to_dir(&cfg, &dir)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "{} experiment written to {}", rep.experiment_name(), dir.display())?;
            for a in &rep.aggregates {
                let sweep = a.sweep.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                match a.mean {
                    Some(mean) => writeln!(out, "{}\t{}\t{}\tmean={}\tn={}", a.rule, sweep, a.metric, mean, a.count)?,
                    None => writeln!(out, "{}\t{}\t{}\tmean=-\tn=0", a.rule, sweep, a.metric)?,
                }
            }
            Ok(())
        }
        Command::Axioms {
            rules,
            trials,
            seed,
            output,
        } => {
            let kinds = if rules.is_empty() { RuleKind::ALL.to_vec() } else { rules };
            let specs: Vec<RuleSpec> = kinds.into_iter().map(matrix_rule).collect();
            let search = SearchConfig {
                trials,
                seed,
                ..SearchConfig::default()
            };
            let rep = run_axioms(&specs, &search)?;
            if let Some(dir) = &output {
                write_axioms_report(&rep, dir)?;
            }
            let mut out = std::io::stdout().lock();
            let green = rep.examples.iter().filter(|e| e.passes()).count();
            writeln!(out, "worked examples: {green}/{} pass", rep.examples.len())?;
            out.write_all(rep.table().as_bytes())?;
            Ok(())
        }
    }
}

impl ExperimentReport {
    fn experiment_name(&self) -> String {
        serde_json::to_value(self.experiment)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

fn resolve_rule(rule: Option<RuleKind>, family: Option<FamilyArg>) -> Result<RuleKind> {
    let from_family = family.map(|f| match f {
        FamilyArg::IndependentMarkets => RuleKind::IndependentMarkets,
        FamilyArg::Majoritarian => RuleKind::MajoritarianPhantoms,
    });
    match (rule, from_family) {
        (Some(r), Some(f)) if r != f => Err(Error::Config(format!(
            "--rule {r} conflicts with --phantom-family ({f})"
        ))),
        (Some(r), _) => Ok(r),
        (None, Some(f)) => Ok(f),
        (None, None) => Err(Error::Config("give --rule or --phantom-family".into())),
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().lock().write_all(bytes)?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AllocationRow<'a> {
    project: &'a str,
    share: f64,
    tokens: f64,
}

#[derive(Serialize)]
struct AllocationJson<'a> {
    rule: String,
    budget_tokens: f64,
    allocation: Vec<AllocationRow<'a>>,
}

/// Aggregates the ballot file at `input` and renders the allocation as CSV
/// (`project,share,tokens`) or JSON.
pub fn cmd_allocate(input: &Path, rule: &RuleSpec, budget_tokens: f64, json: bool) -> Result<String> {
    let profile = load_ballots_csv(input, budget_tokens)?;
    let shares = allocate(&profile, rule)?;
    let tokens = shares.tokens(budget_tokens);
    let rows: Vec<AllocationRow> = profile
        .project_ids()
        .iter()
        .zip(shares.shares())
        .zip(tokens)
        .map(|((id, &share), tokens)| AllocationRow { project: id, share, tokens })
        .collect();
    if json {
        let doc = AllocationJson {
            rule: rule.label(),
            budget_tokens,
            allocation: rows,
        };
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        return Ok(s);
    }
    let mut s = String::from("project,share,tokens\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", csv_field(r.project), r.share, r.tokens));
    }
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn default_truth_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.truth.csv"))
}

/// Writes a generated profile to `output` and its base vote, as a one-row
/// ballot file, to `truth`.
pub fn cmd_generate(spec: &GenSpec, output: &Path, truth: &Path) -> Result<()> {
    let (profile, base) = generate_profile(spec)?;
    let truth_profile = Profile::from_ballots(vec![base], 1.0)?;
    for (path, p) in [(output, &profile), (truth, &truth_profile)] {
        let mut buf = Vec::new();
        write_ballots_csv(p, &mut buf)?;
        fs::write(path, buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_resolution() {
        assert_eq!(resolve_rule(Some(RuleKind::Mean), None).unwrap(), RuleKind::Mean);
        assert_eq!(
            resolve_rule(None, Some(FamilyArg::Majoritarian)).unwrap(),
            RuleKind::MajoritarianPhantoms
        );
        assert!(resolve_rule(Some(RuleKind::Mean), Some(FamilyArg::Majoritarian)).is_err());
        assert!(resolve_rule(None, None).is_err());
    }

    #[test]
    fn truth_path_sits_next_to_output() {
        assert_eq!(
            default_truth_path(Path::new("/tmp/x/profile.csv")),
            PathBuf::from("/tmp/x/profile.truth.csv")
        );
    }

    #[test]
    fn error_line_is_single_line() {
        let e = Error::Parse {
            line: 3,
            message: "bad\ncell".into(),
        };
        let line = error_line(&e);
        assert!(line.starts_with("error: code=PARSE_ERROR message="));
        assert!(!line.contains('\n'));
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
