//! Ballots, profiles, allocations and rule parameters.
//!
//! The budget is normalized to 1 everywhere inside the engine: a ballot is a
//! point on the probability simplex (the voter's endowment normalized out) and
//! an allocation is a vector of budget fractions. Token amounts only appear
//! when reading ballot files and when printing results.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance for equality assertions between computed reals.
pub const EQ_TOLERANCE: f64 = 1e-12;

/// Sum that does not depend on the order of `values`.
///
/// Values are sorted before accumulation so that permuting voters or projects
/// cannot change the rounding of the result.
pub fn canonical_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum()
}

/// ℓ1 distance between two equal-length vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(l1(a, b))
}

#[inline]
pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// One voter's distribution of their tokens over the projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ballot(Vec<f64>);

impl Ballot {
    /// Validates `weights` and rescales them to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        Self::checked(weights, 0, true)
    }

    /// Validates `weights` without rescaling; the total may be below one
    /// (a voter who leaves part of the endowment unspent) but not above it.
    pub fn partial(weights: Vec<f64>) -> Result<Self> {
        Self::checked(weights, 0, false)
    }

    /// Unit ballot putting everything on `project`.
    pub fn unit(m: usize, project: usize) -> Self {
        let mut w = vec![0.0; m];
        w[project] = 1.0;
        Ballot(w)
    }

    fn checked(mut weights: Vec<f64>, voter: usize, normalize: bool) -> Result<Self> {
        for (project, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { voter, project });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight {
                    voter,
                    project,
                    value: w,
                });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyBallot { voter });
        }
        if normalize {
            // Ballots already on the simplex are left bit-for-bit untouched so
            // that validation is idempotent.
            if (total - 1.0).abs() > EQ_TOLERANCE {
                for w in weights.iter_mut() {
                    *w /= total;
                }
            }
        } else if total > 1.0 + SUM_TOLERANCE {
            return Err(Error::Overspent { voter, total });
        }
        Ok(Ballot(weights))
    }

    /// Builds a ballot from weights already known to lie on the simplex.
    pub(crate) fn from_simplex(weights: Vec<f64>) -> Self {
        Ballot(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Ballot {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The outcome of a rule: fractions of the budget per project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    /// Checks non-negativity and that the total does not exceed the budget.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        for (project, &s) in shares.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteWeight { voter: 0, project });
            }
            if s < 0.0 {
                return Err(Error::NegativeWeight {
                    voter: 0,
                    project,
                    value: s,
                });
            }
        }
        let total: f64 = shares.iter().sum();
        if total > 1.0 + SUM_TOLERANCE {
            return Err(Error::Overspent { voter: 0, total });
        }
        Ok(Allocation(shares))
    }

    pub(crate) fn from_shares(shares: Vec<f64>) -> Self {
        debug_assert!(shares.iter().all(|s| *s >= 0.0));
        Allocation(shares)
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Token amounts for a budget of `budget_tokens`.
    pub fn tokens(&self, budget_tokens: f64) -> Vec<f64> {
        self.0.iter().map(|s| s * budget_tokens).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Allocation {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A full election: `n` ballots over `m` projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    ballots: Vec<Ballot>,
    project_count: usize,
    budget_tokens: f64,
    project_ids: Vec<String>,
}

impl Profile {
    /// Validates raw rows and normalizes each ballot to sum to one.
    pub fn new(rows: Vec<Vec<f64>>, budget_tokens: f64) -> Result<Self> {
        Self::build(rows, budget_tokens, true)
    }

    /// Like [`Profile::new`] but keeps each ballot's total as given (at most
    /// one). Rules then use their general token-weighted formulas.
    pub fn with_partial_ballots(rows: Vec<Vec<f64>>, budget_tokens: f64) -> Result<Self> {
        Self::build(rows, budget_tokens, false)
    }

    /// Profile with the budget normalized to one token.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows, 1.0)
    }

    fn build(rows: Vec<Vec<f64>>, budget_tokens: f64, normalize: bool) -> Result<Self> {
        check_budget(budget_tokens)?;
        let m = match rows.first() {
            Some(r) => r.len(),
            None => return Err(Error::DegenerateProfile("profile has no ballots".into())),
        };
        if m == 0 {
            return Err(Error::DegenerateProfile("profile has no projects".into()));
        }
        let ballots = rows
            .into_iter()
            .enumerate()
            .map(|(voter, row)| {
                if row.len() != m {
                    return Err(Error::ShapeMismatch {
                        expected: m,
                        found: row.len(),
                    });
                }
                Ballot::checked(row, voter, normalize)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Profile {
            ballots,
            project_count: m,
            budget_tokens,
            project_ids: default_ids(m),
        })
    }

    /// Assembles a profile from ballots that were validated individually.
    pub fn from_ballots(ballots: Vec<Ballot>, budget_tokens: f64) -> Result<Self> {
        check_budget(budget_tokens)?;
        let m = ballots
            .first()
            .map(Ballot::len)
            .ok_or_else(|| Error::DegenerateProfile("profile has no ballots".into()))?;
        if m == 0 {
            return Err(Error::DegenerateProfile("profile has no projects".into()));
        }
        if let Some(b) = ballots.iter().find(|b| b.len() != m) {
            return Err(Error::ShapeMismatch {
                expected: m,
                found: b.len(),
            });
        }
        Ok(Profile {
            ballots,
            project_count: m,
            budget_tokens,
            project_ids: default_ids(m),
        })
    }

    pub fn with_project_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.project_count {
            return Err(Error::ShapeMismatch {
                expected: self.project_count,
                found: ids.len(),
            });
        }
        self.project_ids = ids;
        Ok(self)
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn ballot(&self, voter: usize) -> &Ballot {
        &self.ballots[voter]
    }

    /// Number of voters.
    pub fn n(&self) -> usize {
        self.ballots.len()
    }

    /// Number of projects.
    pub fn m(&self) -> usize {
        self.project_count
    }

    pub fn budget_tokens(&self) -> f64 {
        self.budget_tokens
    }

    pub fn project_ids(&self) -> &[String] {
        &self.project_ids
    }

    /// Votes on `project`, in voter order.
    pub fn column(&self, project: usize) -> Vec<f64> {
        self.ballots.iter().map(|b| b.0[project]).collect()
    }

    /// Raw rows, suitable for feeding back into [`Profile::new`].
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.ballots.iter().map(|b| b.0.clone()).collect()
    }

    pub fn check_voter(&self, voter: usize) -> Result<()> {
        if voter >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: voter,
                limit: self.n(),
            });
        }
        Ok(())
    }

    pub fn check_project(&self, project: usize) -> Result<()> {
        if project >= self.m() {
            return Err(Error::IndexOutOfRange {
                index: project,
                limit: self.m(),
            });
        }
        Ok(())
    }

    /// Copy with voter `voter`'s ballot replaced.
    pub fn with_ballot(&self, voter: usize, ballot: Ballot) -> Result<Self> {
        self.check_voter(voter)?;
        if ballot.len() != self.m() {
            return Err(Error::ShapeMismatch {
                expected: self.m(),
                found: ballot.len(),
            });
        }
        let mut next = self.clone();
        next.ballots[voter] = ballot;
        Ok(next)
    }

    /// Copy without voter `voter`. Fails if that would leave no voters.
    pub fn without_voter(&self, voter: usize) -> Result<Self> {
        self.check_voter(voter)?;
        if self.n() == 1 {
            return Err(Error::DegenerateProfile(
                "cannot remove the only voter".into(),
            ));
        }
        let mut next = self.clone();
        next.ballots.remove(voter);
        Ok(next)
    }

    /// Copy with `ballots` appended.
    pub fn with_added(&self, ballots: impl IntoIterator<Item = Ballot>) -> Result<Self> {
        let mut next = self.clone();
        for b in ballots {
            if b.len() != self.m() {
                return Err(Error::ShapeMismatch {
                    expected: self.m(),
                    found: b.len(),
                });
            }
            next.ballots.push(b);
        }
        Ok(next)
    }

    /// Disjoint union of two electorates over the same projects.
    pub fn union(&self, other: &Profile) -> Result<Self> {
        self.with_added(other.ballots.iter().cloned())
    }

    /// Copy with voters reordered: voter `k` of the result is voter `order[k]`.
    pub fn permute_voters(&self, order: &[usize]) -> Self {
        let mut next = self.clone();
        next.ballots = order.iter().map(|&i| self.ballots[i].clone()).collect();
        next
    }

    /// Copy with project columns reordered: column `k` is old column `order[k]`.
    pub fn permute_projects(&self, order: &[usize]) -> Self {
        let mut next = self.clone();
        next.ballots = self
            .ballots
            .iter()
            .map(|b| Ballot(order.iter().map(|&p| b.0[p]).collect()))
            .collect();
        next.project_ids = order.iter().map(|&p| self.project_ids[p].clone()).collect();
        next
    }

    /// Stable byte encoding used for reproducibility digests.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        hasher.update((self.m() as u64).to_le_bytes());
        for b in &self.ballots {
            for w in &b.0 {
                hasher.update(w.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Validates a raw profile and normalizes its ballots.
pub fn validate_profile(rows: Vec<Vec<f64>>, budget_tokens: f64) -> Result<Profile> {
    Profile::new(rows, budget_tokens)
}

fn check_budget(budget_tokens: f64) -> Result<()> {
    if !(budget_tokens.is_finite() && budget_tokens > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "budget must be a positive number of tokens, got {budget_tokens}"
        )));
    }
    Ok(())
}

fn default_ids(m: usize) -> Vec<String> {
    (1..=m).map(|p| format!("p{p}")).collect()
}

/// Reads a ballot file: a header of project ids followed by one row of token
/// amounts per voter.
pub fn load_ballots_csv(path: impl AsRef<Path>, budget_tokens: f64) -> Result<Profile> {
    let file = std::fs::File::open(path.as_ref())?;
    read_ballots_csv(file, budget_tokens)
}

pub fn read_ballots_csv<R: Read>(reader: R, budget_tokens: f64) -> Result<Profile> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let ids: Vec<String> = header.iter().map(str::to_owned).collect();
    if ids.is_empty() || ids.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header of project ids".into(),
        });
    }
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != ids.len() {
            return Err(Error::ShapeMismatch {
                expected: ids.len(),
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric cell '{cell}' in column {}", col + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::DegenerateProfile("ballot file has no voter rows".into()));
    }
    Profile::new(rows, budget_tokens)?.with_project_ids(ids)
}

/// Writes a profile in the ballot-file format. Values are printed with the
/// shortest representation that parses back to the same `f64`.
pub fn write_ballots_csv<W: Write>(profile: &Profile, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let map_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(profile.project_ids()).map_err(map_err)?;
    for b in profile.ballots() {
        w.write_record(b.weights().iter().map(|x| format!("{x}")))
            .map_err(map_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregation rules implemented by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Quadratic,
    Mean,
    QuorumMedian,
    CappedMedian,
    NormalizedMedian,
    Midpoint,
    IndependentMarkets,
    MajoritarianPhantoms,
}

impl RuleKind {
    pub const ALL: [RuleKind; 8] = [
        RuleKind::Quadratic,
        RuleKind::Mean,
        RuleKind::QuorumMedian,
        RuleKind::CappedMedian,
        RuleKind::NormalizedMedian,
        RuleKind::Midpoint,
        RuleKind::IndependentMarkets,
        RuleKind::MajoritarianPhantoms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Quadratic => "quadratic",
            RuleKind::Mean => "mean",
            RuleKind::QuorumMedian => "quorum_median",
            RuleKind::CappedMedian => "capped_median",
            RuleKind::NormalizedMedian => "normalized_median",
            RuleKind::Midpoint => "midpoint",
            RuleKind::IndependentMarkets => "independent_markets",
            RuleKind::MajoritarianPhantoms => "majoritarian_phantoms",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown rule '{s}'")))
    }
}

/// What the minimum-share quorum `q1` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuorumBasis {
    /// The project's positive-vote median, in ballot units.
    #[default]
    MedianTokens,
    /// The project's normalized median share.
    NormalizedShare,
}

pub const DEFAULT_Q1: f64 = 0.0017;
pub const DEFAULT_Q2: usize = 2;
pub const DEFAULT_K1: f64 = 0.125;
pub const DEFAULT_K2: f64 = 0.0017;

/// A rule together with its parameters.
///
/// `q1`/`q2` only affect the quorum median; `k1`/`k2` only the capped median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub rule: RuleKind,
    #[serde(default = "default_q1")]
    pub q1: f64,
    #[serde(default = "default_q2")]
    pub q2: usize,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_k2")]
    pub k2: f64,
    #[serde(default)]
    pub quorum_basis: QuorumBasis,
}

fn default_q1() -> f64 {
    DEFAULT_Q1
}
fn default_q2() -> usize {
    DEFAULT_Q2
}
fn default_k1() -> f64 {
    DEFAULT_K1
}
fn default_k2() -> f64 {
    DEFAULT_K2
}

impl RuleSpec {
    pub fn new(rule: RuleKind) -> Self {
        RuleSpec {
            rule,
            q1: DEFAULT_Q1,
            q2: DEFAULT_Q2,
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            quorum_basis: QuorumBasis::default(),
        }
    }

    pub fn quorum_median(q1: f64, q2: usize) -> Self {
        RuleSpec {
            q1,
            q2,
            ..Self::new(RuleKind::QuorumMedian)
        }
    }

    pub fn capped_median(k1: f64, k2: f64) -> Self {
        RuleSpec {
            k1,
            k2,
            ..Self::new(RuleKind::CappedMedian)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            RuleKind::QuorumMedian => {
                if !(0.0..=1.0).contains(&self.q1) {
                    return Err(Error::InvalidParameter(format!(
                        "q1 must lie in [0, 1], got {}",
                        self.q1
                    )));
                }
            }
            RuleKind::CappedMedian => {
                if !(self.k1 > 0.0 && self.k1 <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "K1 must lie in (0, 1], got {}",
                        self.k1
                    )));
                }
                if !(0.0..1.0).contains(&self.k2) {
                    return Err(Error::InvalidParameter(format!(
                        "K2 must lie in [0, 1), got {}",
                        self.k2
                    )));
                }
                if self.k2 >= self.k1 {
                    return Err(Error::InvalidParameter(format!(
                        "K2 ({}) must be below K1 ({})",
                        self.k2, self.k1
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Human-readable identifier including the parameters that matter.
    pub fn label(&self) -> String {
        match self.rule {
            RuleKind::QuorumMedian => {
                let basis = match self.quorum_basis {
                    QuorumBasis::MedianTokens => "",
                    QuorumBasis::NormalizedShare => ",share",
                };
                format!("quorum_median[q1={},q2={}{}]", self.q1, self.q2, basis)
            }
            RuleKind::CappedMedian => {
                format!("capped_median[k1={},k2={}]", self.k1, self.k2)
            }
            other => other.name().to_owned(),
        }
    }
}

impl From<RuleKind> for RuleSpec {
    fn from(kind: RuleKind) -> Self {
        RuleSpec::new(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_ballot_rows() {
        let p = Profile::from_rows(vec![vec![2.0, 2.0]]).unwrap();
        assert_eq!(p.ballot(0).weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_negative_weight() {
        let err = Profile::from_rows(vec![vec![-0.1, 1.1]]).unwrap_err();
        assert!(matches!(err, Error::NegativeWeight { project: 0, .. }));
    }

    #[test]
    fn rejects_empty_ballot() {
        let err = Profile::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert_eq!(err, Error::EmptyBallot { voter: 1 });
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = Profile::from_rows(vec![vec![1.0, 0.0], vec![1.0]]).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn rejects_bad_budget() {
        assert!(Profile::new(vec![vec![1.0]], 0.0).is_err());
        assert!(Profile::new(vec![vec![1.0]], f64::NAN).is_err());
    }

    #[test]
    fn partial_ballots_keep_their_mass() {
        let p = Profile::with_partial_ballots(vec![vec![0.4, 0.2]], 1.0).unwrap();
        assert_eq!(p.ballot(0).weights(), &[0.4, 0.2]);
        assert!(matches!(
            Profile::with_partial_ballots(vec![vec![0.8, 0.4]], 1.0),
            Err(Error::Overspent { .. })
        ));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((l1_distance(&[0.75, 0.25], &[0.375, 0.625]).unwrap() - 0.75).abs() < 1e-12);
        assert!((l1_distance(&[0.9, 0.1], &[0.4, 0.6]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            l1_distance(&[1.0], &[0.5, 0.5]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn csv_two_voters() {
        let data = "p1,p2\n3,1\n0,4\n";
        let p = read_ballots_csv(data.as_bytes(), 8.0).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.m(), 2);
        assert_eq!(p.ballot(0).weights(), &[0.75, 0.25]);
        assert_eq!(p.ballot(1).weights(), &[0.0, 1.0]);
        assert_eq!(p.budget_tokens(), 8.0);
        assert_eq!(p.project_ids(), &["p1".to_string(), "p2".to_string()]);
    }

    #[test]
    fn csv_non_numeric_cell() {
        let err = read_ballots_csv("p1,p2\n1,x\n".as_bytes(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn csv_ragged_row() {
        let err = read_ballots_csv("p1,p2\n1,2\n3\n".as_bytes(), 1.0).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn csv_zero_row_names_voter() {
        let err = read_ballots_csv("a,b\n1,2\n0,0\n".as_bytes(), 1.0).unwrap_err();
        assert_eq!(err, Error::EmptyBallot { voter: 1 });
    }

    #[test]
    fn rule_spec_validation() {
        assert!(RuleSpec::capped_median(0.5, 0.6).validate().is_err());
        assert!(RuleSpec::capped_median(0.0, 0.0).validate().is_err());
        assert!(RuleSpec::capped_median(1.0, 0.0).validate().is_ok());
        assert!(RuleSpec::quorum_median(1.5, 2).validate().is_err());
    }

    #[test]
    fn rule_spec_json_defaults() {
        let spec: RuleSpec = serde_json::from_str(r#"{"rule":"capped_median","k1":0.3}"#).unwrap();
        assert_eq!(spec.rule, RuleKind::CappedMedian);
        assert_eq!(spec.k1, 0.3);
        assert_eq!(spec.k2, DEFAULT_K2);
        assert_eq!(spec.q2, DEFAULT_Q2);
    }

    #[test]
    fn canonical_sum_is_order_free() {
        let a = [0.1, 0.2, 0.3, 1e-17, 0.7];
        let b = [0.7, 1e-17, 0.3, 0.1, 0.2];
        assert_eq!(canonical_sum(&a).to_bits(), canonical_sum(&b).to_bits());
    }
}
