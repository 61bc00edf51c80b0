//! Outcome quality and fairness measures.
//!
//! "Welfare" here is an ℓ1 distance, so every welfare figure is a cost:
//! lower is better.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonical_sum, l1, l1_distance, Allocation, Profile, EQ_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    /// Mean per-voter ℓ1 distance to the outcome (welfare-cost, lower is better).
    pub utilitarian: f64,
    /// Largest per-voter ℓ1 distance to the outcome (welfare-cost, lower is better).
    pub egalitarian: f64,
}

fn voter_distances(profile: &Profile, outcome: &[f64]) -> Result<Vec<f64>> {
    if outcome.len() != profile.m() {
        return Err(Error::ShapeMismatch {
            expected: profile.m(),
            found: outcome.len(),
        });
    }
    Ok(profile
        .ballots()
        .iter()
        .map(|b| l1(b.weights(), outcome))
        .collect())
}

/// Sum over voters of the ℓ1 distance to `outcome`.
pub fn total_distance(profile: &Profile, outcome: &[f64]) -> Result<f64> {
    Ok(canonical_sum(&voter_distances(profile, outcome)?))
}

pub fn utilitarian_welfare(profile: &Profile, outcome: &[f64]) -> Result<f64> {
    Ok(total_distance(profile, outcome)? / profile.n() as f64)
}

pub fn egalitarian_welfare(profile: &Profile, outcome: &[f64]) -> Result<f64> {
    Ok(voter_distances(profile, outcome)?
        .into_iter()
        .fold(0.0, f64::max))
}

pub fn welfare_report(profile: &Profile, outcome: &[f64]) -> Result<WelfareReport> {
    Ok(WelfareReport {
        utilitarian: utilitarian_welfare(profile, outcome)?,
        egalitarian: egalitarian_welfare(profile, outcome)?,
    })
}

/// Gini index `Σ_i Σ_j |a_i − a_j| / (2 m Σ a)` in `O(m log m)`.
///
/// Each gap between consecutive sorted values is crossed by `k (m − k)`
/// unordered pairs, so the double sum is `2 Σ_k gap_k k (m − k)`.
pub fn gini_index(outcome: &[f64]) -> Result<f64> {
    let m = outcome.len();
    let total = canonical_sum(outcome);
    if m == 0 || total <= 0.0 {
        return Err(Error::DegenerateProfile("Gini index of a zero allocation".into()));
    }
    let mut sorted = outcome.to_vec();
    sorted.sort_by(f64::total_cmp);
    let crossed: f64 = sorted
        .windows(2)
        .enumerate()
        .map(|(idx, w)| {
            let k = (idx + 1) as f64;
            (w[1] - w[0]) * k * (m as f64 - k)
        })
        .sum();
    Ok(crossed / (m as f64 * total))
}

/// Result of a proportionality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalityVerdict {
    pub holds: bool,
    /// A coalition of single-minded voters and the project they back, when
    /// that project is short of its guaranteed share.
    pub witness: Option<(Vec<usize>, usize)>,
}

/// Single-minded voters per project: everything on one project.
fn single_minded(profile: &Profile) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); profile.m()];
    for (i, b) in profile.ballots().iter().enumerate() {
        let support: Vec<usize> = b
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(p, _)| p)
            .collect();
        if let [p] = support[..] {
            groups[p].push(i);
        }
    }
    groups
}

/// Any coalition of at least `⌈n/k⌉` voters that all put their whole
/// ballot on one project must see that project receive at least `1/k`.
///
/// Checking the full set of single-minded supporters per project is enough:
/// every qualifying coalition is a subset of it with the same premise.
pub fn proportionality_check(
    profile: &Profile,
    outcome: &[f64],
    k: usize,
) -> Result<ProportionalityVerdict> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if outcome.len() != profile.m() {
        return Err(Error::ShapeMismatch {
            expected: profile.m(),
            found: outcome.len(),
        });
    }
    let threshold = profile.n().div_ceil(k);
    let guaranteed = 1.0 / k as f64;
    for (p, group) in single_minded(profile).into_iter().enumerate() {
        if group.len() >= threshold && outcome[p] < guaranteed - EQ_TOLERANCE {
            return Ok(ProportionalityVerdict {
                holds: false,
                witness: Some((group, p)),
            });
        }
    }
    Ok(ProportionalityVerdict {
        holds: true,
        witness: None,
    })
}

/// ℓ1 distance to the designated ground-truth allocation.
pub fn ground_truth_alignment(outcome: &[f64], truth: &[f64]) -> Result<f64> {
    l1_distance(outcome, truth)
}

/// An allocation minimizing the total ℓ1 distance to all ballots.
///
/// Each project's cost `Σ_i |y − x_ip|` is convex and piecewise linear in
/// `y` with slope `2·#{x_ip ≤ y} − n`, so the optimum fills the cheapest
/// unit-slope segments across all projects until the budget is spent.
pub fn welfare_optimum(profile: &Profile) -> Allocation {
    let n = profile.n() as i64;
    // (slope, project, start, end)
    let mut segments: Vec<(i64, usize, f64, f64)> = Vec::new();
    for p in 0..profile.m() {
        let mut col = profile.column(p);
        col.sort_by(f64::total_cmp);
        let mut start = 0.0;
        let mut passed = 0i64;
        for (idx, &x) in col.iter().enumerate() {
            if x > start {
                segments.push((2 * passed - n, p, start, x));
                start = x;
            }
            passed = idx as i64 + 1;
        }
        if start < 1.0 {
            segments.push((2 * passed - n, p, start, 1.0));
        }
    }
    segments.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut shares = vec![0.0; profile.m()];
    let mut remaining = 1.0_f64;
    for (_, p, start, end) in segments {
        if remaining <= 0.0 {
            break;
        }
        let take = (end - start).min(remaining);
        shares[p] += take;
        remaining -= take;
    }
    Allocation::from_shares(shares)
}
