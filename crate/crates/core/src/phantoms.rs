//! Moving-phantom mechanisms.
//!
//! `n + 1` phantom votes `f_0(t) ≥ … ≥ f_n(t)` are added to every project's
//! column and the per-project median is taken. The scalar `t` is tuned so the
//! medians exhaust the budget exactly; the sum of medians is continuous and
//! non-decreasing in `t`, so bisection on `[0, 1]` finds it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonical_sum, Allocation, Profile};

pub const MAX_ITERATIONS: usize = 200;
pub const SUM_TARGET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomFamily {
    /// `f_k(t) = min(t (n - k), 1)`.
    IndependentMarkets,
    /// `f_k(t) = clamp(t (n + 1) - k, 0, 1)`: phantom `k` sweeps from 0 to 1
    /// while `t` crosses `[k/(n+1), (k+1)/(n+1)]`.
    Majoritarian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSystem {
    pub family: PhantomFamily,
    pub n: usize,
}

impl PhantomSystem {
    pub fn new(family: PhantomFamily, n: usize) -> Self {
        PhantomSystem { family, n }
    }

    /// Value of phantom `k` at `t`.
    pub fn value(&self, k: usize, t: f64) -> Result<f64> {
        if k > self.n {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.n + 1,
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("t must lie in [0, 1], got {t}")));
        }
        Ok(self.value_unchecked(k, t))
    }

    #[inline]
    fn value_unchecked(&self, k: usize, t: f64) -> f64 {
        let n = self.n as f64;
        let k = k as f64;
        match self.family {
            PhantomFamily::IndependentMarkets => (t * (n - k)).min(1.0),
            PhantomFamily::Majoritarian => (t * (n + 1.0) - k).clamp(0.0, 1.0),
        }
    }

    /// All phantoms at `t` in ascending order (`f_n` first).
    fn ascending(&self, t: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..=self.n).rev().map(|k| self.value_unchecked(k, t)));
    }
}

pub fn phantom_value(system: &PhantomSystem, k: usize, t: f64) -> Result<f64> {
    system.value(k, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSolution {
    pub t_star: f64,
    pub allocation: Allocation,
    /// Number of bisection probes evaluated.
    pub iterations: usize,
    /// `|Σ_p median_p(t*) − 1|`.
    pub residual: f64,
}

/// Columns sorted once so every probe is a linear merge per project.
#[derive(Debug, Clone)]
pub struct PhantomMedians {
    system: PhantomSystem,
    sorted_columns: Vec<Vec<f64>>,
}

impl PhantomMedians {
    pub fn new(profile: &Profile, family: PhantomFamily) -> Self {
        let sorted_columns = (0..profile.m())
            .map(|p| {
                let mut c = profile.column(p);
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        PhantomMedians {
            system: PhantomSystem::new(family, profile.n()),
            sorted_columns,
        }
    }

    /// Per-project medians of phantoms and votes at `t`.
    pub fn medians_at(&self, t: f64) -> Vec<f64> {
        let mut phantoms = Vec::with_capacity(self.system.n + 1);
        self.system.ascending(t, &mut phantoms);
        self.sorted_columns
            .iter()
            .map(|votes| kth_of_two_sorted(&phantoms, votes, self.system.n))
            .collect()
    }

    pub fn sum_at(&self, t: f64) -> f64 {
        canonical_sum(&self.medians_at(t))
    }
}

/// The `k`-th smallest (0-based) element of the union of two ascending slices.
fn kth_of_two_sorted(a: &[f64], b: &[f64], k: usize) -> f64 {
    debug_assert!(k < a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    loop {
        let take_a = j >= b.len() || (i < a.len() && a[i] <= b[j]);
        let v = if take_a { a[i] } else { b[j] };
        if i + j == k {
            return v;
        }
        if take_a {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Finds `t*` with `Σ_p median_p(t*) = 1` by bisection and returns the
/// corresponding medians as the allocation.
pub fn solve_phantoms(profile: &Profile, family: PhantomFamily) -> Result<PhantomSolution> {
    let medians = PhantomMedians::new(profile, family);
    let top = medians.sum_at(1.0);
    if top < 1.0 - SUM_TARGET_TOLERANCE {
        return Err(Error::DegenerateProfile(format!(
            "phantom medians reach only {top} of the budget at t = 1"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let shares = medians.medians_at(mid);
        let sum = canonical_sum(&shares);
        residual = (sum - 1.0).abs();
        if residual <= SUM_TARGET_TOLERANCE {
            return Ok(PhantomSolution {
                t_star: mid,
                allocation: Allocation::from_shares(shares),
                iterations: iteration,
                residual,
            });
        }
        if sum < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_value_examples() {
        let im = PhantomSystem::new(PhantomFamily::IndependentMarkets, 3);
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(im.value(3, t).unwrap(), 0.0);
        }
        assert!((im.value(1, 0.4).unwrap() - 0.8).abs() < 1e-15);
        let maj = PhantomSystem::new(PhantomFamily::Majoritarian, 2);
        assert!((maj.value(1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(maj.value(1, 0.2).unwrap(), 0.0);
        assert_eq!(maj.value(1, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn phantom_value_rejects_bad_index() {
        let im = PhantomSystem::new(PhantomFamily::IndependentMarkets, 3);
        assert!(matches!(im.value(4, 0.5), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(im.value(0, 1.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn phantoms_are_ordered_and_monotone() {
        for family in [PhantomFamily::IndependentMarkets, PhantomFamily::Majoritarian] {
            let sys = PhantomSystem::new(family, 5);
            let mut prev = vec![0.0; 6];
            for step in 0..=100 {
                let t = step as f64 / 100.0;
                let vals: Vec<f64> = (0..=5).map(|k| sys.value(k, t).unwrap()).collect();
                for k in 0..5 {
                    assert!(vals[k] >= vals[k + 1]);
                }
                for k in 0..=5 {
                    assert!(vals[k] >= prev[k]);
                }
                prev = vals;
            }
        }
    }

    #[test]
    fn kth_merge() {
        let a = [0.0, 0.5, 1.0];
        let b = [0.2, 0.3];
        let all = [0.0, 0.2, 0.3, 0.5, 1.0];
        for (k, want) in all.iter().enumerate() {
            assert_eq!(kth_of_two_sorted(&a, &b, k), *want);
        }
    }

    #[test]
    fn unanimity_returns_the_ballot() {
        let x = vec![0.5, 0.3, 0.2];
        let p = Profile::from_rows(vec![x.clone(); 4]).unwrap();
        let sol = solve_phantoms(&p, PhantomFamily::Majoritarian).unwrap();
        for (a, b) in sol.allocation.shares().iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_voter_either_family() {
        let p = Profile::from_rows(vec![vec![0.6, 0.4]]).unwrap();
        for family in [PhantomFamily::IndependentMarkets, PhantomFamily::Majoritarian] {
            let sol = solve_phantoms(&p, family).unwrap();
            assert!((sol.allocation.shares()[0] - 0.6).abs() < 1e-12);
            assert!((sol.allocation.shares()[1] - 0.4).abs() < 1e-12);
            assert!(sol.residual <= 1e-12);
        }
    }
}
