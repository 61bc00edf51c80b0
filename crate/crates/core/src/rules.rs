//! Non-phantom aggregation rules and the rule dispatcher.
//!
//! All rules take token-weighted ballots, so they also accept profiles built
//! with [`Profile::with_partial_ballots`]; on normalized profiles the
//! token-weighted formulas reduce to the usual per-voter averages.

use crate::error::{Error, Result};
use crate::model::{canonical_sum, l1, Allocation, Profile, QuorumBasis, RuleKind, RuleSpec, EQ_TOLERANCE};
use crate::phantoms::{solve_phantoms, PhantomFamily};

/// Per-project medians before normalization, plus supporter counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSummary {
    pub raw_medians: Vec<f64>,
    /// Voters with strictly positive weight on the project.
    pub supporter_counts: Vec<usize>,
}

/// Median of `values`; 0 for an empty slice, mean of the two middle order
/// statistics for even lengths. Reorders `values`.
pub fn median(values: &mut [f64]) -> f64 {
    let len = values.len();
    if len == 0 {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    if len % 2 == 1 {
        values[len / 2]
    } else {
        0.5 * (values[len / 2 - 1] + values[len / 2])
    }
}

pub fn median_summary(profile: &Profile, positive_only: bool) -> MedianSummary {
    let m = profile.m();
    let mut raw_medians = Vec::with_capacity(m);
    let mut supporter_counts = Vec::with_capacity(m);
    for p in 0..m {
        let column = profile.column(p);
        let mut positive: Vec<f64> = column.iter().copied().filter(|&x| x > 0.0).collect();
        supporter_counts.push(positive.len());
        let med = if positive_only {
            median(&mut positive)
        } else {
            let mut all = column;
            median(&mut all)
        };
        raw_medians.push(med);
    }
    MedianSummary {
        raw_medians,
        supporter_counts,
    }
}

fn normalize(values: Vec<f64>, what: &str) -> Result<Allocation> {
    let total = canonical_sum(&values);
    if total <= 0.0 {
        return Err(Error::DegenerateProfile(format!("{what} are all zero")));
    }
    Ok(Allocation::from_shares(
        values.into_iter().map(|v| v / total).collect(),
    ))
}

/// Round 1: shares proportional to summed square roots of token amounts.
pub fn quadratic_rule(profile: &Profile) -> Result<Allocation> {
    let weights = (0..profile.m())
        .map(|p| {
            let roots: Vec<f64> = profile.column(p).iter().map(|x| x.sqrt()).collect();
            canonical_sum(&roots)
        })
        .collect();
    normalize(weights, "square-root vote totals")
}

/// Round 2: shares proportional to tokens received.
pub fn mean_rule(profile: &Profile) -> Result<Allocation> {
    let totals = (0..profile.m())
        .map(|p| canonical_sum(&profile.column(p)))
        .collect();
    normalize(totals, "vote totals")
}

/// Per-project medians over all votes, normalized to the budget.
pub fn normalized_median_rule(profile: &Profile) -> Result<Allocation> {
    normalize(median_summary(profile, false).raw_medians, "medians")
}

/// Round 3: positive-vote medians, normalized, with projects failing either
/// quorum zeroed before renormalizing.
pub fn quorum_median_rule(
    profile: &Profile,
    q1: f64,
    q2: usize,
    basis: QuorumBasis,
) -> Result<Allocation> {
    let summary = median_summary(profile, true);
    let total = canonical_sum(&summary.raw_medians);
    if total <= 0.0 {
        return Err(Error::DegenerateProfile("no project has positive votes".into()));
    }
    let kept: Vec<f64> = summary
        .raw_medians
        .iter()
        .zip(&summary.supporter_counts)
        .map(|(&raw, &count)| {
            let share = raw / total;
            let level = match basis {
                QuorumBasis::MedianTokens => raw,
                QuorumBasis::NormalizedShare => share,
            };
            if count >= q2 && level >= q1 - EQ_TOLERANCE {
                share
            } else {
                0.0
            }
        })
        .collect();
    normalize(kept, "shares of projects meeting quorum")
}

/// Round 4: all-vote medians, one-shot cap at `k1` with the excess spread
/// proportionally, then elimination below `k2` with the freed mass spread
/// proportionally over the survivors.
pub fn capped_median_rule(profile: &Profile, k1: f64, k2: f64) -> Result<Allocation> {
    let capped = RuleSpec::capped_median(k1, k2);
    capped.validate()?;
    let shares = normalized_median_rule(profile)?.into_inner();
    let share_total = canonical_sum(&shares);
    let over: Vec<f64> = shares.iter().map(|&c| (c - k1).max(0.0)).collect();
    let excess = canonical_sum(&over);
    let capped: Vec<f64> = shares
        .iter()
        .map(|&c| c.min(k1) + excess * c / share_total)
        .collect();

    let (survivors, eliminated): (Vec<f64>, Vec<f64>) = capped.iter().partition(|&&d| d >= k2);
    let surviving_total = canonical_sum(&survivors);
    if survivors.is_empty() || surviving_total <= 0.0 {
        return Err(Error::DegenerateProfile(format!(
            "every project falls below the elimination floor {k2}"
        )));
    }
    let freed = canonical_sum(&eliminated);
    let boosted = capped
        .iter()
        .map(|&d| if d < k2 { 0.0 } else { d + freed * d / surviving_total })
        .collect();
    normalize(boosted, "capped shares")
}

/// The ballot with the smallest total ℓ1 distance to all ballots; totals
/// within `EQ_TOLERANCE` (relative) tie, and ties go to the lowest voter
/// index.
pub fn midpoint_rule(profile: &Profile) -> Result<Allocation> {
    let ballots = profile.ballots();
    let mut best: Option<(usize, f64)> = None;
    for (i, bi) in ballots.iter().enumerate() {
        let distances: Vec<f64> = ballots
            .iter()
            .map(|bj| l1(bi.weights(), bj.weights()))
            .collect();
        let total = canonical_sum(&distances);
        if best.is_none_or(|(_, b)| total < b - EQ_TOLERANCE * b.max(1.0)) {
            best = Some((i, total));
        }
    }
    let (winner, _) = best.expect("profiles have at least one voter");
    Ok(Allocation::from_shares(ballots[winner].weights().to_vec()))
}

/// Evaluates `spec` on `profile`.
pub fn allocate(profile: &Profile, spec: &RuleSpec) -> Result<Allocation> {
    match spec.rule {
        RuleKind::Quadratic => quadratic_rule(profile),
        RuleKind::Mean => mean_rule(profile),
        RuleKind::QuorumMedian => {
            spec.validate()?;
            quorum_median_rule(profile, spec.q1, spec.q2, spec.quorum_basis)
        }
        RuleKind::CappedMedian => capped_median_rule(profile, spec.k1, spec.k2),
        RuleKind::NormalizedMedian => normalized_median_rule(profile),
        RuleKind::Midpoint => midpoint_rule(profile),
        RuleKind::IndependentMarkets => {
            solve_phantoms(profile, PhantomFamily::IndependentMarkets).map(|s| s.allocation)
        }
        RuleKind::MajoritarianPhantoms => {
            solve_phantoms(profile, PhantomFamily::Majoritarian).map(|s| s.allocation)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(rows: &[&[f64]]) -> Profile {
        Profile::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&mut []), 0.0);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn quadratic_examples() {
        let a = quadratic_rule(&profile(&[&[0.01, 0.99], &[0.01, 0.99], &[0.99, 0.01]])).unwrap();
        assert_close(a.shares(), &[0.364, 0.636], 1e-3);
        let a = quadratic_rule(&profile(&[&[0.25; 4]])).unwrap();
        assert_close(a.shares(), &[0.25; 4], 1e-15);
        let a = quadratic_rule(&profile(&[&[0.7, 0.3], &[0.4, 0.6], &[0.3, 0.7]])).unwrap();
        assert_close(a.shares(), &[0.483, 0.517], 1e-3);
    }

    #[test]
    fn mean_examples() {
        let a = mean_rule(&profile(&[&[0.75, 0.25], &[0.0, 1.0]])).unwrap();
        assert_close(a.shares(), &[0.375, 0.625], 1e-15);
        let a = mean_rule(&profile(&[&[1.0, 0.0], &[1.0, 0.0], &[0.2, 0.8]])).unwrap();
        assert_close(a.shares(), &[0.733, 0.267], 1e-3);
        let x = [0.1, 0.2, 0.3, 0.4];
        let a = mean_rule(&profile(&[&x, &x, &x, &x, &x])).unwrap();
        assert_close(a.shares(), &x, 1e-12);
    }

    #[test]
    fn median_summary_examples() {
        let p = profile(&[&[0.57, 0.24, 0.19], &[0.39, 0.48, 0.13], &[0.5, 0.1, 0.4]]);
        assert_eq!(median_summary(&p, false).raw_medians, vec![0.5, 0.24, 0.19]);

        let s = median_summary(&profile(&[&[1.0, 0.0], &[0.0, 1.0]]), true);
        assert_eq!(s.raw_medians, vec![1.0, 1.0]);
        assert_eq!(s.supporter_counts, vec![1, 1]);

        let s = median_summary(&profile(&[&[0.0, 1.0], &[0.0, 1.0]]), true);
        assert_eq!(s.raw_medians, vec![0.0, 1.0]);
        assert_eq!(s.supporter_counts, vec![0, 2]);
    }

    #[test]
    fn normalized_median_examples() {
        // The third ballot spends 1.01; all three are read in units of 1.01
        // tokens so their medians keep the raw ratios.
        let rows = [[0.57, 0.24, 0.19], [0.39, 0.48, 0.13], [0.44, 0.09, 0.48]];
        let p = Profile::with_partial_ballots(
            rows.iter().map(|r| r.iter().map(|x| x / 1.01).collect()).collect(),
            1.0,
        )
        .unwrap();
        let a = normalized_median_rule(&p).unwrap();
        assert_close(a.shares(), &[0.506, 0.276, 0.218], 1e-3);
        // Rescaling the third ballot alone moves the first median.
        let p = profile(&[&rows[0], &rows[1], &rows[2]]);
        let a = normalized_median_rule(&p).unwrap();
        assert!((a.shares()[0] - 0.506).abs() > 1e-3);

        // The voter (0.4, 0.2) leaves part of the endowment unspent.
        let p = Profile::with_partial_ballots(
            vec![vec![0.1, 0.9], vec![0.4, 0.2], vec![0.6, 0.1]],
            1.0,
        )
        .unwrap();
        let a = normalized_median_rule(&p).unwrap();
        assert_close(a.shares(), &[0.667, 0.333], 1e-3);

        let x = [0.5, 0.3, 0.2];
        let a = normalized_median_rule(&profile(&[&x, &x, &x])).unwrap();
        assert_close(a.shares(), &x, 1e-15);
    }

    #[test]
    fn normalized_median_all_zero_is_degenerate() {
        let p = profile(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(normalized_median_rule(&p), Err(Error::DegenerateProfile(_))));
    }

    #[test]
    fn quorum_median_examples() {
        let p = profile(&[&[0.2, 0.8], &[0.1, 0.9], &[0.5, 0.5]]);
        let a = quorum_median_rule(&p, 0.3, 2, QuorumBasis::MedianTokens).unwrap();
        assert_eq!(a.shares(), &[0.0, 1.0]);
        let a = quorum_median_rule(&p, 0.3, 2, QuorumBasis::NormalizedShare).unwrap();
        assert_eq!(a.shares(), &[0.0, 1.0]);

        // Misreport from the same instance: p1 now has median exactly 0.3.
        let p = profile(&[&[0.0, 1.0], &[0.1, 0.9], &[0.5, 0.5]]);
        let a = quorum_median_rule(&p, 0.3, 2, QuorumBasis::MedianTokens).unwrap();
        assert_close(a.shares(), &[0.25, 0.75], 1e-12);
        // Under the share reading p1 (0.25 < 0.3) is dropped.
        let a = quorum_median_rule(&p, 0.3, 2, QuorumBasis::NormalizedShare).unwrap();
        assert_eq!(a.shares(), &[0.0, 1.0]);
    }

    #[test]
    fn quorum_disabled_matches_positive_medians() {
        let p = profile(&[&[0.6, 0.4, 0.0], &[0.1, 0.2, 0.7], &[0.0, 0.5, 0.5], &[0.3, 0.3, 0.4]]);
        let a = quorum_median_rule(&p, 0.0, 0, QuorumBasis::MedianTokens).unwrap();
        let s = median_summary(&p, true).raw_medians;
        let total: f64 = canonical_sum(&s);
        let want: Vec<f64> = s.iter().map(|x| x / total).collect();
        assert_close(a.shares(), &want, 1e-15);
    }

    #[test]
    fn quorum_unreachable_is_degenerate() {
        let p = profile(&[&[0.1, 0.9], &[0.1, 0.9]]);
        for basis in [QuorumBasis::MedianTokens, QuorumBasis::NormalizedShare] {
            assert!(matches!(
                quorum_median_rule(&p, 0.5, 3, basis),
                Err(Error::DegenerateProfile(_))
            ));
            assert!(matches!(
                quorum_median_rule(&p, 0.95, 2, basis),
                Err(Error::DegenerateProfile(_))
            ));
        }
        // With q2 reachable only p2 survives.
        let a = quorum_median_rule(&p, 0.5, 2, QuorumBasis::MedianTokens).unwrap();
        assert_eq!(a.shares(), &[0.0, 1.0]);
    }

    #[test]
    fn capped_median_examples() {
        let p = profile(&[&[0.57, 0.24, 0.19], &[0.39, 0.48, 0.13], &[0.44, 0.09, 0.48]]);
        let capped = capped_median_rule(&p, 1.0, 0.0).unwrap();
        let plain = normalized_median_rule(&p).unwrap();
        assert_close(capped.shares(), plain.shares(), 1e-12);

        let x: &[f64] = &[0.8, 0.1, 0.1];
        let p = profile(&[x, x, x]);
        let a = capped_median_rule(&p, 0.5, 0.0).unwrap();
        assert_close(a.shares(), &[0.74, 0.13, 0.13], 1e-12);
        assert!((a.total() - 1.0).abs() < 1e-12);

        let a = capped_median_rule(&p, 1.0, 0.15).unwrap();
        assert_close(a.shares(), &[1.0, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn capped_median_rejects_bad_parameters() {
        let p = profile(&[&[0.5, 0.5]]);
        assert!(matches!(
            capped_median_rule(&p, 0.3, 0.4),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            capped_median_rule(&p, 0.9, 0.6),
            Err(Error::DegenerateProfile(_))
        ));
    }

    #[test]
    fn midpoint_examples() {
        let a = midpoint_rule(&profile(&[&[0.9, 0.1], &[0.4, 0.6], &[0.2, 0.8]])).unwrap();
        assert_eq!(a.shares(), &[0.4, 0.6]);
        let a = midpoint_rule(&profile(&[&[0.3, 0.7]])).unwrap();
        assert_eq!(a.shares(), &[0.3, 0.7]);
        let a = midpoint_rule(&profile(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(a.shares(), &[1.0, 0.0]);
    }

    #[test]
    fn midpoint_ties_go_to_lowest_index() {
        let p = profile(&[
            &[0.8, 0.1, 0.05, 0.05],
            &[0.1, 0.8, 0.05, 0.05],
            &[0.05, 0.05, 0.8, 0.1],
            &[0.05, 0.05, 0.1, 0.8],
        ]);
        assert_eq!(midpoint_rule(&p).unwrap().shares(), &[0.8, 0.1, 0.05, 0.05]);
    }

    #[test]
    fn rounding_does_not_break_ties() {
        // Voters 0 and 2 have equal totals; rounding differs once doubled.
        let rows: &[&[f64]] = &[
            &[0.4, 0.6],
            &[1.0, 0.0],
            &[0.7139228369025601, 0.2860771630974399],
            &[0.36367498748032223, 0.6363250125196778],
        ];
        let p = profile(rows);
        assert_eq!(midpoint_rule(&p).unwrap().shares(), &[0.4, 0.6]);
        let doubled = p.union(&p).unwrap();
        assert_eq!(midpoint_rule(&doubled).unwrap().shares(), &[0.4, 0.6]);
    }

    #[test]
    fn dispatcher_validates_parameters() {
        let p = profile(&[&[0.5, 0.5]]);
        let bad = RuleSpec::quorum_median(-0.1, 1);
        assert!(matches!(allocate(&p, &bad), Err(Error::InvalidParameter(_))));
    }
}
