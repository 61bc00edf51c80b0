//! Manipulation experiments: bribery, control, robustness and voter
//! extractable value.
//!
//! Exact minimal bribery and control costs are combinatorial for the
//! median-family rules. The searches here are greedy, so every reported cost
//! is an upper bound on the true minimum. Each search follows a path that does
//! not depend on the requested increase; costs for several increases are read
//! off the same path, which makes cost curves non-decreasing by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonical_sum, l1, Ballot, Profile, RuleSpec};
use crate::rules::allocate;
use crate::votegen::{dirichlet_sample, stream, tags};

/// Share shortfall still counted as reaching the target.
const ACHIEVE_TOLERANCE: f64 = 1e-12;
/// Smallest gain treated as progress.
const GAIN_EPSILON: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub target_project: usize,
    pub desired_increase: f64,
    pub baseline_share: f64,
    pub final_share: f64,
    /// ℓ1 ballot change for bribery, voter count for control.
    pub cost: f64,
    /// Ballot mass moved (bribery) or implied token mass of added voters
    /// (control, add mode); zero for deletions.
    pub mass: f64,
    pub achieved: bool,
    pub modified_profile_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BriberyOptions {
    /// First step tried for each greedy move.
    pub initial_step: f64,
    /// Steps never drop below this.
    pub min_step: f64,
}

impl Default for BriberyOptions {
    fn default() -> Self {
        BriberyOptions {
            initial_step: 0.05,
            min_step: 1e-4,
        }
    }
}

fn share_of(profile: &Profile, rule: &RuleSpec, target: usize) -> Result<f64> {
    Ok(allocate(profile, rule)?.shares()[target])
}

fn check_increases(increases: &[f64]) -> Result<()> {
    if let Some(bad) = increases.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "increase must be non-negative, got {bad}"
        )));
    }
    Ok(())
}

/// Largest share the target can get when every voter backs it alone.
fn unit_ceiling(profile: &Profile, rule: &RuleSpec, target: usize) -> Result<f64> {
    let all_in = Profile::from_ballots(
        vec![Ballot::unit(profile.m(), target); profile.n()],
        profile.budget_tokens(),
    )?;
    share_of(&all_in, rule, target)
}

#[derive(Debug, Clone, Copy)]
struct Move {
    voter: usize,
    donor: usize,
    amount: f64,
}

fn apply_move(rows: &mut [Vec<f64>], target: usize, mv: Move) {
    let row = &mut rows[mv.voter];
    let amount = mv.amount.min(row[mv.donor]);
    row[mv.donor] -= amount;
    row[target] += amount;
}

fn rows_profile(rows: &[Vec<f64>], template: &Profile) -> Result<Profile> {
    let ballots = rows
        .iter()
        .map(|r| Ballot::partial(r.clone()))
        .collect::<Result<Vec<_>>>()?;
    Profile::from_ballots(ballots, template.budget_tokens())
}

/// Heaviest non-target entry of a row, ties to the lowest project index.
fn donor_of(row: &[f64], target: usize) -> Option<(usize, f64)> {
    row.iter()
        .enumerate()
        .filter(|&(q, &x)| q != target && x > 0.0)
        .fold(None, |best: Option<(usize, f64)>, (q, &x)| match best {
            Some((_, bx)) if bx >= x => best,
            _ => Some((q, x)),
        })
}

/// Greedy bribery cost for a single increase. See [`bribery_curve`].
pub fn bribery_cost(
    profile: &Profile,
    rule: &RuleSpec,
    target: usize,
    increase: f64,
) -> Result<AttackResult> {
    bribery_curve(profile, rule, target, &[increase], BriberyOptions::default())
        .pop()
        .expect("one result per increase")
}

/// Greedy bribery costs for several increases of the target's share.
///
/// Each greedy move shifts mass from one voter's heaviest other project to
/// the target. All voters are tried at the current step size and the move
/// with the best share gain per unit of mass wins. When no move helps, the
/// step doubles; if even whole-entry moves do not help, the voter backing the
/// target least gives up their heaviest entry anyway. The move that crosses
/// a goal is shortened by bisection to the least sufficient amount.
///
/// `cost` is the ℓ1 change of the profile, twice the mass moved.
pub fn bribery_curve(
    profile: &Profile,
    rule: &RuleSpec,
    target: usize,
    increases: &[f64],
    options: BriberyOptions,
) -> Vec<Result<AttackResult>> {
    let prepared = (|| -> Result<(f64, f64)> {
        profile.check_project(target)?;
        check_increases(increases)?;
        let baseline = share_of(profile, rule, target)?;
        let ceiling = unit_ceiling(profile, rule, target)?;
        Ok((baseline, ceiling))
    })();
    let (baseline, ceiling) = match prepared {
        Ok(v) => v,
        Err(e) => return increases.iter().map(|_| Err(e.clone())).collect(),
    };

    let goals: Vec<f64> = increases.iter().map(|inc| baseline + inc).collect();
    let reachable = |goal: f64| goal <= ceiling + ACHIEVE_TOLERANCE;
    let highest = goals
        .iter()
        .copied()
        .filter(|&g| reachable(g))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut results: Vec<Option<Result<AttackResult>>> = vec![None; goals.len()];
    for (slot, (&goal, &inc)) in results.iter_mut().zip(goals.iter().zip(increases)) {
        if !reachable(goal) {
            *slot = Some(Err(Error::TargetUnreachable(format!(
                "share {goal} exceeds the ceiling {ceiling} reached when every voter backs project {target}"
            ))));
        } else if inc == 0.0 || baseline >= goal - ACHIEVE_TOLERANCE {
            *slot = Some(Ok(AttackResult {
                target_project: target,
                desired_increase: inc,
                baseline_share: baseline,
                final_share: baseline,
                cost: 0.0,
                mass: 0.0,
                achieved: true,
                modified_profile_digest: profile.digest(),
            }));
        }
    }

    let mut rows = profile.rows();
    let mut share = baseline;
    let mut moved = 0.0_f64;
    let mut step = options.initial_step.max(options.min_step);

    let outcome = (|| -> Result<()> {
        while share < highest - ACHIEVE_TOLERANCE {
            let mut best: Option<(Move, f64, f64)> = None; // (move, new share, rate)
            for (i, row) in rows.iter().enumerate() {
                let Some((donor, avail)) = donor_of(row, target) else {
                    continue;
                };
                let mv = Move {
                    voter: i,
                    donor,
                    amount: step.min(avail),
                };
                let mut trial = rows.clone();
                apply_move(&mut trial, target, mv);
                let Ok(next) = share_of(&rows_profile(&trial, profile)?, rule, target) else {
                    continue;
                };
                let rate = (next - share) / mv.amount;
                if next - share > GAIN_EPSILON && best.is_none_or(|(_, _, r)| rate > r) {
                    best = Some((mv, next, rate));
                }
            }

            let (mv, next) = match best {
                Some((mv, next, _)) => (mv, next),
                None if step < 1.0 => {
                    step = (step * 2.0).min(1.0);
                    continue;
                }
                None => {
                    // Nothing helps on its own; make the least supportive voter
                    // give up their heaviest other project.
                    let pick = rows
                        .iter()
                        .enumerate()
                        .filter_map(|(i, r)| donor_of(r, target).map(|(q, x)| (i, q, x, r[target])))
                        .min_by(|a, b| a.3.total_cmp(&b.3).then(a.0.cmp(&b.0)));
                    let Some((voter, donor, avail, _)) = pick else {
                        break;
                    };
                    let mv = Move {
                        voter,
                        donor,
                        amount: avail,
                    };
                    let mut trial = rows.clone();
                    apply_move(&mut trial, target, mv);
                    let next = share_of(&rows_profile(&trial, profile)?, rule, target).unwrap_or(share);
                    (mv, next)
                }
            };

            // Settle every goal this move crosses.
            for (slot, (&goal, &inc)) in results.iter_mut().zip(goals.iter().zip(increases)) {
                if slot.is_some() || next < goal - ACHIEVE_TOLERANCE {
                    continue;
                }
                let (amount, reached, digest) =
                    shortest_sufficient(&rows, profile, rule, target, mv, goal)?;
                let mass = moved + amount;
                *slot = Some(Ok(AttackResult {
                    target_project: target,
                    desired_increase: inc,
                    baseline_share: baseline,
                    final_share: reached,
                    cost: 2.0 * mass,
                    mass,
                    achieved: true,
                    modified_profile_digest: digest,
                }));
            }

            apply_move(&mut rows, target, mv);
            moved += mv.amount;
            share = next;
            step = options.initial_step.max(options.min_step);
        }
        Ok(())
    })();

    results
        .into_iter()
        .zip(increases)
        .map(|(slot, _)| match slot {
            Some(r) => r,
            None => Err(match &outcome {
                Err(e) => e.clone(),
                Ok(()) => Error::TargetUnreachable(format!(
                    "greedy bribery stalled at share {share} for project {target}"
                )),
            }),
        })
        .collect()
}

/// Least amount of `mv` (to about 1e-12) that lifts the target to `goal`.
fn shortest_sufficient(
    rows: &[Vec<f64>],
    template: &Profile,
    rule: &RuleSpec,
    target: usize,
    mv: Move,
    goal: f64,
) -> Result<(f64, f64, String)> {
    let eval = |amount: f64| -> Result<(f64, Profile)> {
        let mut trial = rows.to_vec();
        apply_move(&mut trial, target, Move { amount, ..mv });
        let p = rows_profile(&trial, template)?;
        Ok((share_of(&p, rule, target).unwrap_or(f64::NEG_INFINITY), p))
    };
    let (mut hi_share, mut hi_profile) = eval(mv.amount)?;
    let (mut lo, mut hi) = (0.0_f64, mv.amount);
    for _ in 0..64 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (s, p) = eval(mid)?;
        if s >= goal - ACHIEVE_TOLERANCE {
            hi = mid;
            hi_share = s;
            hi_profile = p;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_share, hi_profile.digest()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Add voters who back the target alone.
    Add,
    /// Remove existing voters.
    Delete,
}

/// Upper limit on voters added in add mode.
pub fn max_added_voters(n: usize) -> usize {
    (50 * n).max(1000)
}

pub fn control_cost(
    profile: &Profile,
    rule: &RuleSpec,
    target: usize,
    increase: f64,
    mode: ControlMode,
) -> Result<AttackResult> {
    control_curve(profile, rule, target, &[increase], mode)
        .pop()
        .expect("one result per increase")
}

/// Greedy control costs for several increases.
///
/// Add mode appends single-minded supporters of the target one at a time.
/// Delete mode repeatedly removes the voter whose absence raises the target
/// the most (ties to the lowest original index). `cost` counts voters; in add
/// mode `mass` is the token endowment of the added voters, taking each voter
/// to hold `budget_tokens / n` tokens.
pub fn control_curve(
    profile: &Profile,
    rule: &RuleSpec,
    target: usize,
    increases: &[f64],
    mode: ControlMode,
) -> Vec<Result<AttackResult>> {
    let prepared = (|| -> Result<f64> {
        profile.check_project(target)?;
        check_increases(increases)?;
        if mode == ControlMode::Delete && profile.n() < 2 {
            return Err(Error::PreconditionUnmet(
                "deleting voters needs at least two voters".into(),
            ));
        }
        share_of(profile, rule, target)
    })();
    let baseline = match prepared {
        Ok(v) => v,
        Err(e) => return increases.iter().map(|_| Err(e.clone())).collect(),
    };
    let goals: Vec<f64> = increases.iter().map(|inc| baseline + inc).collect();
    let highest = goals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let per_voter_tokens = profile.budget_tokens() / profile.n() as f64;

    let mut results: Vec<Option<Result<AttackResult>>> = vec![None; goals.len()];
    let settle = |count: usize, share: f64, current: &Profile, results: &mut Vec<Option<Result<AttackResult>>>| {
        for (slot, (&goal, &inc)) in results.iter_mut().zip(goals.iter().zip(increases)) {
            if slot.is_none() && share >= goal - ACHIEVE_TOLERANCE {
                let mass = match mode {
                    ControlMode::Add => count as f64 * per_voter_tokens,
                    ControlMode::Delete => 0.0,
                };
                *slot = Some(Ok(AttackResult {
                    target_project: target,
                    desired_increase: inc,
                    baseline_share: baseline,
                    final_share: share,
                    cost: count as f64,
                    mass,
                    achieved: true,
                    modified_profile_digest: current.digest(),
                }));
            }
        }
    };
    settle(0, baseline, profile, &mut results);

    let mut current = profile.clone();
    let mut share = baseline;
    let mut count = 0usize;
    let stall: Result<String> = (|| match mode {
        ControlMode::Add => {
            let limit = max_added_voters(profile.n());
            let supporter = Ballot::unit(profile.m(), target);
            while share < highest - ACHIEVE_TOLERANCE {
                if count == limit {
                    return Ok(format!("still short after adding {limit} supporters"));
                }
                current = current.with_added([supporter.clone()])?;
                count += 1;
                share = share_of(&current, rule, target)?;
                settle(count, share, &current, &mut results);
            }
            Ok(String::new())
        }
        ControlMode::Delete => {
            while share < highest - ACHIEVE_TOLERANCE {
                if current.n() == 1 {
                    return Ok("a single voter remains".into());
                }
                let best = (0..current.n())
                    .into_par_iter()
                    .map(|i| {
                        let next = current.without_voter(i).ok()?;
                        let s = share_of(&next, rule, target).ok()?;
                        Some((i, s, next))
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .flatten()
                    .fold(None, |best: Option<(usize, f64, Profile)>, cand| match &best {
                        Some((_, s, _)) if *s >= cand.1 => best,
                        _ => Some(cand),
                    });
                let Some((_, s, next)) = best else {
                    return Ok("no deletion leaves a valid election".into());
                };
                current = next;
                count += 1;
                share = s;
                settle(count, share, &current, &mut results);
            }
            Ok(String::new())
        }
    })();

    results
        .into_iter()
        .map(|slot| match slot {
            Some(r) => r,
            None => Err(match &stall {
                Err(e) => e.clone(),
                Ok(why) => Error::TargetUnreachable(format!(
                    "{why}; target share {share} after {count} changes"
                )),
            }),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub mean: f64,
    pub max: f64,
    pub samples: Vec<f64>,
}

/// Resamples one random voter's ballot from Dirichlet(1, …, 1) per trial and
/// records the ℓ1 shift of the outcome. Trial `k` draws from the stream
/// `(seed, k)`, so the summary does not depend on scheduling.
pub fn robustness_probe(
    profile: &Profile,
    rule: &RuleSpec,
    trials: usize,
    seed: u64,
) -> Result<RobustnessSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let base = allocate(profile, rule)?;
    let samples = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[tags::PERTURB, k as u64]);
            let voter = rand::Rng::random_range(&mut rng, 0..profile.n());
            let fresh = dirichlet_sample(profile.m(), 1.0, &mut rng)?;
            let perturbed = allocate(&profile.with_ballot(voter, fresh)?, rule)?;
            Ok(l1(base.shares(), perturbed.shares()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RobustnessSummary {
        mean: canonical_sum(&samples) / trials as f64,
        max: samples.iter().copied().fold(0.0, f64::max),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VevResult {
    /// Largest ℓ1 outcome shift over all (voter, project) pairs.
    pub value: f64,
    pub voter: usize,
    pub project: usize,
    pub concentration: f64,
}

/// Ballot with `concentration` of the voter's tokens on `project` and the
/// rest spread over their other projects in proportion to the original
/// ballot (evenly when the original has nothing elsewhere).
pub fn concentrated_ballot(ballot: &Ballot, project: usize, concentration: f64) -> Ballot {
    let w = ballot.weights();
    let m = w.len();
    let total = ballot.total();
    if m == 1 {
        return ballot.clone();
    }
    let others: f64 = w
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != project)
        .map(|(_, x)| x)
        .sum();
    let rest = 1.0 - concentration;
    let weights = (0..m)
        .map(|q| {
            let frac = if q == project {
                concentration
            } else if others > 0.0 {
                rest * w[q] / others
            } else {
                rest / (m - 1) as f64
            };
            frac * total
        })
        .collect();
    Ballot::from_simplex(weights)
}

/// Voter extractable value: the largest outcome shift a single voter causes
/// by concentrating their ballot on one project.
pub fn voter_extractable_value(
    profile: &Profile,
    rule: &RuleSpec,
    concentration: f64,
) -> Result<VevResult> {
    if !(0.0..=1.0).contains(&concentration) {
        return Err(Error::InvalidParameter(format!(
            "concentration must lie in [0, 1], got {concentration}"
        )));
    }
    let base = allocate(profile, rule)?;
    let per_voter = (0..profile.n())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..profile.m() {
                let ballot = concentrated_ballot(profile.ballot(i), k, concentration);
                let shifted = allocate(&profile.with_ballot(i, ballot)?, rule)?;
                let d = l1(base.shares(), shifted.shares());
                if best.is_none_or(|(b, _)| d > b) {
                    best = Some((d, k));
                }
            }
            Ok(best.expect("at least one project"))
        })
        .collect::<Result<Vec<_>>>()?;
    let (voter, (value, project)) = per_voter
        .into_iter()
        .enumerate()
        .fold(None, |best: Option<(usize, (f64, usize))>, cand| match best {
            Some((_, (b, _))) if b >= cand.1 .0 => best,
            _ => Some(cand),
        })
        .expect("at least one voter");
    Ok(VevResult {
        value,
        voter,
        project,
        concentration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RuleKind;

    fn profile(rows: &[&[f64]]) -> Profile {
        Profile::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn mean() -> RuleSpec {
        RuleSpec::new(RuleKind::Mean)
    }

    #[test]
    fn zero_increase_costs_nothing() {
        let p = profile(&[&[0.3, 0.7], &[0.6, 0.4]]);
        let r = bribery_cost(&p, &mean(), 0, 0.0).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.achieved);
        for mode in [ControlMode::Add, ControlMode::Delete] {
            let r = control_cost(&p, &mean(), 0, 0.0, mode).unwrap();
            assert_eq!(r.cost, 0.0);
        }
    }

    #[test]
    fn mean_bribery_matches_closed_form() {
        let p = profile(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = bribery_cost(&p, &mean(), 0, 0.25).unwrap();
        assert!((r.cost - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.final_share >= 0.75 - 1e-9);
    }

    #[test]
    fn bribery_beyond_full_support_is_unreachable() {
        let p = profile(&[&[0.5, 0.5]]);
        let r = bribery_cost(&p, &mean(), 0, 0.6);
        assert!(matches!(r, Err(Error::TargetUnreachable(_))));
    }

    #[test]
    fn add_control_closed_form() {
        let p = profile(&[&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let r = control_cost(&p, &mean(), 0, 0.25, ControlMode::Add).unwrap();
        assert_eq!(r.cost, 1.0);
        assert!((r.mass - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn delete_control_single_deletion() {
        let p = profile(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let r = control_cost(&p, &mean(), 0, 1.0 / 6.0, ControlMode::Delete).unwrap();
        assert_eq!(r.cost, 1.0);
        assert!((r.final_share - 0.5).abs() < 1e-12);
    }

    #[test]
    fn delete_control_needs_two_voters() {
        let p = profile(&[&[0.5, 0.5]]);
        assert!(matches!(
            control_cost(&p, &mean(), 0, 0.1, ControlMode::Delete),
            Err(Error::PreconditionUnmet(_))
        ));
    }

    #[test]
    fn delete_control_can_stall() {
        let p = profile(&[&[0.1, 0.9], &[0.2, 0.8]]);
        assert!(matches!(
            control_cost(&p, &mean(), 0, 0.5, ControlMode::Delete),
            Err(Error::TargetUnreachable(_))
        ));
    }

    #[test]
    fn robustness_on_identical_voters_is_linear() {
        let x: &[f64] = &[0.2, 0.3, 0.5];
        let p = profile(&[x, x, x, x]);
        let summary = robustness_probe(&p, &mean(), 1, 17).unwrap();
        let mut rng = stream(17, &[tags::PERTURB, 0]);
        let _voter = rand::Rng::random_range(&mut rng, 0..4);
        let fresh = dirichlet_sample(3, 1.0, &mut rng).unwrap();
        let want = l1(x, fresh.weights()) / 4.0;
        assert!((summary.mean - want).abs() < 1e-12);
    }

    #[test]
    fn robustness_midpoint_untouched_when_other_voter_moves() {
        // Voter 0 is the midpoint by a wide margin; voters 1..4 equal it.
        let x: &[f64] = &[0.5, 0.5];
        let p = profile(&[x, x, x, x, x]);
        let s = robustness_probe(&p, &RuleSpec::new(RuleKind::Midpoint), 20, 3).unwrap();
        assert_eq!(s.max, 0.0);
    }

    #[test]
    fn robustness_is_deterministic() {
        let p = profile(&[&[0.2, 0.3, 0.5], &[0.6, 0.1, 0.3], &[0.1, 0.1, 0.8]]);
        let rule = RuleSpec::new(RuleKind::MajoritarianPhantoms);
        let a = robustness_probe(&p, &rule, 100, 9).unwrap();
        let b = robustness_probe(&p, &rule, 100, 9).unwrap();
        assert_eq!(a, b);
        assert!(robustness_probe(&p, &rule, 0, 9).is_err());
    }

    #[test]
    fn vev_single_voter_mean() {
        let p = profile(&[&[0.5, 0.5]]);
        let v = voter_extractable_value(&p, &mean(), 0.99).unwrap();
        assert!((v.value - 0.98).abs() < 1e-12);
    }

    #[test]
    fn vev_on_already_concentrated_ballot() {
        let p = profile(&[&[0.95, 0.03, 0.02]]);
        let b = concentrated_ballot(p.ballot(0), 0, 0.95);
        assert!(l1(b.weights(), p.ballot(0).weights()) < 1e-12);
    }

    #[test]
    fn concentrated_ballot_spreads_evenly_from_unit() {
        let b = concentrated_ballot(&Ballot::unit(3, 0), 0, 0.9);
        let w = b.weights();
        assert!((w[0] - 0.9).abs() < 1e-15);
        assert!((w[1] - 0.05).abs() < 1e-15 && (w[2] - 0.05).abs() < 1e-15);
    }
}
