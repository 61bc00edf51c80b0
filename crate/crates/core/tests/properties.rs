//! Randomized invariants over all rules and the shared model types.

use proptest::prelude::*;
use retrofund::axioms::raised_ballot;
use retrofund::metrics::gini_index;
use retrofund::{allocate, l1_distance, Ballot, Error, Profile, RuleKind, RuleSpec};

fn ballot(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, Just(1.0)], m)
        .prop_filter("non-empty ballot", |v| v.iter().sum::<f64>() > 1e-6)
}

fn profile() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6, 1usize..=5).prop_flat_map(|(n, m)| prop::collection::vec(ballot(m), n))
}

fn specs() -> Vec<RuleSpec> {
    let mut v: Vec<RuleSpec> = RuleKind::ALL.into_iter().map(RuleSpec::new).collect();
    v.push(RuleSpec::quorum_median(0.2, 2));
    v.push(RuleSpec::capped_median(0.5, 0.15));
    v
}

/// Rules may refuse profiles where every project misses the quorum.
fn outcome(p: &Profile, spec: &RuleSpec) -> Option<Vec<f64>> {
    match allocate(p, spec) {
        Ok(a) => Some(a.into_inner()),
        Err(Error::DegenerateProfile(_)) => None,
        Err(e) => panic!("{}: {e}", spec.label()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn outcomes_lie_on_the_simplex(rows in profile()) {
        let p = Profile::new(rows, 1.0).unwrap();
        for spec in specs() {
            if let Some(a) = outcome(&p, &spec) {
                prop_assert_eq!(a.len(), p.m());
                prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{} {:?}", spec.label(), a);
                prop_assert!(a.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(w in ballot(5)) {
        let once = Ballot::normalized(w).unwrap();
        let twice = Ballot::normalized(once.weights().to_vec()).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn l1_is_a_metric(a in ballot(4), b in ballot(4), c in ballot(4)) {
        let d = |x: &[f64], y: &[f64]| l1_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn anonymity(rows in profile(), seed in any::<u64>()) {
        let p = Profile::new(rows, 1.0).unwrap();
        let mut order: Vec<usize> = (0..p.n()).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let q = p.permute_voters(&order);
        // Midpoint ties go to the lowest voter index (two voters always tie).
        for spec in specs().into_iter().filter(|s| s.rule != RuleKind::Midpoint) {
            let (a, b) = (outcome(&p, &spec), outcome(&q, &spec));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!(l1_distance(&a, &b).unwrap() <= 1e-9, "{}", spec.label());
            }
        }
    }

    #[test]
    fn neutrality(rows in profile(), shift in 0usize..5) {
        let p = Profile::new(rows, 1.0).unwrap();
        let m = p.m();
        let order: Vec<usize> = (0..m).map(|q| (q + shift) % m).collect();
        let q = p.permute_projects(&order);
        // Same tie rule, by project order.
        for spec in specs().into_iter().filter(|s| s.rule != RuleKind::Midpoint) {
            let (a, b) = (outcome(&p, &spec), outcome(&q, &spec));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                for (new, &old) in order.iter().enumerate() {
                    prop_assert!((b[new] - a[old]).abs() <= 1e-9, "{} {:?} {:?}", spec.label(), a, b);
                }
            }
        }
    }

    #[test]
    fn mean_is_monotone(rows in profile(), voter in 0usize..6, project in 0usize..5, delta in 0.01..0.5f64) {
        let p = Profile::new(rows, 1.0).unwrap();
        let (voter, project) = (voter % p.n(), project % p.m());
        let raised = raised_ballot(p.ballot(voter), project, delta).unwrap();
        let q = p.with_ballot(voter, raised).unwrap();
        let spec = RuleSpec::new(RuleKind::Mean);
        let before = allocate(&p, &spec).unwrap().shares()[project];
        let after = allocate(&q, &spec).unwrap().shares()[project];
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn gini_stays_in_range(shares in ballot(6)) {
        let g = gini_index(&shares).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }
}
