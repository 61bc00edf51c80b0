//! Synthetic ballots: a Dirichlet base vote mixed with per-voter Dirichlet
//! noise.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), which is counter based and
//! value-stable across platforms. A random stream is addressed by a master
//! seed plus a path of integers (for example `[trial, voter]`); the path is
//! folded with SplitMix64 into the 64-bit ChaCha stream id, so streams for
//! different paths are independent and can be generated in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ballot, Profile};

/// Stream-path tags. Keeping them in one place avoids accidental reuse.
pub mod tags {
    pub const BASE_VOTE: u64 = 0xBA5E;
    pub const VOTER: u64 = 0x5073;
    pub const TRIAL: u64 = 0x7121;
    pub const TARGET: u64 = 0x7A26;
    pub const PERTURB: u64 = 0xFE27;
    pub const SEARCH: u64 = 0x5EA4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into one 64-bit value.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// The random stream addressed by `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(derive_seed(seed, path));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_mix")]
    pub mix_weight: f64,
    #[serde(default = "default_alpha")]
    pub dirichlet_alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mix() -> f64 {
    0.5
}
fn default_alpha() -> f64 {
    1.0
}

impl GenSpec {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        GenSpec {
            n,
            m,
            mix_weight: default_mix(),
            dirichlet_alpha: default_alpha(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidParameter(
                "generation needs at least one voter and one project".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mix_weight) {
            return Err(Error::InvalidParameter(format!(
                "mix_weight must lie in [0, 1], got {}",
                self.mix_weight
            )));
        }
        if !(self.dirichlet_alpha.is_finite() && self.dirichlet_alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dirichlet_alpha must be positive, got {}",
                self.dirichlet_alpha
            )));
        }
        Ok(())
    }
}

/// A draw from the symmetric Dirichlet(alpha, …, alpha) on `m` coordinates,
/// built by normalizing independent Gamma(alpha, 1) draws.
pub fn dirichlet_sample<R: Rng + ?Sized>(m: usize, alpha: f64, rng: &mut R) -> Result<Ballot> {
    if m == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if m == 1 {
        return Ok(Ballot::from_simplex(vec![1.0]));
    }
    let gamma = if alpha == 1.0 {
        None
    } else {
        Some(Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    };
    // Very small alphas can underflow every coordinate; redraw in that case.
    for _ in 0..16 {
        let draws: Vec<f64> = (0..m)
            .map(|_| match &gamma {
                None => Exp1.sample(rng),
                Some(g) => g.sample(rng),
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ballot::normalized(draws.into_iter().map(|x| x / total).collect());
        }
    }
    Ok(Ballot::unit(m, rng.random_range(0..m)))
}

/// Generates `spec.n` ballots `w·base + (1 − w)·independent` and returns the
/// base vote as the ground truth.
pub fn generate_profile(spec: &GenSpec) -> Result<(Profile, Ballot)> {
    generate_profile_with_budget(spec, 1.0)
}

pub fn generate_profile_with_budget(spec: &GenSpec, budget_tokens: f64) -> Result<(Profile, Ballot)> {
    spec.validate()?;
    let base = dirichlet_sample(
        spec.m,
        spec.dirichlet_alpha,
        &mut stream(spec.seed, &[tags::BASE_VOTE]),
    )?;
    let w = spec.mix_weight;
    let ballots = (0..spec.n)
        .map(|i| {
            let own = dirichlet_sample(
                spec.m,
                spec.dirichlet_alpha,
                &mut stream(spec.seed, &[tags::VOTER, i as u64]),
            )?;
            let mixed = base
                .weights()
                .iter()
                .zip(own.weights())
                .map(|(b, x)| w * b + (1.0 - w) * x)
                .collect();
            Ballot::normalized(mixed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Profile::from_ballots(ballots, budget_tokens)?, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coordinate_is_one() {
        let mut rng = stream(1, &[]);
        assert_eq!(dirichlet_sample(1, 1.0, &mut rng).unwrap().weights(), &[1.0]);
        assert_eq!(dirichlet_sample(1, 0.3, &mut rng).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn replay_is_identical() {
        let a = dirichlet_sample(7, 1.0, &mut stream(9, &[1, 2])).unwrap();
        let b = dirichlet_sample(7, 1.0, &mut stream(9, &[1, 2])).unwrap();
        assert_eq!(a, b);
        let c = dirichlet_sample(7, 1.0, &mut stream(9, &[1, 3])).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn general_alpha_on_simplex() {
        let mut rng = stream(3, &[]);
        for alpha in [0.05, 0.5, 2.0, 10.0] {
            for _ in 0..100 {
                let b = dirichlet_sample(5, alpha, &mut rng).unwrap();
                assert!((b.total() - 1.0).abs() < 1e-12);
                assert!(b.weights().iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn full_weight_on_base_gives_unanimity() {
        let spec = GenSpec {
            mix_weight: 1.0,
            ..GenSpec::new(6, 4, 11)
        };
        let (p, base) = generate_profile(&spec).unwrap();
        for b in p.ballots() {
            assert_eq!(b.weights(), base.weights());
        }
    }

    #[test]
    fn generated_ballots_on_simplex() {
        let (p, base) = generate_profile(&GenSpec::new(30, 12, 5)).unwrap();
        assert_eq!((p.n(), p.m()), (30, 12));
        assert!((base.total() - 1.0).abs() < 1e-12);
        for b in p.ballots() {
            assert!((b.total() - 1.0).abs() < 1e-12);
            assert!(b.weights().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn welfare_experiment_shape() {
        let (p, _) = generate_profile(&GenSpec::new(145, 600, 1)).unwrap();
        assert_eq!((p.n(), p.m()), (145, 600));
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate_profile(&GenSpec::new(0, 3, 1)).is_err());
        let bad = GenSpec {
            mix_weight: 1.5,
            ..GenSpec::new(2, 3, 1)
        };
        assert!(generate_profile(&bad).is_err());
        let bad = GenSpec {
            dirichlet_alpha: 0.0,
            ..GenSpec::new(2, 3, 1)
        };
        assert!(generate_profile(&bad).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(5, &[3, 4]), derive_seed(5, &[3, 4]));
    }
}
