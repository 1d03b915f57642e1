use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generation_cost, EconError, EconScenario};

pub const MIN_TRIALS: u64 = 10_000;

/// Fixed so that results do not depend on the worker count.
const SHARDS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// The large model alone.
    Homogeneous,
    /// Small-model trial; on failure, one planning level and small-model
    /// conquest.
    Heterogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        Moments { n, mean, m2 }
    }
}

fn trial_cost(s: &EconScenario, policy: Policy, k: f64) -> f64 {
    match policy {
        Policy::Homogeneous => generation_cost(k, &s.large),
        Policy::Heterogeneous if k <= s.small.p => k * s.small.c,
        Policy::Heterogeneous => s.small.p * s.small.c + s.n_f64() * s.d + k * s.small.c,
    }
}

/// Simulated expected cost with `k ~ U(0, p_L]`. Deterministic in `seed`.
pub fn monte_carlo_expected_cost(
    s: &EconScenario,
    policy: Policy,
    trials: u64,
    seed: u64,
) -> Result<Estimate, EconError> {
    if trials < MIN_TRIALS {
        return Err(EconError::TooFewTrials(trials));
    }
    if policy == Policy::Heterogeneous {
        let bound = s.large.p / s.n_f64();
        if s.small.p < bound {
            return Err(EconError::RegimeViolation { p_s: s.small.p, bound });
        }
    }
    let moments = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = trials / SHARDS + u64::from(shard < trials % SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut m = Moments::default();
            for _ in 0..count {
                // (0, 1] so that k = 0 is excluded and k = p_L is possible
                let u: f64 = 1.0 - rng.random::<f64>();
                m.push(trial_cost(s, policy, u * s.large.p));
            }
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let variance = moments.m2 / (moments.n - 1) as f64;
    Ok(Estimate { mean: moments.mean, std_error: (variance / moments.n as f64).sqrt(), trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::ModelEcon;

    #[test]
    fn homogeneous_uniform_mean() {
        let m = ModelEcon::new(10.0, 1.0).unwrap();
        let s = EconScenario::new(m, m, 2, 0.0, 1.0, 1.0).unwrap();
        let e = monte_carlo_expected_cost(&s, Policy::Homogeneous, 200_000, 7).unwrap();
        assert!((e.mean - 5.0).abs() <= 3.0 * e.std_error, "{e:?}");
        assert_eq!(e, monte_carlo_expected_cost(&s, Policy::Homogeneous, 200_000, 7).unwrap());
        assert!(monte_carlo_expected_cost(&s, Policy::Homogeneous, 10, 7).is_err());
    }

    #[test]
    fn merged_moments_match_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert!((merged.mean - all.mean).abs() < 1e-12);
        assert!((merged.m2 - all.m2).abs() < 1e-8 * all.m2);
    }
}
