//! Expected-cost model for pairing a cheap generator with an expensive
//! planner.
//!
//! A task has complexity `k`. A model with capability `p` and unit cost `c`
//! solves it in one call costing `k·c` when `k ≤ p`; otherwise the call fails
//! after spending `p·c`. Decomposing into `n` subproblems costs `n·D`.
//! Capability and cost are related by `p = α·c^β` with `0 < β ≤ 1`.

mod closed;
mod fit;
mod monte_carlo;
mod sweep;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use closed::{
    asymptotic_cost, expected_cost_heterogeneous, expected_cost_homogeneous, generation_cost, generator_objective,
    optimal_generator_cost, savings_margin, asymptotic_savings, asymptotic_threshold, Margin,
};
pub use fit::{fit_scaling_law, ScalingFit};
pub use monte_carlo::{monte_carlo_expected_cost, Estimate, Policy, MIN_TRIALS};
pub use sweep::{sweep, SweepGrid, SweepRow};
pub use tree::{tree_cost, Split};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("beta must lie in (0, 1], got {0}")]
    BetaOutOfRange(f64),
    #[error("branching factor must be at least 2, got {0}")]
    Branching(u32),
    #[error("small model must not exceed the large one in {0}")]
    Ordering(&'static str),
    #[error("p_s = {p_s} is below p_L/n = {bound}; the one-level closed form does not apply")]
    RegimeViolation { p_s: f64, bound: f64 },
    #[error("the small model must be strictly less capable than the large one")]
    Degenerate,
    #[error("all points share the same cost; the exponent is unidentifiable")]
    DegenerateFit,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least {MIN_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
}

fn positive(name: &'static str, value: f64) -> Result<f64, EconError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EconError::NotPositive { name, value })
    }
}

fn check_beta(beta: f64) -> Result<f64, EconError> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(beta)
    } else {
        Err(EconError::BetaOutOfRange(beta))
    }
}

/// Capability and unit cost of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelEcon {
    pub p: f64,
    pub c: f64,
}

impl ModelEcon {
    pub fn new(p: f64, c: f64) -> Result<Self, EconError> {
        Ok(Self { p: positive("p", p)?, c: positive("c", c)? })
    }
}

/// A large/small model pair with the decomposition parameters.
///
/// The small model may equal the large one (the degenerate homogeneous
/// case); it may not exceed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconScenario {
    pub large: ModelEcon,
    pub small: ModelEcon,
    pub n: u32,
    /// Per-subproblem planning overhead.
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl EconScenario {
    pub fn new(large: ModelEcon, small: ModelEcon, n: u32, d: f64, alpha: f64, beta: f64) -> Result<Self, EconError> {
        if n < 2 {
            return Err(EconError::Branching(n));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(EconError::NotPositive { name: "D", value: d });
        }
        positive("alpha", alpha)?;
        check_beta(beta)?;
        if small.p > large.p {
            return Err(EconError::Ordering("capability"));
        }
        if small.c > large.c {
            return Err(EconError::Ordering("unit cost"));
        }
        Ok(Self { large, small, n, d, alpha, beta })
    }

    /// The construction used for the existence result: `p_s = p_L/n` and
    /// `c_s = n^(-1/β)·c_L`, which places both models on one scaling curve.
    pub fn constructed(p_l: f64, c_l: f64, n: u32, d: f64, beta: f64) -> Result<Self, EconError> {
        let large = ModelEcon::new(p_l, c_l)?;
        check_beta(beta)?;
        if n < 2 {
            return Err(EconError::Branching(n));
        }
        let nf = f64::from(n);
        let small = ModelEcon::new(p_l / nf, nf.powf(-1.0 / beta) * c_l)?;
        let alpha = p_l / c_l.powf(beta);
        Self::new(large, small, n, d, alpha, beta)
    }

    pub fn n_f64(&self) -> f64 {
        f64::from(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_superlinear_scaling() {
        let m = ModelEcon::new(10.0, 1.0).unwrap();
        assert_eq!(EconScenario::new(m, m, 2, 0.0, 1.0, 1.5), Err(EconError::BetaOutOfRange(1.5)));
        assert!(EconScenario::new(m, m, 2, 0.0, 1.0, 1.0).is_ok());
        assert_eq!(EconScenario::constructed(10.0, 1.0, 2, 0.0, 1.01), Err(EconError::BetaOutOfRange(1.01)));
        assert!(ModelEcon::new(0.0, 1.0).is_err());
        assert_eq!(EconScenario::new(m, m, 1, 0.0, 1.0, 1.0), Err(EconError::Branching(1)));
    }

    #[test]
    fn constructed_models_share_a_curve() {
        let s = EconScenario::constructed(10.0, 0.7, 3, 0.1, 0.5).unwrap();
        assert!((s.alpha * s.small.c.powf(s.beta) - s.small.p).abs() < 1e-12);
        assert!((s.alpha * s.large.c.powf(s.beta) - s.large.p).abs() < 1e-12);
    }
}
