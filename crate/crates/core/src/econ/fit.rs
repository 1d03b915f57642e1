use serde::{Deserialize, Serialize};

use super::{positive, EconError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
}

impl ScalingFit {
    pub fn predict(&self, c: f64) -> f64 {
        self.alpha * c.powf(self.beta)
    }
}

/// Least-squares fit of `ln p = ln α + β·ln c` over `(c, p)` points.
pub fn fit_scaling_law(points: &[(f64, f64)]) -> Result<ScalingFit, EconError> {
    if points.len() < 2 {
        return Err(EconError::TooFewPoints { needed: 2, got: points.len() });
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(c, p) in points {
        logs.push((positive("c", c)?.ln(), positive("p", p)?.ln()));
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|l| l.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|l| l.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|l| (l.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|l| (l.0 - mean_x) * (l.1 - mean_y)).sum();
    if sxx <= f64::EPSILON * n * mean_x.abs().max(1.0) {
        return Err(EconError::DegenerateFit);
    }
    let beta = sxy / sxx;
    let ln_alpha = mean_y - beta * mean_x;
    let residual = logs.iter().map(|l| (l.1 - ln_alpha - beta * l.0).powi(2)).sum::<f64>().sqrt();
    Ok(ScalingFit { alpha: ln_alpha.exp(), beta, residual })
}
