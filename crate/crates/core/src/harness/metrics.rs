//! Pass@1, normalized cost and return on investment.

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("pass@1 is undefined for zero problems")]
    NoProblems,
    #[error("baseline cost is zero")]
    ZeroBaseline,
    #[error("ROI is undefined at a normalized cost of exactly 1")]
    UndefinedRoi,
}

/// Fraction of problems whose returned program passes every hidden test.
pub fn pass_at_1(passed: &[bool]) -> Result<f64, MetricsError> {
    if passed.is_empty() {
        return Err(MetricsError::NoProblems);
    }
    Ok(passed.iter().filter(|p| **p).count() as f64 / passed.len() as f64)
}

pub fn normalized_cost(run_usd: Decimal, baseline_usd: Decimal) -> Result<f64, MetricsError> {
    if baseline_usd.is_zero() {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((run_usd / baseline_usd).to_f64().unwrap_or(f64::NAN))
}

/// Pass@1 gain in percentage points per unit of extra normalized cost.
pub fn roi(delta_avg: f64, cost: f64) -> Result<f64, MetricsError> {
    if cost == 1.0 {
        return Err(MetricsError::UndefinedRoi);
    }
    Ok(delta_avg / (cost - 1.0))
}

/// Half-away-from-zero rounding to `dp` decimals, as tables print.
pub fn round_to(value: f64, dp: i32) -> f64 {
    let scale = 10f64.powi(dp);
    (value * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn pass_rates() {
        let mut v = vec![true; 82];
        v.extend(vec![false; 82]);
        assert_eq!(pass_at_1(&v).unwrap(), 0.5);
        assert_eq!(pass_at_1(&[true, true]).unwrap(), 1.0);
        assert_eq!(pass_at_1(&[]), Err(MetricsError::NoProblems));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalized_cost(dec("3.2"), dec("3.2")).unwrap(), 1.0);
        assert!((normalized_cost(dec("4.85"), dec("1")).unwrap() - 4.85).abs() < 1e-12);
        assert!(normalized_cost(dec("0.5"), dec("1")).unwrap() < 1.0);
        assert_eq!(normalized_cost(dec("1"), Decimal::ZERO), Err(MetricsError::ZeroBaseline));
    }

    #[test]
    fn roi_values() {
        assert_eq!(round_to(roi(7.08, 4.85).unwrap(), 2), 1.84);
        assert_eq!(round_to(roi(5.02, 5.09).unwrap(), 2), 1.23);
        assert_eq!(roi(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(roi(1.0, 1.0), Err(MetricsError::UndefinedRoi));
    }
}
