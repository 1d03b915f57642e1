use serde::{Deserialize, Serialize};

use super::{check_beta, positive, EconError, EconScenario, ModelEcon};

/// Cost of one generation call at complexity `k`.
pub fn generation_cost(k: f64, m: &ModelEcon) -> f64 {
    if k <= m.p {
        k * m.c
    } else {
        m.p * m.c
    }
}

/// Expected cost of the large model alone, `k ~ U(0, p_L]`.
pub fn expected_cost_homogeneous(s: &EconScenario) -> f64 {
    s.large.p * s.large.c / 2.0
}

/// Expected cost of small-model trial plus one planning level. Only valid
/// while one level of decomposition suffices (`p_s ≥ p_L/n`).
pub fn expected_cost_heterogeneous(s: &EconScenario) -> Result<f64, EconError> {
    let (pl, ps, cs) = (s.large.p, s.small.p, s.small.c);
    let bound = pl / s.n_f64();
    if ps < bound {
        return Err(EconError::RegimeViolation { p_s: ps, bound });
    }
    Ok(pl * cs / 2.0 + (pl - ps) / pl * (ps * cs + s.n_f64() * s.d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub holds: bool,
    /// Bound on the total planning overhead `n·D`.
    pub bound: f64,
    /// `bound − n·D`; positive iff the heterogeneous pairing is cheaper.
    pub margin: f64,
}

/// Existence condition for a cheaper small generator, evaluated for a
/// scenario built by [`EconScenario::constructed`].
pub fn savings_margin(s: &EconScenario) -> Margin {
    let n = s.n_f64();
    let inv_beta = 1.0 / s.beta;
    let factor = (n - n.powf(1.0 - inv_beta)) / (2.0 * (n - 1.0)) - n.powf(-1.0 - inv_beta);
    let bound = factor * s.large.p * s.large.c;
    let overhead = n * s.d;
    Margin { holds: overhead < bound, bound, margin: bound - overhead }
}

/// Cost of solving a task of complexity `k ≫ p` by repeated decomposition.
pub fn asymptotic_cost(k: f64, m: &ModelEcon, n: u32, d: f64) -> f64 {
    let n = f64::from(n);
    n * k / (n - 1.0) * (m.c + d / m.p)
}

/// Largest planning overhead for which the small generator wins
/// asymptotically.
pub fn asymptotic_threshold(s: &EconScenario) -> Result<f64, EconError> {
    if s.small.p >= s.large.p {
        return Err(EconError::Degenerate);
    }
    Ok((s.large.c - s.small.c) / (1.0 / s.small.p - 1.0 / s.large.p))
}

pub fn asymptotic_savings(s: &EconScenario) -> Result<bool, EconError> {
    Ok(s.d < asymptotic_threshold(s)?)
}

/// The generator's objective `c + D/(α·c^β)` as a function of its unit cost.
pub fn generator_objective(c: f64, alpha: f64, beta: f64, d: f64) -> f64 {
    c + d / (alpha * c.powf(beta))
}

/// Unit cost minimizing [`generator_objective`] on `(0, c_L]`.
pub fn optimal_generator_cost(alpha: f64, beta: f64, d: f64, c_l: f64) -> Result<f64, EconError> {
    positive("alpha", alpha)?;
    check_beta(beta)?;
    positive("D", d)?;
    positive("c_L", c_l)?;
    Ok((beta * d / alpha).powf(1.0 / (beta + 1.0)).min(c_l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(pl: f64, cl: f64, ps: f64, cs: f64, n: u32, d: f64) -> EconScenario {
        EconScenario::new(ModelEcon::new(pl, cl).unwrap(), ModelEcon::new(ps, cs).unwrap(), n, d, 1.0, 1.0).unwrap()
    }

    #[test]
    fn generation_cost_branches() {
        let m = ModelEcon::new(10.0, 2.0).unwrap();
        assert_eq!(generation_cost(3.0, &m), 6.0);
        assert_eq!(generation_cost(15.0, &m), 20.0);
        assert_eq!(generation_cost(10.0, &m), 20.0);
    }

    #[test]
    fn one_level_costs() {
        assert_eq!(expected_cost_homogeneous(&scenario(10.0, 1.0, 5.0, 0.25, 2, 0.0)), 5.0);
        assert_eq!(expected_cost_homogeneous(&scenario(1.0, 1.0, 1.0, 1.0, 2, 0.0)), 0.5);
        let s = scenario(10.0, 1.0, 5.0, 0.25, 2, 0.0);
        assert!((expected_cost_heterogeneous(&s).unwrap() - 1.875).abs() < 1e-12);
        let same = scenario(10.0, 1.0, 10.0, 1.0, 3, 4.0);
        assert_eq!(expected_cost_heterogeneous(&same).unwrap(), expected_cost_homogeneous(&same));
        let out = scenario(10.0, 1.0, 3.0, 0.25, 2, 0.0);
        assert!(matches!(expected_cost_heterogeneous(&out), Err(EconError::RegimeViolation { .. })));
    }

    #[test]
    fn savings_margin_linear_case() {
        let s = EconScenario::constructed(10.0, 1.0, 2, 1.0, 1.0).unwrap();
        let m = savings_margin(&s);
        assert!((m.bound - 2.5).abs() < 1e-12);
        assert!(m.holds);
        assert!((m.margin - 0.5).abs() < 1e-12);
        let s = EconScenario::constructed(10.0, 1.0, 2, 1.3, 1.0).unwrap();
        assert!(!savings_margin(&s).holds);
    }

    #[test]
    fn asymptotic_and_threshold() {
        let m = ModelEcon::new(10.0, 1.0).unwrap();
        assert_eq!(asymptotic_cost(100.0, &m, 2, 0.0), 200.0);
        let s = scenario(10.0, 1.0, 5.0, 0.25, 2, 7.0);
        assert!((asymptotic_threshold(&s).unwrap() - 7.5).abs() < 1e-12);
        assert!(asymptotic_savings(&s).unwrap());
        let s = scenario(10.0, 1.0, 5.0, 0.25, 2, 7.5);
        assert!(!asymptotic_savings(&s).unwrap());
        let same = scenario(10.0, 1.0, 10.0, 0.5, 2, 1.0);
        assert_eq!(asymptotic_savings(&same), Err(EconError::Degenerate));
    }

    #[test]
    fn optimal_cost() {
        let c = optimal_generator_cost(1722.2, 0.12, 1270.73, 0.70).unwrap();
        assert!((c - 0.114).abs() < 0.002, "{c}");
        assert_eq!(optimal_generator_cost(1.0, 1.0, 1e6, 0.7).unwrap(), 0.7);
        assert!(optimal_generator_cost(1.0, 1.2, 1.0, 0.7).is_err());
    }
}
