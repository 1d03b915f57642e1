use serde::{Deserialize, Serialize};

use super::{
    expected_cost_heterogeneous, expected_cost_homogeneous, savings_margin, asymptotic_savings, EconError,
    EconScenario,
};

/// Parameter grid for the constructed scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p_l: f64,
    pub c_l: f64,
    pub n: Vec<u32>,
    pub d: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            p_l: 10.0,
            c_l: 1.0,
            n: vec![2, 3, 4, 8],
            d: vec![0.0, 0.25, 0.5, 1.0, 1.5, 2.0],
            beta: vec![0.25, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u32,
    pub d: f64,
    pub beta: f64,
    pub p_s: f64,
    pub c_s: f64,
    pub homogeneous: f64,
    pub heterogeneous: f64,
    pub margin: f64,
    pub saves: bool,
    pub saves_asymptotically: bool,
}

impl SweepRow {
    pub const HEADER: [&'static str; 10] =
        ["n", "D", "beta", "p_s", "c_s", "homogeneous", "heterogeneous", "margin", "saves", "saves_asymptotically"];

    pub fn fields(&self) -> [String; 10] {
        [
            self.n.to_string(),
            self.d.to_string(),
            self.beta.to_string(),
            format!("{:.6}", self.p_s),
            format!("{:.6}", self.c_s),
            format!("{:.6}", self.homogeneous),
            format!("{:.6}", self.heterogeneous),
            format!("{:.6}", self.margin),
            self.saves.to_string(),
            self.saves_asymptotically.to_string(),
        ]
    }
}

/// Evaluates every grid point, in `n`, `D`, `β` order.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, EconError> {
    let mut rows = Vec::new();
    for &n in &grid.n {
        for &d in &grid.d {
            for &beta in &grid.beta {
                let s = EconScenario::constructed(grid.p_l, grid.c_l, n, d, beta)?;
                let margin = savings_margin(&s);
                rows.push(SweepRow {
                    n,
                    d,
                    beta,
                    p_s: s.small.p,
                    c_s: s.small.c,
                    homogeneous: expected_cost_homogeneous(&s),
                    heterogeneous: expected_cost_heterogeneous(&s)?,
                    margin: margin.margin,
                    saves: margin.holds,
                    saves_asymptotically: asymptotic_savings(&s)?,
                });
            }
        }
    }
    Ok(rows)
}
