//! Run reports and cost/quality tables.

use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::metrics::{normalized_cost, pass_at_1, roi, MetricsError};
use super::store::{Manifest, ProblemRecord};
use crate::gateway::RoleKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub problems: usize,
    pub passed: usize,
    pub pass_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: String,
    pub passed: bool,
    pub outcome: String,
    #[serde(with = "rust_decimal::serde::str")]
    pub usd: Decimal,
    pub planner_calls: usize,
    pub plan_rounds: usize,
    pub subproblems: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub dataset: String,
    pub problems: usize,
    pub skipped_stdio: usize,
    pub passed: usize,
    pub pass_at_1: f64,
    #[serde(with = "rust_decimal::serde::str")]
    pub total_usd: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<f64>,
    pub generator_calls: usize,
    pub planner_calls: usize,
    pub test_writer_calls: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub by_difficulty: BTreeMap<String, Breakdown>,
    pub leaked_prompts: usize,
    pub per_problem: Vec<ProblemSummary>,
}

fn count_subproblems(trace: &crate::policy::SolveTrace) -> usize {
    trace.children.iter().map(|c| 1 + count_subproblems(c)).sum()
}

impl RunReport {
    /// Assembles a report from persisted records, ordered by dataset index.
    pub fn from_records(manifest: &Manifest, records: &[ProblemRecord], leaked_prompts: usize) -> Result<Self, MetricsError> {
        let mut records: Vec<&ProblemRecord> = records.iter().collect();
        records.sort_by_key(|r| r.index);
        let passed: Vec<bool> = records.iter().map(|r| r.passed).collect();
        let mut outcomes = BTreeMap::new();
        let mut groups: BTreeMap<String, Vec<bool>> = BTreeMap::new();
        let calls = |role: RoleKind| -> usize {
            records.iter().map(|r| r.costs.iter().filter(|c| c.role == role).count()).sum()
        };
        for r in &records {
            *outcomes.entry(r.outcome.as_str().to_string()).or_insert(0) += 1;
            if let Some(d) = r.difficulty {
                groups.entry(d.as_str().to_string()).or_default().push(r.passed);
            }
        }
        let by_difficulty = groups
            .into_iter()
            .map(|(k, v)| {
                let b = Breakdown { problems: v.len(), passed: v.iter().filter(|p| **p).count(), pass_at_1: pass_at_1(&v)? };
                Ok((k, b))
            })
            .collect::<Result<_, MetricsError>>()?;
        let per_problem = records
            .iter()
            .map(|r| ProblemSummary {
                id: r.id.clone(),
                passed: r.passed,
                outcome: r.outcome.as_str().to_string(),
                usd: r.usd,
                planner_calls: r.costs.iter().filter(|c| c.role == RoleKind::Planner).count(),
                plan_rounds: r.trace.plan_rounds(),
                subproblems: count_subproblems(&r.trace),
                error: r.error.clone(),
            })
            .collect();
        Ok(Self {
            mode: manifest.mode.as_str().to_string(),
            seed: manifest.seed,
            dataset: manifest.dataset.clone(),
            problems: records.len(),
            skipped_stdio: manifest.skipped_stdio,
            passed: passed.iter().filter(|p| **p).count(),
            pass_at_1: pass_at_1(&passed)?,
            total_usd: records.iter().map(|r| r.usd).sum(),
            baseline: None,
            normalized_cost: None,
            roi: None,
            generator_calls: calls(RoleKind::Generator),
            planner_calls: calls(RoleKind::Planner),
            test_writer_calls: calls(RoleKind::TestWriter),
            outcomes,
            by_difficulty,
            leaked_prompts,
            per_problem,
        })
    }

    /// Normalizes cost against a named baseline run; ROI is left unset
    /// where undefined.
    pub fn with_baseline(mut self, name: &str, baseline: &RunReport) -> Result<Self, MetricsError> {
        let cost = normalized_cost(self.total_usd, baseline.total_usd)?;
        let delta = (self.pass_at_1 - baseline.pass_at_1) * 100.0;
        self.baseline = Some(name.to_string());
        self.normalized_cost = Some(cost);
        self.roi = roi(delta, cost).ok();
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub run: String,
    pub cost: f64,
    pub pass_at_1: f64,
    /// No other run is at least as good on both axes and better on one.
    pub pareto: bool,
}

/// Cost-versus-pass@1 rows sorted by cost, with the Pareto frontier marked.
pub fn frontier(points: &[(String, f64, f64)]) -> Vec<FrontierRow> {
    let mut rows: Vec<FrontierRow> = points
        .iter()
        .map(|(run, cost, pass)| {
            let dominated = points.iter().any(|(_, c, p)| c <= cost && p >= pass && (c < cost || p > pass));
            FrontierRow { run: run.clone(), cost: *cost, pass_at_1: *pass, pareto: !dominated }
        })
        .collect();
    rows.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.run.cmp(&b.run)));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Tsv,
    Csv,
    Markdown,
}

/// Renders rows of cells with the given header.
pub fn render_table(header: &[&str], rows: &[Vec<String>], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Tsv | TableFormat::Csv => {
            let sep = if format == TableFormat::Tsv { "\t" } else { "," };
            out.push_str(&header.join(sep));
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(sep));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in rows {
                out.push_str(&format!("| {} |\n", row.join(" | ")));
            }
        }
    }
    out
}

pub fn frontier_table(rows: &[FrontierRow], format: TableFormat) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.run.clone(),
                format!("{:.4}", r.cost),
                format!("{:.4}", r.pass_at_1),
                if r.pareto { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    render_table(&["run", "cost", "pass@1", "pareto"], &cells, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontier_marks_dominated_runs() {
        let rows = frontier(&[
            ("pat".into(), 4.85, 0.9),
            ("standard".into(), 1.0, 0.8),
            ("bon".into(), 3.39, 0.82),
            ("worse".into(), 5.0, 0.85),
        ]);
        let names: Vec<_> = rows.iter().map(|r| (r.run.as_str(), r.pareto)).collect();
        assert_eq!(names, vec![("standard", true), ("bon", true), ("pat", true), ("worse", false)]);
        let md = frontier_table(&rows, TableFormat::Markdown);
        assert!(md.starts_with("| run | cost | pass@1 | pareto |\n|---|---|---|---|\n"));
    }
}
