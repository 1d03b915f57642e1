use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Trial,
    Plan,
    RePlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TrialSuccess,
    PlanSuccess,
    PlateauHalt,
    DepthHalt,
    /// The re-plan loop hit `max_plan_rounds` while still improving.
    RoundLimit,
    /// Planning is disabled and the trial failed.
    TrialFailure,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::TrialSuccess => "trial_success",
            Outcome::PlanSuccess => "plan_success",
            Outcome::PlateauHalt => "plateau_halt",
            Outcome::DepthHalt => "depth_halt",
            Outcome::RoundLimit => "round_limit",
            Outcome::TrialFailure => "trial_failure",
            Outcome::Error => "error",
        }
    }

    /// The returned program passed its whole suite.
    pub fn is_verified(self) -> bool {
        matches!(self, Outcome::TrialSuccess | Outcome::PlanSuccess)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub phase: Phase,
    pub pass_count: usize,
    pub suite_size: usize,
    /// Spend attributed to this iteration, including any recursive solves.
    #[serde(with = "rust_decimal::serde::str")]
    pub cost_delta: Decimal,
    /// Per-candidate pass counts of a trial, in generation order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub problem_id: String,
    pub depth: u32,
    pub iterations: Vec<Iteration>,
    pub outcome: Outcome,
    /// Everything this solve spent, subproblems included.
    #[serde(with = "rust_decimal::serde::str")]
    pub cost: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Traces of recursively solved subproblems, in solve order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SolveTrace>,
}

impl SolveTrace {
    pub fn new(problem_id: &str, depth: u32) -> Self {
        Self { problem_id: problem_id.to_string(), depth, iterations: Vec::new(), outcome: Outcome::Error, cost: Decimal::ZERO, error: None, children: Vec::new() }
    }

    pub fn failed(problem_id: &str, depth: u32, error: impl ToString) -> Self {
        Self { error: Some(error.to_string()), ..Self::new(problem_id, depth) }
    }

    /// Sum of iteration deltas; equals `cost` for completed solves.
    pub fn iteration_cost(&self) -> Decimal {
        self.iterations.iter().map(|i| i.cost_delta).sum()
    }

    pub fn final_pass_count(&self) -> Option<usize> {
        self.iterations.last().map(|i| i.pass_count)
    }

    /// Deepest level reached by this trace or any subtrace.
    pub fn max_depth(&self) -> u32 {
        self.children.iter().map(SolveTrace::max_depth).fold(self.depth, u32::max)
    }

    pub fn plan_rounds(&self) -> usize {
        self.iterations.iter().filter(|i| i.phase != Phase::Trial).count()
    }
}
