//! The trial-first, plan-on-failure solver.

mod compose;
mod solver;
mod trace;
mod types;

pub use compose::{compose, ComposeError};
pub use solver::{best_index, plateau_decision, Candidate, Decision, PolicyConfig, Roles, SolveError, Solution, Solver, TrialError, TrialOutcome};
pub use trace::{Iteration, Outcome, Phase, SolveTrace};
pub use types::{
    is_identifier, Difficulty, EntryPoint, EntryPointError, FunctionImpl, HelperEntry, HelperSet, Origin, PlanResult,
    ProblemSpec, Program,
};
