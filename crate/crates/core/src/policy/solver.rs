use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compose::{compose, ComposeError};
use super::trace::{Iteration, Outcome, Phase, SolveTrace};
use super::types::{FunctionImpl, HelperSet, Origin, Program, ProblemSpec};
use crate::gateway::{CallLog, GatewayError, ModelGateway, ModelRole};
use crate::sandbox::{Executor, ResourceLimits, SandboxError};
use crate::verification::{
    build_suite, evaluate, is_success, EvalResult, SuiteError, TestSuite, DEFAULT_MAX_SUITE_SIZE,
    DEFAULT_SUB_SUITE_SIZE,
};

/// Policy constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub max_depth: u32,
    pub max_plan_rounds: u32,
    /// Cap for the root suite.
    pub max_suite_size: usize,
    /// Cap for subproblem suites.
    pub sub_suite_size: usize,
    /// Stop evaluating trial candidates after the first full pass.
    pub short_circuit: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            max_plan_rounds: 4,
            max_suite_size: DEFAULT_MAX_SUITE_SIZE,
            sub_suite_size: DEFAULT_SUB_SUITE_SIZE,
            short_circuit: false,
        }
    }
}

/// The model roles a solve may call. Without a planner the solver stops
/// after the trial; without a test writer suites come from provided
/// examples alone.
#[derive(Debug, Clone)]
pub struct Roles {
    pub generator: ModelRole,
    pub planner: Option<ModelRole>,
    pub test_writer: Option<ModelRole>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Halt,
}

/// Re-planning continues only on strict improvement.
pub fn plateau_decision(p_current: usize, p_previous: usize) -> Decision {
    if p_current <= p_previous {
        Decision::Halt
    } else {
        Decision::Continue
    }
}

/// Index of the highest pass count; the earliest index wins ties.
/// `None` entries (unparsable or unevaluated candidates) never win.
pub fn best_index(pass_counts: &[Option<usize>]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, p) in pass_counts.iter().enumerate() {
        if let Some(p) = *p {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("problem depth {depth} exceeds the maximum of {max}")]
    DepthExceeded { depth: u32, max: u32 },
    #[error("model call failed: {0}")]
    Model(#[from] GatewayError),
    #[error("no usable test cases for {problem_id}")]
    SuiteEmpty { problem_id: String },
    #[error(transparent)]
    Suite(SuiteError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("all {samples} candidates were unparsable")]
    AllUnparsable { samples: usize },
    #[error(transparent)]
    Model(GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

impl From<TrialError> for SolveError {
    fn from(e: TrialError) -> Self {
        match e {
            TrialError::Model(e) => SolveError::Model(e),
            TrialError::Sandbox(e) => SolveError::Sandbox(e),
            TrialError::Compose(e) => SolveError::Compose(e),
            TrialError::AllUnparsable { samples } => SolveError::Model(GatewayError::EmptyOutput { attempts: samples as u32 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub function: FunctionImpl,
    pub program: Program,
    /// `None` when skipped by short-circuiting.
    pub result: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub candidates: Vec<Result<Candidate, GatewayError>>,
    pub best: usize,
}

impl TrialOutcome {
    pub fn best(&self) -> &Candidate {
        self.candidates[self.best].as_ref().expect("best candidate is parsed")
    }

    pub fn best_result(&self) -> &EvalResult {
        self.best().result.as_ref().expect("best candidate is evaluated")
    }

    pub fn pass_counts(&self) -> Vec<Option<usize>> {
        self.candidates
            .iter()
            .map(|c| c.as_ref().ok().and_then(|c| c.result.as_ref()).map(|r| r.pass_count))
            .collect()
    }
}

/// A finished solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub program: Program,
    /// The program's result on `suites[0]`.
    pub result: EvalResult,
    pub trace: SolveTrace,
    /// The helper set after the solve.
    pub helpers: HelperSet,
    /// Every suite built, the root's first.
    pub suites: Vec<TestSuite>,
}

impl Solution {
    pub fn verified(&self) -> bool {
        self.trace.outcome.is_verified()
    }
}

struct Node {
    program: Program,
    result: EvalResult,
    trace: SolveTrace,
}

pub struct Solver<'a> {
    pub gateway: &'a ModelGateway,
    pub executor: &'a dyn Executor,
    pub limits: ResourceLimits,
    pub roles: &'a Roles,
    pub config: PolicyConfig,
}

impl<'a> Solver<'a> {
    pub fn new(gateway: &'a ModelGateway, executor: &'a dyn Executor, roles: &'a Roles) -> Self {
        Self { gateway, executor, limits: ResourceLimits::default(), roles, config: PolicyConfig::default() }
    }

    pub fn with_config(mut self, config: PolicyConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_limits(mut self, limits: ResourceLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Solves `problem` starting from `helpers`. Every model call is
    /// recorded in `log`.
    pub fn solve(&self, problem: &ProblemSpec, helpers: &HelperSet, log: &mut CallLog) -> Result<Solution, SolveError> {
        if problem.depth > self.config.max_depth {
            return Err(SolveError::DepthExceeded { depth: problem.depth, max: self.config.max_depth });
        }
        let mut h = helpers.clone();
        let mut suites = Vec::new();
        let node = self.node(problem, &mut h, log, &mut suites)?;
        Ok(Solution { program: node.program, result: node.result, trace: node.trace, helpers: h, suites })
    }

    /// The suite T(x): provided examples plus test-writer output.
    pub fn build_suite(&self, problem: &ProblemSpec, log: &mut CallLog) -> Result<TestSuite, SolveError> {
        let raw = match self.gateway.write_tests(problem, self.roles.test_writer.as_ref(), log) {
            Ok(text) => text,
            Err(GatewayError::EmptyOutput { .. }) => String::new(),
            Err(e) => return Err(e.into()),
        };
        let cap = if problem.depth == 0 { self.config.max_suite_size } else { self.config.sub_suite_size };
        match build_suite(problem, &raw, cap) {
            Ok(built) => Ok(built.suite),
            Err(SuiteError::Empty) => Err(SolveError::SuiteEmpty { problem_id: problem.id.clone() }),
            Err(e) => Err(SolveError::Suite(e)),
        }
    }

    /// Best-of-N: every parsed candidate is evaluated (unless
    /// short-circuiting) and the best by pass count is selected.
    pub fn trial(
        &self,
        problem: &ProblemSpec,
        helpers: &HelperSet,
        suite: &TestSuite,
        log: &mut CallLog,
    ) -> Result<TrialOutcome, TrialError> {
        let samples = self.gateway.generate(problem, helpers, &self.roles.generator, log).map_err(TrialError::Model)?;
        let mut candidates = Vec::with_capacity(samples.len());
        let mut done = false;
        for (index, sample) in samples.into_iter().enumerate() {
            let function = match sample {
                Ok(f) => f,
                Err(e) => {
                    candidates.push(Err(e));
                    continue;
                }
            };
            let program = compose(&function, helpers)?;
            let result = if done { None } else { Some(evaluate(self.executor, &program, suite, &self.limits)?) };
            if self.config.short_circuit && result.as_ref().is_some_and(|r| is_success(r, suite)) {
                done = true;
            }
            candidates.push(Ok(Candidate { index, function, program, result }));
        }
        let mut outcome = TrialOutcome { candidates, best: 0 };
        outcome.best = best_index(&outcome.pass_counts())
            .ok_or(TrialError::AllUnparsable { samples: outcome.candidates.len() })?;
        Ok(outcome)
    }

    fn node(
        &self,
        problem: &ProblemSpec,
        h: &mut HelperSet,
        log: &mut CallLog,
        suites: &mut Vec<TestSuite>,
    ) -> Result<Node, SolveError> {
        let name = problem.name();
        let start = log.total_usd();
        let mut trace = SolveTrace::new(&problem.id, problem.depth);
        let suite = self.build_suite(problem, log)?;
        suites.push(suite.clone());

        let context = h.without(name);
        let (mut best_program, mut best_result, candidates) = match self.trial(problem, &context, &suite, log) {
            Ok(trial) => (trial.best().program.clone(), trial.best_result().clone(), trial.pass_counts()),
            Err(TrialError::AllUnparsable { samples }) => {
                // nothing usable: fall back to the stub so later rounds have
                // a baseline of zero
                let stub = FunctionImpl::new(name, &problem.stub_source(), &problem.description, Origin::Trial);
                let program = compose(&stub, &context)?;
                let result = evaluate(self.executor, &program, &suite, &self.limits)?;
                (program, result, vec![None; samples])
            }
            Err(e) => return Err(e.into()),
        };
        trace.iterations.push(Iteration {
            phase: Phase::Trial,
            pass_count: best_result.pass_count,
            suite_size: suite.len(),
            cost_delta: log.total_usd() - start,
            candidates,
        });

        let finish = |mut trace: SolveTrace, outcome, program, result, log: &CallLog| -> Result<Node, SolveError> {
            trace.outcome = outcome;
            trace.cost = log.total_usd() - start;
            Ok(Node { program, result, trace })
        };

        if is_success(&best_result, &suite) {
            return finish(trace, Outcome::TrialSuccess, best_program, best_result, log);
        }
        if problem.depth >= self.config.max_depth {
            return finish(trace, Outcome::DepthHalt, best_program, best_result, log);
        }
        let Some(planner) = self.roles.planner.as_ref() else {
            return finish(trace, Outcome::TrialFailure, best_program, best_result, log);
        };

        for round in 0..self.config.max_plan_rounds {
            let round_start = log.total_usd();
            let plan = self.gateway.decompose(problem, &h.without(name), planner, log)?;
            for sub in &plan.subproblems {
                if h.is_verified(sub.name()) || sub.depth > self.config.max_depth {
                    continue;
                }
                let child_start = log.total_usd();
                match self.node(sub, h, log, suites) {
                    Ok(child) => {
                        let outcome = child.trace.outcome;
                        if outcome.is_verified() || outcome == Outcome::DepthHalt {
                            let mut helper = child.program.top_level;
                            helper.origin = Origin::Helper;
                            h.insert(helper, outcome.is_verified());
                        }
                        trace.children.push(child.trace);
                    }
                    Err(e @ SolveError::SuiteEmpty { .. }) => {
                        let mut failed = SolveTrace::failed(&sub.id, sub.depth, e);
                        failed.cost = log.total_usd() - child_start;
                        trace.children.push(failed);
                    }
                    Err(e) => return Err(e),
                }
            }
            let program = compose(&plan.rewrite, &h.without(name))?;
            let result = evaluate(self.executor, &program, &suite, &self.limits)?;
            trace.iterations.push(Iteration {
                phase: if round == 0 { Phase::Plan } else { Phase::RePlan },
                pass_count: result.pass_count,
                suite_size: suite.len(),
                cost_delta: log.total_usd() - round_start,
                candidates: Vec::new(),
            });
            if is_success(&result, &suite) {
                return finish(trace, Outcome::PlanSuccess, program, result, log);
            }
            if plateau_decision(result.pass_count, best_result.pass_count) == Decision::Halt {
                return finish(trace, Outcome::PlateauHalt, best_program, best_result, log);
            }
            best_program = program;
            best_result = result;
        }
        finish(trace, Outcome::RoundLimit, best_program, best_result, log)
    }
}
