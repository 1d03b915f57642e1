//! Benchmark orchestration.

use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::dataset::{BenchProblem, Dataset};
use super::leakage::{hidden_fingerprints, scan_leakage};
use super::metrics::MetricsError;
use super::report::RunReport;
use super::store::{Manifest, ProblemRecord, RunStore, StoreError};
use crate::gateway::{CallLog, ModelGateway};
use crate::policy::{HelperSet, Outcome, Roles, SolveTrace, Solver};
use crate::sandbox::{Executor, SandboxError};
use crate::verification::{evaluate, is_success};

pub const MAX_CONCURRENCY: usize = 8;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("building worker pool: {0}")]
    Pool(String),
}

/// Shared services for solving and scoring problems.
pub struct Bench<'a> {
    pub config: &'a RunConfig,
    pub gateway: ModelGateway,
    pub executor: &'a dyn Executor,
    pub roles: &'a Roles,
}

impl Bench<'_> {
    /// Solves one problem and scores the returned program on its hidden
    /// tests. Errors become failed records.
    pub fn run_problem(&self, index: usize, problem: &BenchProblem) -> ProblemRecord {
        let spec = &problem.spec;
        let solver = Solver::new(&self.gateway, self.executor, self.roles)
            .with_config(self.config.policy)
            .with_limits(self.config.limits);
        let mut log = CallLog::new();
        let solved = solver.solve(spec, &HelperSet::new(), &mut log);
        let mut record = ProblemRecord {
            index,
            id: spec.id.clone(),
            difficulty: spec.difficulty,
            passed: false,
            outcome: Outcome::Error,
            error: None,
            usd: log.total_usd(),
            trace: SolveTrace::new(&spec.id, 0),
            hidden: None,
            program: None,
            suites: Vec::new(),
            costs: Vec::new(),
            prompts: Vec::new(),
        };
        match solved {
            Ok(solution) => {
                record.outcome = solution.trace.outcome;
                record.program = Some(solution.program.rendered.clone());
                record.suites = solution.suites;
                record.trace = solution.trace;
                match score(self.executor, &solution.program, problem, self.config) {
                    Ok(result) => {
                        record.passed = is_success(&result, problem.hidden_suite());
                        record.hidden = Some(result);
                    }
                    Err(e) => record.error = Some(format!("scoring: {e}")),
                }
            }
            Err(e) => {
                let mut trace = SolveTrace::failed(&spec.id, 0, &e);
                trace.cost = log.total_usd();
                record.trace = trace;
                record.error = Some(e.to_string());
            }
        }
        record.costs = log.records;
        record.prompts = log.prompts;
        record
    }
}

fn score(
    executor: &dyn Executor,
    program: &crate::policy::Program,
    problem: &BenchProblem,
    config: &RunConfig,
) -> Result<crate::verification::EvalResult, SandboxError> {
    evaluate(executor, program, problem.hidden_suite(), &config.limits)
}

/// Runs every not-yet-completed problem of `dataset` into `out` and
/// returns the report over all records in the directory.
pub fn run_benchmark(
    config: &RunConfig,
    dataset: &Dataset,
    dataset_name: &str,
    out: &Path,
    resume: bool,
) -> Result<RunReport, RunError> {
    let built = config.build_roles()?;
    let executor = config.build_executor()?;
    let gateway = ModelGateway::new().with_pricing(config.pricing_table()?);
    let manifest = Manifest {
        mode: config.mode,
        seed: config.seed,
        dataset: dataset_name.to_string(),
        problems: dataset.len(),
        skipped_stdio: dataset.skipped_stdio,
    };
    let store = RunStore::open(out, &manifest, resume)?;
    let done = RunStore::completed_ids(out)?;
    let pending: Vec<(usize, &BenchProblem)> =
        dataset.problems.iter().enumerate().filter(|(_, p)| !done.contains(&p.spec.id)).collect();

    let workers = if built.ordered { 1 } else { config.concurrency.min(MAX_CONCURRENCY).min(pending.len()).max(1) };
    let bench = Bench { config, gateway, executor: executor.as_ref(), roles: &built.roles };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("solve-{i}"))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let failure: Mutex<Option<StoreError>> = Mutex::new(None);
    let work = || {
        pending.par_iter().for_each(|&(index, problem)| {
            if failure.lock().expect("failure slot").is_some() {
                return;
            }
            let record = bench.run_problem(index, problem);
            if let Err(e) = store.append(&record) {
                failure.lock().expect("failure slot").get_or_insert(e);
            }
        })
    };
    if workers == 1 {
        // keep scripted transcripts in dataset order
        pending.iter().for_each(|&(index, problem)| {
            if failure.lock().expect("failure slot").is_none() {
                let record = bench.run_problem(index, problem);
                if let Err(e) = store.append(&record) {
                    failure.lock().expect("failure slot").get_or_insert(e);
                }
            }
        });
    } else {
        pool.install(work);
    }
    if let Some(e) = failure.into_inner().expect("failure slot") {
        return Err(e.into());
    }
    report_for(out, Some(dataset))
}

/// Rebuilds the report of a run directory. With the dataset at hand the
/// persisted prompts are also audited against the hidden tests.
pub fn report_for(dir: &Path, dataset: Option<&Dataset>) -> Result<RunReport, RunError> {
    let manifest = RunStore::read_manifest(dir)?;
    let records = RunStore::read_records(dir)?;
    let leaked = match dataset {
        Some(ds) => records
            .iter()
            .filter_map(|r| ds.problems.iter().find(|p| p.spec.id == r.id).map(|p| (r, p)))
            .map(|(r, p)| scan_leakage(&r.prompts, &hidden_fingerprints(p)).len())
            .sum(),
        None => 0,
    };
    Ok(RunReport::from_records(&manifest, &records, leaked)?)
}
