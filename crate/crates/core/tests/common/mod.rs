//! Hand-built scripted scenarios for the solve policy, shared by the policy
//! suite and the acceptance report.

#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use pat_core::gateway::{CallLog, ModelGateway, ModelRole, RoleKind, ScriptedBackend, ScriptedTranscript, ScriptedTurn, Strictness};
use pat_core::harness::PricingTable;
use pat_core::policy::{FunctionImpl, HelperSet, Origin, Outcome, Phase, PolicyConfig, ProblemSpec, Roles, SolveTrace, Solver};
use pat_core::sandbox::{InProcessExecutor, ResourceLimits};

pub const MODEL: &str = "Qwen3-4B";

pub fn limits() -> ResourceLimits {
    ResourceLimits { cpu_timeout: Duration::from_millis(200), wall_timeout: Duration::from_secs(5), ..ResourceLimits::default() }
}

pub fn problem(id: &str, description: &str, entry_point: &str) -> ProblemSpec {
    ProblemSpec {
        id: id.into(),
        description: description.into(),
        entry_point: entry_point.parse().expect("entry point"),
        provided_examples: Vec::new(),
        difficulty: None,
        depth: 0,
    }
}

fn fenced(code: &str) -> String {
    format!("Here is the function:\n\n```python\n{}\n```\n", code.trim_end())
}

/// `def name(x: int) -> int` returning `expr` on `inputs` and -1000 elsewhere.
pub fn partial(name: &str, doc: &str, expr: &str, inputs: &[i64], marker: &str) -> String {
    let guard = if inputs.is_empty() {
        "False".to_string()
    } else {
        format!("x in ({},)", inputs.iter().map(i64::to_string).collect::<Vec<_>>().join(", "))
    };
    format!(
        "def {name}(x: int) -> int:\n    \"\"\"{doc}\"\"\"\n    # {marker}\n    if {guard}:\n        return {expr}\n    return -1000\n"
    )
}

pub fn total(name: &str, doc: &str, expr: &str, marker: &str) -> String {
    format!("def {name}(x: int) -> int:\n    \"\"\"{doc}\"\"\"\n    # {marker}\n    return {expr}\n")
}

pub fn assertions(name: &str, cases: impl IntoIterator<Item = (i64, i64)>) -> String {
    let lines: Vec<String> = cases.into_iter().map(|(x, y)| format!("assert {name}({x}) == {y}")).collect();
    format!("```python\n{}\n```\n", lines.join("\n"))
}

/// Keyed transcript under construction.
#[derive(Default)]
pub struct Script {
    turns: Vec<ScriptedTurn>,
}

impl Script {
    pub fn turn(&mut self, role: RoleKind, id: &str, response: String) -> &mut Self {
        self.turns.push(ScriptedTurn::new(format!("{role}:{id}"), response));
        self
    }

    pub fn code(&mut self, role: RoleKind, id: &str, code: &str) -> &mut Self {
        self.turn(role, id, fenced(code))
    }

    pub fn tests(&mut self, id: &str, text: String) -> &mut Self {
        self.turn(RoleKind::TestWriter, id, text)
    }

    pub fn transcript(&self) -> ScriptedTranscript {
        ScriptedTranscript { strictness: Strictness::Keyed, turns: self.turns.clone() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Expect {
    pub outcome: Option<Outcome>,
    pub pass_count: Option<usize>,
    pub planner_calls: Option<usize>,
    /// Trial candidate selected at the root.
    pub best_index: Option<usize>,
    /// Per-candidate pass counts of the root trial.
    pub candidates: Option<Vec<Option<usize>>>,
    pub program_contains: Vec<String>,
    pub program_lacks: Vec<String>,
    /// Number of requests per fingerprint.
    pub requests: Vec<(String, usize)>,
    pub max_depth: Option<u32>,
}

pub struct Scenario {
    pub name: String,
    pub problem: ProblemSpec,
    pub script: Script,
    pub n_samples: u32,
    pub planner: bool,
    pub config: PolicyConfig,
    pub helpers: HelperSet,
    pub expect: Expect,
}

impl Scenario {
    fn new(name: String, problem: ProblemSpec, script: Script) -> Self {
        Self {
            name,
            problem,
            script,
            n_samples: 1,
            planner: true,
            config: PolicyConfig::default(),
            helpers: HelperSet::new(),
            expect: Expect::default(),
        }
    }
}

/// What one execution of a scenario produced, in comparable form.
#[derive(Debug, PartialEq)]
pub struct Run {
    pub trace: SolveTrace,
    pub program: String,
    pub pass_count: usize,
    pub trace_json: String,
    pub log_json: String,
    pub log: Vec<(RoleKind, String)>,
}

pub fn execute(s: &Scenario) -> Result<Run, String> {
    let backend = Arc::new(ScriptedBackend::new(&s.script.transcript()));
    let roles = Roles {
        generator: ModelRole::new(RoleKind::Generator, MODEL, backend.clone()).with_samples(s.n_samples),
        planner: s.planner.then(|| ModelRole::new(RoleKind::Planner, MODEL, backend.clone())),
        test_writer: Some(ModelRole::new(RoleKind::TestWriter, MODEL, backend.clone())),
    };
    let gateway = ModelGateway::new().with_pricing(PricingTable::reference());
    let executor = InProcessExecutor::new(4);
    let solver = Solver::new(&gateway, &executor, &roles).with_config(s.config).with_limits(limits());
    let mut log = CallLog::new();
    let solution = solver.solve(&s.problem, &s.helpers, &mut log).map_err(|e| format!("solve failed: {e}"))?;
    Ok(Run {
        trace_json: serde_json::to_string(&solution.trace).expect("trace serializes"),
        log_json: serde_json::to_string(&log.records).expect("records serialize"),
        log: log.records.iter().map(|r| (r.role, r.fingerprint.clone())).collect(),
        program: solution.program.rendered.clone(),
        pass_count: solution.result.pass_count,
        trace: solution.trace,
    })
}

fn walk<'a>(trace: &'a SolveTrace, out: &mut Vec<&'a SolveTrace>) {
    out.push(trace);
    for child in &trace.children {
        walk(child, out);
    }
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Runs a scenario twice and checks its expectations plus the policy
/// invariants that hold for every transcript.
pub fn check(s: &Scenario) -> Result<(), String> {
    let run = execute(s)?;
    let again = execute(s)?;
    ensure(run == again, || "two runs of the same transcript differ".into())?;

    let planner_calls = run.log.iter().filter(|(r, _)| *r == RoleKind::Planner).count();
    let mut nodes = Vec::new();
    walk(&run.trace, &mut nodes);
    let plan_iterations: usize = nodes.iter().map(|n| n.plan_rounds()).sum();
    ensure(planner_calls == plan_iterations, || {
        format!("{planner_calls} planner calls but {plan_iterations} plan iterations")
    })?;
    for node in &nodes {
        if let Some(first) = node.iterations.first() {
            if first.phase == Phase::Trial && first.pass_count == first.suite_size && first.suite_size > 0 {
                ensure(node.iterations.len() == 1 && node.children.is_empty(), || {
                    format!("{} planned after a successful trial", node.problem_id)
                })?;
            }
        }
        ensure(node.depth <= s.config.max_depth.min(3), || format!("{} at depth {}", node.problem_id, node.depth))?;
    }
    let best_seen = run.trace.iterations.iter().map(|i| i.pass_count).max().unwrap_or(0);
    ensure(run.pass_count >= best_seen, || format!("returned {} but an iteration reached {best_seen}", run.pass_count))?;

    let e = &s.expect;
    if let Some(outcome) = e.outcome {
        ensure(run.trace.outcome == outcome, || format!("outcome {:?}, expected {outcome:?}", run.trace.outcome))?;
    }
    if let Some(p) = e.pass_count {
        ensure(run.pass_count == p, || format!("pass count {}, expected {p}", run.pass_count))?;
    }
    if let Some(n) = e.planner_calls {
        ensure(planner_calls == n, || format!("{planner_calls} planner calls, expected {n}"))?;
    }
    if let Some(c) = &e.candidates {
        let got = &run.trace.iterations[0].candidates;
        ensure(got == c, || format!("candidate pass counts {got:?}, expected {c:?}"))?;
    }
    if let Some(d) = e.max_depth {
        ensure(run.trace.max_depth() == d, || format!("max depth {}, expected {d}", run.trace.max_depth()))?;
    }
    for needle in &e.program_contains {
        ensure(run.program.contains(needle.as_str()), || format!("program lacks {needle:?}:\n{}", run.program))?;
    }
    for needle in &e.program_lacks {
        ensure(!run.program.contains(needle.as_str()), || format!("program contains {needle:?}:\n{}", run.program))?;
    }
    for (fingerprint, n) in &e.requests {
        let got = run.log.iter().filter(|(_, f)| f == fingerprint).count();
        ensure(got == *n, || format!("{got} requests for {fingerprint}, expected {n}"))?;
    }
    Ok(())
}

const F_DOC: &str = "Return 3 * x + 1";
const INPUTS: [i64; 6] = [1, 2, 3, 4, 5, 6];

fn f_problem() -> ProblemSpec {
    problem("f", F_DOC, "f(x: int) -> int")
}

fn f_tests() -> String {
    assertions("f", INPUTS.map(|x| (x, 3 * x + 1)))
}

#[derive(Clone, Copy)]
enum Wrong {
    Output,
    Crash,
    Hang,
    Partial(usize),
}

fn wrong(kind: Wrong, marker: &str) -> String {
    match kind {
        Wrong::Output => total("f", F_DOC, "3 * x", marker),
        Wrong::Crash => total("f", F_DOC, "[][x]", marker),
        Wrong::Hang => format!("def f(x: int) -> int:\n    \"\"\"{F_DOC}\"\"\"\n    # {marker}\n    while True:\n        pass\n"),
        Wrong::Partial(k) => partial("f", F_DOC, "3 * x + 1", &INPUTS[..k], marker),
    }
}

/// Best-of-N trials that succeed: the first fully passing candidate wins
/// and the planner is never consulted.
fn trial_successes() -> Vec<Scenario> {
    let kinds = [Wrong::Output, Wrong::Crash, Wrong::Partial(5), Wrong::Hang, Wrong::Partial(2)];
    let mut out = Vec::new();
    for n in [1usize, 3, 5] {
        for pos in 0..n {
            let mut script = Script::default();
            script.tests("f", f_tests());
            let mut counts = Vec::new();
            for i in 0..n {
                if i == pos {
                    script.code(RoleKind::Generator, "f", &total("f", F_DOC, "3 * x + 1", &format!("cand-{i}")));
                    counts.push(Some(6));
                } else {
                    let kind = kinds[i % kinds.len()];
                    script.code(RoleKind::Generator, "f", &wrong(kind, &format!("cand-{i}")));
                    counts.push(Some(match kind {
                        Wrong::Partial(k) => k,
                        _ => 0,
                    }));
                }
            }
            let mut s = Scenario::new(format!("trial success n={n} at {pos}"), f_problem(), script);
            s.n_samples = n as u32;
            s.expect = Expect {
                outcome: Some(Outcome::TrialSuccess),
                pass_count: Some(6),
                planner_calls: Some(0),
                candidates: Some(counts),
                program_contains: vec![format!("# cand-{pos}")],
                ..Expect::default()
            };
            out.push(s);
        }
    }

    // pass counts {2, 6, 6, 0, 3}: the earlier of the two full passes wins
    let mut script = Script::default();
    script.tests("f", f_tests());
    for code in [
        wrong(Wrong::Partial(2), "cand-0"),
        total("f", F_DOC, "3 * x + 1", "cand-1"),
        total("f", F_DOC, "x * 3 + 1", "cand-2"),
        wrong(Wrong::Output, "cand-3"),
        wrong(Wrong::Partial(3), "cand-4"),
    ] {
        script.code(RoleKind::Generator, "f", &code);
    }
    let mut s = Scenario::new("trial tie prefers first index".into(), f_problem(), script);
    s.n_samples = 5;
    s.expect = Expect {
        outcome: Some(Outcome::TrialSuccess),
        candidates: Some(vec![Some(2), Some(6), Some(6), Some(0), Some(3)]),
        program_contains: vec!["# cand-1".into()],
        planner_calls: Some(0),
        ..Expect::default()
    };
    out.push(s);

    // short-circuiting stops evaluating after the first full pass
    let mut script = Script::default();
    script.tests("f", f_tests());
    script.code(RoleKind::Generator, "f", &wrong(Wrong::Output, "cand-0"));
    script.code(RoleKind::Generator, "f", &total("f", F_DOC, "3 * x + 1", "cand-1"));
    script.code(RoleKind::Generator, "f", &total("f", F_DOC, "x * 3 + 1", "cand-2"));
    let mut s = Scenario::new("trial short circuit".into(), f_problem(), script);
    s.n_samples = 3;
    s.config.short_circuit = true;
    s.expect = Expect {
        outcome: Some(Outcome::TrialSuccess),
        candidates: Some(vec![Some(0), Some(6), None]),
        program_contains: vec!["# cand-1".into()],
        planner_calls: Some(0),
        ..Expect::default()
    };
    out.push(s);
    out
}

/// Without a planner a failed trial returns its best candidate.
fn trial_failures() -> Vec<Scenario> {
    let sets: [&[usize]; 6] = [&[2, 4, 4, 1], &[0, 0, 0], &[5], &[1, 3, 2, 3], &[0, 5, 4, 5, 1], &[3, 0]];
    sets.iter()
        .map(|counts| {
            let mut script = Script::default();
            script.tests("f", f_tests());
            for (i, &k) in counts.iter().enumerate() {
                script.code(RoleKind::Generator, "f", &wrong(Wrong::Partial(k), &format!("cand-{i}")));
            }
            let best = counts.iter().enumerate().fold(0, |b, (i, &k)| if k > counts[b] { i } else { b });
            let mut s = Scenario::new(format!("trial failure {counts:?}"), f_problem(), script);
            s.n_samples = counts.len() as u32;
            s.planner = false;
            s.expect = Expect {
                outcome: Some(Outcome::TrialFailure),
                pass_count: Some(counts[best]),
                planner_calls: Some(0),
                candidates: Some(counts.iter().map(|&k| Some(k)).collect()),
                program_contains: vec![format!("# cand-{best}")],
                ..Expect::default()
            };
            s
        })
        .collect()
}

/// Re-planning continues only while the pass count strictly improves.
fn plateaus() -> Vec<Scenario> {
    let cases: [(usize, &[usize]); 15] = [
        (3, &[3]),
        (3, &[2]),
        (0, &[0]),
        (2, &[4, 4]),
        (2, &[4, 3]),
        (1, &[2, 3, 1]),
        (0, &[1, 2, 3, 4]),
        (0, &[1, 2, 6]),
        (5, &[6]),
        (4, &[5, 5]),
        (0, &[6]),
        (2, &[1]),
        (1, &[3, 2]),
        (0, &[2, 5, 4]),
        (3, &[4, 5, 6]),
    ];
    cases
        .iter()
        .map(|&(p0, rounds)| {
            let mut script = Script::default();
            script.tests("f", f_tests());
            script.code(RoleKind::Generator, "f", &wrong(Wrong::Partial(p0), "trial"));
            for (r, &p) in rounds.iter().enumerate() {
                let g = format!("g{}", r + 1);
                let doc = format!("Return 3 * x for the inputs of round {}", r + 1);
                script.code(
                    RoleKind::Planner,
                    "f",
                    &format!(
                        "def f(x: int) -> int:\n    \"\"\"{F_DOC}\"\"\"\n    # round-{}\n    return {g}(x) + 1\n\n\
                         def {g}(x: int) -> int:\n    \"\"\"{doc}\"\"\"\n    raise NotImplementedError()\n",
                        r + 1
                    ),
                );
                let mut inputs: Vec<i64> = INPUTS[..p].to_vec();
                inputs.push(100);
                let id = format!("f::{g}");
                script.code(RoleKind::Generator, &id, &partial(&g, &doc, "3 * x", &inputs, "helper"));
                script.tests(&id, assertions(&g, inputs.iter().map(|&x| (x, 3 * x))));
            }
            // simulate the rule to derive what must come back
            let (mut best, mut best_round, mut outcome, mut calls) = (p0, 0, Outcome::RoundLimit, 0);
            for (r, &p) in rounds.iter().enumerate() {
                calls += 1;
                if p == 6 {
                    outcome = Outcome::PlanSuccess;
                    best = 6;
                    best_round = r + 1;
                    break;
                }
                if p <= best {
                    outcome = Outcome::PlateauHalt;
                    break;
                }
                best = p;
                best_round = r + 1;
            }
            let marker = if best_round == 0 { "# trial".to_string() } else { format!("# round-{best_round}") };
            let mut s = Scenario::new(format!("plateau {p0} then {rounds:?}"), f_problem(), script);
            s.expect = Expect {
                outcome: Some(outcome),
                pass_count: Some(best),
                planner_calls: Some(calls),
                program_contains: vec![marker],
                ..Expect::default()
            };
            s
        })
        .collect()
}

/// Chains of decompositions `c0 -> c1 -> ...` where only level `len` is
/// directly solvable, under every depth limit.
fn depth_chains() -> Vec<Scenario> {
    let mut out = Vec::new();
    for max_depth in 0..=3u32 {
        for len in 0..=5u32 {
            let mut script = Script::default();
            let mut id = "c0".to_string();
            for level in 0..=len.min(max_depth) {
                let name = format!("c{level}");
                let doc = format!("Return x + {}", len - level);
                script.tests(&id, assertions(&name, (1..=4).map(|x| (x, x + i64::from(len - level)))));
                let body = if level == len { "x".to_string() } else { "0".to_string() };
                script.code(RoleKind::Generator, &id, &total(&name, &doc, &body, &format!("level-{level}")));
                if level < len && level < max_depth {
                    let next = format!("c{}", level + 1);
                    let next_doc = format!("Return x + {}", len - level - 1);
                    script.code(
                        RoleKind::Planner,
                        &id,
                        &format!(
                            "def {name}(x: int) -> int:\n    \"\"\"{doc}\"\"\"\n    return {next}(x) + 1\n\n\
                             def {next}(x: int) -> int:\n    \"\"\"{next_doc}\"\"\"\n    raise NotImplementedError()\n"
                        ),
                    );
                    id = format!("{id}::{next}");
                }
            }
            let solvable = len <= max_depth;
            let outcome = match (len, solvable, max_depth) {
                (0, _, _) => Outcome::TrialSuccess,
                (_, true, _) => Outcome::PlanSuccess,
                (_, false, 0) => Outcome::DepthHalt,
                _ => Outcome::PlateauHalt,
            };
            let mut s = Scenario::new(
                format!("chain of {len} under max_depth {max_depth}"),
                problem("c0", &format!("Return x + {len}"), "c0(x: int) -> int"),
                script,
            );
            s.config.max_depth = max_depth;
            s.expect = Expect {
                outcome: Some(outcome),
                pass_count: Some(if solvable { 4 } else { 0 }),
                planner_calls: Some(len.min(max_depth) as usize),
                max_depth: Some(len.min(max_depth)),
                ..Expect::default()
            };
            out.push(s);
        }
    }
    out
}

const A_DOC: &str = "Return x unchanged";
const C_DOC: &str = "Return 2 * x + 1";

fn stub(name: &str, doc: &str) -> String {
    format!("def {name}(x: int) -> int:\n    \"\"\"{doc}\"\"\"\n    raise NotImplementedError()\n")
}

/// Helpers verified earlier are reused rather than regenerated.
fn helper_reuse() -> Vec<Scenario> {
    let mut out = Vec::new();
    for b_inputs in [1usize, 3, 5] {
        for restub in [true, false] {
            let mut script = Script::default();
            script.tests("f", f_tests());
            script.code(RoleKind::Generator, "f", &wrong(Wrong::Output, "trial"));
            let b_doc = "Return 2 * x + 1 for some inputs";
            script.code(
                RoleKind::Planner,
                "f",
                &format!(
                    "def f(x: int) -> int:\n    \"\"\"{F_DOC}\"\"\"\n    return a(x) + b(x)\n\n{}\n{}",
                    stub("a", A_DOC),
                    stub("b", b_doc)
                ),
            );
            script.code(RoleKind::Generator, "f::a", &total("a", A_DOC, "x", "helper"));
            script.tests("f::a", assertions("a", [(1, 1), (2, 2), (3, 3)]));
            let inputs: Vec<i64> = INPUTS[..b_inputs].iter().copied().chain([100]).collect();
            script.code(RoleKind::Generator, "f::b", &partial("b", b_doc, "2 * x + 1", &inputs, "helper"));
            script.tests("f::b", assertions("b", inputs.iter().map(|&x| (x, 2 * x + 1))));
            let restubbed = if restub { format!("\n{}", stub("a", A_DOC)) } else { String::new() };
            script.code(
                RoleKind::Planner,
                "f",
                &format!(
                    "def f(x: int) -> int:\n    \"\"\"{F_DOC}\"\"\"\n    return a(x) + c(x)\n{restubbed}\n{}",
                    stub("c", C_DOC)
                ),
            );
            script.code(RoleKind::Generator, "f::c", &total("c", C_DOC, "2 * x + 1", "helper"));
            script.tests("f::c", assertions("c", [(1, 3), (4, 9)]));
            let mut s = Scenario::new(format!("reuse across rounds b={b_inputs} restub={restub}"), f_problem(), script);
            s.expect = Expect {
                outcome: Some(Outcome::PlanSuccess),
                pass_count: Some(6),
                planner_calls: Some(2),
                requests: vec![
                    ("generator:f::a".into(), 1),
                    ("test_writer:f::a".into(), 1),
                    ("generator:f::c".into(), 1),
                ],
                ..Expect::default()
            };
            out.push(s);
        }
    }
    for restub in [true, false] {
        let mut script = Script::default();
        script.tests("f", f_tests());
        script.code(RoleKind::Generator, "f", &wrong(Wrong::Crash, "trial"));
        let restubbed = if restub { format!("\n{}", stub("a", A_DOC)) } else { String::new() };
        script.code(
            RoleKind::Planner,
            "f",
            &format!("def f(x: int) -> int:\n    \"\"\"{F_DOC}\"\"\"\n    return a(x) + c(x)\n{restubbed}\n{}", stub("c", C_DOC)),
        );
        script.code(RoleKind::Generator, "f::c", &total("c", C_DOC, "2 * x + 1", "helper"));
        script.tests("f::c", assertions("c", [(1, 3), (4, 9)]));
        let mut helpers = HelperSet::new();
        helpers.insert(FunctionImpl::new("a", &total("a", A_DOC, "x", "seeded"), A_DOC, Origin::Helper), true);
        let mut s = Scenario::new(format!("reuse seeded helper restub={restub}"), f_problem(), script);
        s.helpers = helpers;
        s.expect = Expect {
            outcome: Some(Outcome::PlanSuccess),
            pass_count: Some(6),
            planner_calls: Some(1),
            requests: vec![("generator:f::a".into(), 0), ("test_writer:f::a".into(), 0)],
            program_contains: vec!["# seeded".into()],
            ..Expect::default()
        };
        out.push(s);
    }
    out
}

pub fn all_scenarios() -> Vec<Scenario> {
    let mut all = trial_successes();
    all.extend(trial_failures());
    all.extend(plateaus());
    all.extend(depth_chains());
    all.extend(helper_reuse());
    all
}

/// Failing scenario names with reasons.
pub fn failures(scenarios: &[Scenario]) -> Vec<String> {
    use rayon::prelude::*;
    scenarios
        .par_iter()
        .filter_map(|s| check(s).err().map(|e| format!("{}: {e}", s.name)))
        .collect()
}
