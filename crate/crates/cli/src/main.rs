use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pat_core::econ::{optimal_generator_cost, sweep, SweepGrid, SweepRow};
use pat_core::harness::{
    frontier, frontier_table, load_dataset, render_table, report_for, run_benchmark, DatasetFormat, RunConfig,
    RunReport, TableFormat,
};

/// File a run directory's report is written to.
const REPORT_FILE: &str = "report.json";

#[derive(Parser)]
#[command(name = "pat", version, about = "Trial-first, plan-on-failure code generation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Csv,
    Markdown,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => TableFormat::Tsv,
            Format::Csv => TableFormat::Csv,
            Format::Markdown => TableFormat::Markdown,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve every problem of a dataset and score it on the hidden tests.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue a partial run, skipping completed problems.
        #[arg(long)]
        resume: bool,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from a persisted run directory.
    Score {
        run: PathBuf,
        /// Also audit persisted prompts against this dataset's hidden tests.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Run directory whose cost normalizes this one.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Cost-model utilities.
    Econ {
        #[command(subcommand)]
        command: EconCommand,
    },
    /// Cost-versus-pass@1 table over several runs, normalized to a baseline.
    Report {
        /// Runs as `name=DIR`.
        #[arg(required = true)]
        runs: Vec<String>,
        /// Name of the baseline run; defaults to the first.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum EconCommand {
    /// Closed-form costs over the default scenario grid.
    Sweep {
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
    },
    /// Cost-optimal generator unit cost for `p = alpha * c^beta`.
    Optimal {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        c_l: f64,
    },
}

fn dataset_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let path = dir.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))
}

fn run(dataset: &Path, config: &Path, out: &Path, resume: bool, seed: Option<u64>) -> Result<()> {
    let mut config = RunConfig::load(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let data = load_dataset(dataset, DatasetFormat::LinesV1)?;
    if data.is_empty() {
        bail!("{} contains no usable problems", dataset.display());
    }
    let report = run_benchmark(&config, &data, &dataset_name(dataset), out, resume)?;
    write_report(out, &report)?;
    println!(
        "{}: {}/{} passed (pass@1 {:.4}), ${} total, {} planner calls",
        report.mode, report.passed, report.problems, report.pass_at_1, report.total_usd, report.planner_calls
    );
    if report.leaked_prompts > 0 {
        bail!("{} persisted prompts contain hidden-test content", report.leaked_prompts);
    }
    Ok(())
}

fn score(dir: &Path, dataset: Option<&Path>, baseline: Option<&Path>) -> Result<()> {
    let data = dataset.map(|p| load_dataset(p, DatasetFormat::LinesV1)).transpose()?;
    let mut report = report_for(dir, data.as_ref())?;
    if let Some(base) = baseline {
        let base_report = report_for(base, None)?;
        report = report.with_baseline(&base.display().to_string(), &base_report)?;
    }
    print!("{}", report.to_json());
    Ok(())
}

fn report(runs: &[String], baseline: Option<&str>, format: Format) -> Result<()> {
    let mut loaded = Vec::new();
    for spec in runs {
        let (name, dir) = spec.split_once('=').with_context(|| format!("expected name=DIR, got {spec:?}"))?;
        loaded.push((name.to_string(), report_for(Path::new(dir), None)?));
    }
    let base_name = baseline.unwrap_or(&loaded[0].0).to_string();
    let base = loaded
        .iter()
        .find(|(n, _)| *n == base_name)
        .map(|(_, r)| r.clone())
        .with_context(|| format!("no run named {base_name:?}"))?;
    let mut points = Vec::new();
    for (name, r) in loaded {
        let normalized = r.with_baseline(&base_name, &base)?;
        points.push((name, normalized.normalized_cost.unwrap_or(1.0), normalized.pass_at_1));
    }
    print!("{}", frontier_table(&frontier(&points), format.into()));
    Ok(())
}

fn econ(command: EconCommand) -> Result<()> {
    match command {
        EconCommand::Sweep { format } => {
            let rows: Vec<Vec<String>> = sweep(&SweepGrid::default())?.iter().map(|r| r.fields().to_vec()).collect();
            print!("{}", render_table(&SweepRow::HEADER, &rows, format.into()));
        }
        EconCommand::Optimal { alpha, beta, d, c_l } => {
            println!("{:.6}", optimal_generator_cost(alpha, beta, d, c_l)?);
        }
    }
    Ok(())
}

/// The error chain on one line, skipping causes already quoted by the
/// message above them.
fn describe(error: &anyhow::Error) -> String {
    let mut text = error.to_string();
    let mut previous = text.clone();
    for cause in error.chain().skip(1) {
        let message = cause.to_string();
        if !previous.contains(&message) {
            text.push_str(": ");
            text.push_str(&message);
        }
        previous = message;
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { dataset, config, out, resume, seed } => run(&dataset, &config, &out, resume, seed),
        Command::Score { run, dataset, baseline } => score(&run, dataset.as_deref(), baseline.as_deref()),
        Command::Econ { command } => econ(command),
        Command::Report { runs, baseline, format } => report(&runs, baseline.as_deref(), format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
