//! Datasets, benchmark runs, metrics and reports.

pub mod config;
pub mod dataset;
pub mod leakage;
pub mod metrics;
pub mod pricing;
pub mod report;
pub mod run;
pub mod store;

pub use config::{BackendConfig, Mode, RoleConfig, RunConfig};
pub use dataset::{load_dataset, parse_dataset, BenchProblem, Dataset, DatasetError, DatasetFormat};
pub use metrics::{normalized_cost, pass_at_1, roi, round_to, MetricsError};
pub use pricing::{display_usd, PricingTable};
pub use report::{frontier, frontier_table, render_table, FrontierRow, RunReport, TableFormat};
pub use run::{report_for, run_benchmark, Bench, RunError};
pub use store::{Manifest, ProblemRecord, RunStore};
