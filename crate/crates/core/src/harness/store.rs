//! Append-only persistence of a run directory.
//!
//! `run.json` holds the manifest; `records.jsonl` gets one line per
//! finished problem, written with a single write so that a killed run
//! leaves at most one torn trailing line, which resuming discards.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::Mode;
use crate::gateway::{CostRecord, PromptLog};
use crate::policy::{Difficulty, Outcome, SolveTrace};
use crate::verification::{EvalResult, TestSuite};

pub const MANIFEST: &str = "run.json";
pub const RECORDS: &str = "records.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{0} already holds a run; resume it or choose another directory")]
    NotEmpty(String),
    #[error("cannot resume: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: Mode,
    pub seed: u64,
    pub dataset: String,
    pub problems: usize,
    pub skipped_stdio: usize,
}

/// Everything persisted about one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    /// Position in the dataset; reports are ordered by it.
    pub index: usize,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    pub passed: bool,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(with = "rust_decimal::serde::str")]
    pub usd: Decimal,
    pub trace: SolveTrace,
    /// Verdicts on the hidden tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<EvalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default)]
    pub suites: Vec<TestSuite>,
    #[serde(default)]
    pub costs: Vec<CostRecord>,
    #[serde(default)]
    pub prompts: Vec<PromptLog>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

pub struct RunStore {
    dir: PathBuf,
    records: Mutex<File>,
}

impl RunStore {
    /// Opens `dir` for a fresh run (`resume == false`, directory must hold
    /// no records) or to continue one with a matching manifest.
    pub fn open(dir: &Path, manifest: &Manifest, resume: bool) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let manifest_path = dir.join(MANIFEST);
        let records_path = dir.join(RECORDS);
        let has_records = records_path.metadata().is_ok_and(|m| m.len() > 0);
        if manifest_path.exists() {
            if !resume && has_records {
                return Err(StoreError::NotEmpty(dir.display().to_string()));
            }
            if resume {
                let existing = Self::read_manifest(dir)?;
                if existing.mode != manifest.mode || existing.seed != manifest.seed || existing.problems != manifest.problems {
                    return Err(StoreError::Mismatch(format!(
                        "directory holds a {} run (seed {}, {} problems)",
                        existing.mode.as_str(),
                        existing.seed,
                        existing.problems
                    )));
                }
            }
        }
        if !manifest_path.exists() || !resume {
            let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
            std::fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&records_path)
            .map_err(io_err(&records_path))?;
        truncate_torn_tail(&mut file).map_err(io_err(&records_path))?;
        Ok(Self { dir: dir.to_path_buf(), records: Mutex::new(file) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&self, record: &ProblemRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let path = self.dir.join(RECORDS);
        let mut file = self.records.lock().expect("record writer lock");
        file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        file.flush().map_err(io_err(&path))
    }

    pub fn read_manifest(dir: &Path) -> Result<Manifest, StoreError> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Complete records in file order; a torn final line is ignored.
    pub fn read_records(dir: &Path) -> Result<Vec<ProblemRecord>, StoreError> {
        let path = dir.join(RECORDS);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let complete = match text.rfind('\n') {
            Some(end) => &text[..=end],
            None => "",
        };
        complete
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }

    pub fn completed_ids(dir: &Path) -> Result<HashSet<String>, StoreError> {
        Ok(Self::read_records(dir)?.into_iter().map(|r| r.id).collect())
    }
}

fn truncate_torn_tail(file: &mut File) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut bytes)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        file.set_len(keep as u64)?;
    }
    file.seek(SeekFrom::End(0))?;
    Ok(())
}
