//! Batch runs over files: conversion of OntoNotes manifests, statistics and
//! validation of CoNLL-U directories, and merging of predicted coreference
//! into base treebanks. Every run produces a [`RunReport`].

mod batch;
mod merge;

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convert::{ApposLinking, ConversionConfig};
use crate::ontonotes::ManifestError;

pub use batch::{convert_pair, run_convert, run_stats, run_validate, FileViolations, REPORT_FILE};
pub use merge::{
    merge_corpus, merge_predictions, run_merge, MergeError, MergePolicy, MergeWarning, MismatchPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCode {
    ParseError,
    ConversionError,
    InvalidOutput,
    Timeout,
    IoError,
    TokenMismatch,
}

impl FailureCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureCode::ParseError => "parse-error",
            FailureCode::ConversionError => "conversion-error",
            FailureCode::InvalidOutput => "invalid-output",
            FailureCode::Timeout => "timeout",
            FailureCode::IoError => "io-error",
            FailureCode::TokenMismatch => "token-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFailure {
    pub path: String,
    pub code: FailureCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub files_total: usize,
    pub files_ok: usize,
    pub files_failed: usize,
    /// Inputs that succeeded without producing output because they carry no
    /// coreference; included in `files_ok`.
    pub files_unannotated: usize,
    pub failures: Vec<FileFailure>,
    pub percent_ok: u32,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn new(files_total: usize, failures: Vec<FileFailure>, wall_time: Duration) -> Self {
        let files_failed = failures.len();
        let files_ok = files_total - files_failed;
        RunReport {
            files_total,
            files_ok,
            files_failed,
            files_unannotated: 0,
            failures,
            percent_ok: percent_ok(files_ok, files_total),
            wall_time,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.files_failed == 0
    }
}

/// Floor of `100 * ok / total`; an empty run counts as fully successful.
pub fn percent_ok(ok: usize, total: usize) -> u32 {
    if total == 0 {
        return 100;
    }
    (100 * ok as u128 / total as u128) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

pub fn render_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            // Value's map is ordered, which sorts the keys
            let value = serde_json::to_value(report).expect("report serialize");
            let mut s = serde_json::to_string_pretty(&value).expect("report serialize");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut out = String::new();
            writeln!(
                out,
                "parsed {} of {} files ({}%)",
                report.files_ok, report.files_total, report.percent_ok
            )
            .unwrap();
            if report.files_unannotated > 0 {
                writeln!(out, "without coreference: {}", report.files_unannotated).unwrap();
            }
            if !report.failures.is_empty() {
                writeln!(out, "failed: {}", report.files_failed).unwrap();
                for f in &report.failures {
                    writeln!(out, "  {} [{}] {}", f.path, f.code.as_str(), f.message).unwrap();
                }
            }
            writeln!(out, "wall time: {:.3}s", report.wall_time.as_secs_f64()).unwrap();
            out
        }
    }
}

/// Conversion settings plus the batch knobs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub conversion: ConversionConfig,
    /// Worker count; `None` uses every logical CPU.
    pub jobs: Option<usize>,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {reason}")]
pub struct ConfigError {
    pub line: usize,
    pub reason: String,
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| ConfigError { line: i + 1, reason };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let flag = || match value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(err(format!("`{key}` expects true or false, got `{value}`"))),
        };
        match key {
            "include_non_coref_zeros" => config.conversion.include_non_coref_zeros = flag()?,
            "omit_unannotated_docs" => config.conversion.omit_unannotated_docs = flag()?,
            "zero_insertion" => config.conversion.zero_insertion = flag()?,
            "appos_linking" => {
                config.conversion.appos_linking = match value {
                    "merge_into_head_chain" => ApposLinking::MergeIntoHeadChain,
                    "separate_cluster" => ApposLinking::SeparateCluster,
                    _ => return Err(err(format!("unknown appos_linking `{value}`"))),
                }
            }
            "jobs" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| err(format!("bad jobs `{value}`")))?;
                config.jobs = (n > 0).then_some(n);
            }
            "timeout_seconds" => {
                let secs: f64 = value
                    .parse()
                    .ok()
                    .filter(|s: &f64| s.is_finite() && *s >= 0.0)
                    .ok_or_else(|| err(format!("bad timeout_seconds `{value}`")))?;
                config.timeout = (secs > 0.0).then(|| Duration::from_secs_f64(secs));
            }
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    Ok(config)
}

/// Errors that stop a run before or instead of per-file processing.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read manifest {}: {source}", path.display())]
    ManifestUnreadable { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("cannot write to {}: {source}", path.display())]
    OutDirUnwritable { path: PathBuf, source: io::Error },
    #[error("cannot read input {}: {source}", path.display())]
    InputUnreadable { path: PathBuf, source: io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("merge aborted at {}: {message}", path.display())]
    Aborted { path: PathBuf, message: String },
}

/// Writes through a temporary file in the same directory, then renames.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub(crate) fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| PipelineError::Pool(e.to_string()))
}
