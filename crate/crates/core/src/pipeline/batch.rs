use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    render_report, thread_pool, write_atomic, FailureCode, FileFailure, PipelineError, ReportFormat,
    RunConfig, RunReport,
};
use crate::conllu::{parse_corpus, serialize_conllu};
use crate::convert::{convert, ConversionConfig, ConversionReport};
use crate::ontonotes::{align, parse_manifest, parse_onto_coref, parse_ptb, ManifestEntry};
use crate::stats::{compute_stats, validate, CorpusStats, Violation};

/// Name of the report written next to conversion outputs.
pub const REPORT_FILE: &str = "run_report.json";

type FileResult<T> = Result<T, (FailureCode, String)>;

/// Converts one coreference/parse pair to CoNLL-U text. `Ok(None)` means
/// the document has no coreference and unannotated documents are omitted.
pub fn convert_pair(
    coref_text: &str,
    parse_text: &str,
    config: &ConversionConfig,
) -> FileResult<Option<(String, ConversionReport)>> {
    let parse_err = |e: String| (FailureCode::ParseError, e);
    let coref = parse_onto_coref(coref_text).map_err(|e| parse_err(e.to_string()))?;
    let trees = parse_ptb(parse_text).map_err(|e| parse_err(e.to_string()))?;
    let aligned = align(&coref, &trees).map_err(|e| parse_err(e.to_string()))?;
    if config.omit_unannotated_docs && !aligned.has_coreference() {
        return Ok(None);
    }
    let (doc, report) =
        convert(&aligned, config).map_err(|e| (FailureCode::ConversionError, e.to_string()))?;
    report
        .reconcile(&doc, &aligned)
        .map_err(|e| (FailureCode::InvalidOutput, e))?;
    if let Some(v) = validate(&doc).first() {
        return Err((FailureCode::InvalidOutput, v.detail.clone()));
    }
    let text = serialize_conllu(&doc).map_err(|e| (FailureCode::InvalidOutput, e.to_string()))?;
    Ok(Some((text, report)))
}

/// Runs `work`, classifying panics and overruns as failures. The work runs
/// on its own thread when a timeout is set; an overrunning thread is left
/// to finish in the background and its result discarded.
fn guarded<T, F>(timeout: Option<Duration>, work: F) -> FileResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> FileResult<T> + Send + 'static,
{
    let caught = move || {
        panic::catch_unwind(AssertUnwindSafe(work)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err((FailureCode::ConversionError, format!("internal error: {msg}")))
        })
    };
    let Some(limit) = timeout else {
        return caught();
    };
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(caught());
    });
    match rx.recv_timeout(limit) {
        Ok(result) => result,
        Err(mpsc::RecvTimeoutError::Timeout) => Err((
            FailureCode::Timeout,
            format!("no result after {:.3}s", limit.as_secs_f64()),
        )),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            Err((FailureCode::ConversionError, "worker vanished".into()))
        }
    }
}

fn read(path: &Path) -> FileResult<String> {
    fs::read_to_string(path).map_err(|e| (FailureCode::IoError, format!("{}: {e}", path.display())))
}

enum Outcome {
    Written,
    Unannotated,
    Failed(FileFailure),
}

fn output_name(entry: &ManifestEntry) -> String {
    let stem = entry
        .coref
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".into());
    format!("{stem}.conllu")
}

/// Converts every manifest pair into `out_dir/<coref stem>.conllu` and
/// writes [`REPORT_FILE`] there. Per-file problems are recorded in the
/// report; only an unreadable manifest or unwritable directory is an error.
pub fn run_convert(
    manifest_path: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    let text = fs::read_to_string(manifest_path).map_err(|source| {
        PipelineError::ManifestUnreadable {
            path: manifest_path.to_path_buf(),
            source,
        }
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, base)?;
    let unwritable = |source| PipelineError::OutDirUnwritable {
        path: out_dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(out_dir).map_err(unwritable)?;
    tempfile::NamedTempFile::new_in(out_dir).map_err(unwritable)?;

    // later entries whose output name is taken fail instead of overwriting
    let mut taken = HashSet::new();
    let names: Vec<(String, bool)> = entries
        .iter()
        .map(|e| {
            let name = output_name(e);
            let fresh = taken.insert(name.clone());
            (name, fresh)
        })
        .collect();

    let pool = thread_pool(config.jobs)?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        entries
            .par_iter()
            .zip(names.par_iter())
            .map(|(entry, (name, fresh))| {
                let fail = |(code, message): (FailureCode, String)| {
                    Outcome::Failed(FileFailure {
                        path: entry.coref.display().to_string(),
                        code,
                        message,
                    })
                };
                if !fresh {
                    return fail((
                        FailureCode::IoError,
                        format!("output name {name} is already used by an earlier entry"),
                    ));
                }
                let texts = read(&entry.coref).and_then(|c| Ok((c, read(&entry.parse)?)));
                let (coref_text, parse_text) = match texts {
                    Ok(t) => t,
                    Err(e) => return fail(e),
                };
                let conversion = config.conversion.clone();
                let result = guarded(config.timeout, move || {
                    convert_pair(&coref_text, &parse_text, &conversion)
                });
                match result {
                    Ok(None) => Outcome::Unannotated,
                    Ok(Some((text, _))) => match write_atomic(&out_dir.join(name), &text) {
                        Ok(()) => Outcome::Written,
                        Err(e) => fail((FailureCode::IoError, e.to_string())),
                    },
                    Err(e) => fail(e),
                }
            })
            .collect()
    });

    let mut unannotated = 0;
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Written => {}
            Outcome::Unannotated => unannotated += 1,
            Outcome::Failed(f) => failures.push(f),
        }
    }
    let mut report = RunReport::new(entries.len(), failures, started.elapsed());
    report.files_unannotated = unannotated;
    write_atomic(
        &out_dir.join(REPORT_FILE),
        &render_report(&report, ReportFormat::Json),
    )
    .map_err(unwritable)?;
    Ok(report)
}

/// `.conllu` files under `dir`, recursively, in path order.
pub(super) fn conllu_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let unreadable = |source| PipelineError::InputUnreadable {
        path: dir.to_path_buf(),
        source,
    };
    fs::read_dir(dir).map_err(unreadable)?;
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| unreadable(e.into()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "conllu") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

pub(super) fn display_relative(path: &Path, dir: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

/// Parses every file and hands the documents to `per_file`.
fn over_conllu_dir<T: Send>(
    in_dir: &Path,
    jobs: Option<usize>,
    per_file: impl Fn(&str, Vec<crate::model::Document>) -> FileResult<T> + Sync,
) -> Result<(Vec<Result<T, FileFailure>>, usize), PipelineError> {
    let files = conllu_files(in_dir)?;
    let pool = thread_pool(jobs)?;
    let results = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let shown = display_relative(path, in_dir);
                read(path)
                    .and_then(|text| {
                        parse_corpus(&text).map_err(|e| (FailureCode::ParseError, e.to_string()))
                    })
                    .and_then(|docs| per_file(&shown, docs))
                    .map_err(|(code, message)| FileFailure {
                        path: shown,
                        code,
                        message,
                    })
            })
            .collect()
    });
    Ok((results, files.len()))
}

/// Aggregates statistics over every parseable `.conllu` file below
/// `in_dir`; unparseable files are reported as failures.
pub fn run_stats(
    in_dir: &Path,
    jobs: Option<usize>,
) -> Result<(CorpusStats, RunReport), PipelineError> {
    let started = Instant::now();
    let (results, total) = over_conllu_dir(in_dir, jobs, |_, docs| Ok(compute_stats(&docs)))?;
    let mut stats = CorpusStats::default();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => stats += s,
            Err(f) => failures.push(f),
        }
    }
    Ok((stats, RunReport::new(total, failures, started.elapsed())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileViolations {
    pub path: String,
    pub violations: Vec<Violation>,
}

/// Validates every `.conllu` file below `in_dir`. A file with violations
/// counts as failed with [`FailureCode::InvalidOutput`].
pub fn run_validate(
    in_dir: &Path,
    jobs: Option<usize>,
) -> Result<(Vec<FileViolations>, RunReport), PipelineError> {
    let started = Instant::now();
    let (results, total) = over_conllu_dir(in_dir, jobs, |path, docs| {
        let violations: Vec<Violation> = docs.iter().flat_map(validate).collect();
        Ok(FileViolations {
            path: path.to_string(),
            violations,
        })
    })?;
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(fv) if fv.violations.is_empty() => {}
            Ok(fv) => {
                failures.push(FileFailure {
                    path: fv.path.clone(),
                    code: FailureCode::InvalidOutput,
                    message: format!("{} violation(s)", fv.violations.len()),
                });
                found.push(fv);
            }
            Err(f) => failures.push(f),
        }
    }
    Ok((found, RunReport::new(total, failures, started.elapsed())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const COREF: &str = "<DOC DOCNO=\"d1\">\n<COREF ID=\"1\" TYPE=\"IDENT\">Ali</COREF> left . \
                         <COREF ID=\"1\" TYPE=\"IDENT\">He</COREF> slept .\n</DOC>\n";
    const PARSE: &str = "(S (NP (NNP Ali)) (VP (VBD left)) (. .))\n(S (NP (PRP He)) (VP (VBD slept)) (. .))\n";

    #[test]
    fn pair_converts() {
        let (text, report) = convert_pair(COREF, PARSE, &ConversionConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(report.mentions_emitted, 2);
        assert!(text.contains("1\tAli\t"));
        assert!(text.contains("Entity=(e1)"));
    }

    #[test]
    fn unannotated_pair_is_omitted() {
        let coref = "<DOC DOCNO=\"d\">a b</DOC>";
        let parse = "(S (X a) (X b))";
        let config = ConversionConfig::default();
        assert_eq!(convert_pair(coref, parse, &config).unwrap(), None);
        let keep = ConversionConfig {
            omit_unannotated_docs: false,
            ..config
        };
        assert!(convert_pair(coref, parse, &keep).unwrap().is_some());
    }

    #[test]
    fn misaligned_pair_is_parse_error() {
        let err = convert_pair(COREF, "(S (X a))", &ConversionConfig::default()).unwrap_err();
        assert_eq!(err.0, FailureCode::ParseError);
    }

    #[test]
    fn guard_classifies_panics_and_overruns() {
        let err = guarded::<(), _>(None, || panic!("boom")).unwrap_err();
        assert_eq!(err.0, FailureCode::ConversionError);
        assert!(err.1.contains("boom"));
        let err = guarded(Some(Duration::from_millis(20)), || {
            thread::sleep(Duration::from_millis(500));
            Ok(())
        })
        .unwrap_err();
        assert_eq!(err.0, FailureCode::Timeout);
        assert_eq!(guarded(Some(Duration::from_secs(5)), || Ok(7)), Ok(7));
    }

    #[test]
    fn convert_run_with_collision_and_bad_file() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir(root.join("x")).unwrap();
        fs::write(root.join("a.coref"), COREF).unwrap();
        fs::write(root.join("x/a.coref"), COREF).unwrap();
        fs::write(root.join("a.parse"), PARSE).unwrap();
        fs::write(root.join("b.coref"), "<DOC DOCNO=\"b\"><COREF ID=\"1\">x</DOC>").unwrap();
        fs::write(
            root.join("m.tsv"),
            "a.coref\ta.parse\nx/a.coref\ta.parse\nb.coref\ta.parse\nmissing.coref\ta.parse\n",
        )
        .unwrap();
        let out = root.join("out");
        let report = run_convert(&root.join("m.tsv"), &out, &RunConfig::default()).unwrap();
        assert_eq!(report.files_total, 4);
        assert_eq!(report.files_ok, 1);
        let codes: Vec<FailureCode> = report.failures.iter().map(|f| f.code).collect();
        assert_eq!(
            codes,
            [FailureCode::IoError, FailureCode::ParseError, FailureCode::IoError]
        );
        assert!(out.join("a.conllu").exists());
        assert!(!out.join("b.conllu").exists());
        let saved: RunReport =
            serde_json::from_str(&fs::read_to_string(out.join(REPORT_FILE)).unwrap()).unwrap();
        assert_eq!(saved, report);
    }

    #[test]
    fn missing_manifest_is_run_level() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_convert(&dir.path().join("nope"), dir.path(), &RunConfig::default())
            .unwrap_err();
        assert!(matches!(err, PipelineError::ManifestUnreadable { .. }));
    }

    #[test]
    fn stats_and_validate_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let (text, _) = convert_pair(COREF, PARSE, &ConversionConfig::default())
            .unwrap()
            .unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("one.conllu"), &text).unwrap();
        fs::write(dir.path().join("sub/two.conllu"), &text).unwrap();
        fs::write(dir.path().join("bad.conllu"), "1\tx\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

        let (stats, report) = run_stats(dir.path(), Some(2)).unwrap();
        assert_eq!(report.files_total, 3);
        assert_eq!(report.files_failed, 1);
        assert_eq!(report.failures[0].path, "bad.conllu");
        assert_eq!(stats.total_tokens, 12);
        assert_eq!(stats.total_mentions, 4);

        let (found, report) = run_validate(dir.path(), None).unwrap();
        assert!(found.is_empty());
        assert_eq!(report.files_failed, 1);

        let empty = tempfile::tempdir().unwrap();
        let (stats, report) = run_stats(empty.path(), None).unwrap();
        assert_eq!(stats, CorpusStats::default());
        assert_eq!(report.files_total, 0);
        assert_eq!(report.percent_ok, 100);
    }
}
