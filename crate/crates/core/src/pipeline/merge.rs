use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::batch::{conllu_files, display_relative};
use super::{thread_pool, write_atomic, FailureCode, FileFailure, PipelineError, RunReport};
use crate::conllu::{parse_corpus, serialize_corpus, ConlluError, SerializeError};
use crate::model::{Document, ModelError, NodeId, Sentence, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchPolicy {
    /// Any mismatching file stops the run before anything is written.
    #[default]
    Abort,
    /// Mismatching files are reported and left out.
    SkipFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePolicy {
    pub on_token_mismatch: MismatchPolicy,
    pub copy_empty_nodes: bool,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy {
            on_token_mismatch: MismatchPolicy::Abort,
            copy_empty_nodes: true,
        }
    }
}

fn or_end(form: &Option<String>) -> &str {
    form.as_deref().unwrap_or("<end of sentence>")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    /// Positions are 1-based; a `None` form means the sentence ended.
    #[error(
        "token mismatch at (s{sentence}, t{token}): base has `{}`, prediction has `{}`",
        or_end(base),
        or_end(predicted)
    )]
    TokenMismatch {
        sentence: usize,
        token: usize,
        base: Option<String>,
        predicted: Option<String>,
    },
    #[error("base has {base} sentences, prediction has {predicted}")]
    SentenceCountMismatch { base: usize, predicted: usize },
    #[error("base has {base} documents, prediction has {predicted}")]
    DocumentCountMismatch { base: usize, predicted: usize },
    #[error("{which}: {source}")]
    Parse {
        which: &'static str,
        source: ConlluError,
    },
    #[error(transparent)]
    Serialize(#[from] SerializeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl MergeError {
    pub fn is_mismatch(&self) -> bool {
        matches!(
            self,
            MergeError::TokenMismatch { .. }
                | MergeError::SentenceCountMismatch { .. }
                | MergeError::DocumentCountMismatch { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeWarning {
    /// The base already carried entity annotation, which was discarded.
    BaseEntitiesReplaced { doc_id: String, mentions: usize },
    /// A predicted mention ends on an empty node that was not copied.
    MentionDropped { sentence: usize, span: Span },
    /// The predicted head node was not copied; the head is now the last
    /// node of the span.
    HeadReset { sentence: usize, span: Span },
}

impl fmt::Display for MergeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeWarning::BaseEntitiesReplaced { doc_id, mentions } => {
                write!(f, "{doc_id}: {mentions} base mention(s) replaced by predictions")
            }
            MergeWarning::MentionDropped { sentence, span } => write!(
                f,
                "s{}: mention {span} ends on an empty node that was not copied; dropped",
                sentence + 1
            ),
            MergeWarning::HeadReset { sentence, span } => write!(
                f,
                "s{}: head of mention {span} was not copied; reset to the last node",
                sentence + 1
            ),
        }
    }
}

fn check_forms(index: usize, base: &Sentence, pred: &Sentence) -> Result<(), MergeError> {
    let mut b = base.surface_forms();
    let mut p = pred.surface_forms();
    let mut token = 0;
    loop {
        token += 1;
        match (b.next(), p.next()) {
            (None, None) => return Ok(()),
            (x, y) if x == y => {}
            (x, y) => {
                return Err(MergeError::TokenMismatch {
                    sentence: index + 1,
                    token,
                    base: x.map(str::to_string),
                    predicted: y.map(str::to_string),
                })
            }
        }
    }
}

/// Builds the merged sentence and the node mapping from predicted ids.
///
/// Per anchor, when the base and predicted empty nodes agree on their
/// common prefix of forms, that prefix maps onto the base nodes and the
/// rest is appended; otherwise every predicted node is appended after the
/// base ones.
fn merge_nodes(
    base: &Sentence,
    pred: &Sentence,
    copy_empty_nodes: bool,
) -> (Sentence, HashMap<NodeId, NodeId>) {
    let mut merged = base.clone();
    let mut map: HashMap<NodeId, NodeId> = pred
        .tokens
        .iter()
        .filter(|t| !t.id.is_empty_node())
        .map(|t| (t.id, t.id))
        .collect();
    let mut by_anchor: BTreeMap<u32, (Vec<&crate::model::Token>, Vec<&crate::model::Token>)> =
        BTreeMap::new();
    for t in base.tokens.iter().filter(|t| t.id.is_empty_node()) {
        by_anchor.entry(t.id.token).or_default().0.push(t);
    }
    for t in pred.tokens.iter().filter(|t| t.id.is_empty_node()) {
        by_anchor.entry(t.id.token).or_default().1.push(t);
    }
    for (anchor, (b, p)) in by_anchor {
        let common = b.len().min(p.len());
        let shared = (0..common).all(|i| b[i].form == p[i].form);
        let reuse = if shared { common } else { 0 };
        for (i, t) in p.iter().enumerate() {
            if i < reuse {
                map.insert(t.id, b[i].id);
            } else if copy_empty_nodes {
                let id = merged.insert_empty(anchor, (*t).clone());
                map.insert(t.id, id);
            }
        }
    }
    (merged, map)
}

/// Carries predicted mentions and clusters over to the base document.
/// Surface tokens keep every base column; predicted empty nodes are
/// renumbered to the base anchoring.
pub fn merge_predictions(
    base: &Document,
    predicted: &Document,
    policy: &MergePolicy,
) -> Result<(Document, Vec<MergeWarning>), MergeError> {
    if base.sentences.len() != predicted.sentences.len() {
        return Err(MergeError::SentenceCountMismatch {
            base: base.sentences.len(),
            predicted: predicted.sentences.len(),
        });
    }
    let mut warnings = Vec::new();
    if base.mention_count() > 0 {
        warnings.push(MergeWarning::BaseEntitiesReplaced {
            doc_id: base.doc_id.clone(),
            mentions: base.mention_count(),
        });
    }
    let mut out = Document::new(base.doc_id.clone());
    let mut maps = Vec::with_capacity(base.sentences.len());
    for (i, (b, p)) in base.sentences.iter().zip(&predicted.sentences).enumerate() {
        check_forms(i, b, p)?;
        let (sentence, map) = merge_nodes(b, p, policy.copy_empty_nodes);
        out.sentences.push(sentence);
        maps.push(map);
    }
    for (i, map) in maps.iter().enumerate() {
        for m in predicted.sentence_mentions(i) {
            let (Some(&start), Some(&end)) = (map.get(&m.span.start), map.get(&m.span.end)) else {
                warnings.push(MergeWarning::MentionDropped {
                    sentence: i,
                    span: m.span,
                });
                continue;
            };
            let span = Span::new(start, end);
            let head_node = predicted.sentences[i]
                .span_tokens(m.span)
                .and_then(|ts| ts.get(m.head as usize - 1))
                .and_then(|t| map.get(&t.id));
            let head = head_node.and_then(|h| {
                let nodes = out.sentences[i].span_tokens(span)?;
                nodes.iter().position(|t| t.id == *h).map(|k| k as u32 + 1)
            });
            if head.is_none() {
                warnings.push(MergeWarning::HeadReset { sentence: i, span });
            }
            out.insert_mention(m.cluster, i, span, head, m.appos)?;
        }
    }
    for c in predicted.clusters() {
        if out.cluster(c.id).is_some() {
            out.set_cluster_etype(c.id, c.etype.clone())?;
        }
    }
    Ok((out, warnings))
}

/// Merges two CoNLL-U texts document by document.
pub fn merge_corpus(
    base_text: &str,
    pred_text: &str,
    policy: &MergePolicy,
) -> Result<(String, Vec<MergeWarning>), MergeError> {
    let base = parse_corpus(base_text).map_err(|source| MergeError::Parse {
        which: "base",
        source,
    })?;
    let pred = parse_corpus(pred_text).map_err(|source| MergeError::Parse {
        which: "prediction",
        source,
    })?;
    if base.len() != pred.len() {
        return Err(MergeError::DocumentCountMismatch {
            base: base.len(),
            predicted: pred.len(),
        });
    }
    let mut docs = Vec::with_capacity(base.len());
    let mut warnings = Vec::new();
    for (b, p) in base.iter().zip(&pred) {
        let (doc, w) = merge_predictions(b, p, policy)?;
        docs.push(doc);
        warnings.extend(w);
    }
    Ok((serialize_corpus(&docs)?, warnings))
}

fn classify(e: &MergeError) -> FailureCode {
    match e {
        e if e.is_mismatch() => FailureCode::TokenMismatch,
        MergeError::Parse { .. } => FailureCode::ParseError,
        _ => FailureCode::InvalidOutput,
    }
}

/// Merges a single file pair, or every `.conllu` file below `base` with its
/// namesake below `pred` into the same relative path below `out`.
///
/// Under [`MismatchPolicy::Abort`] a mismatch anywhere is a run-level error
/// and nothing is written. Warnings come back tagged with their file.
pub fn run_merge(
    base: &Path,
    pred: &Path,
    out: &Path,
    policy: &MergePolicy,
    jobs: Option<usize>,
) -> Result<(RunReport, Vec<(String, MergeWarning)>), PipelineError> {
    let started = Instant::now();
    let pairs: Vec<(String, PathBuf, PathBuf, PathBuf)> = if base.is_dir() {
        conllu_files(base)?
            .into_iter()
            .map(|b| {
                let rel = b.strip_prefix(base).unwrap_or(&b).to_path_buf();
                (display_relative(&b, base), b, pred.join(&rel), out.join(&rel))
            })
            .collect()
    } else {
        vec![(
            base.display().to_string(),
            base.to_path_buf(),
            pred.to_path_buf(),
            out.to_path_buf(),
        )]
    };

    let pool = thread_pool(jobs)?;
    let results: Vec<Result<(String, Vec<MergeWarning>), FileFailure>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(shown, b, p, _)| {
                let io_fail = |path: &Path, e: std::io::Error| FileFailure {
                    path: shown.clone(),
                    code: FailureCode::IoError,
                    message: format!("{}: {e}", path.display()),
                };
                let base_text = fs::read_to_string(b).map_err(|e| io_fail(b, e))?;
                let pred_text = fs::read_to_string(p).map_err(|e| io_fail(p, e))?;
                merge_corpus(&base_text, &pred_text, policy).map_err(|e| FileFailure {
                    path: shown.clone(),
                    code: classify(&e),
                    message: e.to_string(),
                })
            })
            .collect()
    });

    if policy.on_token_mismatch == MismatchPolicy::Abort {
        if let Some(f) = results
            .iter()
            .filter_map(|r| r.as_ref().err())
            .find(|f| f.code == FailureCode::TokenMismatch)
        {
            return Err(PipelineError::Aborted {
                path: PathBuf::from(&f.path),
                message: f.message.clone(),
            });
        }
    }

    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    for ((shown, _, _, target), result) in pairs.iter().zip(results) {
        match result {
            Ok((text, w)) => {
                let written = target
                    .parent()
                    .filter(|d| !d.as_os_str().is_empty())
                    .map_or(Ok(()), fs::create_dir_all)
                    .and_then(|_| write_atomic(target, &text));
                match written {
                    Ok(()) => warnings.extend(w.into_iter().map(|w| (shown.clone(), w))),
                    Err(e) => failures.push(FileFailure {
                        path: shown.clone(),
                        code: FailureCode::IoError,
                        message: format!("{}: {e}", target.display()),
                    }),
                }
            }
            Err(f) => failures.push(f),
        }
    }
    Ok((
        RunReport::new(pairs.len(), failures, started.elapsed()),
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_conllu, serialize_conllu};

    const PRED: &str = "# global.Entity = eid-etype-head-other\n# newdoc id = d\n# sent_id = d-s1\n\
        1\tكتب\t_\tVERB\tPV\t_\t0\troot\t_\tEntity=(e1\n\
        1.1\t_\t_\t_\t_\t_\t_\t_\t_\tEntity=(e2)\n\
        2\tالرسالة\t_\tNOUN\tNN\t_\t1\tobj\t_\tEntity=e1)\n\n";

    fn strip_entities(text: &str) -> String {
        let mut out = String::new();
        for line in text.lines() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() == 10 {
                if cols[0].contains('.') {
                    continue;
                }
                let misc = if cols[9].starts_with("Entity=") { "SpaceAfter=No" } else { cols[9] };
                out.push_str(&[&cols[..9], &[misc]].concat().join("\t"));
            } else {
                out.push_str(line);
            }
            out.push('\n');
        }
        out
    }

    #[test]
    fn copies_empty_node_and_keeps_base_columns() {
        let base = strip_entities(PRED);
        let (text, warnings) = merge_corpus(&base, PRED, &MergePolicy::default()).unwrap();
        assert!(warnings.is_empty());
        let merged = parse_conllu(&text).unwrap();
        let b = parse_conllu(&base).unwrap();
        assert_eq!(merged.mention_count(), 2);
        assert!(merged.sentences[0].contains(NodeId::new(1, 1).unwrap()));
        for (m, b) in merged.sentences[0]
            .tokens
            .iter()
            .filter(|t| !t.id.is_empty_node())
            .zip(&b.sentences[0].tokens)
        {
            assert_eq!(m, b);
        }
    }

    #[test]
    fn identity_merge() {
        let pred = parse_conllu(PRED).unwrap();
        let (merged, warnings) = merge_predictions(&pred, &pred, &MergePolicy::default()).unwrap();
        assert_eq!(merged, pred);
        assert_eq!(warnings.len(), 1, "base entities are reported as replaced");
        assert_eq!(serialize_conllu(&merged).unwrap(), PRED);
    }

    #[test]
    fn without_empty_nodes_zero_mentions_drop() {
        let base = strip_entities(PRED);
        let policy = MergePolicy {
            copy_empty_nodes: false,
            ..Default::default()
        };
        let (text, warnings) = merge_corpus(&base, PRED, &policy).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(matches!(warnings[0], MergeWarning::MentionDropped { .. }));
        assert_eq!(parse_conllu(&text).unwrap().mention_count(), 1);
    }

    #[test]
    fn existing_base_empty_node_is_reused() {
        let with_node = PRED.replace("Entity=(e2)", "_");
        let base = with_node
            .lines()
            .map(|l| l.replace("Entity=(e1", "_").replace("Entity=e1)", "_"))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        let (text, _) = merge_corpus(&base, PRED, &MergePolicy::default()).unwrap();
        let merged = parse_conllu(&text).unwrap();
        assert_eq!(merged.sentences[0].tokens.len(), 3);
    }

    #[test]
    fn mismatch_position() {
        let base = "1\tفي\t_\t_\t_\t_\t_\t_\t_\t_\n\n1\ta\t_\t_\t_\t_\t_\t_\t_\t_\n2\tb\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    3\tc\t_\t_\t_\t_\t_\t_\t_\t_\n4\tعلى\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        let pred = base.replace("على", "علي");
        let err = merge_corpus(base, &pred, &MergePolicy::default()).unwrap_err();
        assert_eq!(
            err,
            MergeError::TokenMismatch {
                sentence: 2,
                token: 4,
                base: Some("على".into()),
                predicted: Some("علي".into()),
            }
        );
        assert!(err.to_string().contains("(s2, t4)"));

        let short = base.replace("4\tعلى\t_\t_\t_\t_\t_\t_\t_\t_\n", "");
        let err = merge_corpus(base, &short, &MergePolicy::default()).unwrap_err();
        assert!(matches!(err, MergeError::TokenMismatch { token: 4, predicted: None, .. }));

        let one = "1\tفي\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        assert_eq!(
            merge_corpus(base, one, &MergePolicy::default()).unwrap_err(),
            MergeError::SentenceCountMismatch { base: 2, predicted: 1 }
        );
    }

    #[test]
    fn directory_merge_policies() {
        let dir = tempfile::tempdir().unwrap();
        let (b, p) = (dir.path().join("base"), dir.path().join("pred"));
        fs::create_dir_all(&b).unwrap();
        fs::create_dir_all(&p).unwrap();
        let base = strip_entities(PRED);
        fs::write(b.join("good.conllu"), &base).unwrap();
        fs::write(p.join("good.conllu"), PRED).unwrap();
        fs::write(b.join("odd.conllu"), &base).unwrap();
        fs::write(p.join("odd.conllu"), PRED.replace("الرسالة", "رسالة")).unwrap();

        let out = dir.path().join("abort");
        let err = run_merge(&b, &p, &out, &MergePolicy::default(), None).unwrap_err();
        assert!(matches!(err, PipelineError::Aborted { .. }));
        assert!(!out.exists());

        let skip = MergePolicy {
            on_token_mismatch: MismatchPolicy::SkipFile,
            ..Default::default()
        };
        let out = dir.path().join("skip");
        let (report, _) = run_merge(&b, &p, &out, &skip, Some(2)).unwrap();
        assert_eq!(report.files_ok, 1);
        assert_eq!(report.failures[0].code, FailureCode::TokenMismatch);
        assert_eq!(report.failures[0].path, "odd.conllu");
        assert!(out.join("good.conllu").exists());
        assert!(!out.join("odd.conllu").exists());
    }
}
