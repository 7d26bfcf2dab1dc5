//! OntoNotes-style input: the coreference layer, the treebank layer, and
//! their alignment into per-sentence leaf sequences.
//!
//! Coreference token positions index the trace-inclusive leaf sequence of
//! the treebank, so every `-NONE-` leaf has a matching token in the
//! coreference text.

pub mod coref;
pub mod ptb;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use coref::{parse_onto_coref, CorefError, CorefType, OntoCorefDoc, OntoSpan, Subtype};
pub use ptb::{parse_ptb, Leaf, PtbError, PtbTree, TRACE_POS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("treebank has {leaves} leaves but the coreference text has {tokens} tokens")]
    LengthMismatch { leaves: usize, tokens: usize },
    #[error("leaf {position}: treebank has `{leaf}`, coreference text has `{token}`")]
    FormMismatch {
        position: usize,
        leaf: String,
        token: String,
    },
    #[error("span over leaves {start}..={end} straddles a sentence boundary")]
    SpanStraddlesSentences { start: usize, end: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSentence {
    pub leaves: Vec<Leaf>,
    /// Top-level spans with leaf ranges relative to this sentence.
    pub spans: Vec<OntoSpan>,
}

impl AlignedSentence {
    pub fn all_spans(&self) -> Vec<&OntoSpan> {
        self.spans.iter().flat_map(OntoSpan::walk).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignedDocument {
    pub doc_id: String,
    pub sentences: Vec<AlignedSentence>,
}

impl AlignedDocument {
    pub fn has_coreference(&self) -> bool {
        self.sentences.iter().any(|s| !s.spans.is_empty())
    }

    pub fn trace_count(&self) -> usize {
        self.sentences
            .iter()
            .flat_map(|s| &s.leaves)
            .filter(|l| l.is_trace())
            .count()
    }
}

/// Joins the coreference layer to the treebank; sentence boundaries come
/// from the trees.
pub fn align(coref: &OntoCorefDoc, trees: &[PtbTree]) -> Result<AlignedDocument, AlignError> {
    let per_tree: Vec<Vec<Leaf>> = trees.iter().map(PtbTree::leaves).collect();
    let total: usize = per_tree.iter().map(Vec::len).sum();
    if total != coref.tokens.len() {
        return Err(AlignError::LengthMismatch {
            leaves: total,
            tokens: coref.tokens.len(),
        });
    }
    for (position, (leaf, token)) in per_tree.iter().flatten().zip(&coref.tokens).enumerate() {
        if !leaf.is_trace() && leaf.form != *token {
            return Err(AlignError::FormMismatch {
                position,
                leaf: leaf.form.clone(),
                token: token.clone(),
            });
        }
    }

    // sentence k covers global leaves [offsets[k], offsets[k] + len)
    let mut offsets = Vec::with_capacity(per_tree.len());
    let mut acc = 0;
    for leaves in &per_tree {
        offsets.push(acc);
        acc += leaves.len();
    }
    let mut sentences: Vec<AlignedSentence> = per_tree
        .into_iter()
        .map(|leaves| AlignedSentence {
            leaves,
            spans: Vec::new(),
        })
        .collect();
    for span in &coref.spans {
        let (start, end) = span.leaves;
        let k = offsets.partition_point(|&o| o <= start) - 1;
        let sentence_end = offsets[k] + sentences[k].leaves.len();
        if end >= sentence_end {
            return Err(AlignError::SpanStraddlesSentences { start, end });
        }
        sentences[k].spans.push(span.shifted(offsets[k]));
    }
    Ok(AlignedDocument {
        doc_id: coref.doc_id.clone(),
        sentences,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub coref: PathBuf,
    pub parse: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("manifest line {line}: {reason}")]
pub struct ManifestError {
    pub line: usize,
    pub reason: String,
}

/// Reads `coref_path<TAB>parse_path` lines. Relative paths resolve against
/// `base`; `#` starts a comment line.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [coref, parse] if !coref.trim().is_empty() && !parse.trim().is_empty() => {
                entries.push(ManifestEntry {
                    coref: base.join(coref.trim()),
                    parse: base.join(parse.trim()),
                });
            }
            _ => {
                return Err(ManifestError {
                    line: i + 1,
                    reason: "expected `coref_path<TAB>parse_path`".into(),
                })
            }
        }
    }
    Ok(entries)
}
