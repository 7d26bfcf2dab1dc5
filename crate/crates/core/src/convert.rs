//! OntoNotes-to-CorefUD conversion.
//!
//! Three stages run in a fixed order, each taking the previous partial
//! result:
//!
//! 1. [`convert_ident_chains`]: every IDENT span becomes a mention; spans
//!    sharing a COREF ID share a cluster.
//! 2. [`convert_appositives`]: each APPOS construction yields a `span`
//!    mention, a `head` mention and one `attrib` mention per attribute.
//! 3. [`insert_zeros`]: traces become empty nodes; spans made only of
//!    traces become mentions over those nodes.
//!
//! Mention spans count surface tokens only. An empty node inserted between
//! two surface tokens of a mention lies inside the mention's node range.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ApposRole, ClusterId, Document, MentionId, ModelError, NodeId, Sentence, Span, Token};
use crate::ontonotes::{AlignedDocument, AlignedSentence, CorefType, OntoSpan, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApposLinking {
    /// Appositive mentions join the IDENT chain whose mention matches the
    /// HEAD span; otherwise they form a fresh cluster.
    #[default]
    MergeIntoHeadChain,
    /// Every construction forms its own cluster.
    SeparateCluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionConfig {
    /// Insert empty nodes for traces outside every coreference span.
    pub include_non_coref_zeros: bool,
    pub appos_linking: ApposLinking,
    /// Skip documents without any coreference span in batch runs.
    pub omit_unannotated_docs: bool,
    /// Master switch for empty-node insertion. Off reproduces surface-only
    /// output; trace-only spans are then dropped with a warning.
    pub zero_insertion: bool,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        ConversionConfig {
            include_non_coref_zeros: false,
            appos_linking: ApposLinking::MergeIntoHeadChain,
            omit_unannotated_docs: true,
            zero_insertion: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("sentence {sentence}: APPOS construction over leaves {start}..={end} has no HEAD")]
    MissingHead {
        sentence: usize,
        start: usize,
        end: usize,
    },
    #[error("sentence {sentence}: APPOS construction over leaves {start}..={end} has {count} HEADs")]
    MultipleHeads {
        sentence: usize,
        start: usize,
        end: usize,
        count: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Something the converter adjusted instead of failing. Every warning
/// accounts for exactly one source span that did not yield a new mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConversionWarning {
    /// The span covered only traces and no empty node was inserted for them.
    SpanBecomesEmpty {
        sentence: usize,
        leaves: (usize, usize),
        label: String,
    },
    /// An appositive part coincided with an existing mention of the same
    /// cluster, which now carries the appositive role.
    MergedIntoExisting {
        sentence: usize,
        span: Span,
        role: ApposRole,
    },
    /// The mention already existed in the cluster with a role; dropped.
    Duplicate {
        sentence: usize,
        span: Span,
        label: String,
    },
}

impl fmt::Display for ConversionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConversionWarning::SpanBecomesEmpty {
                sentence,
                leaves,
                label,
            } => write!(
                f,
                "sentence {sentence}: {label} span over leaves {}..={} covers only traces; dropped",
                leaves.0, leaves.1
            ),
            ConversionWarning::MergedIntoExisting {
                sentence,
                span,
                role,
            } => write!(
                f,
                "sentence {sentence}: appositive {} {span} merged into an existing mention",
                role.as_str()
            ),
            ConversionWarning::Duplicate {
                sentence,
                span,
                label,
            } => write!(f, "sentence {sentence}: duplicate {label} mention {span} dropped"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversionReport {
    pub mentions_emitted: usize,
    pub clusters_emitted: usize,
    pub zeros_inserted: usize,
    pub zeros_skipped: usize,
    pub appos_constructions: usize,
    /// IDENT spans in the input.
    pub ident_spans: usize,
    /// Appositive parts in the input: the construction, its HEAD and each
    /// ATTRIB.
    pub appos_parts: usize,
    pub warnings: Vec<ConversionWarning>,
}

impl ConversionReport {
    /// Source spans that did not become new mentions.
    pub fn adjustments(&self) -> usize {
        self.warnings.len()
    }

    /// Recounts `doc` and checks the report's accounting identities.
    pub fn reconcile(&self, doc: &Document, source: &AlignedDocument) -> Result<(), String> {
        let empty_nodes = doc
            .sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.id.is_empty_node())
            .count();
        let checks = [
            (
                self.mentions_emitted == doc.mention_count(),
                format!(
                    "mentions_emitted {} but document has {}",
                    self.mentions_emitted,
                    doc.mention_count()
                ),
            ),
            (
                self.clusters_emitted == doc.cluster_count(),
                format!(
                    "clusters_emitted {} but document has {}",
                    self.clusters_emitted,
                    doc.cluster_count()
                ),
            ),
            (
                self.mentions_emitted + self.adjustments() == self.ident_spans + self.appos_parts,
                format!(
                    "{} mentions + {} adjustments != {} IDENT spans + {} appositive parts",
                    self.mentions_emitted,
                    self.adjustments(),
                    self.ident_spans,
                    self.appos_parts
                ),
            ),
            (
                self.zeros_inserted + self.zeros_skipped == source.trace_count(),
                format!(
                    "{} zeros inserted + {} skipped != {} traces",
                    self.zeros_inserted,
                    self.zeros_skipped,
                    source.trace_count()
                ),
            ),
            (
                self.zeros_inserted == empty_nodes,
                format!(
                    "zeros_inserted {} but document has {empty_nodes} empty nodes",
                    self.zeros_inserted
                ),
            ),
            (
                self.mentions_emitted >= self.clusters_emitted,
                "fewer mentions than clusters".to_string(),
            ),
        ];
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(msg),
            None => Ok(()),
        }
    }
}

/// A span with no surface token, waiting for zero insertion.
#[derive(Debug, Clone)]
struct Deferred {
    sentence: usize,
    leaves: (usize, usize),
    cluster: ClusterId,
    role: Option<ApposRole>,
}

/// State threaded through the conversion stages.
#[derive(Debug, Clone)]
pub struct PartialConversion {
    pub doc: Document,
    pub report: ConversionReport,
    chains: HashMap<String, ClusterId>,
    ident_clusters: HashSet<ClusterId>,
    next_cluster: u32,
    deferred: Vec<Deferred>,
}

impl PartialConversion {
    fn fresh_cluster(&mut self) -> ClusterId {
        self.next_cluster += 1;
        ClusterId::new(self.next_cluster).expect("cluster numbers start at 1")
    }

    fn chain_cluster(&mut self, coref_id: &str) -> ClusterId {
        if let Some(c) = self.chains.get(coref_id) {
            return *c;
        }
        let c = self.fresh_cluster();
        self.chains.insert(coref_id.to_string(), c);
        self.ident_clusters.insert(c);
        c
    }

    /// Adds a mention unless the cluster already has one over `span`.
    fn add(
        &mut self,
        sentence: usize,
        span: Span,
        cluster: ClusterId,
        role: Option<ApposRole>,
    ) -> Result<(), ConvertError> {
        match self.doc.find_mention(cluster, sentence, span) {
            None => {
                self.doc.insert_mention(cluster, sentence, span, None, role)?;
            }
            Some(existing) => {
                let current = self.doc.mention(existing).and_then(|m| m.appos);
                match (current, role) {
                    (None, Some(role)) => {
                        self.doc.set_appos_role(existing, Some(role))?;
                        self.report.warnings.push(ConversionWarning::MergedIntoExisting {
                            sentence,
                            span,
                            role,
                        });
                    }
                    _ => self.report.warnings.push(ConversionWarning::Duplicate {
                        sentence,
                        span,
                        label: role_label(role).to_string(),
                    }),
                }
            }
        }
        Ok(())
    }

    /// Adds the mention for a source span now, or defers it when the span
    /// has no surface token.
    fn add_or_defer(
        &mut self,
        aligned: &AlignedSentence,
        sentence: usize,
        leaves: (usize, usize),
        cluster: ClusterId,
        role: Option<ApposRole>,
    ) -> Result<(), ConvertError> {
        match surface_span(aligned, leaves) {
            Some(span) => self.add(sentence, span, cluster, role),
            None => {
                self.deferred.push(Deferred {
                    sentence,
                    leaves,
                    cluster,
                    role,
                });
                Ok(())
            }
        }
    }

    /// Cluster of an IDENT mention with exactly this source extent, if any.
    fn ident_cluster_at(
        &self,
        aligned: &AlignedSentence,
        sentence: usize,
        leaves: (usize, usize),
    ) -> Option<ClusterId> {
        match surface_span(aligned, leaves) {
            Some(span) => self
                .doc
                .sentence_mentions(sentence)
                .into_iter()
                .filter(|m| m.span == span && self.ident_clusters.contains(&m.cluster))
                .map(|m| m.cluster)
                .min(),
            None => self
                .deferred
                .iter()
                .filter(|d| {
                    d.sentence == sentence
                        && d.leaves == leaves
                        && d.role.is_none()
                        && self.ident_clusters.contains(&d.cluster)
                })
                .map(|d| d.cluster)
                .min(),
        }
    }
}

fn role_label(role: Option<ApposRole>) -> &'static str {
    match role {
        None => "IDENT",
        Some(ApposRole::Span) => "APPOS",
        Some(ApposRole::Head) => "HEAD",
        Some(ApposRole::Attrib) => "ATTRIB",
    }
}

/// Surface token number (1-based) of every leaf; `None` for traces.
fn surface_numbers(aligned: &AlignedSentence) -> Vec<Option<u32>> {
    let mut n = 0;
    aligned
        .leaves
        .iter()
        .map(|l| {
            if l.is_trace() {
                None
            } else {
                n += 1;
                Some(n)
            }
        })
        .collect()
}

/// Node range over the surface tokens of `leaves`, traces excluded.
fn surface_span(aligned: &AlignedSentence, leaves: (usize, usize)) -> Option<Span> {
    let numbers = surface_numbers(aligned);
    let inside = &numbers[leaves.0..=leaves.1];
    let first = inside.iter().flatten().next()?;
    let last = inside.iter().flatten().next_back()?;
    Some(Span::new(NodeId::surface(*first), NodeId::surface(*last)))
}

fn is_plain_ident(span: &OntoSpan) -> bool {
    span.coref_type == CorefType::Ident && span.subtype.is_none()
}

/// Stage 1: sentences with surface tokens and one mention per IDENT span.
pub fn convert_ident_chains(aligned: &AlignedDocument) -> Result<PartialConversion, ConvertError> {
    let mut doc = Document::new(aligned.doc_id.clone());
    for (k, s) in aligned.sentences.iter().enumerate() {
        let mut sentence = Sentence::new(format!("{}-s{}", aligned.doc_id, k + 1));
        let mut text = Vec::new();
        for leaf in s.leaves.iter().filter(|l| !l.is_trace()) {
            let mut token = Token::bare(NodeId::surface(1), leaf.form.clone());
            token.xpos = leaf.pos.clone();
            sentence.push_surface(token);
            text.push(leaf.form.as_str());
        }
        sentence.comments.push(format!("# text = {}", text.join(" ")));
        doc.sentences.push(sentence);
    }

    let mut state = PartialConversion {
        doc,
        report: ConversionReport::default(),
        chains: HashMap::new(),
        ident_clusters: HashSet::new(),
        next_cluster: 0,
        deferred: Vec::new(),
    };
    for (k, s) in aligned.sentences.iter().enumerate() {
        for span in s.all_spans().into_iter().filter(|sp| is_plain_ident(sp)) {
            state.report.ident_spans += 1;
            let cluster = state.chain_cluster(&span.coref_id);
            state.add_or_defer(s, k, span.leaves, cluster, None)?;
        }
    }
    Ok(state)
}

/// Stage 2: appositive constructions.
pub fn convert_appositives(
    aligned: &AlignedDocument,
    mut state: PartialConversion,
    config: &ConversionConfig,
) -> Result<PartialConversion, ConvertError> {
    for (k, s) in aligned.sentences.iter().enumerate() {
        for construction in s
            .all_spans()
            .into_iter()
            .filter(|sp| sp.is_appos_construction())
        {
            let (start, end) = construction.leaves;
            let heads: Vec<&OntoSpan> = construction
                .children
                .iter()
                .filter(|c| c.subtype == Some(Subtype::Head))
                .collect();
            let attribs: Vec<&OntoSpan> = construction
                .children
                .iter()
                .filter(|c| c.subtype == Some(Subtype::Attrib))
                .collect();
            let head = match heads.as_slice() {
                [head] => *head,
                [] => {
                    return Err(ConvertError::MissingHead {
                        sentence: k,
                        start,
                        end,
                    })
                }
                _ => {
                    return Err(ConvertError::MultipleHeads {
                        sentence: k,
                        start,
                        end,
                        count: heads.len(),
                    })
                }
            };
            state.report.appos_constructions += 1;
            state.report.appos_parts += 2 + attribs.len();

            let linked = match config.appos_linking {
                ApposLinking::MergeIntoHeadChain => state.ident_cluster_at(s, k, head.leaves),
                ApposLinking::SeparateCluster => None,
            };
            let cluster = match linked {
                Some(c) => c,
                None => state.fresh_cluster(),
            };
            state.add_or_defer(s, k, construction.leaves, cluster, Some(ApposRole::Span))?;
            state.add_or_defer(s, k, head.leaves, cluster, Some(ApposRole::Head))?;
            for attrib in attribs {
                state.add_or_defer(s, k, attrib.leaves, cluster, Some(ApposRole::Attrib))?;
            }
        }
    }
    Ok(state)
}

/// Stage 3: empty nodes for traces, and mentions for trace-only spans.
pub fn insert_zeros(
    aligned: &AlignedDocument,
    mut state: PartialConversion,
    config: &ConversionConfig,
) -> Result<PartialConversion, ConvertError> {
    let mut nodes: Vec<Vec<Option<NodeId>>> = Vec::with_capacity(aligned.sentences.len());
    for (k, s) in aligned.sentences.iter().enumerate() {
        let spans = s.all_spans();
        let numbers = surface_numbers(s);
        let mut sentence_nodes = Vec::with_capacity(s.leaves.len());
        let mut preceding = 0u32;
        for (i, leaf) in s.leaves.iter().enumerate() {
            if let Some(n) = numbers[i] {
                preceding = n;
                sentence_nodes.push(Some(NodeId::surface(n)));
                continue;
            }
            let covered = spans.iter().any(|sp| sp.leaves.0 <= i && i <= sp.leaves.1);
            if config.zero_insertion && (covered || config.include_non_coref_zeros) {
                let mut token = Token::bare(NodeId::surface(1), "_");
                token.misc = format!("TraceForm={}", leaf.form);
                let id = state.doc.sentences[k].insert_empty(preceding, token);
                state.report.zeros_inserted += 1;
                sentence_nodes.push(Some(id));
            } else {
                state.report.zeros_skipped += 1;
                sentence_nodes.push(None);
            }
        }
        nodes.push(sentence_nodes);
    }

    for d in std::mem::take(&mut state.deferred) {
        let inside = &nodes[d.sentence][d.leaves.0..=d.leaves.1];
        let first = inside.iter().flatten().next();
        let last = inside.iter().flatten().next_back();
        match first.zip(last) {
            Some((first, last)) => state.add(d.sentence, Span::new(*first, *last), d.cluster, d.role)?,
            None => state.report.warnings.push(ConversionWarning::SpanBecomesEmpty {
                sentence: d.sentence,
                leaves: d.leaves,
                label: role_label(d.role).to_string(),
            }),
        }
    }
    Ok(state)
}

/// Runs all stages, sets every head to the last node of its span and
/// renumbers clusters by first appearance.
pub fn convert(
    aligned: &AlignedDocument,
    config: &ConversionConfig,
) -> Result<(Document, ConversionReport), ConvertError> {
    let state = convert_ident_chains(aligned)?;
    let state = convert_appositives(aligned, state, config)?;
    let PartialConversion {
        mut doc,
        mut report,
        ..
    } = insert_zeros(aligned, state, config)?;

    let spans: Vec<(MentionId, usize, Span)> =
        doc.mentions().map(|m| (m.id, m.sentence, m.span)).collect();
    for (id, sentence, span) in spans {
        let len = doc.span_len(sentence, span)?;
        doc.set_head(id, len as u32)?;
    }
    let doc = doc.normalize_ids();
    report.mentions_emitted = doc.mention_count();
    report.clusters_emitted = doc.cluster_count();
    Ok((doc, report))
}
