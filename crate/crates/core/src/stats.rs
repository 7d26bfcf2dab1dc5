//! Corpus statistics and scheme validation.
//!
//! Token counts are over surface tokens; empty nodes are counted on their
//! own. A token "part of an entity" is counted once however many mentions
//! cover it.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::model::{nesting_relation, ApposRole, Document, Mention, MentionId, Nesting};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub head: u64,
    pub attrib: u64,
    pub span: u64,
}

impl LabelCounts {
    fn bump(&mut self, role: ApposRole, by: u64) {
        match role {
            ApposRole::Head => self.head += by,
            ApposRole::Attrib => self.attrib += by,
            ApposRole::Span => self.span += by,
        }
    }
}

impl Add for LabelCounts {
    type Output = LabelCounts;

    fn add(self, o: LabelCounts) -> LabelCounts {
        LabelCounts {
            head: self.head + o.head,
            attrib: self.attrib + o.attrib,
            span: self.span + o.span,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: u64,
    pub total_sentences: u64,
    pub total_tokens: u64,
    pub total_empty_nodes: u64,
    pub total_mentions: u64,
    pub total_clusters: u64,
    /// Surface tokens covered by at least one mention.
    pub tokens_in_entity: u64,
    /// Mentions covering exactly one surface token.
    pub single_token_mentions: u64,
    /// Surface tokens covered by at least two mentions.
    pub nested_tokens: u64,
    /// Mentions strictly inside another mention of the same sentence.
    pub nested_mentions: u64,
    /// Distinct surface tokens covered by mentions of each appositive role.
    pub label_tokens: LabelCounts,
    pub label_mentions: LabelCounts,
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, o: CorpusStats) -> CorpusStats {
        CorpusStats {
            documents: self.documents + o.documents,
            total_sentences: self.total_sentences + o.total_sentences,
            total_tokens: self.total_tokens + o.total_tokens,
            total_empty_nodes: self.total_empty_nodes + o.total_empty_nodes,
            total_mentions: self.total_mentions + o.total_mentions,
            total_clusters: self.total_clusters + o.total_clusters,
            tokens_in_entity: self.tokens_in_entity + o.tokens_in_entity,
            single_token_mentions: self.single_token_mentions + o.single_token_mentions,
            nested_tokens: self.nested_tokens + o.nested_tokens,
            nested_mentions: self.nested_mentions + o.nested_mentions,
            label_tokens: self.label_tokens + o.label_tokens,
            label_mentions: self.label_mentions + o.label_mentions,
        }
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, o: CorpusStats) {
        *self = *self + o;
    }
}

impl std::iter::Sum for CorpusStats {
    fn sum<I: Iterator<Item = CorpusStats>>(iter: I) -> CorpusStats {
        iter.fold(CorpusStats::default(), Add::add)
    }
}

pub fn compute_stats<'a>(docs: impl IntoIterator<Item = &'a Document>) -> CorpusStats {
    docs.into_iter().map(document_stats).sum()
}

pub fn document_stats(doc: &Document) -> CorpusStats {
    let mut st = CorpusStats {
        documents: 1,
        total_sentences: doc.sentences.len() as u64,
        total_mentions: doc.mention_count() as u64,
        total_clusters: doc.cluster_count() as u64,
        ..Default::default()
    };
    for (index, sentence) in doc.sentences.iter().enumerate() {
        let surface = sentence.surface_len();
        st.total_tokens += surface as u64;
        st.total_empty_nodes += (sentence.tokens.len() - surface) as u64;

        let mentions = doc.sentence_mentions(index);
        let mut coverage = vec![0u32; sentence.tokens.len()];
        let mut by_role: [Vec<bool>; 3] = std::array::from_fn(|_| vec![false; sentence.tokens.len()]);
        for m in &mentions {
            let (Some(start), Some(end)) =
                (sentence.position(m.span.start), sentence.position(m.span.end))
            else {
                continue;
            };
            let mut surface_len = 0;
            for pos in start..=end {
                coverage[pos] += 1;
                if let Some(role) = m.appos {
                    by_role[role_index(role)][pos] = true;
                }
                if !sentence.tokens[pos].id.is_empty_node() {
                    surface_len += 1;
                }
            }
            if surface_len == 1 {
                st.single_token_mentions += 1;
            }
            if let Some(role) = m.appos {
                st.label_mentions.bump(role, 1);
            }
            if mentions.iter().any(|o| nesting_relation(m, o) == Nesting::AInsideB) {
                st.nested_mentions += 1;
            }
        }
        for (pos, token) in sentence.tokens.iter().enumerate() {
            if token.id.is_empty_node() {
                continue;
            }
            if coverage[pos] >= 1 {
                st.tokens_in_entity += 1;
            }
            if coverage[pos] >= 2 {
                st.nested_tokens += 1;
            }
            for role in [ApposRole::Head, ApposRole::Attrib, ApposRole::Span] {
                if by_role[role_index(role)][pos] {
                    st.label_tokens.bump(role, 1);
                }
            }
        }
    }
    st
}

fn role_index(role: ApposRole) -> usize {
    match role {
        ApposRole::Head => 0,
        ApposRole::Attrib => 1,
        ApposRole::Span => 2,
    }
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Two aligned tables: entity coverage, then appositive labels.
pub fn render_stats_table(st: &CorpusStats) -> String {
    let mut out = String::new();
    let row = |out: &mut String, label: &str, tokens: String, sentences: &str| {
        writeln!(out, "{label:<21}{tokens:>13}{sentences:>16}").unwrap();
    };
    row(&mut out, "", "# of tokens".into(), "# of sentences");
    row(
        &mut out,
        "Total",
        thousands(st.total_tokens),
        &thousands(st.total_sentences),
    );
    row(&mut out, "Part of an entity", thousands(st.tokens_in_entity), "-");
    row(
        &mut out,
        "Single token entity",
        thousands(st.single_token_mentions),
        "-",
    );
    row(&mut out, "Nested entity", thousands(st.nested_tokens), "-");
    out.push('\n');
    let label_row = |out: &mut String, label: &str, tokens: u64, mentions: u64| {
        writeln!(
            out,
            "{label:<21}{:>13}{:>16}",
            thousands(tokens),
            thousands(mentions)
        )
        .unwrap();
    };
    writeln!(out, "{:<21}{:>13}{:>16}", "", "# of tokens", "# of mentions").unwrap();
    label_row(&mut out, "HEAD", st.label_tokens.head, st.label_mentions.head);
    label_row(&mut out, "ATTRIB", st.label_tokens.attrib, st.label_mentions.attrib);
    label_row(&mut out, "APPOS", st.label_tokens.span, st.label_mentions.span);
    out.push('\n');
    writeln!(
        out,
        "documents {}, mentions {}, clusters {}, empty nodes {}, nested mentions {}",
        thousands(st.documents),
        thousands(st.total_mentions),
        thousands(st.total_clusters),
        thousands(st.total_empty_nodes),
        thousands(st.nested_mentions)
    )
    .unwrap();
    out.push_str(
        "note: entity and nested token counts count each surface token once, \
         however many mentions cover it; empty nodes are excluded from token totals\n",
    );
    out
}

/// Key-sorted JSON.
pub fn render_stats_json(st: &CorpusStats) -> String {
    let value = serde_json::to_value(st).expect("stats serialize");
    serde_json::to_string_pretty(&value).expect("stats serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    MultiClusterMention,
    DanglingClusterRef,
    CrossSentenceSpan,
    CrossingMentions,
    EmptyCluster,
    NonCanonicalIds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub doc_id: String,
    pub sent_id: Option<String>,
    /// Mention, cluster or node id.
    pub item: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: Location,
    pub detail: String,
}

/// Checks the scheme invariants; an empty result means the document is
/// valid.
pub fn validate(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let at = |sentence: Option<usize>, item: String| Location {
        doc_id: doc.doc_id.clone(),
        sent_id: sentence.and_then(|i| doc.sentences.get(i)).map(|s| s.sent_id.clone()),
        item: Some(item),
    };

    // membership: which clusters list each mention
    let mut listed: HashMap<MentionId, Vec<String>> = HashMap::new();
    for c in doc.clusters() {
        if c.mentions.is_empty() {
            out.push(Violation {
                code: ViolationCode::EmptyCluster,
                location: at(None, c.id.to_string()),
                detail: format!("cluster {} has no mentions", c.id),
            });
        }
        let mut seen = HashSet::new();
        for id in &c.mentions {
            if !seen.insert(*id) {
                out.push(Violation {
                    code: ViolationCode::DanglingClusterRef,
                    location: at(None, c.id.to_string()),
                    detail: format!("cluster {} lists {id} twice", c.id),
                });
                continue;
            }
            listed.entry(*id).or_default().push(c.id.to_string());
            match doc.mention(*id) {
                None => out.push(Violation {
                    code: ViolationCode::DanglingClusterRef,
                    location: at(None, c.id.to_string()),
                    detail: format!("cluster {} lists unknown mention {id}", c.id),
                }),
                Some(m) if m.cluster != c.id => out.push(Violation {
                    code: ViolationCode::DanglingClusterRef,
                    location: at(Some(m.sentence), id.to_string()),
                    detail: format!("{id} is listed by {} but belongs to {}", c.id, m.cluster),
                }),
                Some(_) => {}
            }
        }
    }
    let mut multi: Vec<(&MentionId, &Vec<String>)> =
        listed.iter().filter(|(_, cs)| cs.len() > 1).collect();
    multi.sort();
    for (id, clusters) in multi {
        let sentence = doc.mention(*id).map(|m| m.sentence);
        out.push(Violation {
            code: ViolationCode::MultiClusterMention,
            location: at(sentence, id.to_string()),
            detail: format!("{id} is a member of {}", clusters.join(", ")),
        });
    }

    for m in doc.mentions() {
        match doc.cluster(m.cluster) {
            None => out.push(Violation {
                code: ViolationCode::DanglingClusterRef,
                location: at(Some(m.sentence), m.id.to_string()),
                detail: format!("{} refers to missing cluster {}", m.id, m.cluster),
            }),
            Some(c) if !c.mentions.contains(&m.id) => out.push(Violation {
                code: ViolationCode::DanglingClusterRef,
                location: at(Some(m.sentence), m.id.to_string()),
                detail: format!("{} is not listed by its cluster {}", m.id, m.cluster),
            }),
            Some(_) => {}
        }
        let fits = doc
            .sentences
            .get(m.sentence)
            .and_then(|s| s.span_tokens(m.span))
            .is_some();
        if !fits {
            out.push(Violation {
                code: ViolationCode::CrossSentenceSpan,
                location: at(Some(m.sentence), m.id.to_string()),
                detail: format!(
                    "{} span {} does not lie inside sentence {}",
                    m.id, m.span, m.sentence
                ),
            });
        }
    }

    for index in 0..doc.sentences.len() {
        let ms: Vec<&Mention> = doc.sentence_mentions(index);
        for (i, a) in ms.iter().enumerate() {
            for b in &ms[i + 1..] {
                if nesting_relation(a, b) == Nesting::Crossing {
                    out.push(Violation {
                        code: ViolationCode::CrossingMentions,
                        location: at(Some(index), a.id.to_string()),
                        detail: format!("{} {} crosses {} {}", a.id, a.span, b.id, b.span),
                    });
                }
            }
        }
    }

    let numbers: Vec<u32> = doc.clusters().map(|c| c.id.number()).collect();
    if numbers.iter().enumerate().any(|(i, n)| *n != i as u32 + 1) {
        let ids: Vec<String> = doc.clusters().map(|c| c.id.to_string()).collect();
        out.push(Violation {
            code: ViolationCode::NonCanonicalIds,
            location: Location {
                doc_id: doc.doc_id.clone(),
                sent_id: None,
                item: None,
            },
            detail: format!("cluster ids are not e1..e{}: {}", ids.len(), ids.join(" ")),
        });
    }
    out
}
