//! Document, mention and cluster model.
//!
//! A [`Document`] owns its sentences and a pair of maps (clusters and
//! mentions) that are kept mutually consistent by the mutating operations
//! in this module. Every mention belongs to exactly one cluster; a mention
//! span is an inclusive range of nodes inside a single sentence.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid node id `{0}`")]
    BadNodeId(String),
    #[error("invalid cluster id `{0}` (expected `e<k>` with k >= 1)")]
    BadClusterId(String),
    #[error("span {span} is not inside sentence {sentence}")]
    SpanOutOfRange { sentence: usize, span: Span },
    #[error("cluster {cluster} already has a mention over {span} in sentence {sentence}")]
    DuplicateMention {
        cluster: ClusterId,
        sentence: usize,
        span: Span,
    },
    #[error("head {head} outside span of length {len}")]
    BadHead { head: u32, len: usize },
    #[error("unknown mention {0}")]
    UnknownMention(MentionId),
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
}

/// Address of a node inside a sentence.
///
/// Surface tokens have `empty == 0`; empty nodes are numbered `k.j` with
/// `j >= 1`, placed after surface token `k` (`k == 0` for sentence-initial
/// empty nodes). The derived ordering is lexicographic, which is the
/// document order of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub token: u32,
    pub empty: u32,
}

impl NodeId {
    pub fn new(token: u32, empty: u32) -> Result<Self, ModelError> {
        if token == 0 && empty == 0 {
            return Err(ModelError::BadNodeId("0".into()));
        }
        Ok(NodeId { token, empty })
    }

    pub fn surface(token: u32) -> Self {
        assert!(token > 0, "surface token ids start at 1");
        NodeId { token, empty: 0 }
    }

    pub fn is_empty_node(self) -> bool {
        self.empty > 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty == 0 {
            write!(f, "{}", self.token)
        } else {
            write!(f, "{}.{}", self.token, self.empty)
        }
    }
}

impl FromStr for NodeId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadNodeId(s.to_string());
        let number = |part: &str| -> Result<u32, ModelError> {
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            if part.len() > 1 && part.starts_with('0') {
                return Err(bad());
            }
            part.parse().map_err(|_| bad())
        };
        match s.split_once('.') {
            None => NodeId::new(number(s)?, 0).map_err(|_| bad()),
            Some((token, empty)) => {
                let empty = number(empty)?;
                if empty == 0 {
                    return Err(bad());
                }
                NodeId::new(number(token)?, empty)
            }
        }
    }
}

/// Inclusive node range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: NodeId,
    pub end: NodeId,
}

impl Span {
    pub fn new(start: NodeId, end: NodeId) -> Self {
        Span { start, end }
    }

    pub fn single(node: NodeId) -> Self {
        Span {
            start: node,
            end: node,
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.start <= node && node <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Entity id of the shape `e<k>`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClusterId(u32);

impl ClusterId {
    pub fn new(number: u32) -> Result<Self, ModelError> {
        if number == 0 {
            return Err(ModelError::BadClusterId("e0".into()));
        }
        Ok(ClusterId(number))
    }

    pub fn number(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl FromStr for ClusterId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadClusterId(s.to_string());
        let digits = s.strip_prefix('e').ok_or_else(bad)?;
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || digits.starts_with('0')
        {
            return Err(bad());
        }
        ClusterId::new(digits.parse().map_err(|_| bad())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MentionId(u32);

impl MentionId {
    pub fn new(number: u32) -> Self {
        MentionId(number)
    }
}

impl fmt::Display for MentionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Part a mention plays in an appositive construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ApposRole {
    /// The whole construction.
    Span,
    /// The referent.
    Head,
    /// An attribute of the referent.
    Attrib,
}

impl ApposRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ApposRole::Span => "span",
            ApposRole::Head => "head",
            ApposRole::Attrib => "attrib",
        }
    }
}

/// One CoNLL-U node line. All columns are kept verbatim; `misc` never
/// holds the `Entity=` item, which is derived from the mentions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: NodeId,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: String,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token with every column except id and form set to `_`.
    pub fn bare(id: NodeId, form: impl Into<String>) -> Self {
        let blank = || "_".to_string();
        Token {
            id,
            form: form.into(),
            lemma: blank(),
            upos: blank(),
            xpos: blank(),
            feats: blank(),
            head: blank(),
            deprel: blank(),
            deps: blank(),
            misc: blank(),
        }
    }
}

/// A multiword token range line (`n-m`), passed through verbatim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordToken {
    pub first: u32,
    pub last: u32,
    /// The nine columns after the id, tab-joined.
    pub columns: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: String,
    /// Comment lines other than `sent_id`, `newdoc` and `global.Entity`,
    /// verbatim including the leading `#`.
    pub comments: Vec<String>,
    /// Surface tokens and empty nodes in node order.
    pub tokens: Vec<Token>,
    pub multiword_tokens: Vec<MultiwordToken>,
}

impl Sentence {
    pub fn new(sent_id: impl Into<String>) -> Self {
        Sentence {
            sent_id: sent_id.into(),
            ..Default::default()
        }
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.tokens.binary_search_by(|t| t.id.cmp(&node)).ok()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.position(node).is_some()
    }

    /// Nodes covered by `span`, or `None` if an endpoint is missing.
    pub fn span_tokens(&self, span: Span) -> Option<&[Token]> {
        let start = self.position(span.start)?;
        let end = self.position(span.end)?;
        if start > end {
            return None;
        }
        Some(&self.tokens[start..=end])
    }

    pub fn surface_len(&self) -> usize {
        self.tokens.iter().filter(|t| !t.id.is_empty_node()).count()
    }

    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(|t| !t.id.is_empty_node())
            .map(|t| t.form.as_str())
    }

    /// Appends a surface token numbered after the current last one.
    pub fn push_surface(&mut self, mut token: Token) -> NodeId {
        let id = NodeId::surface(self.surface_len() as u32 + 1);
        token.id = id;
        self.tokens.push(token);
        id
    }

    /// Inserts an empty node after surface token `anchor`, numbered one past
    /// the empty nodes already anchored there.
    pub fn insert_empty(&mut self, anchor: u32, mut token: Token) -> NodeId {
        let existing = self
            .tokens
            .iter()
            .filter(|t| t.id.token == anchor && t.id.is_empty_node())
            .count() as u32;
        let id = NodeId {
            token: anchor,
            empty: existing + 1,
        };
        token.id = id;
        let at = self.tokens.partition_point(|t| t.id < id);
        self.tokens.insert(at, token);
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub id: MentionId,
    pub cluster: ClusterId,
    pub sentence: usize,
    pub span: Span,
    /// 1-based position of the head node inside the span.
    pub head: u32,
    pub appos: Option<ApposRole>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityCluster {
    pub id: ClusterId,
    /// Entity type, `_` when unknown.
    pub etype: String,
    pub mentions: Vec<MentionId>,
}

/// Interval relation between two mention spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nesting {
    Disjoint,
    Equal,
    AInsideB,
    BInsideA,
    Crossing,
}

/// Classifies two mentions by inclusive interval algebra on node order.
/// Mentions in different sentences are disjoint.
pub fn nesting_relation(a: &Mention, b: &Mention) -> Nesting {
    if a.sentence != b.sentence {
        return Nesting::Disjoint;
    }
    span_relation(a.span, b.span)
}

pub fn span_relation(a: Span, b: Span) -> Nesting {
    if a.end < b.start || b.end < a.start {
        return Nesting::Disjoint;
    }
    match (a.start.cmp(&b.start), a.end.cmp(&b.end)) {
        (Ordering::Equal, Ordering::Equal) => Nesting::Equal,
        (Ordering::Greater | Ordering::Equal, Ordering::Less | Ordering::Equal) => {
            Nesting::AInsideB
        }
        (Ordering::Less | Ordering::Equal, Ordering::Greater | Ordering::Equal) => {
            Nesting::BInsideA
        }
        _ => Nesting::Crossing,
    }
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    clusters: BTreeMap<ClusterId, EntityCluster>,
    mentions: BTreeMap<MentionId, Mention>,
    next_mention: u32,
}

/// Mention identity used for structural comparison.
type MentionKey = (usize, Span, u32, Option<ApposRole>);

impl Document {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            ..Default::default()
        }
    }

    /// Assembles a document from raw maps without checking any invariant.
    /// Meant for tools and tests that need to build inconsistent documents;
    /// run [`crate::stats::validate`] on the result.
    pub fn from_raw_parts(
        doc_id: impl Into<String>,
        sentences: Vec<Sentence>,
        clusters: BTreeMap<ClusterId, EntityCluster>,
        mentions: BTreeMap<MentionId, Mention>,
    ) -> Self {
        let next_mention = mentions.keys().map(|m| m.0).max().unwrap_or(0);
        Document {
            doc_id: doc_id.into(),
            sentences,
            clusters,
            mentions,
            next_mention,
        }
    }

    pub fn into_raw_parts(
        self,
    ) -> (
        String,
        Vec<Sentence>,
        BTreeMap<ClusterId, EntityCluster>,
        BTreeMap<MentionId, Mention>,
    ) {
        (self.doc_id, self.sentences, self.clusters, self.mentions)
    }

    pub fn clusters(&self) -> impl Iterator<Item = &EntityCluster> {
        self.clusters.values()
    }

    pub fn mentions(&self) -> impl Iterator<Item = &Mention> {
        self.mentions.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&EntityCluster> {
        self.clusters.get(&id)
    }

    pub fn mention(&self, id: MentionId) -> Option<&Mention> {
        self.mentions.get(&id)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn mention_count(&self) -> usize {
        self.mentions.len()
    }

    /// The cluster owning `mention`.
    pub fn cluster_of(&self, mention: MentionId) -> Result<&EntityCluster, ModelError> {
        let m = self
            .mentions
            .get(&mention)
            .ok_or(ModelError::UnknownMention(mention))?;
        self.clusters
            .get(&m.cluster)
            .ok_or(ModelError::UnknownCluster(m.cluster))
    }

    /// Number of nodes covered by `span` in `sentence`.
    pub fn span_len(&self, sentence: usize, span: Span) -> Result<usize, ModelError> {
        self.sentences
            .get(sentence)
            .and_then(|s| s.span_tokens(span))
            .map(<[Token]>::len)
            .ok_or(ModelError::SpanOutOfRange { sentence, span })
    }

    pub fn find_mention(
        &self,
        cluster: ClusterId,
        sentence: usize,
        span: Span,
    ) -> Option<MentionId> {
        let c = self.clusters.get(&cluster)?;
        c.mentions.iter().copied().find(|id| {
            self.mentions
                .get(id)
                .is_some_and(|m| m.sentence == sentence && m.span == span)
        })
    }

    /// Adds a mention and returns its fresh id. The cluster is created when
    /// absent. `head` defaults to the last node of the span. On error the
    /// document is left unchanged.
    pub fn insert_mention(
        &mut self,
        cluster: ClusterId,
        sentence: usize,
        span: Span,
        head: Option<u32>,
        appos: Option<ApposRole>,
    ) -> Result<MentionId, ModelError> {
        let len = self.span_len(sentence, span)?;
        let head = head.unwrap_or(len as u32);
        if head == 0 || head as usize > len {
            return Err(ModelError::BadHead { head, len });
        }
        if self.find_mention(cluster, sentence, span).is_some() {
            return Err(ModelError::DuplicateMention {
                cluster,
                sentence,
                span,
            });
        }
        self.next_mention += 1;
        let id = MentionId(self.next_mention);
        self.mentions.insert(
            id,
            Mention {
                id,
                cluster,
                sentence,
                span,
                head,
                appos,
            },
        );
        self.clusters
            .entry(cluster)
            .or_insert_with(|| EntityCluster {
                id: cluster,
                etype: "_".into(),
                mentions: Vec::new(),
            })
            .mentions
            .push(id);
        Ok(id)
    }

    /// Value-style variant of [`Document::insert_mention`].
    pub fn add_mention(
        mut self,
        cluster: ClusterId,
        sentence: usize,
        span: Span,
        head: Option<u32>,
        appos: Option<ApposRole>,
    ) -> Result<Document, ModelError> {
        self.insert_mention(cluster, sentence, span, head, appos)?;
        Ok(self)
    }

    pub fn set_cluster_etype(
        &mut self,
        cluster: ClusterId,
        etype: impl Into<String>,
    ) -> Result<(), ModelError> {
        let c = self
            .clusters
            .get_mut(&cluster)
            .ok_or(ModelError::UnknownCluster(cluster))?;
        c.etype = etype.into();
        Ok(())
    }

    pub fn set_appos_role(
        &mut self,
        mention: MentionId,
        role: Option<ApposRole>,
    ) -> Result<(), ModelError> {
        let m = self
            .mentions
            .get_mut(&mention)
            .ok_or(ModelError::UnknownMention(mention))?;
        m.appos = role;
        Ok(())
    }

    pub fn set_head(&mut self, mention: MentionId, head: u32) -> Result<(), ModelError> {
        let (sentence, span) = {
            let m = self
                .mentions
                .get(&mention)
                .ok_or(ModelError::UnknownMention(mention))?;
            (m.sentence, m.span)
        };
        let len = self.span_len(sentence, span)?;
        if head == 0 || head as usize > len {
            return Err(ModelError::BadHead { head, len });
        }
        self.mentions.get_mut(&mention).unwrap().head = head;
        Ok(())
    }

    /// Mentions of one sentence in document order: start ascending, longer
    /// spans first, then cluster number.
    pub fn sentence_mentions(&self, sentence: usize) -> Vec<&Mention> {
        let mut ms: Vec<&Mention> = self
            .mentions
            .values()
            .filter(|m| m.sentence == sentence)
            .collect();
        ms.sort_by_key(|m| document_order(m));
        ms
    }

    /// Renumbers clusters `e1..` by first appearance and mentions `m1..` in
    /// document order.
    pub fn normalize_ids(self) -> Document {
        let mut order: Vec<&Mention> = self.mentions.values().collect();
        order.sort_by_key(|m| document_order(m));

        let mut cluster_map: HashMap<ClusterId, ClusterId> = HashMap::new();
        for m in &order {
            let next = ClusterId(cluster_map.len() as u32 + 1);
            cluster_map.entry(m.cluster).or_insert(next);
        }
        // clusters without mentions keep their relative order after the rest
        for id in self.clusters.keys() {
            let next = ClusterId(cluster_map.len() as u32 + 1);
            cluster_map.entry(*id).or_insert(next);
        }

        let mut mentions = BTreeMap::new();
        let mut mention_map = HashMap::new();
        for (i, m) in order.iter().enumerate() {
            let id = MentionId(i as u32 + 1);
            mention_map.insert(m.id, id);
            mentions.insert(
                id,
                Mention {
                    id,
                    cluster: cluster_map[&m.cluster],
                    ..(*m).clone()
                },
            );
        }

        let mut clusters = BTreeMap::new();
        for c in self.clusters.values() {
            let id = cluster_map[&c.id];
            let mut members: Vec<MentionId> = c
                .mentions
                .iter()
                .filter_map(|m| mention_map.get(m).copied())
                .collect();
            members.sort();
            clusters.insert(
                id,
                EntityCluster {
                    id,
                    etype: c.etype.clone(),
                    mentions: members,
                },
            );
        }

        Document {
            doc_id: self.doc_id,
            sentences: self.sentences,
            next_mention: mentions.len() as u32,
            clusters,
            mentions,
        }
    }

    fn mention_key(m: &Mention) -> MentionKey {
        (m.sentence, m.span, m.head, m.appos)
    }
}

fn document_order(m: &Mention) -> (usize, NodeId, Reverse<NodeId>, ClusterId, MentionId) {
    (m.sentence, m.span.start, Reverse(m.span.end), m.cluster, m.id)
}

/// Structural equality: sentences, clusters and mentions are compared by
/// content; mention ids are labels and do not participate.
impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        fn clusters(d: &Document) -> BTreeMap<ClusterId, (String, Vec<Option<MentionKey>>)> {
            d.clusters
                .values()
                .map(|c| {
                    let mut keys: Vec<Option<MentionKey>> = c
                        .mentions
                        .iter()
                        .map(|id| d.mentions.get(id).map(Document::mention_key))
                        .collect();
                    keys.sort();
                    (c.id, (c.etype.clone(), keys))
                })
                .collect()
        }
        fn mentions(d: &Document) -> Vec<(MentionKey, ClusterId)> {
            let mut v: Vec<_> = d
                .mentions
                .values()
                .map(|m| (Document::mention_key(m), m.cluster))
                .collect();
            v.sort();
            v
        }
        self.doc_id == other.doc_id
            && self.sentences == other.sentences
            && clusters(self) == clusters(other)
            && mentions(self) == mentions(other)
    }
}

impl Eq for Document {}
