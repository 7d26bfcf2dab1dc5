//! CoNLL-U reader and writer for the CorefUD dialect.
//!
//! Mentions live in the MISC column as an `Entity=` item (see [`entity`]).
//! Canonical output has:
//!
//! * `# global.Entity = eid-etype-head-other` once at the top of the file,
//! * `# newdoc id = ...` before the first sentence of each document,
//! * `# sent_id = ...` followed by the remaining sentence comments,
//! * the `Entity=` item last in MISC,
//! * every sentence block terminated by one blank line.
//!
//! `serialize_conllu(parse_conllu(t)) == t` holds for canonical text.

pub mod entity;

use std::cmp::Reverse;
use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use crate::model::{
    span_relation, ApposRole, ClusterId, Document, Mention, ModelError, MultiwordToken, Nesting,
    NodeId, Sentence, Span, Token,
};

pub use entity::{parse_entity_attr, serialize_entity_attr, EntityError, EntityEvent, EventKind};

pub const GLOBAL_ENTITY_HEADER: &str = "# global.Entity = eid-etype-head-other";

const NEWDOC_PREFIX: &str = "# newdoc id = ";
const SENT_ID_PREFIX: &str = "# sent_id = ";
const ENTITY_KEY: &str = "Entity=";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConlluError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: {source}")]
    MalformedEntity { line: usize, source: EntityError },
    #[error("line {line}: bad token numbering: {reason}")]
    BadTokenNumbering { line: usize, reason: String },
    #[error("line {line}: mention of {cluster} opened here is never closed")]
    UnbalancedBracket { line: usize, cluster: ClusterId },
    #[error("line {line}: close of {cluster} without a matching open")]
    UnknownClose { line: usize, cluster: ClusterId },
    #[error("line {line}: mention of {cluster} opened on line {opened} crosses a sentence boundary")]
    CrossSentenceMention {
        line: usize,
        opened: usize,
        cluster: ClusterId,
    },
    #[error("line {line}: unsupported entity `other` field `{value}`")]
    UnsupportedOther { line: usize, value: String },
    #[error("line {line}: conflicting entity types `{first}` and `{second}` for {cluster}")]
    EtypeConflict {
        line: usize,
        cluster: ClusterId,
        first: String,
        second: String,
    },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("expected one document, found {0}")]
    MultipleDocuments(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("{doc_id}: mentions {a} and {b} cross in sentence {sentence} and cannot be bracket-encoded")]
    CrossingMentions {
        doc_id: String,
        sentence: usize,
        a: Span,
        b: Span,
    },
    #[error("{doc_id}: mention {span} does not fit sentence {sentence}")]
    InvalidMention {
        doc_id: String,
        sentence: usize,
        span: Span,
    },
}

/// Parses text holding at most one document.
pub fn parse_conllu(text: &str) -> Result<Document, ConlluError> {
    let mut docs = parse_corpus(text)?;
    match docs.len() {
        0 => Ok(Document::new("")),
        1 => Ok(docs.pop().unwrap()),
        n => Err(ConlluError::MultipleDocuments(n)),
    }
}

/// Parses a file that may hold several documents (`# newdoc id` boundaries).
pub fn parse_corpus(text: &str) -> Result<Vec<Document>, ConlluError> {
    let text = text.replace("\r\n", "\n");
    let mut reader = Reader::default();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        if line.is_empty() {
            if !block.is_empty() {
                reader.block(&block)?;
                block.clear();
            }
        } else {
            block.push((i + 1, line));
        }
    }
    if !block.is_empty() {
        reader.block(&block)?;
    }
    reader.finish()
}

/// A mention opened in an earlier sentence and not yet closed.
#[derive(Debug, Clone, Copy)]
struct Dangling {
    line: usize,
    cluster: ClusterId,
}

#[derive(Default)]
struct Reader {
    docs: Vec<DocBuilder>,
}

struct DocBuilder {
    doc: Document,
    dangling: Vec<Dangling>,
    pending_etypes: HashMap<ClusterId, String>,
}

impl DocBuilder {
    fn new(doc_id: &str) -> Self {
        DocBuilder {
            doc: Document::new(doc_id),
            dangling: Vec::new(),
            pending_etypes: HashMap::new(),
        }
    }

    fn finish(self) -> Result<Document, ConlluError> {
        if let Some(d) = self.dangling.first() {
            return Err(ConlluError::UnbalancedBracket {
                line: d.line,
                cluster: d.cluster,
            });
        }
        Ok(self.doc)
    }
}

struct OpenMention {
    start: NodeId,
    line: usize,
    head: Option<u32>,
    appos: Option<ApposRole>,
}

impl Reader {
    fn current(&mut self) -> &mut DocBuilder {
        if self.docs.is_empty() {
            self.docs.push(DocBuilder::new(""));
        }
        self.docs.last_mut().unwrap()
    }

    fn finish(self) -> Result<Vec<Document>, ConlluError> {
        self.docs.into_iter().map(DocBuilder::finish).collect()
    }

    fn block(&mut self, lines: &[(usize, &str)]) -> Result<(), ConlluError> {
        let mut sentence = Sentence::default();
        let mut rows: Vec<(usize, Token, Option<&str>)> = Vec::new();
        let mut surface_so_far = 0u32;
        for &(no, line) in lines {
            if line.starts_with('#') {
                if !rows.is_empty() || !sentence.multiword_tokens.is_empty() {
                    return Err(ConlluError::MalformedLine {
                        line: no,
                        reason: "comment after token lines".into(),
                    });
                }
                if line == GLOBAL_ENTITY_HEADER || line.starts_with("# global.Entity ") {
                    continue;
                }
                if let Some(id) = line.strip_prefix(NEWDOC_PREFIX) {
                    self.start_document(id.trim())?;
                } else if let Some(id) = line.strip_prefix(SENT_ID_PREFIX) {
                    sentence.sent_id = id.to_string();
                } else {
                    sentence.comments.push(line.to_string());
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 10 {
                return Err(ConlluError::MalformedLine {
                    line: no,
                    reason: format!("expected 10 tab-separated columns, found {}", cols.len()),
                });
            }
            if let Some(col) = cols.iter().position(|c| c.is_empty()) {
                return Err(ConlluError::MalformedLine {
                    line: no,
                    reason: format!("column {} is empty", col + 1),
                });
            }
            if let Some((first, last)) = cols[0].split_once('-') {
                let range = first.parse::<u32>().ok().zip(last.parse::<u32>().ok());
                match range {
                    Some((first, last)) if first == surface_so_far + 1 && last > first => {
                        sentence.multiword_tokens.push(MultiwordToken {
                            first,
                            last,
                            columns: cols[1..].join("\t"),
                        });
                    }
                    _ => {
                        return Err(ConlluError::BadTokenNumbering {
                            line: no,
                            reason: format!("bad multiword range `{}`", cols[0]),
                        })
                    }
                }
                continue;
            }
            let id: NodeId = cols[0]
                .parse()
                .map_err(|source| ConlluError::Model { line: no, source })?;
            if id.is_empty_node() {
                let prev = rows.last().map(|r| r.1.id);
                let ordered = id.token == surface_so_far
                    && prev.is_none_or(|p| p < id);
                if !ordered {
                    return Err(ConlluError::BadTokenNumbering {
                        line: no,
                        reason: format!("empty node {id} out of place"),
                    });
                }
                if cols[6] != "_" || cols[7] != "_" {
                    return Err(ConlluError::MalformedLine {
                        line: no,
                        reason: "empty nodes carry no HEAD or DEPREL".into(),
                    });
                }
            } else if id.token != surface_so_far + 1 {
                return Err(ConlluError::BadTokenNumbering {
                    line: no,
                    reason: format!("expected token {}, found {id}", surface_so_far + 1),
                });
            } else {
                surface_so_far += 1;
            }
            let (misc, entity) = split_misc(cols[9]);
            let token = Token {
                id,
                form: cols[1].into(),
                lemma: cols[2].into(),
                upos: cols[3].into(),
                xpos: cols[4].into(),
                feats: cols[5].into(),
                head: cols[6].into(),
                deprel: cols[7].into(),
                deps: cols[8].into(),
                misc,
            };
            rows.push((no, token, entity));
        }

        if rows.is_empty() {
            if !sentence.multiword_tokens.is_empty()
                || !sentence.comments.is_empty()
                || !sentence.sent_id.is_empty()
            {
                let line = lines.first().map_or(0, |l| l.0);
                return Err(ConlluError::MalformedLine {
                    line,
                    reason: "sentence block without token lines".into(),
                });
            }
            return Ok(());
        }
        if let Some(mw) = sentence
            .multiword_tokens
            .iter()
            .find(|m| m.last > surface_so_far)
        {
            return Err(ConlluError::BadTokenNumbering {
                line: lines[0].0,
                reason: format!("multiword range {}-{} past the last token", mw.first, mw.last),
            });
        }

        let entities: Vec<(usize, NodeId, Option<&str>)> =
            rows.iter().map(|(no, t, e)| (*no, t.id, *e)).collect();
        sentence.tokens = rows.into_iter().map(|r| r.1).collect();
        let builder = self.current();
        let index = builder.doc.sentences.len();
        builder.doc.sentences.push(sentence);
        read_mentions(builder, index, &entities)
    }

    fn start_document(&mut self, id: &str) -> Result<(), ConlluError> {
        if let Some(prev) = self.docs.last() {
            if let Some(d) = prev.dangling.first() {
                return Err(ConlluError::UnbalancedBracket {
                    line: d.line,
                    cluster: d.cluster,
                });
            }
        }
        self.docs.push(DocBuilder::new(id));
        Ok(())
    }
}

/// Splits MISC into the remaining items and the `Entity=` payload.
fn split_misc(misc: &str) -> (String, Option<&str>) {
    if misc == "_" {
        return ("_".into(), None);
    }
    let mut entity = None;
    let rest: Vec<&str> = misc
        .split('|')
        .filter(|item| match item.strip_prefix(ENTITY_KEY) {
            Some(value) if entity.is_none() => {
                entity = Some(value);
                false
            }
            _ => true,
        })
        .collect();
    if rest.is_empty() {
        ("_".into(), entity)
    } else {
        (rest.join("|"), entity)
    }
}

fn appos_from_other(other: &str) -> Option<ApposRole> {
    match other {
        "Appos:span" => Some(ApposRole::Span),
        "Appos:head" => Some(ApposRole::Head),
        "Appos:attrib" => Some(ApposRole::Attrib),
        _ => None,
    }
}

fn appos_other(role: ApposRole) -> &'static str {
    match role {
        ApposRole::Span => "Appos:span",
        ApposRole::Head => "Appos:head",
        ApposRole::Attrib => "Appos:attrib",
    }
}

fn read_mentions(
    builder: &mut DocBuilder,
    sentence: usize,
    nodes: &[(usize, NodeId, Option<&str>)],
) -> Result<(), ConlluError> {
    let mut open: HashMap<ClusterId, Vec<OpenMention>> = HashMap::new();
    let mut order: Vec<ClusterId> = Vec::new();
    for &(line, node, value) in nodes {
        let Some(value) = value else { continue };
        let events = parse_entity_attr(value)
            .map_err(|source| ConlluError::MalformedEntity { line, source })?;
        for ev in events {
            let appos = match &ev.other {
                None => None,
                Some(other) => Some(appos_from_other(other).ok_or_else(|| {
                    ConlluError::UnsupportedOther {
                        line,
                        value: other.clone(),
                    }
                })?),
            };
            if let Some(etype) = &ev.etype {
                note_etype(builder, ev.cluster, etype, line)?;
            }
            match ev.kind {
                EventKind::Open => {
                    order.push(ev.cluster);
                    open.entry(ev.cluster).or_default().push(OpenMention {
                        start: node,
                        line,
                        head: ev.head,
                        appos,
                    });
                }
                EventKind::Single => {
                    add(builder, ev.cluster, sentence, Span::single(node), ev.head, appos, line)?;
                }
                EventKind::Close => {
                    let Some(m) = open.get_mut(&ev.cluster).and_then(Vec::pop) else {
                        if let Some(d) = builder.dangling.iter().find(|d| d.cluster == ev.cluster)
                        {
                            return Err(ConlluError::CrossSentenceMention {
                                line,
                                opened: d.line,
                                cluster: ev.cluster,
                            });
                        }
                        return Err(ConlluError::UnknownClose {
                            line,
                            cluster: ev.cluster,
                        });
                    };
                    let span = Span::new(m.start, node);
                    add(builder, ev.cluster, sentence, span, m.head, m.appos, m.line)?;
                }
            }
        }
    }
    for cluster in order {
        if let Some(stack) = open.get_mut(&cluster) {
            for m in stack.drain(..) {
                builder.dangling.push(Dangling {
                    line: m.line,
                    cluster,
                });
            }
        }
    }
    builder.dangling.sort_by_key(|d| d.line);
    Ok(())
}

fn note_etype(
    builder: &mut DocBuilder,
    cluster: ClusterId,
    etype: &str,
    line: usize,
) -> Result<(), ConlluError> {
    if etype == "_" {
        return Ok(());
    }
    let known = builder
        .doc
        .cluster(cluster)
        .map(|c| c.etype.clone())
        .filter(|e| e != "_")
        .or_else(|| builder.pending_etypes.get(&cluster).cloned());
    match known {
        Some(first) if first != etype => Err(ConlluError::EtypeConflict {
            line,
            cluster,
            first,
            second: etype.to_string(),
        }),
        Some(_) => Ok(()),
        None if builder.doc.cluster(cluster).is_some() => builder
            .doc
            .set_cluster_etype(cluster, etype)
            .map_err(|source| ConlluError::Model { line, source }),
        None => {
            // the cluster only exists once its first mention is complete
            builder.pending_etypes.insert(cluster, etype.to_string());
            Ok(())
        }
    }
}

fn add(
    builder: &mut DocBuilder,
    cluster: ClusterId,
    sentence: usize,
    span: Span,
    head: Option<u32>,
    appos: Option<ApposRole>,
    line: usize,
) -> Result<(), ConlluError> {
    builder
        .doc
        .insert_mention(cluster, sentence, span, head, appos)
        .map_err(|source| ConlluError::Model { line, source })?;
    if let Some(etype) = builder.pending_etypes.remove(&cluster) {
        builder
            .doc
            .set_cluster_etype(cluster, etype)
            .map_err(|source| ConlluError::Model { line, source })?;
    }
    Ok(())
}

/// Serializes one document as a complete file.
pub fn serialize_conllu(doc: &Document) -> Result<String, SerializeError> {
    serialize_corpus(std::slice::from_ref(doc))
}

/// Serializes several documents into one file with a single global header.
pub fn serialize_corpus(docs: &[Document]) -> Result<String, SerializeError> {
    let mut out = String::new();
    out.push_str(GLOBAL_ENTITY_HEADER);
    out.push('\n');
    for doc in docs {
        write_document(&mut out, doc)?;
    }
    Ok(out)
}

fn write_document(out: &mut String, doc: &Document) -> Result<(), SerializeError> {
    if !doc.doc_id.is_empty() {
        writeln!(out, "{NEWDOC_PREFIX}{}", doc.doc_id).unwrap();
    }
    for (index, sentence) in doc.sentences.iter().enumerate() {
        let mentions = doc.sentence_mentions(index);
        let events = node_events(doc, index, sentence, &mentions)?;
        if !sentence.sent_id.is_empty() {
            writeln!(out, "{SENT_ID_PREFIX}{}", sentence.sent_id).unwrap();
        }
        for c in &sentence.comments {
            out.push_str(c);
            out.push('\n');
        }
        for token in &sentence.tokens {
            if !token.id.is_empty_node() {
                for mw in sentence
                    .multiword_tokens
                    .iter()
                    .filter(|m| m.first == token.id.token)
                {
                    writeln!(out, "{}-{}\t{}", mw.first, mw.last, mw.columns).unwrap();
                }
            }
            let misc = match events.get(&token.id) {
                Some(evs) => {
                    let value = serialize_entity_attr(evs)
                        .expect("node events are generated in canonical order");
                    if token.misc == "_" {
                        format!("{ENTITY_KEY}{value}")
                    } else {
                        format!("{}|{ENTITY_KEY}{value}", token.misc)
                    }
                }
                None => token.misc.clone(),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                token.id,
                token.form,
                token.lemma,
                token.upos,
                token.xpos,
                token.feats,
                token.head,
                token.deprel,
                token.deps,
                misc
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(())
}

/// Builds the canonical event list of every node that carries brackets.
fn node_events(
    doc: &Document,
    index: usize,
    sentence: &Sentence,
    mentions: &[&Mention],
) -> Result<HashMap<NodeId, Vec<EntityEvent>>, SerializeError> {
    let mut lengths = Vec::with_capacity(mentions.len());
    for m in mentions {
        match sentence.span_tokens(m.span) {
            Some(nodes) => lengths.push(nodes.len() as u32),
            None => {
                return Err(SerializeError::InvalidMention {
                    doc_id: doc.doc_id.clone(),
                    sentence: index,
                    span: m.span,
                })
            }
        }
    }
    for (i, a) in mentions.iter().enumerate() {
        for b in &mentions[i + 1..] {
            if span_relation(a.span, b.span) == Nesting::Crossing {
                return Err(SerializeError::CrossingMentions {
                    doc_id: doc.doc_id.clone(),
                    sentence: index,
                    a: a.span,
                    b: b.span,
                });
            }
        }
    }

    let mut closes: HashMap<NodeId, Vec<&Mention>> = HashMap::new();
    let mut opens: HashMap<NodeId, Vec<(&Mention, u32)>> = HashMap::new();
    let mut singles: HashMap<NodeId, Vec<&Mention>> = HashMap::new();
    for (m, &len) in mentions.iter().zip(&lengths) {
        if m.span.start == m.span.end {
            singles.entry(m.span.start).or_default().push(m);
        } else {
            opens.entry(m.span.start).or_default().push((m, len));
            closes.entry(m.span.end).or_default().push(m);
        }
    }

    let mut events: HashMap<NodeId, Vec<EntityEvent>> = HashMap::new();
    for token in &sentence.tokens {
        let node = token.id;
        let mut evs = Vec::new();
        if let Some(cs) = closes.get_mut(&node) {
            // reverse of opening order: later start first, then higher cluster
            cs.sort_by_key(|m| (Reverse(m.span.start), Reverse(m.cluster)));
            evs.extend(cs.iter().map(|m| EntityEvent::close(m.cluster)));
        }
        if let Some(os) = opens.get_mut(&node) {
            os.sort_by_key(|(m, _)| (Reverse(m.span.end), m.cluster));
            for (m, len) in os.iter() {
                evs.push(open_event(doc, m, *len, EventKind::Open));
            }
        }
        if let Some(ss) = singles.get_mut(&node) {
            ss.sort_by_key(|m| m.cluster);
            evs.extend(ss.iter().map(|m| open_event(doc, m, 1, EventKind::Single)));
        }
        if !evs.is_empty() {
            events.insert(node, evs);
        }
    }
    Ok(events)
}

/// Opening unit with trailing default fields dropped: the head is omitted
/// when it is the last node of the span, the type when it is `_` and no
/// later field is present.
fn open_event(doc: &Document, m: &Mention, len: u32, kind: EventKind) -> EntityEvent {
    let etype = doc
        .cluster(m.cluster)
        .map(|c| c.etype.as_str())
        .unwrap_or("_");
    let other = m.appos.map(appos_other);
    let head = (other.is_some() || m.head != len).then_some(m.head);
    let etype = (head.is_some() || etype != "_").then(|| etype.to_string());
    EntityEvent {
        kind,
        cluster: m.cluster,
        etype,
        head,
        other: other.map(str::to_string),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKEN: &str = "\
# global.Entity = eid-etype-head-other
# newdoc id = d1
# sent_id = d1-s1
# text = the cat sat
1\tthe\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1
2\tcat\t_\t_\t_\t_\t_\t_\t_\tEntity=e1)
3\tsat\t_\t_\t_\t_\t_\t_\t_\t_

# sent_id = d1-s2
1\tit\t_\t_\t_\t_\t_\t_\t_\t_
2\tslept\t_\t_\t_\t_\t_\t_\t_\t_

";

    fn e(n: u32) -> ClusterId {
        ClusterId::new(n).unwrap()
    }

    #[test]
    fn two_token_mention() {
        let doc = parse_conllu(TWO_TOKEN).unwrap();
        assert_eq!(doc.doc_id, "d1");
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.mention_count(), 1);
        let m = doc.mentions().next().unwrap();
        assert_eq!(m.cluster, e(1));
        assert_eq!(m.span, Span::new(NodeId::surface(1), NodeId::surface(2)));
        assert_eq!(m.head, 2);
        assert_eq!(serialize_conllu(&doc).unwrap(), TWO_TOKEN);
    }

    #[test]
    fn crlf_is_normalized() {
        let doc = parse_conllu(&TWO_TOKEN.replace('\n', "\r\n")).unwrap();
        assert_eq!(serialize_conllu(&doc).unwrap(), TWO_TOKEN);
    }

    #[test]
    fn unclosed_bracket() {
        let text = TWO_TOKEN.replace("Entity=e1)", "_");
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::UnbalancedBracket { line: 5, .. })
        ));
    }

    #[test]
    fn close_in_next_sentence_crosses_boundary() {
        let text = TWO_TOKEN
            .replace("Entity=e1)", "_")
            .replace("slept\t_\t_\t_\t_\t_\t_\t_\t_", "slept\t_\t_\t_\t_\t_\t_\t_\tEntity=e1)");
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::CrossSentenceMention { opened: 5, .. })
        ));
    }

    #[test]
    fn unknown_close() {
        let text = TWO_TOKEN.replace("Entity=(e1", "_");
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::UnknownClose { line: 6, .. })
        ));
    }

    #[test]
    fn token_numbering_gaps() {
        let text = TWO_TOKEN.replace("3\tsat", "4\tsat");
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::BadTokenNumbering { line: 7, .. })
        ));
        let text = TWO_TOKEN.replace("2\tcat", "1\tcat");
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::BadTokenNumbering { .. })
        ));
    }

    #[test]
    fn empty_node_mention() {
        let text = "\
# global.Entity = eid-etype-head-other
# newdoc id = z
# sent_id = z-s1
1\tكتب\t_\t_\t_\t_\t_\t_\t_\t_
1.1\t_\t_\t_\t_\t_\t_\t_\t_\tTraceForm=*|Entity=(e3)
2\tالرسالة\t_\t_\t_\t_\t_\t_\t_\t_

";
        let doc = parse_conllu(text).unwrap();
        let m = doc.mentions().next().unwrap();
        let zero = NodeId { token: 1, empty: 1 };
        assert_eq!(m.span, Span::single(zero));
        assert_eq!(m.cluster, e(3));
        assert_eq!(doc.sentences[0].tokens[1].misc, "TraceForm=*");
        assert_eq!(serialize_conllu(&doc).unwrap(), text);
    }

    #[test]
    fn empty_node_must_follow_its_anchor() {
        let text = "1\ta\t_\t_\t_\t_\t_\t_\t_\t_\n2.1\t_\t_\t_\t_\t_\t_\t_\t_\t_\n2\tb\t_\t_\t_\t_\t_\t_\t_\t_\n";
        assert!(matches!(
            parse_conllu(text),
            Err(ConlluError::BadTokenNumbering { line: 2, .. })
        ));
    }

    #[test]
    fn empty_document_is_header_only() {
        let doc = Document::new("empty");
        let text = serialize_conllu(&doc).unwrap();
        assert_eq!(text, format!("{GLOBAL_ENTITY_HEADER}\n# newdoc id = empty\n"));
        assert_eq!(parse_conllu(&text).unwrap(), doc);
    }

    #[test]
    fn crossing_mentions_refuse_to_serialize() {
        let mut doc = parse_conllu(TWO_TOKEN).unwrap();
        doc.insert_mention(
            e(2),
            0,
            Span::new(NodeId::surface(2), NodeId::surface(3)),
            None,
            None,
        )
        .unwrap();
        assert!(matches!(
            serialize_conllu(&doc),
            Err(SerializeError::CrossingMentions { .. })
        ));
    }

    #[test]
    fn misc_entity_moves_last() {
        let text = "1\ta\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1)|SpaceAfter=No\n\n";
        let doc = parse_conllu(text).unwrap();
        assert_eq!(doc.sentences[0].tokens[0].misc, "SpaceAfter=No");
        let out = serialize_conllu(&doc).unwrap();
        assert!(out.ends_with("1\ta\t_\t_\t_\t_\t_\t_\t_\tSpaceAfter=No|Entity=(e1)\n\n"));
    }

    #[test]
    fn nested_same_cluster_round_trips() {
        let text = "\
# global.Entity = eid-etype-head-other
1\ta\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1(e1-_-1
2\tb\t_\t_\t_\t_\t_\t_\t_\tEntity=e1)
3\tc\t_\t_\t_\t_\t_\t_\t_\tEntity=e1)

";
        let doc = parse_conllu(text).unwrap();
        let spans: Vec<(u32, u32, u32)> = doc
            .sentence_mentions(0)
            .iter()
            .map(|m| (m.span.start.token, m.span.end.token, m.head))
            .collect();
        assert_eq!(spans, vec![(1, 3, 3), (1, 2, 1)]);
        assert_eq!(serialize_conllu(&doc).unwrap(), text);
    }

    #[test]
    fn multiword_tokens_pass_through() {
        let text = "\
# global.Entity = eid-etype-head-other
# sent_id = mw
1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_
1\tde\t_\t_\t_\t_\t_\t_\t_\t_
2\tel\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1)

";
        let doc = parse_conllu(text).unwrap();
        assert_eq!(doc.sentences[0].multiword_tokens.len(), 1);
        assert_eq!(serialize_conllu(&doc).unwrap(), text);
    }

    #[test]
    fn entity_types_attach_to_clusters() {
        let text = "1\ta\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1-person-1\n2\tb\t_\t_\t_\t_\t_\t_\t_\tEntity=e1)\n\n";
        let doc = parse_conllu(text).unwrap();
        assert_eq!(doc.clusters().next().unwrap().etype, "person");
        let bad = "1\ta\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1-person)\n2\tb\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1-place)\n\n";
        assert!(matches!(
            parse_conllu(bad),
            Err(ConlluError::EtypeConflict { .. })
        ));
    }

    #[test]
    fn several_documents() {
        let text = format!("{TWO_TOKEN}# newdoc id = d2\n# sent_id = d2-s1\n1\tx\t_\t_\t_\t_\t_\t_\t_\tEntity=(e1)\n\n");
        let docs = parse_corpus(&text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].doc_id, "d2");
        assert_eq!(serialize_corpus(&docs).unwrap(), text);
        assert!(matches!(
            parse_conllu(&text),
            Err(ConlluError::MultipleDocuments(2))
        ));
    }
}
