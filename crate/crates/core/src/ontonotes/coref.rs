//! Reader for coreference SGML: a `DOC` element holding whitespace
//! tokenized text with nested `COREF` elements.
//!
//! ```text
//! <DOC DOCNO="nw/ann_0001">
//! <COREF ID="1" TYPE="IDENT">w1 w2</COREF> w3
//! </DOC>
//! ```
//!
//! Elements other than `DOC` and `COREF` are tolerated and ignored; their
//! text still contributes tokens.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorefError {
    #[error("byte {offset}: malformed tag: {reason}")]
    MalformedTag { offset: usize, reason: String },
    #[error("byte {offset}: closing </{found}> crosses open <{open}>")]
    CrossingTags {
        offset: usize,
        found: String,
        open: String,
    },
    #[error("byte {offset}: bad attribute: {reason}")]
    BadAttr { offset: usize, reason: String },
    #[error("<{name}> opened at byte {offset} is never closed")]
    UnclosedTag { offset: usize, name: String },
    #[error("no DOC element with an id attribute")]
    MissingDocument,
    #[error("more than one DOC element")]
    MultipleDocuments,
    #[error("byte {offset}: text outside the DOC element")]
    TextOutsideDocument { offset: usize },
    #[error("byte {offset}: COREF element without tokens")]
    EmptySpan { offset: usize },
    #[error("leaves {start}..={end} belong to two chains ({first} and {second})")]
    SpanInTwoChains {
        start: usize,
        end: usize,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorefType {
    Ident,
    Appos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subtype {
    Head,
    Attrib,
}

/// One `COREF` element. `leaves` is an inclusive range of token indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntoSpan {
    pub coref_id: String,
    pub coref_type: CorefType,
    pub subtype: Option<Subtype>,
    pub leaves: (usize, usize),
    /// All attributes as written, in source order.
    pub attrs: Vec<(String, String)>,
    pub children: Vec<OntoSpan>,
}

impl OntoSpan {
    /// This span followed by all descendants, depth first.
    pub fn walk(&self) -> Vec<&OntoSpan> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn is_appos_construction(&self) -> bool {
        self.coref_type == CorefType::Appos && self.subtype.is_none()
    }

    pub(crate) fn shifted(&self, by: usize) -> OntoSpan {
        OntoSpan {
            leaves: (self.leaves.0 - by, self.leaves.1 - by),
            children: self.children.iter().map(|c| c.shifted(by)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntoCorefDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
    /// Top-level spans in document order.
    pub spans: Vec<OntoSpan>,
}

impl OntoCorefDoc {
    pub fn all_spans(&self) -> Vec<&OntoSpan> {
        self.spans.iter().flat_map(OntoSpan::walk).collect()
    }
}

enum Frame {
    Doc,
    Other(String),
    Coref {
        offset: usize,
        span: OntoSpan,
        start: usize,
    },
}

impl Frame {
    fn name(&self) -> &str {
        match self {
            Frame::Doc => "DOC",
            Frame::Other(n) => n,
            Frame::Coref { .. } => "COREF",
        }
    }
}

fn decode(text: &str) -> String {
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn parse_attrs(body: &str, offset: usize) -> Result<Vec<(String, String)>, CorefError> {
    let bad = |reason: &str| CorefError::MalformedTag {
        offset,
        reason: reason.to_string(),
    };
    let mut attrs = Vec::new();
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let eq = rest.find('=').ok_or_else(|| bad("attribute without `=`"))?;
        let name = rest[..eq].trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(bad("bad attribute name"));
        }
        let after = rest[eq + 1..].trim_start();
        let quote = after
            .chars()
            .next()
            .filter(|c| *c == '"' || *c == '\'')
            .ok_or_else(|| bad("attribute value must be quoted"))?;
        let close = after[1..]
            .find(quote)
            .ok_or_else(|| bad("unterminated attribute value"))?;
        attrs.push((name.to_ascii_uppercase(), decode(&after[1..1 + close])));
        rest = after[close + 2..].trim_start();
    }
    Ok(attrs)
}

fn attr<'a>(attrs: &'a [(String, String)], name: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_str())
}

/// Parses one coreference document into its token stream and span forest.
pub fn parse_onto_coref(text: &str) -> Result<OntoCorefDoc, CorefError> {
    let mut stack: Vec<Frame> = Vec::new();
    let mut roots: Vec<OntoSpan> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut doc_id: Option<String> = None;
    let mut doc_offset = 0;
    let mut seen_doc = false;

    let bytes = text.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        let b = bytes[pos];
        if b.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if b != b'<' {
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'<' {
                pos += 1;
            }
            if !stack.iter().any(|f| matches!(f, Frame::Doc)) {
                return Err(CorefError::TextOutsideDocument { offset: start });
            }
            tokens.push(decode(&text[start..pos]));
            continue;
        }

        let offset = pos;
        let end = text[pos..]
            .find('>')
            .map(|i| pos + i)
            .ok_or_else(|| CorefError::MalformedTag {
                offset,
                reason: "unterminated tag".into(),
            })?;
        let inner = &text[pos + 1..end];
        pos = end + 1;

        if let Some(name) = inner.strip_prefix('/') {
            let name = name.trim().to_ascii_uppercase();
            let top = stack.pop().ok_or_else(|| CorefError::CrossingTags {
                offset,
                found: name.clone(),
                open: "(nothing)".into(),
            })?;
            if top.name() != name {
                return Err(CorefError::CrossingTags {
                    offset,
                    found: name,
                    open: top.name().to_string(),
                });
            }
            if let Frame::Coref {
                offset: open_at,
                mut span,
                start,
            } = top
            {
                if tokens.len() == start {
                    return Err(CorefError::EmptySpan { offset: open_at });
                }
                span.leaves = (start, tokens.len() - 1);
                check_children(&span)?;
                match stack.iter_mut().rev().find_map(|f| match f {
                    Frame::Coref { span, .. } => Some(span),
                    _ => None,
                }) {
                    Some(parent) => parent.children.push(span),
                    None => roots.push(span),
                }
            }
            continue;
        }

        let name_end = inner
            .find(char::is_whitespace)
            .unwrap_or(inner.len());
        let name = inner[..name_end].to_ascii_uppercase();
        if name.is_empty() {
            return Err(CorefError::MalformedTag {
                offset,
                reason: "missing element name".into(),
            });
        }
        let attrs = parse_attrs(&inner[name_end..], offset)?;
        match name.as_str() {
            "DOC" => {
                if seen_doc {
                    return Err(CorefError::MultipleDocuments);
                }
                seen_doc = true;
                doc_offset = offset;
                doc_id = attr(&attrs, "DOCNO")
                    .or_else(|| attr(&attrs, "ID"))
                    .map(str::to_string);
                stack.push(Frame::Doc);
            }
            "COREF" => {
                if !stack.iter().any(|f| matches!(f, Frame::Doc)) {
                    return Err(CorefError::TextOutsideDocument { offset });
                }
                let span = coref_span(&attrs, &stack, offset)?;
                stack.push(Frame::Coref {
                    offset,
                    span,
                    start: tokens.len(),
                });
            }
            _ => stack.push(Frame::Other(name)),
        }
    }

    if let Some(frame) = stack.last() {
        let offset = match frame {
            Frame::Coref { offset, .. } => *offset,
            Frame::Doc => doc_offset,
            Frame::Other(_) => text.len(),
        };
        return Err(CorefError::UnclosedTag {
            offset,
            name: frame.name().to_string(),
        });
    }
    let doc_id = doc_id.ok_or(CorefError::MissingDocument)?;
    Ok(OntoCorefDoc {
        doc_id,
        tokens,
        spans: roots,
    })
}

fn coref_span(
    attrs: &[(String, String)],
    stack: &[Frame],
    offset: usize,
) -> Result<OntoSpan, CorefError> {
    let bad = |reason: String| CorefError::BadAttr { offset, reason };
    let coref_id = attr(attrs, "ID")
        .ok_or_else(|| bad("COREF without ID".into()))?
        .to_string();
    let coref_type = match attr(attrs, "TYPE") {
        Some("IDENT") => CorefType::Ident,
        Some("APPOS") => CorefType::Appos,
        Some(other) => return Err(bad(format!("TYPE `{other}` is not IDENT or APPOS"))),
        None => return Err(bad("COREF without TYPE".into())),
    };
    let subtype = match attr(attrs, "SUBTYPE") {
        None => None,
        Some("HEAD") => Some(Subtype::Head),
        Some("ATTRIB") => Some(Subtype::Attrib),
        Some(other) => return Err(bad(format!("SUBTYPE `{other}` is not HEAD or ATTRIB"))),
    };
    if subtype.is_some() {
        let parent = stack.iter().rev().find_map(|f| match f {
            Frame::Coref { span, .. } => Some(span),
            _ => None,
        });
        if !parent.is_some_and(OntoSpan::is_appos_construction) {
            return Err(bad("SUBTYPE outside an APPOS construction".into()));
        }
    }
    Ok(OntoSpan {
        coref_id,
        coref_type,
        subtype,
        leaves: (0, 0),
        attrs: attrs.to_vec(),
        children: Vec::new(),
    })
}

fn is_plain_ident(s: &OntoSpan) -> bool {
    s.coref_type == CorefType::Ident && s.subtype.is_none()
}

/// Two IDENT spans over the same leaves must not name different chains.
fn check_children(parent: &OntoSpan) -> Result<(), CorefError> {
    if !is_plain_ident(parent) {
        return Ok(());
    }
    let clash = parent
        .children
        .iter()
        .flat_map(OntoSpan::walk)
        .find(|s| is_plain_ident(s) && s.leaves == parent.leaves && s.coref_id != parent.coref_id);
    match clash {
        Some(s) => Err(CorefError::SpanInTwoChains {
            start: s.leaves.0,
            end: s.leaves.1,
            first: parent.coref_id.clone(),
            second: s.coref_id.clone(),
        }),
        None => Ok(()),
    }
}
