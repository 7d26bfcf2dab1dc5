//! Penn-Treebank style s-expression trees.
//!
//! Empty categories (`-NONE-` terminals such as `*`, `*pro*`, `*T*-1`) are
//! ordinary leaves here; callers decide what to do with them.

use std::fmt;

use thiserror::Error;

pub const TRACE_POS: &str = "-NONE-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PtbError {
    #[error("byte {offset}: unbalanced parentheses")]
    UnbalancedParens { offset: usize },
    #[error("byte {offset}: empty tree")]
    EmptyTree { offset: usize },
    #[error("byte {offset}: {reason}")]
    MalformedNode { offset: usize, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtbTree {
    Node { label: String, children: Vec<PtbTree> },
    Terminal { pos: String, form: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub form: String,
    pub pos: String,
}

impl Leaf {
    pub fn is_trace(&self) -> bool {
        self.pos == TRACE_POS
    }
}

impl PtbTree {
    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Leaf>) {
        match self {
            PtbTree::Terminal { pos, form } => out.push(Leaf {
                form: form.clone(),
                pos: pos.clone(),
            }),
            PtbTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }
}

/// Canonical one-space rendering: `(S (NP (NN w)))`.
impl fmt::Display for PtbTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PtbTree::Terminal { pos, form } => write!(f, "({pos} {form})"),
            PtbTree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn lex(text: &str) -> Vec<Tok<'_>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        match bytes[pos] {
            b'(' => {
                toks.push(Tok::Open(pos));
                pos += 1;
            }
            b')' => {
                toks.push(Tok::Close(pos));
                pos += 1;
            }
            b if b.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < bytes.len()
                    && !bytes[pos].is_ascii_whitespace()
                    && bytes[pos] != b'('
                    && bytes[pos] != b')'
                {
                    pos += 1;
                }
                toks.push(Tok::Atom(start, &text[start..pos]));
            }
        }
    }
    toks
}

/// Intermediate s-expression before terminal detection.
enum Sexp<'a> {
    Atom(&'a str),
    List(usize, Vec<Sexp<'a>>),
}

/// Parses every tree in `text`. A label-less wrapper around a single tree,
/// as in `( (S ...) )`, is removed.
pub fn parse_ptb(text: &str) -> Result<Vec<PtbTree>, PtbError> {
    let toks = lex(text);
    let mut trees = Vec::new();
    let mut stack: Vec<(usize, Vec<Sexp>)> = Vec::new();
    for tok in toks {
        match tok {
            Tok::Open(at) => stack.push((at, Vec::new())),
            Tok::Atom(at, atom) => match stack.last_mut() {
                Some((_, items)) => items.push(Sexp::Atom(atom)),
                None => {
                    return Err(PtbError::MalformedNode {
                        offset: at,
                        reason: "text outside parentheses",
                    })
                }
            },
            Tok::Close(at) => {
                let (start, items) = stack
                    .pop()
                    .ok_or(PtbError::UnbalancedParens { offset: at })?;
                let list = Sexp::List(start, items);
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => trees.push(to_tree(list)?),
                }
            }
        }
    }
    if let Some((at, _)) = stack.first() {
        return Err(PtbError::UnbalancedParens { offset: *at });
    }
    Ok(trees)
}

fn to_tree(sexp: Sexp<'_>) -> Result<PtbTree, PtbError> {
    let Sexp::List(offset, mut items) = sexp else {
        unreachable!("atoms are handled by their parent list")
    };
    if items.is_empty() {
        return Err(PtbError::EmptyTree { offset });
    }
    let label = match &items[0] {
        Sexp::Atom(a) => Some(a.to_string()),
        Sexp::List(..) => None,
    };
    let Some(label) = label else {
        // label-less wrapper
        if items.len() == 1 {
            return to_tree(items.pop().unwrap());
        }
        let children = items.into_iter().map(to_tree).collect::<Result<_, _>>()?;
        return Ok(PtbTree::Node {
            label: String::new(),
            children,
        });
    };
    let rest: Vec<Sexp> = items.drain(1..).collect();
    match rest.as_slice() {
        [] => Err(PtbError::EmptyTree { offset }),
        [Sexp::Atom(form)] => Ok(PtbTree::Terminal {
            pos: label,
            form: form.to_string(),
        }),
        _ => {
            let mut children = Vec::with_capacity(rest.len());
            for item in rest {
                match item {
                    Sexp::Atom(_) => {
                        return Err(PtbError::MalformedNode {
                            offset,
                            reason: "bare word among subtrees",
                        })
                    }
                    list => children.push(to_tree(list)?),
                }
            }
            Ok(PtbTree::Node { label, children })
        }
    }
}
