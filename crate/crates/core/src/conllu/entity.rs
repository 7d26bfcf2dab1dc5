//! The `Entity=` MISC value: bracket units that open, close, or fully
//! enclose a mention on one node.
//!
//! ```text
//! value  := unit+
//! unit   := single | open | close
//! single := "(" eid fields? ")"
//! open   := "(" eid fields?
//! close  := eid ")"
//! eid    := "e" digits
//! fields := "-" etype ( "-" head ( "-" other )? )?
//! ```

use std::fmt::Write;

use thiserror::Error;

use crate::model::ClusterId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntityError {
    #[error("malformed entity value at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: &'static str },
    #[error("entity events out of canonical order at event {index}: {reason}")]
    BadOrdering { index: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Close,
    Open,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityEvent {
    pub kind: EventKind,
    pub cluster: ClusterId,
    pub etype: Option<String>,
    pub head: Option<u32>,
    pub other: Option<String>,
}

impl EntityEvent {
    pub fn close(cluster: ClusterId) -> Self {
        EntityEvent {
            kind: EventKind::Close,
            cluster,
            etype: None,
            head: None,
            other: None,
        }
    }

    pub fn open(cluster: ClusterId) -> Self {
        EntityEvent {
            kind: EventKind::Open,
            ..EntityEvent::close(cluster)
        }
    }

    pub fn single(cluster: ClusterId) -> Self {
        EntityEvent {
            kind: EventKind::Single,
            ..EntityEvent::close(cluster)
        }
    }

    pub fn with_fields(mut self, etype: &str, head: Option<u32>, other: Option<&str>) -> Self {
        self.etype = Some(etype.to_string());
        self.head = head;
        self.other = other.map(str::to_string);
        self
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn fail<T>(&self, reason: &'static str) -> Result<T, EntityError> {
        Err(EntityError::Malformed {
            offset: self.pos,
            reason,
        })
    }

    fn take_while(&mut self, keep: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(&keep) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn cluster(&mut self) -> Result<ClusterId, EntityError> {
        if self.peek() != Some(b'e') {
            return self.fail("expected cluster id `e<digits>`");
        }
        let start = self.pos;
        self.pos += 1;
        let digits = self.take_while(|b| b.is_ascii_digit());
        if digits.is_empty() {
            return self.fail("cluster id without digits");
        }
        self.src[start..self.pos]
            .parse()
            .or_else(|_| self.fail("cluster id must be e<k> with k >= 1, no leading zeros"))
    }
}

/// Parses an `Entity=` payload into events in textual order.
pub fn parse_entity_attr(value: &str) -> Result<Vec<EntityEvent>, EntityError> {
    let mut cur = Cursor { src: value, pos: 0 };
    let mut events = Vec::new();
    if value.is_empty() {
        return cur.fail("empty value");
    }
    while let Some(b) = cur.peek() {
        match b {
            b'(' => {
                cur.pos += 1;
                let cluster = cur.cluster()?;
                let mut event = EntityEvent::open(cluster);
                if cur.peek() == Some(b'-') {
                    cur.pos += 1;
                    let etype = cur.take_while(|b| !matches!(b, b'-' | b'(' | b')'));
                    if etype.is_empty() {
                        return cur.fail("empty entity type");
                    }
                    event.etype = Some(etype.to_string());
                    if cur.peek() == Some(b'-') {
                        cur.pos += 1;
                        let head = cur.take_while(|b| b.is_ascii_digit());
                        match head.parse::<u32>() {
                            Ok(h) if h > 0 && !head.starts_with('0') => event.head = Some(h),
                            _ => return cur.fail("head must be a positive integer"),
                        }
                        if cur.peek() == Some(b'-') {
                            cur.pos += 1;
                            let other = cur.take_while(|b| !matches!(b, b'(' | b')'));
                            if other.is_empty() {
                                return cur.fail("empty other field");
                            }
                            event.other = Some(other.to_string());
                        }
                    }
                }
                match cur.peek() {
                    Some(b')') => {
                        cur.pos += 1;
                        event.kind = EventKind::Single;
                    }
                    None | Some(b'(') | Some(b'e') => {}
                    _ => return cur.fail("unexpected character after opening unit"),
                }
                events.push(event);
            }
            b'e' => {
                let cluster = cur.cluster()?;
                if cur.peek() != Some(b')') {
                    return cur.fail("closing unit must end with `)`");
                }
                cur.pos += 1;
                events.push(EntityEvent::close(cluster));
            }
            _ => return cur.fail("expected `(` or a closing cluster id"),
        }
    }
    Ok(events)
}

/// Writes events back to their textual form. The events must already be in
/// canonical order: closes, then opens, then singles sorted by cluster.
pub fn serialize_entity_attr(events: &[EntityEvent]) -> Result<String, EntityError> {
    let mut out = String::new();
    for (index, pair) in events.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if a.kind > b.kind {
            return Err(EntityError::BadOrdering {
                index: index + 1,
                reason: "closes, opens and singles must appear in that order",
            });
        }
        if a.kind == EventKind::Single && b.kind == EventKind::Single && a.cluster > b.cluster {
            return Err(EntityError::BadOrdering {
                index: index + 1,
                reason: "singles must be sorted by cluster id",
            });
        }
    }
    for (index, ev) in events.iter().enumerate() {
        let field_error = |reason| Err(EntityError::BadOrdering { index, reason });
        match ev.kind {
            EventKind::Close => {
                if ev.etype.is_some() || ev.head.is_some() || ev.other.is_some() {
                    return field_error("close events carry only a cluster id");
                }
                write!(out, "{})", ev.cluster).unwrap();
            }
            EventKind::Open | EventKind::Single => {
                if ev.etype.is_none() && (ev.head.is_some() || ev.other.is_some()) {
                    return field_error("head or other given without an entity type");
                }
                if ev.head.is_none() && ev.other.is_some() {
                    return field_error("other given without a head");
                }
                write!(out, "({}", ev.cluster).unwrap();
                if let Some(etype) = &ev.etype {
                    write!(out, "-{etype}").unwrap();
                }
                if let Some(head) = ev.head {
                    write!(out, "-{head}").unwrap();
                }
                if let Some(other) = &ev.other {
                    write!(out, "-{other}").unwrap();
                }
                if ev.kind == EventKind::Single {
                    out.push(')');
                }
            }
        }
    }
    Ok(out)
}
