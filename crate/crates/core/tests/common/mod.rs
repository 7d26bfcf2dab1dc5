#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::PathBuf;

use coref_harmonize::model::{ApposRole, ClusterId, Document, NodeId, Sentence, Span, Token};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_dir(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(kind)
}

/// `(file name, contents)` of every file with extension `ext`, sorted.
pub fn fixtures(kind: &str, ext: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(fixture_dir(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_sentences: usize,
    pub max_tokens: usize,
    pub max_mentions: usize,
    pub empty_node_rate: f64,
    pub allow_crossing: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_sentences: 4,
            max_tokens: 10,
            max_mentions: 6,
            empty_node_rate: 0.15,
            allow_crossing: false,
        }
    }
}

const FORMS: &[&str] = &["the", "cat", "Ali", "كتب", "الرسالة", "في", "على", "هو", ",", "."];
const ETYPES: &[&str] = &["_", "person", "place", "شخص"];

fn crosses(a: Span, b: Span) -> bool {
    let overlap = a.start <= b.end && b.start <= a.end;
    let a_in_b = b.start <= a.start && a.end <= b.end;
    let b_in_a = a.start <= b.start && b.end <= a.end;
    overlap && !a_in_b && !b_in_a
}

/// A random valid document with canonical ids.
pub fn random_document<R: Rng>(rng: &mut R, shape: Shape) -> Document {
    let mut doc = Document::new(format!("doc{}", rng.gen_range(0..1000)));
    let n_sent = rng.gen_range(1..=shape.max_sentences);
    for k in 0..n_sent {
        let mut s = Sentence::new(format!("{}-s{}", doc.doc_id, k + 1));
        let n_tok = rng.gen_range(1..=shape.max_tokens);
        for anchor in 0..=n_tok as u32 {
            if anchor > 0 {
                let mut t = Token::bare(NodeId::surface(anchor), *FORMS.choose(rng).unwrap());
                if rng.gen_bool(0.1) {
                    t.misc = "SpaceAfter=No".into();
                }
                s.push_surface(t);
            }
            while rng.gen_bool(shape.empty_node_rate) {
                let mut t = Token::bare(NodeId::surface(1), "_");
                t.misc = "TraceForm=*".into();
                s.insert_empty(anchor, t);
            }
        }
        doc.sentences.push(s);
    }

    let n_mentions = rng.gen_range(0..=shape.max_mentions);
    let mut placed: Vec<(usize, Span)> = Vec::new();
    for _ in 0..n_mentions * 3 {
        if doc.mention_count() >= n_mentions {
            break;
        }
        let sentence = rng.gen_range(0..doc.sentences.len());
        let nodes = &doc.sentences[sentence].tokens;
        let i = rng.gen_range(0..nodes.len());
        let j = rng.gen_range(i..nodes.len().min(i + 5));
        let span = Span::new(nodes[i].id, nodes[j].id);
        if !shape.allow_crossing
            && placed
                .iter()
                .any(|(s, other)| *s == sentence && crosses(span, *other))
        {
            continue;
        }
        let cluster = ClusterId::new(rng.gen_range(1..=3)).unwrap();
        let len = (j - i + 1) as u32;
        let head = rng.gen_bool(0.3).then(|| rng.gen_range(1..=len));
        let appos = if rng.gen_bool(0.2) {
            Some(*[ApposRole::Span, ApposRole::Head, ApposRole::Attrib].choose(rng).unwrap())
        } else {
            None
        };
        if doc
            .insert_mention(cluster, sentence, span, head, appos)
            .is_ok()
        {
            placed.push((sentence, span));
        }
    }
    let ids: Vec<ClusterId> = doc.clusters().map(|c| c.id).collect();
    for id in ids {
        doc.set_cluster_etype(id, *ETYPES.choose(rng).unwrap()).unwrap();
    }
    doc.normalize_ids()
}
