//! Brute-force reference computations. Everything here works on explicit
//! node sets rather than interval arithmetic.

use std::collections::BTreeSet;

use coref_harmonize::model::{ApposRole, Document, NodeId};
use coref_harmonize::stats::{CorpusStats, LabelCounts};

/// Nodes of the mention's sentence whose id lies between the endpoints.
pub fn node_set(doc: &Document, sentence: usize, start: NodeId, end: NodeId) -> BTreeSet<NodeId> {
    doc.sentences[sentence]
        .tokens
        .iter()
        .map(|t| t.id)
        .filter(|id| start <= *id && *id <= end)
        .collect()
}

pub fn stats(docs: &[Document]) -> CorpusStats {
    let mut st = CorpusStats::default();
    for doc in docs {
        st.documents += 1;
        st.total_sentences += doc.sentences.len() as u64;
        st.total_mentions += doc.mentions().count() as u64;
        st.total_clusters += doc.clusters().count() as u64;
        for (index, sentence) in doc.sentences.iter().enumerate() {
            let surface: Vec<NodeId> = sentence
                .tokens
                .iter()
                .map(|t| t.id)
                .filter(|id| id.empty == 0)
                .collect();
            st.total_tokens += surface.len() as u64;
            st.total_empty_nodes += (sentence.tokens.len() - surface.len()) as u64;

            let ms: Vec<_> = doc
                .mentions()
                .filter(|m| m.sentence == index)
                .map(|m| (m, node_set(doc, index, m.span.start, m.span.end)))
                .collect();
            for (m, nodes) in &ms {
                if nodes.iter().filter(|n| n.empty == 0).count() == 1 {
                    st.single_token_mentions += 1;
                }
                let inside = ms
                    .iter()
                    .any(|(o, other)| o.id != m.id && nodes.is_subset(other) && nodes != other);
                if inside {
                    st.nested_mentions += 1;
                }
                match m.appos {
                    Some(ApposRole::Head) => st.label_mentions.head += 1,
                    Some(ApposRole::Attrib) => st.label_mentions.attrib += 1,
                    Some(ApposRole::Span) => st.label_mentions.span += 1,
                    None => {}
                }
            }
            for token in &surface {
                let covering: Vec<_> = ms.iter().filter(|(_, n)| n.contains(token)).collect();
                if !covering.is_empty() {
                    st.tokens_in_entity += 1;
                }
                if covering.len() >= 2 {
                    st.nested_tokens += 1;
                }
                let has = |role| covering.iter().any(|(m, _)| m.appos == Some(role));
                st.label_tokens = LabelCounts {
                    head: st.label_tokens.head + has(ApposRole::Head) as u64,
                    attrib: st.label_tokens.attrib + has(ApposRole::Attrib) as u64,
                    span: st.label_tokens.span + has(ApposRole::Span) as u64,
                };
            }
        }
    }
    st
}
