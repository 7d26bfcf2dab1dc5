mod common;

use std::collections::BTreeSet;

use common::{random_document, Shape};
use coref_harmonize::model::{span_relation, Nesting, NodeId, Sentence, Span, Token};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flipped(n: Nesting) -> Nesting {
    match n {
        Nesting::AInsideB => Nesting::BInsideA,
        Nesting::BInsideA => Nesting::AInsideB,
        other => other,
    }
}

fn set_relation(a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> Nesting {
    if a == b {
        Nesting::Equal
    } else if a.is_disjoint(b) {
        Nesting::Disjoint
    } else if a.is_subset(b) {
        Nesting::AInsideB
    } else if b.is_subset(a) {
        Nesting::BInsideA
    } else {
        Nesting::Crossing
    }
}

/// Every pair of spans over every sentence shape of up to eight nodes,
/// compared against explicit node sets.
#[test]
fn relation_matches_node_sets_exhaustively() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        let n = rng.gen_range(1..=8);
        let mut s = Sentence::new("s");
        let mut anchor = 0;
        while s.tokens.len() < n {
            if anchor > 0 && rng.gen_bool(0.3) || anchor == 0 && rng.gen_bool(0.2) {
                s.insert_empty(anchor, Token::bare(NodeId::surface(1), "_"));
            } else {
                anchor += 1;
                s.push_surface(Token::bare(NodeId::surface(1), "w"));
            }
        }
        let ids: Vec<NodeId> = s.tokens.iter().map(|t| t.id).collect();
        let spans: Vec<(Span, BTreeSet<NodeId>)> = (0..ids.len())
            .flat_map(|i| (i..ids.len()).map(move |j| (i, j)))
            .map(|(i, j)| (Span::new(ids[i], ids[j]), ids[i..=j].iter().copied().collect()))
            .collect();
        for (a, sa) in &spans {
            for (b, sb) in &spans {
                let rel = span_relation(*a, *b);
                assert_eq!(rel, set_relation(sa, sb), "{a} vs {b}");
                assert_eq!(span_relation(*b, *a), flipped(rel));
            }
        }
    }
}

proptest! {
    #[test]
    fn every_mention_has_exactly_one_cluster(seed in any::<u64>()) {
        let doc = random_document(&mut ChaCha8Rng::seed_from_u64(seed), Shape::default());
        for m in doc.mentions() {
            let owners: Vec<_> = doc.clusters().filter(|c| c.mentions.contains(&m.id)).collect();
            prop_assert_eq!(owners.len(), 1);
            prop_assert_eq!(doc.cluster_of(m.id).unwrap().id, m.cluster);
        }
    }

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let doc = random_document(&mut ChaCha8Rng::seed_from_u64(seed), Shape::default());
        let again = doc.clone().normalize_ids();
        prop_assert_eq!(&again, &doc);
        let numbers: Vec<u32> = again.clusters().map(|c| c.id.number()).collect();
        prop_assert_eq!(numbers, (1..=again.cluster_count() as u32).collect::<Vec<_>>());
    }
}
