mod common;

use std::fs;

use common::fixture_dir;
use coref_harmonize::conllu::{parse_conllu, serialize_conllu};
use coref_harmonize::convert::{convert, ApposLinking, ConversionConfig, ConversionReport};
use coref_harmonize::model::Document;
use coref_harmonize::ontonotes::{align, parse_onto_coref, parse_ptb, AlignedDocument};
use coref_harmonize::pipeline::convert_pair;
use coref_harmonize::stats::validate;

/// Annotated fixture pairs by stem.
fn pairs() -> Vec<(String, String, String)> {
    let dir = fixture_dir("ontonotes");
    let mut stems: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "coref"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .filter(|s| !s.ends_with("unannotated"))
        .collect();
    stems.sort();
    stems
        .into_iter()
        .map(|s| {
            let coref = fs::read_to_string(dir.join(format!("{s}.coref"))).unwrap();
            let parse = fs::read_to_string(dir.join(format!("{s}.parse"))).unwrap();
            (s, coref, parse)
        })
        .collect()
}

fn aligned(coref: &str, parse: &str) -> AlignedDocument {
    align(&parse_onto_coref(coref).unwrap(), &parse_ptb(parse).unwrap()).unwrap()
}

fn configs() -> Vec<ConversionConfig> {
    let base = ConversionConfig::default();
    vec![
        base.clone(),
        ConversionConfig {
            appos_linking: ApposLinking::SeparateCluster,
            ..base.clone()
        },
        ConversionConfig {
            include_non_coref_zeros: true,
            ..base.clone()
        },
        ConversionConfig {
            zero_insertion: false,
            ..base
        },
    ]
}

#[test]
fn goldens_are_byte_stable() {
    let pairs = pairs();
    assert!(pairs.len() >= 10);
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (stem, coref, parse) in pairs {
        let (text, _) = convert_pair(&coref, &parse, &ConversionConfig::default())
            .unwrap_or_else(|e| panic!("{stem}: {e:?}"))
            .unwrap();
        let path = fixture_dir("ontonotes").join(format!("{stem}.conllu"));
        if update {
            fs::write(&path, &text).unwrap();
        }
        let golden = fs::read_to_string(&path).unwrap_or_else(|_| panic!("{stem}: no golden"));
        assert_eq!(text, golden, "{stem}");
        // converting twice gives the same bytes
        let again = convert_pair(&coref, &parse, &ConversionConfig::default()).unwrap().unwrap();
        assert_eq!(again.0, text, "{stem}");
    }
}

fn check_invariants(stem: &str, a: &AlignedDocument, doc: &Document, report: &ConversionReport, config: &ConversionConfig) {
    report.reconcile(doc, a).unwrap_or_else(|e| panic!("{stem}: {e}"));
    assert_eq!(validate(doc), vec![], "{stem}");
    assert_eq!(
        report.mentions_emitted + report.adjustments(),
        report.ident_spans + report.appos_parts,
        "{stem}"
    );
    assert_eq!(report.zeros_inserted + report.zeros_skipped, a.trace_count(), "{stem}");
    if !config.zero_insertion {
        assert_eq!(report.zeros_inserted, 0, "{stem}");
    }

    for (sentence, source) in doc.sentences.iter().zip(&a.sentences) {
        // surface tokens are exactly the non-trace leaves
        let surface: Vec<&str> = sentence.surface_forms().collect();
        let leaves: Vec<&str> = source
            .leaves
            .iter()
            .filter(|l| !l.is_trace())
            .map(|l| l.form.as_str())
            .collect();
        assert_eq!(surface, leaves, "{stem}");
        // k.j: k surface tokens precede the node, j counts nodes after k
        let mut seen_surface = 0;
        let mut j = 0;
        for t in &sentence.tokens {
            if t.id.is_empty_node() {
                j += 1;
                assert_eq!((t.id.token, t.id.empty), (seen_surface, j), "{stem}");
                assert!(t.misc.starts_with("TraceForm="), "{stem}");
            } else {
                seen_surface += 1;
                j = 0;
                assert_eq!(t.id.token, seen_surface, "{stem}");
            }
        }
    }
    // inserted empty nodes keep the trace order of the source
    let traces: Vec<String> = doc
        .sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .filter(|t| t.id.is_empty_node())
        .map(|t| t.misc.trim_start_matches("TraceForm=").to_string())
        .collect();
    if config.include_non_coref_zeros && config.zero_insertion {
        let all: Vec<String> = a
            .sentences
            .iter()
            .flat_map(|s| &s.leaves)
            .filter(|l| l.is_trace())
            .map(|l| l.form.clone())
            .collect();
        assert_eq!(traces, all, "{stem}");
    }
}

#[test]
fn conversion_invariants_under_every_config() {
    for (stem, coref, parse) in pairs() {
        let a = aligned(&coref, &parse);
        for config in configs() {
            let (doc, report) = convert(&a, &config).unwrap_or_else(|e| panic!("{stem}: {e}"));
            check_invariants(&stem, &a, &doc, &report, &config);
            let text = serialize_conllu(&doc).unwrap();
            assert_eq!(parse_conllu(&text).unwrap(), doc, "{stem}");
        }
    }
}

#[test]
fn fixture_coverage() {
    let pairs = pairs();
    let config = ConversionConfig::default();
    let reports: Vec<(String, ConversionReport)> = pairs
        .iter()
        .map(|(s, c, p)| (s.clone(), convert(&aligned(c, p), &config).unwrap().1))
        .collect();
    let any = |f: &dyn Fn(&ConversionReport) -> bool| reports.iter().any(|(_, r)| f(r));
    assert!(any(&|r| r.zeros_inserted > 0));
    assert!(any(&|r| r.zeros_skipped > 0));
    assert!(any(&|r| r.appos_constructions > 0 && r.appos_parts == 3));
    assert!(any(&|r| r.appos_parts == 4), "APPOS with two ATTRIBs");
    let goldens: String = pairs
        .iter()
        .map(|(s, _, _)| fs::read_to_string(fixture_dir("ontonotes").join(format!("{s}.conllu"))).unwrap())
        .collect();
    assert!(goldens.contains("\n0.1\t"));
    assert!(goldens.contains("\n3.2\t"));
}

#[test]
fn unannotated_pair_is_omitted() {
    let dir = fixture_dir("ontonotes");
    let coref = fs::read_to_string(dir.join("12_unannotated.coref")).unwrap();
    let parse = fs::read_to_string(dir.join("12_unannotated.parse")).unwrap();
    assert_eq!(convert_pair(&coref, &parse, &ConversionConfig::default()).unwrap(), None);
}
