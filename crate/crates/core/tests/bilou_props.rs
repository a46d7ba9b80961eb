//! Property tests for the BILOU codec, the repair automaton and the tokenizer.

use proptest::prelude::*;
use seal_core::corpus::{bilou_to_spans, chunk_ranges, labels_from_ranges, project_bilou, tokenize};
use seal_core::postprocess::repair_bilou;
use seal_core::{Bilou, Document, KeyphraseSpan};

/// Non-overlapping inclusive token ranges over `n` tokens.
fn ranges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0..3usize, 1..4usize), 0..n).prop_map(move |steps| {
        let mut out = Vec::new();
        let mut pos = 0;
        for (gap, len) in steps {
            let start = pos + gap;
            let end = start + len - 1;
            if end >= n {
                break;
            }
            out.push((start, end));
            pos = end + 1;
        }
        out
    })
}

fn sized_ranges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..40usize).prop_flat_map(|n| (Just(n), ranges(n)))
}

fn label() -> impl Strategy<Value = Bilou> {
    proptest::sample::select(Bilou::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ranges_round_trip((n, rs) in sized_ranges()) {
        let labels = labels_from_ranges(n, &rs);
        prop_assert_eq!(labels.len(), n);
        prop_assert_eq!(chunk_ranges(&labels).unwrap(), rs);
    }

    #[test]
    fn spans_round_trip((n, rs) in sized_ranges(), words in proptest::collection::vec("[a-z]{1,6}", 40)) {
        let text = words[..n].join(" ");
        let mut doc = Document::new("d", text);
        doc.gold_spans = rs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let (start, end) = (doc.tokens[a].start, doc.tokens[b].end);
                KeyphraseSpan {
                    id: format!("T{}", k + 1),
                    klass: None,
                    start,
                    end,
                    surface: doc.substring(start, end).unwrap().to_string(),
                }
            })
            .collect();
        let labels = project_bilou(&doc);
        let back = bilou_to_spans(&doc, &labels).unwrap();
        prop_assert_eq!(back, doc.gold_spans.clone());
    }

    #[test]
    fn repair_decodes_and_is_idempotent(labels in proptest::collection::vec(label(), 0..30)) {
        let fixed = repair_bilou(&labels);
        prop_assert_eq!(fixed.len(), labels.len());
        prop_assert!(chunk_ranges(&fixed).is_ok());
        prop_assert_eq!(repair_bilou(&fixed), fixed);
    }

    #[test]
    fn repair_keeps_valid_sequences((n, rs) in sized_ranges()) {
        let labels = labels_from_ranges(n, &rs);
        prop_assert_eq!(repair_bilou(&labels), labels);
    }

    #[test]
    fn tokens_are_fixpoints(text in "[ a-zA-Z0-9().,;:/\\-–]{0,60}") {
        for tok in tokenize(&text) {
            let again = tokenize(&tok.surface);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&again[0].surface, &tok.surface);
            let slice: String = text.chars().skip(tok.start).take(tok.end - tok.start).collect();
            prop_assert_eq!(slice, tok.surface);
        }
    }
}
