//! Synthetic corpora for smoke tests and benchmarks.
//!
//! Keyphrases are wrapped in the sentinels `⟨KP` and `KP⟩`, so boundaries
//! are recoverable from context alone. Keyphrase words come from a
//! per-class vocabulary which also leaks into filler text, forcing the
//! extractor to rely on the sentinels.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Document, KeyClass, KeyphraseSpan};
use crate::embed::EmbeddingTable;

pub const OPEN_SENTINEL: &str = "⟨KP";
pub const CLOSE_SENTINEL: &str = "KP⟩";

#[derive(Clone, Debug)]
pub struct SyntheticOptions {
    pub documents: usize,
    pub dim: usize,
    pub seed: u64,
    pub min_filler: usize,
    pub max_filler: usize,
    pub max_phrases: usize,
    pub max_phrase_len: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            documents: 500,
            dim: 16,
            seed: 7,
            min_filler: 6,
            max_filler: 14,
            max_phrases: 3,
            max_phrase_len: 4,
        }
    }
}

pub struct SyntheticCorpus {
    pub docs: Vec<Document>,
    pub table: EmbeddingTable,
}

fn class_vocab(class: KeyClass) -> Vec<String> {
    let stem = match class {
        KeyClass::Task => "task",
        KeyClass::Process => "proc",
        KeyClass::Material => "mat",
    };
    (0..12).map(|i| format!("{stem}{i}")).collect()
}

/// Generates a sentinel-flanked corpus and a random embedding table covering its vocabulary.
pub fn sentinel_corpus(opts: &SyntheticOptions) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let filler: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let vocab: Vec<(KeyClass, Vec<String>)> = KeyClass::ALL.iter().map(|&c| (c, class_vocab(c))).collect();

    let mut docs = Vec::with_capacity(opts.documents);
    for d in 0..opts.documents {
        let mut words: Vec<(String, Option<(usize, KeyClass)>)> = Vec::new();
        let n_phrases = rng.gen_range(1..=opts.max_phrases);
        let mut phrase_id = 0;
        let n_filler = rng.gen_range(opts.min_filler..=opts.max_filler);
        let slots: Vec<usize> = {
            let mut s: Vec<usize> = (0..=n_filler).collect();
            s.shuffle(&mut rng);
            let mut s = s[..n_phrases.min(n_filler + 1)].to_vec();
            s.sort_unstable();
            s
        };
        for k in 0..=n_filler {
            if slots.contains(&k) {
                let (class, words_for) = &vocab[rng.gen_range(0..vocab.len())];
                let len = rng.gen_range(1..=opts.max_phrase_len);
                words.push((OPEN_SENTINEL.to_string(), None));
                for _ in 0..len {
                    let w = words_for.choose(&mut rng).unwrap().clone();
                    words.push((w, Some((phrase_id, *class))));
                }
                words.push((CLOSE_SENTINEL.to_string(), None));
                phrase_id += 1;
            }
            if k < n_filler {
                let w = if rng.gen_bool(0.2) {
                    let (_, v) = &vocab[rng.gen_range(0..vocab.len())];
                    v.choose(&mut rng).unwrap().clone()
                } else {
                    filler.choose(&mut rng).unwrap().clone()
                };
                words.push((w, None));
            }
        }
        words.push((".".to_string(), None));

        let mut text = String::new();
        let mut spans: Vec<KeyphraseSpan> = Vec::new();
        let mut pos = 0usize;
        for (i, (w, tag)) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            let len = w.chars().count();
            if let Some((pid, class)) = tag {
                match spans.get_mut(*pid) {
                    Some(s) => s.end = pos + len,
                    None => spans.push(KeyphraseSpan {
                        id: format!("T{}", pid + 1),
                        klass: Some(*class),
                        start: pos,
                        end: pos + len,
                        surface: String::new(),
                    }),
                }
            }
            text.push_str(w);
            pos += len;
        }
        let mut doc = Document::new(format!("syn{d:04}"), text);
        for s in &mut spans {
            s.surface = doc.substring(s.start, s.end).unwrap_or_default().to_string();
        }
        doc.gold_spans = spans;
        docs.push(doc);
    }

    let mut words: Vec<String> = filler;
    for (_, v) in &vocab {
        words.extend(v.iter().cloned());
    }
    for piece in tokenize(&format!("{OPEN_SENTINEL} {CLOSE_SENTINEL} .")) {
        let w = piece.surface.to_lowercase();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    let pairs: Vec<(String, Vec<f32>)> = words
        .into_iter()
        .map(|w| {
            let v = (0..opts.dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            (w, v)
        })
        .collect();
    let table = EmbeddingTable::from_pairs(opts.dim, pairs).expect("consistent dimensions");
    SyntheticCorpus { docs, table }
}
