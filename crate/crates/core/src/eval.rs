//! Exact-match span precision, recall and F1, micro-averaged over a corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{KeyClass, KeyphraseSpan};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Boundaries only.
    Extraction,
    /// Boundaries and class.
    Typed,
    /// Class prediction on gold boundaries.
    ClassificationGivenGold,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "extraction" => Ok(Protocol::Extraction),
            "typed" => Ok(Protocol::Typed),
            "classification" | "classification_given_gold" => Ok(Protocol::ClassificationGivenGold),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<KeyClass, ClassScores>,
}

impl EvalReport {
    pub fn from_counts(
        protocol: Protocol,
        counts: Counts,
        per_class: &BTreeMap<KeyClass, Counts>,
    ) -> Self {
        EvalReport {
            protocol,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            per_class: per_class
                .iter()
                .map(|(&k, c)| {
                    (
                        k,
                        ClassScores {
                            counts: *c,
                            precision: c.precision(),
                            recall: c.recall(),
                            f1: c.f1(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.protocol {
            Protocol::Extraction => "extraction",
            Protocol::Typed => "typed",
            Protocol::ClassificationGivenGold => "classification",
        };
        writeln!(f, "protocol: {name}")?;
        writeln!(f, "tp: {}", self.tp)?;
        writeln!(f, "fp: {}", self.fp)?;
        writeln!(f, "fn: {}", self.fn_)?;
        writeln!(f, "precision: {:.4}", self.precision)?;
        writeln!(f, "recall: {:.4}", self.recall)?;
        write!(f, "f1: {:.4}", self.f1)?;
        for (class, s) in &self.per_class {
            write!(
                f,
                "\n{class}.precision: {:.4}\n{class}.recall: {:.4}\n{class}.f1: {:.4}",
                s.precision, s.recall, s.f1
            )?;
        }
        Ok(())
    }
}

type Key = (usize, usize, Option<KeyClass>);

fn key(span: &KeyphraseSpan, typed: bool) -> Key {
    (span.start, span.end, if typed { span.klass } else { None })
}

/// Counts for one document. Duplicate predictions are dropped with a warning.
pub fn span_counts(
    gold: &[KeyphraseSpan],
    pred: &[KeyphraseSpan],
    typed: bool,
) -> (Counts, BTreeMap<KeyClass, Counts>) {
    let gold_keys: BTreeSet<Key> = gold.iter().map(|s| key(s, typed)).collect();
    let mut pred_keys = BTreeSet::new();
    for s in pred {
        if !pred_keys.insert(key(s, typed)) {
            log::warn!(
                "duplicate prediction ({}, {}, {:?}) ignored",
                s.start,
                s.end,
                s.klass
            );
        }
    }

    let mut counts = Counts::default();
    let mut per_class: BTreeMap<KeyClass, Counts> = BTreeMap::new();
    if typed {
        for c in KeyClass::ALL {
            per_class.insert(c, Counts::default());
        }
    }
    for k in &pred_keys {
        let hit = gold_keys.contains(k);
        if hit {
            counts.tp += 1;
        } else {
            counts.fp += 1;
        }
        if let (true, Some(c)) = (typed, k.2) {
            let e = per_class.entry(c).or_default();
            if hit {
                e.tp += 1;
            } else {
                e.fp += 1;
            }
        }
    }
    for k in gold_keys.difference(&pred_keys) {
        counts.fn_ += 1;
        if let (true, Some(c)) = (typed, k.2) {
            per_class.entry(c).or_default().fn_ += 1;
        }
    }
    (counts, per_class)
}

/// Single-document (or pre-flattened) report.
pub fn span_f1(gold: &[KeyphraseSpan], pred: &[KeyphraseSpan], typed: bool) -> EvalReport {
    let (counts, per_class) = span_counts(gold, pred, typed);
    let protocol = if typed {
        Protocol::Typed
    } else {
        Protocol::Extraction
    };
    EvalReport::from_counts(protocol, counts, &per_class)
}

/// Micro-averaged report over `(gold, pred)` document pairs.
pub fn corpus_span_f1<'a, I>(docs: I, typed: bool) -> EvalReport
where
    I: IntoIterator<Item = (&'a [KeyphraseSpan], &'a [KeyphraseSpan])>,
{
    let mut total = Counts::default();
    let mut per_class: BTreeMap<KeyClass, Counts> = BTreeMap::new();
    for (gold, pred) in docs {
        let (c, pc) = span_counts(gold, pred, typed);
        total += c;
        for (k, v) in pc {
            *per_class.entry(k).or_default() += v;
        }
    }
    let protocol = if typed {
        Protocol::Typed
    } else {
        Protocol::Extraction
    };
    EvalReport::from_counts(protocol, total, &per_class)
}

fn classification_counts(
    gold: &[KeyphraseSpan],
    predicted: &[KeyphraseSpan],
) -> Result<(Counts, BTreeMap<KeyClass, Counts>)> {
    let mut gold_class: HashMap<(usize, usize), Option<KeyClass>> = HashMap::new();
    for s in gold {
        gold_class.entry(s.offsets()).or_insert(s.klass);
    }
    let mut seen = BTreeSet::new();
    let mut counts = Counts::default();
    let mut per_class: BTreeMap<KeyClass, Counts> =
        KeyClass::ALL.iter().map(|&c| (c, Counts::default())).collect();
    let mut correct = BTreeSet::new();
    for p in predicted {
        let Some(&g) = gold_class.get(&p.offsets()) else {
            return Err(Error::UnknownSpan {
                start: p.start,
                end: p.end,
            });
        };
        if !seen.insert(p.offsets()) {
            log::warn!("duplicate class prediction on ({}, {}) ignored", p.start, p.end);
            continue;
        }
        if p.klass.is_some() && p.klass == g {
            counts.tp += 1;
            correct.insert(p.offsets());
            if let Some(c) = p.klass {
                per_class.entry(c).or_default().tp += 1;
            }
        } else {
            counts.fp += 1;
            if let Some(c) = p.klass {
                per_class.entry(c).or_default().fp += 1;
            }
        }
    }
    for (offsets, g) in &gold_class {
        if !correct.contains(offsets) {
            counts.fn_ += 1;
            if let Some(c) = g {
                per_class.entry(*c).or_default().fn_ += 1;
            }
        }
    }
    Ok((counts, per_class))
}

/// Classification scored on gold boundaries: a prediction is a true
/// positive iff its class equals the gold class of the same span.
pub fn classification_given_gold(
    gold: &[KeyphraseSpan],
    predicted: &[KeyphraseSpan],
) -> Result<EvalReport> {
    let (counts, per_class) = classification_counts(gold, predicted)?;
    Ok(EvalReport::from_counts(
        Protocol::ClassificationGivenGold,
        counts,
        &per_class,
    ))
}

/// Corpus-level version of [`classification_given_gold`].
pub fn corpus_classification_given_gold<'a, I>(docs: I) -> Result<EvalReport>
where
    I: IntoIterator<Item = (&'a [KeyphraseSpan], &'a [KeyphraseSpan])>,
{
    let mut total = Counts::default();
    let mut per_class: BTreeMap<KeyClass, Counts> = BTreeMap::new();
    for (gold, pred) in docs {
        let (c, pc) = classification_counts(gold, pred)?;
        total += c;
        for (k, v) in pc {
            *per_class.entry(k).or_default() += v;
        }
    }
    Ok(EvalReport::from_counts(
        Protocol::ClassificationGivenGold,
        total,
        &per_class,
    ))
}
