//! End-to-end annotation: extraction, BILOU repair, span decoding,
//! classification, then abbreviation and formula rules.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::classify::{classify_keyphrase, Forest};
use crate::corpus::{Document, KeyClass, KeyphraseSpan};
use crate::embed::{context_concat, EmbeddingTable};
use crate::error::{Error, Result};
use crate::postprocess::{apply_formula_rule, detect_abbreviations, propagate_abbrev_class};
use crate::train::ExtractorModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(rename = "class")]
    pub klass: KeyClass,
}

/// Annotated text; spans are sorted by start and never overlap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub text: String,
    pub spans: Vec<AnnotatedSpan>,
}

/// Forest plus the embedding table its features come from.
#[derive(Clone, Debug)]
pub struct SpanClassifier {
    forest: Forest,
    table: EmbeddingTable,
}

impl SpanClassifier {
    pub fn new(forest: Forest, table: EmbeddingTable) -> Result<Self> {
        if forest.n_features != 3 * table.dim() {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} features, embedding table gives {}",
                forest.n_features,
                3 * table.dim()
            )));
        }
        Ok(SpanClassifier { forest, table })
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    /// Assigns a class to every span from its tokens' forest votes.
    pub fn classify(&self, doc: &Document, spans: &mut [KeyphraseSpan]) -> Result<()> {
        if spans.is_empty() {
            return Ok(());
        }
        let rows = self.table.lookup_sequence(&doc.tokens);
        for span in spans.iter_mut() {
            let mut votes = Vec::new();
            for t in doc.tokens_overlapping(span.start, span.end) {
                let features = context_concat(rows.view(), t, self.table.unk())?;
                votes.push(self.forest.predict(ArrayView1::from(&features))?.0);
            }
            span.klass = classify_keyphrase(&votes).or(span.klass);
        }
        Ok(())
    }

    /// Classification followed by the abbreviation and formula rules.
    pub fn classify_with_rules(&self, doc: &Document, spans: &mut [KeyphraseSpan]) -> Result<()> {
        self.classify(doc, spans)?;
        let abbrevs = detect_abbreviations(doc);
        propagate_abbrev_class(spans, &abbrevs);
        apply_formula_rule(doc, spans);
        Ok(())
    }
}

/// A frozen extractor and span classifier.
#[derive(Clone, Debug)]
pub struct Annotator {
    extractor: ExtractorModel<f32>,
    table: EmbeddingTable,
    classifier: SpanClassifier,
}

impl Annotator {
    pub fn new(extractor: ExtractorModel<f32>, table: EmbeddingTable, classifier: SpanClassifier) -> Result<Self> {
        if extractor.input_dim() != table.dim() {
            return Err(Error::ShapeMismatch(format!(
                "extractor expects {}-d inputs, embedding table has {} dimensions",
                extractor.input_dim(),
                table.dim()
            )));
        }
        Ok(Annotator {
            extractor,
            table,
            classifier,
        })
    }

    pub fn classifier(&self) -> &SpanClassifier {
        &self.classifier
    }

    /// Untyped keyphrase spans for `doc`.
    pub fn extract(&self, doc: &Document) -> Result<Vec<KeyphraseSpan>> {
        if doc.tokens.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.table.lookup_sequence(&doc.tokens);
        self.extractor.predict_spans(doc, x.view())
    }

    /// Typed spans for `doc`.
    pub fn annotate_document(&self, doc: &Document) -> Result<Vec<KeyphraseSpan>> {
        let mut spans = self.extract(doc)?;
        self.classifier.classify_with_rules(doc, &mut spans)?;
        Ok(spans)
    }

    pub fn annotate(&self, text: &str) -> Result<AnnotationResult> {
        let doc = Document::new("input", text);
        let mut spans = self.annotate_document(&doc)?;
        spans.sort_by_key(|s| (s.start, s.end));
        Ok(AnnotationResult {
            text: text.to_string(),
            spans: spans
                .into_iter()
                .map(|s| AnnotatedSpan {
                    start: s.start,
                    end: s.end,
                    surface: s.surface,
                    klass: s.klass.unwrap_or(KeyClass::Material),
                })
                .collect(),
        })
    }
}
