//! Documents, tokens, keyphrase spans and the BILOU label codec.
//!
//! Character offsets everywhere in this module are Unicode code-point
//! offsets, the convention used by BRAT standoff files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic category of a keyphrase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KeyClass {
    Task,
    Process,
    Material,
}

impl KeyClass {
    pub const ALL: [KeyClass; 3] = [KeyClass::Task, KeyClass::Process, KeyClass::Material];

    /// Priority used to break voting ties: Material > Process > Task.
    pub const TIE_BREAK: [KeyClass; 3] = [KeyClass::Material, KeyClass::Process, KeyClass::Task];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<KeyClass> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KeyClass::Task => "Task",
            KeyClass::Process => "Process",
            KeyClass::Material => "Material",
        }
    }

    /// Plurality winner over per-class counts, ties resolved by [`KeyClass::TIE_BREAK`].
    pub fn plurality(counts: &[u32; 3]) -> KeyClass {
        let max = counts.iter().copied().max().unwrap_or(0);
        Self::TIE_BREAK
            .into_iter()
            .find(|c| counts[c.index()] == max)
            .unwrap_or(KeyClass::Material)
    }
}

impl fmt::Display for KeyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeyClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Task" => Ok(KeyClass::Task),
            "Process" => Ok(KeyClass::Process),
            "Material" => Ok(KeyClass::Material),
            other => Err(format!("unknown keyphrase class {other:?}")),
        }
    }
}

/// Token-level chunk label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bilou {
    B,
    I,
    L,
    O,
    U,
}

pub const LABEL_COUNT: usize = 5;

impl Bilou {
    pub const ALL: [Bilou; LABEL_COUNT] = [Bilou::B, Bilou::I, Bilou::L, Bilou::O, Bilou::U];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Bilou> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bilou::B => "B",
            Bilou::I => "I",
            Bilou::L => "L",
            Bilou::O => "O",
            Bilou::U => "U",
        }
    }
}

impl fmt::Display for Bilou {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bilou {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "B" => Ok(Bilou::B),
            "I" => Ok(Bilou::I),
            "L" => Ok(Bilou::L),
            "O" => Ok(Bilou::O),
            "U" => Ok(Bilou::U),
            other => Err(format!("unknown BILOU label {other:?}")),
        }
    }
}

pub type LabelSequence = Vec<Bilou>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyphraseSpan {
    pub id: String,
    #[serde(rename = "class")]
    pub klass: Option<KeyClass>,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl KeyphraseSpan {
    pub fn offsets(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub gold_spans: Vec<KeyphraseSpan>,
}

impl Document {
    /// Tokenizes `text`; no gold spans.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            id: id.into(),
            text,
            tokens,
            gold_spans: Vec::new(),
        }
    }

    /// Tokenizes `text` and attaches the T-lines of `ann` as gold spans.
    pub fn with_annotations(id: impl Into<String>, text: impl Into<String>, ann: &str) -> Result<Self> {
        let mut doc = Document::new(id, text);
        doc.gold_spans = parse_brat(ann, &doc)?;
        Ok(doc)
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// `text[start, end)` in code points, or `None` when out of range.
    pub fn substring(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.text, start, end)
    }

    /// Index range of tokens overlapping the character range `[start, end)`.
    pub fn tokens_overlapping(&self, start: usize, end: usize) -> std::ops::Range<usize> {
        let first = self.tokens.partition_point(|t| t.end <= start);
        let mut last = first;
        while last < self.tokens.len() && self.tokens[last].start < end {
            last += 1;
        }
        first..last
    }
}

pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b0 = indices.nth(start)?;
    let b1 = if end == start {
        b0
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b0..b1])
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn is_internal_separator(c: char) -> bool {
    matches!(
        c,
        '-' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '/' | '(' | ')'
    )
}

/// Splits `text` into tokens with code-point offsets.
///
/// Whitespace separates chunks; each chunk sheds leading and trailing
/// punctuation one character at a time, and hyphens, slashes and
/// parentheses inside it become tokens of their own. Letters and digits
/// stay together, so `NaCl2` is a single token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map(|&(b, _)| b).unwrap_or(text.len());

    let mut ranges = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].1.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].1.is_whitespace() {
            i += 1;
        }
        let chunk: Vec<char> = chars[start..i].iter().map(|&(_, c)| c).collect();
        split_chunk(&chunk, start, &mut ranges);
    }

    ranges
        .into_iter()
        .map(|(s, e)| Token {
            surface: text[byte_at(s)..byte_at(e)].to_string(),
            start: s,
            end: e,
        })
        .collect()
}

fn split_chunk(chunk: &[char], offset: usize, out: &mut Vec<(usize, usize)>) {
    let mut lo = 0;
    let mut hi = chunk.len();
    while lo < hi && is_punct(chunk[lo]) {
        out.push((offset + lo, offset + lo + 1));
        lo += 1;
    }
    let mut trailing = Vec::new();
    while hi > lo && is_punct(chunk[hi - 1]) {
        hi -= 1;
        trailing.push(hi);
    }

    let mut piece_start = lo;
    let mut split = false;
    for k in lo..hi {
        if is_internal_separator(chunk[k]) {
            split = true;
            if piece_start < k {
                split_chunk(&chunk[piece_start..k], offset + piece_start, out);
            }
            out.push((offset + k, offset + k + 1));
            piece_start = k + 1;
        }
    }
    if piece_start < hi {
        if split {
            split_chunk(&chunk[piece_start..hi], offset + piece_start, out);
        } else {
            out.push((offset + piece_start, offset + hi));
        }
    }

    for &k in trailing.iter().rev() {
        out.push((offset + k, offset + k + 1));
    }
}

/// Parses the T-lines of a BRAT standoff file against `doc.text`.
///
/// Relation, attribute and note lines are skipped. Types other than
/// Task/Process/Material produce untyped spans.
pub fn parse_brat(ann_text: &str, doc: &Document) -> Result<Vec<KeyphraseSpan>> {
    let text_len = doc.char_len();
    let mut spans = Vec::new();
    for (i, raw) in ann_text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if !line.starts_with('T') {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedLine {
            line: line_no,
            reason: reason.to_string(),
        };
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let body = fields.next().ok_or_else(|| malformed("missing type/offset field"))?;
        let annotated = fields.next().ok_or_else(|| malformed("missing surface field"))?;

        let parts: Vec<&str> = body.split(' ').collect();
        if parts.len() != 3 {
            return Err(malformed("expected `<Type> <start> <end>`"));
        }
        let klass = parts[0].parse::<KeyClass>().ok();
        let start: usize = parts[1].parse().map_err(|_| malformed("non-integer start offset"))?;
        let end: usize = parts[2].parse().map_err(|_| malformed("non-integer end offset"))?;
        if start >= end || end > text_len {
            return Err(malformed(&format!(
                "offsets ({start}, {end}) invalid for text of length {text_len}"
            )));
        }
        let found = doc.substring(start, end).unwrap_or_default();
        if found != annotated {
            return Err(Error::SurfaceMismatch {
                line: line_no,
                annotated: annotated.to_string(),
                found: found.to_string(),
            });
        }
        spans.push(KeyphraseSpan {
            id: id.to_string(),
            klass,
            start,
            end,
            surface: found.to_string(),
        });
    }
    Ok(spans)
}

/// Writes spans as BRAT T-lines. Untyped spans are written with type `Keyphrase`.
pub fn write_brat(spans: &[KeyphraseSpan]) -> String {
    let mut out = String::new();
    for (i, s) in spans.iter().enumerate() {
        let ty = s.klass.map(KeyClass::as_str).unwrap_or("Keyphrase");
        let id = if s.id.is_empty() {
            format!("T{}", i + 1)
        } else {
            s.id.clone()
        };
        out.push_str(&format!("{id}\t{ty} {} {}\t{}\n", s.start, s.end, s.surface));
    }
    out
}

/// A gold span expanded to whole tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnappedSpan {
    /// Index into `doc.gold_spans`.
    pub span_index: usize,
    pub first_token: usize,
    /// Inclusive.
    pub last_token: usize,
}

impl SnappedSpan {
    pub fn token_count(&self) -> usize {
        self.last_token - self.first_token + 1
    }
}

/// Snaps gold spans to token boundaries and drops overlaps.
///
/// A span cutting through a token grows to cover it. When two snapped
/// spans share a token the longer one (by tokens, then characters) is
/// kept and a warning is logged. Output is sorted by first token.
pub fn snap_spans(doc: &Document) -> Vec<SnappedSpan> {
    let mut candidates: Vec<SnappedSpan> = Vec::new();
    for (idx, span) in doc.gold_spans.iter().enumerate() {
        let range = doc.tokens_overlapping(span.start, span.end);
        if range.is_empty() {
            log::warn!(
                "{}: span {} ({}, {}) covers no token; dropped",
                doc.id,
                span.id,
                span.start,
                span.end
            );
            continue;
        }
        candidates.push(SnappedSpan {
            span_index: idx,
            first_token: range.start,
            last_token: range.end - 1,
        });
    }

    candidates.sort_by(|a, b| {
        let la = &doc.gold_spans[a.span_index];
        let lb = &doc.gold_spans[b.span_index];
        b.token_count()
            .cmp(&a.token_count())
            .then((lb.end - lb.start).cmp(&(la.end - la.start)))
            .then(a.first_token.cmp(&b.first_token))
            .then(a.span_index.cmp(&b.span_index))
    });

    let mut taken = vec![false; doc.tokens.len()];
    let mut kept = Vec::new();
    for cand in candidates {
        if taken[cand.first_token..=cand.last_token].iter().any(|&t| t) {
            let span = &doc.gold_spans[cand.span_index];
            log::warn!(
                "{}: span {} {:?} overlaps a longer span after snapping; dropped",
                doc.id,
                span.id,
                span.surface
            );
            continue;
        }
        taken[cand.first_token..=cand.last_token].fill(true);
        kept.push(cand);
    }
    kept.sort_by_key(|s| s.first_token);
    kept
}

/// Labels from inclusive token ranges, assumed non-overlapping.
pub fn labels_from_ranges(token_count: usize, ranges: &[(usize, usize)]) -> LabelSequence {
    let mut labels = vec![Bilou::O; token_count];
    for &(first, last) in ranges {
        if first == last {
            labels[first] = Bilou::U;
        } else {
            labels[first] = Bilou::B;
            labels[first + 1..last].fill(Bilou::I);
            labels[last] = Bilou::L;
        }
    }
    labels
}

/// Projects the document's gold spans onto its tokens as BILOU labels.
pub fn project_bilou(doc: &Document) -> LabelSequence {
    let ranges: Vec<(usize, usize)> = snap_spans(doc)
        .iter()
        .map(|s| (s.first_token, s.last_token))
        .collect();
    labels_from_ranges(doc.tokens.len(), &ranges)
}

/// Inclusive token ranges of the chunks in a valid BILOU sequence.
pub fn chunk_ranges(labels: &[Bilou]) -> Result<Vec<(usize, usize)>> {
    let mut ranges = Vec::new();
    let mut open: Option<usize> = None;
    for (t, &label) in labels.iter().enumerate() {
        match (label, open) {
            (Bilou::O, None) => {}
            (Bilou::U, None) => ranges.push((t, t)),
            (Bilou::B, None) => open = Some(t),
            (Bilou::I, Some(_)) => {}
            (Bilou::L, Some(s)) => {
                ranges.push((s, t));
                open = None;
            }
            _ => return Err(Error::InvalidSequence { position: t }),
        }
    }
    if open.is_some() {
        return Err(Error::InvalidSequence {
            position: labels.len(),
        });
    }
    Ok(ranges)
}

/// Decodes a valid BILOU sequence into untyped spans over `doc`.
pub fn bilou_to_spans(doc: &Document, labels: &[Bilou]) -> Result<Vec<KeyphraseSpan>> {
    if labels.len() != doc.tokens.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: doc.tokens.len(),
        });
    }
    let ranges = chunk_ranges(labels)?;
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(k, (first, last))| {
            let start = doc.tokens[first].start;
            let end = doc.tokens[last].end;
            KeyphraseSpan {
                id: format!("T{}", k + 1),
                klass: None,
                start,
                end,
                surface: doc.substring(start, end).unwrap_or_default().to_string(),
            }
        })
        .collect())
}

/// Loads every `<id>.txt` in `dir`, attaching `<id>.ann` when present.
/// Documents are sorted by id.
pub fn load_split(dir: &Path) -> Result<Vec<Document>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut txt_paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            txt_paths.push(path);
        }
    }
    txt_paths.sort();

    let mut docs = Vec::with_capacity(txt_paths.len());
    for txt in txt_paths {
        let id = txt
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
        let ann_path = txt.with_extension("ann");
        let doc = if ann_path.exists() {
            let ann = fs::read_to_string(&ann_path).map_err(|e| Error::io(&ann_path, e))?;
            Document::with_annotations(id, text, &ann).map_err(|e| e.in_file(&ann_path))?
        } else {
            Document::new(id, text)
        };
        docs.push(doc);
    }
    Ok(docs)
}
