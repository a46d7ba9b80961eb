//! Rule-based refinement of extracted and classified keyphrases.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use crate::corpus::{Bilou, Document, KeyClass, KeyphraseSpan};

/// Rewrites any label sequence into a decodable BILOU sequence.
///
/// Scanning left to right: `I`/`L` with no open chunk opens one (as `B`);
/// an open chunk interrupted by `O`, `U`, `B` or the end of the sequence is
/// closed on its last token (`L`, or `U` when it is a single token). `U`
/// is never modified and valid input comes back unchanged.
pub fn repair_bilou(labels: &[Bilou]) -> Vec<Bilou> {
    fn close(out: &mut [Bilou], open: &mut Option<usize>, end: usize) {
        if let Some(s) = open.take() {
            if s + 1 == end {
                out[s] = Bilou::U;
            } else {
                out[end - 1] = Bilou::L;
            }
        }
    }

    let mut out = labels.to_vec();
    let mut open: Option<usize> = None;
    for t in 0..out.len() {
        match out[t] {
            Bilou::O | Bilou::U => close(&mut out, &mut open, t),
            Bilou::B => {
                close(&mut out, &mut open, t);
                open = Some(t);
            }
            Bilou::I => {
                if open.is_none() {
                    out[t] = Bilou::B;
                    open = Some(t);
                }
            }
            Bilou::L => {
                if open.is_some() {
                    open = None;
                } else {
                    out[t] = Bilou::B;
                    open = Some(t);
                }
            }
        }
    }
    let n = out.len();
    close(&mut out, &mut open, n);
    out
}

/// Long form of an abbreviation at its first definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbbrevEntry {
    /// Token range of the long form, `[first, last)`.
    pub long_tokens: (usize, usize),
    /// Character range of the long form.
    pub long_chars: (usize, usize),
    /// Token index of the short form.
    pub position: usize,
}

pub type AbbrevMap = BTreeMap<String, AbbrevEntry>;

fn is_short_form(s: &str) -> bool {
    let n = s.chars().count();
    if !(2..=10).contains(&n) {
        return false;
    }
    if !s.chars().all(|c| c.is_alphanumeric() || c == '-') {
        return false;
    }
    if !s.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return false;
    }
    if !s.chars().any(char::is_alphabetic) {
        return false;
    }
    let strong = s.chars().filter(|c| c.is_uppercase() || c.is_ascii_digit()).count();
    strong * 10 >= n * 6
}

fn is_word(s: &str) -> bool {
    s.chars().any(char::is_alphanumeric)
}

fn is_joiner(s: &str) -> bool {
    matches!(s, "-" | "/" | "\u{2010}" | "\u{2011}" | "\u{2013}")
}

/// Finds `long form ( SHORT )` definitions; the first definition of each short form wins.
///
/// The long form is the run of word tokens before the parenthesis whose
/// length equals the number of letters in the short form. Its first
/// letter must match the short form's first letter.
pub fn detect_abbreviations(doc: &Document) -> AbbrevMap {
    let toks = &doc.tokens;
    let mut map = AbbrevMap::new();
    for p in 1..toks.len().saturating_sub(2) {
        if toks[p].surface != "(" || toks[p + 2].surface != ")" {
            continue;
        }
        let short = &toks[p + 1].surface;
        if !is_short_form(short) || map.contains_key(short) {
            continue;
        }
        let needed = short.chars().filter(|c| c.is_alphabetic()).count();
        let mut counted = 0;
        let mut first = p;
        let mut ok = true;
        while counted < needed {
            if first == 0 {
                ok = false;
                break;
            }
            first -= 1;
            let s = toks[first].surface.as_str();
            if is_word(s) {
                counted += 1;
            } else if !(is_joiner(s) && first + 1 < p) {
                ok = false;
                break;
            }
        }
        if !ok || counted == 0 {
            continue;
        }
        let lead = toks[first].surface.chars().next().map(|c| c.to_lowercase().collect::<String>());
        let short_lead = short
            .chars()
            .find(|c| c.is_alphabetic())
            .map(|c| c.to_lowercase().collect::<String>());
        if lead != short_lead {
            continue;
        }
        map.insert(
            short.clone(),
            AbbrevEntry {
                long_tokens: (first, p),
                long_chars: (toks[first].start, toks[p - 1].end),
                position: p + 1,
            },
        );
    }
    map
}

/// Gives spans equal to a known short form the class of the span holding
/// its long form's first occurrence.
pub fn propagate_abbrev_class(spans: &mut [KeyphraseSpan], abbrevs: &AbbrevMap) {
    for (short, entry) in abbrevs {
        let (ls, le) = entry.long_chars;
        let class = spans
            .iter()
            .find(|s| s.start <= ls && s.end >= le && s.surface != *short)
            .and_then(|s| s.klass);
        let Some(class) = class else {
            continue;
        };
        for s in spans.iter_mut().filter(|s| s.surface == *short) {
            s.klass = Some(class);
        }
    }
}

const ELEMENTS_FILE: &str = include_str!("../data/elements.txt");

/// Element symbols that are also common words or initials; alone they
/// need a digit to count as a formula.
const AMBIGUOUS_SYMBOLS: &[&str] = &["In", "As", "At", "Be", "He", "No", "Am", "Re"];

fn elements() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        ELEMENTS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// Whether `surface` reads as a chemical formula such as `NaCl`, `Mg` or `H2O`.
pub fn chemical_formula_rule(surface: &str) -> bool {
    let table = elements();
    let chars: Vec<char> = surface.chars().collect();
    let mut i = 0;
    let mut groups = 0;
    let mut has_digit = false;
    let mut first_symbol = String::new();
    while i < chars.len() {
        let two: Option<String> = chars.get(i..i + 2).map(|c| c.iter().collect());
        let symbol = match two {
            Some(s) if table.contains(s.as_str()) => s,
            _ => {
                let one = chars[i].to_string();
                if !table.contains(one.as_str()) {
                    return false;
                }
                one
            }
        };
        i += symbol.chars().count();
        while i < chars.len() && chars[i].is_ascii_digit() {
            has_digit = true;
            i += 1;
        }
        if groups == 0 {
            first_symbol = symbol;
        }
        groups += 1;
    }
    match groups {
        0 => false,
        1 => {
            let ambiguous =
                first_symbol.chars().count() == 1 || AMBIGUOUS_SYMBOLS.contains(&first_symbol.as_str());
            has_digit || !ambiguous
        }
        _ => true,
    }
}

/// Forces spans containing a formula token to Material.
pub fn apply_formula_rule(doc: &Document, spans: &mut [KeyphraseSpan]) {
    for span in spans.iter_mut() {
        let range = doc.tokens_overlapping(span.start, span.end);
        if doc.tokens[range]
            .iter()
            .any(|t| chemical_formula_rule(&t.surface))
        {
            span.klass = Some(KeyClass::Material);
        }
    }
}
