use serde::{Deserialize, Serialize};

use crate::text::CharIndex;

/// Tokens ending in a period that never end a sentence.
pub const ABBREVIATIONS: [&str; 40] = [
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "U.S.", "U.K.", "U.N.", "E.U.",
    "e.g.", "i.e.", "vs.", "Inc.", "Ltd.", "Co.", "Corp.", "Gen.", "Col.", "Lt.", "Sgt.", "Capt.",
    "Gov.", "Sen.", "Rep.", "Rev.", "No.", "Jan.", "Feb.", "Aug.", "Sept.", "Oct.", "Nov.", "Dec.",
    "Mt.", "a.m.", "p.m.", "Fig.",
];

const CLOSERS: [char; 8] = ['"', '\'', ')', ']', '}', '\u{201D}', '\u{2019}', '\u{00BB}'];
const OPENERS: [char; 8] = ['"', '\'', '(', '[', '{', '\u{201C}', '\u{2018}', '\u{00AB}'];

/// Half-open character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Sentence spans covering `body` without gaps or overlap.
///
/// A sentence ends after `.`, `!` or `?`, optionally followed by closing
/// quotes or brackets, when whitespace follows. Trailing whitespace belongs
/// to the sentence it follows. A period closing a known abbreviation does
/// not end a sentence.
pub fn sentence_index(body: &str) -> Vec<Span> {
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < n && CLOSERS.contains(&chars[j]) {
                j += 1;
            }
            if j < n && chars[j].is_whitespace() && !(c == '.' && ends_with_abbreviation(&chars[start..=i])) {
                while j < n && chars[j].is_whitespace() {
                    j += 1;
                }
                spans.push(Span { start, end: j });
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if start < n {
        spans.push(Span { start, end: n });
    }
    spans
}

fn ends_with_abbreviation(sentence: &[char]) -> bool {
    let word_start = sentence
        .iter()
        .rposition(|c| c.is_whitespace())
        .map_or(0, |p| p + 1);
    let word: String = sentence[word_start..]
        .iter()
        .skip_while(|c| OPENERS.contains(c))
        .collect();
    ABBREVIATIONS.contains(&word.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ContextMode {
    Sentence,
    Window { chars: usize },
    /// Sentence unless it is longer than `max_sentence_chars`, then a window.
    Auto { max_sentence_chars: usize, window: usize },
}

impl Default for ContextMode {
    fn default() -> Self {
        ContextMode::Auto {
            max_sentence_chars: 400,
            window: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetContext {
    pub left: String,
    pub target: String,
    pub right: String,
}

/// Left/target/right around the character range `[start, end)` of `body`.
///
/// Callers guarantee `start < end <= char_len(body)`.
pub fn make_context(body: &str, start: usize, end: usize, mode: ContextMode) -> TargetContext {
    let idx = CharIndex::new(body);
    let n = idx.char_len();
    let (lo, hi) = match mode {
        ContextMode::Window { chars } => window(start, end, n, chars),
        ContextMode::Sentence => sentence_bounds(body, start, end),
        ContextMode::Auto {
            max_sentence_chars,
            window: w,
        } => {
            let (lo, hi) = sentence_bounds(body, start, end);
            if hi - lo > max_sentence_chars {
                window(start, end, n, w)
            } else {
                (lo, hi)
            }
        }
    };
    let slice = |a, b| idx.slice(body, a, b).expect("bounds within body").to_string();
    TargetContext {
        left: slice(lo, start),
        target: slice(start, end),
        right: slice(end, hi),
    }
}

fn window(start: usize, end: usize, n: usize, w: usize) -> (usize, usize) {
    (start.saturating_sub(w), (end + w).min(n))
}

/// Bounds of the sentence(s) containing the target, surrounding whitespace trimmed
/// but never past the target itself.
fn sentence_bounds(body: &str, start: usize, end: usize) -> (usize, usize) {
    let spans = sentence_index(body);
    let first = spans.iter().find(|s| s.end > start).copied().unwrap_or(Span { start: 0, end: 0 });
    let last = spans
        .iter()
        .find(|s| s.end >= end)
        .copied()
        .unwrap_or(first);
    let chars: Vec<char> = body.chars().collect();
    let mut lo = first.start;
    while lo < start && chars[lo].is_whitespace() {
        lo += 1;
    }
    let mut hi = last.end;
    while hi > end && chars[hi - 1].is_whitespace() {
        hi -= 1;
    }
    (lo, hi)
}
