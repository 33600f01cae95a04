//! Tokenization and character-offset helpers shared across modules.
//!
//! All offsets exposed by the crate are Unicode scalar value indices (what
//! Python's `str` indexing uses), never byte offsets.

use std::collections::HashSet;
use std::sync::OnceLock;

static STOPWORDS_RAW: &str = include_str!("../data/stopwords_en.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

/// True when `word` (already lowercase) is in the bundled English stopword list.
pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Number of entries in the bundled stopword list.
pub fn stopword_count() -> usize {
    stopwords().len()
}

/// Maximal runs of alphanumeric characters.
pub fn word_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

/// Tokens used for c-TF-IDF: lowercased words, length ≥ 2, stopwords removed.
pub fn topic_tokens(text: &str) -> Vec<String> {
    word_tokens(text)
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() > 1 && !is_stopword(t))
        .collect()
}

/// Length of `s` in Unicode scalar values.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `char_idx`-th character; `char_idx == char_len(s)` maps to `s.len()`.
pub fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut count = 0;
    for (b, _) in s.char_indices() {
        if count == char_idx {
            return Some(b);
        }
        count += 1;
    }
    (count == char_idx).then_some(s.len())
}

/// Substring by character range `[start, end)`.
pub fn slice_chars(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = char_to_byte(s, start)?;
    let b1 = char_to_byte(s, end)?;
    Some(&s[b0..b1])
}

/// Precomputed char→byte table for repeated slicing of one string.
#[derive(Debug, Clone)]
pub struct CharIndex {
    offsets: Vec<usize>,
}

impl CharIndex {
    pub fn new(s: &str) -> Self {
        let mut offsets: Vec<usize> = s.char_indices().map(|(b, _)| b).collect();
        offsets.push(s.len());
        Self { offsets }
    }

    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn byte(&self, char_idx: usize) -> Option<usize> {
        self.offsets.get(char_idx).copied()
    }

    pub fn slice<'s>(&self, s: &'s str, start: usize, end: usize) -> Option<&'s str> {
        if start > end {
            return None;
        }
        Some(&s[self.byte(start)?..self.byte(end)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_tokens_drop_short_and_stopwords() {
        let toks = topic_tokens("The festival, a music-festival in 2023! I x");
        assert_eq!(toks, vec!["festival", "music", "festival", "2023"]);
    }

    #[test]
    fn stopword_list_is_bundled() {
        assert_eq!(stopword_count(), 318);
        assert!(is_stopword("the"));
        assert!(!is_stopword("festival"));
    }

    #[test]
    fn char_offsets_handle_multibyte() {
        let s = "El País höy";
        assert_eq!(char_len(s), 11);
        assert_eq!(slice_chars(s, 3, 7), Some("País"));
        assert_eq!(char_to_byte(s, 11), Some(s.len()));
        assert_eq!(char_to_byte(s, 12), None);
        let idx = CharIndex::new(s);
        assert_eq!(idx.slice(s, 8, 11), Some("höy"));
    }
}
