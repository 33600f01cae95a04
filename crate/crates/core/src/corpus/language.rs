//! Language filtering with a built-in character-trigram profile scorer.
//!
//! Explicit `language_tag`s always win; only untagged articles are scored.
//! Profiles for en/de/fr/es are built once from bundled reference prose and
//! compared by cosine similarity.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::Corpus;

/// Texts shorter than this (in characters) are not scored and are kept.
pub const MIN_CLASSIFIABLE_CHARS: usize = 20;

const PROFILE_SOURCES: [(&str, &str); 4] = [
    ("en", include_str!("../../data/lang/en.txt")),
    ("de", include_str!("../../data/lang/de.txt")),
    ("fr", include_str!("../../data/lang/fr.txt")),
    ("es", include_str!("../../data/lang/es.txt")),
];

struct Profile {
    lang: &'static str,
    counts: HashMap<String, f64>,
    norm: f64,
}

fn profiles() -> &'static [Profile] {
    static P: OnceLock<Vec<Profile>> = OnceLock::new();
    P.get_or_init(|| {
        PROFILE_SOURCES
            .iter()
            .map(|(lang, text)| {
                let counts = trigram_counts(text);
                let norm = l2(&counts);
                Profile { lang, counts, norm }
            })
            .collect()
    })
}

fn trigram_counts(text: &str) -> HashMap<String, f64> {
    let mut counts = HashMap::new();
    let lowered = text.to_lowercase();
    for word in lowered.split(|c: char| !c.is_alphabetic()) {
        if word.is_empty() {
            continue;
        }
        let padded: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0.0) += 1.0;
        }
    }
    counts
}

fn l2(v: &HashMap<String, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageGuess {
    pub language: String,
    /// Cosine similarity to the winning profile.
    pub score: f64,
}

/// Best-matching bundled profile, or `None` for text too short to score.
pub fn detect_language(text: &str) -> Option<LanguageGuess> {
    if text.trim().chars().count() < MIN_CLASSIFIABLE_CHARS {
        return None;
    }
    let counts = trigram_counts(text);
    let norm = l2(&counts);
    if norm == 0.0 {
        return None;
    }
    let mut best: Option<LanguageGuess> = None;
    for p in profiles() {
        let dot: f64 = counts
            .iter()
            .filter_map(|(g, c)| p.counts.get(g).map(|pc| c * pc))
            .sum();
        let score = dot / (norm * p.norm);
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(LanguageGuess {
                language: p.lang.to_string(),
                score,
            });
        }
    }
    best
}

fn primary_subtag(tag: &str) -> String {
    tag.split(['-', '_'])
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Outcome of a language pass. Nothing is deleted: `kept.len() + removed.len()` equals the corpus size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguagePartition {
    pub kept: Vec<String>,
    pub removed: Vec<String>,
    /// Scorer output for untagged articles.
    pub detected: BTreeMap<String, LanguageGuess>,
    pub warnings: Vec<String>,
}

pub fn filter_language(corpus: &Corpus, keep_tag: &str) -> LanguagePartition {
    let keep = primary_subtag(keep_tag);
    let mut out = LanguagePartition::default();
    for a in corpus.articles() {
        let lang = match &a.language_tag {
            Some(tag) => Some(primary_subtag(tag)),
            None => {
                let text = format!("{}\n{}", a.title, a.body);
                match detect_language(&text) {
                    Some(guess) => {
                        let l = guess.language.clone();
                        out.detected.insert(a.id.clone(), guess);
                        Some(l)
                    }
                    None => {
                        out.warnings.push(format!(
                            "article {} is too short to classify; kept",
                            a.id
                        ));
                        None
                    }
                }
            }
        };
        match lang {
            Some(l) if l != keep => out.removed.push(a.id.clone()),
            _ => out.kept.push(a.id.clone()),
        }
    }
    out
}
