//! Class-based TF-IDF over concatenated per-topic documents.

use std::collections::BTreeMap;

use crate::text::topic_tokens;

pub type TermCounts = BTreeMap<String, u64>;
pub type TermWeights = BTreeMap<String, f64>;

/// Token counts of one document under the topic tokenizer.
pub fn count_terms(text: &str) -> TermCounts {
    let mut counts = TermCounts::new();
    add_terms(&mut counts, text);
    counts
}

pub fn add_terms(counts: &mut TermCounts, text: &str) {
    for t in topic_tokens(text) {
        *counts.entry(t).or_default() += 1;
    }
}

pub fn merge_counts(into: &mut TermCounts, other: &TermCounts) {
    for (t, c) in other {
        *into.entry(t.clone()).or_default() += c;
    }
}

/// Fitted corpus-level statistics: `f(t)` summed over classes and the average
/// token count per class `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfIdf {
    frequency: TermCounts,
    average: f64,
}

impl CtfIdf {
    pub fn fit<'a>(classes: impl IntoIterator<Item = &'a TermCounts>) -> Self {
        let mut frequency = TermCounts::new();
        let mut n_classes = 0usize;
        for c in classes {
            n_classes += 1;
            merge_counts(&mut frequency, c);
        }
        let total: u64 = frequency.values().sum();
        let average = if n_classes == 0 {
            0.0
        } else {
            total as f64 / n_classes as f64
        };
        Self { frequency, average }
    }

    pub fn average_terms(&self) -> f64 {
        self.average
    }

    pub fn frequency(&self, term: &str) -> u64 {
        self.frequency.get(term).copied().unwrap_or(0)
    }

    /// `tf · ln(1 + A / f(t))`; 0 for terms unseen at fit time.
    pub fn weight(&self, term: &str, tf: u64) -> f64 {
        let f = self.frequency(term);
        if f == 0 || tf == 0 {
            return 0.0;
        }
        tf as f64 * (1.0 + self.average / f as f64).ln()
    }

    pub fn weigh(&self, counts: &TermCounts) -> TermWeights {
        counts
            .iter()
            .map(|(t, &tf)| (t.clone(), self.weight(t, tf)))
            .filter(|(_, w)| *w > 0.0)
            .collect()
    }
}

/// Weights for each class, fitted on exactly these classes.
pub fn ctfidf(classes: &[TermCounts]) -> Vec<TermWeights> {
    let model = CtfIdf::fit(classes);
    classes.iter().map(|c| model.weigh(c)).collect()
}

/// Highest weights first, ties by term.
pub fn ranked_terms(weights: &TermWeights, n: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = weights.iter().map(|(t, &w)| (t.clone(), w)).collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then_with(|| a.0.cmp(&b.0)));
    v.truncate(n);
    v
}
