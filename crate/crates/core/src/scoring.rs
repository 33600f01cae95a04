//! Document sentiment records, validation and the lexicon baseline.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RecordError};
use crate::text::word_tokens;

pub const PROBABILITY_TOLERANCE: f64 = 1e-3;
pub const BASELINE_MODEL_ID: &str = "baseline-lexicon";
pub const DEFAULT_TOKEN_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Title,
    Body,
}

impl DocKind {
    pub const ALL: [DocKind; 2] = [DocKind::Title, DocKind::Body];

    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::Title => "title",
            DocKind::Body => "body",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "title" => Ok(DocKind::Title),
            "body" => Ok(DocKind::Body),
            other => Err(format!("unknown doc_kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 ± {PROBABILITY_TOLERANCE}")]
    Sum { sum: f64 },
    #[error("several models scored {kind}: {models:?}; pick one")]
    AmbiguousModel { kind: DocKind, models: Vec<String> },
    #[error("no {kind} scores for model {model}")]
    MissingModel { kind: DocKind, model: String },
    #[error("several models scored entities: {models:?}; pick one")]
    AmbiguousEntityModel { models: Vec<String> },
    #[error("no entity scores for model {model}")]
    MissingEntityModel { model: String },
}

/// Three-way class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
}

impl Probabilities {
    pub fn validate(&self) -> Result<(), ScoringError> {
        for (name, value) in [
            ("positive", self.positive),
            ("neutral", self.neutral),
            ("negative", self.negative),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoringError::OutOfRange { name, value });
            }
        }
        let sum = self.positive + self.neutral + self.negative;
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(ScoringError::Sum { sum });
        }
        Ok(())
    }

    pub fn simplified(&self) -> f64 {
        self.positive - self.negative
    }
}

/// `positive − negative` after validating the triple.
pub fn simplified_score(positive: f64, neutral: f64, negative: f64) -> Result<f64, ScoringError> {
    let p = Probabilities {
        positive,
        neutral,
        negative,
    };
    p.validate()?;
    Ok(p.simplified())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSentiment {
    pub article_id: String,
    pub doc_kind: DocKind,
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
    pub simplified: f64,
    pub model_id: String,
}

impl DocumentSentiment {
    pub fn new(
        article_id: impl Into<String>,
        doc_kind: DocKind,
        p: Probabilities,
        model_id: impl Into<String>,
    ) -> Result<Self, ScoringError> {
        p.validate()?;
        Ok(Self {
            article_id: article_id.into(),
            doc_kind,
            positive: p.positive,
            neutral: p.neutral,
            negative: p.negative,
            simplified: p.simplified(),
            model_id: model_id.into(),
        })
    }
}

#[derive(Deserialize)]
struct ScoreLine {
    article_id: String,
    doc_kind: String,
    positive: f64,
    neutral: f64,
    negative: f64,
    model_id: String,
}

/// Validated scores, unique per (article, kind, model).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    records: Vec<DocumentSentiment>,
}

impl ScoreSet {
    pub fn from_records(records: Vec<DocumentSentiment>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[DocumentSentiment] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn models(&self, kind: DocKind) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .records
            .iter()
            .filter(|r| r.doc_kind == kind)
            .map(|r| r.model_id.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    /// Simplified scores by article for one kind. With `model` unset the set
    /// must contain exactly one model for that kind.
    pub fn simplified_by_article(
        &self,
        kind: DocKind,
        model: Option<&str>,
    ) -> Result<BTreeMap<String, f64>, ScoringError> {
        let models = self.models(kind);
        let chosen = match model {
            Some(m) if models.iter().any(|x| x == m) => m.to_string(),
            Some(m) => {
                return Err(ScoringError::MissingModel {
                    kind,
                    model: m.to_string(),
                })
            }
            None if models.len() <= 1 => models.into_iter().next().unwrap_or_default(),
            None => return Err(ScoringError::AmbiguousModel { kind, models }),
        };
        Ok(self
            .records
            .iter()
            .filter(|r| r.doc_kind == kind && r.model_id == chosen)
            .map(|r| (r.article_id.clone(), r.simplified))
            .collect())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLoadReport {
    pub loaded: usize,
    pub rejected: Vec<RecordError>,
    /// Fraction of corpus articles with at least one score, per kind.
    pub coverage: BTreeMap<DocKind, f64>,
}

pub fn load_scores<R: BufRead>(reader: R, corpus: &Corpus) -> std::io::Result<(ScoreSet, ScoreLoadReport)> {
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reject = |id: Option<String>, message: String| RecordError {
            line: i + 1,
            id,
            message,
        };
        let rec: ScoreLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(reject(None, format!("malformed score record: {e}")));
                continue;
            }
        };
        let id = Some(rec.article_id.clone());
        let kind = match rec.doc_kind.parse::<DocKind>() {
            Ok(k) => k,
            Err(e) => {
                rejected.push(reject(id, e));
                continue;
            }
        };
        if corpus.article(&rec.article_id).is_none() {
            rejected.push(reject(id, "unknown article_id".into()));
            continue;
        }
        let p = Probabilities {
            positive: rec.positive,
            neutral: rec.neutral,
            negative: rec.negative,
        };
        let sentiment = match DocumentSentiment::new(rec.article_id.clone(), kind, p, rec.model_id.clone()) {
            Ok(s) => s,
            Err(e) => {
                rejected.push(reject(id, e.to_string()));
                continue;
            }
        };
        if !seen.insert((rec.article_id, kind, rec.model_id)) {
            rejected.push(reject(id, "duplicate (article_id, doc_kind, model_id)".into()));
            continue;
        }
        records.push(sentiment);
    }
    let set = ScoreSet::from_records(records);
    let report = ScoreLoadReport {
        loaded: set.len(),
        rejected,
        coverage: coverage(&set, corpus),
    };
    Ok((set, report))
}

fn coverage(set: &ScoreSet, corpus: &Corpus) -> BTreeMap<DocKind, f64> {
    DocKind::ALL
        .iter()
        .map(|&k| {
            let covered: HashSet<&str> = set
                .records
                .iter()
                .filter(|r| r.doc_kind == k)
                .map(|r| r.article_id.as_str())
                .collect();
            let frac = if corpus.is_empty() {
                0.0
            } else {
                covered.len() as f64 / corpus.len() as f64
            };
            (k, frac)
        })
        .collect()
}

fn lexicon(raw: &'static str, cell: &'static OnceLock<HashSet<&'static str>>) -> &'static HashSet<&'static str> {
    cell.get_or_init(|| raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect())
}

fn positive_lexicon() -> &'static HashSet<&'static str> {
    static CELL: OnceLock<HashSet<&'static str>> = OnceLock::new();
    lexicon(include_str!("../data/lexicon_positive.txt"), &CELL)
}

fn negative_lexicon() -> &'static HashSet<&'static str> {
    static CELL: OnceLock<HashSet<&'static str>> = OnceLock::new();
    lexicon(include_str!("../data/lexicon_negative.txt"), &CELL)
}

pub fn is_positive_word(w: &str) -> bool {
    positive_lexicon().contains(w)
}

pub fn is_negative_word(w: &str) -> bool {
    negative_lexicon().contains(w)
}

/// Lexicon hit ratios over all lowercased word tokens of `text`.
pub fn baseline_lexicon_score(text: &str) -> Probabilities {
    let mut total = 0usize;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for t in word_tokens(text) {
        let t = t.to_lowercase();
        total += 1;
        if is_positive_word(&t) {
            pos += 1;
        } else if is_negative_word(&t) {
            neg += 1;
        }
    }
    if total == 0 {
        return Probabilities {
            positive: 0.0,
            neutral: 1.0,
            negative: 0.0,
        };
    }
    let positive = pos as f64 / total as f64;
    let negative = neg as f64 / total as f64;
    Probabilities {
        positive,
        neutral: (total - pos - neg) as f64 / total as f64,
        negative,
    }
}

/// Title and body scores for every `(article_id, title, body)` under the baseline.
pub fn baseline_scores<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> ScoreSet {
    let mut records = Vec::new();
    for (id, title, body) in docs {
        for (kind, text) in [(DocKind::Title, title), (DocKind::Body, body)] {
            let p = baseline_lexicon_score(text);
            records.push(
                DocumentSentiment::new(id, kind, p, BASELINE_MODEL_ID).expect("baseline probabilities are valid"),
            );
        }
    }
    ScoreSet::from_records(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationFinding {
    pub article_id: String,
    pub doc_kind: DocKind,
    pub token_count: usize,
}

/// Titles and bodies whose whitespace token count exceeds `limit`.
pub fn truncation_audit<'a>(
    docs: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    limit: usize,
) -> Vec<TruncationFinding> {
    let mut out = Vec::new();
    for (id, title, body) in docs {
        for (kind, text) in [(DocKind::Title, title), (DocKind::Body, body)] {
            let n = text.split_whitespace().count();
            if n > limit {
                out.push(TruncationFinding {
                    article_id: id.to_string(),
                    doc_kind: kind,
                    token_count: n,
                });
            }
        }
    }
    out
}
