//! Article corpus and newspaper registry.
//!
//! Ingest keeps every record that validates, including exact duplicates:
//! the same story printed by two outlets is itself a bias signal. Cleaning is
//! non-destructive; [`Article::body`] always holds the text as ingested.

mod language;
mod noise;

pub use language::{detect_language, filter_language, LanguageGuess, LanguagePartition};
pub use noise::{apply_noise_rules, load_noise_rules, CleanedBody, NoiseRuleSet};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} is not valid JSON: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("noise rule for newspaper {newspaper_id} (order {order}) does not compile: {source}")]
    Pattern {
        newspaper_id: String,
        order: i64,
        #[source]
        source: regex::Error,
    },
    #[error("noise rule for newspaper {rule} applied to an article of {article}")]
    RuleMismatch { rule: String, article: String },
}

/// A rejected input record. `line` is 1-based; for JSON arrays it is the element index + 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Newspaper {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub country: String,
    #[serde(default)]
    pub city: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_rank: Option<i64>,
}

impl Newspaper {
    /// Headquarters coordinates when both are present.
    pub fn location(&self) -> Option<(f64, f64)> {
        self.latitude.zip(self.longitude)
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty newspaper id".into());
        }
        match (self.latitude, self.longitude) {
            (None, None) => Ok(()),
            (Some(lat), Some(lon)) => {
                if !(-90.0..=90.0).contains(&lat) {
                    Err(format!("latitude {lat} outside [-90, 90]"))
                } else if !(-180.0..=180.0).contains(&lon) {
                    Err(format!("longitude {lon} outside [-180, 180]"))
                } else {
                    Ok(())
                }
            }
            _ => Err("latitude and longitude must be given together".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub newspaper_id: String,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_tag: Option<String>,
}

/// A newspaper-specific regex whose matches are deleted from article bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseRule {
    pub newspaper_id: String,
    pub pattern: String,
    pub order: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusFile {
    newspapers: Vec<Newspaper>,
    articles: Vec<Article>,
}

/// Immutable corpus snapshot: newspapers plus articles in ingest order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "CorpusFile", into = "CorpusFile")]
pub struct Corpus {
    newspapers: Vec<Newspaper>,
    articles: Vec<Article>,
    newspaper_index: HashMap<String, usize>,
    article_index: HashMap<String, usize>,
}

impl From<CorpusFile> for Corpus {
    fn from(f: CorpusFile) -> Self {
        Corpus::from_parts(f.newspapers, f.articles)
    }
}

impl From<Corpus> for CorpusFile {
    fn from(c: Corpus) -> Self {
        CorpusFile {
            newspapers: c.newspapers,
            articles: c.articles,
        }
    }
}

impl Corpus {
    /// Build from already validated parts. Later duplicates of an id shadow nothing:
    /// the index points at the first occurrence.
    pub fn from_parts(newspapers: Vec<Newspaper>, articles: Vec<Article>) -> Self {
        let mut newspaper_index = HashMap::new();
        for (i, n) in newspapers.iter().enumerate() {
            newspaper_index.entry(n.id.clone()).or_insert(i);
        }
        let mut article_index = HashMap::new();
        for (i, a) in articles.iter().enumerate() {
            article_index.entry(a.id.clone()).or_insert(i);
        }
        Self {
            newspapers,
            articles,
            newspaper_index,
            article_index,
        }
    }

    pub fn newspapers(&self) -> &[Newspaper] {
        &self.newspapers
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn newspaper(&self, id: &str) -> Option<&Newspaper> {
        self.newspaper_index.get(id).map(|&i| &self.newspapers[i])
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.article_index.get(id).map(|&i| &self.articles[i])
    }

    pub fn article_position(&self, id: &str) -> Option<usize> {
        self.article_index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Canonical JSON form; the content hash is taken over these bytes.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("corpus serializes")
    }

    pub fn content_hash(&self) -> String {
        crate::digest::sha256_hex(&self.to_canonical_json())
    }

    pub fn stats(&self) -> CorpusStats {
        let mut per_newspaper: BTreeMap<String, usize> =
            self.newspapers.iter().map(|n| (n.id.clone(), 0)).collect();
        let mut languages = BTreeMap::new();
        let mut first: Option<NaiveDate> = None;
        let mut last: Option<NaiveDate> = None;
        for a in &self.articles {
            *per_newspaper.entry(a.newspaper_id.clone()).or_default() += 1;
            let tag = a
                .language_tag
                .clone()
                .unwrap_or_else(|| "untagged".to_string());
            *languages.entry(tag).or_default() += 1;
            if let Some(d) = a.published_at {
                first = Some(first.map_or(d, |f| f.min(d)));
                last = Some(last.map_or(d, |l| l.max(d)));
            }
        }
        CorpusStats {
            article_count: self.articles.len(),
            per_newspaper,
            first_date: first,
            last_date: last,
            languages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub article_count: usize,
    pub per_newspaper: BTreeMap<String, usize>,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    /// Count per language tag; untagged articles are counted under `"untagged"`.
    pub languages: BTreeMap<String, usize>,
}

/// Result of [`ingest_corpus`]: the valid records plus per-record rejections.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    pub newspaper_errors: Vec<RecordError>,
    pub article_errors: Vec<RecordError>,
}

/// Load `articles.jsonl` and `newspapers.json`.
pub fn ingest_corpus(
    articles_path: impl AsRef<Path>,
    newspapers_path: impl AsRef<Path>,
) -> Result<Ingested, CorpusError> {
    let open = |p: &Path| {
        File::open(p).map_err(|source| CorpusError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let newspapers = open(newspapers_path.as_ref())?;
    let articles = open(articles_path.as_ref())?;
    ingest_from_readers(BufReader::new(articles), newspapers)
}

pub fn ingest_from_readers<A: BufRead, N: Read>(
    articles: A,
    newspapers: N,
) -> Result<Ingested, CorpusError> {
    let (newspapers, newspaper_errors) = parse_newspapers(newspapers)?;
    let registry: HashSet<&str> = newspapers.iter().map(|n| n.id.as_str()).collect();

    let mut kept = Vec::new();
    let mut seen = HashSet::new();
    let mut article_errors = Vec::new();
    for (i, line) in articles.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: "articles".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article = match serde_json::from_str(&line) {
            Ok(a) => a,
            Err(e) => {
                article_errors.push(RecordError {
                    line: line_no,
                    id: extract_id(&line),
                    message: format!("malformed article record: {e}"),
                });
                continue;
            }
        };
        if article.id.is_empty() {
            article_errors.push(RecordError {
                line: line_no,
                id: None,
                message: "empty article id".into(),
            });
            continue;
        }
        if !registry.contains(article.newspaper_id.as_str()) {
            article_errors.push(RecordError {
                line: line_no,
                id: Some(article.id.clone()),
                message: format!("unknown newspaper_id {:?}", article.newspaper_id),
            });
            continue;
        }
        if !seen.insert(article.id.clone()) {
            article_errors.push(RecordError {
                line: line_no,
                id: Some(article.id.clone()),
                message: "duplicate article id".into(),
            });
            continue;
        }
        kept.push(article);
    }

    let corpus = Corpus::from_parts(newspapers, kept);
    let stats = corpus.stats();
    Ok(Ingested {
        corpus,
        stats,
        newspaper_errors,
        article_errors,
    })
}

/// Parse a JSON array of newspapers, rejecting invalid or duplicate entries individually.
pub fn parse_newspapers<R: Read>(
    reader: R,
) -> Result<(Vec<Newspaper>, Vec<RecordError>), CorpusError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_reader(reader).map_err(|source| CorpusError::Json {
            what: "newspapers file".into(),
            source,
        })?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, v) in values.into_iter().enumerate() {
        let id = v.get("id").and_then(|x| x.as_str()).map(str::to_string);
        let paper: Newspaper = match serde_json::from_value(v) {
            Ok(p) => p,
            Err(e) => {
                errors.push(RecordError {
                    line: i + 1,
                    id,
                    message: format!("malformed newspaper record: {e}"),
                });
                continue;
            }
        };
        if let Err(message) = paper.validate() {
            errors.push(RecordError {
                line: i + 1,
                id,
                message,
            });
            continue;
        }
        if !seen.insert(paper.id.clone()) {
            errors.push(RecordError {
                line: i + 1,
                id,
                message: "duplicate newspaper id".into(),
            });
            continue;
        }
        out.push(paper);
    }
    Ok((out, errors))
}

fn extract_id(line: &str) -> Option<String> {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()?
        .get("id")?
        .as_str()
        .map(str::to_string)
}
