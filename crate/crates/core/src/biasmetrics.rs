//! Publishing-rate and sentiment deviations, spectra and map data.
//!
//! Every mean here is the unweighted mean over newspapers, and deviations
//! are never normalized.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Newspaper;
use crate::entities::{EntityKey, EntityNewspaperStats};
use crate::scoring::DocKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("newspaper {0} has no articles")]
    ZeroTotal(String),
    #[error("topic {0} has no articles")]
    EmptyTopic(i64),
}

/// Which newspapers enter a mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSet {
    /// Only newspapers with at least one topic article.
    #[default]
    Covering,
    /// Every newspaper in the registry, non-covering ones at rate 0.
    IncludeZero,
}

/// Unweighted mean and per-value deviations. Empty input gives mean 0.
pub fn mean_deviations(values: &[f64]) -> (f64, Vec<f64>) {
    if values.is_empty() {
        return (0.0, Vec::new());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, values.iter().map(|v| v - mean).collect())
}

/// `|a(N_t)| / |a(N)|`.
pub fn publishing_rate(newspaper_id: &str, topic_count: usize, total_count: usize) -> Result<f64, MetricsError> {
    if total_count == 0 {
        return Err(MetricsError::ZeroTotal(newspaper_id.to_string()));
    }
    Ok(topic_count as f64 / total_count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicShare {
    pub newspaper_id: String,
    pub topic_id: i64,
    pub article_count: usize,
    pub total_count: usize,
    pub rate: f64,
    pub rate_deviation: f64,
}

/// Rate deviations for one topic.
///
/// `topic_counts` holds topic articles per newspaper; `totals` holds every
/// newspaper's article count over the whole corpus, noise included.
pub fn rate_deviation(
    topic_id: i64,
    topic_counts: &BTreeMap<String, usize>,
    totals: &BTreeMap<String, usize>,
    mean_set: MeanSet,
) -> Result<Vec<TopicShare>, MetricsError> {
    if topic_counts.values().all(|&c| c == 0) {
        return Err(MetricsError::EmptyTopic(topic_id));
    }
    let papers: Vec<&String> = match mean_set {
        MeanSet::Covering => topic_counts.iter().filter(|(_, &c)| c > 0).map(|(p, _)| p).collect(),
        MeanSet::IncludeZero => totals.keys().chain(topic_counts.keys()).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let mut rows = Vec::with_capacity(papers.len());
    for p in papers {
        let count = topic_counts.get(p).copied().unwrap_or(0);
        let total = totals.get(p).copied().unwrap_or(0);
        rows.push((p.clone(), count, total, publishing_rate(p, count, total)?));
    }
    let rates: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let (_, devs) = mean_deviations(&rates);
    Ok(rows
        .into_iter()
        .zip(devs)
        .map(|((newspaper_id, article_count, total_count, rate), d)| TopicShare {
            newspaper_id,
            topic_id,
            article_count,
            total_count,
            rate,
            rate_deviation: d,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scope", content = "topic_id")]
pub enum Scope {
    Topic(i64),
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Subject {
    Document(DocKind),
    Entity(EntityKey),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentSummary {
    pub newspaper_id: String,
    pub scope: Scope,
    pub subject: Subject,
    pub mean_simplified: f64,
    pub sentiment_deviation: f64,
    pub unit_count: usize,
}

/// Mean simplified score and unit count per newspaper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewspaperMean {
    pub newspaper_id: String,
    pub mean: f64,
    pub count: usize,
}

/// Mean score of each newspaper's articles in `articles`. Newspapers with
/// articles but no scores are left out and named in the warnings.
pub fn newspaper_mean_sentiment(
    articles: &[String],
    newspaper_of: &BTreeMap<String, String>,
    scores: &BTreeMap<String, f64>,
) -> (Vec<NewspaperMean>, Vec<String>) {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut present: BTreeSet<&str> = BTreeSet::new();
    for a in articles {
        let Some(p) = newspaper_of.get(a) else { continue };
        present.insert(p);
        if let Some(&s) = scores.get(a) {
            let e = acc.entry(p).or_default();
            e.0 += s;
            e.1 += 1;
        }
    }
    let warnings = present
        .iter()
        .filter(|p| !acc.contains_key(*p))
        .map(|p| format!("newspaper {p} has no scored articles in scope"))
        .collect();
    let means = acc
        .into_iter()
        .map(|(p, (sum, n))| NewspaperMean {
            newspaper_id: p.to_string(),
            mean: sum / n as f64,
            count: n,
        })
        .collect();
    (means, warnings)
}

/// `sd = s̄(N) − mean of all newspaper means`.
pub fn sentiment_deviation(means: &[NewspaperMean], scope: Scope, subject: Subject) -> Vec<SentimentSummary> {
    let values: Vec<f64> = means.iter().map(|m| m.mean).collect();
    let (_, devs) = mean_deviations(&values);
    means
        .iter()
        .zip(devs)
        .map(|(m, sd)| SentimentSummary {
            newspaper_id: m.newspaper_id.clone(),
            scope: scope.clone(),
            subject: subject.clone(),
            mean_simplified: m.mean,
            sentiment_deviation: sd,
            unit_count: m.count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub newspaper_id: String,
    pub x: f64,
    pub y: f64,
    pub size: usize,
    pub color_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub topic_id: i64,
    pub subject: Subject,
    pub points: Vec<SpectrumPoint>,
    pub warnings: Vec<String>,
}

/// Article-mode spectrum: x = sd, y = rate deviation, size = topic articles.
pub fn article_spectrum(topic_id: i64, shares: &[TopicShare], sentiment: &[SentimentSummary], kind: DocKind) -> Spectrum {
    let by_paper: BTreeMap<&str, &SentimentSummary> =
        sentiment.iter().map(|s| (s.newspaper_id.as_str(), s)).collect();
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for share in shares.iter().filter(|s| s.article_count > 0) {
        match by_paper.get(share.newspaper_id.as_str()) {
            Some(s) => points.push(SpectrumPoint {
                newspaper_id: share.newspaper_id.clone(),
                x: s.sentiment_deviation,
                y: share.rate_deviation,
                size: share.article_count,
                color_value: s.mean_simplified,
            }),
            None => warnings.push(format!("newspaper {} has no {kind} scores in topic {topic_id}", share.newspaper_id)),
        }
    }
    Spectrum {
        topic_id,
        subject: Subject::Document(kind),
        points,
        warnings,
    }
}

/// Entity-mode spectrum: y = mention count minus the mean count over
/// mentioning newspapers, x = sd of the newspaper's mean entity score.
pub fn entity_spectrum(topic_id: i64, key: &EntityKey, stats: &BTreeMap<String, EntityNewspaperStats>) -> Spectrum {
    let mentioning: Vec<(&String, &EntityNewspaperStats)> = stats.iter().filter(|(_, s)| s.mention_count > 0).collect();
    let counts: Vec<f64> = mentioning.iter().map(|(_, s)| s.mention_count as f64).collect();
    let (_, count_devs) = mean_deviations(&counts);
    let scored: Vec<NewspaperMean> = mentioning
        .iter()
        .filter_map(|(p, s)| {
            s.mean_simplified.map(|mean| NewspaperMean {
                newspaper_id: (*p).clone(),
                mean,
                count: s.scored_count,
            })
        })
        .collect();
    let subject = Subject::Entity(key.clone());
    let sd: BTreeMap<String, SentimentSummary> = sentiment_deviation(&scored, Scope::Topic(topic_id), subject.clone())
        .into_iter()
        .map(|s| (s.newspaper_id.clone(), s))
        .collect();
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for ((p, s), dy) in mentioning.iter().zip(count_devs) {
        match sd.get(*p) {
            Some(summary) => points.push(SpectrumPoint {
                newspaper_id: (*p).clone(),
                x: summary.sentiment_deviation,
                y: dy,
                size: s.mention_count,
                color_value: summary.mean_simplified,
            }),
            None => warnings.push(format!("newspaper {p} has no scored mentions of {key}")),
        }
    }
    Spectrum {
        topic_id,
        subject,
        points,
        warnings,
    }
}

/// Sentiment summary over every non-noise article.
pub fn cross_topic_sentiment(
    non_noise_articles: &[String],
    newspaper_of: &BTreeMap<String, String>,
    scores: &BTreeMap<String, f64>,
    kind: DocKind,
) -> (Vec<SentimentSummary>, Vec<String>) {
    let (means, warnings) = newspaper_mean_sentiment(non_noise_articles, newspaper_of, scores);
    (sentiment_deviation(&means, Scope::All, Subject::Document(kind)), warnings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub newspaper_id: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Signed rate deviation.
    pub size_value: f64,
    /// Marker radius, `|size_value|`.
    pub radius: f64,
    /// Filled marker for `d ≥ 0`, hollow for `d < 0`.
    pub filled: bool,
    pub color_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapData {
    pub topic_id: i64,
    pub doc_kind: DocKind,
    pub points: Vec<MapPoint>,
    pub omitted_without_location: usize,
    pub warnings: Vec<String>,
}

pub fn map_points(
    topic_id: i64,
    kind: DocKind,
    shares: &[TopicShare],
    sentiment: &[SentimentSummary],
    newspapers: &[Newspaper],
) -> MapData {
    let registry: BTreeMap<&str, &Newspaper> = newspapers.iter().map(|n| (n.id.as_str(), n)).collect();
    let means: BTreeMap<&str, f64> = sentiment
        .iter()
        .map(|s| (s.newspaper_id.as_str(), s.mean_simplified))
        .collect();
    let mut points = Vec::new();
    let mut omitted = 0;
    for share in shares {
        let loc = registry.get(share.newspaper_id.as_str()).and_then(|n| n.location());
        let Some((latitude, longitude)) = loc else {
            omitted += 1;
            continue;
        };
        let d = share.rate_deviation;
        points.push(MapPoint {
            newspaper_id: share.newspaper_id.clone(),
            latitude,
            longitude,
            size_value: d,
            radius: d.abs(),
            filled: d >= 0.0,
            color_value: means.get(share.newspaper_id.as_str()).copied(),
        });
    }
    let mut warnings = Vec::new();
    if points.is_empty() {
        warnings.push(format!("no geolocated newspapers in topic {topic_id}"));
    }
    if omitted > 0 {
        warnings.push(format!("{omitted} newspaper(s) without coordinates omitted"));
    }
    MapData {
        topic_id,
        doc_kind: kind,
        points,
        omitted_without_location: omitted,
        warnings,
    }
}
