//! Entity mentions, target contexts and per-topic entity statistics.
//!
//! Offsets are Unicode scalar indices into the cleaned article body.
//! Entities are keyed by exact surface plus group; an optional alias map
//! rewrites surfaces before keying.

mod context;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use context::{make_context, sentence_index, ContextMode, Span, TargetContext, ABBREVIATIONS};

use crate::corpus::RecordError;
use crate::scoring::{Probabilities, ScoringError};
use crate::text::CharIndex;

/// Surface rewrites applied before keying (`from → to`).
pub type AliasMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityGroup {
    PER,
    ORG,
    LOC,
    MISC,
}

impl FromStr for EntityGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PER" => Ok(Self::PER),
            "ORG" => Ok(Self::ORG),
            "LOC" => Ok(Self::LOC),
            "MISC" => Ok(Self::MISC),
            other => Err(format!("entity group {other:?} is not one of PER, ORG, LOC, MISC")),
        }
    }
}

impl fmt::Display for EntityGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub mention_id: String,
    pub article_id: String,
    pub entity_group: EntityGroup,
    pub surface: String,
    pub detector_score: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityKey {
    pub surface: String,
    pub group: EntityGroup,
}

impl EntityKey {
    pub fn new(surface: impl Into<String>, group: EntityGroup) -> Self {
        Self {
            surface: surface.into(),
            group,
        }
    }

    pub fn of(mention: &EntityMention, aliases: Option<&AliasMap>) -> Self {
        let surface = aliases
            .and_then(|m| m.get(&mention.surface))
            .unwrap_or(&mention.surface);
        Self::new(surface.clone(), mention.entity_group)
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.surface, self.group)
    }
}

impl FromStr for EntityKey {
    type Err = String;
    /// `surface/GROUP`, splitting at the last slash.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (surface, group) = s
            .rsplit_once('/')
            .ok_or_else(|| format!("entity key {s:?} must look like surface/GROUP"))?;
        Ok(Self::new(surface, group.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySentiment {
    pub mention_id: String,
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
    pub simplified: f64,
    pub model_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MentionSet {
    mentions: Vec<EntityMention>,
    by_id: HashMap<String, usize>,
}

impl MentionSet {
    pub fn new(mentions: Vec<EntityMention>) -> Self {
        let by_id = mentions
            .iter()
            .enumerate()
            .map(|(i, m)| (m.mention_id.clone(), i))
            .collect();
        Self { mentions, by_id }
    }

    pub fn mentions(&self) -> &[EntityMention] {
        &self.mentions
    }

    pub fn get(&self, id: &str) -> Option<&EntityMention> {
        self.by_id.get(id).map(|&i| &self.mentions[i])
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn in_articles<'a>(&'a self, articles: &'a BTreeSet<&str>) -> impl Iterator<Item = &'a EntityMention> {
        self.mentions
            .iter()
            .filter(move |m| articles.contains(m.article_id.as_str()))
    }
}

#[derive(Deserialize)]
struct MentionLine {
    mention_id: String,
    article_id: String,
    entity_group: String,
    surface: String,
    detector_score: f64,
    start: usize,
    end: usize,
}

/// Parse `entities.jsonl` against cleaned bodies (`article_id → body`).
pub fn load_mentions<R: BufRead>(
    reader: R,
    bodies: &BTreeMap<String, String>,
) -> std::io::Result<(MentionSet, Vec<RecordError>)> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut indexes: HashMap<&str, CharIndex> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reject = |id: Option<String>, message: String| {
            errors.push(RecordError {
                line: i + 1,
                id,
                message,
            })
        };
        let rec: MentionLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                reject(None, format!("malformed mention record: {e}"));
                continue;
            }
        };
        let id = Some(rec.mention_id.clone());
        let group = match rec.entity_group.parse::<EntityGroup>() {
            Ok(g) => g,
            Err(e) => {
                reject(id, e);
                continue;
            }
        };
        if !(0.0..=1.0).contains(&rec.detector_score) {
            reject(id, format!("detector_score {} outside [0, 1]", rec.detector_score));
            continue;
        }
        let Some((key, body)) = bodies.get_key_value(&rec.article_id) else {
            reject(id, format!("unknown article_id {:?}", rec.article_id));
            continue;
        };
        let idx = indexes.entry(key.as_str()).or_insert_with(|| CharIndex::new(body));
        if rec.start >= rec.end || rec.end > idx.char_len() {
            reject(
                id,
                format!(
                    "offsets [{}, {}) invalid for body of {} characters",
                    rec.start,
                    rec.end,
                    idx.char_len()
                ),
            );
            continue;
        }
        let found = idx.slice(body, rec.start, rec.end).unwrap_or_default();
        if found != rec.surface {
            reject(
                id,
                format!(
                    "surface {:?} does not match body[{}..{}] = {found:?}",
                    rec.surface, rec.start, rec.end
                ),
            );
            continue;
        }
        if !seen.insert(rec.mention_id.clone()) {
            reject(id, "duplicate mention_id".into());
            continue;
        }
        out.push(EntityMention {
            mention_id: rec.mention_id,
            article_id: rec.article_id,
            entity_group: group,
            surface: rec.surface,
            detector_score: rec.detector_score,
            start: rec.start,
            end: rec.end,
        });
    }
    Ok((MentionSet::new(out), errors))
}

#[derive(Deserialize)]
struct EntitySentimentLine {
    mention_id: String,
    positive: f64,
    neutral: f64,
    negative: f64,
    model_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntitySentimentSet {
    records: Vec<EntitySentiment>,
}

impl EntitySentimentSet {
    pub fn from_records(records: Vec<EntitySentiment>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[EntitySentiment] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scores by mention for one model (required when several are present).
    pub fn by_mention(&self, model: Option<&str>) -> Result<BTreeMap<String, &EntitySentiment>, ScoringError> {
        let models: BTreeSet<&str> = self.records.iter().map(|r| r.model_id.as_str()).collect();
        let chosen = match model {
            Some(m) if models.contains(m) => m,
            Some(m) => {
                return Err(ScoringError::MissingEntityModel { model: m.to_string() })
            }
            None if models.len() <= 1 => models.iter().next().copied().unwrap_or(""),
            None => {
                return Err(ScoringError::AmbiguousEntityModel {
                    models: models.into_iter().map(String::from).collect(),
                })
            }
        };
        Ok(self
            .records
            .iter()
            .filter(|r| r.model_id == chosen)
            .map(|r| (r.mention_id.clone(), r))
            .collect())
    }
}

pub fn load_entity_sentiment<R: BufRead>(
    reader: R,
    mentions: &MentionSet,
) -> std::io::Result<(EntitySentimentSet, Vec<RecordError>)> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reject = |id: Option<String>, message: String| {
            errors.push(RecordError {
                line: i + 1,
                id,
                message,
            })
        };
        let rec: EntitySentimentLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                reject(None, format!("malformed entity sentiment record: {e}"));
                continue;
            }
        };
        let id = Some(rec.mention_id.clone());
        if mentions.get(&rec.mention_id).is_none() {
            reject(id, "unknown mention_id".into());
            continue;
        }
        let p = Probabilities {
            positive: rec.positive,
            neutral: rec.neutral,
            negative: rec.negative,
        };
        if let Err(e) = p.validate() {
            reject(id, e.to_string());
            continue;
        }
        if !seen.insert((rec.mention_id.clone(), rec.model_id.clone())) {
            reject(id, "duplicate (mention_id, model_id)".into());
            continue;
        }
        out.push(EntitySentiment {
            mention_id: rec.mention_id,
            positive: p.positive,
            neutral: p.neutral,
            negative: p.negative,
            simplified: p.simplified(),
            model_id: rec.model_id,
        });
    }
    Ok((EntitySentimentSet::from_records(out), errors))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCount {
    pub key: EntityKey,
    pub count: usize,
}

fn rank(counts: BTreeMap<EntityKey, usize>) -> Vec<EntityCount> {
    let mut v: Vec<EntityCount> = counts
        .into_iter()
        .map(|(key, count)| EntityCount { key, count })
        .collect();
    // BTreeMap order already sorts by surface then group; the sort is stable
    v.sort_by_key(|e| std::cmp::Reverse(e.count));
    v
}

/// All entity keys in `articles`, most mentioned first, ties by surface.
pub fn entity_counts(mentions: &MentionSet, articles: &BTreeSet<&str>, aliases: Option<&AliasMap>) -> Vec<EntityCount> {
    let mut counts = BTreeMap::new();
    for m in mentions.in_articles(articles) {
        *counts.entry(EntityKey::of(m, aliases)).or_default() += 1;
    }
    rank(counts)
}

pub fn top_entities(
    mentions: &MentionSet,
    articles: &BTreeSet<&str>,
    k: usize,
    aliases: Option<&AliasMap>,
) -> Vec<EntityCount> {
    let mut v = entity_counts(mentions, articles, aliases);
    v.truncate(k);
    v
}

/// Entities analyzed in a parent topic: the union of its base topics'
/// top-k, counted and ranked over the parent's articles.
pub fn analyzed_entities(
    mentions: &MentionSet,
    base_topic_articles: &[BTreeSet<&str>],
    k: usize,
    aliases: Option<&AliasMap>,
) -> Vec<EntityCount> {
    let mut keys = BTreeSet::new();
    let mut all = BTreeSet::new();
    for arts in base_topic_articles {
        keys.extend(top_entities(mentions, arts, k, aliases).into_iter().map(|e| e.key));
        all.extend(arts.iter().copied());
    }
    entity_counts(mentions, &all, aliases)
        .into_iter()
        .filter(|e| keys.contains(&e.key))
        .collect()
}

/// Per-newspaper mention statistics of one entity. Means run over the
/// mentions that carry a sentiment score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNewspaperStats {
    pub mention_count: usize,
    pub scored_count: usize,
    pub mean_simplified: Option<f64>,
    pub mean_neutral: Option<f64>,
}

pub fn entity_newspaper_stats(
    mentions: &MentionSet,
    sentiments: &BTreeMap<String, &EntitySentiment>,
    articles: &BTreeSet<&str>,
    newspaper_of: &BTreeMap<String, String>,
    key: &EntityKey,
    aliases: Option<&AliasMap>,
) -> BTreeMap<String, EntityNewspaperStats> {
    let mut acc: BTreeMap<String, (usize, usize, f64, f64)> = BTreeMap::new();
    for m in mentions.in_articles(articles) {
        if &EntityKey::of(m, aliases) != key {
            continue;
        }
        let Some(paper) = newspaper_of.get(&m.article_id) else {
            continue;
        };
        let e = acc.entry(paper.clone()).or_default();
        e.0 += 1;
        if let Some(s) = sentiments.get(&m.mention_id) {
            e.1 += 1;
            e.2 += s.simplified;
            e.3 += s.neutral;
        }
    }
    acc.into_iter()
        .map(|(paper, (count, scored, sum_s, sum_n))| {
            let mean = |x: f64| (scored > 0).then(|| x / scored as f64);
            (
                paper,
                EntityNewspaperStats {
                    mention_count: count,
                    scored_count: scored,
                    mean_simplified: mean(sum_s),
                    mean_neutral: mean(sum_n),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub mention_id: String,
    pub left: String,
    pub target: String,
    pub right: String,
}

/// Contexts for the mentions of each base topic's top-k entities, in
/// mention order. A mention is exported only for the topic it occurs in.
pub fn export_contexts(
    mentions: &MentionSet,
    bodies: &BTreeMap<String, String>,
    base_topic_articles: &[BTreeSet<&str>],
    k: usize,
    mode: ContextMode,
    aliases: Option<&AliasMap>,
) -> Vec<ContextRecord> {
    let mut wanted: HashSet<&str> = HashSet::new();
    for arts in base_topic_articles {
        let keys: BTreeSet<EntityKey> = top_entities(mentions, arts, k, aliases)
            .into_iter()
            .map(|e| e.key)
            .collect();
        for m in mentions.in_articles(arts) {
            if keys.contains(&EntityKey::of(m, aliases)) {
                wanted.insert(m.mention_id.as_str());
            }
        }
    }
    mentions
        .mentions()
        .iter()
        .filter(|m| wanted.contains(m.mention_id.as_str()))
        .filter_map(|m| {
            let body = bodies.get(&m.article_id)?;
            let c = make_context(body, m.start, m.end, mode);
            Some(ContextRecord {
                mention_id: m.mention_id.clone(),
                left: c.left,
                target: c.target,
                right: c.right,
            })
        })
        .collect()
}
