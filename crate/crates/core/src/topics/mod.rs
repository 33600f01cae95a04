//! Hierarchical topics built from cluster labels.
//!
//! Base topics carry the cluster ids (noise is [`NOISE_TOPIC`]). Parent topics
//! are materialized records with fresh ids above the largest base id; their
//! term weights are recomputed from the merged documents against the base
//! corpus statistics.

mod ctfidf;
mod hierarchy;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use ctfidf::{
    add_terms, count_terms, ctfidf, merge_counts, ranked_terms, CtfIdf, TermCounts, TermWeights,
};
pub use hierarchy::{average_linkage, cosine_distance, MergeStep};

use crate::digest::round6;
use crate::NOISE_TOPIC;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopicError {
    #[error("{labels} labels given for {docs} documents")]
    LabelCount { labels: usize, docs: usize },
    #[error("invalid topic label {0}")]
    InvalidLabel(i64),
    #[error("unknown topic {0}")]
    UnknownTopic(i64),
    #[error("operation needs the source documents; this tree was loaded from records")]
    ReadOnly,
}

/// One document as seen by the topic builder.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDocument {
    pub article_id: String,
    pub newspaper_id: String,
    pub text: String,
    /// Reduced embedding, used only for centroids.
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub topic_id: i64,
    pub level: u32,
    pub parent_id: Option<i64>,
    pub children: Vec<i64>,
    /// `<id>_<term>_<term>…`
    pub name: String,
    pub article_ids: Vec<String>,
    pub newspaper_ids: Vec<String>,
    pub top_terms: Vec<TermWeight>,
    pub centroid: Vec<f64>,
    /// Average-linkage height at which the children were merged.
    pub merge_distance: Option<f64>,
}

impl TopicRecord {
    pub fn is_noise(&self) -> bool {
        self.topic_id == NOISE_TOPIC
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicConfig {
    pub top_n_terms: usize,
    pub name_terms: usize,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            top_n_terms: 10,
            name_terms: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DocEntry {
    article_id: String,
    newspaper_id: String,
    counts: TermCounts,
    vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovedTopic {
    pub topic_id: i64,
    pub newspaper_id: String,
    pub article_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub moved: Vec<MovedTopic>,
    /// Base topic counts, noise included.
    pub topics_before: usize,
    pub topics_after: usize,
    pub noise_before: usize,
    pub noise_after: usize,
}

/// Node of the UI dendrogram export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub topic_id: i64,
    pub parent_id: Option<i64>,
    pub children: Vec<i64>,
    pub level: u32,
    pub name: String,
    pub article_count: usize,
    pub newspaper_count: usize,
    pub merge_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeView {
    pub max_level: u32,
    pub roots: Vec<i64>,
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicTree {
    records: BTreeMap<i64, TopicRecord>,
    warnings: Vec<String>,
    config: TopicConfig,
    hierarchical: bool,
    docs: Vec<DocEntry>,
    labels: Vec<i64>,
    base_weights: BTreeMap<i64, TermWeights>,
}

impl TopicTree {
    /// Base topics (level 0 plus noise) from per-document cluster labels.
    pub fn from_clusters(
        docs: &[TopicDocument],
        labels: &[i64],
        config: TopicConfig,
    ) -> Result<Self, TopicError> {
        if docs.len() != labels.len() {
            return Err(TopicError::LabelCount {
                labels: labels.len(),
                docs: docs.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l < NOISE_TOPIC) {
            return Err(TopicError::InvalidLabel(bad));
        }
        let entries = docs
            .iter()
            .map(|d| DocEntry {
                article_id: d.article_id.clone(),
                newspaper_id: d.newspaper_id.clone(),
                counts: count_terms(&d.text),
                vector: d.vector.clone(),
            })
            .collect();
        Ok(Self::rebuild(entries, labels.to_vec(), config, false))
    }

    /// Read-only tree over stored records.
    pub fn from_records(records: Vec<TopicRecord>) -> Self {
        let hierarchical = records.iter().any(|r| r.level > 0);
        Self {
            records: records.into_iter().map(|r| (r.topic_id, r)).collect(),
            warnings: Vec::new(),
            config: TopicConfig::default(),
            hierarchical,
            docs: Vec::new(),
            labels: Vec::new(),
            base_weights: BTreeMap::new(),
        }
    }

    fn rebuild(docs: Vec<DocEntry>, labels: Vec<i64>, config: TopicConfig, hierarchical: bool) -> Self {
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        groups.insert(NOISE_TOPIC, Vec::new());
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        let class_counts: BTreeMap<i64, TermCounts> = groups
            .iter()
            .map(|(&id, members)| {
                let mut c = TermCounts::new();
                for &m in members {
                    merge_counts(&mut c, &docs[m].counts);
                }
                (id, c)
            })
            .collect();
        let model = CtfIdf::fit(class_counts.values());

        let mut tree = Self {
            records: BTreeMap::new(),
            warnings: Vec::new(),
            config,
            hierarchical,
            docs,
            labels,
            base_weights: BTreeMap::new(),
        };
        for (&id, members) in &groups {
            let weights = model.weigh(&class_counts[&id]);
            if weights.is_empty() && id != NOISE_TOPIC {
                tree.warnings.push(format!("topic {id} has no terms"));
            }
            let record = tree.make_record(id, 0, members, &weights, Vec::new(), None);
            tree.records.insert(id, record);
            tree.base_weights.insert(id, weights);
        }
        if hierarchical {
            tree.grow_hierarchy(&model, &groups, &class_counts);
        }
        tree
    }

    fn make_record(
        &self,
        id: i64,
        level: u32,
        members: &[usize],
        weights: &TermWeights,
        children: Vec<i64>,
        merge_distance: Option<f64>,
    ) -> TopicRecord {
        let article_ids: BTreeSet<&str> = members.iter().map(|&m| self.docs[m].article_id.as_str()).collect();
        let newspaper_ids: BTreeSet<&str> =
            members.iter().map(|&m| self.docs[m].newspaper_id.as_str()).collect();
        let ranked = ranked_terms(weights, self.config.top_n_terms);
        let mut name = id.to_string();
        for (t, _) in ranked.iter().take(self.config.name_terms) {
            name.push('_');
            name.push_str(t);
        }
        TopicRecord {
            topic_id: id,
            level,
            parent_id: None,
            children,
            name,
            article_ids: article_ids.into_iter().map(String::from).collect(),
            newspaper_ids: newspaper_ids.into_iter().map(String::from).collect(),
            top_terms: ranked
                .into_iter()
                .map(|(term, w)| TermWeight {
                    term,
                    weight: round6(w),
                })
                .collect(),
            centroid: self.centroid(members),
            merge_distance: merge_distance.map(round6),
        }
    }

    fn centroid(&self, members: &[usize]) -> Vec<f64> {
        let vectors: Option<Vec<&Vec<f64>>> = members.iter().map(|&m| self.docs[m].vector.as_ref()).collect();
        let Some(vectors) = vectors.filter(|v| !v.is_empty()) else {
            return Vec::new();
        };
        let dim = vectors[0].len();
        let mut c = vec![0.0; dim];
        for v in &vectors {
            for (a, b) in c.iter_mut().zip(v.iter()) {
                *a += b;
            }
        }
        c.iter().map(|x| round6(x / vectors.len() as f64)).collect()
    }

    fn grow_hierarchy(
        &mut self,
        model: &CtfIdf,
        groups: &BTreeMap<i64, Vec<usize>>,
        class_counts: &BTreeMap<i64, TermCounts>,
    ) {
        let base: Vec<i64> = groups.keys().copied().filter(|&id| id != NOISE_TOPIC).collect();
        if base.len() < 2 {
            return;
        }
        let dist: Vec<Vec<f64>> = base
            .iter()
            .map(|a| {
                base.iter()
                    .map(|b| cosine_distance(&self.base_weights[a], &self.base_weights[b]))
                    .collect()
            })
            .collect();
        let first_new = base.last().copied().unwrap_or(0) + 1;
        let steps = average_linkage(&base, &dist, first_new);

        let mut members: BTreeMap<i64, Vec<usize>> =
            base.iter().map(|&id| (id, groups[&id].clone())).collect();
        let mut counts: BTreeMap<i64, TermCounts> =
            base.iter().map(|&id| (id, class_counts[&id].clone())).collect();
        for s in steps {
            let mut m = members[&s.left].clone();
            m.extend_from_slice(&members[&s.right]);
            m.sort_unstable();
            let mut c = counts[&s.left].clone();
            merge_counts(&mut c, &counts[&s.right]);
            let level = self.records[&s.left].level.max(self.records[&s.right].level) + 1;
            let weights = model.weigh(&c);
            let record = self.make_record(s.new_id, level, &m, &weights, vec![s.left, s.right], Some(s.distance));
            self.records.get_mut(&s.left).unwrap().parent_id = Some(s.new_id);
            self.records.get_mut(&s.right).unwrap().parent_id = Some(s.new_id);
            self.records.insert(s.new_id, record);
            members.insert(s.new_id, m);
            counts.insert(s.new_id, c);
        }
    }

    fn require_docs(&self) -> Result<(), TopicError> {
        if self.docs.is_empty() && !self.records.values().all(|r| r.article_ids.is_empty()) {
            return Err(TopicError::ReadOnly);
        }
        Ok(())
    }

    /// Move every base topic covered by a single newspaper into noise and
    /// rebuild terms, centroids and (if present) the hierarchy.
    pub fn merge_single_source_topics(&self) -> Result<(TopicTree, MergeReport), TopicError> {
        self.require_docs()?;
        let single: BTreeMap<i64, &TopicRecord> = self
            .base_topics()
            .filter(|r| r.newspaper_ids.len() == 1)
            .map(|r| (r.topic_id, r))
            .collect();
        let labels: Vec<i64> = self
            .labels
            .iter()
            .map(|l| if single.contains_key(l) { NOISE_TOPIC } else { *l })
            .collect();
        let next = Self::rebuild(self.docs.clone(), labels, self.config, self.hierarchical);
        let report = MergeReport {
            moved: single
                .values()
                .map(|r| MovedTopic {
                    topic_id: r.topic_id,
                    newspaper_id: r.newspaper_ids[0].clone(),
                    article_count: r.article_ids.len(),
                })
                .collect(),
            topics_before: self.base_topics().count() + 1,
            topics_after: next.base_topics().count() + 1,
            noise_before: self.noise().article_ids.len(),
            noise_after: next.noise().article_ids.len(),
        };
        Ok((next, report))
    }

    /// Add parent topics by average-linkage agglomeration of base topics.
    pub fn build_hierarchy(&self) -> Result<TopicTree, TopicError> {
        self.require_docs()?;
        Ok(Self::rebuild(self.docs.clone(), self.labels.clone(), self.config, true))
    }

    pub fn is_hierarchical(&self) -> bool {
        self.hierarchical
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn record(&self, id: i64) -> Result<&TopicRecord, TopicError> {
        self.records.get(&id).ok_or(TopicError::UnknownTopic(id))
    }

    pub fn records(&self) -> impl Iterator<Item = &TopicRecord> {
        self.records.values()
    }

    pub fn noise(&self) -> &TopicRecord {
        &self.records[&NOISE_TOPIC]
    }

    /// Level-0 topics, noise excluded, ascending id.
    pub fn base_topics(&self) -> impl Iterator<Item = &TopicRecord> {
        self.records.values().filter(|r| r.level == 0 && !r.is_noise())
    }

    pub fn max_level(&self) -> u32 {
        self.records.values().map(|r| r.level).max().unwrap_or(0)
    }

    pub fn roots(&self) -> Vec<i64> {
        self.records
            .values()
            .filter(|r| !r.is_noise() && r.parent_id.is_none())
            .map(|r| r.topic_id)
            .collect()
    }

    pub fn articles_at(&self, id: i64) -> Result<&[String], TopicError> {
        Ok(&self.record(id)?.article_ids)
    }

    pub fn top_terms(&self, id: i64, n: usize) -> Result<Vec<TermWeight>, TopicError> {
        Ok(self.record(id)?.top_terms.iter().take(n).cloned().collect())
    }

    /// Base topic ids below (or equal to) `id`.
    pub fn base_descendants(&self, id: i64) -> Result<Vec<i64>, TopicError> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            let r = self.record(x)?;
            if r.children.is_empty() {
                out.push(x);
            } else {
                stack.extend(r.children.iter().rev());
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Topics visible when the hierarchy is cut at `level`: nodes at or below
    /// the level whose parent lies above it.
    pub fn level_cut(&self, level: u32) -> Vec<i64> {
        self.records
            .values()
            .filter(|r| !r.is_noise() && r.level <= level)
            .filter(|r| r.parent_id.is_none_or(|p| self.records[&p].level > level))
            .map(|r| r.topic_id)
            .collect()
    }

    /// All records, ascending id.
    pub fn to_records(&self) -> Vec<TopicRecord> {
        self.records.values().cloned().collect()
    }

    pub fn tree_view(&self) -> TreeView {
        TreeView {
            max_level: self.max_level(),
            roots: self.roots(),
            nodes: self
                .records
                .values()
                .map(|r| TreeNode {
                    topic_id: r.topic_id,
                    parent_id: r.parent_id,
                    children: r.children.clone(),
                    level: r.level,
                    name: r.name.clone(),
                    article_count: r.article_ids.len(),
                    newspaper_count: r.newspaper_ids.len(),
                    merge_distance: r.merge_distance,
                })
                .collect(),
        }
    }

    /// Check the structural invariants; returns the first violation found.
    pub fn validate(&self) -> Result<(), String> {
        if !self.records.contains_key(&NOISE_TOPIC) {
            return Err("missing noise record".into());
        }
        for r in self.records.values() {
            if let Some(p) = r.parent_id {
                let parent = self.records.get(&p).ok_or(format!("topic {} has unknown parent {p}", r.topic_id))?;
                if !parent.children.contains(&r.topic_id) {
                    return Err(format!("parent {p} does not list child {}", r.topic_id));
                }
            }
            if r.level > 0 {
                if r.children.len() < 2 {
                    return Err(format!("topic {} has fewer than 2 children", r.topic_id));
                }
                let mut union = BTreeSet::new();
                for c in &r.children {
                    let child = self.records.get(c).ok_or(format!("unknown child {c}"))?;
                    if child.parent_id != Some(r.topic_id) {
                        return Err(format!("child {c} does not point back to {}", r.topic_id));
                    }
                    union.extend(child.article_ids.iter().cloned());
                }
                let own: BTreeSet<String> = r.article_ids.iter().cloned().collect();
                if own != union {
                    return Err(format!("topic {} is not the union of its children", r.topic_id));
                }
            }
        }
        let all: BTreeSet<&str> = self
            .records
            .values()
            .filter(|r| r.level == 0)
            .flat_map(|r| r.article_ids.iter().map(String::as_str))
            .collect();
        for level in 0..=self.max_level() {
            let mut seen = BTreeSet::new();
            let cut = self.level_cut(level);
            for id in cut.iter().copied().chain([NOISE_TOPIC]) {
                for a in &self.records[&id].article_ids {
                    if !seen.insert(a.as_str()) {
                        return Err(format!("article {a} appears twice at level {level}"));
                    }
                }
            }
            if seen != all {
                return Err(format!("level {level} does not cover the corpus"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, paper: &str, text: &str) -> TopicDocument {
        TopicDocument {
            article_id: id.into(),
            newspaper_id: paper.into(),
            text: text.into(),
            vector: None,
        }
    }

    fn fixture() -> (Vec<TopicDocument>, Vec<i64>) {
        let docs = vec![
            doc("a1", "p1", "festival music stage"),
            doc("a2", "p2", "festival music crowd"),
            doc("a3", "p3", "music festival tickets"),
            doc("b1", "p1", "election vote ballot"),
            doc("b2", "p2", "election campaign vote"),
            doc("b3", "p3", "ballot count election"),
            doc("c1", "p4", "harbour ferry strike"),
            doc("c2", "p4", "ferry strike workers"),
            doc("c3", "p4", "strike harbour union"),
            doc("c4", "p4", "ferry union talks"),
            doc("n1", "p1", "weather sunny"),
        ];
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 2, -1];
        (docs, labels)
    }

    #[test]
    fn base_topics_and_names() {
        let (docs, labels) = fixture();
        let t = TopicTree::from_clusters(&docs, &labels, TopicConfig::default()).unwrap();
        assert_eq!(t.base_topics().count(), 3);
        assert_eq!(t.noise().article_ids, vec!["n1"]);
        assert!(t.record(0).unwrap().name.starts_with("0_festival_music"));
        assert_eq!(t.articles_at(1).unwrap(), &["b1", "b2", "b3"]);
        assert_eq!(t.articles_at(7), Err(TopicError::UnknownTopic(7)));
        t.validate().unwrap();
    }

    #[test]
    fn single_source_merge_moves_articles_to_noise() {
        let (docs, labels) = fixture();
        let t = TopicTree::from_clusters(&docs, &labels, TopicConfig::default()).unwrap();
        let (m, report) = t.merge_single_source_topics().unwrap();
        assert_eq!(report.moved.len(), 1);
        assert_eq!(report.moved[0].topic_id, 2);
        assert_eq!(report.noise_after - report.noise_before, 4);
        assert_eq!((report.topics_before, report.topics_after), (4, 3));
        assert!(m.record(2).is_err());
        let (again, r2) = m.merge_single_source_topics().unwrap();
        assert!(r2.moved.is_empty());
        assert_eq!(again, m);
    }

    #[test]
    fn hierarchy_of_two_topics_has_one_parent() {
        let (docs, labels) = fixture();
        let t = TopicTree::from_clusters(&docs, &labels, TopicConfig::default())
            .unwrap()
            .merge_single_source_topics()
            .unwrap()
            .0
            .build_hierarchy()
            .unwrap();
        assert_eq!(t.roots(), vec![2]);
        let root = t.record(2).unwrap();
        assert_eq!(root.level, 1);
        assert_eq!(root.children, vec![0, 1]);
        assert_eq!(root.article_ids.len(), 6);
        assert_eq!(t.record(0).unwrap().parent_id, Some(2));
        t.validate().unwrap();
    }

    #[test]
    fn duplicate_topics_merge_first() {
        let docs = vec![
            doc("x1", "p1", "alpha beta"),
            doc("x2", "p2", "gamma delta"),
            doc("y1", "p1", "gamma delta"),
            doc("z1", "p2", "alpha beta"),
        ];
        let t = TopicTree::from_clusters(&docs, &[0, 1, 2, 3], TopicConfig::default())
            .unwrap()
            .build_hierarchy()
            .unwrap();
        let first = t.record(4).unwrap();
        assert_eq!(first.children, vec![0, 3]);
        assert_eq!(first.merge_distance, Some(0.0));
        assert_eq!(t.record(5).unwrap().children, vec![1, 2]);
        assert_eq!(t.record(6).unwrap().level, 2);
        assert_eq!(t.level_cut(1), vec![4, 5]);
        t.validate().unwrap();
    }

    #[test]
    fn parent_terms_are_recomputed_from_merged_documents() {
        let (docs, labels) = fixture();
        let t = TopicTree::from_clusters(&docs, &labels, TopicConfig::default())
            .unwrap()
            .build_hierarchy()
            .unwrap();
        let root = t.record(t.roots()[0]).unwrap();
        let terms: BTreeSet<&str> = root.top_terms.iter().map(|w| w.term.as_str()).collect();
        assert!(terms.contains("election") && terms.contains("strike"));
        assert_eq!(t.top_terms(0, 1).unwrap().len(), 1);
    }
}
