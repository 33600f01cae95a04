//! Excess-of-mass cluster selection over a condensed tree.

use serde::{Deserialize, Serialize};

use super::{CondensedTree, EmbeddingSet};

/// Per-point labels (−1 = noise) and membership strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub labels: Vec<i64>,
    pub strengths: Vec<f64>,
    /// Condensed-tree node behind each label, indexed by label.
    pub selected_nodes: Vec<usize>,
}

/// Labels joined back onto article ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub article_ids: Vec<String>,
    pub labels: Vec<i64>,
    pub strengths: Vec<f64>,
}

impl ClusterAssignment {
    pub fn new(embeddings: &EmbeddingSet, labels: &Labels) -> Self {
        Self {
            article_ids: embeddings.article_ids().to_vec(),
            labels: labels.labels.clone(),
            strengths: labels.strengths.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        let mut ids: Vec<i64> = self.labels.iter().copied().filter(|&l| l >= 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Select the stability-maximising antichain of clusters and label points.
///
/// A node is kept iff its stability is strictly greater than the summed
/// stability of the best selection below it. The root is only eligible when
/// `allow_single_cluster` is set. Labels are numbered by the smallest point
/// index each selected cluster contains.
pub fn extract_clusters(tree: &CondensedTree, allow_single_cluster: bool) -> Labels {
    let m = tree.nodes.len();
    let mut selected = vec![false; m];
    let mut best = vec![0.0f64; m];
    // children always have larger ids than their parent
    for id in (0..m).rev() {
        let node = &tree.nodes[id];
        let eligible = id != 0 || allow_single_cluster;
        if node.children.is_empty() {
            best[id] = node.stability;
            selected[id] = eligible;
            continue;
        }
        let below: f64 = node.children.iter().map(|&c| best[c]).sum();
        if eligible && node.stability > below {
            best[id] = node.stability;
            selected[id] = true;
            let mut stack = node.children.clone();
            while let Some(c) = stack.pop() {
                selected[c] = false;
                stack.extend_from_slice(&tree.nodes[c].children);
            }
        } else {
            best[id] = below;
        }
    }

    let n = tree.n_points;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for e in &tree.points {
        let mut node = Some(e.cluster);
        while let Some(id) = node {
            if selected[id] {
                owner[e.point] = Some(id);
                break;
            }
            node = tree.nodes[id].parent_id;
        }
    }

    let mut first_point: Vec<(usize, usize)> = Vec::new();
    for (p, o) in owner.iter().enumerate() {
        if let Some(id) = *o {
            if !first_point.iter().any(|&(node, _)| node == id) {
                first_point.push((id, p));
            }
        }
    }
    first_point.sort_by_key(|&(_, p)| p);
    let selected_nodes: Vec<usize> = first_point.iter().map(|&(id, _)| id).collect();

    let mut lambda_max = vec![0.0f64; m];
    for e in &tree.points {
        if let Some(id) = owner[e.point] {
            lambda_max[id] = lambda_max[id].max(e.lambda);
        }
    }

    let mut labels = vec![-1i64; n];
    let mut strengths = vec![0.0f64; n];
    for e in &tree.points {
        let Some(id) = owner[e.point] else { continue };
        labels[e.point] = selected_nodes.iter().position(|&s| s == id).unwrap() as i64;
        let max = lambda_max[id];
        strengths[e.point] = if max == 0.0 {
            1.0
        } else if max.is_infinite() {
            if e.lambda.is_infinite() {
                1.0
            } else {
                0.0
            }
        } else {
            (e.lambda / max).clamp(0.0, 1.0)
        };
    }

    Labels {
        labels,
        strengths,
        selected_nodes,
    }
}
