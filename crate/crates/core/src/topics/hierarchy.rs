//! Average-linkage agglomeration of topics over cosine distance.

use serde::{Deserialize, Serialize};

use super::ctfidf::TermWeights;

/// Cosine distance between sparse weight vectors; 1 when either is all zero.
pub fn cosine_distance(a: &TermWeights, b: &TermWeights) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(t, x)| large.get(t).map(|y| x * y))
        .sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: i64,
    pub right: i64,
    pub distance: f64,
    pub new_id: i64,
}

/// Agglomerate `ids` (ascending) given their pairwise distance matrix.
///
/// Cluster distance is the mean of member pair distances. Each merge creates
/// `first_new_id + k`; among equal distances the lexicographically smallest
/// `(smaller id, larger id)` pair merges first.
pub fn average_linkage(ids: &[i64], dist: &[Vec<f64>], first_new_id: i64) -> Vec<MergeStep> {
    let k = ids.len();
    if k < 2 {
        return Vec::new();
    }
    // slot i holds a live cluster; sums[i][j] = Σ pair distances, sizes[i] = members
    let mut slot_id: Vec<i64> = ids.to_vec();
    let mut alive = vec![true; k];
    let mut sizes = vec![1usize; k];
    let mut sums: Vec<Vec<f64>> = dist.to_vec();
    let mut steps = Vec::with_capacity(k - 1);

    for next in (first_new_id..).take(k - 1) {
        let mut live: Vec<usize> = (0..k).filter(|&i| alive[i]).collect();
        live.sort_by_key(|&i| slot_id[i]);
        let mut best: Option<(f64, usize, usize)> = None;
        for (p, &i) in live.iter().enumerate() {
            for &j in &live[p + 1..] {
                let d = sums[i][j] / (sizes[i] * sizes[j]) as f64;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.expect("at least two live clusters");
        steps.push(MergeStep {
            left: slot_id[i],
            right: slot_id[j],
            distance: d,
            new_id: next,
        });
        // reuse slot i for the merged cluster
        for &x in &live {
            if x != i && x != j {
                let s = sums[i][x] + sums[j][x];
                sums[i][x] = s;
                sums[x][i] = s;
            }
        }
        sizes[i] += sizes[j];
        alive[j] = false;
        slot_id[i] = next;
    }
    steps
}
