//! Brute-force reference implementations for the test suites.
//!
//! Everything here favours obviousness over speed and shares no code with
//! the production crates.

use std::collections::BTreeSet;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn pairwise(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| points.iter().map(|b| euclidean(a, b)).collect())
        .collect()
}

/// Distance to the k-th nearest other point.
pub fn core_distances(dist: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..dist.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..dist.len()).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

pub fn mutual_reachability(dist: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let core = core_distances(dist, k);
    let n = dist.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { core[i].max(core[j]).max(dist[i][j]) })
                .collect()
        })
        .collect()
}

/// Edges of the labelled tree encoded by a Prüfer sequence.
fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Minimum spanning-tree weight by enumerating all n^(n-2) labelled trees.
pub fn mst_weight_exhaustive(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return w[0][1];
    }
    let mut seq = vec![0usize; n - 2];
    let mut best = f64::INFINITY;
    loop {
        let total: f64 = prufer_edges(&seq, n).iter().map(|&(a, b)| w[a][b]).sum();
        if total < best {
            best = total;
        }
        // odometer increment
        let mut i = 0;
        while i < seq.len() {
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
        if i == seq.len() {
            return best;
        }
    }
}

/// One merge of the naive agglomeration: the new cluster and its height.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveMerge {
    pub height: f64,
    pub left: BTreeSet<usize>,
    pub right: BTreeSet<usize>,
}

/// Single linkage by repeatedly scanning every cluster pair.
pub fn single_linkage(w: &[Vec<f64>]) -> Vec<NaiveMerge> {
    let mut clusters: Vec<BTreeSet<usize>> = (0..w.len()).map(|i| BTreeSet::from([i])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let mut d = f64::INFINITY;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        d = d.min(w[a][b]);
                    }
                }
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (h, i, j) = best;
        let right = clusters.remove(j);
        let left = clusters.remove(i);
        let mut merged = left.clone();
        merged.extend(&right);
        clusters.push(merged);
        merges.push(NaiveMerge { height: h, left, right });
    }
    merges
}

/// Whether the merge heights are pairwise distinct, which makes the
/// single-linkage hierarchy unique.
pub fn heights_distinct(merges: &[NaiveMerge]) -> bool {
    let mut h: Vec<f64> = merges.iter().map(|m| m.height).collect();
    h.sort_by(f64::total_cmp);
    h.windows(2).all(|p| p[0] < p[1])
}

#[derive(Debug, Clone)]
pub struct NaiveCluster {
    pub members: BTreeSet<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub stability: f64,
}

fn lambda(h: f64) -> f64 {
    if h > 0.0 {
        1.0 / h
    } else {
        f64::INFINITY
    }
}

/// Condensed clusters computed top-down from the naive hierarchy.
pub fn condensed_clusters(n: usize, merges: &[NaiveMerge], min_cluster_size: usize) -> Vec<NaiveCluster> {
    let all: BTreeSet<usize> = (0..n).collect();
    let mut out = vec![NaiveCluster {
        members: all.clone(),
        parent: None,
        children: Vec::new(),
        stability: 0.0,
    }];
    // (member set currently tracked, owning cluster, birth lambda)
    let mut work = vec![(all, 0usize, 0.0f64)];
    while let Some((set, cid, birth)) = work.pop() {
        if set.len() < 2 {
            // a lone point stays until lambda reaches infinity; ignore it here
            // since random inputs never produce zero distances
            continue;
        }
        let m = merges
            .iter()
            .find(|m| m.left.len() + m.right.len() == set.len() && m.left.union(&m.right).eq(set.iter()))
            .expect("every tracked set is a merge result");
        let l = lambda(m.height);
        let gain = |count: usize| if l > birth { (l - birth) * count as f64 } else { 0.0 };
        let big_left = m.left.len() >= min_cluster_size;
        let big_right = m.right.len() >= min_cluster_size;
        if big_left && big_right {
            out[cid].stability += gain(set.len());
            for side in [&m.left, &m.right] {
                let id = out.len();
                out.push(NaiveCluster {
                    members: side.clone(),
                    parent: Some(cid),
                    children: Vec::new(),
                    stability: 0.0,
                });
                out[cid].children.push(id);
                work.push((side.clone(), id, l));
            }
        } else if big_left || big_right {
            let (keep, fall) = if big_left { (&m.left, &m.right) } else { (&m.right, &m.left) };
            out[cid].stability += gain(fall.len());
            work.push((keep.clone(), cid, birth));
        } else {
            out[cid].stability += gain(set.len());
        }
    }
    out
}

/// Labels from the antichain of maximal total stability, found by trying
/// every subset of clusters. Ties prefer the selection with more clusters.
pub fn exhaustive_labels(n: usize, clusters: &[NaiveCluster], allow_single_cluster: bool) -> Vec<i64> {
    let candidates: Vec<usize> = (0..clusters.len())
        .filter(|&c| allow_single_cluster || clusters[c].parent.is_some())
        .collect();
    assert!(candidates.len() <= 20, "too many clusters for exhaustive search");
    let ancestor_of = |a: usize, mut b: usize| loop {
        match clusters[b].parent {
            Some(p) if p == a => return true,
            Some(p) => b = p,
            None => return false,
        }
    };
    let mut best: (f64, usize, Vec<usize>) = (f64::NEG_INFINITY, 0, Vec::new());
    for mask in 0u32..(1 << candidates.len()) {
        let chosen: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &c)| c)
            .collect();
        let antichain = chosen
            .iter()
            .all(|&a| chosen.iter().all(|&b| a == b || !ancestor_of(a, b)));
        if !antichain {
            continue;
        }
        let total: f64 = chosen.iter().map(|&c| clusters[c].stability).sum();
        if total > best.0 || (total == best.0 && chosen.len() > best.1) {
            best = (total, chosen.len(), chosen);
        }
    }
    let mut selected = best.2;
    selected.sort_by_key(|&c| *clusters[c].members.iter().next().expect("non-empty"));
    let mut labels = vec![-1i64; n];
    for (label, &c) in selected.iter().enumerate() {
        for &p in &clusters[c].members {
            labels[p] = label as i64;
        }
    }
    labels
}

/// Full naive pipeline from raw points.
pub fn hdbscan_labels(points: &[Vec<f64>], min_cluster_size: usize, min_samples: usize) -> Option<Vec<i64>> {
    let w = mutual_reachability(&pairwise(points), min_samples);
    let merges = single_linkage(&w);
    if !heights_distinct(&merges) {
        return None;
    }
    let clusters = condensed_clusters(points.len(), &merges, min_cluster_size);
    Some(exhaustive_labels(points.len(), &clusters, false))
}

/// Best total stability over antichains of a tree given as parent links;
/// `eligible` marks nodes that may be chosen.
pub fn best_antichain_total(parent: &[Option<usize>], stability: &[f64], eligible: &[bool]) -> f64 {
    let m = parent.len();
    assert!(m <= 22, "too many nodes for exhaustive search");
    let ancestor_of = |a: usize, mut b: usize| loop {
        match parent[b] {
            Some(p) if p == a => return true,
            Some(p) => b = p,
            None => return false,
        }
    };
    let mut best = 0.0f64;
    for mask in 0u32..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if chosen.iter().any(|&c| !eligible[c]) {
            continue;
        }
        if chosen.iter().all(|&a| chosen.iter().all(|&b| a == b || !ancestor_of(a, b))) {
            best = best.max(chosen.iter().map(|&c| stability[c]).sum());
        }
    }
    best
}

/// Average linkage recomputing every cluster distance from member pairs.
/// Returns `(left, right, distance, new_id)` with `left < right`.
pub fn average_linkage(ids: &[i64], dist: &[Vec<f64>], first_new_id: i64) -> Vec<(i64, i64, f64, i64)> {
    let mut clusters: Vec<(i64, Vec<usize>)> = ids.iter().enumerate().map(|(i, &id)| (id, vec![i])).collect();
    let mut next = first_new_id;
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, i64, i64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in 0..clusters.len() {
                if i == j {
                    continue;
                }
                let (lo, hi) = if clusters[i].0 < clusters[j].0 { (i, j) } else { continue };
                let mut sum = 0.0;
                for &a in &clusters[lo].1 {
                    for &b in &clusters[hi].1 {
                        sum += dist[a][b];
                    }
                }
                let d = sum / (clusters[lo].1.len() * clusters[hi].1.len()) as f64;
                let key = (d, clusters[lo].0, clusters[hi].0, lo, hi);
                let better = match best {
                    None => true,
                    Some(b) => (key.0, key.1, key.2) < (b.0, b.1, b.2),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (d, l, r, i, j) = best.expect("two clusters remain");
        let mut members = clusters[i].1.clone();
        members.extend(&clusters[j].1);
        let (first, second) = if i > j { (i, j) } else { (j, i) };
        clusters.remove(first);
        clusters.remove(second);
        clusters.push((next, members));
        out.push((l, r, d, next));
        next += 1;
    }
    out
}

/// Rate = 1 - errors/total, with 1 for an empty total.
pub fn rate(errors: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        (total - errors) as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prufer_enumerates_cayley_count() {
        // every labelled tree on 4 nodes has weight 3 with unit weights,
        // and the decoder yields n - 1 edges each time
        let w = vec![vec![1.0; 4]; 4];
        assert_eq!(mst_weight_exhaustive(&w), 3.0);
        assert_eq!(prufer_edges(&[3, 3], 4).len(), 3);
    }

    #[test]
    fn path_graph_mst() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0, 6.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(mst_weight_exhaustive(&pairwise(&pts)), 6.0);
        let sl = single_linkage(&pairwise(&pts));
        let h: Vec<f64> = sl.iter().map(|m| m.height).collect();
        assert_eq!(h, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_groups_split() {
        let pts: Vec<Vec<f64>> = [0.0, 0.1, 0.25, 0.45, 10.0, 10.13, 10.3, 10.56].iter().map(|&x| vec![x]).collect();
        let labels = hdbscan_labels(&pts, 3, 2).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn average_linkage_line() {
        let x = [0.0, 1.0, 5.0, 7.0];
        let d: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| f64::abs(a - b)).collect()).collect();
        let m = average_linkage(&[0, 1, 2, 3], &d, 4);
        assert_eq!(m[0], (0, 1, 1.0, 4));
        assert_eq!(m[1], (2, 3, 2.0, 5));
        assert_eq!(m[2], (4, 5, 5.5, 6));
    }
}
