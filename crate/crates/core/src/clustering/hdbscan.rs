//! Mutual reachability, MST, single linkage and tree condensation.

use serde::{Deserialize, Serialize};

use super::{ClusteringError, EmbeddingSet};

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from each point to its `min_samples`-th nearest neighbour, self excluded.
pub fn core_distances(points: &EmbeddingSet, min_samples: usize) -> Result<Vec<f64>, ClusteringError> {
    let n = points.len();
    if min_samples < 1 {
        return Err(ClusteringError::Param("min_samples must be at least 1".into()));
    }
    if n <= min_samples {
        return Err(ClusteringError::TooFewPoints {
            needed: min_samples + 1,
            got: n,
            constraint: "n > min_samples",
        });
    }
    let mut scratch = Vec::with_capacity(n - 1);
    Ok((0..n)
        .map(|i| {
            scratch.clear();
            scratch.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| euclidean(points.row(i), points.row(j))),
            );
            let (_, kth, _) = scratch
                .select_nth_unstable_by(min_samples - 1, |a, b| a.partial_cmp(b).expect("finite"));
            *kth
        })
        .collect())
}

/// `mreach(a, b) = max(core(a), core(b), d(a, b))`, evaluated on demand.
#[derive(Debug, Clone)]
pub struct MutualReachability<'a> {
    points: &'a EmbeddingSet,
    core: Vec<f64>,
}

impl<'a> MutualReachability<'a> {
    pub fn new(points: &'a EmbeddingSet, min_samples: usize) -> Result<Self, ClusteringError> {
        let core = core_distances(points, min_samples)?;
        Ok(Self { points, core })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn core(&self) -> &[f64] {
        &self.core
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let d = euclidean(self.points.row(a), self.points.row(b));
        d.max(self.core[a]).max(self.core[b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Lower endpoint index.
    pub a: usize,
    /// Higher endpoint index.
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm over the dense mutual-reachability graph.
///
/// Edges come back sorted by `(weight, a, b)`, the order single linkage
/// consumes them in.
pub fn minimum_spanning_tree(mr: &MutualReachability<'_>) -> Vec<MstEdge> {
    let n = mr.len();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = mr.distance(current, j);
            // lower parent index wins ties
            if w < best[j] || (w == best[j] && current < parent[j]) {
                best[j] = w;
                parent[j] = current;
            }
        }
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        let (a, b) = if parent[next] < next {
            (parent[next], next)
        } else {
            (next, parent[next])
        };
        edges.push(MstEdge {
            a,
            b,
            weight: best[next],
        });
        current = next;
    }
    edges.sort_by(|x, y| {
        x.weight
            .partial_cmp(&y.weight)
            .expect("finite weights")
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges
}

/// One agglomeration step. Leaves are `0..n`; merge `k` creates node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_points: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        if self.merges.is_empty() {
            0
        } else {
            self.n_points + self.merges.len() - 1
        }
    }

    fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.n_points)
            .map(|k| (self.merges[k].left, self.merges[k].right))
    }

    fn size(&self, node: usize) -> usize {
        node.checked_sub(self.n_points)
            .map_or(1, |k| self.merges[k].size)
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(x),
            }
        }
    }
}

/// Single-linkage dendrogram from MST edges in the order given.
pub fn single_linkage(n_points: usize, edges: &[MstEdge]) -> Dendrogram {
    let mut parent: Vec<usize> = (0..2 * n_points.max(1)).collect();
    let mut size = vec![1usize; 2 * n_points.max(1)];

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut merges = Vec::with_capacity(edges.len());
    for (k, e) in edges.iter().enumerate() {
        let ra = find(&mut parent, e.a);
        let rb = find(&mut parent, e.b);
        let node = n_points + k;
        let s = size[ra] + size[rb];
        parent[ra] = node;
        parent[rb] = node;
        size[node] = s;
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: e.weight,
            size: s,
        });
    }
    Dendrogram { n_points, merges }
}

fn to_lambda(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// `(λ - λ_birth) * count`, defined as 0 when λ does not exceed the birth value
/// (this also keeps ∞ − ∞ out of the sums).
fn excess(lambda: f64, birth: f64, count: usize) -> f64 {
    if lambda <= birth {
        0.0
    } else {
        (lambda - birth) * count as f64
    }
}

/// A cluster in the condensed tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub node_id: usize,
    pub parent_id: Option<usize>,
    pub lambda_birth: f64,
    pub lambda_death: f64,
    pub size: usize,
    pub stability: f64,
    pub children: Vec<usize>,
}

/// A point leaving `cluster` at `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEvent {
    pub point: usize,
    pub cluster: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub min_cluster_size: usize,
    pub nodes: Vec<CondensedNode>,
    /// Exactly one event per point, ordered by point index.
    pub points: Vec<PointEvent>,
}

impl CondensedTree {
    pub fn root(&self) -> &CondensedNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CondensedNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    /// Whether `node` is `ancestor` or lies below it.
    pub fn is_descendant(&self, mut node: usize, ancestor: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.nodes[node].parent_id {
                Some(p) => node = p,
                None => return false,
            }
        }
    }
}

/// Condense a dendrogram: a split only creates clusters when both sides hold
/// at least `min_cluster_size` points; smaller sides fall out of the parent.
pub fn condense(dendrogram: &Dendrogram, min_cluster_size: usize) -> CondensedTree {
    let n = dendrogram.n_points;
    let mut nodes = vec![CondensedNode {
        node_id: 0,
        parent_id: None,
        lambda_birth: 0.0,
        lambda_death: 0.0,
        size: n,
        stability: 0.0,
        children: Vec::new(),
    }];
    let mut events: Vec<PointEvent> = Vec::with_capacity(n);
    let mut leaf_buf = Vec::new();

    // breadth-first over clusters so node ids grow with depth
    let mut queue = std::collections::VecDeque::from([(dendrogram.root(), 0usize)]);
    while let Some((start, cluster)) = queue.pop_front() {
        let mut stack = vec![start];
        while let Some(dnode) = stack.pop() {
            let Some((left, right)) = dendrogram.children(dnode) else {
                // a lone point reaching here only happens for n == 1
                events.push(PointEvent {
                    point: dnode,
                    cluster,
                    lambda: f64::INFINITY,
                });
                continue;
            };
            let lambda = to_lambda(dendrogram.merges[dnode - n].distance);
            let ls = dendrogram.size(left);
            let rs = dendrogram.size(right);
            match (ls >= min_cluster_size, rs >= min_cluster_size) {
                (true, true) => {
                    nodes[cluster].lambda_death = lambda;
                    for (child, size) in [(left, ls), (right, rs)] {
                        let id = nodes.len();
                        nodes.push(CondensedNode {
                            node_id: id,
                            parent_id: Some(cluster),
                            lambda_birth: lambda,
                            lambda_death: lambda,
                            size,
                            stability: 0.0,
                            children: Vec::new(),
                        });
                        nodes[cluster].children.push(id);
                        queue.push_back((child, id));
                    }
                }
                (l_big, r_big) => {
                    for (child, big) in [(left, l_big), (right, r_big)] {
                        if big {
                            stack.push(child);
                        } else {
                            leaf_buf.clear();
                            dendrogram.leaves(child, &mut leaf_buf);
                            events.extend(leaf_buf.iter().map(|&p| PointEvent {
                                point: p,
                                cluster,
                                lambda,
                            }));
                        }
                    }
                }
            }
        }
    }

    for e in &events {
        let node = &mut nodes[e.cluster];
        node.stability += excess(e.lambda, node.lambda_birth, 1);
        if node.children.is_empty() && e.lambda > node.lambda_death {
            node.lambda_death = e.lambda;
        }
    }
    for id in 0..nodes.len() {
        let children = nodes[id].children.clone();
        for c in children {
            let (birth_c, size_c) = (nodes[c].lambda_birth, nodes[c].size);
            let parent = &mut nodes[id];
            parent.stability += excess(birth_c, parent.lambda_birth, size_c);
        }
    }

    events.sort_by_key(|e| e.point);
    CondensedTree {
        n_points: n,
        min_cluster_size,
        nodes,
        points: events,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size` when unset.
    pub min_samples: Option<usize>,
    /// Let the root itself be selected as a cluster.
    pub allow_single_cluster: bool,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 10,
            min_samples: None,
            allow_single_cluster: false,
        }
    }
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            ..Self::default()
        }
    }

    pub fn effective_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }
}

/// Run the hierarchy part of HDBSCAN and return the condensed tree.
pub fn hdbscan_fit(embeddings: &EmbeddingSet, params: &HdbscanParams) -> Result<CondensedTree, ClusteringError> {
    let n = embeddings.len();
    if params.min_cluster_size < 2 {
        return Err(ClusteringError::Param("min_cluster_size must be at least 2".into()));
    }
    if n < 2 * params.min_cluster_size {
        return Err(ClusteringError::TooFewPoints {
            needed: 2 * params.min_cluster_size,
            got: n,
            constraint: "n >= 2 * min_cluster_size",
        });
    }
    let mr = MutualReachability::new(embeddings, params.effective_min_samples())?;
    let mst = minimum_spanning_tree(&mr);
    let dendrogram = single_linkage(n, &mst);
    Ok(condense(&dendrogram, params.min_cluster_size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> EmbeddingSet {
        EmbeddingSet::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn hand_computed_mutual_reachability() {
        let pts = line(&[0.0, 1.0, 3.0]);
        let mr = MutualReachability::new(&pts, 1).unwrap();
        assert_eq!(mr.core(), &[1.0, 1.0, 2.0]);
        assert_eq!(mr.distance(0, 1), 1.0);
        assert_eq!(mr.distance(1, 2), 2.0);
        assert_eq!(mr.distance(0, 2), 3.0);
    }

    #[test]
    fn identical_points_have_zero_reachability() {
        let pts = line(&[5.0; 4]);
        let mr = MutualReachability::new(&pts, 2).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(mr.distance(a, b), 0.0);
            }
        }
    }

    #[test]
    fn min_samples_constraints() {
        let pts = line(&[0.0, 1.0]);
        assert!(core_distances(&pts, 0).is_err());
        assert!(core_distances(&pts, 2).is_err());
    }

    #[test]
    fn mst_and_dendrogram_on_a_line() {
        let pts = line(&[0.0, 1.0, 3.0, 7.0]);
        let mr = MutualReachability::new(&pts, 1).unwrap();
        let mst = minimum_spanning_tree(&mr);
        let w: Vec<f64> = mst.iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![1.0, 2.0, 4.0]);
        let d = single_linkage(4, &mst);
        assert_eq!(d.merges.last().unwrap().size, 4);
        assert_eq!(d.root(), 6);
    }

    #[test]
    fn separated_blobs_give_two_leaves() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(vec![(i % 5) as f64 * 0.1, (i / 5) as f64 * 0.1]);
        }
        for i in 0..10 {
            rows.push(vec![100.0 + (i % 5) as f64 * 0.1, 100.0 + (i / 5) as f64 * 0.1]);
        }
        let e = EmbeddingSet::from_rows(rows).unwrap();
        let tree = hdbscan_fit(&e, &HdbscanParams::new(5)).unwrap();
        assert_eq!(tree.leaves().count(), 2);
        assert_eq!(tree.root().children.len(), 2);
        for node in &tree.nodes {
            assert!(node.lambda_death >= node.lambda_birth);
            assert!(node.stability >= 0.0);
            if let Some(p) = node.parent_id {
                assert!(node.size <= tree.nodes[p].size);
            }
        }
    }

    #[test]
    fn single_blob_is_only_the_root() {
        // spiral that thins out from the centre, so no split yields two halves of six
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let r = 0.05 * (i as f64).powf(1.5);
                vec![r * (i as f64).cos(), r * (i as f64).sin()]
            })
            .collect();
        let e = EmbeddingSet::from_rows(rows).unwrap();
        let tree = hdbscan_fit(&e, &HdbscanParams::new(6)).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.points.len(), 12);
    }

    #[test]
    fn too_few_points_names_the_constraint() {
        let e = line(&[0.0, 1.0, 2.0]);
        let err = hdbscan_fit(&e, &HdbscanParams::new(2)).unwrap_err();
        assert!(err.to_string().contains("n >= 2 * min_cluster_size"));
    }

    #[test]
    fn duplicates_do_not_produce_nan() {
        let mut xs = vec![0.0; 5];
        xs.extend([10.0; 5]);
        let tree = hdbscan_fit(&line(&xs), &HdbscanParams::new(3)).unwrap();
        assert!(tree.nodes.iter().all(|n| !n.stability.is_nan()));
    }
}
