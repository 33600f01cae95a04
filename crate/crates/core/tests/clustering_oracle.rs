use biaslens_core::clustering::{
    extract_clusters, hdbscan_fit, minimum_spanning_tree, single_linkage, EmbeddingSet, HdbscanParams,
    MutualReachability,
};
use biaslens_oracles as oracle;
use proptest::prelude::*;

fn points(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (4..=max_n).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), n))
}

fn params(mcs: usize, ms: usize) -> HdbscanParams {
    HdbscanParams {
        min_cluster_size: mcs,
        min_samples: Some(ms),
        allow_single_cluster: false,
    }
}

fn labels_of(pts: &[Vec<f64>], mcs: usize, ms: usize) -> Vec<i64> {
    let set = EmbeddingSet::from_rows(pts.to_vec()).unwrap();
    extract_clusters(&hdbscan_fit(&set, &params(mcs, ms)).unwrap(), false).labels
}

/// Canonical form of a labelling: the list of clusters as sorted member lists.
fn partition(labels: &[i64]) -> Vec<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            groups.entry(l).or_default().push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mst_weight_matches_exhaustive_search(pts in points(7), k in 1usize..3) {
        let set = EmbeddingSet::from_rows(pts.clone()).unwrap();
        let mr = MutualReachability::new(&set, k).unwrap();
        let total: f64 = minimum_spanning_tree(&mr).iter().map(|e| e.weight).sum();
        let w = oracle::mutual_reachability(&oracle::pairwise(&pts), k);
        prop_assert!((total - oracle::mst_weight_exhaustive(&w)).abs() < 1e-9);
    }

    #[test]
    fn dendrogram_heights_match_naive_linkage(pts in points(12), k in 1usize..4) {
        let set = EmbeddingSet::from_rows(pts.clone()).unwrap();
        let mr = MutualReachability::new(&set, k).unwrap();
        let d = single_linkage(pts.len(), &minimum_spanning_tree(&mr));
        let ours: Vec<f64> = d.merges.iter().map(|m| m.distance).collect();
        let mut naive: Vec<f64> = oracle::single_linkage(&oracle::mutual_reachability(&oracle::pairwise(&pts), k))
            .iter()
            .map(|m| m.height)
            .collect();
        naive.sort_by(f64::total_cmp);
        prop_assert_eq!(ours.len(), naive.len());
        for (a, b) in ours.iter().zip(&naive) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn partitions_match_exhaustive_selection(pts in points(12), mcs in 2usize..5, k in 1usize..4) {
        prop_assume!(pts.len() >= 2 * mcs);
        if let Some(expected) = oracle::hdbscan_labels(&pts, mcs, k) {
            prop_assert_eq!(labels_of(&pts, mcs, k), expected);
        }
    }

    #[test]
    fn selection_is_optimal_over_the_condensed_tree(pts in points(12), mcs in 2usize..4) {
        prop_assume!(pts.len() >= 2 * mcs);
        let set = EmbeddingSet::from_rows(pts).unwrap();
        let tree = hdbscan_fit(&set, &params(mcs, mcs)).unwrap();
        prop_assume!(tree.nodes.len() <= 21);
        let labels = extract_clusters(&tree, false);
        let ours: f64 = labels.selected_nodes.iter().map(|&id| tree.nodes[id].stability).sum();
        let parent: Vec<Option<usize>> = tree.nodes.iter().map(|n| n.parent_id).collect();
        let stability: Vec<f64> = tree.nodes.iter().map(|n| n.stability).collect();
        let eligible: Vec<bool> = tree.nodes.iter().map(|n| n.parent_id.is_some()).collect();
        let best = oracle::best_antichain_total(&parent, &stability, &eligible);
        prop_assert!((ours - best).abs() <= 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn every_point_has_one_event(pts in points(12), mcs in 2usize..4) {
        prop_assume!(pts.len() >= 2 * mcs);
        let set = EmbeddingSet::from_rows(pts.clone()).unwrap();
        let tree = hdbscan_fit(&set, &params(mcs, mcs)).unwrap();
        let seen: Vec<usize> = tree.points.iter().map(|e| e.point).collect();
        prop_assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
        // leaf clusters hold exactly the points whose event lies in them or below
        for node in &tree.nodes {
            let inside = tree.points.iter().filter(|e| tree.is_descendant(e.cluster, node.node_id)).count();
            prop_assert_eq!(inside, node.size);
        }
    }

    #[test]
    fn row_permutation_only_renames_labels(pts in points(12), seed in any::<u64>()) {
        prop_assume!(pts.len() >= 6);
        let n = pts.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        // only compare when the hierarchy is unique
        let w = oracle::mutual_reachability(&oracle::pairwise(&pts), 3);
        prop_assume!(oracle::heights_distinct(&oracle::single_linkage(&w)));
        let base = labels_of(&pts, 3, 3);
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let perm = labels_of(&shuffled, 3, 3);
        let mut back = vec![0i64; n];
        for (pos, &orig) in order.iter().enumerate() {
            back[orig] = perm[pos];
        }
        prop_assert_eq!(partition(&back), partition(&base));
    }

    #[test]
    fn scaling_leaves_partition_unchanged(pts in points(12), c in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0, 8.0])) {
        prop_assume!(pts.len() >= 6);
        // powers of two keep every distance exactly proportional
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * c).collect()).collect();
        prop_assert_eq!(labels_of(&scaled, 3, 3), labels_of(&pts, 3, 3));
    }
}

#[test]
fn two_blobs_and_an_outlier() {
    let mut pts = Vec::new();
    for i in 0..10 {
        let a = i as f64 * 0.628;
        pts.push(vec![a.cos() * 0.3 + (i % 3) as f64 * 0.05, a.sin() * 0.3]);
    }
    for i in 0..10 {
        let a = i as f64 * 0.628;
        pts.push(vec![20.0 + a.cos() * 0.35, 20.0 + a.sin() * 0.25 + (i % 2) as f64 * 0.04]);
    }
    pts.push(vec![100.0, -100.0]);
    let labels = labels_of(&pts, 5, 5);
    assert!(labels[..10].iter().all(|&l| l == 0));
    assert!(labels[10..20].iter().all(|&l| l == 1));
    assert_eq!(labels[20], -1);
}
