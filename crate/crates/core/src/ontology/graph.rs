use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::OntologyDocument;
use crate::entities::AliasMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub node_id: usize,
    pub label: String,
    /// Distinct surface forms in first-seen order.
    pub merged_labels: Vec<String>,
    pub degree: usize,
    pub community_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub label: String,
    pub from_node: usize,
    pub to_node: usize,
    pub article_id: String,
    pub newspaper_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologyGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl OntologyGraph {
    pub fn degree_sum(&self) -> usize {
        self.nodes.iter().map(|n| n.degree).sum()
    }

    pub fn node(&self, node_id: usize) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn find_label(&self, label: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.label == label)
    }

    fn recompute_degrees(&mut self) {
        let mut deg: HashMap<usize, usize> = HashMap::new();
        for e in &self.edges {
            *deg.entry(e.from_node).or_default() += 1;
            *deg.entry(e.to_node).or_default() += 1;
        }
        for n in &mut self.nodes {
            n.degree = deg.get(&n.node_id).copied().unwrap_or(0);
        }
    }

    fn assign_communities(&mut self) {
        let labels = communities(self);
        for (n, c) in self.nodes.iter_mut().zip(labels) {
            n.community_id = c;
        }
    }
}

struct Resolver {
    aliases: BTreeMap<String, String>,
}

impl Resolver {
    fn new(aliases: &AliasMap) -> Self {
        Resolver {
            aliases: aliases.iter().map(|(k, v)| (k.to_lowercase(), v.clone())).collect(),
        }
    }

    /// (node key, surface form) for a raw name.
    fn resolve<'a>(&'a self, name: &'a str) -> (String, &'a str) {
        let surface = self.aliases.get(&name.to_lowercase()).map_or(name, String::as_str);
        (surface.to_lowercase(), surface)
    }
}

/// Merge documents into one graph.
///
/// Names are keyed case-insensitively after applying `aliases` (whose keys
/// also match case-insensitively). A node's label joins its distinct surface
/// forms with ",". Objects become nodes, every relationship becomes an edge.
/// Failed documents are skipped.
pub fn build_graph(
    documents: &[OntologyDocument],
    newspaper_of: &BTreeMap<String, String>,
    aliases: &AliasMap,
) -> OntologyGraph {
    let resolver = Resolver::new(aliases);
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut node_for = |name: &str, nodes: &mut Vec<GraphNode>| -> usize {
        let (key, surface) = resolver.resolve(name);
        let id = *index.entry(key).or_insert_with(|| {
            nodes.push(GraphNode {
                node_id: nodes.len(),
                label: String::new(),
                merged_labels: Vec::new(),
                degree: 0,
                community_id: 0,
            });
            nodes.len() - 1
        });
        let node = &mut nodes[id];
        if !node.merged_labels.iter().any(|l| l == surface) {
            node.merged_labels.push(surface.to_string());
            node.label = node.merged_labels.join(",");
        }
        id
    };
    let mut edges = Vec::new();
    for doc in documents.iter().filter(|d| !d.failed) {
        let newspaper_id = newspaper_of.get(&doc.article_id).cloned().unwrap_or_default();
        for obj in &doc.objects {
            node_for(&obj.name, &mut nodes);
        }
        for rel in &doc.relationships {
            let from_node = node_for(&rel.from, &mut nodes);
            let to_node = node_for(&rel.to, &mut nodes);
            edges.push(GraphEdge {
                label: rel.name.clone(),
                from_node,
                to_node,
                article_id: doc.article_id.clone(),
                newspaper_id: newspaper_id.clone(),
            });
        }
    }
    let mut graph = OntologyGraph { nodes, edges };
    graph.recompute_degrees();
    graph.assign_communities();
    graph
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFilter {
    pub newspaper_id: Option<String>,
    pub article_id: Option<String>,
}

/// Keep the edges matching every given filter and the nodes they touch.
///
/// Node ids are stable. Degrees and communities stay those of the full
/// graph unless `recompute` is set.
pub fn filter_graph(graph: &OntologyGraph, filter: &GraphFilter, recompute: bool) -> OntologyGraph {
    let keep = |e: &GraphEdge| {
        filter.newspaper_id.as_ref().is_none_or(|n| &e.newspaper_id == n)
            && filter.article_id.as_ref().is_none_or(|a| &e.article_id == a)
    };
    if filter.newspaper_id.is_none() && filter.article_id.is_none() && !recompute {
        return graph.clone();
    }
    let edges: Vec<GraphEdge> = graph.edges.iter().filter(|e| keep(e)).cloned().collect();
    let touched: BTreeSet<usize> = edges.iter().flat_map(|e| [e.from_node, e.to_node]).collect();
    let nodes = if filter.newspaper_id.is_none() && filter.article_id.is_none() {
        graph.nodes.clone()
    } else {
        graph.nodes.iter().filter(|n| touched.contains(&n.node_id)).cloned().collect()
    };
    let mut sub = OntologyGraph { nodes, edges };
    if recompute {
        sub.recompute_degrees();
        sub.assign_communities();
    }
    sub
}

/// Deterministic label propagation, one community id per node in node order.
///
/// Labels start as node positions. Nodes are visited in order and take the
/// label with the highest vote among their neighbours, ties going to the
/// smallest label. A neighbour's vote is 1 plus the number of neighbours the
/// two share, so tightly knit groups hold together against a bridge. Edge
/// direction, multiplicity and self-loops are ignored. Stops after a sweep
/// without changes or 100 sweeps; ids are renumbered by first appearance.
pub fn communities(graph: &OntologyGraph) -> Vec<usize> {
    let n = graph.nodes.len();
    let pos: HashMap<usize, usize> = graph.nodes.iter().enumerate().map(|(i, nd)| (nd.node_id, i)).collect();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &graph.edges {
        let (Some(&a), Some(&b)) = (pos.get(&e.from_node), pos.get(&e.to_node)) else {
            continue;
        };
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let weight: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|a| {
            adj[a]
                .iter()
                .map(|&b| (b, 1 + adj[a].intersection(&adj[b]).count()))
                .collect()
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).collect();
    for _ in 0..100 {
        let mut changed = false;
        for a in 0..n {
            if weight[a].is_empty() {
                continue;
            }
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for &(b, w) in &weight[a] {
                *votes.entry(labels[b]).or_default() += w;
            }
            let best = votes.values().copied().max().unwrap_or(0);
            let pick = votes.iter().find(|(_, &v)| v == best).map(|(&l, _)| l).unwrap_or(labels[a]);
            if pick != labels[a] {
                labels[a] = pick;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut renumber: HashMap<usize, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = renumber.len();
            *renumber.entry(*l).or_insert(next)
        })
        .collect()
}
