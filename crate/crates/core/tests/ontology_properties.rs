use std::collections::BTreeMap;

use biaslens_core::entities::AliasMap;
use biaslens_core::ontology::{
    build_graph, build_prompt_text, check_consistency, filter_graph, gexf_string, parse_reply, prune, GraphEdge,
    GraphFilter, OntologyDocument, PROMPT_TEMPLATE,
};
use biaslens_core::ontology::{OntologyObject, OntologyRelationship};
use proptest::prelude::*;

fn doc(id: &str, classes: &[&str], objects: &[(&str, &str)], rels: &[(&str, &str, &str)]) -> OntologyDocument {
    OntologyDocument {
        article_id: id.into(),
        class_names: classes.iter().map(|s| s.to_string()).collect(),
        objects: objects
            .iter()
            .map(|(n, c)| OntologyObject { name: n.to_string(), instance_of: c.to_string() })
            .collect(),
        relationships: rels
            .iter()
            .map(|(n, f, t)| OntologyRelationship { name: n.to_string(), from: f.to_string(), to: t.to_string() })
            .collect(),
        raw_reply: String::new(),
        attempt_count: 1,
        failed: false,
        error: None,
    }
}

#[test]
fn prompt_template_matches_golden_file() {
    let golden = include_str!("golden/ontology_prompt_template.txt");
    assert_eq!(PROMPT_TEMPLATE, golden);
    let p = build_prompt_text("Title", "Body");
    assert_eq!(p, format!("{golden}\nTitle\n\nBody"));
    assert!(PROMPT_TEMPLATE.contains("should be an active verb and optionally contain a preposition"));
}

#[test]
fn three_node_gexf_matches_golden_file() {
    let docs = [
        doc(
            "a1",
            &["Organization", "Country", "Event"],
            &[("Hamas", "Organization"), ("Israel", "Country"), ("Nova Festival", "Event")],
            &[("attacks", "Hamas", "Israel"), ("targets", "Hamas", "Nova Festival")],
        ),
        doc(
            "a2",
            &["Organization", "Country"],
            &[("Israel", "Country"), ("HAMAS", "Organization")],
            &[("retaliates against", "Israel", "HAMAS")],
        ),
    ];
    let newspaper_of: BTreeMap<String, String> =
        [("a1".to_string(), "p1".to_string()), ("a2".to_string(), "p2".to_string())].into();
    let aliases: AliasMap = [("Nova Festival".to_string(), "Supernova Sukkot Gathering".to_string())].into();
    let g = build_graph(&docs, &newspaper_of, &aliases);
    assert_eq!(gexf_string(&g), include_str!("golden/three_node.gexf"));
    assert_eq!(g.degree_sum(), 2 * g.edges.len());
}

#[test]
fn canned_reply_shapes() {
    let fenced = "Here you go:\n```json\n{\"Class\": [\"A\", \"B\"], \"Object\": [{\"Name\": \"x\", \"InstanceOf\": \"A\"}], \"Relationship\": {}}\n```";
    let p = parse_reply(fenced).unwrap();
    assert_eq!((p.class_names.len(), p.objects.len(), p.relationships.len()), (2, 1, 0));
    let dup = r#"{"Class": "A", "Object": [], "Relationship": {"attacks": {"RelationshipFrom": "x", "RelationshipTo": "y"}, "attacks": {"RelationshipFrom": "y", "RelationshipTo": "x"}}}"#;
    assert_eq!(parse_reply(dup).unwrap().relationships.len(), 2);
    let arr = r#"{"Class": ["A"], "Object": [{"Name": "x", "InstanceOf": "A"}, {"Name": "y", "InstanceOf": "A"}], "Relationship": [{"Name": "meets", "From": "x", "To": "y"}]}"#;
    let p = parse_reply(arr).unwrap();
    assert_eq!((p.objects.len(), p.relationships.len()), (2, 1));
}

/// Random documents over a tiny name pool, so errors of every kind occur.
fn documents() -> impl Strategy<Value = Vec<OntologyDocument>> {
    let names = ["Ann", "Bob", "Rome", "ann", "UN"];
    let classes = ["Person", "City", "Org"];
    let one = (
        prop::collection::vec(0usize..3, 0..3),
        prop::collection::vec((0usize..5, 0usize..4), 0..6),
        prop::collection::vec((0usize..3, 0usize..5, 0usize..5), 0..8),
        0u8..3,
    );
    prop::collection::vec(one, 1..6).prop_map(move |raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (cs, os, rs, paper))| {
                let mut d = doc(&format!("a{i}"), &[], &[], &[]);
                d.class_names = cs.iter().map(|&c| classes[c].to_string()).collect();
                // class index 3 is a class that is never declared
                d.objects = os
                    .iter()
                    .map(|&(n, c)| OntologyObject {
                        name: names[n].into(),
                        instance_of: classes.get(c).copied().unwrap_or("Ghost").into(),
                    })
                    .collect();
                d.relationships = rs
                    .iter()
                    .map(|&(r, f, t)| OntologyRelationship {
                        name: ["meets", "visits", "leads"][r].into(),
                        from: names[f].into(),
                        to: names[t].into(),
                    })
                    .collect();
                d.raw_reply = format!("p{paper}");
                d
            })
            .collect()
    })
}

fn newspapers(docs: &[OntologyDocument]) -> BTreeMap<String, String> {
    docs.iter().map(|d| (d.article_id.clone(), d.raw_reply.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn injected_errors_never_raise_rates(docs in documents(), which in any::<prop::sample::Index>(), kind in 0u8..3) {
        let before = check_consistency(&docs);
        let mut worse = docs.clone();
        let target = &mut worse[which.index(docs.len())];
        match kind {
            0 => target.objects.push(OntologyObject { name: "Zed".into(), instance_of: "Undeclared".into() }),
            1 => {
                let copy = target.objects.first().cloned().unwrap_or(OntologyObject { name: "Q".into(), instance_of: "Q".into() });
                if target.objects.is_empty() {
                    target.objects.push(copy.clone());
                }
                target.objects.push(copy);
            }
            _ => target.relationships.push(OntologyRelationship { name: "x".into(), from: "Nobody".into(), to: "Nowhere".into() }),
        }
        let after = check_consistency(&worse);
        // an injected error can only lower the rate of the check it violates;
        // the extra element may dilute the other checks' error shares
        let (b, a) = match kind {
            0 => (before.object_class_rate, after.object_class_rate),
            1 => (before.object_object_rate, after.object_object_rate),
            _ => (before.object_relation_rate, after.object_relation_rate),
        };
        prop_assert!(a < 1.0);
        prop_assert!(a <= b + 1e-15);
    }

    #[test]
    fn prune_is_idempotent_and_clean(docs in documents()) {
        let once = prune(&docs);
        prop_assert_eq!(&prune(&once), &once);
        let r = check_consistency(&once);
        prop_assert_eq!((r.object_class_rate, r.object_object_rate, r.object_relation_rate), (1.0, 1.0, 1.0));
    }

    #[test]
    fn degree_sum_and_newspaper_union(docs in documents()) {
        let docs = prune(&docs);
        let np = newspapers(&docs);
        let g = build_graph(&docs, &np, &AliasMap::new());
        prop_assert_eq!(g.degree_sum(), 2 * g.edges.len());
        let mut union: Vec<GraphEdge> = Vec::new();
        for paper in ["p0", "p1", "p2"] {
            let f = GraphFilter { newspaper_id: Some(paper.into()), article_id: None };
            let sub = filter_graph(&g, &f, true);
            prop_assert_eq!(sub.degree_sum(), 2 * sub.edges.len());
            union.extend(filter_graph(&g, &f, false).edges);
        }
        let mut core = g.edges.clone();
        union.sort();
        core.sort();
        prop_assert_eq!(union, core);
    }
}
