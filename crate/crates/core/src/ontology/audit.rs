use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::OntologyDocument;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementError {
    pub article_id: String,
    /// Position in the document's object or relationship list.
    pub index: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub object_class_rate: f64,
    pub object_object_rate: f64,
    pub object_relation_rate: f64,
    pub object_class_errors: Vec<ElementError>,
    pub object_object_errors: Vec<ElementError>,
    pub object_relation_errors: Vec<ElementError>,
    pub total_objects: usize,
    pub total_relationships: usize,
    pub documents: usize,
    pub failed_documents: usize,
}

fn rate(errors: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        1.0 - errors as f64 / total as f64
    }
}

/// Run the three checks over all non-failed documents.
pub fn check_consistency(documents: &[OntologyDocument]) -> ConsistencyReport {
    let mut oc = Vec::new();
    let mut oo = Vec::new();
    let mut or = Vec::new();
    let mut total_objects = 0;
    let mut total_relationships = 0;
    let mut failed = 0;
    for doc in documents {
        if doc.failed {
            failed += 1;
            continue;
        }
        let classes: BTreeSet<&str> = doc.class_names.iter().map(String::as_str).collect();
        let mut seen = BTreeSet::new();
        for (i, obj) in doc.objects.iter().enumerate() {
            if !classes.contains(obj.instance_of.as_str()) {
                oc.push(ElementError {
                    article_id: doc.article_id.clone(),
                    index: i,
                    detail: format!("object {:?} has undefined class {:?}", obj.name, obj.instance_of),
                });
            }
            if !seen.insert(obj.name.as_str()) {
                oo.push(ElementError {
                    article_id: doc.article_id.clone(),
                    index: i,
                    detail: format!("object {:?} defined more than once", obj.name),
                });
            }
        }
        for (i, rel) in doc.relationships.iter().enumerate() {
            let missing: Vec<&str> = [rel.from.as_str(), rel.to.as_str()]
                .into_iter()
                .filter(|e| !seen.contains(e))
                .collect();
            if !missing.is_empty() {
                or.push(ElementError {
                    article_id: doc.article_id.clone(),
                    index: i,
                    detail: format!("relationship {:?} refers to undefined {}", rel.name, missing.join(", ")),
                });
            }
        }
        total_objects += doc.objects.len();
        total_relationships += doc.relationships.len();
    }
    ConsistencyReport {
        object_class_rate: rate(oc.len(), total_objects),
        object_object_rate: rate(oo.len(), total_objects),
        object_relation_rate: rate(or.len(), total_relationships),
        object_class_errors: oc,
        object_object_errors: oo,
        object_relation_errors: or,
        total_objects,
        total_relationships,
        documents: documents.len(),
        failed_documents: failed,
    }
}

/// Remove inconsistent elements.
///
/// Objects of an undefined class go first, then repeated object names (the
/// first one stays), then relationships with an endpoint that is no longer an
/// object. Failed documents pass through untouched.
pub fn prune(documents: &[OntologyDocument]) -> Vec<OntologyDocument> {
    documents.iter().map(prune_one).collect()
}

fn prune_one(doc: &OntologyDocument) -> OntologyDocument {
    if doc.failed {
        return doc.clone();
    }
    let classes: BTreeSet<&str> = doc.class_names.iter().map(String::as_str).collect();
    let mut names = BTreeSet::new();
    let objects: Vec<_> = doc
        .objects
        .iter()
        .filter(|o| classes.contains(o.instance_of.as_str()))
        .filter(|o| names.insert(o.name.clone()))
        .cloned()
        .collect();
    let relationships = doc
        .relationships
        .iter()
        .filter(|r| names.contains(&r.from) && names.contains(&r.to))
        .cloned()
        .collect();
    OntologyDocument {
        objects,
        relationships,
        ..doc.clone()
    }
}
