//! Tolerant parsing of ontology replies.
//!
//! Replies are read into an order-preserving JSON tree that keeps duplicate
//! object keys, since two relationships can share a name.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::de::{Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Serialize;

use super::{OntologyObject, OntologyRelationship};

#[derive(Debug, Clone, PartialEq)]
pub enum OrderedValue {
    Null,
    Bool(bool),
    Number(f64),
    String(String),
    Array(Vec<OrderedValue>),
    /// Entries in source order, duplicates kept.
    Object(Vec<(String, OrderedValue)>),
}

impl OrderedValue {
    fn as_str(&self) -> Option<&str> {
        match self {
            OrderedValue::String(s) => Some(s),
            _ => None,
        }
    }

    /// First value under a key matching any of `names` after normalization.
    fn field(&self, names: &[&str]) -> Option<&OrderedValue> {
        match self {
            OrderedValue::Object(entries) => entries
                .iter()
                .find(|(k, _)| names.contains(&normalize_key(k).as_str()))
                .map(|(_, v)| v),
            _ => None,
        }
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_end_matches(':').trim().to_lowercase()
}

impl<'de> Deserialize<'de> for OrderedValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(OrderedVisitor)
    }
}

struct OrderedVisitor;

impl<'de> Visitor<'de> for OrderedVisitor {
    type Value = OrderedValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_unit<E>(self) -> Result<Self::Value, E> {
        Ok(OrderedValue::Null)
    }

    fn visit_bool<E>(self, v: bool) -> Result<Self::Value, E> {
        Ok(OrderedValue::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Self::Value, E> {
        Ok(OrderedValue::Number(v as f64))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Self::Value, E> {
        Ok(OrderedValue::Number(v as f64))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Self::Value, E> {
        Ok(OrderedValue::Number(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Self::Value, E> {
        Ok(OrderedValue::String(v.to_string()))
    }

    fn visit_string<E>(self, v: String) -> Result<Self::Value, E> {
        Ok(OrderedValue::String(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
        let mut items = Vec::new();
        while let Some(v) = seq.next_element()? {
            items.push(v);
        }
        Ok(OrderedValue::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
        let mut entries = Vec::new();
        while let Some((k, v)) = map.next_entry::<String, OrderedValue>()? {
            entries.push((k, v));
        }
        Ok(OrderedValue::Object(entries))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("reply contains no JSON object")]
    NoObject,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParsedReply {
    pub class_names: Vec<String>,
    pub objects: Vec<OntologyObject>,
    pub relationships: Vec<OntologyRelationship>,
}

/// `"Key:" [` as printed in the template, which is not valid JSON.
fn colon_inside_key() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"\\]+):"(\s*)([\[{"])"#).expect("valid regex"))
}

/// Parse the first JSON object found in `text`.
///
/// Anything before the first `{` (prose, a markdown fence) is skipped, as is
/// anything after the object. Keys written as `"Key:" value` are repaired
/// first; that pattern cannot occur in valid JSON.
pub fn parse_reply(text: &str) -> Result<ParsedReply, ParseError> {
    let repaired = colon_inside_key().replace_all(text, r#""$1":$2$3"#);
    first_object(&repaired).map(|v| interpret(&v)).ok_or(ParseError::NoObject)
}

fn first_object(text: &str) -> Option<OrderedValue> {
    for (i, _) in text.match_indices('{') {
        let mut de = serde_json::Deserializer::from_str(&text[i..]);
        if let Ok(v @ OrderedValue::Object(_)) = OrderedValue::deserialize(&mut de) {
            return Some(v);
        }
    }
    None
}

fn strings(v: &OrderedValue) -> Vec<String> {
    match v {
        OrderedValue::String(s) => vec![s.clone()],
        OrderedValue::Array(items) => items.iter().filter_map(|x| x.as_str().map(String::from)).collect(),
        _ => Vec::new(),
    }
}

fn text_field(v: &OrderedValue, names: &[&str]) -> Option<String> {
    v.field(names).and_then(|x| x.as_str()).map(String::from)
}

fn object_of(v: &OrderedValue) -> Option<OntologyObject> {
    Some(OntologyObject {
        name: text_field(v, &["name", "objectname"])?,
        instance_of: text_field(v, &["instanceof", "class"]).unwrap_or_default(),
    })
}

fn endpoints(name: &str, v: &OrderedValue) -> Option<OntologyRelationship> {
    Some(OntologyRelationship {
        name: name.to_string(),
        from: text_field(v, &["relationshipfrom", "from"])?,
        to: text_field(v, &["relationshipto", "to"])?,
    })
}

fn relationships(v: &OrderedValue, out: &mut Vec<OntologyRelationship>) {
    match v {
        OrderedValue::Object(entries) => {
            for (name, body) in entries {
                match body {
                    OrderedValue::Array(items) => {
                        out.extend(items.iter().filter_map(|item| endpoints(name, item)));
                    }
                    other => out.extend(endpoints(name, other)),
                }
            }
        }
        OrderedValue::Array(items) => {
            for item in items {
                if let Some(name) = text_field(item, &["relationshipname", "name"]) {
                    out.extend(endpoints(&name, item));
                } else {
                    // array of single-entry {"name": {...}} objects
                    relationships(item, out);
                }
            }
        }
        _ => {}
    }
}

fn interpret(v: &OrderedValue) -> ParsedReply {
    let class_names = v.field(&["class", "classes"]).map(strings).unwrap_or_default();
    let objects = match v.field(&["object", "objects"]) {
        Some(OrderedValue::Array(items)) => items.iter().filter_map(object_of).collect(),
        Some(single @ OrderedValue::Object(_)) => object_of(single).into_iter().collect(),
        _ => Vec::new(),
    };
    let mut rels = Vec::new();
    if let Some(r) = v.field(&["relationship", "relationships"]) {
        relationships(r, &mut rels);
    }
    ParsedReply {
        class_names,
        objects,
        relationships: rels,
    }
}
