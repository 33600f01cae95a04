//! Project configuration and dotted-key access.

use std::collections::BTreeMap;

use biaslens_core::biasmetrics::MeanSet;
use biaslens_core::entities::ContextMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageConfig {
    pub keep: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    /// PCA target dimension; `null` clusters the vectors as given.
    pub reduce_dim: Option<usize>,
    pub min_cluster_size: usize,
    pub min_samples: Option<usize>,
    pub allow_single_cluster: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityConfig {
    pub noise: f64,
    pub dominance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicsConfig {
    pub top_n_terms: usize,
    pub name_terms: usize,
    pub merge_single_source: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresConfig {
    pub title_model: Option<String>,
    pub body_model: Option<String>,
    pub entity_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitiesConfig {
    pub k: usize,
    pub context_mode: ContextMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub mean_set: MeanSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyConfig {
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub transport_retries: u32,
    pub max_requests: Option<usize>,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub language: LanguageConfig,
    pub clustering: ClusteringConfig,
    pub quality: QualityConfig,
    pub topics: TopicsConfig,
    pub scores: ScoresConfig,
    pub entities: EntitiesConfig,
    pub metrics: MetricsConfig,
    pub ontology: OntologyConfig,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            language: LanguageConfig { keep: "en".into() },
            clustering: ClusteringConfig {
                reduce_dim: None,
                min_cluster_size: 10,
                min_samples: None,
                allow_single_cluster: false,
            },
            quality: QualityConfig {
                noise: 0.30,
                dominance: 0.30,
            },
            topics: TopicsConfig {
                top_n_terms: 10,
                name_terms: 4,
                merge_single_source: true,
            },
            scores: ScoresConfig {
                title_model: None,
                body_model: None,
                entity_model: None,
            },
            entities: EntitiesConfig {
                k: 10,
                context_mode: ContextMode::default(),
            },
            metrics: MetricsConfig {
                mean_set: MeanSet::Covering,
            },
            ontology: OntologyConfig {
                model: "default".into(),
                temperature: 0.0,
                max_retries: 2,
                transport_retries: 3,
                max_requests: None,
                parallelism: 4,
            },
        }
    }
}

impl ProjectConfig {
    fn tree(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Every leaf key (objects under `entities.context_mode` count as one leaf).
    pub fn keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Value::Object(sections) = self.tree() {
            for (section, v) in sections {
                if let Value::Object(fields) = v {
                    out.extend(fields.keys().map(|f| format!("{section}.{f}")));
                }
            }
        }
        out
    }

    pub fn get(&self, key: &str) -> Result<Value, CliError> {
        let (section, field) = split_key(key)?;
        self.tree()
            .get(section)
            .and_then(|s| s.get(field))
            .cloned()
            .ok_or_else(|| CliError::validation(format!("unknown config key {key:?}")))
    }

    /// Values of `keys`, ready to be recorded next to a stage.
    pub fn slice(&self, keys: &[&str]) -> BTreeMap<String, Value> {
        keys.iter()
            .map(|k| (k.to_string(), self.get(k).expect("stage keys exist")))
            .collect()
    }

    /// Set `key` from its command-line text. The text is read as JSON when it
    /// parses, otherwise as a plain string.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let (section, field) = split_key(key)?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut tree = self.tree();
        let slot = tree
            .get_mut(section)
            .and_then(|s| s.get_mut(field))
            .ok_or_else(|| CliError::validation(format!("unknown config key {key:?}")))?;
        *slot = value;
        let next: ProjectConfig = serde_json::from_value(tree)
            .map_err(|e| CliError::validation(format!("invalid value for {key}: {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::validation(m.to_string()));
        if self.language.keep.trim().is_empty() {
            return bad("language.keep must not be empty");
        }
        if self.clustering.min_cluster_size < 2 {
            return bad("clustering.min_cluster_size must be at least 2");
        }
        if self.clustering.min_samples == Some(0) {
            return bad("clustering.min_samples must be positive");
        }
        if self.clustering.reduce_dim == Some(0) {
            return bad("clustering.reduce_dim must be positive");
        }
        for (name, x) in [("quality.noise", self.quality.noise), ("quality.dominance", self.quality.dominance)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(CliError::validation(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.topics.top_n_terms == 0 {
            return bad("topics.top_n_terms must be positive");
        }
        if self.entities.k == 0 {
            return bad("entities.k must be positive");
        }
        if !(0.0..=2.0).contains(&self.ontology.temperature) {
            return bad("ontology.temperature must lie in [0, 2]");
        }
        if self.ontology.parallelism == 0 {
            return bad("ontology.parallelism must be positive");
        }
        Ok(())
    }
}

fn split_key(key: &str) -> Result<(&str, &str), CliError> {
    key.split_once('.')
        .ok_or_else(|| CliError::validation(format!("config key {key:?} must look like section.field")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_parses_json_then_falls_back_to_text() {
        let mut c = ProjectConfig::default();
        c.set("clustering.min_cluster_size", "5").unwrap();
        assert_eq!(c.clustering.min_cluster_size, 5);
        c.set("ontology.model", "gpt-x").unwrap();
        assert_eq!(c.ontology.model, "gpt-x");
        c.set("metrics.mean_set", "include_zero").unwrap();
        assert_eq!(c.metrics.mean_set, MeanSet::IncludeZero);
        c.set("entities.context_mode", r#"{"mode":"window","chars":50}"#).unwrap();
        assert_eq!(c.entities.context_mode, ContextMode::Window { chars: 50 });
    }

    #[test]
    fn rejects_bad_keys_and_values() {
        let mut c = ProjectConfig::default();
        assert_eq!(c.set("nope", "1").unwrap_err().exit_code(), 1);
        assert!(c.set("clustering.bogus", "1").is_err());
        assert!(c.set("clustering.min_cluster_size", "1").is_err());
        assert!(c.set("clustering.min_cluster_size", "many").is_err());
        assert!(c.set("quality.noise", "1.5").is_err());
        assert_eq!(c, ProjectConfig::default());
    }

    #[test]
    fn keys_cover_every_field() {
        let c = ProjectConfig::default();
        let keys = c.keys();
        assert_eq!(keys.len(), 22);
        for k in keys {
            c.get(&k).unwrap();
        }
    }
}
