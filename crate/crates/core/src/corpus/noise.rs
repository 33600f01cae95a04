//! Newspaper-specific noise removal.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use super::{Article, CorpusError, NoiseRule};

/// Load `noise_rules.json`.
pub fn load_noise_rules(path: impl AsRef<Path>) -> Result<Vec<NoiseRule>, CorpusError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_reader(f).map_err(|source| CorpusError::Json {
        what: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedBody {
    pub article_id: String,
    pub body: String,
    pub removed_chars: usize,
    /// Orders of the rules that matched at least once.
    pub rules_matched: Vec<i64>,
    /// Set when cleaning left nothing but whitespace of a non-empty body.
    pub emptied: bool,
}

#[derive(Debug)]
struct CompiledRule {
    order: i64,
    regex: Regex,
}

/// Compiled rules grouped per newspaper, each group sorted by `order`
/// (declaration order breaks ties).
#[derive(Debug, Default)]
pub struct NoiseRuleSet {
    by_newspaper: BTreeMap<String, Vec<CompiledRule>>,
}

impl NoiseRuleSet {
    pub fn compile(rules: &[NoiseRule]) -> Result<Self, CorpusError> {
        let mut indexed: Vec<(usize, &NoiseRule)> = rules.iter().enumerate().collect();
        indexed.sort_by_key(|(i, r)| (r.order, *i));
        let mut by_newspaper: BTreeMap<String, Vec<CompiledRule>> = BTreeMap::new();
        for (_, rule) in indexed {
            let regex = RegexBuilder::new(&rule.pattern)
                .multi_line(true)
                .build()
                .map_err(|source| CorpusError::Pattern {
                    newspaper_id: rule.newspaper_id.clone(),
                    order: rule.order,
                    source,
                })?;
            by_newspaper
                .entry(rule.newspaper_id.clone())
                .or_default()
                .push(CompiledRule {
                    order: rule.order,
                    regex,
                });
        }
        Ok(Self { by_newspaper })
    }

    pub fn rule_count(&self) -> usize {
        self.by_newspaper.values().map(Vec::len).sum()
    }

    /// Delete every match of the article's newspaper rules from its body.
    pub fn clean(&self, article: &Article) -> CleanedBody {
        let mut body = article.body.clone();
        let mut rules_matched = Vec::new();
        if let Some(rules) = self.by_newspaper.get(&article.newspaper_id) {
            for rule in rules {
                if rule.regex.is_match(&body) {
                    rules_matched.push(rule.order);
                    body = rule.regex.replace_all(&body, "").into_owned();
                }
            }
        }
        let removed_chars = article.body.chars().count() - body.chars().count();
        let emptied = !article.body.trim().is_empty() && body.trim().is_empty();
        CleanedBody {
            article_id: article.id.clone(),
            body,
            removed_chars,
            rules_matched,
            emptied,
        }
    }
}

/// Apply `rules` (which must all belong to the article's newspaper) to one article.
pub fn apply_noise_rules(article: &Article, rules: &[NoiseRule]) -> Result<CleanedBody, CorpusError> {
    if let Some(r) = rules.iter().find(|r| r.newspaper_id != article.newspaper_id) {
        return Err(CorpusError::RuleMismatch {
            rule: r.newspaper_id.clone(),
            article: article.newspaper_id.clone(),
        });
    }
    Ok(NoiseRuleSet::compile(rules)?.clean(article))
}
