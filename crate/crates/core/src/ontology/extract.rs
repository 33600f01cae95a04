//! LLM-driven extraction with retries, backoff and a request budget.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::OntologyDocument;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request budget of {0} exhausted")]
    Budget(usize),
}

/// One stateless request per call. Implementations must not carry
/// conversation state between calls.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError>;
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested delays without waiting.
#[derive(Default)]
pub struct RecordingSleeper {
    pub slept: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.slept.lock().expect("sleeper lock").push(d);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub model: String,
    pub temperature: f64,
    /// Extra attempts after an unparseable reply.
    pub max_retries: u32,
    pub transport_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_factor: u32,
    /// Cap on requests sent across a batch, retries included.
    pub max_requests: Option<usize>,
    pub parallelism: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            model: "default".to_string(),
            temperature: 0.0,
            max_retries: 2,
            transport_retries: 3,
            backoff_base_ms: 1000,
            backoff_factor: 2,
            max_requests: None,
            parallelism: 4,
        }
    }
}

impl ExtractConfig {
    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(u64::from(self.backoff_factor).saturating_pow(retry)))
    }
}

struct Budget<'a> {
    cap: Option<usize>,
    used: &'a AtomicUsize,
}

impl Budget<'_> {
    fn take(&self) -> Result<(), LlmError> {
        match self.cap {
            None => {
                self.used.fetch_add(1, Ordering::SeqCst);
                Ok(())
            }
            Some(cap) => self
                .used
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < cap).then_some(u + 1))
                .map(|_| ())
                .map_err(|_| LlmError::Budget(cap)),
        }
    }
}

fn request_with_backoff(
    client: &dyn LlmClient,
    request: &LlmRequest,
    config: &ExtractConfig,
    budget: &Budget<'_>,
    sleeper: &dyn Sleeper,
) -> Result<String, LlmError> {
    let mut retry = 0;
    loop {
        budget.take()?;
        match client.complete(request) {
            Ok(text) => return Ok(text),
            Err(LlmError::Transport(msg)) => {
                if retry >= config.transport_retries {
                    return Err(LlmError::Transport(msg));
                }
                sleeper.sleep(config.backoff(retry));
                retry += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

fn extract_with(
    article_id: &str,
    prompt: &str,
    client: &dyn LlmClient,
    config: &ExtractConfig,
    budget: &Budget<'_>,
    sleeper: &dyn Sleeper,
) -> Result<OntologyDocument, LlmError> {
    let request = LlmRequest {
        model: config.model.clone(),
        temperature: config.temperature,
        prompt: prompt.to_string(),
    };
    let mut last_reply = String::new();
    let mut last_error = String::new();
    for attempt in 1..=config.max_retries + 1 {
        let reply = request_with_backoff(client, &request, config, budget, sleeper)?;
        match OntologyDocument::from_reply(article_id, &reply, attempt) {
            Ok(doc) => return Ok(doc),
            Err(e) => {
                last_error = e.to_string();
                last_reply = reply;
            }
        }
    }
    Ok(OntologyDocument::failure(article_id, &last_reply, config.max_retries + 1, last_error))
}

/// Extract one article's ontology. A reply that never parses yields a
/// document marked failed; transport and budget problems are errors.
pub fn extract(
    article_id: &str,
    prompt: &str,
    client: &dyn LlmClient,
    config: &ExtractConfig,
    sleeper: &dyn Sleeper,
) -> Result<OntologyDocument, LlmError> {
    let used = AtomicUsize::new(0);
    let budget = Budget {
        cap: config.max_requests,
        used: &used,
    };
    extract_with(article_id, prompt, client, config, &budget, sleeper)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchOutcome {
    /// Finished documents in input order, failed ones included.
    pub documents: Vec<OntologyDocument>,
    /// Articles whose transport retries ran out.
    pub transport_failures: Vec<(String, String)>,
    /// Articles not finished because the budget ran out.
    pub unprocessed: Vec<String>,
    pub budget_exhausted: bool,
    pub requests: usize,
}

/// Extract a batch of `(article_id, prompt)` pairs with bounded parallelism.
pub fn extract_batch(
    items: &[(String, String)],
    client: &dyn LlmClient,
    config: &ExtractConfig,
    sleeper: &dyn Sleeper,
) -> BatchOutcome {
    let used = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<OntologyDocument, LlmError>>>> = Mutex::new(vec![None; items.len()]);
    let budget = Budget {
        cap: config.max_requests,
        used: &used,
    };
    let workers = config.parallelism.clamp(1, items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, prompt)) = items.get(i) else { break };
                let r = extract_with(id, prompt, client, config, &budget, sleeper);
                if matches!(r, Err(LlmError::Budget(_))) {
                    stop.store(true, Ordering::SeqCst);
                }
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    let mut out = BatchOutcome {
        requests: used.load(Ordering::SeqCst),
        budget_exhausted: stop.load(Ordering::SeqCst),
        ..BatchOutcome::default()
    };
    for ((id, _), r) in items.iter().zip(results.into_inner().expect("results lock")) {
        match r {
            Some(Ok(doc)) => out.documents.push(doc),
            Some(Err(LlmError::Transport(msg))) => out.transport_failures.push((id.clone(), msg)),
            Some(Err(LlmError::Budget(_))) | None => out.unprocessed.push(id.clone()),
        }
    }
    out
}

/// Scripted client for tests and offline demos.
///
/// Each prompt has a reply script; `None` simulates a transport failure.
/// Once a script is used up its last entry repeats.
#[derive(Default)]
pub struct CannedLlm {
    scripts: HashMap<String, Vec<Option<String>>>,
    calls: Mutex<HashMap<String, usize>>,
    log: Mutex<Vec<LlmRequest>>,
}

impl CannedLlm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn script(&mut self, prompt: impl Into<String>, replies: Vec<Option<String>>) {
        self.scripts.insert(prompt.into(), replies);
    }

    pub fn reply(&mut self, prompt: impl Into<String>, reply: impl Into<String>) {
        self.script(prompt, vec![Some(reply.into())]);
    }

    pub fn requests(&self) -> Vec<LlmRequest> {
        self.log.lock().expect("log lock").clone()
    }
}

impl LlmClient for CannedLlm {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        self.log.lock().expect("log lock").push(request.clone());
        let script = self
            .scripts
            .get(&request.prompt)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| LlmError::Transport("no canned reply for prompt".to_string()))?;
        let n = {
            let mut calls = self.calls.lock().expect("calls lock");
            let c = calls.entry(request.prompt.clone()).or_insert(0);
            *c += 1;
            *c - 1
        };
        script[n.min(script.len() - 1)]
            .clone()
            .ok_or_else(|| LlmError::Transport("simulated connection reset".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"Class": ["Person"], "Object": [{"Name": "Ann", "InstanceOf": "Person"}], "Relationship": {}}"#;

    fn quick() -> ExtractConfig {
        ExtractConfig {
            backoff_base_ms: 10,
            ..ExtractConfig::default()
        }
    }

    #[test]
    fn valid_reply_parses_first_time() {
        let mut llm = CannedLlm::new();
        llm.reply("p", GOOD);
        let doc = extract("a1", "p", &llm, &quick(), &RecordingSleeper::default()).unwrap();
        assert!(!doc.failed);
        assert_eq!(doc.attempt_count, 1);
        assert_eq!(doc.raw_reply, GOOD);
        assert_eq!(llm.requests().len(), 1);
        assert_eq!(llm.requests()[0].temperature, 0.0);
    }

    #[test]
    fn fenced_reply_parses() {
        let mut llm = CannedLlm::new();
        llm.reply("p", format!("```json\n{GOOD}\n```"));
        let doc = extract("a1", "p", &llm, &quick(), &RecordingSleeper::default()).unwrap();
        assert_eq!(doc.objects.len(), 1);
    }

    #[test]
    fn garbage_exhausts_retries() {
        let mut llm = CannedLlm::new();
        llm.script("p", vec![Some("no".into()), Some("still no".into()), Some("never".into())]);
        let doc = extract("a1", "p", &llm, &quick(), &RecordingSleeper::default()).unwrap();
        assert!(doc.failed);
        assert_eq!(doc.attempt_count, 3);
        assert_eq!(doc.raw_reply, "never");
        assert_eq!(llm.requests().len(), 3);
        // every attempt resends the same standalone prompt
        assert!(llm.requests().iter().all(|r| r.prompt == "p"));
    }

    #[test]
    fn retry_succeeds_on_second_reply() {
        let mut llm = CannedLlm::new();
        llm.script("p", vec![Some("oops".into()), Some(GOOD.into())]);
        let doc = extract("a1", "p", &llm, &quick(), &RecordingSleeper::default()).unwrap();
        assert_eq!(doc.attempt_count, 2);
        assert!(!doc.failed);
    }

    #[test]
    fn transport_backoff_doubles() {
        let mut llm = CannedLlm::new();
        llm.script("p", vec![None, None, Some(GOOD.into())]);
        let sleeper = RecordingSleeper::default();
        let doc = extract("a1", "p", &llm, &ExtractConfig::default(), &sleeper).unwrap();
        assert_eq!(doc.attempt_count, 1);
        let slept = sleeper.slept.lock().unwrap().clone();
        assert_eq!(slept, vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn transport_gives_up_after_three_retries() {
        let mut llm = CannedLlm::new();
        llm.script("p", vec![None]);
        let sleeper = RecordingSleeper::default();
        let err = extract("a1", "p", &llm, &ExtractConfig::default(), &sleeper).unwrap_err();
        assert!(matches!(err, LlmError::Transport(_)));
        assert_eq!(llm.requests().len(), 4);
        assert_eq!(sleeper.slept.lock().unwrap().last(), Some(&Duration::from_secs(4)));
    }

    #[test]
    fn batch_keeps_order_and_honours_budget() {
        let mut llm = CannedLlm::new();
        let items: Vec<(String, String)> = (0..6).map(|i| (format!("a{i}"), format!("p{i}"))).collect();
        for (_, p) in &items {
            llm.reply(p.clone(), GOOD);
        }
        let out = extract_batch(&items, &llm, &quick(), &RecordingSleeper::default());
        let ids: Vec<&str> = out.documents.iter().map(|d| d.article_id.as_str()).collect();
        assert_eq!(ids, vec!["a0", "a1", "a2", "a3", "a4", "a5"]);
        assert!(!out.budget_exhausted);

        let capped = ExtractConfig {
            max_requests: Some(3),
            parallelism: 1,
            ..quick()
        };
        let out = extract_batch(&items, &llm, &capped, &RecordingSleeper::default());
        assert!(out.budget_exhausted);
        assert_eq!(out.documents.len(), 3);
        assert_eq!(out.unprocessed, vec!["a3", "a4", "a5"]);
        assert_eq!(out.requests, 3);
    }

    #[test]
    fn budget_is_never_exceeded_in_parallel() {
        let mut llm = CannedLlm::new();
        let items: Vec<(String, String)> = (0..20).map(|i| (format!("a{i}"), format!("p{i}"))).collect();
        for (_, p) in &items {
            llm.script(p.clone(), vec![Some("bad".into()), Some(GOOD.into())]);
        }
        let cfg = ExtractConfig {
            max_requests: Some(7),
            ..quick()
        };
        let out = extract_batch(&items, &llm, &cfg, &RecordingSleeper::default());
        assert_eq!(llm.requests().len(), 7);
        assert_eq!(out.documents.len() + out.unprocessed.len(), 20);
    }
}
