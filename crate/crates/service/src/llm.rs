//! HTTP client for the ontology LLM endpoint.
//!
//! The endpoint takes `{model, temperature, prompt}` and answers `{text}`.

use std::time::Duration;

use biaslens_core::ontology::{LlmClient, LlmError, LlmRequest};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const URL_VAR: &str = "BIASLENS_LLM_URL";
pub const KEY_VAR: &str = "BIASLENS_LLM_KEY";

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    temperature: f64,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
}

pub struct HttpLlm {
    url: String,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpLlm {
    pub fn new(url: impl Into<String>, key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            key,
            agent,
        }
    }

    /// Endpoint from `BIASLENS_LLM_URL`, bearer credential from `BIASLENS_LLM_KEY`.
    pub fn from_env() -> CliResult<Self> {
        let url = std::env::var(URL_VAR)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| CliError::external(format!("{URL_VAR} is not set; pass --canned for offline replies")))?;
        let key = std::env::var(KEY_VAR).ok().filter(|k| !k.is_empty());
        Ok(Self::new(url, key, Duration::from_secs(300)))
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let body = Body {
            model: &request.model,
            temperature: request.temperature,
            prompt: &request.prompt,
        };
        let mut req = self.agent.post(&self.url).header("Accept", "application/json");
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Transport(format!("malformed endpoint response: {e}")))?;
        Ok(reply.text)
    }
}
