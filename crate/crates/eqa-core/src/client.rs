//! Minimal OpenAI-compatible chat-completion client used by live scorer
//! bindings. Temperature is pinned to 0; the auth token is read from a
//! configurable environment variable, never stored in config files.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

/// Prompt templates are opaque configuration; `{question}`, `{observation}`,
/// `{options}`, and `{snapshots}` are substituted before dispatch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptConfig {
    pub extract_regions_targets: String,
    pub detect_region: String,
    pub relevance_yes_no: String,
    pub stop_condition: String,
    pub answer_mc: String,
    pub answer_open: String,
    pub cot_instruction: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            extract_regions_targets:
                "Extract the relevant regions and visual targets for this question. \
                 Reply with JSON {\"regions\": [..], \"targets\": [[label, room], ..]}.\n\
                 Question: {question}"
                    .into(),
            detect_region: "Which room is visible in this observation? Reply with the room \
                            name only.\nObservation: {observation}"
                .into(),
            relevance_yes_no: "Does this observation contain sufficient evidence to answer \
                               the question? Reply yes or no.\nQuestion: {question}\n\
                               Observation: {observation}"
                .into(),
            stop_condition: "Given these retrieved snapshots, can the question be answered \
                             now? Reply yes or no.\nQuestion: {question}\n\
                             Snapshots:\n{snapshots}"
                .into(),
            answer_mc: "Answer the multiple-choice question using the snapshots. Reply with \
                        the option letter only on the final line.\nQuestion: {question}\n\
                        Options:\n{options}\nSnapshots:\n{snapshots}"
                .into(),
            answer_open: "Answer the question in one short sentence using the snapshots.\n\
                          Question: {question}\nSnapshots:\n{snapshots}"
                .into(),
            cot_instruction: "Think step by step before giving the final answer.".into(),
        }
    }
}

pub struct ChatClient {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
}

#[derive(Debug, Clone)]
pub struct ChatReply {
    pub content: String,
    pub yes_probability: Option<f64>,
}

impl ChatClient {
    pub fn new(config: EndpointConfig) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .expect("http client");
        ChatClient { config, http }
    }

    /// One chat turn with retry budget; returns the reply text and, when the
    /// endpoint exposes token log-probabilities, the normalized probability
    /// of a leading "yes".
    pub fn chat(&self, prompt: &str, want_logprobs: bool) -> Result<ChatReply> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        if want_logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(5);
        }
        let token = self
            .config
            .auth_env
            .as_ref()
            .and_then(|name| std::env::var(name).ok());

        let attempts = self.config.retries + 1;
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * (1 << attempt.min(4)) as u64));
            }
            let mut req = self.http.post(&url).json(&body);
            if let Some(token) = &token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let value: serde_json::Value = resp
                        .json()
                        .map_err(|e| Error::Endpoint {
                            attempts: attempt + 1,
                            detail: format!("bad response body: {e}"),
                        })?;
                    return Ok(parse_reply(&value));
                }
                Ok(resp) => {
                    last_err = format!("http status {}", resp.status());
                }
                Err(e) => {
                    last_err = e.to_string();
                }
            }
        }
        Err(Error::Endpoint {
            attempts,
            detail: last_err,
        })
    }

    /// Yes-probability of a prompt: token log-probabilities when available,
    /// else a parsed numeric self-rating mapped to [0, 1], else yes/no text.
    pub fn yes_probability(&self, prompt: &str) -> Result<f64> {
        let reply = self.chat(prompt, true)?;
        if let Some(p) = reply.yes_probability {
            return Ok(p);
        }
        if let Some(v) = first_number(&reply.content) {
            let p = if v > 1.0 { v / 100.0 } else { v };
            return Ok(p.clamp(0.0, 1.0));
        }
        let lowered = reply.content.to_lowercase();
        Ok(if lowered.contains("yes") { 1.0 } else { 0.0 })
    }
}

fn parse_reply(value: &serde_json::Value) -> ChatReply {
    let choice = &value["choices"][0];
    let content = choice["message"]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mut p_yes = 0.0f64;
    let mut p_no = 0.0f64;
    if let Some(tops) = choice["logprobs"]["content"][0]["top_logprobs"].as_array() {
        for entry in tops {
            let token = entry["token"].as_str().unwrap_or_default();
            let lp = entry["logprob"].as_f64().unwrap_or(f64::NEG_INFINITY);
            match token.trim().to_lowercase().as_str() {
                "yes" => p_yes += lp.exp(),
                "no" => p_no += lp.exp(),
                _ => {}
            }
        }
    }
    let yes_probability = if p_yes + p_no > 0.0 {
        Some(p_yes / (p_yes + p_no))
    } else {
        None
    };
    ChatReply {
        content,
        yes_probability,
    }
}

fn first_number(text: &str) -> Option<f64> {
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_ascii_digit() || ch == '.' {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start {
            if let Ok(v) = text[s..i].parse::<f64>() {
                return Some(v);
            }
            start = None;
        }
    }
    start.and_then(|s| text[s..].parse().ok())
}
