//! Contradiction rewrites through a chat/completion service.

use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::error::{Error, Result};

/// Environment variable holding the bearer token for [`HttpLlmClient`].
pub const DEFAULT_TOKEN_ENV: &str = "CLAIMAUG_LLM_TOKEN";

const PROMPT_PLAIN: &str = "Contradict this sentence with colorful words";
const PROMPT_NO_CONCESSIVE: &str =
    "Without using despite, while, and although, contradict this sentence with colorful words";

#[derive(Debug, Error)]
pub enum LlmError {
    /// Network failures, timeouts, 5xx and 429 responses.
    #[error("transport: {0}")]
    Transport(String),
    #[error("{0}")]
    Fatal(String),
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> std::result::Result<String, LlmError>;
}

/// The prompt for `variant` 1 or 2 with the sentence interpolated in quotes.
pub fn contradiction_prompt(sentence: &str, variant: u8) -> Result<String> {
    let head = match variant {
        1 => PROMPT_PLAIN,
        2 => PROMPT_NO_CONCESSIVE,
        v => return Err(Error::Config(format!("prompt variant must be 1 or 2, got {v}"))),
    };
    Ok(format!("{head} \"{sentence}\""))
}

/// Sends the contradiction prompt, retrying transport failures up to
/// `max_attempts` times in total.
pub fn llm_contradict(
    sentence: &str,
    client: &dyn LlmClient,
    variant: u8,
    max_attempts: usize,
) -> Result<String> {
    let prompt = contradiction_prompt(sentence, variant)?;
    let attempts = max_attempts.max(1);
    let mut last = String::new();
    for _ in 0..attempts {
        match client.complete(&prompt) {
            Ok(text) => {
                let text = text.trim();
                if text.is_empty() {
                    return Err(Error::AugmentationFailed("empty completion".into()));
                }
                return Ok(text.to_string());
            }
            Err(LlmError::Transport(msg)) => last = msg,
            Err(LlmError::Fatal(msg)) => return Err(Error::AugmentationFailed(msg)),
        }
    }
    Err(Error::LlmRetriable { attempts, msg: last })
}

/// Offline client. Returns a fixed reply when configured, otherwise a
/// deterministic negation of the quoted sentence.
#[derive(Debug, Default)]
pub struct MockLlmClient {
    reply: Option<String>,
    prompts: Mutex<Vec<String>>,
}

impl MockLlmClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reply(reply: impl Into<String>) -> Self {
        MockLlmClient {
            reply: Some(reply.into()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("poisoned").clone()
    }
}

impl LlmClient for MockLlmClient {
    fn complete(&self, prompt: &str) -> std::result::Result<String, LlmError> {
        self.prompts.lock().expect("poisoned").push(prompt.to_string());
        if let Some(r) = &self.reply {
            return Ok(r.clone());
        }
        let quoted = prompt
            .find('"')
            .map(|i| prompt[i + 1..].trim_end_matches('"'))
            .unwrap_or(prompt);
        Ok(format!("Contrary to what many say, it is not true that {quoted}"))
    }
}

/// JSON-over-HTTP client: POSTs `{"prompt": ...}` and reads `completion`
/// (or `text`) from the JSON response, falling back to the raw body.
#[derive(Debug)]
pub struct HttpLlmClient {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
}

#[derive(Deserialize)]
struct CompletionBody {
    completion: Option<String>,
    text: Option<String>,
}

impl HttpLlmClient {
    /// Reads the auth token from `token_env` if set.
    pub fn new(endpoint: impl Into<String>, token_env: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        HttpLlmClient {
            agent: config.into(),
            endpoint: endpoint.into(),
            token: std::env::var(token_env).ok().filter(|t| !t.is_empty()),
        }
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> std::result::Result<String, LlmError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(tok) = &self.token {
            req = req.header("Authorization", &format!("Bearer {tok}"));
        }
        let mut resp = req
            .send_json(serde_json::json!({ "prompt": prompt }))
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err(LlmError::Transport(format!("HTTP {status}"))),
            _ => return Err(LlmError::Fatal(format!("HTTP {status}: {body}"))),
        }
        match serde_json::from_str::<CompletionBody>(&body) {
            Ok(CompletionBody { completion: Some(c), .. }) => Ok(c),
            Ok(CompletionBody { text: Some(t), .. }) => Ok(t),
            _ => Ok(body),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    const SENTENCE: &str = "80% of people diagnosed with IBS have Sibo.";

    #[test]
    fn prompt_templates() {
        assert_eq!(
            contradiction_prompt(SENTENCE, 1).unwrap(),
            format!("Contradict this sentence with colorful words \"{SENTENCE}\"")
        );
        assert_eq!(
            contradiction_prompt(SENTENCE, 2).unwrap(),
            format!(
                "Without using despite, while, and although, contradict this sentence with colorful words \"{SENTENCE}\""
            )
        );
        assert!(contradiction_prompt(SENTENCE, 3).is_err());
    }

    #[test]
    fn mock_reply_verbatim() {
        let mock = MockLlmClient::with_reply("No one has Sibo.");
        assert_eq!(llm_contradict(SENTENCE, &mock, 1, 3).unwrap(), "No one has Sibo.");
        assert_eq!(mock.prompts().len(), 1);
    }

    struct Down(AtomicUsize);
    impl LlmClient for Down {
        fn complete(&self, _: &str) -> std::result::Result<String, LlmError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::Transport("connection refused".into()))
        }
    }

    #[test]
    fn down_client_is_retriable_after_attempts() {
        let c = Down(AtomicUsize::new(0));
        let err = llm_contradict(SENTENCE, &c, 1, 3).unwrap_err();
        assert!(matches!(err, Error::LlmRetriable { attempts: 3, .. }));
        assert_eq!(c.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn empty_completion_fails() {
        let mock = MockLlmClient::with_reply("   ");
        assert!(matches!(
            llm_contradict(SENTENCE, &mock, 2, 3),
            Err(Error::AugmentationFailed(_))
        ));
    }
}
