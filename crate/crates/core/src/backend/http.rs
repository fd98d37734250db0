//! OpenAI-compatible chat-completions client with token logprobs.
//!
//! One HTTP call per sample, each with its own seed. Transport and HTTP
//! failures are retried with bounded exponential backoff; a sample that still
//! fails becomes an error placeholder and the run continues. Malformed
//! responses are placeholders immediately. The startup probe refuses to run
//! against endpoints that cannot return logprobs.

use super::{
    BackendError, GenerationBackend, GenerationRequest, ModelOutput, SampleFailure,
    SampleOutcome, TokenSample,
};
use serde::Deserialize;
use serde_json::json;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

/// Positive logprobs up to this size are float noise from the endpoint and
/// clamp to zero; anything larger is a malformed response.
const LOGPROB_NOISE_TOLERANCE: f64 = 1e-6;

pub struct OpenAiBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
    in_flight: usize,
}

impl OpenAiBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> OpenAiBackend {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build();
        OpenAiBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            agent: config.new_agent(),
            retries: 3,
            backoff: Duration::from_millis(200),
            in_flight: 4,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_in_flight(mut self, in_flight: usize) -> Self {
        self.in_flight = in_flight.max(1);
        self
    }

    #[cfg(test)]
    pub(crate) fn with_fast_backoff(mut self) -> Self {
        self.backoff = Duration::from_millis(1);
        self
    }

    fn completions_url(&self) -> String {
        if self.endpoint.ends_with("/chat/completions") {
            self.endpoint.clone()
        } else {
            format!("{}/v1/chat/completions", self.endpoint)
        }
    }

    fn call_once(
        &self,
        request: &GenerationRequest,
        seed: u64,
    ) -> Result<ChatResponse, CallError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.prompt.preamble},
                {"role": "user", "content": request.prompt.user_section()},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "seed": seed,
            "n": 1,
            "logprobs": true,
        });
        let mut builder = self.agent.post(&self.completions_url());
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(&body)
            .map_err(|e| CallError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 400 {
            let text = response
                .body_mut()
                .read_to_string()
                .unwrap_or_default();
            return Err(CallError::Transport(format!("status {status}: {text}")));
        }
        response
            .body_mut()
            .read_json::<ChatResponse>()
            .map_err(|e| CallError::Malformed(e.to_string()))
    }

    fn sample_one(&self, request: &GenerationRequest, sample_index: usize) -> SampleOutcome {
        let seed = request.seeds[sample_index];
        let mut last_error = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.call_once(request, seed) {
                Ok(response) => {
                    return match extract_tokens(&response) {
                        Ok(tokens) => Ok(ModelOutput::from_tokens(
                            &request.request_id(),
                            sample_index,
                            tokens,
                            &self.model,
                        )),
                        Err(reason) => Err(SampleFailure {
                            sample_index,
                            reason,
                        }),
                    };
                }
                Err(CallError::Malformed(reason)) => {
                    return Err(SampleFailure {
                        sample_index,
                        reason: format!("malformed response: {reason}"),
                    });
                }
                Err(CallError::Transport(reason)) => last_error = reason,
            }
        }
        Err(SampleFailure {
            sample_index,
            reason: format!(
                "transport failure after {} attempts: {last_error}",
                self.retries + 1
            ),
        })
    }
}

enum CallError {
    Transport(String),
    Malformed(String),
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    message: Option<Message>,
    #[serde(default)]
    logprobs: Option<Logprobs>,
}

#[derive(Debug, Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Logprobs {
    #[serde(default)]
    content: Option<Vec<TokenLogprob>>,
}

#[derive(Debug, Deserialize)]
struct TokenLogprob {
    token: String,
    logprob: f64,
}

fn extract_tokens(response: &ChatResponse) -> Result<Vec<TokenSample>, String> {
    let choice = response
        .choices
        .first()
        .ok_or_else(|| "response has no choices".to_string())?;
    let entries = choice
        .logprobs
        .as_ref()
        .and_then(|lp| lp.content.as_ref())
        .ok_or_else(|| "response carries no token logprobs".to_string())?;
    if entries.is_empty() {
        // Empty completion, recorded as-is.
        let leftover = choice
            .message
            .as_ref()
            .and_then(|m| m.content.as_deref())
            .unwrap_or("");
        if !leftover.is_empty() {
            return Err("logprob list empty but message content present".to_string());
        }
        return Ok(Vec::new());
    }
    entries
        .iter()
        .map(|entry| {
            if entry.logprob > LOGPROB_NOISE_TOLERANCE {
                return Err(format!(
                    "token {:?} has positive logprob {}",
                    entry.token, entry.logprob
                ));
            }
            Ok(TokenSample {
                text: entry.token.clone(),
                logprob: entry.logprob.min(0.0),
            })
        })
        .collect()
}

impl GenerationBackend for OpenAiBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn probe(&self) -> Result<(), BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": "ping"}],
            "max_tokens": 1,
            "temperature": 0.0,
            "logprobs": true,
        });
        let mut builder = self.agent.post(&self.completions_url());
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(&body)
            .map_err(|e| BackendError::ProbeFailed(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 400 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::ProbeFailed(format!("status {status}: {text}")));
        }
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::ProbeFailed(e.to_string()))?;
        let has_logprobs = parsed
            .choices
            .first()
            .and_then(|c| c.logprobs.as_ref())
            .and_then(|lp| lp.content.as_ref())
            .is_some();
        if !has_logprobs {
            return Err(BackendError::LogprobsUnsupported(format!(
                "probe against {} returned no logprobs.content",
                self.completions_url()
            )));
        }
        Ok(())
    }

    fn sample(&self, request: &GenerationRequest) -> Vec<SampleOutcome> {
        let slots: Mutex<Vec<Option<SampleOutcome>>> =
            Mutex::new(vec![None; request.samples_k]);
        let next = AtomicUsize::new(0);
        let workers = self.in_flight.min(request.samples_k);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if index >= request.samples_k {
                        break;
                    }
                    let outcome = self.sample_one(request, index);
                    slots.lock().expect("slot lock")[index] = Some(outcome);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .enumerate()
            .map(|(index, slot)| {
                slot.unwrap_or_else(|| {
                    Err(SampleFailure {
                        sample_index: index,
                        reason: "worker produced no outcome".into(),
                    })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_http::StubServer;
    use super::super::tests::test_prompt;
    use super::*;
    use crate::prompts::PromptCategory;
    use std::sync::atomic::AtomicU32;

    fn request(k: usize) -> GenerationRequest {
        GenerationRequest {
            prompt: test_prompt("p1", PromptCategory::Roleplay),
            samples_k: k,
            seeds: (0..k as u64).collect(),
            temperature: 1.0,
            max_tokens: 8,
            want_logprobs: true,
        }
    }

    fn chat_body(tokens: &[(&str, f64)]) -> String {
        let content: Vec<serde_json::Value> = tokens
            .iter()
            .map(|(t, lp)| json!({"token": t, "logprob": lp}))
            .collect();
        let text: String = tokens.iter().map(|(t, _)| *t).collect();
        json!({
            "choices": [{
                "message": {"role": "assistant", "content": text},
                "logprobs": {"content": content},
            }]
        })
        .to_string()
    }

    #[test]
    fn samples_come_back_in_index_order_with_seeds_echoed() {
        let server = StubServer::start(move |path, body| {
            assert!(path.ends_with("/v1/chat/completions"));
            let request: serde_json::Value = serde_json::from_str(body).unwrap();
            let seed = request["seed"].as_u64().unwrap();
            assert!(request["logprobs"].as_bool().unwrap());
            assert_eq!(request["messages"][0]["role"], "system");
            (200, chat_body(&[(&format!("s{seed}"), -0.5)]))
        });
        let backend =
            OpenAiBackend::new(&server.url(), "test-model", None).with_in_flight(3);
        let outcomes = backend.sample(&request(4));
        assert_eq!(outcomes.len(), 4);
        for (i, outcome) in outcomes.iter().enumerate() {
            let output = outcome.as_ref().unwrap();
            assert_eq!(output.sample_index, i);
            assert_eq!(output.raw_text, format!("s{i}"));
            assert_eq!(output.model_name, "test-model");
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let failures = AtomicU32::new(0);
        let server = StubServer::start(move |_, _| {
            if failures.fetch_add(1, Ordering::SeqCst) == 0 {
                (503, "{\"error\":\"busy\"}".to_string())
            } else {
                (200, chat_body(&[("neither", -0.1)]))
            }
        });
        let backend = OpenAiBackend::new(&server.url(), "m", None)
            .with_retries(2)
            .with_fast_backoff();
        let outcomes = backend.sample(&request(1));
        assert!(outcomes[0].is_ok());
    }

    #[test]
    fn exhausted_retries_become_placeholders() {
        let server = StubServer::start(|_, _| (500, "{}".to_string()));
        let backend = OpenAiBackend::new(&server.url(), "m", None)
            .with_retries(1)
            .with_fast_backoff();
        let outcomes = backend.sample(&request(2));
        assert_eq!(outcomes.len(), 2);
        for (i, outcome) in outcomes.iter().enumerate() {
            let failure = outcome.as_ref().unwrap_err();
            assert_eq!(failure.sample_index, i);
            assert!(failure.reason.contains("2 attempts"));
        }
    }

    #[test]
    fn missing_logprobs_is_a_malformed_placeholder_not_a_retry() {
        let server = StubServer::start(|_, _| {
            (
                200,
                json!({"choices": [{"message": {"content": "hi"}}]}).to_string(),
            )
        });
        let backend = OpenAiBackend::new(&server.url(), "m", None)
            .with_retries(3)
            .with_fast_backoff();
        let outcomes = backend.sample(&request(1));
        let failure = outcomes[0].as_ref().unwrap_err();
        assert!(failure.reason.contains("no token logprobs"));
        assert_eq!(server.hits(), 1, "malformed responses must not be retried");
    }

    #[test]
    fn probe_fails_without_logprobs_and_passes_with_them() {
        let server = StubServer::start(|_, _| {
            (
                200,
                json!({"choices": [{"message": {"content": "x"}}]}).to_string(),
            )
        });
        let backend = OpenAiBackend::new(&server.url(), "m", None);
        assert!(matches!(
            backend.probe().unwrap_err(),
            BackendError::LogprobsUnsupported(_)
        ));

        let server = StubServer::start(|_, _| (200, chat_body(&[("x", -0.5)])));
        let backend = OpenAiBackend::new(&server.url(), "m", None);
        assert!(backend.probe().is_ok());
    }

    #[test]
    fn positive_logprob_noise_clamps_but_large_values_fail() {
        let server = StubServer::start(|_, body| {
            let request: serde_json::Value = serde_json::from_str(body).unwrap();
            let seed = request["seed"].as_u64().unwrap();
            let lp = if seed == 0 { 1e-9 } else { 0.5 };
            (200, chat_body(&[("t", lp)]))
        });
        let backend = OpenAiBackend::new(&server.url(), "m", None).with_fast_backoff();
        let outcomes = backend.sample(&request(2));
        let ok = outcomes[0].as_ref().unwrap();
        assert_eq!(ok.tokens[0].logprob, 0.0);
        let failure = outcomes[1].as_ref().unwrap_err();
        assert!(failure.reason.contains("positive logprob"));
    }
}
