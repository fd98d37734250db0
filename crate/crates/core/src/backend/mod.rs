//! Sampling backends: obtain K completions with per-token log-probabilities
//! for a rendered prompt, from an OpenAI-compatible endpoint, a deterministic
//! mock, or a recorded journal.

mod http;
mod journal;
mod mock;
#[doc(hidden)]
pub mod test_http;

pub use http::OpenAiBackend;
pub use journal::{
    Journal, JournalEntry, JournalKey, JournalRequest, JournalResponse, JournalWriter,
    ReplayBackend, Timestamps,
};
pub use mock::{MockBackend, MockEntry, MockScript};

use crate::hash;
use crate::prompts::{PromptCategory, RenderedPrompt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One generated token with its natural-log probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSample {
    pub text: String,
    /// Natural log, <= 0. Other bases are converted at ingestion.
    pub logprob: f64,
}

/// One sampled completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub request_id: String,
    pub sample_index: usize,
    /// Non-empty unless the endpoint returned an empty completion, which is
    /// recorded as-is.
    pub tokens: Vec<TokenSample>,
    /// Always the concatenation of token texts.
    pub raw_text: String,
    pub model_name: String,
}

impl ModelOutput {
    pub fn from_tokens(
        request_id: &str,
        sample_index: usize,
        tokens: Vec<TokenSample>,
        model_name: &str,
    ) -> ModelOutput {
        let raw_text = tokens.iter().map(|t| t.text.as_str()).collect();
        ModelOutput {
            request_id: request_id.to_string(),
            sample_index,
            tokens,
            raw_text,
            model_name: model_name.to_string(),
        }
    }

    /// Sum of token logprobs; the sequence log-probability consumed
    /// downstream, with no renormalization here.
    pub fn sum_logprob(&self) -> f64 {
        self.tokens.iter().map(|t| t.logprob).sum()
    }
}

/// A sample slot that failed after retries; the run continues around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_index: usize,
    pub reason: String,
}

pub type SampleOutcome = Result<ModelOutput, SampleFailure>;

/// Request for K sampled completions of one rendered prompt.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub prompt: RenderedPrompt,
    pub samples_k: usize,
    /// One distinct seed per sample.
    pub seeds: Vec<u64>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Always true in this harness; kept explicit so journals are
    /// self-describing.
    pub want_logprobs: bool,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.samples_k == 0 {
            return Err(BackendError::InvalidRequest("samples_k must be >= 1".into()));
        }
        if self.seeds.len() != self.samples_k {
            return Err(BackendError::InvalidRequest(format!(
                "need {} seeds, got {}",
                self.samples_k,
                self.seeds.len()
            )));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(BackendError::InvalidRequest("seeds must be distinct".into()));
        }
        if self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn request_id(&self) -> String {
        format!("{}:{}", self.prompt.post_id, self.prompt.category.code())
    }
}

/// Derive the K per-sample seeds for a (post, category) request from the
/// run's base seed. Distinct by construction; no wall-clock involvement.
pub fn derive_seeds(base: u64, post_id: &str, category: PromptCategory, k: usize) -> Vec<u64> {
    let offset = hash::stable_seed(&[
        &base.to_le_bytes(),
        post_id.as_bytes(),
        category.code().as_bytes(),
    ]);
    (0..k as u64).map(|i| offset.wrapping_add(i)).collect()
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("endpoint does not return token logprobs; refusing to start: {0}")]
    LogprobsUnsupported(String),
    #[error("endpoint unreachable during startup probe: {0}")]
    ProbeFailed(String),
    #[error("mock script {path}: {message}")]
    MockScript { path: String, message: String },
    #[error("journal {path}: {message}")]
    Journal { path: String, message: String },
    #[error("journal is missing {} sample(s): {}", missing.len(), format_keys(missing))]
    JournalGap { missing: Vec<String> },
    #[error("journal prompt hash mismatch for {key}: templates or config changed since the run")]
    JournalDrift { key: String },
}

fn format_keys(keys: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut joined = keys.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if keys.len() > SHOWN {
        joined.push_str(", ...");
    }
    joined
}

/// A source of sampled completions.
///
/// `sample` returns exactly K outcomes ordered by sample index; per-sample
/// failures are placeholders, never batch aborts.
pub trait GenerationBackend: Sync {
    fn model_name(&self) -> &str;

    /// Startup capability gate. Fails fast when the endpoint cannot return
    /// token logprobs, before any evaluation request is sent.
    fn probe(&self) -> Result<(), BackendError>;

    fn sample(&self, request: &GenerationRequest) -> Vec<SampleOutcome>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::clean_post;
    use crate::prompts::{render, BlockLibrary, PromptCategory};

    pub(crate) fn test_prompt(post_id: &str, category: PromptCategory) -> RenderedPrompt {
        let library = BlockLibrary::from_parts(
            "preamble",
            "content",
            "context",
            "phrasing",
            "options",
            "question?",
            Vec::new(),
        );
        render(category, &clean_post(post_id, "text"), &library, None).unwrap()
    }

    #[test]
    fn request_validation_catches_bad_seed_lists() {
        let prompt = test_prompt("p", PromptCategory::Roleplay);
        let mut request = GenerationRequest {
            prompt,
            samples_k: 3,
            seeds: vec![1, 2, 3],
            temperature: 1.0,
            max_tokens: 8,
            want_logprobs: true,
        };
        assert!(request.validate().is_ok());
        request.seeds = vec![1, 2];
        assert!(request.validate().is_err());
        request.seeds = vec![1, 2, 2];
        assert!(request.validate().is_err());
    }

    #[test]
    fn derived_seeds_are_distinct_stable_and_request_specific() {
        let a = derive_seeds(42, "p1", PromptCategory::Roleplay, 10);
        let b = derive_seeds(42, "p1", PromptCategory::Roleplay, 10);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert_ne!(a, derive_seeds(42, "p2", PromptCategory::Roleplay, 10));
        assert_ne!(a, derive_seeds(42, "p1", PromptCategory::Content, 10));
        assert_ne!(a, derive_seeds(43, "p1", PromptCategory::Roleplay, 10));
    }

    #[test]
    fn raw_text_is_token_concatenation() {
        let output = ModelOutput::from_tokens(
            "r",
            0,
            vec![
                TokenSample {
                    text: "anti".into(),
                    logprob: -0.3,
                },
                TokenSample {
                    text: "-sexist".into(),
                    logprob: -0.4,
                },
            ],
            "m",
        );
        assert_eq!(output.raw_text, "anti-sexist");
        assert!((output.sum_logprob() + 0.7).abs() < 1e-12);
    }
}
