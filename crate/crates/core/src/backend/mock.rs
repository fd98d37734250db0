//! Deterministic offline backend scripted from a JSON file.

use super::{
    BackendError, GenerationBackend, GenerationRequest, ModelOutput, SampleOutcome, TokenSample,
};
use crate::prompts::PromptCategory;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// Logprob of the default "neither" token for unmapped requests: ln(0.9).
pub const DEFAULT_NEITHER_LOGPROB: f64 = -0.105360515657826_f64;

/// One scripted completion. Keys are optional; an entry matches a sample when
/// every key it sets matches, and the most specific entry (most keys set)
/// wins. `seed` matches the per-sample seed, `sample_index` the slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<PromptCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<usize>,
    pub tokens: Vec<TokenSample>,
    /// Simulate a failed sample instead of tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<String>,
}

impl MockEntry {
    fn specificity(&self) -> usize {
        [
            self.prompt_sha256.is_some(),
            self.post_id.is_some(),
            self.category.is_some(),
            self.seed.is_some(),
            self.sample_index.is_some(),
        ]
        .into_iter()
        .filter(|set| *set)
        .count()
    }

    fn matches(
        &self,
        prompt_sha256: &str,
        post_id: &str,
        category: PromptCategory,
        seed: u64,
        sample_index: usize,
    ) -> bool {
        self.prompt_sha256.as_deref().is_none_or(|h| h == prompt_sha256)
            && self.post_id.as_deref().is_none_or(|p| p == post_id)
            && self.category.is_none_or(|c| c == category)
            && self.seed.is_none_or(|s| s == seed)
            && self.sample_index.is_none_or(|i| i == sample_index)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub entries: Vec<MockEntry>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<MockScript, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::MockScript {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| BackendError::MockScript {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub struct MockBackend {
    script: MockScript,
    model_name: String,
}

impl MockBackend {
    pub fn new(script: MockScript, model_name: &str) -> MockBackend {
        MockBackend {
            script,
            model_name: model_name.to_string(),
        }
    }

    fn lookup(
        &self,
        prompt_sha256: &str,
        post_id: &str,
        category: PromptCategory,
        seed: u64,
        sample_index: usize,
    ) -> Option<&MockEntry> {
        self.script
            .entries
            .iter()
            .filter(|e| e.matches(prompt_sha256, post_id, category, seed, sample_index))
            .max_by_key(|e| e.specificity())
    }
}

impl GenerationBackend for MockBackend {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }

    fn sample(&self, request: &GenerationRequest) -> Vec<SampleOutcome> {
        let prompt_hash = request.prompt.sha256();
        let request_id = request.request_id();
        (0..request.samples_k)
            .map(|i| {
                let entry = self.lookup(
                    &prompt_hash,
                    &request.prompt.post_id,
                    request.prompt.category,
                    request.seeds[i],
                    i,
                );
                match entry {
                    Some(entry) => match &entry.fail {
                        Some(reason) => Err(super::SampleFailure {
                            sample_index: i,
                            reason: reason.clone(),
                        }),
                        None => Ok(ModelOutput::from_tokens(
                            &request_id,
                            i,
                            entry.tokens.clone(),
                            &self.model_name,
                        )),
                    },
                    // Scripted default for unmapped requests.
                    None => Ok(ModelOutput::from_tokens(
                        &request_id,
                        i,
                        vec![TokenSample {
                            text: "neither".into(),
                            logprob: DEFAULT_NEITHER_LOGPROB,
                        }],
                        &self.model_name,
                    )),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::test_prompt;
    use super::*;
    use crate::prompts::PromptCategory;

    fn request(post_id: &str, k: usize) -> GenerationRequest {
        GenerationRequest {
            prompt: test_prompt(post_id, PromptCategory::Roleplay),
            samples_k: k,
            seeds: (100..100 + k as u64).collect(),
            temperature: 1.0,
            max_tokens: 8,
            want_logprobs: true,
        }
    }

    fn entry(post_id: &str, sample_index: usize, tokens: &[(&str, f64)]) -> MockEntry {
        MockEntry {
            prompt_sha256: None,
            post_id: Some(post_id.into()),
            category: None,
            seed: None,
            sample_index: Some(sample_index),
            tokens: tokens
                .iter()
                .map(|(t, lp)| TokenSample {
                    text: t.to_string(),
                    logprob: *lp,
                })
                .collect(),
            fail: None,
        }
    }

    #[test]
    fn unmapped_requests_return_the_default_neither_token() {
        let backend = MockBackend::new(MockScript::default(), "mock");
        let outcomes = backend.sample(&request("p", 2));
        for outcome in &outcomes {
            let output = outcome.as_ref().unwrap();
            assert_eq!(output.raw_text, "neither");
            assert!((output.tokens[0].logprob - 0.9_f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn scripted_tokens_concatenate_into_raw_text() {
        let script = MockScript {
            entries: vec![entry("p", 0, &[("anti", -0.3), ("-sex", -0.2), ("ist", -0.1)])],
        };
        let backend = MockBackend::new(script, "mock");
        let outcomes = backend.sample(&request("p", 1));
        let output = outcomes[0].as_ref().unwrap();
        assert_eq!(output.raw_text, "anti-sexist");
        assert_eq!(output.tokens.len(), 3);
    }

    #[test]
    fn same_request_twice_is_byte_identical() {
        let script = MockScript {
            entries: vec![entry("p", 1, &[("sexist", -0.7)])],
        };
        let backend = MockBackend::new(script, "mock");
        let a = backend.sample(&request("p", 3));
        let b = backend.sample(&request("p", 3));
        assert_eq!(
            serde_json::to_string(&collect(a)).unwrap(),
            serde_json::to_string(&collect(b)).unwrap()
        );
    }

    fn collect(outcomes: Vec<SampleOutcome>) -> Vec<ModelOutput> {
        outcomes.into_iter().map(|o| o.unwrap()).collect()
    }

    #[test]
    fn most_specific_entry_wins_and_prompt_hash_keys_work() {
        let prompt = test_prompt("p", PromptCategory::Roleplay);
        let hash = prompt.sha256();
        let script = MockScript {
            entries: vec![
                entry("p", 0, &[("neither", -0.5)]),
                MockEntry {
                    prompt_sha256: Some(hash),
                    post_id: Some("p".into()),
                    category: Some(PromptCategory::Roleplay),
                    seed: Some(100),
                    sample_index: Some(0),
                    tokens: vec![TokenSample {
                        text: "sexist".into(),
                        logprob: -0.1,
                    }],
                    fail: None,
                },
            ],
        };
        let backend = MockBackend::new(script, "mock");
        let outcomes = backend.sample(&request("p", 1));
        assert_eq!(outcomes[0].as_ref().unwrap().raw_text, "sexist");
    }

    #[test]
    fn scripted_failures_surface_as_placeholders() {
        let script = MockScript {
            entries: vec![MockEntry {
                prompt_sha256: None,
                post_id: Some("p".into()),
                category: None,
                seed: None,
                sample_index: Some(0),
                tokens: Vec::new(),
                fail: Some("simulated outage".into()),
            }],
        };
        let backend = MockBackend::new(script, "mock");
        let outcomes = backend.sample(&request("p", 2));
        assert!(outcomes[0].is_err());
        assert!(outcomes[1].is_ok());
    }
}
