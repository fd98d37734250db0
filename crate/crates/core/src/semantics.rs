//! Output normalization and semantic-equivalence clustering.
//!
//! Sampled completions are normalized, fast-path matched against the three
//! category phrases, and otherwise clustered by bidirectional entailment
//! against each phrase. Entailment is checked sample-to-category (three pairs,
//! two directions each), not all-pairs between samples, so groups are keyed
//! by category and at most three exist. Samples entailing no category fall
//! back to neither.

use crate::annotation::Label;
use crate::backend::ModelOutput;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use std::time::Duration;
use thiserror::Error;

/// A cleaned-up completion, still tied to its sample index so sequence
/// probabilities can be joined back on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedOutput {
    pub sample_index: usize,
    pub text: String,
}

/// A set of samples that share one category's meaning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticGroup {
    pub group_id: String,
    pub category: Label,
    /// Non-empty; sorted by sample index.
    pub members: Vec<NormalizedOutput>,
}

/// Result of clustering one sample pool.
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    /// Groups in label order; only categories with members appear.
    pub groups: Vec<SemanticGroup>,
    /// Entailment pairs that failed hard after retries and were treated as
    /// non-entailing.
    pub warnings: usize,
}

fn chat_remnant_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Special tokens like <|assistant|>, [INST]..[/INST], <s>, plus leading
    // role markers ("assistant:", "system :").
    RE.get_or_init(|| {
        Regex::new(r"(?i)<\|[^|>]*\|>|\[/?inst\]|</?s>|<pad>|\bim_(start|end)\b")
            .expect("static chat remnant regex")
    })
}

fn role_prefix_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^(assistant|system|user|answer|label|output|response)\s*:\s*")
            .expect("static role prefix regex")
    })
}

/// Lowercase, strip chat remnants and role markers, collapse whitespace.
/// Token logprobs on the original output are untouched.
pub fn normalize(output: &ModelOutput) -> NormalizedOutput {
    NormalizedOutput {
        sample_index: output.sample_index,
        text: normalize_text(&output.raw_text),
    }
}

pub fn normalize_text(raw: &str) -> String {
    let no_special = chat_remnant_regex().replace_all(raw, " ");
    let collapsed = no_special
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let mut text = collapsed;
    loop {
        let stripped = role_prefix_regex().replace(&text, "").into_owned();
        if stripped == text {
            break;
        }
        text = stripped;
    }
    text.trim().to_string()
}

fn strip_terminal_punct(text: &str) -> &str {
    text.trim_end_matches(['.', '!', '?', ',', ';', ':', '"', '\'', '\u{2019}', '\u{201d}'])
        .trim_end()
}

/// Fast path: the text equals a category phrase, up to terminal punctuation.
pub fn match_category(text: &str) -> Option<Label> {
    let stripped = strip_terminal_punct(text);
    Label::ALL
        .into_iter()
        .find(|label| stripped == label.phrase())
}

#[derive(Debug, Error)]
pub enum EntailmentError {
    #[error("entailment endpoint transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("entailment endpoint returned malformed response: {0}")]
    Malformed(String),
}

/// One direction's judgment from a provider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntailmentJudgment {
    pub entails: bool,
    /// Provider confidence in [0, 1].
    pub score: f64,
}

/// Both directions of [`entail_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEntailment {
    pub bidirectional: bool,
    /// Min of the two directional scores.
    pub confidence: f64,
}

/// Judges whether a premise entails a hypothesis. Implementations retry
/// transport failures internally; an `Err` is a hard failure.
pub trait EntailmentProvider {
    fn judge(&self, premise: &str, hypothesis: &str)
        -> Result<EntailmentJudgment, EntailmentError>;
    fn name(&self) -> &'static str;
}

/// True iff a entails b AND b entails a; both directions are queried.
pub fn entail_pair(
    a: &str,
    b: &str,
    provider: &dyn EntailmentProvider,
) -> Result<PairEntailment, EntailmentError> {
    let forward = provider.judge(a, b)?;
    let backward = provider.judge(b, a)?;
    Ok(PairEntailment {
        bidirectional: forward.entails && backward.entails,
        confidence: forward.score.min(backward.score),
    })
}

/// Offline test double: entailment is normalized equality up to terminal
/// punctuation.
#[derive(Debug, Default, Clone)]
pub struct ExactMatchProvider;

impl EntailmentProvider for ExactMatchProvider {
    fn judge(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentJudgment, EntailmentError> {
        let equal = strip_terminal_punct(&normalize_text(premise))
            == strip_terminal_punct(&normalize_text(hypothesis));
        Ok(EntailmentJudgment {
            entails: equal,
            score: if equal { 1.0 } else { 0.0 },
        })
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

#[derive(Debug, Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Debug, Deserialize)]
struct NliResponse {
    label: String,
    score: f64,
}

/// Client for a natural-language-inference endpoint:
/// `POST {premise, hypothesis}` returning
/// `{label: entailment|neutral|contradiction, score}`.
pub struct NliHttpProvider {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl NliHttpProvider {
    pub fn new(endpoint: &str, retries: u32) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build();
        NliHttpProvider {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent: config.new_agent(),
            retries,
            backoff: Duration::from_millis(200),
        }
    }

    #[cfg(test)]
    fn with_fast_backoff(mut self) -> Self {
        self.backoff = Duration::from_millis(1);
        self
    }
}

impl EntailmentProvider for NliHttpProvider {
    fn judge(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentJudgment, EntailmentError> {
        let body = NliRequest {
            premise,
            hypothesis,
        };
        let mut last_error = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let result = self
                .agent
                .post(&self.endpoint)
                .send_json(&body);
            match result {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if (500..600).contains(&status) || status == 429 {
                        last_error = format!("status {status}");
                        continue;
                    }
                    if status >= 400 {
                        return Err(EntailmentError::Malformed(format!("status {status}")));
                    }
                    let parsed: NliResponse = response
                        .body_mut()
                        .read_json()
                        .map_err(|e| EntailmentError::Malformed(e.to_string()))?;
                    return Ok(EntailmentJudgment {
                        entails: parsed.label.eq_ignore_ascii_case("entailment"),
                        score: parsed.score.clamp(0.0, 1.0),
                    });
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(EntailmentError::Transport {
            attempts: self.retries + 1,
            message: last_error,
        })
    }

    fn name(&self) -> &'static str {
        "nli"
    }
}

/// One recorded provider judgment, journaled so replays stay offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CachedJudgment {
    pub premise: String,
    pub hypothesis: String,
    pub entails: bool,
    pub score: f64,
}

/// Wraps a provider and records every judgment for the bundle's entailment
/// cache.
pub struct RecordingProvider<'a> {
    inner: &'a dyn EntailmentProvider,
    cache: std::cell::RefCell<std::collections::BTreeMap<(String, String), EntailmentJudgment>>,
}

impl<'a> RecordingProvider<'a> {
    pub fn new(inner: &'a dyn EntailmentProvider) -> RecordingProvider<'a> {
        RecordingProvider {
            inner,
            cache: std::cell::RefCell::new(std::collections::BTreeMap::new()),
        }
    }

    /// Recorded judgments sorted by (premise, hypothesis).
    pub fn recorded(&self) -> Vec<CachedJudgment> {
        self.cache
            .borrow()
            .iter()
            .map(|((premise, hypothesis), judgment)| CachedJudgment {
                premise: premise.clone(),
                hypothesis: hypothesis.clone(),
                entails: judgment.entails,
                score: judgment.score,
            })
            .collect()
    }
}

impl EntailmentProvider for RecordingProvider<'_> {
    fn judge(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentJudgment, EntailmentError> {
        let key = (premise.to_string(), hypothesis.to_string());
        if let Some(judgment) = self.cache.borrow().get(&key) {
            return Ok(*judgment);
        }
        let judgment = self.inner.judge(premise, hypothesis)?;
        self.cache.borrow_mut().insert(key, judgment);
        Ok(judgment)
    }

    fn name(&self) -> &'static str {
        self.inner.name()
    }
}

/// Serves judgments from a recorded cache; never touches the network.
pub struct CachedProvider {
    entries: std::collections::BTreeMap<(String, String), EntailmentJudgment>,
}

impl CachedProvider {
    pub fn new(judgments: Vec<CachedJudgment>) -> CachedProvider {
        CachedProvider {
            entries: judgments
                .into_iter()
                .map(|j| {
                    (
                        (j.premise, j.hypothesis),
                        EntailmentJudgment {
                            entails: j.entails,
                            score: j.score,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn contains(&self, premise: &str, hypothesis: &str) -> bool {
        self.entries
            .contains_key(&(premise.to_string(), hypothesis.to_string()))
    }
}

impl EntailmentProvider for CachedProvider {
    fn judge(
        &self,
        premise: &str,
        hypothesis: &str,
    ) -> Result<EntailmentJudgment, EntailmentError> {
        self.entries
            .get(&(premise.to_string(), hypothesis.to_string()))
            .copied()
            .ok_or_else(|| {
                EntailmentError::Malformed(format!(
                    "entailment cache has no judgment for ({premise:?}, {hypothesis:?})"
                ))
            })
    }

    fn name(&self) -> &'static str {
        "cached"
    }
}

/// Assign each sample to the category it bidirectionally entails.
///
/// Exact matches bypass the provider. A sample entailing several categories
/// goes to the one with the highest pair confidence (ties fall back to
/// neither). A hard provider failure on a pair is recorded as a warning and
/// treated as non-entailing. Samples entailing nothing land in neither.
pub fn cluster(
    samples: &[NormalizedOutput],
    provider: &dyn EntailmentProvider,
) -> ClusterOutcome {
    let mut assignments: Vec<(usize, Label)> = Vec::with_capacity(samples.len());
    let mut warnings = 0usize;
    for sample in samples {
        let label = match match_category(&sample.text) {
            Some(label) => label,
            None => {
                let mut best: Option<(Label, f64)> = None;
                let mut tie = false;
                for label in Label::ALL {
                    match entail_pair(&sample.text, label.phrase(), provider) {
                        Ok(pair) if pair.bidirectional => match best {
                            Some((_, score)) if pair.confidence > score => {
                                best = Some((label, pair.confidence));
                                tie = false;
                            }
                            Some((_, score)) if pair.confidence == score => tie = true,
                            None => best = Some((label, pair.confidence)),
                            _ => {}
                        },
                        Ok(_) => {}
                        Err(e) => {
                            warnings += 1;
                            log::warn!(
                                "entailment pair (sample {}, {}) failed, treated as non-entailing: {e}",
                                sample.sample_index,
                                label.phrase()
                            );
                        }
                    }
                }
                match best {
                    Some((label, _)) if !tie => label,
                    _ => Label::Neither,
                }
            }
        };
        assignments.push((sample.sample_index, label));
    }

    let mut groups = Vec::new();
    for label in Label::ALL {
        let mut members: Vec<NormalizedOutput> = samples
            .iter()
            .zip(&assignments)
            .filter(|(_, (_, assigned))| *assigned == label)
            .map(|(sample, _)| sample.clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by_key(|m| m.sample_index);
        groups.push(SemanticGroup {
            group_id: label.phrase().to_string(),
            category: label,
            members,
        });
    }
    ClusterOutcome { groups, warnings }
}
