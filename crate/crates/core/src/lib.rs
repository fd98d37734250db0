//! Batch evaluation harness for three-way counter-speech classification.
//!
//! Classifies short political texts into sexist / anti-sexist / neither via
//! prompted LLM calls at four instruction levels, then quantifies prediction
//! quality (macro-P/R/F1, accuracy, per-event proportions) and prediction
//! confidence (semantic-group predictive entropy, perplexity, cross-prompt
//! Jensen-Shannon divergence). Also ships the corpus-filtering and
//! minority-vote annotation machinery the evaluation rests on.
//!
//! Pipeline stages, each usable standalone:
//!
//! 1. [`corpus`]: ingest raw post dumps, clean, rank by engagement, tag
//!    trigger-event windows.
//! 2. [`annotation`]: resolve human labels into gold labels by minority vote.
//! 3. [`prompts`]: assemble the four prompt categories (R, C, Z, F) from an
//!    instruction-block library.
//! 4. [`backend`]: sample K completions with token logprobs from an
//!    OpenAI-compatible endpoint or a deterministic mock; journal everything.
//! 5. [`semantics`]: normalize completions and cluster them into semantic
//!    groups via bidirectional entailment.
//! 6. [`uncertainty`]: sequence probabilities, group distributions,
//!    predictive entropy, perplexity, Jensen-Shannon divergence.
//! 7. [`metrics`]: confusion-matrix scores and stratified aggregates.
//! 8. [`report`]: orchestration that runs or replays a full evaluation and
//!    emits a deterministic report bundle.

pub mod annotation;
pub mod backend;
pub mod corpus;
pub mod hash;
pub mod jsonl;
pub mod metrics;
pub mod prompts;
pub mod report;
pub mod semantics;
pub mod uncertainty;

pub use annotation::{AnnotationSet, GoldLabel, Label, Phase};
pub use backend::{GenerationBackend, GenerationRequest, ModelOutput, TokenSample};
pub use corpus::{CleanPost, RawPost, TriggerEvent};
pub use prompts::{PromptCategory, RenderedPrompt};
pub use semantics::{NormalizedOutput, SemanticGroup};
pub use uncertainty::{GroupDistribution, UncertaintyRecord};
