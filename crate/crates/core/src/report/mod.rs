//! Run orchestration: one call executes ingest, annotate, prompt, sample,
//! cluster, uncertainty, and metrics, then writes a versioned report bundle.
//!
//! Bundles are deterministic: every emitted number traces to journal entries
//! plus configuration, aggregation orders are fixed, and float formatting is
//! pinned. The journal file carries wall-clock timestamps and is referenced
//! from the bundle by a logical hash that excludes them; every other file is
//! byte-reproducible across runs of the same config, and a replay of a
//! recorded journal reproduces the bundle byte-for-byte.

mod config;
mod tables;

pub use config::{
    BackendSettings, ConfigError, ConfigSnapshot, EntailmentSettings, InputHashes, Overrides,
    RunConfig,
};

use crate::annotation::{self, GoldLabel};
use crate::backend::{
    derive_seeds, GenerationBackend, GenerationRequest, Journal, JournalEntry, JournalWriter,
    MockBackend, MockScript, ModelOutput, OpenAiBackend, ReplayBackend,
};
use crate::corpus::{
    self, filter_pipeline, rank_by_engagement, tag_events, CleanPost, RawPost, RejectReason,
    RejectRecord, StopwordDetector,
};
use crate::jsonl;
use crate::metrics;
use crate::prompts::{render, BlockLibrary, PromptCategory, RenderedPrompt};
use crate::semantics::{
    self, CachedJudgment, CachedProvider, EntailmentProvider, ExactMatchProvider, NliHttpProvider,
    RecordingProvider,
};
use crate::uncertainty::{
    self, group_distribution, predictive_entropy, sequence_logprob, CrossPromptPost,
    SequenceProbability, UncertaintyRecord,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;
use thiserror::Error;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const ENTAILMENT_CACHE_FILE: &str = "entailment_cache.jsonl";

/// Bundle members that must be byte-identical across runs of one config.
/// The journal is excluded: it carries wall-clock timestamps and is pinned
/// by its logical hash in the summary instead.
pub const DETERMINISTIC_BUNDLE_FILES: &[&str] = &[
    "clean_posts.jsonl",
    "rejects.jsonl",
    "gold.jsonl",
    "records.jsonl",
    "misclassified.jsonl",
    ENTAILMENT_CACHE_FILE,
    "performance.csv",
    "avg_perp.csv",
    "avg_pred_ent.csv",
    "divergent_score.csv",
    "monthly_proportions.csv",
    "ppl_boxplot.csv",
    "config_snapshot.json",
    "summary.json",
];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Annotation(#[from] annotation::AnnotationError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
    #[error(transparent)]
    Uncertainty(#[from] uncertainty::UncertaintyError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Jsonl(#[from] jsonl::JsonlError),
    #[error("entailment cache is missing {} pair(s); first: {}", .missing.len(), .missing.first().map(String::as_str).unwrap_or(""))]
    EntailmentCacheGap { missing: Vec<String> },
    #[error("io error at {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reference to the journal backing a bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalRef {
    pub file: String,
    pub entries: usize,
    /// Hash over key/request/response (timestamps excluded).
    pub logical_sha256: String,
}

/// A (post, category) pair that produced no usable record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub post_id: String,
    pub category: PromptCategory,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub categories: Vec<PromptCategory>,
    pub k: usize,
    pub n_raw: usize,
    pub n_malformed_lines: usize,
    pub n_rejected: usize,
    pub n_clean: usize,
    pub n_gold: usize,
    pub n_eval_posts: usize,
    pub n_gold_without_clean: usize,
    pub n_clean_without_gold: usize,
    pub direct_conflict_annotations: usize,
    pub entailment_warnings: usize,
    pub n_requests: usize,
    pub n_failed_samples: usize,
    pub success_rate: f64,
    pub min_success_rate: f64,
    pub skipped: Vec<SkippedRecord>,
    pub journal: JournalRef,
    pub ok: bool,
}

/// One misclassified example for qualitative review.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MisclassifiedRow {
    pub post_id: String,
    pub category: PromptCategory,
    pub gold: crate::annotation::Label,
    pub predicted: crate::annotation::Label,
    pub text: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub bundle_dir: PathBuf,
    pub summary: Summary,
}

enum Execution<'a> {
    Record { backend: Box<dyn GenerationBackend + 'a> },
    Replay { journal: &'a Journal },
}

/// Run the full pipeline against the configured backend and write a bundle.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    config.validate(false)?;
    let backend: Box<dyn GenerationBackend> = match &config.backend {
        BackendSettings::Mock { script, model } => {
            Box::new(MockBackend::new(MockScript::load(script)?, model))
        }
        BackendSettings::OpenAi {
            endpoint,
            model,
            in_flight,
            retries,
        } => Box::new(
            OpenAiBackend::new(endpoint, model, config.api_key.clone())
                .with_in_flight(*in_flight)
                .with_retries(*retries),
        ),
    };
    backend.probe()?;
    execute(config, Execution::Record { backend })
}

/// Recompute a bundle from a recorded journal. No network calls: generation
/// comes from the journal and entailment from the recorded cache.
pub fn replay(config: &RunConfig, journal_path: &Path) -> Result<RunOutcome, RunError> {
    config.validate(true)?;
    let journal = Journal::load(journal_path)?;
    execute(config, Execution::Replay { journal: &journal })
}

fn execute(config: &RunConfig, mode: Execution<'_>) -> Result<RunOutcome, RunError> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;

    // Stage 1: ingest.
    let (raw_posts, malformed): (Vec<RawPost>, _) = jsonl::read_lossy(&config.corpus)?;
    let n_raw = raw_posts.len();
    let detector = StopwordDetector;
    let filtered = filter_pipeline(raw_posts, &config.filter, &detector);
    let events = corpus::load_events(&config.events)?;
    let clean = tag_events(rank_by_engagement(filtered.kept), &events)?;
    let mut rejects: Vec<RejectRecord> = malformed
        .iter()
        .map(|(line, message)| RejectRecord {
            id: None,
            line: Some(*line),
            reason: RejectReason::Malformed,
            detail: Some(message.clone()),
        })
        .collect();
    rejects.extend(filtered.rejected);
    jsonl::write_all(&out.join("clean_posts.jsonl"), &clean)?;
    jsonl::write_all(&out.join("rejects.jsonl"), &rejects)?;

    // Stage 2: annotate.
    let resolved = annotation::resolve_file(&config.annotations)?;
    let gold = resolved.gold;
    jsonl::write_all(&out.join("gold.jsonl"), &gold)?;

    // Stage 3: the evaluation set is the annotated subset of the clean
    // corpus, in post-id order.
    let gold_by_id: BTreeMap<&str, &GoldLabel> =
        gold.iter().map(|g| (g.post_id.as_str(), g)).collect();
    let mut eval_posts: Vec<&CleanPost> = clean
        .iter()
        .filter(|p| gold_by_id.contains_key(p.id.as_str()))
        .collect();
    eval_posts.sort_by(|a, b| a.id.cmp(&b.id));
    let clean_ids: std::collections::BTreeSet<&str> =
        clean.iter().map(|p| p.id.as_str()).collect();
    let n_gold_without_clean = gold
        .iter()
        .filter(|g| !clean_ids.contains(g.post_id.as_str()))
        .count();
    let n_clean_without_gold = clean.len() - eval_posts.len();

    // Stage 4: prompts.
    let library = BlockLibrary::load(&config.templates)?;
    let categories = config.canonical_categories();
    let mut prompts: Vec<(&CleanPost, RenderedPrompt)> = Vec::new();
    for post in &eval_posts {
        for category in &categories {
            prompts.push((post, render(*category, post, &library, config.max_prompt_chars)?));
        }
    }

    // Stage 5: sampling (or replay).
    if let Execution::Replay { journal } = &mode {
        let expected: Vec<_> = prompts
            .iter()
            .flat_map(|(_, prompt)| {
                (0..config.k).map(|i| {
                    (
                        crate::backend::JournalKey {
                            post_id: prompt.post_id.clone(),
                            category: prompt.category,
                            sample_index: i,
                        },
                        prompt.sha256(),
                    )
                })
            })
            .collect();
        journal.validate_coverage(&expected)?;
    }

    let mut journal_writer = match &mode {
        Execution::Record { .. } => Some(JournalWriter::create(&out.join(JOURNAL_FILE))?),
        Execution::Replay { .. } => None,
    };
    let replay_backend;
    let (backend, is_replay): (&dyn GenerationBackend, bool) = match &mode {
        Execution::Record { backend } => (backend.as_ref(), false),
        Execution::Replay { journal } => {
            replay_backend = ReplayBackend::new(journal);
            (&replay_backend, true)
        }
    };
    let model = backend.model_name().to_string();

    let mut pools: Vec<(&CleanPost, PromptCategory, Vec<ModelOutput>, usize)> = Vec::new();
    let mut n_failed_samples = 0usize;
    for (post, prompt) in &prompts {
        let request = GenerationRequest {
            prompt: prompt.clone(),
            samples_k: config.k,
            seeds: derive_seeds(config.seed, &prompt.post_id, prompt.category, config.k),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            want_logprobs: true,
        };
        request.validate()?;
        let started = SystemTime::now();
        let outcomes = backend.sample(&request);
        let mut usable: Vec<ModelOutput> = Vec::with_capacity(config.k);
        let mut failed = 0usize;
        for (i, outcome) in outcomes.iter().enumerate() {
            if let Some(writer) = journal_writer.as_mut() {
                writer.append(&JournalEntry::from_outcome(
                    &request, &model, i, outcome, started,
                ))?;
            }
            match outcome {
                // Empty completions carry no probability mass; they are
                // excluded from the pool and counted with the failures.
                Ok(output) if !output.tokens.is_empty() => usable.push(output.clone()),
                Ok(_) | Err(_) => failed += 1,
            }
        }
        n_failed_samples += failed;
        pools.push((post, prompt.category, usable, failed));
    }
    if let Some(writer) = journal_writer.take() {
        writer.finish()?;
    }

    // Stage 6: clustering provider, offline in replay mode.
    let exact = ExactMatchProvider;
    let nli;
    let base_provider: &dyn EntailmentProvider = match &config.entailment {
        EntailmentSettings::Exact => &exact,
        EntailmentSettings::Nli { endpoint, retries } => {
            nli = NliHttpProvider::new(endpoint, *retries);
            &nli
        }
    };
    let cached;
    let provider: &dyn EntailmentProvider = if is_replay {
        match &config.entailment {
            EntailmentSettings::Exact => &exact,
            EntailmentSettings::Nli { .. } => {
                let cache_path = journal_cache_path(&mode, out);
                let judgments: Vec<CachedJudgment> = jsonl::read_all(&cache_path)?;
                cached = CachedProvider::new(judgments);
                validate_cache_coverage(&cached, &pools)?;
                &cached
            }
        }
    } else {
        base_provider
    };
    let recorder = RecordingProvider::new(provider);

    // Stage 7: per-(post, category) uncertainty records.
    let mut records: Vec<UncertaintyRecord> = Vec::new();
    let mut skipped: Vec<SkippedRecord> = Vec::new();
    let mut entailment_warnings = 0usize;
    for (post, category, usable, failed) in &pools {
        if usable.is_empty() {
            skipped.push(SkippedRecord {
                post_id: post.id.clone(),
                category: *category,
                reason: "no successful samples".into(),
            });
            continue;
        }
        let normalized: Vec<_> = usable.iter().map(semantics::normalize).collect();
        let clustered = semantics::cluster(&normalized, &recorder);
        entailment_warnings += clustered.warnings;
        let seq_probs: BTreeMap<usize, SequenceProbability> = usable
            .iter()
            .map(|o| sequence_logprob(o).map(|sp| (o.sample_index, sp)))
            .collect::<Result<_, _>>()?;
        let dist = match group_distribution(&clustered.groups, &seq_probs) {
            Ok(dist) => dist,
            Err(uncertainty::UncertaintyError::ZeroMass) => {
                skipped.push(SkippedRecord {
                    post_id: post.id.clone(),
                    category: *category,
                    reason: "all sequence probabilities underflowed to zero".into(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let pe = predictive_entropy(&dist, config.pe_bias);
        let mut ppl_per_sample = Vec::with_capacity(usable.len());
        for output in usable {
            ppl_per_sample.push(uncertainty::perplexity(output)?);
        }
        let ppl_mean = ppl_per_sample.iter().sum::<f64>() / ppl_per_sample.len() as f64;
        records.push(UncertaintyRecord {
            post_id: post.id.clone(),
            category: *category,
            predicted: uncertainty::predicted_label(&dist),
            pe_raw_exact: pe.exact,
            pe_raw_mc: pe.mc,
            pe_biased: pe.biased,
            ppl_mean,
            ppl_per_sample,
            conflict: dist.group_count > 1,
            group_masses: dist.normalized,
            mass_normalizer: dist.normalizer,
            samples_ok: usable.len(),
            samples_failed: *failed,
        });
    }
    records.sort_by(|a, b| {
        (&a.post_id, a.category.index()).cmp(&(&b.post_id, b.category.index()))
    });
    skipped.sort_by(|a, b| {
        (&a.post_id, a.category.index()).cmp(&(&b.post_id, b.category.index()))
    });
    jsonl::write_all(&out.join("records.jsonl"), &records)?;

    // Entailment cache: recorded fresh in run mode and for exact-provider
    // replays; copied verbatim for NLI replays.
    let cache_out = out.join(ENTAILMENT_CACHE_FILE);
    if is_replay && matches!(config.entailment, EntailmentSettings::Nli { .. }) {
        let source = journal_cache_path(&mode, out);
        if source != cache_out {
            fs::copy(&source, &cache_out).map_err(io_err(&cache_out))?;
        }
    } else {
        jsonl::write_all(&cache_out, &recorder.recorded())?;
    }

    // Stage 8: metrics and tables.
    let eval_gold: Vec<GoldLabel> = gold
        .iter()
        .filter(|g| clean_ids.contains(g.post_id.as_str()))
        .cloned()
        .collect();
    let score_table = metrics::score(&eval_gold, &records, &model)?;
    let monthly = metrics::monthly_proportions(&records, &eval_gold, &clean);
    let stratified = metrics::stratified_perplexity(&records, &eval_gold);
    let boxplot = metrics::perplexity_boxplot_data(&records, &eval_gold);
    let mut by_post: BTreeMap<&str, CrossPromptPost> = BTreeMap::new();
    for record in &records {
        let entry = by_post
            .entry(record.post_id.as_str())
            .or_insert_with(|| CrossPromptPost {
                post_id: record.post_id.clone(),
                dists: BTreeMap::new(),
                predicted: BTreeMap::new(),
            });
        entry.dists.insert(record.category, record.group_masses);
        entry.predicted.insert(record.category, record.predicted);
    }
    let cross_posts: Vec<CrossPromptPost> = by_post.into_values().collect();
    let divergence = uncertainty::impact_divergence(&cross_posts)?;

    let text_by_id: BTreeMap<&str, &str> = clean
        .iter()
        .map(|p| (p.id.as_str(), p.normalized_text.as_str()))
        .collect();
    let misclassified: Vec<MisclassifiedRow> = records
        .iter()
        .filter_map(|record| {
            let gold_label = gold_by_id.get(record.post_id.as_str())?;
            if gold_label.label == record.predicted {
                return None;
            }
            Some(MisclassifiedRow {
                post_id: record.post_id.clone(),
                category: record.category,
                gold: gold_label.label,
                predicted: record.predicted,
                text: text_by_id
                    .get(record.post_id.as_str())
                    .unwrap_or(&"")
                    .to_string(),
            })
        })
        .collect();
    jsonl::write_all(&out.join("misclassified.jsonl"), &misclassified)?;

    let perf_path = out.join("performance.csv");
    tables::write_performance(&perf_path, &score_table).map_err(io_err(&perf_path))?;
    let perp_path = out.join("avg_perp.csv");
    tables::write_avg_perp(&perp_path, &stratified).map_err(io_err(&perp_path))?;
    let ent_path = out.join("avg_pred_ent.csv");
    tables::write_avg_pred_ent(&ent_path, &records).map_err(io_err(&ent_path))?;
    let div_path = out.join("divergent_score.csv");
    tables::write_divergent_score(&div_path, &divergence).map_err(io_err(&div_path))?;
    let monthly_path = out.join("monthly_proportions.csv");
    tables::write_monthly_proportions(&monthly_path, &monthly).map_err(io_err(&monthly_path))?;
    let box_path = out.join("ppl_boxplot.csv");
    tables::write_ppl_boxplot(&box_path, &boxplot).map_err(io_err(&box_path))?;

    // Stage 9: journal reference and summary.
    let journal_ref = match &mode {
        Execution::Record { .. } => {
            let journal = Journal::load(&out.join(JOURNAL_FILE))?;
            JournalRef {
                file: JOURNAL_FILE.into(),
                entries: journal.len(),
                logical_sha256: journal.logical_sha256(),
            }
        }
        Execution::Replay { journal } => {
            let dest = out.join(JOURNAL_FILE);
            if journal.path() != dest {
                fs::copy(journal.path(), &dest).map_err(io_err(&dest))?;
            }
            JournalRef {
                file: JOURNAL_FILE.into(),
                entries: journal.len(),
                logical_sha256: journal.logical_sha256(),
            }
        }
    };

    let n_requests = prompts.len() * config.k;
    let success_rate = if n_requests == 0 {
        1.0
    } else {
        1.0 - n_failed_samples as f64 / n_requests as f64
    };
    let summary = Summary {
        model,
        categories: categories.clone(),
        k: config.k,
        n_raw,
        n_malformed_lines: malformed.len(),
        n_rejected: rejects.len(),
        n_clean: clean.len(),
        n_gold: gold.len(),
        n_eval_posts: eval_posts.len(),
        n_gold_without_clean,
        n_clean_without_gold,
        direct_conflict_annotations: resolved.direct_conflicts,
        entailment_warnings,
        n_requests,
        n_failed_samples,
        success_rate,
        min_success_rate: config.min_success_rate,
        skipped,
        journal: journal_ref,
        ok: success_rate >= config.min_success_rate,
    };
    let snapshot = ConfigSnapshot::build(config).map_err(io_err(&config.templates))?;
    write_json(&out.join("config_snapshot.json"), &snapshot)?;
    write_json(&out.join("summary.json"), &summary)?;

    Ok(RunOutcome {
        bundle_dir: out.clone(),
        summary,
    })
}

fn journal_cache_path(mode: &Execution<'_>, out: &Path) -> PathBuf {
    match mode {
        Execution::Replay { journal } => journal
            .path()
            .parent()
            .unwrap_or(out)
            .join(ENTAILMENT_CACHE_FILE),
        Execution::Record { .. } => out.join(ENTAILMENT_CACHE_FILE),
    }
}

/// Preflight for NLI replays: every non-fast-path sample must have both
/// directions of all three category pairs in the cache.
fn validate_cache_coverage(
    cache: &CachedProvider,
    pools: &[(&CleanPost, PromptCategory, Vec<ModelOutput>, usize)],
) -> Result<(), RunError> {
    let mut missing = Vec::new();
    for (_, _, usable, _) in pools {
        for output in usable {
            let normalized = semantics::normalize(output);
            if semantics::match_category(&normalized.text).is_some() {
                continue;
            }
            for label in crate::annotation::Label::ALL {
                for (premise, hypothesis) in [
                    (normalized.text.as_str(), label.phrase()),
                    (label.phrase(), normalized.text.as_str()),
                ] {
                    if !cache.contains(premise, hypothesis) {
                        missing.push(format!("({premise:?}, {hypothesis:?})"));
                    }
                }
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        missing.sort();
        missing.dedup();
        Err(RunError::EntailmentCacheGap { missing })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Recompute the CSV tables of an existing bundle from its per-post
/// JSON-lines. Used by the `report` subcommand.
pub fn regenerate_tables(bundle_dir: &Path) -> Result<Summary, RunError> {
    let summary_path = bundle_dir.join("summary.json");
    let summary: Summary = serde_json::from_str(
        &fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?,
    )
    .map_err(|e| RunError::Io {
        path: summary_path.display().to_string(),
        message: e.to_string(),
    })?;
    let clean: Vec<CleanPost> = jsonl::read_all(&bundle_dir.join("clean_posts.jsonl"))?;
    let gold: Vec<GoldLabel> = jsonl::read_all(&bundle_dir.join("gold.jsonl"))?;
    let records: Vec<UncertaintyRecord> = jsonl::read_all(&bundle_dir.join("records.jsonl"))?;

    let clean_ids: std::collections::BTreeSet<&str> =
        clean.iter().map(|p| p.id.as_str()).collect();
    let eval_gold: Vec<GoldLabel> = gold
        .iter()
        .filter(|g| clean_ids.contains(g.post_id.as_str()))
        .cloned()
        .collect();
    let score_table = metrics::score(&eval_gold, &records, &summary.model)?;
    let monthly = metrics::monthly_proportions(&records, &eval_gold, &clean);
    let stratified = metrics::stratified_perplexity(&records, &eval_gold);
    let boxplot = metrics::perplexity_boxplot_data(&records, &eval_gold);
    let mut by_post: BTreeMap<&str, CrossPromptPost> = BTreeMap::new();
    for record in &records {
        let entry = by_post
            .entry(record.post_id.as_str())
            .or_insert_with(|| CrossPromptPost {
                post_id: record.post_id.clone(),
                dists: BTreeMap::new(),
                predicted: BTreeMap::new(),
            });
        entry.dists.insert(record.category, record.group_masses);
        entry.predicted.insert(record.category, record.predicted);
    }
    let cross_posts: Vec<CrossPromptPost> = by_post.into_values().collect();
    let divergence = uncertainty::impact_divergence(&cross_posts)?;

    let perf_path = bundle_dir.join("performance.csv");
    tables::write_performance(&perf_path, &score_table).map_err(io_err(&perf_path))?;
    let perp_path = bundle_dir.join("avg_perp.csv");
    tables::write_avg_perp(&perp_path, &stratified).map_err(io_err(&perp_path))?;
    let ent_path = bundle_dir.join("avg_pred_ent.csv");
    tables::write_avg_pred_ent(&ent_path, &records).map_err(io_err(&ent_path))?;
    let div_path = bundle_dir.join("divergent_score.csv");
    tables::write_divergent_score(&div_path, &divergence).map_err(io_err(&div_path))?;
    let monthly_path = bundle_dir.join("monthly_proportions.csv");
    tables::write_monthly_proportions(&monthly_path, &monthly).map_err(io_err(&monthly_path))?;
    let box_path = bundle_dir.join("ppl_boxplot.csv");
    tables::write_ppl_boxplot(&box_path, &boxplot).map_err(io_err(&box_path))?;
    Ok(summary)
}

/// Stage entry point for the `ingest` subcommand: clean, rank, tag, and write
/// `clean_posts.jsonl` plus the reason-coded rejects sidecar.
pub fn ingest_stage(config: &RunConfig) -> Result<(usize, usize), RunError> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let (raw_posts, malformed): (Vec<RawPost>, _) = jsonl::read_lossy(&config.corpus)?;
    let detector = StopwordDetector;
    let filtered = filter_pipeline(raw_posts, &config.filter, &detector);
    let events = corpus::load_events(&config.events)?;
    let clean = tag_events(rank_by_engagement(filtered.kept), &events)?;
    let mut rejects: Vec<RejectRecord> = malformed
        .iter()
        .map(|(line, message)| RejectRecord {
            id: None,
            line: Some(*line),
            reason: RejectReason::Malformed,
            detail: Some(message.clone()),
        })
        .collect();
    rejects.extend(filtered.rejected);
    jsonl::write_all(&out.join("clean_posts.jsonl"), &clean)?;
    jsonl::write_all(&out.join("rejects.jsonl"), &rejects)?;
    Ok((clean.len(), rejects.len()))
}

/// Stage entry point for the `annotate` subcommand: resolve gold labels and
/// write `gold.jsonl`. Returns (gold count, direct-conflict count).
pub fn annotate_stage(config: &RunConfig) -> Result<(usize, usize), RunError> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let resolved = annotation::resolve_file(&config.annotations)?;
    jsonl::write_all(&out.join("gold.jsonl"), &resolved.gold)?;
    Ok((resolved.gold.len(), resolved.direct_conflicts))
}
