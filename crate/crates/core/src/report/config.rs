//! Run configuration: TOML file, CLI overrides, validation, snapshotting.

use crate::corpus::FilterConfig;
use crate::hash;
use crate::prompts::PromptCategory;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Fully resolved configuration for one evaluation run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub annotations: PathBuf,
    pub events: PathBuf,
    pub templates: PathBuf,
    pub backend: BackendSettings,
    pub entailment: EntailmentSettings,
    /// Samples per (post, category).
    pub k: usize,
    /// Base seed; per-sample seeds derive from it, the post id, and the
    /// category. No wall-clock seeding anywhere.
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub categories: Vec<PromptCategory>,
    /// Additive offset applied to the Monte-Carlo entropy.
    pub pe_bias: f64,
    /// Exit code is zero only when at least this fraction of sample requests
    /// succeeded.
    pub min_success_rate: f64,
    pub max_prompt_chars: Option<usize>,
    pub filter: FilterConfig,
    /// Where the bundle lands. Not part of the config snapshot, so bundles
    /// are location-independent.
    pub output_dir: PathBuf,
    /// API key for remote backends, injected from the environment by the
    /// caller. Never serialized.
    pub api_key: Option<String>,
}

#[derive(Debug, Clone)]
pub enum BackendSettings {
    Mock {
        script: PathBuf,
        model: String,
    },
    OpenAi {
        endpoint: String,
        model: String,
        in_flight: usize,
        retries: u32,
    },
}

impl BackendSettings {
    pub fn model_name(&self) -> &str {
        match self {
            BackendSettings::Mock { model, .. } => model,
            BackendSettings::OpenAi { model, .. } => model,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendSettings::Mock { .. } => "mock",
            BackendSettings::OpenAi { .. } => "openai",
        }
    }
}

#[derive(Debug, Clone)]
pub enum EntailmentSettings {
    Exact,
    Nli { endpoint: String, retries: u32 },
}

impl EntailmentSettings {
    pub fn name(&self) -> &'static str {
        match self {
            EntailmentSettings::Exact => "exact",
            EntailmentSettings::Nli { .. } => "nli",
        }
    }
}

// --- TOML file shape ---

#[derive(Debug, Deserialize)]
struct ConfigFile {
    paths: PathsSection,
    #[serde(default)]
    run: RunSection,
    backend: BackendSection,
    #[serde(default)]
    entailment: EntailmentSection,
    #[serde(default)]
    filter: FilterSection,
}

#[derive(Debug, Deserialize)]
struct PathsSection {
    corpus: PathBuf,
    annotations: PathBuf,
    events: PathBuf,
    templates: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct RunSection {
    k: usize,
    seed: u64,
    temperature: f64,
    max_tokens: u32,
    categories: Vec<String>,
    pe_bias: f64,
    min_success_rate: f64,
    max_prompt_chars: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            k: 10,
            seed: 42,
            temperature: 1.0,
            max_tokens: 16,
            categories: vec!["R".into(), "C".into(), "Z".into(), "F".into()],
            pe_bias: 5.0,
            min_success_rate: 0.95,
            max_prompt_chars: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct BackendSection {
    kind: String,
    model: Option<String>,
    mock_script: Option<PathBuf>,
    endpoint: Option<String>,
    #[serde(default = "default_in_flight")]
    in_flight: usize,
    #[serde(default = "default_retries")]
    retries: u32,
}

fn default_in_flight() -> usize {
    4
}

fn default_retries() -> u32 {
    3
}

#[derive(Debug, Deserialize, Default)]
struct EntailmentSection {
    provider: Option<String>,
    endpoint: Option<String>,
    #[serde(default = "default_retries")]
    retries: u32,
}

#[derive(Debug, Deserialize, Default)]
struct FilterSection {
    institutional_keywords: Option<Vec<String>>,
    language_whitelist: Option<Vec<String>>,
    lang_confidence_threshold: Option<f64>,
}

/// CLI overrides; every field is optional and wins over the file value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub categories: Option<Vec<PromptCategory>>,
    pub pe_bias: Option<f64>,
    pub min_success_rate: Option<f64>,
    pub max_prompt_chars: Option<usize>,
    pub corpus: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    /// Switches an openai backend to a different endpoint.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub mock_script: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a TOML config file. Relative paths resolve against the file's
    /// directory. `output_dir` comes from the caller.
    pub fn load(
        path: &Path,
        output_dir: &Path,
        overrides: &Overrides,
    ) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| {
            ConfigError::new(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        let parsed: ConfigFile = toml::from_str(&text).map_err(|e| {
            ConfigError::new(vec![format!("config {}: {e}", path.display())])
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| -> PathBuf {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };

        let mut errors = Vec::new();
        let backend = match parsed.backend.kind.as_str() {
            "mock" => BackendSettings::Mock {
                script: parsed
                    .backend
                    .mock_script
                    .as_ref()
                    .map(&resolve)
                    .unwrap_or_else(|| {
                        errors.push("backend.kind = \"mock\" requires backend.mock_script".into());
                        PathBuf::new()
                    }),
                model: parsed.backend.model.clone().unwrap_or_else(|| "mock".into()),
            },
            "openai" => BackendSettings::OpenAi {
                endpoint: parsed.backend.endpoint.clone().unwrap_or_else(|| {
                    errors.push("backend.kind = \"openai\" requires backend.endpoint".into());
                    String::new()
                }),
                model: parsed.backend.model.clone().unwrap_or_else(|| {
                    errors.push("backend.kind = \"openai\" requires backend.model".into());
                    String::new()
                }),
                in_flight: parsed.backend.in_flight,
                retries: parsed.backend.retries,
            },
            other => {
                errors.push(format!(
                    "backend.kind must be \"mock\" or \"openai\", got {other:?}"
                ));
                BackendSettings::Mock {
                    script: PathBuf::new(),
                    model: "mock".into(),
                }
            }
        };
        let entailment = match parsed.entailment.provider.as_deref().unwrap_or("exact") {
            "exact" => EntailmentSettings::Exact,
            "nli" => EntailmentSettings::Nli {
                endpoint: parsed.entailment.endpoint.clone().unwrap_or_else(|| {
                    errors.push("entailment.provider = \"nli\" requires entailment.endpoint".into());
                    String::new()
                }),
                retries: parsed.entailment.retries,
            },
            other => {
                errors.push(format!(
                    "entailment.provider must be \"exact\" or \"nli\", got {other:?}"
                ));
                EntailmentSettings::Exact
            }
        };
        let mut categories = Vec::new();
        for raw in &parsed.run.categories {
            match raw.parse::<PromptCategory>() {
                Ok(category) => categories.push(category),
                Err(e) => errors.push(e.to_string()),
            }
        }
        if !errors.is_empty() {
            return Err(ConfigError::new(errors));
        }

        let defaults = FilterConfig::default();
        let mut config = RunConfig {
            corpus: resolve(&parsed.paths.corpus),
            annotations: resolve(&parsed.paths.annotations),
            events: resolve(&parsed.paths.events),
            templates: resolve(&parsed.paths.templates),
            backend,
            entailment,
            k: parsed.run.k,
            seed: parsed.run.seed,
            temperature: parsed.run.temperature,
            max_tokens: parsed.run.max_tokens,
            categories,
            pe_bias: parsed.run.pe_bias,
            min_success_rate: parsed.run.min_success_rate,
            max_prompt_chars: parsed.run.max_prompt_chars,
            filter: FilterConfig {
                institutional_keywords: parsed
                    .filter
                    .institutional_keywords
                    .unwrap_or(defaults.institutional_keywords),
                language_whitelist: parsed
                    .filter
                    .language_whitelist
                    .unwrap_or(defaults.language_whitelist),
                lang_confidence_threshold: parsed
                    .filter
                    .lang_confidence_threshold
                    .unwrap_or(defaults.lang_confidence_threshold),
            },
            output_dir: output_dir.to_path_buf(),
            api_key: None,
        };
        config.apply(overrides);
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(k) = overrides.k {
            self.k = k;
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(t) = overrides.temperature {
            self.temperature = t;
        }
        if let Some(m) = overrides.max_tokens {
            self.max_tokens = m;
        }
        if let Some(categories) = &overrides.categories {
            self.categories = categories.clone();
        }
        if let Some(b) = overrides.pe_bias {
            self.pe_bias = b;
        }
        if let Some(r) = overrides.min_success_rate {
            self.min_success_rate = r;
        }
        if let Some(c) = overrides.max_prompt_chars {
            self.max_prompt_chars = Some(c);
        }
        if let Some(path) = &overrides.corpus {
            self.corpus = path.clone();
        }
        if let Some(path) = &overrides.annotations {
            self.annotations = path.clone();
        }
        if let Some(path) = &overrides.events {
            self.events = path.clone();
        }
        if let Some(path) = &overrides.templates {
            self.templates = path.clone();
        }
        if let Some(model) = &overrides.model {
            match &mut self.backend {
                BackendSettings::Mock { model: m, .. } => *m = model.clone(),
                BackendSettings::OpenAi { model: m, .. } => *m = model.clone(),
            }
        }
        if let Some(endpoint) = &overrides.endpoint {
            if let BackendSettings::OpenAi { endpoint: e, .. } = &mut self.backend {
                *e = endpoint.clone();
            }
        }
        if let Some(script) = &overrides.mock_script {
            if let BackendSettings::Mock { script: s, .. } = &mut self.backend {
                *s = script.clone();
            }
        }
    }

    /// Enumerate every validation problem before any network call. In replay
    /// mode the mock script is not required to exist.
    pub fn validate(&self, replay: bool) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut need_file = |label: &str, path: &Path| {
            if !path.is_file() {
                errors.push(format!("{label} not found: {}", path.display()));
            }
        };
        need_file("corpus file", &self.corpus);
        need_file("annotations file", &self.annotations);
        need_file("events file", &self.events);
        if !self.templates.is_dir() {
            errors.push(format!(
                "template directory not found: {}",
                self.templates.display()
            ));
        }
        if let BackendSettings::Mock { script, .. } = &self.backend {
            if !replay && !script.is_file() {
                errors.push(format!("mock script not found: {}", script.display()));
            }
        }
        if self.k == 0 {
            errors.push("run.k must be >= 1".into());
        }
        if self.categories.is_empty() {
            errors.push("run.categories must not be empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for category in &self.categories {
            if !seen.insert(category.index()) {
                errors.push(format!("duplicate category {category} in run.categories"));
            }
        }
        if self.temperature < 0.0 {
            errors.push("run.temperature must be >= 0".into());
        }
        if !(self.min_success_rate > 0.0 && self.min_success_rate <= 1.0) {
            errors.push("run.min_success_rate must be in (0, 1]".into());
        }
        if !self.pe_bias.is_finite() {
            errors.push("run.pe_bias must be finite".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::new(errors))
        }
    }

    /// Categories in canonical R, C, Z, F order regardless of config order.
    pub fn canonical_categories(&self) -> Vec<PromptCategory> {
        let mut categories = self.categories.clone();
        categories.sort_by_key(|c| c.index());
        categories
    }
}

#[derive(Debug, thiserror::Error)]
#[error("configuration invalid:\n{}", .errors.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl ConfigError {
    pub fn new(errors: Vec<String>) -> ConfigError {
        ConfigError { errors }
    }
}

/// Input hashes stamped into the bundle so it is self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHashes {
    pub corpus_sha256: String,
    pub annotations_sha256: String,
    pub events_sha256: String,
    pub templates_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script_sha256: Option<String>,
}

/// Everything a reader needs to interpret the numbers. Excludes the output
/// directory and the API key, so two runs of the same config produce
/// byte-identical snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub model: String,
    pub backend_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub entailment_provider: String,
    pub k: usize,
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub categories: Vec<PromptCategory>,
    pub pe_bias: f64,
    pub min_success_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompt_chars: Option<usize>,
    pub filter: FilterConfig,
    pub hashes: InputHashes,
    /// Conventions stamped for readers of the tables.
    pub tie_break: String,
    pub macro_f1: String,
    pub entropy_units: String,
    /// "PE" in reports is the Monte-Carlo form; the exact form rides along.
    pub pe_column_form: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn fixture_config() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e/config.toml")
    }

    #[test]
    fn loads_the_fixture_config_with_resolved_paths() {
        let out = tempfile::tempdir().unwrap();
        let config =
            RunConfig::load(&fixture_config(), out.path(), &Overrides::default()).unwrap();
        assert_eq!(config.k, 5);
        assert_eq!(config.seed, 42);
        assert_eq!(config.categories.len(), 4);
        assert!(config.corpus.is_absolute() || config.corpus.starts_with(".."));
        assert!(config.corpus.ends_with("corpus.jsonl"));
        assert_eq!(config.backend.model_name(), "mock-7b");
        assert!(matches!(config.entailment, EntailmentSettings::Exact));
        assert!(config.validate(false).is_ok());
    }

    #[test]
    fn overrides_win_over_file_values() {
        let out = tempfile::tempdir().unwrap();
        let overrides = Overrides {
            k: Some(3),
            categories: Some(vec![PromptCategory::FewShotLinguistic]),
            model: Some("other".into()),
            corpus: Some(PathBuf::from("/nonexistent/override.jsonl")),
            ..Overrides::default()
        };
        let config = RunConfig::load(&fixture_config(), out.path(), &overrides).unwrap();
        assert_eq!(config.k, 3);
        assert_eq!(config.categories, vec![PromptCategory::FewShotLinguistic]);
        assert_eq!(config.backend.model_name(), "other");
        assert_eq!(config.corpus, PathBuf::from("/nonexistent/override.jsonl"));
        // The overridden corpus path does not exist, so validation names it.
        let err = config.validate(false).unwrap_err();
        assert!(err.to_string().contains("corpus file not found"));
    }

    #[test]
    fn validation_collects_every_problem_at_once() {
        let out = tempfile::tempdir().unwrap();
        let overrides = Overrides {
            k: Some(0),
            min_success_rate: Some(0.0),
            temperature: Some(-1.0),
            corpus: Some(PathBuf::from("/missing.jsonl")),
            ..Overrides::default()
        };
        let config = RunConfig::load(&fixture_config(), out.path(), &overrides).unwrap();
        let err = config.validate(false).unwrap_err();
        assert!(err.errors.len() >= 4, "{:?}", err.errors);
    }

    #[test]
    fn canonical_categories_sort_into_rczf_order() {
        let out = tempfile::tempdir().unwrap();
        let overrides = Overrides {
            categories: Some(vec![
                PromptCategory::FewShotLinguistic,
                PromptCategory::Roleplay,
                PromptCategory::ZeroShotLinguistic,
            ]),
            ..Overrides::default()
        };
        let config = RunConfig::load(&fixture_config(), out.path(), &overrides).unwrap();
        assert_eq!(
            config.canonical_categories(),
            vec![
                PromptCategory::Roleplay,
                PromptCategory::ZeroShotLinguistic,
                PromptCategory::FewShotLinguistic,
            ]
        );
    }

    #[test]
    fn unknown_backend_kind_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(
            &path,
            "[paths]\ncorpus = \"c\"\nannotations = \"a\"\nevents = \"e\"\ntemplates = \"t\"\n[backend]\nkind = \"quantum\"\n",
        )
        .unwrap();
        let err = RunConfig::load(&path, dir.path(), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("quantum"));
    }
}

impl ConfigSnapshot {
    pub fn build(config: &RunConfig) -> std::io::Result<ConfigSnapshot> {
        let mock_script_sha256 = match &config.backend {
            BackendSettings::Mock { script, .. } if script.is_file() => {
                Some(hash::sha256_file(script)?)
            }
            _ => None,
        };
        Ok(ConfigSnapshot {
            model: config.backend.model_name().to_string(),
            backend_kind: config.backend.kind().to_string(),
            endpoint: match &config.backend {
                BackendSettings::OpenAi { endpoint, .. } => Some(endpoint.clone()),
                BackendSettings::Mock { .. } => None,
            },
            entailment_provider: config.entailment.name().to_string(),
            k: config.k,
            seed: config.seed,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            categories: config.canonical_categories(),
            pe_bias: config.pe_bias,
            min_success_rate: config.min_success_rate,
            max_prompt_chars: config.max_prompt_chars,
            filter: config.filter.clone(),
            hashes: InputHashes {
                corpus_sha256: hash::sha256_file(&config.corpus)?,
                annotations_sha256: hash::sha256_file(&config.annotations)?,
                events_sha256: hash::sha256_file(&config.events)?,
                templates_sha256: hash::sha256_dir(&config.templates)?,
                mock_script_sha256,
            },
            tie_break: "sexist > neither > anti-sexist".into(),
            macro_f1: "mean of per-class F1".into(),
            entropy_units: "nats".into(),
            pe_column_form: "monte_carlo".into(),
        })
    }
}
