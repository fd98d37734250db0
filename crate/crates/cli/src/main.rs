//! `cseval`: batch evaluation of three-way counter-speech classification.
//!
//! Subcommands mirror the pipeline stages: `ingest` cleans and ranks a raw
//! corpus, `annotate` resolves gold labels, `run` executes the full
//! evaluation against the configured backend, `replay` recomputes a bundle
//! from a recorded journal without network access, and `report` regenerates
//! the CSV tables of an existing bundle.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use cseval_core::prompts::PromptCategory;
use cseval_core::report::{self, BackendSettings, Overrides, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable holding the API key for remote backends. The key
/// never appears in config files or bundles.
const API_KEY_ENV: &str = "CSEVAL_API_KEY";

#[derive(Parser)]
#[command(name = "cseval", version, about = "Counter-speech classification evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, rank, and event-tag a raw post dump.
    Ingest(StageArgs),
    /// Resolve human annotations into gold labels by minority vote.
    Annotate(StageArgs),
    /// Run the full pipeline and write a report bundle.
    Run(RunArgs),
    /// Recompute a bundle from a recorded journal; no network calls.
    Replay(ReplayArgs),
    /// Regenerate the CSV tables of an existing bundle.
    Report(ReportArgs),
}

#[derive(Args)]
struct StageArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Bundle output directory.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Journal recorded by a previous run.
    #[arg(long)]
    journal: PathBuf,
    /// Bundle output directory.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Existing bundle directory.
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// Samples per (post, category).
    #[arg(long)]
    k: Option<usize>,
    /// Base seed for per-sample seed derivation.
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling temperature sent to the backend.
    #[arg(long)]
    temperature: Option<f64>,
    /// Completion length cap per sample.
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Comma-separated prompt categories (R,C,Z,F).
    #[arg(long, value_delimiter = ',')]
    categories: Option<Vec<String>>,
    /// Additive offset on the Monte-Carlo predictive entropy.
    #[arg(long)]
    pe_bias: Option<f64>,
    /// Minimum fraction of sample requests that must succeed for exit code 0.
    #[arg(long)]
    min_success_rate: Option<f64>,
    /// Character budget per prompt; exemplars truncate last-first to fit.
    #[arg(long)]
    max_prompt_chars: Option<usize>,
    /// Raw corpus file, overriding [paths].corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Annotations file, overriding [paths].annotations.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Events file, overriding [paths].events.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Template directory, overriding [paths].templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Chat-completions endpoint (openai backends only).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name to request and stamp into reports.
    #[arg(long)]
    model: Option<String>,
    /// Mock script path (mock backends only).
    #[arg(long)]
    mock_script: Option<PathBuf>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> anyhow::Result<Overrides> {
        let categories = match &self.categories {
            Some(raw) => Some(
                raw.iter()
                    .map(|c| c.parse::<PromptCategory>())
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        Ok(Overrides {
            k: self.k,
            seed: self.seed,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            categories,
            pe_bias: self.pe_bias,
            min_success_rate: self.min_success_rate,
            max_prompt_chars: self.max_prompt_chars,
            corpus: self.corpus.clone(),
            annotations: self.annotations.clone(),
            events: self.events.clone(),
            templates: self.templates.clone(),
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            mock_script: self.mock_script.clone(),
        })
    }
}

fn load_config(
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(config_path, out_dir, overrides)?;
    if matches!(config.backend, BackendSettings::OpenAi { .. }) {
        config.api_key = std::env::var(API_KEY_ENV).ok();
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Ingest(args) => {
            let overrides = args.overrides.to_overrides()?;
            let config = load_config(&args.config, &args.out_dir, &overrides)?;
            config.validate(true)?;
            let (kept, rejected) = report::ingest_stage(&config)?;
            println!(
                "ingest: {kept} clean post(s), {rejected} reject(s) -> {}",
                args.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Annotate(args) => {
            let overrides = args.overrides.to_overrides()?;
            let config = load_config(&args.config, &args.out_dir, &overrides)?;
            config.validate(true)?;
            let (gold, conflicts) = report::annotate_stage(&config)?;
            println!(
                "annotate: {gold} gold label(s), {conflicts} direct conflict warning(s) -> {}",
                args.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let overrides = args.overrides.to_overrides()?;
            let config = load_config(&args.config, &args.out_dir, &overrides)?;
            let outcome = report::run(&config).context("run failed")?;
            print_summary(&outcome);
            Ok(exit_for(&outcome))
        }
        Command::Replay(args) => {
            let overrides = args.overrides.to_overrides()?;
            let config = load_config(&args.config, &args.out_dir, &overrides)?;
            let outcome = report::replay(&config, &args.journal).context("replay failed")?;
            print_summary(&outcome);
            Ok(exit_for(&outcome))
        }
        Command::Report(args) => {
            let summary = report::regenerate_tables(&args.bundle)?;
            println!(
                "report: tables regenerated in {} (model {}, {} eval post(s))",
                args.bundle.display(),
                summary.model,
                summary.n_eval_posts,
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary(outcome: &report::RunOutcome) {
    let s = &outcome.summary;
    println!(
        "bundle: {} | model {} | {} eval post(s) x {} categorie(s) x K={} | success rate {:.4} (min {:.2}) | {}",
        outcome.bundle_dir.display(),
        s.model,
        s.n_eval_posts,
        s.categories.len(),
        s.k,
        s.success_rate,
        s.min_success_rate,
        if s.ok { "ok" } else { "BELOW THRESHOLD" },
    );
}

fn exit_for(outcome: &report::RunOutcome) -> ExitCode {
    if outcome.summary.ok {
        ExitCode::SUCCESS
    } else {
        // Pipeline completed but too many sample requests failed.
        ExitCode::from(2)
    }
}
