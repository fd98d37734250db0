//! Helpers shared by the integration test binaries.
#![allow(dead_code)] // each test binary uses its own subset

use cseval_core::report::{self, Overrides, RunConfig, DETERMINISTIC_BUNDLE_FILES, JOURNAL_FILE};
use std::path::{Path, PathBuf};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e")
}

pub fn read_bundle_file(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name} in {dir:?}: {e}"))
}

pub fn assert_bundles_equal(a: &Path, b: &Path, names: &[&str], context: &str) {
    for name in names {
        let left = read_bundle_file(a, name);
        let right = read_bundle_file(b, name);
        assert!(
            left == right,
            "{context}: {name} differs between {a:?} and {b:?}"
        );
    }
}

/// Run 5 posts x 2 categories against an OpenAI-compatible endpoint, then
/// replay the journal and require a byte-identical bundle. Returns the run's
/// success rate. Used by the gated live-endpoint check and by the always-on
/// stub-backed variant.
pub fn run_small_openai_eval(endpoint: &str, model: &str, api_key: Option<String>) -> f64 {
    let fixtures = fixture_dir();
    let scratch = tempfile::tempdir().unwrap();
    let config_text = format!(
        r#"
[paths]
corpus = "{corpus}"
annotations = "{annotations}"
events = "{events}"
templates = "{templates}"

[run]
k = 2
seed = 7
temperature = 0.0
max_tokens = 8
categories = ["R", "C"]

[backend]
kind = "openai"
endpoint = "{endpoint}"
model = "{model}"
retries = 2

[entailment]
provider = "exact"
"#,
        corpus = scratch.path().join("corpus5.jsonl").display(),
        annotations = scratch.path().join("annotations5.jsonl").display(),
        events = fixtures.join("events.toml").display(),
        templates = fixtures.join("templates").display(),
    );
    for (source, dest) in [
        ("corpus.jsonl", "corpus5.jsonl"),
        ("annotations.jsonl", "annotations5.jsonl"),
    ] {
        let text = std::fs::read_to_string(fixtures.join(source)).unwrap();
        let subset: Vec<&str> = text.lines().take(5).collect();
        std::fs::write(scratch.path().join(dest), subset.join("\n") + "\n").unwrap();
    }
    let config_path = scratch.path().join("live.toml");
    std::fs::write(&config_path, config_text).unwrap();

    let run_dir = scratch.path().join("run");
    let mut config = RunConfig::load(&config_path, &run_dir, &Overrides::default()).unwrap();
    config.api_key = api_key.clone();
    let outcome = report::run(&config).unwrap();
    assert_eq!(outcome.summary.n_eval_posts, 5);
    assert_eq!(outcome.summary.n_requests, 5 * 2 * 2);

    let replay_dir = scratch.path().join("replay");
    let mut replay_config =
        RunConfig::load(&config_path, &replay_dir, &Overrides::default()).unwrap();
    replay_config.api_key = api_key;
    let replayed = report::replay(&replay_config, &run_dir.join(JOURNAL_FILE)).unwrap();
    assert_eq!(
        outcome.summary.journal.logical_sha256,
        replayed.summary.journal.logical_sha256
    );
    let mut all_files: Vec<&str> = DETERMINISTIC_BUNDLE_FILES.to_vec();
    all_files.push(JOURNAL_FILE);
    assert_bundles_equal(&run_dir, &replay_dir, &all_files, "run vs replay");
    outcome.summary.success_rate
}
