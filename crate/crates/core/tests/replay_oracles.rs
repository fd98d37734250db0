//! Replay-path oracles: pre-normalization group masses recomputed by brute
//! force from the journal, the pe-bias column-diff check, and journal gap
//! detection.

mod common;

use common::{assert_bundles_equal, fixture_dir};
use cseval_core::annotation::Label;
use cseval_core::backend::{Journal, JournalKey, JournalResponse};
use cseval_core::prompts::PromptCategory;
use cseval_core::report::{self, Overrides, RunConfig, JOURNAL_FILE};
use cseval_core::semantics::{match_category, normalize_text};
use cseval_core::uncertainty::UncertaintyRecord;
use std::path::Path;

fn run_fixture(out: &Path, overrides: &Overrides) -> report::RunOutcome {
    let config_path = fixture_dir().join("config.toml");
    let config = RunConfig::load(&config_path, out, overrides).unwrap();
    report::run(&config).unwrap()
}

#[test]
fn group_masses_match_brute_force_sums_over_the_journal() {
    let scratch = tempfile::tempdir().unwrap();
    run_fixture(scratch.path(), &Overrides::default());
    let journal = Journal::load(&scratch.path().join(JOURNAL_FILE)).unwrap();
    let records: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&scratch.path().join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 48);

    for record in &records {
        // Placeholders are excluded from the pool but counted separately,
        // so the partition always accounts for all K samples.
        assert_eq!(record.samples_ok + record.samples_failed, 5);
    }

    for record in &records {
        // Brute force: walk the journal entries for this (post, category),
        // label each completion via the category matcher with neither
        // fallback (the exact provider's semantics), and sum raw sequence
        // probabilities per label.
        let mut sums = [0.0f64; 3];
        for sample_index in 0..5 {
            let entry = journal
                .get(&JournalKey {
                    post_id: record.post_id.clone(),
                    category: record.category,
                    sample_index,
                })
                .expect("journal covers every sample");
            let JournalResponse::Tokens { tokens } = &entry.response else {
                continue;
            };
            if tokens.is_empty() {
                continue;
            }
            let text: String = tokens.iter().map(|t| t.text.as_str()).collect();
            let label = match_category(&normalize_text(&text)).unwrap_or(Label::Neither);
            let log_p: f64 = tokens.iter().map(|t| t.logprob).sum();
            sums[label.index()] += log_p.exp();
        }
        for label in Label::ALL {
            let recovered = record.group_masses[label.index()] * record.mass_normalizer;
            assert!(
                (recovered - sums[label.index()]).abs() < 1e-12,
                "{} {} {}: {} vs {}",
                record.post_id,
                record.category,
                label,
                recovered,
                sums[label.index()]
            );
        }
    }
}

#[test]
fn replay_with_changed_pe_bias_touches_only_pe_columns() {
    let scratch = tempfile::tempdir().unwrap();
    let run_dir = scratch.path().join("run");
    let replay_dir = scratch.path().join("replay");
    run_fixture(&run_dir, &Overrides::default());

    let config_path = fixture_dir().join("config.toml");
    let replay_config = RunConfig::load(
        &config_path,
        &replay_dir,
        &Overrides {
            pe_bias: Some(7.0),
            ..Overrides::default()
        },
    )
    .unwrap();
    report::replay(&replay_config, &run_dir.join(JOURNAL_FILE)).unwrap();

    // Everything not derived from the bias constant is unchanged.
    assert_bundles_equal(
        &run_dir,
        &replay_dir,
        &[
            "clean_posts.jsonl",
            "rejects.jsonl",
            "gold.jsonl",
            "misclassified.jsonl",
            "entailment_cache.jsonl",
            "performance.csv",
            "avg_perp.csv",
            "divergent_score.csv",
            "monthly_proportions.csv",
            "ppl_boxplot.csv",
            "summary.json",
            JOURNAL_FILE,
        ],
        "pe-bias replay",
    );

    // records.jsonl: only pe_biased moves, by exactly the offset delta.
    let base: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&run_dir.join("records.jsonl")).unwrap();
    let biased: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&replay_dir.join("records.jsonl")).unwrap();
    assert_eq!(base.len(), biased.len());
    for (a, b) in base.iter().zip(&biased) {
        assert_eq!(a.post_id, b.post_id);
        assert_eq!(a.category, b.category);
        assert_eq!(a.predicted, b.predicted);
        assert_eq!(a.pe_raw_exact, b.pe_raw_exact);
        assert_eq!(a.pe_raw_mc, b.pe_raw_mc);
        assert!((b.pe_biased - a.pe_biased - 2.0).abs() < 1e-12);
        assert_eq!(a.ppl_per_sample, b.ppl_per_sample);
        assert_eq!(a.conflict, b.conflict);
        assert_eq!(a.group_masses, b.group_masses);
    }

    // avg_pred_ent.csv: pe_biased rows differ, the raw forms do not.
    let read_rows = |dir: &Path| -> Vec<Vec<String>> {
        let mut reader = csv::Reader::from_path(dir.join("avg_pred_ent.csv")).unwrap();
        reader
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect()
    };
    for (a, b) in read_rows(&run_dir).iter().zip(read_rows(&replay_dir).iter()) {
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        if a[1] == "pe_biased" {
            for (x, y) in a[2..].iter().zip(&b[2..]) {
                if !x.is_empty() {
                    let delta = y.parse::<f64>().unwrap() - x.parse::<f64>().unwrap();
                    assert!((delta - 2.0).abs() < 1e-3, "{a:?} vs {b:?}");
                }
            }
        } else {
            assert_eq!(a, b, "raw entropy rows must not move");
        }
    }
}

#[test]
fn journal_gaps_are_reported_with_their_keys() {
    let scratch = tempfile::tempdir().unwrap();
    let run_dir = scratch.path().join("run");
    run_fixture(&run_dir, &Overrides::default());

    // Truncate the journal by one line.
    let journal_path = run_dir.join(JOURNAL_FILE);
    let text = std::fs::read_to_string(&journal_path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let dropped = lines.pop().unwrap();
    let dropped_key: serde_json::Value = serde_json::from_str(dropped).unwrap();
    let truncated = scratch.path().join("truncated.jsonl");
    std::fs::write(&truncated, lines.join("\n") + "\n").unwrap();

    let config_path = fixture_dir().join("config.toml");
    let replay_config = RunConfig::load(
        &config_path,
        &scratch.path().join("replay"),
        &Overrides::default(),
    )
    .unwrap();
    let err = report::replay(&replay_config, &truncated).unwrap_err();
    let message = err.to_string();
    let post_id = dropped_key["key"]["post_id"].as_str().unwrap();
    assert!(
        message.contains("missing 1 sample(s)") && message.contains(post_id),
        "error should name the missing key: {message}"
    );
}

#[test]
fn replay_can_use_a_superset_journal() {
    // A journal recorded over all four categories replays fine when the
    // replay config asks for a subset.
    let scratch = tempfile::tempdir().unwrap();
    let run_dir = scratch.path().join("run");
    run_fixture(&run_dir, &Overrides::default());
    let replay_config = RunConfig::load(
        &fixture_dir().join("config.toml"),
        &scratch.path().join("replay"),
        &Overrides {
            categories: Some(vec![PromptCategory::Roleplay]),
            ..Overrides::default()
        },
    )
    .unwrap();
    let outcome = report::replay(&replay_config, &run_dir.join(JOURNAL_FILE)).unwrap();
    assert_eq!(outcome.summary.n_requests, 12 * 5);
    let records: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&scratch.path().join("replay").join("records.jsonl"))
            .unwrap();
    assert_eq!(records.len(), 12);
    assert!(records.iter().all(|r| r.category == PromptCategory::Roleplay));
}

#[test]
fn replay_twice_is_byte_identical() {
    let scratch = tempfile::tempdir().unwrap();
    let run_dir = scratch.path().join("run");
    run_fixture(&run_dir, &Overrides::default());
    let config_path = fixture_dir().join("config.toml");
    let journal = run_dir.join(JOURNAL_FILE);
    for name in ["replay1", "replay2"] {
        let config =
            RunConfig::load(&config_path, &scratch.path().join(name), &Overrides::default())
                .unwrap();
        report::replay(&config, &journal).unwrap();
    }
    let mut all: Vec<&str> = report::DETERMINISTIC_BUNDLE_FILES.to_vec();
    all.push(JOURNAL_FILE);
    assert_bundles_equal(
        &scratch.path().join("replay1"),
        &scratch.path().join("replay2"),
        &all,
        "replay vs replay",
    );
}

#[test]
fn evaluation_set_is_the_intersection_of_clean_and_gold() {
    let scratch = tempfile::tempdir().unwrap();
    // Annotations for 6 of the 12 posts, plus one id absent from the corpus.
    let fixtures = fixture_dir();
    let annotations = std::fs::read_to_string(fixtures.join("annotations.jsonl")).unwrap();
    let mut subset: Vec<&str> = annotations.lines().take(6).collect();
    let ghost = r#"{"post_id":"ghost","phase":"one","labels":["neither"]}"#;
    subset.push(ghost);
    let annotations_path = scratch.path().join("partial.jsonl");
    std::fs::write(&annotations_path, subset.join("\n") + "\n").unwrap();

    let outcome = run_fixture(
        &scratch.path().join("run"),
        &Overrides {
            annotations: Some(annotations_path),
            ..Overrides::default()
        },
    );
    assert_eq!(outcome.summary.n_clean, 12);
    assert_eq!(outcome.summary.n_gold, 7);
    assert_eq!(outcome.summary.n_eval_posts, 6);
    assert_eq!(outcome.summary.n_gold_without_clean, 1);
    assert_eq!(outcome.summary.n_clean_without_gold, 6);
    assert_eq!(outcome.summary.n_requests, 6 * 4 * 5);
    let records: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&scratch.path().join("run").join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 24);
    assert!(records.iter().all(|r| r.post_id != "ghost"));
}

#[test]
fn prompt_category_subset_runs_and_replays() {
    let scratch = tempfile::tempdir().unwrap();
    let overrides = Overrides {
        categories: Some(vec![
            PromptCategory::ZeroShotLinguistic,
            PromptCategory::Roleplay,
        ]),
        ..Overrides::default()
    };
    let outcome = run_fixture(&scratch.path().join("run"), &overrides);
    // Canonical ordering regardless of override order.
    assert_eq!(
        outcome.summary.categories,
        vec![PromptCategory::Roleplay, PromptCategory::ZeroShotLinguistic]
    );
    assert_eq!(outcome.summary.n_requests, 12 * 2 * 5);
    let records: Vec<UncertaintyRecord> =
        cseval_core::jsonl::read_all(&scratch.path().join("run").join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 24);
}
