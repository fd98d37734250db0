//! CSV table emission. Layouts mirror the published result tables; float
//! formatting is fixed-width so bundles are byte-reproducible.

use crate::annotation::Label;
use crate::metrics::{BoxplotRow, MonthlyRow, PerplexityStratumRow, ScoreTable, Stratum};
use crate::prompts::PromptCategory;
use crate::uncertainty::{CrossPromptStratum, DivergenceReport, UncertaintyRecord};
use std::collections::BTreeMap;
use std::io;
use std::path::Path;

fn write_csv(path: &Path, rows: Vec<Vec<String>>) -> io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()
}

fn pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

fn f4(value: f64) -> String {
    format!("{value:.4}")
}

fn f8(value: f64) -> String {
    format!("{value:.8}")
}

/// `performance.csv`: one row per prompt type, macro scores as percentages.
pub fn write_performance(path: &Path, table: &ScoreTable) -> io::Result<()> {
    let mut rows = vec![vec![
        "prompt_type".to_string(),
        "macro_recall".to_string(),
        "macro_precision".to_string(),
        "macro_f1".to_string(),
        "accuracy".to_string(),
        "n".to_string(),
    ]];
    for row in &table.rows {
        rows.push(vec![
            row.category.code().to_string(),
            pct(row.macro_recall),
            pct(row.macro_precision),
            pct(row.macro_f1),
            pct(row.accuracy),
            row.n.to_string(),
        ]);
    }
    write_csv(path, rows)
}

/// `avg_perp.csv`: strata rows, prompt-type columns; empty cell for an empty
/// stratum.
pub fn write_avg_perp(path: &Path, rows: &[PerplexityStratumRow]) -> io::Result<()> {
    let mut by_key: BTreeMap<(usize, usize), Option<f64>> = BTreeMap::new();
    for row in rows {
        let stratum_index = Stratum::ALL
            .iter()
            .position(|s| *s == row.stratum)
            .expect("known stratum");
        by_key.insert((stratum_index, row.category.index()), row.mean_ppl);
    }
    let mut out = vec![vec![
        "stratum".to_string(),
        "R".to_string(),
        "C".to_string(),
        "Z".to_string(),
        "F".to_string(),
    ]];
    for (i, stratum) in Stratum::ALL.iter().enumerate() {
        let mut row = vec![stratum.name().to_string()];
        for j in 0..4 {
            row.push(match by_key.get(&(i, j)).copied().flatten() {
                Some(mean) => f4(mean),
                None => String::new(),
            });
        }
        out.push(row);
    }
    write_csv(path, out)
}

/// `avg_pred_ent.csv`: per predicted class and measure, prompt-type columns.
/// The headline "PE" is the biased Monte-Carlo form; the raw MC and exact
/// forms ride along as sibling rows.
pub fn write_avg_pred_ent(path: &Path, records: &[UncertaintyRecord]) -> io::Result<()> {
    // (class, category) -> (sum_biased, sum_mc, sum_exact, n)
    let mut sums: BTreeMap<(usize, usize), (f64, f64, f64, u64)> = BTreeMap::new();
    for record in records {
        let slot = sums
            .entry((record.predicted.index(), record.category.index()))
            .or_insert((0.0, 0.0, 0.0, 0));
        slot.0 += record.pe_biased;
        slot.1 += record.pe_raw_mc;
        slot.2 += record.pe_raw_exact;
        slot.3 += 1;
    }
    let mut out = vec![vec![
        "class".to_string(),
        "measure".to_string(),
        "R".to_string(),
        "C".to_string(),
        "Z".to_string(),
        "F".to_string(),
    ]];
    for class in Label::ALL {
        for (measure, pick) in [
            ("pe_biased", 0usize),
            ("pe_mc", 1),
            ("pe_exact", 2),
        ] {
            let mut row = vec![class.phrase().to_string(), measure.to_string()];
            for category in 0..4 {
                let cell = match sums.get(&(class.index(), category)) {
                    Some((biased, mc, exact, n)) => {
                        let value = match pick {
                            0 => biased,
                            1 => mc,
                            _ => exact,
                        };
                        f4(value / *n as f64)
                    }
                    None => String::new(),
                };
                row.push(cell);
            }
            out.push(row);
        }
    }
    write_csv(path, out)
}

/// `divergent_score.csv`: upper-triangle mean JSD per stratum, mirroring the
/// from-row/to-column layout.
pub fn write_divergent_score(path: &Path, report: &DivergenceReport) -> io::Result<()> {
    let mut out = vec![vec![
        "stratum".to_string(),
        "from".to_string(),
        "C".to_string(),
        "Z".to_string(),
        "F".to_string(),
    ]];
    for stratum in [CrossPromptStratum::Confident, CrossPromptStratum::Conflict] {
        let stratum_name = match stratum {
            CrossPromptStratum::Confident => "confident",
            CrossPromptStratum::Conflict => "conflict",
        };
        for from in [
            PromptCategory::Roleplay,
            PromptCategory::Content,
            PromptCategory::ZeroShotLinguistic,
        ] {
            let mut row = vec![stratum_name.to_string(), from.code().to_string()];
            for to in [
                PromptCategory::Content,
                PromptCategory::ZeroShotLinguistic,
                PromptCategory::FewShotLinguistic,
            ] {
                let cell = if to.index() <= from.index() {
                    String::new()
                } else {
                    match report.mean(stratum, from, to) {
                        Some(mean) => f8(mean),
                        None => String::new(),
                    }
                };
                row.push(cell);
            }
            out.push(row);
        }
    }
    write_csv(path, out)
}

/// `monthly_proportions.csv`: plot data for the per-event-month bar charts.
pub fn write_monthly_proportions(path: &Path, rows: &[MonthlyRow]) -> io::Result<()> {
    let mut out = vec![vec![
        "month".to_string(),
        "category".to_string(),
        "class".to_string(),
        "prop".to_string(),
        "correct_sub".to_string(),
        "n_posts".to_string(),
    ]];
    for row in rows {
        out.push(vec![
            row.month.clone(),
            row.category.code().to_string(),
            row.class.phrase().to_string(),
            f4(row.prop),
            f4(row.correct_sub),
            row.n_posts.to_string(),
        ]);
    }
    write_csv(path, out)
}

/// `ppl_boxplot.csv`: per-record perplexity observations for boxplots.
pub fn write_ppl_boxplot(path: &Path, rows: &[BoxplotRow]) -> io::Result<()> {
    let mut out = vec![vec![
        "category".to_string(),
        "predicted".to_string(),
        "correct".to_string(),
        "post_id".to_string(),
        "ppl".to_string(),
    ]];
    for row in rows {
        out.push(vec![
            row.category.code().to_string(),
            row.predicted.phrase().to_string(),
            row.correct.to_string(),
            row.post_id.clone(),
            format!("{:.6}", row.ppl),
        ]);
    }
    write_csv(path, out)
}
