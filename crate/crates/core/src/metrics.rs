//! Classification performance and stratified aggregates.

use crate::annotation::{GoldLabel, Label, Phase};
use crate::corpus::CleanPost;
use crate::prompts::PromptCategory;
use crate::uncertainty::UncertaintyRecord;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("predictions without a gold label: {}", .0.join(", "))]
    UnmatchedPosts(Vec<String>),
}

/// 3x3 counts indexed (gold, predicted) in label order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: Label, predicted: Label) {
        self.counts[gold.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diagonal: u64 = (0..3).map(|i| self.counts[i][i]).sum();
        diagonal as f64 / total as f64
    }

    fn ratio(numerator: u64, denominator: u64) -> f64 {
        // 0/0 := 0 convention for empty classes.
        if denominator == 0 {
            0.0
        } else {
            numerator as f64 / denominator as f64
        }
    }

    pub fn precision(&self, label: Label) -> f64 {
        let i = label.index();
        let predicted: u64 = (0..3).map(|g| self.counts[g][i]).sum();
        Self::ratio(self.counts[i][i], predicted)
    }

    pub fn recall(&self, label: Label) -> f64 {
        let i = label.index();
        let gold: u64 = self.counts[i].iter().sum();
        Self::ratio(self.counts[i][i], gold)
    }

    pub fn f1(&self, label: Label) -> f64 {
        let p = self.precision(label);
        let r = self.recall(label);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn macro_precision(&self) -> f64 {
        Label::ALL.iter().map(|&l| self.precision(l)).sum::<f64>() / 3.0
    }

    pub fn macro_recall(&self) -> f64 {
        Label::ALL.iter().map(|&l| self.recall(l)).sum::<f64>() / 3.0
    }

    /// Mean of the per-class F1 scores (not the F1 of macro-P/R).
    pub fn macro_f1(&self) -> f64 {
        Label::ALL.iter().map(|&l| self.f1(l)).sum::<f64>() / 3.0
    }
}

/// One row of the performance table. Values are fractions in [0, 1];
/// CSV emission renders them as percentages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub category: PromptCategory,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreTable {
    pub model: String,
    pub rows: Vec<ScoreRow>,
}

/// Build a gold-label lookup, erroring on predictions with no gold join.
fn gold_map(gold: &[GoldLabel]) -> BTreeMap<&str, &GoldLabel> {
    gold.iter().map(|g| (g.post_id.as_str(), g)).collect()
}

/// Per-category macro scores over every prediction joined to its gold label.
pub fn score(
    gold: &[GoldLabel],
    preds: &[UncertaintyRecord],
    model: &str,
) -> Result<ScoreTable, MetricsError> {
    let lookup = gold_map(gold);
    let mut unmatched: Vec<String> = preds
        .iter()
        .filter(|p| !lookup.contains_key(p.post_id.as_str()))
        .map(|p| p.post_id.clone())
        .collect();
    if !unmatched.is_empty() {
        unmatched.sort();
        unmatched.dedup();
        return Err(MetricsError::UnmatchedPosts(unmatched));
    }
    let mut matrices: BTreeMap<usize, ConfusionMatrix> = BTreeMap::new();
    for pred in preds {
        let gold_label = lookup[pred.post_id.as_str()].label;
        matrices
            .entry(pred.category.index())
            .or_default()
            .add(gold_label, pred.predicted);
    }
    let rows = PromptCategory::ALL
        .iter()
        .filter_map(|category| {
            matrices.get(&category.index()).map(|matrix| ScoreRow {
                category: *category,
                macro_recall: matrix.macro_recall(),
                macro_precision: matrix.macro_precision(),
                macro_f1: matrix.macro_f1(),
                accuracy: matrix.accuracy(),
                n: matrix.total(),
            })
        })
        .collect();
    Ok(ScoreTable {
        model: model.to_string(),
        rows,
    })
}

/// One monthly proportion cell: the fraction of a month's posts predicted in
/// a class under one prompt category, with the correctly-predicted
/// sub-fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonthlyRow {
    /// "YYYY-MM".
    pub month: String,
    pub category: PromptCategory,
    /// Sexist or anti-sexist; neither is not plotted.
    pub class: Label,
    pub prop: f64,
    pub correct_sub: f64,
    pub n_posts: u64,
}

/// Proportions of posts predicted sexist / anti-sexist per trigger-event
/// month and prompt category. Only event-tagged posts count; the month is
/// the post's calendar month.
pub fn monthly_proportions(
    preds: &[UncertaintyRecord],
    gold: &[GoldLabel],
    posts: &[CleanPost],
) -> Vec<MonthlyRow> {
    let lookup = gold_map(gold);
    let month_of: BTreeMap<&str, String> = posts
        .iter()
        .filter(|p| p.event.is_some())
        .map(|p| (p.id.as_str(), p.month()))
        .collect();

    // (month, category) -> (total, per-class predicted, per-class correct)
    #[derive(Default)]
    struct Cell {
        total: u64,
        predicted: [u64; 3],
        correct: [u64; 3],
    }
    let mut cells: BTreeMap<(String, usize), Cell> = BTreeMap::new();
    for pred in preds {
        let Some(month) = month_of.get(pred.post_id.as_str()) else {
            continue;
        };
        let cell = cells
            .entry((month.clone(), pred.category.index()))
            .or_default();
        cell.total += 1;
        cell.predicted[pred.predicted.index()] += 1;
        if let Some(gold_label) = lookup.get(pred.post_id.as_str()) {
            if gold_label.label == pred.predicted {
                cell.correct[pred.predicted.index()] += 1;
            }
        }
    }
    let mut rows = Vec::new();
    for ((month, category_index), cell) in &cells {
        let category = PromptCategory::ALL[*category_index];
        for class in [Label::Sexist, Label::AntiSexist] {
            let i = class.index();
            let (prop, correct_sub) = if cell.total == 0 {
                (0.0, 0.0)
            } else {
                (
                    cell.predicted[i] as f64 / cell.total as f64,
                    cell.correct[i] as f64 / cell.total as f64,
                )
            };
            rows.push(MonthlyRow {
                month: month.clone(),
                category,
                class,
                prop,
                correct_sub,
                n_posts: cell.total,
            });
        }
    }
    rows
}

/// Strata for the mean-perplexity table. Ambiguity strata cover phase-two
/// posts only; conflict strata cover all scored posts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Ambiguous,
    NonAmbiguous,
    Conflict,
    Confident,
}

impl Stratum {
    pub const ALL: [Stratum; 4] = [
        Stratum::Ambiguous,
        Stratum::NonAmbiguous,
        Stratum::Conflict,
        Stratum::Confident,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stratum::Ambiguous => "ambiguous",
            Stratum::NonAmbiguous => "non_ambiguous",
            Stratum::Conflict => "conflict",
            Stratum::Confident => "confident",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerplexityStratumRow {
    pub stratum: Stratum,
    pub category: PromptCategory,
    /// Absent (not zero) when the stratum is empty.
    pub mean_ppl: Option<f64>,
    pub n: u64,
}

/// Mean per-record perplexity per (stratum, category).
pub fn stratified_perplexity(
    preds: &[UncertaintyRecord],
    gold: &[GoldLabel],
) -> Vec<PerplexityStratumRow> {
    let lookup = gold_map(gold);
    let mut sums: BTreeMap<(Stratum, usize), (f64, u64)> = BTreeMap::new();
    for pred in preds {
        let mut strata: Vec<Stratum> = Vec::with_capacity(2);
        if let Some(gold_label) = lookup.get(pred.post_id.as_str()) {
            if gold_label.phase == Phase::Two {
                strata.push(if gold_label.ambiguous {
                    Stratum::Ambiguous
                } else {
                    Stratum::NonAmbiguous
                });
            }
        }
        strata.push(if pred.conflict {
            Stratum::Conflict
        } else {
            Stratum::Confident
        });
        for stratum in strata {
            let slot = sums.entry((stratum, pred.category.index())).or_insert((0.0, 0));
            slot.0 += pred.ppl_mean;
            slot.1 += 1;
        }
    }
    let mut rows = Vec::new();
    for stratum in Stratum::ALL {
        for category in PromptCategory::ALL {
            let (mean_ppl, n) = match sums.get(&(stratum, category.index())) {
                Some((sum, n)) => (Some(sum / *n as f64), *n),
                None => (None, 0),
            };
            rows.push(PerplexityStratumRow {
                stratum,
                category,
                mean_ppl,
                n,
            });
        }
    }
    rows
}

/// One perplexity observation for boxplot-style export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub category: PromptCategory,
    pub predicted: Label,
    pub correct: bool,
    pub post_id: String,
    pub ppl: f64,
}

pub fn perplexity_boxplot_data(
    preds: &[UncertaintyRecord],
    gold: &[GoldLabel],
) -> Vec<BoxplotRow> {
    let lookup = gold_map(gold);
    let mut rows: Vec<BoxplotRow> = preds
        .iter()
        .map(|pred| BoxplotRow {
            category: pred.category,
            predicted: pred.predicted,
            correct: lookup
                .get(pred.post_id.as_str())
                .is_some_and(|g| g.label == pred.predicted),
            post_id: pred.post_id.clone(),
            ppl: pred.ppl_mean,
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.category.index(), a.predicted.index(), &a.post_id).cmp(&(
            b.category.index(),
            b.predicted.index(),
            &b.post_id,
        ))
    });
    rows
}
