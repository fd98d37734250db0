//! Confidence quantification: sequence probabilities, semantic-group
//! distributions, predictive entropy, perplexity, and Jensen-Shannon
//! divergence. Natural-log units throughout; entropies are in nats.

use crate::annotation::Label;
use crate::backend::ModelOutput;
use crate::prompts::PromptCategory;
use crate::semantics::SemanticGroup;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("all group masses are zero; nothing to normalize")]
    ZeroMass,
    #[error("distribution support mismatch: {left} vs {right} entries")]
    SupportMismatch { left: usize, right: usize },
    #[error("distribution does not sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },
}

/// Sequence probability of one sampled completion: the product of the
/// conditional token probabilities, carried in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceProbability {
    pub sample_index: usize,
    /// Sum of token logprobs, <= 0.
    pub log_p: f64,
    /// exp(log_p), in (0, 1].
    pub p: f64,
}

/// log p(y|x) = sum of token logprobs; p = exp(log p).
pub fn sequence_logprob(output: &ModelOutput) -> Result<SequenceProbability, UncertaintyError> {
    if output.tokens.is_empty() {
        return Err(UncertaintyError::EmptySequence);
    }
    let log_p = output.sum_logprob();
    Ok(SequenceProbability {
        sample_index: output.sample_index,
        log_p,
        p: log_p.exp(),
    })
}

/// Per-category probability mass over the semantic groups of one
/// (post, category) sample pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistribution {
    /// Raw per-label mass: sum of member sequence probabilities.
    pub pre_norm: [f64; 3],
    /// pre_norm / normalizer; sums to 1.
    pub normalized: [f64; 3],
    /// Sum of pre-normalization masses.
    pub normalizer: f64,
    /// Member counts per label.
    pub members: [usize; 3],
    /// Number of groups with at least one member (|V|).
    pub group_count: usize,
}

impl GroupDistribution {
    /// Labels with at least one member, in label order.
    pub fn present(&self) -> impl Iterator<Item = Label> + '_ {
        Label::ALL
            .into_iter()
            .filter(|label| self.members[label.index()] > 0)
    }
}

/// Per-group mass = sum of member sequence probabilities (Monte-Carlo set),
/// then normalized to sum 1 with the normalizer recorded.
pub fn group_distribution(
    groups: &[SemanticGroup],
    seq_probs: &BTreeMap<usize, SequenceProbability>,
) -> Result<GroupDistribution, UncertaintyError> {
    let mut pre_norm = [0.0_f64; 3];
    let mut members = [0usize; 3];
    for group in groups {
        let idx = group.category.index();
        for member in &group.members {
            if let Some(sp) = seq_probs.get(&member.sample_index) {
                pre_norm[idx] += sp.p;
                members[idx] += 1;
            }
        }
    }
    let normalizer: f64 = pre_norm.iter().sum();
    if normalizer <= 0.0 {
        return Err(UncertaintyError::ZeroMass);
    }
    let normalized = [
        pre_norm[0] / normalizer,
        pre_norm[1] / normalizer,
        pre_norm[2] / normalizer,
    ];
    let group_count = members.iter().filter(|&&m| m > 0).count();
    Ok(GroupDistribution {
        pre_norm,
        normalized,
        normalizer,
        members,
        group_count,
    })
}

/// Predictive entropy in both published forms, plus the bias-offset variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEntropy {
    /// Exact entropy: -sum_v p(g_v) ln p(g_v).
    pub exact: f64,
    /// Monte-Carlo form over the |V| present groups: -(1/|V|) sum_v ln p(g_v).
    pub mc: f64,
    /// MC form plus the additive offset (default 5). Reproduces the
    /// "values are approximately 5" reporting convention for near-zero
    /// entropy; the offset is configurable.
    pub biased: f64,
}

/// Both entropy forms coincide at uniform distributions and diverge
/// elsewhere; reports carry both.
pub fn predictive_entropy(dist: &GroupDistribution, bias: f64) -> PredictiveEntropy {
    let mut exact = 0.0_f64;
    let mut mc_sum = 0.0_f64;
    let mut present = 0usize;
    for label in Label::ALL {
        let idx = label.index();
        if dist.members[idx] == 0 {
            continue;
        }
        present += 1;
        let p = dist.normalized[idx];
        if p > 0.0 {
            exact -= p * p.ln();
            mc_sum -= p.ln();
        } else {
            mc_sum = f64::INFINITY;
        }
    }
    let mc = if present == 0 {
        0.0
    } else {
        mc_sum / present as f64
    };
    // -0.0 from single-group pools prints as "-0"; keep zeros positive.
    let exact = if exact == 0.0 { 0.0 } else { exact };
    let mc = if mc == 0.0 { 0.0 } else { mc };
    PredictiveEntropy {
        exact,
        mc,
        biased: mc + bias,
    }
}

/// PPL = exp(-(1/L) sum_i logprob_i); >= 1 whenever logprobs <= 0.
pub fn perplexity(output: &ModelOutput) -> Result<f64, UncertaintyError> {
    if output.tokens.is_empty() {
        return Err(UncertaintyError::EmptySequence);
    }
    let mean: f64 = output.sum_logprob() / output.tokens.len() as f64;
    Ok((-mean).exp())
}

fn kl_divergence(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .map(|(&pi, &mi)| if pi > 0.0 { pi * (pi / mi).ln() } else { 0.0 })
        .sum()
}

const SUM_TOLERANCE: f64 = 1e-6;

/// Jensen-Shannon divergence in nats: JSD = KL(P||M)/2 + KL(Q||M)/2 with
/// M = (P+Q)/2. Bounded by ln 2; zero iff P = Q.
///
/// ```
/// use cseval_core::uncertainty::jsd;
///
/// assert!(jsd(&[0.5, 0.5], &[0.5, 0.5]).unwrap() < 1e-12);
/// let max = jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
/// assert!((max - std::f64::consts::LN_2).abs() < 1e-12);
/// ```
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, UncertaintyError> {
    if p.len() != q.len() {
        return Err(UncertaintyError::SupportMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    for dist in [p, q] {
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(UncertaintyError::NotNormalized { sum });
        }
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(&pi, &qi)| 0.5 * (pi + qi)).collect();
    let value = 0.5 * kl_divergence(p, &m) + 0.5 * kl_divergence(q, &m);
    // Guard float noise on identical inputs.
    Ok(value.max(0.0))
}

/// Argmax of group mass; ties break by the fixed label priority
/// sexist > neither > anti-sexist, mirroring the annotation tie-break.
pub fn predicted_label(dist: &GroupDistribution) -> Label {
    let mut best = Label::Sexist;
    let mut best_mass = f64::NEG_INFINITY;
    for label in Label::ALL {
        let mass = dist.normalized[label.index()];
        if mass > best_mass {
            best = label;
            best_mass = mass;
        }
    }
    best
}

/// Per-(post, category) confidence record; one JSON line per record in the
/// bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub post_id: String,
    pub category: PromptCategory,
    pub predicted: Label,
    pub pe_raw_exact: f64,
    pub pe_raw_mc: f64,
    pub pe_biased: f64,
    pub ppl_mean: f64,
    pub ppl_per_sample: Vec<f64>,
    /// More than one distinct category sampled for this input.
    pub conflict: bool,
    /// Normalized group masses in label order (sexist, neither, anti-sexist).
    pub group_masses: [f64; 3],
    /// Sum of pre-normalization masses; `group_masses[i] * mass_normalizer`
    /// recovers the raw per-group sequence-probability sums.
    pub mass_normalizer: f64,
    pub samples_ok: usize,
    pub samples_failed: usize,
}

/// Cross-prompt inputs for one post: the group distribution and predicted
/// label under every category that produced at least one successful sample.
#[derive(Debug, Clone)]
pub struct CrossPromptPost {
    pub post_id: String,
    pub dists: BTreeMap<PromptCategory, [f64; 3]>,
    pub predicted: BTreeMap<PromptCategory, Label>,
}

/// Confident = the predicted label is identical across every prompt category
/// present for the post; conflict otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossPromptStratum {
    Confident,
    Conflict,
}

/// Mean pairwise JSD between prompt categories, per stratum.
#[derive(Debug, Clone, Default)]
pub struct DivergenceReport {
    /// (stratum, from, to) -> (mean, n); from < to in category order.
    pairs: BTreeMap<(CrossPromptStratum, usize, usize), (f64, usize)>,
}

impl DivergenceReport {
    pub fn mean(
        &self,
        stratum: CrossPromptStratum,
        a: PromptCategory,
        b: PromptCategory,
    ) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        let (lo, hi) = if a.index() < b.index() { (a, b) } else { (b, a) };
        self.pairs
            .get(&(stratum, lo.index(), hi.index()))
            .map(|(mean, _)| *mean)
    }

    pub fn count(
        &self,
        stratum: CrossPromptStratum,
        a: PromptCategory,
        b: PromptCategory,
    ) -> usize {
        let (lo, hi) = if a.index() < b.index() { (a, b) } else { (b, a) };
        self.pairs
            .get(&(stratum, lo.index(), hi.index()))
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    /// Symmetric 4x4 matrix of means for one stratum; None where a pair had
    /// no posts, 0 on the diagonal.
    pub fn matrix(&self, stratum: CrossPromptStratum) -> [[Option<f64>; 4]; 4] {
        let mut out = [[None; 4]; 4];
        for (i, a) in PromptCategory::ALL.iter().enumerate() {
            for (j, b) in PromptCategory::ALL.iter().enumerate() {
                out[i][j] = if i == j {
                    Some(0.0)
                } else {
                    self.mean(stratum, *a, *b)
                };
            }
        }
        out
    }
}

/// Pairwise JSD between per-category distributions, averaged over posts and
/// split by cross-prompt prediction consistency. A post contributes to a pair
/// only when both categories produced a distribution for it.
pub fn impact_divergence(
    posts: &[CrossPromptPost],
) -> Result<DivergenceReport, UncertaintyError> {
    let mut sums: BTreeMap<(CrossPromptStratum, usize, usize), (f64, usize)> = BTreeMap::new();
    for post in posts {
        let categories: Vec<PromptCategory> = post.dists.keys().copied().collect();
        if categories.len() < 2 {
            continue;
        }
        let mut predictions = post.predicted.values();
        let first = predictions.next().copied();
        let confident = predictions.all(|p| Some(*p) == first);
        let stratum = if confident {
            CrossPromptStratum::Confident
        } else {
            CrossPromptStratum::Conflict
        };
        for (i, a) in categories.iter().enumerate() {
            for b in categories.iter().skip(i + 1) {
                let value = jsd(&post.dists[a], &post.dists[b])?;
                let slot = sums
                    .entry((stratum, a.index(), b.index()))
                    .or_insert((0.0, 0));
                slot.0 += value;
                slot.1 += 1;
            }
        }
    }
    let pairs = sums
        .into_iter()
        .map(|(key, (sum, n))| (key, (sum / n as f64, n)))
        .collect();
    Ok(DivergenceReport { pairs })
}
