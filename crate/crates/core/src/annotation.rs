//! Gold-label resolution from human annotations via minority voting.
//!
//! Each post carries one label (phase one) or three labels (phase two). Phase
//! two resolves to the least-voted cast label; a three-way tie resolves by the
//! fixed priority sexist > neither > anti-sexist.

use crate::jsonl::{self, JsonlError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// The three classification categories.
///
/// Variant order doubles as the tie-break priority (sexist > neither >
/// anti-sexist), so iterating [`Label::ALL`] visits labels in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "sexist")]
    Sexist,
    #[serde(rename = "neither")]
    Neither,
    #[serde(rename = "anti-sexist")]
    AntiSexist,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Sexist, Label::Neither, Label::AntiSexist];

    /// Signed encoding used by the annotation scheme: sexist = -1,
    /// neither = 0, anti-sexist = +1.
    pub fn signed(self) -> i8 {
        match self {
            Label::Sexist => -1,
            Label::Neither => 0,
            Label::AntiSexist => 1,
        }
    }

    /// Dense index for matrix/vector layouts, in priority order.
    pub fn index(self) -> usize {
        match self {
            Label::Sexist => 0,
            Label::Neither => 1,
            Label::AntiSexist => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    /// Canonical category phrase as it appears in prompts and model outputs.
    pub fn phrase(self) -> &'static str {
        match self {
            Label::Sexist => "sexist",
            Label::Neither => "neither",
            Label::AntiSexist => "anti-sexist",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.phrase())
    }
}

impl std::str::FromStr for Label {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sexist" => Ok(Label::Sexist),
            "neither" => Ok(Label::Neither),
            "anti-sexist" | "antisexist" | "anti_sexist" => Ok(Label::AntiSexist),
            other => Err(AnnotationError::UnknownLabel(other.to_string())),
        }
    }
}

/// Annotation phase: one annotator per post, or three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "one")]
    One,
    #[serde(rename = "two")]
    Two,
}

impl Phase {
    pub fn expected_labels(self) -> usize {
        match self {
            Phase::One => 1,
            Phase::Two => 3,
        }
    }
}

/// Raw labels collected for one post.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub post_id: String,
    pub phase: Phase,
    pub labels: Vec<Label>,
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let expected = self.phase.expected_labels();
        if self.labels.len() != expected {
            return Err(AnnotationError::WrongArity {
                phase: self.phase,
                expected,
                got: self.labels.len(),
            });
        }
        Ok(())
    }

    /// True when the set contains both poles (sexist and anti-sexist).
    /// Loaders warn on these; they are not rejected.
    pub fn has_direct_conflict(&self) -> bool {
        self.labels.contains(&Label::Sexist) && self.labels.contains(&Label::AntiSexist)
    }
}

/// Resolved gold label for one post.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldLabel {
    pub post_id: String,
    pub label: Label,
    pub phase: Phase,
    /// Phase two only: any annotator disagreement. Always false for phase one.
    pub ambiguous: bool,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("expected {expected} labels for phase {phase:?}, got {got}")]
    WrongArity {
        phase: Phase,
        expected: usize,
        got: usize,
    },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// Select the least-voted label among labels that received at least one vote.
///
/// The raw argmin over all three classes would pick zero-vote classes for
/// inputs like {sexist, sexist, neither}; the minimum is taken over cast
/// votes only. With three votes the only possible tie is the three-way split,
/// resolved by priority sexist > neither > anti-sexist.
///
/// ```
/// use cseval_core::annotation::{minority_vote, Label};
///
/// let vote = minority_vote(&[Label::Sexist, Label::Sexist, Label::Neither]).unwrap();
/// assert_eq!(vote, Label::Neither);
/// let tie = minority_vote(&[Label::Sexist, Label::Neither, Label::AntiSexist]).unwrap();
/// assert_eq!(tie, Label::Sexist);
/// ```
pub fn minority_vote(labels: &[Label]) -> Result<Label, AnnotationError> {
    if labels.len() != 3 {
        return Err(AnnotationError::WrongArity {
            phase: Phase::Two,
            expected: 3,
            got: labels.len(),
        });
    }
    let mut counts = [0usize; 3];
    for label in labels {
        counts[label.index()] += 1;
    }
    let min_cast = counts
        .iter()
        .copied()
        .filter(|&c| c > 0)
        .min()
        .expect("three labels cast");
    for label in Label::ALL {
        if counts[label.index()] == min_cast {
            return Ok(label);
        }
    }
    unreachable!("some cast label attains the minimum");
}

/// Resolve an annotation set to its gold label.
///
/// Phase one passes the single label through (never ambiguous). Phase two
/// applies [`minority_vote`] and flags ambiguity when the three labels are
/// not all equal.
pub fn resolve(set: &AnnotationSet) -> Result<GoldLabel, AnnotationError> {
    set.validate()?;
    let (label, ambiguous) = match set.phase {
        Phase::One => (set.labels[0], false),
        Phase::Two => {
            let label = minority_vote(&set.labels)?;
            let unanimous = set.labels.iter().all(|l| *l == set.labels[0]);
            (label, !unanimous)
        }
    };
    Ok(GoldLabel {
        post_id: set.post_id.clone(),
        label,
        phase: set.phase,
        ambiguous,
    })
}

/// Outcome of loading and resolving an annotations file.
pub struct ResolveOutcome {
    pub gold: Vec<GoldLabel>,
    /// Sets where one annotator said sexist and another anti-sexist.
    pub direct_conflicts: usize,
}

/// Load annotation sets from JSON-lines and resolve them all.
///
/// Direct sexist/anti-sexist conflicts are counted and logged as warnings,
/// not rejected. Output is sorted by post id.
pub fn resolve_file(path: &Path) -> Result<ResolveOutcome, AnnotationError> {
    let sets: Vec<AnnotationSet> = jsonl::read_all(path)?;
    let mut gold = Vec::with_capacity(sets.len());
    let mut direct_conflicts = 0usize;
    for set in &sets {
        if set.has_direct_conflict() {
            direct_conflicts += 1;
            log::warn!(
                "post {}: annotators cast both sexist and anti-sexist",
                set.post_id
            );
        }
        gold.push(resolve(set)?);
    }
    gold.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    Ok(ResolveOutcome {
        gold,
        direct_conflicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{AntiSexist as A, Neither as N, Sexist as S};

    #[test]
    fn unanimity_returns_the_label() {
        assert_eq!(minority_vote(&[S, S, S]).unwrap(), S);
        assert_eq!(minority_vote(&[N, N, N]).unwrap(), N);
        assert_eq!(minority_vote(&[A, A, A]).unwrap(), A);
    }

    #[test]
    fn three_way_tie_resolves_by_priority() {
        assert_eq!(minority_vote(&[S, N, A]).unwrap(), S);
        assert_eq!(minority_vote(&[A, N, S]).unwrap(), S);
    }

    #[test]
    fn two_one_split_returns_the_single_vote() {
        assert_eq!(minority_vote(&[S, S, N]).unwrap(), N);
        assert_eq!(minority_vote(&[A, A, N]).unwrap(), N);
        assert_eq!(minority_vote(&[N, N, A]).unwrap(), A);
    }

    #[test]
    fn wrong_arity_is_an_error() {
        assert!(minority_vote(&[S, N]).is_err());
        assert!(minority_vote(&[S, N, A, N]).is_err());
    }

    #[test]
    fn vote_is_permutation_invariant_and_never_returns_zero_vote_labels() {
        for &a in &Label::ALL {
            for &b in &Label::ALL {
                for &c in &Label::ALL {
                    let base = minority_vote(&[a, b, c]).unwrap();
                    for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                        assert_eq!(minority_vote(&perm).unwrap(), base);
                    }
                    assert!([a, b, c].contains(&base), "{base:?} got zero votes");
                }
            }
        }
    }

    #[test]
    fn resolve_phase_one_passes_through() {
        let set = AnnotationSet {
            post_id: "p1".into(),
            phase: Phase::One,
            labels: vec![A],
        };
        let gold = resolve(&set).unwrap();
        assert_eq!(gold.label, A);
        assert!(!gold.ambiguous);
    }

    #[test]
    fn resolve_phase_two_flags_disagreement() {
        let set = AnnotationSet {
            post_id: "p2".into(),
            phase: Phase::Two,
            labels: vec![A, A, N],
        };
        let gold = resolve(&set).unwrap();
        assert_eq!(gold.label, N);
        assert!(gold.ambiguous);

        let set = AnnotationSet {
            post_id: "p3".into(),
            phase: Phase::Two,
            labels: vec![N, N, N],
        };
        let gold = resolve(&set).unwrap();
        assert_eq!(gold.label, N);
        assert!(!gold.ambiguous);
    }

    #[test]
    fn label_strings_roundtrip() {
        for label in Label::ALL {
            let json = serde_json::to_string(&label).unwrap();
            let back: Label = serde_json::from_str(&json).unwrap();
            assert_eq!(back, label);
        }
        assert_eq!(serde_json::to_string(&A).unwrap(), "\"anti-sexist\"");
    }

    #[test]
    fn direct_conflict_detection() {
        let set = AnnotationSet {
            post_id: "p".into(),
            phase: Phase::Two,
            labels: vec![S, N, A],
        };
        assert!(set.has_direct_conflict());
        let set = AnnotationSet {
            post_id: "p".into(),
            phase: Phase::Two,
            labels: vec![S, S, N],
        };
        assert!(!set.has_direct_conflict());
    }
}
