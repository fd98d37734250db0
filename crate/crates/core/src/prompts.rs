//! Prompt assembly for the four instruction levels.
//!
//! Categories escalate the amount of instruction: Roleplay (R) is the bare
//! expert preamble with label options; Content (C) adds content cues;
//! Zero-shot linguistic (Z) adds context and phrasing cues; Few-shot
//! linguistic (F) adds three exemplars per label. The classification question
//! is identical across categories, and rendering is byte-deterministic.

use crate::annotation::Label;
use crate::corpus::CleanPost;
use crate::hash;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Prompt category, ordered by instruction volume: R < C < Z < F.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PromptCategory {
    Roleplay,
    Content,
    ZeroShotLinguistic,
    FewShotLinguistic,
}

impl PromptCategory {
    pub const ALL: [PromptCategory; 4] = [
        PromptCategory::Roleplay,
        PromptCategory::Content,
        PromptCategory::ZeroShotLinguistic,
        PromptCategory::FewShotLinguistic,
    ];

    /// One-letter code used in tables and journal keys.
    pub fn code(self) -> &'static str {
        match self {
            PromptCategory::Roleplay => "R",
            PromptCategory::Content => "C",
            PromptCategory::ZeroShotLinguistic => "Z",
            PromptCategory::FewShotLinguistic => "F",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptCategory::Roleplay => "roleplay",
            PromptCategory::Content => "content",
            PromptCategory::ZeroShotLinguistic => "zero_shot_linguistic",
            PromptCategory::FewShotLinguistic => "few_shot_linguistic",
        }
    }

    pub fn index(self) -> usize {
        match self {
            PromptCategory::Roleplay => 0,
            PromptCategory::Content => 1,
            PromptCategory::ZeroShotLinguistic => 2,
            PromptCategory::FewShotLinguistic => 3,
        }
    }

    /// Instruction-block kinds this category includes, in render order.
    pub fn block_kinds(self) -> &'static [BlockKind] {
        match self {
            PromptCategory::Roleplay => &[BlockKind::RolePreamble, BlockKind::LabelOptions],
            PromptCategory::Content => &[
                BlockKind::RolePreamble,
                BlockKind::ContentCues,
                BlockKind::LabelOptions,
            ],
            PromptCategory::ZeroShotLinguistic => &[
                BlockKind::RolePreamble,
                BlockKind::ContentCues,
                BlockKind::ContextCues,
                BlockKind::PhrasingCues,
                BlockKind::LabelOptions,
            ],
            PromptCategory::FewShotLinguistic => &[
                BlockKind::RolePreamble,
                BlockKind::ContentCues,
                BlockKind::ContextCues,
                BlockKind::PhrasingCues,
                BlockKind::LabelOptions,
                BlockKind::Exemplars,
            ],
        }
    }
}

impl fmt::Display for PromptCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for PromptCategory {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "roleplay" => Ok(PromptCategory::Roleplay),
            "c" | "content" => Ok(PromptCategory::Content),
            "z" | "zero_shot_linguistic" | "zero-shot" | "zero_shot" => {
                Ok(PromptCategory::ZeroShotLinguistic)
            }
            "f" | "few_shot_linguistic" | "few-shot" | "few_shot" => {
                Ok(PromptCategory::FewShotLinguistic)
            }
            other => Err(PromptError::UnknownCategory(other.to_string())),
        }
    }
}

impl Serialize for PromptCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for PromptCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// The six composable instruction-block kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    RolePreamble,
    ContentCues,
    ContextCues,
    PhrasingCues,
    LabelOptions,
    Exemplars,
}

impl BlockKind {
    /// File name the block is loaded from inside a template directory.
    pub fn file_name(self) -> &'static str {
        match self {
            BlockKind::RolePreamble => "role_preamble.txt",
            BlockKind::ContentCues => "content_cues.txt",
            BlockKind::ContextCues => "context_cues.txt",
            BlockKind::PhrasingCues => "phrasing_cues.txt",
            BlockKind::LabelOptions => "label_options.txt",
            BlockKind::Exemplars => "exemplars.jsonl",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstructionBlock {
    pub kind: BlockKind,
    pub text: String,
}

/// A labeled example shown in few-shot prompts. Category F requires exactly
/// three per label, nine in total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exemplar {
    pub text: String,
    pub label: Label,
}

/// Instruction blocks, question, and exemplars loaded from a template
/// directory, plus a content hash recorded in every report.
#[derive(Debug, Clone)]
pub struct BlockLibrary {
    preamble: String,
    content_cues: String,
    context_cues: String,
    phrasing_cues: String,
    label_options: String,
    pub question: String,
    pub exemplars: Vec<Exemplar>,
    pub content_hash: String,
}

pub const QUESTION_FILE: &str = "question.txt";

/// Default classification question, used when a template directory ships no
/// `question.txt`. Identical across all four categories.
pub const DEFAULT_QUESTION: &str =
    "Which one label best describes the following text: sexist, anti-sexist, or neither? \
     Reply with the label only.";

impl BlockLibrary {
    /// Load from a directory containing the five block files and
    /// `exemplars.jsonl`. Block files must exist and be non-empty;
    /// `question.txt` is optional and falls back to [`DEFAULT_QUESTION`].
    pub fn load(dir: &Path) -> Result<BlockLibrary, PromptError> {
        if !dir.is_dir() {
            return Err(PromptError::TemplateDirMissing(dir.display().to_string()));
        }
        let read_block = |kind: BlockKind| -> Result<String, PromptError> {
            let path = dir.join(kind.file_name());
            let text = fs::read_to_string(&path)
                .map_err(|_| PromptError::MissingBlock(kind, path.display().to_string()))?;
            let text = text.trim().to_string();
            if text.is_empty() {
                return Err(PromptError::EmptyBlock(kind));
            }
            Ok(text)
        };
        let question = match fs::read_to_string(dir.join(QUESTION_FILE)) {
            Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
            _ => DEFAULT_QUESTION.to_string(),
        };
        let exemplars: Vec<Exemplar> = crate::jsonl::read_all(&dir.join("exemplars.jsonl"))
            .map_err(|e| PromptError::ExemplarFile(e.to_string()))?;
        Ok(BlockLibrary {
            preamble: read_block(BlockKind::RolePreamble)?,
            content_cues: read_block(BlockKind::ContentCues)?,
            context_cues: read_block(BlockKind::ContextCues)?,
            phrasing_cues: read_block(BlockKind::PhrasingCues)?,
            label_options: read_block(BlockKind::LabelOptions)?,
            question,
            exemplars,
            content_hash: hash::sha256_dir(dir).map_err(|e| PromptError::ExemplarFile(e.to_string()))?,
        })
    }

    /// Build directly from strings. Intended for tests.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        preamble: &str,
        content_cues: &str,
        context_cues: &str,
        phrasing_cues: &str,
        label_options: &str,
        question: &str,
        exemplars: Vec<Exemplar>,
    ) -> BlockLibrary {
        let mut hasher_input = String::new();
        for part in [
            preamble,
            content_cues,
            context_cues,
            phrasing_cues,
            label_options,
            question,
        ] {
            hasher_input.push_str(part);
            hasher_input.push('\0');
        }
        for ex in &exemplars {
            hasher_input.push_str(&ex.text);
            hasher_input.push('\0');
            hasher_input.push_str(ex.label.phrase());
            hasher_input.push('\0');
        }
        let content_hash = hash::sha256_hex(hasher_input.as_bytes());
        BlockLibrary {
            preamble: preamble.to_string(),
            content_cues: content_cues.to_string(),
            context_cues: context_cues.to_string(),
            phrasing_cues: phrasing_cues.to_string(),
            label_options: label_options.to_string(),
            question: question.to_string(),
            exemplars,
            content_hash,
        }
    }

    fn block_text(&self, kind: BlockKind) -> &str {
        match kind {
            BlockKind::RolePreamble => &self.preamble,
            BlockKind::ContentCues => &self.content_cues,
            BlockKind::ContextCues => &self.context_cues,
            BlockKind::PhrasingCues => &self.phrasing_cues,
            BlockKind::LabelOptions => &self.label_options,
            BlockKind::Exemplars => "",
        }
    }

    fn validate_exemplars(&self) -> Result<(), PromptError> {
        if self.exemplars.len() != 9 {
            return Err(PromptError::ExemplarCount {
                expected: 9,
                got: self.exemplars.len(),
            });
        }
        let mut per_label = [0usize; 3];
        for ex in &self.exemplars {
            per_label[ex.label.index()] += 1;
        }
        if per_label != [3, 3, 3] {
            return Err(PromptError::ExemplarImbalance {
                sexist: per_label[0],
                neither: per_label[1],
                anti_sexist: per_label[2],
            });
        }
        Ok(())
    }
}

/// A fully assembled prompt for one (post, category) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub post_id: String,
    pub category: PromptCategory,
    /// Role preamble alone; backends send it as the system message.
    pub preamble: String,
    /// The complete prompt text, preamble included.
    pub body: String,
    /// The classification question, identical across categories.
    pub question: String,
}

impl RenderedPrompt {
    /// Everything after the preamble; backends send it as the user message.
    pub fn user_section(&self) -> &str {
        self.body
            .strip_prefix(self.preamble.as_str())
            .map(|rest| rest.trim_start_matches('\n'))
            .unwrap_or(&self.body)
    }

    pub fn sha256(&self) -> String {
        hash::sha256_hex(self.body.as_bytes())
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt category {0:?}")]
    UnknownCategory(String),
    #[error("template directory not found: {0}")]
    TemplateDirMissing(String),
    #[error("missing instruction block {0:?} ({1})")]
    MissingBlock(BlockKind, String),
    #[error("instruction block {0:?} is empty")]
    EmptyBlock(BlockKind),
    #[error("exemplar file: {0}")]
    ExemplarFile(String),
    #[error("few-shot prompts need {expected} exemplars, got {got}")]
    ExemplarCount { expected: usize, got: usize },
    #[error("few-shot prompts need 3 exemplars per label, got sexist={sexist} neither={neither} anti-sexist={anti_sexist}")]
    ExemplarImbalance {
        sexist: usize,
        neither: usize,
        anti_sexist: usize,
    },
}

/// Assemble the prompt for one post at the given instruction level.
///
/// Segment order is preamble, cue blocks, label options, exemplars, question,
/// post text, joined by blank lines. When `max_chars` is set and exceeded,
/// exemplars are dropped last-first until the prompt fits; nothing else is
/// truncated.
pub fn render(
    category: PromptCategory,
    post: &CleanPost,
    library: &BlockLibrary,
    max_chars: Option<usize>,
) -> Result<RenderedPrompt, PromptError> {
    let wants_exemplars = category
        .block_kinds()
        .contains(&BlockKind::Exemplars);
    if wants_exemplars {
        library.validate_exemplars()?;
    }
    let mut exemplar_count = if wants_exemplars {
        library.exemplars.len()
    } else {
        0
    };
    loop {
        let body = assemble(category, post, library, exemplar_count);
        if let Some(budget) = max_chars {
            if body.chars().count() > budget && exemplar_count > 0 {
                exemplar_count -= 1;
                continue;
            }
        }
        return Ok(RenderedPrompt {
            post_id: post.id.clone(),
            category,
            preamble: library.preamble.clone(),
            body,
            question: library.question.clone(),
        });
    }
}

fn assemble(
    category: PromptCategory,
    post: &CleanPost,
    library: &BlockLibrary,
    exemplar_count: usize,
) -> String {
    let mut segments: Vec<String> = Vec::new();
    for kind in category.block_kinds() {
        match kind {
            BlockKind::Exemplars => {
                if exemplar_count > 0 {
                    let mut block = String::from("Examples:");
                    for ex in library.exemplars.iter().take(exemplar_count) {
                        block.push_str("\n\nText: ");
                        block.push_str(&ex.text);
                        block.push_str("\nLabel: ");
                        block.push_str(ex.label.phrase());
                    }
                    segments.push(block);
                }
            }
            other => segments.push(library.block_text(*other).to_string()),
        }
    }
    segments.push(library.question.clone());
    segments.push(format!("Text: {}", post.normalized_text));
    segments.join("\n\n")
}
