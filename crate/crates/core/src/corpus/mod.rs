//! Corpus ingestion: cleaning pipeline, engagement ranking, event tagging.

mod contractions;
mod emoji;
mod events;
mod filter;
mod lang;

pub use contractions::expand_contractions;
pub use emoji::{is_emoji_char, is_emoji_only, replace_emojis};
pub use events::{load_events, tag_events, EventKind, TriggerEvent};
pub use filter::{collapse_whitespace, filter_pipeline, FilterOutcome};
pub use lang::{LangGuess, LanguageDetector, StopwordDetector};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kind of post as reported by the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Original,
    Reply,
    Quote,
    Retweet,
}

/// One ingested social-media text with engagement metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    /// Post authored by one of the tracked MPs.
    pub author_is_target: bool,
    pub post_kind: PostKind,
    pub created_at: DateTime<Utc>,
    pub retweet_count: u64,
    pub reply_count: u64,
    pub like_count: u64,
    pub quote_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_tag: Option<String>,
}

impl RawPost {
    pub fn total_engagement(&self) -> u64 {
        self.retweet_count + self.reply_count + self.like_count + self.quote_count
    }
}

/// A post that survived the cleaning pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanPost {
    pub id: String,
    pub text: String,
    pub author_is_target: bool,
    pub post_kind: PostKind,
    pub created_at: DateTime<Utc>,
    pub retweet_count: u64,
    pub reply_count: u64,
    pub like_count: u64,
    pub quote_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_tag: Option<String>,
    pub normalized_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    /// 1-based, assigned by [`rank_by_engagement`]; absent until ranked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engagement_rank: Option<u32>,
}

impl CleanPost {
    pub fn total_engagement(&self) -> u64 {
        self.retweet_count + self.reply_count + self.like_count + self.quote_count
    }

    /// Calendar month of the post as "YYYY-MM".
    pub fn month(&self) -> String {
        self.created_at.format("%Y-%m").to_string()
    }
}

/// Why a record was rejected by the pipeline. Codes land verbatim in the
/// rejects sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed,
    Retweet,
    TargetAuthored,
    Empty,
    Duplicate,
    NonEnglish,
    UrlOrEmojiOnly,
    Institutional,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::Retweet => "retweet",
            RejectReason::TargetAuthored => "target_authored",
            RejectReason::Empty => "empty",
            RejectReason::Duplicate => "duplicate",
            RejectReason::NonEnglish => "non_english",
            RejectReason::UrlOrEmojiOnly => "url_or_emoji_only",
            RejectReason::Institutional => "institutional",
        }
    }
}

/// One rejected record with its reason code, written to the sidecar file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub reason: RejectReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Settings for the cleaning pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Posts containing any of these (case-insensitive) are institutional
    /// content, not individual discourse.
    pub institutional_keywords: Vec<String>,
    /// Allowed primary language subtags (lowercase).
    pub language_whitelist: Vec<String>,
    /// Minimum detector confidence when no language tag is present.
    pub lang_confidence_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            institutional_keywords: vec!["BREAKING NEWS".into(), "HEADLINES".into()],
            language_whitelist: vec!["en".into()],
            lang_confidence_threshold: 0.8,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("event windows {a:?} and {b:?} overlap and lack a priority order")]
    OverlappingWindows { a: String, b: String },
    #[error("event {name:?}: window start {start} is after end {end}")]
    InvertedWindow {
        name: String,
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
    },
    #[error("events file {path}: {message}")]
    EventsFile { path: String, message: String },
}

/// Stable descending sort by total engagement; ties break by older
/// `created_at`, then lexicographic id. Assigns `engagement_rank` 1..=N.
pub fn rank_by_engagement(mut posts: Vec<CleanPost>) -> Vec<CleanPost> {
    posts.sort_by(|a, b| {
        b.total_engagement()
            .cmp(&a.total_engagement())
            .then_with(|| a.created_at.cmp(&b.created_at))
            .then_with(|| a.id.cmp(&b.id))
    });
    for (i, post) in posts.iter_mut().enumerate() {
        post.engagement_rank = Some(i as u32 + 1);
    }
    posts
}

#[doc(hidden)]
pub mod test_support {
    use super::*;
    use chrono::TimeZone;

    /// Minimal clean post for tests.
    pub fn clean_post(id: &str, text: &str) -> CleanPost {
        CleanPost {
            id: id.to_string(),
            text: text.to_string(),
            author_is_target: false,
            post_kind: PostKind::Original,
            created_at: Utc.with_ymd_and_hms(2022, 4, 25, 12, 0, 0).unwrap(),
            retweet_count: 0,
            reply_count: 0,
            like_count: 0,
            quote_count: 0,
            language_tag: Some("en".into()),
            normalized_text: text.to_string(),
            event: None,
            engagement_rank: None,
        }
    }

    /// Minimal raw post for tests.
    pub fn raw_post(id: &str, text: &str) -> RawPost {
        RawPost {
            id: id.to_string(),
            text: text.to_string(),
            author_is_target: false,
            post_kind: PostKind::Original,
            created_at: Utc.with_ymd_and_hms(2022, 4, 25, 12, 0, 0).unwrap(),
            retweet_count: 0,
            reply_count: 0,
            like_count: 0,
            quote_count: 0,
            language_tag: Some("en".into()),
        }
    }
}
