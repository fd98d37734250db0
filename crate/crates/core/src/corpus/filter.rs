//! The six-step cleaning pipeline.
//!
//! Steps run per post, in order: (1) whitespace normalization and empty
//! drop, (2) exact-duplicate drop, (3) non-whitelisted-language drop, (4)
//! URL-only/emoji-only drop, (5) institutional-keyword drop, (6) contraction
//! expansion and emoji-to-emoticon replacement. Retweets and target-authored
//! posts are excluded up front, mirroring collection rules rather than the
//! numbered cleaning steps. Deduplication intentionally runs before
//! contraction expansion, so near-duplicates differing only in contractions
//! survive.

use super::contractions::expand_contractions;
use super::emoji::{is_emoji_char, replace_emojis};
use super::lang::LanguageDetector;
use super::{CleanPost, FilterConfig, PostKind, RawPost, RejectReason, RejectRecord};
use std::collections::HashSet;

/// Survivors plus reason-coded rejects, input order preserved on both sides.
#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub kept: Vec<CleanPost>,
    pub rejected: Vec<RejectRecord>,
}

/// Collapse all whitespace runs to single spaces and trim.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_url_token(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// True when the text carries no substance beyond URLs and emojis: after
/// removing URL tokens and emoji characters, no alphanumeric character
/// remains.
fn is_url_or_emoji_only(text: &str) -> bool {
    let mut saw_url_or_emoji = false;
    for token in text.split_whitespace() {
        if is_url_token(token) {
            saw_url_or_emoji = true;
            continue;
        }
        for c in token.chars() {
            if is_emoji_char(c) {
                saw_url_or_emoji = true;
            } else if c.is_alphanumeric() {
                return false;
            }
        }
    }
    saw_url_or_emoji
}

/// Strip URLs and emojis before language detection so link-heavy posts do
/// not skew the guess.
fn detectable_text(text: &str) -> String {
    let tokens: Vec<String> = text
        .split_whitespace()
        .filter(|t| !is_url_token(t))
        .map(|t| t.chars().filter(|c| !is_emoji_char(*c)).collect())
        .collect();
    tokens.join(" ")
}

fn primary_subtag(tag: &str) -> String {
    tag.split(['-', '_'])
        .next()
        .unwrap_or(tag)
        .to_lowercase()
}

fn language_ok(
    post: &RawPost,
    normalized: &str,
    config: &FilterConfig,
    detector: &dyn LanguageDetector,
) -> bool {
    if let Some(tag) = &post.language_tag {
        return config
            .language_whitelist
            .iter()
            .any(|w| w.to_lowercase() == primary_subtag(tag));
    }
    match detector.detect(&detectable_text(normalized)) {
        Some(guess) => {
            guess.confidence >= config.lang_confidence_threshold
                && config
                    .language_whitelist
                    .iter()
                    .any(|w| w.to_lowercase() == guess.code)
        }
        // Undetermined (e.g. no words at all): not a language drop. The
        // URL/emoji-only step right after handles contentless posts.
        None => true,
    }
}

/// Run the cleaning pipeline over a batch. Malformed records never abort the
/// batch; each drop carries its reason code. Idempotent: feeding the kept
/// posts back through produces the same kept set.
pub fn filter_pipeline(
    posts: Vec<RawPost>,
    config: &FilterConfig,
    detector: &dyn LanguageDetector,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for post in posts {
        let reject = |id: Option<String>, reason: RejectReason, detail: Option<String>| {
            RejectRecord {
                id,
                line: None,
                reason,
                detail,
            }
        };
        if post.id.trim().is_empty() {
            outcome.rejected.push(reject(
                None,
                RejectReason::Malformed,
                Some("empty id".into()),
            ));
            continue;
        }
        // Ids key journal entries and records downstream; collisions are
        // malformed input, not ordinary duplicates.
        if !seen_ids.insert(post.id.clone()) {
            outcome.rejected.push(reject(
                Some(post.id.clone()),
                RejectReason::Malformed,
                Some("duplicate id".into()),
            ));
            continue;
        }
        if post.post_kind == PostKind::Retweet {
            outcome
                .rejected
                .push(reject(Some(post.id.clone()), RejectReason::Retweet, None));
            continue;
        }
        if post.author_is_target {
            outcome.rejected.push(reject(
                Some(post.id.clone()),
                RejectReason::TargetAuthored,
                None,
            ));
            continue;
        }
        // Step 1: whitespace normalization; drop empties.
        let normalized = collapse_whitespace(&post.text);
        if normalized.is_empty() {
            outcome
                .rejected
                .push(reject(Some(post.id.clone()), RejectReason::Empty, None));
            continue;
        }
        // Step 2: exact-duplicate drop, first occurrence wins.
        if !seen.insert(normalized.clone()) {
            outcome
                .rejected
                .push(reject(Some(post.id.clone()), RejectReason::Duplicate, None));
            continue;
        }
        // Step 3: language whitelist.
        if !language_ok(&post, &normalized, config, detector) {
            outcome.rejected.push(reject(
                Some(post.id.clone()),
                RejectReason::NonEnglish,
                post.language_tag.clone(),
            ));
            continue;
        }
        // Step 4: URL-only / emoji-only drop.
        if is_url_or_emoji_only(&normalized) {
            outcome.rejected.push(reject(
                Some(post.id.clone()),
                RejectReason::UrlOrEmojiOnly,
                None,
            ));
            continue;
        }
        // Step 5: institutional-keyword drop.
        let lower = normalized.to_lowercase();
        if let Some(keyword) = config
            .institutional_keywords
            .iter()
            .find(|k| lower.contains(&k.to_lowercase()))
        {
            outcome.rejected.push(reject(
                Some(post.id.clone()),
                RejectReason::Institutional,
                Some(keyword.clone()),
            ));
            continue;
        }
        // Step 6: contraction expansion, then emoji-to-emoticon replacement.
        let transformed = collapse_whitespace(&replace_emojis(&expand_contractions(&normalized)));
        outcome.kept.push(CleanPost {
            id: post.id,
            text: post.text,
            author_is_target: post.author_is_target,
            post_kind: post.post_kind,
            created_at: post.created_at,
            retweet_count: post.retweet_count,
            reply_count: post.reply_count,
            like_count: post.like_count,
            quote_count: post.quote_count,
            language_tag: post.language_tag,
            normalized_text: transformed,
            event: None,
            engagement_rank: None,
        });
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::super::test_support::raw_post;
    use super::super::StopwordDetector;
    use super::*;

    fn run(posts: Vec<RawPost>) -> FilterOutcome {
        filter_pipeline(posts, &FilterConfig::default(), &StopwordDetector)
    }

    #[test]
    fn byte_identical_duplicates_keep_first() {
        let out = run(vec![raw_post("a", "same text"), raw_post("b", "same text")]);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "a");
        assert_eq!(out.rejected[0].reason, RejectReason::Duplicate);
        assert_eq!(out.rejected[0].id.as_deref(), Some("b"));
    }

    #[test]
    fn url_and_emoji_only_posts_drop_with_reason() {
        let out = run(vec![raw_post("a", "https://t.co/x 😀")]);
        assert!(out.kept.is_empty());
        assert_eq!(out.rejected[0].reason, RejectReason::UrlOrEmojiOnly);
        assert_eq!(out.rejected[0].reason.code(), "url_or_emoji_only");
    }

    #[test]
    fn contractions_expand() {
        let out = run(vec![raw_post("a", "don't")]);
        assert_eq!(out.kept[0].normalized_text, "do not");
    }

    #[test]
    fn empty_and_whitespace_only_drop() {
        let out = run(vec![raw_post("a", "   \n\t ")]);
        assert_eq!(out.rejected[0].reason, RejectReason::Empty);
    }

    #[test]
    fn extra_spacing_collapses() {
        let out = run(vec![raw_post("a", "  two   words \n here ")]);
        assert_eq!(out.kept[0].normalized_text, "two words here");
    }

    #[test]
    fn non_english_tag_drops() {
        let mut post = raw_post("a", "ceci est un texte");
        post.language_tag = Some("fr".into());
        let out = run(vec![post]);
        assert_eq!(out.rejected[0].reason, RejectReason::NonEnglish);
    }

    #[test]
    fn untagged_english_survives_detector() {
        let mut post = raw_post("a", "this is about the vote and what it means");
        post.language_tag = None;
        let out = run(vec![post]);
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn institutional_keywords_drop_case_insensitively() {
        let out = run(vec![raw_post("a", "Breaking News: something happened")]);
        assert_eq!(out.rejected[0].reason, RejectReason::Institutional);
    }

    #[test]
    fn retweets_and_target_authored_drop() {
        let mut rt = raw_post("a", "text");
        rt.post_kind = PostKind::Retweet;
        let mut own = raw_post("b", "text two");
        own.author_is_target = true;
        let out = run(vec![rt, own]);
        assert_eq!(out.rejected[0].reason, RejectReason::Retweet);
        assert_eq!(out.rejected[1].reason, RejectReason::TargetAuthored);
    }

    #[test]
    fn empty_id_is_malformed() {
        let out = run(vec![raw_post("", "text")]);
        assert_eq!(out.rejected[0].reason, RejectReason::Malformed);
    }

    #[test]
    fn duplicate_ids_are_malformed_not_deduplicated() {
        let out = run(vec![raw_post("a", "first text"), raw_post("a", "second text")]);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.rejected[0].reason, RejectReason::Malformed);
        assert_eq!(out.rejected[0].detail.as_deref(), Some("duplicate id"));
    }

    #[test]
    fn emojis_become_emoticons_in_kept_text() {
        let out = run(vec![raw_post("a", "great result 😀 today")]);
        assert_eq!(out.kept[0].normalized_text, "great result :) today");
    }

    #[test]
    fn order_of_survivors_is_preserved() {
        let out = run(vec![
            raw_post("a", "first text"),
            raw_post("b", "second text"),
            raw_post("c", "third text"),
        ]);
        let ids: Vec<_> = out.kept.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn pipeline_is_idempotent() {
        let posts = vec![
            raw_post("a", "Don't    stop 😀 now"),
            raw_post("b", "keep calm and carry on"),
        ];
        let once = run(posts);
        let again_input: Vec<RawPost> = once
            .kept
            .iter()
            .map(|p| {
                let mut raw = raw_post(&p.id, &p.normalized_text);
                raw.language_tag = p.language_tag.clone();
                raw
            })
            .collect();
        let twice = run(again_input);
        assert_eq!(once.kept.len(), twice.kept.len());
        for (a, b) in once.kept.iter().zip(twice.kept.iter()) {
            assert_eq!(a.normalized_text, b.normalized_text);
        }
        assert!(twice.rejected.is_empty());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn post_text() -> impl Strategy<Value = String> {
            let word = prop_oneof![
                4 => "[a-z]{1,8}",
                1 => Just("don't".to_string()),
                1 => Just("😀".to_string()),
                1 => Just("https://t.co/x".to_string()),
                1 => Just("BREAKING NEWS".to_string()),
            ];
            proptest::collection::vec(word, 0..8).prop_map(|words| words.join("  "))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn survivors_are_fixed_points(texts in proptest::collection::vec(post_text(), 0..20)) {
                let posts: Vec<RawPost> = texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| raw_post(&format!("p{i}"), t))
                    .collect();
                let once = run(posts);
                let again: Vec<RawPost> = once
                    .kept
                    .iter()
                    .map(|p| raw_post(&p.id, &p.normalized_text))
                    .collect();
                let twice = run(again);
                prop_assert!(twice.rejected.is_empty(), "{:?}", twice.rejected);
                prop_assert_eq!(once.kept.len(), twice.kept.len());
                for (a, b) in once.kept.iter().zip(twice.kept.iter()) {
                    prop_assert_eq!(&a.normalized_text, &b.normalized_text);
                }
            }
        }
    }
}
