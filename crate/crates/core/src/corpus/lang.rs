//! Pluggable language detection for posts without a platform language tag.

/// A detected language with a confidence in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LangGuess {
    /// ISO 639-1 primary subtag, lowercase.
    pub code: String,
    pub confidence: f64,
}

/// Detector used when a post carries no `language_tag`. Returning `None`
/// means undetermined; such posts are not dropped on language grounds
/// (later pipeline stages may still drop them, e.g. URL/emoji-only).
pub trait LanguageDetector {
    fn detect(&self, text: &str) -> Option<LangGuess>;
}

/// Crude English detector: blends stopword hit rate with the ASCII-letter
/// ratio. Good enough as a shipped default for tagged corpora where only a
/// handful of posts lack tags; swap in a real detector for untagged data.
#[derive(Debug, Default, Clone)]
pub struct StopwordDetector;

const EN_STOPWORDS: &[&str] = &[
    "the", "and", "to", "of", "a", "in", "that", "it", "is", "was", "for", "on", "are", "as",
    "with", "his", "her", "they", "she", "he", "at", "be", "this", "have", "from", "or", "had",
    "by", "not", "but", "what", "all", "were", "we", "when", "your", "you", "can", "said",
    "there", "do", "will", "each", "about", "how", "up", "out", "them", "then", "she's", "so",
    "some", "would", "into", "has", "more", "no", "way", "could", "my", "than", "been", "who",
    "its", "did", "get", "i", "me", "just", "him", "very", "should", "our", "their", "if",
];

impl LanguageDetector for StopwordDetector {
    fn detect(&self, text: &str) -> Option<LangGuess> {
        let tokens: Vec<String> = text
            .split_whitespace()
            .map(|t| {
                t.chars()
                    .filter(|c| c.is_alphanumeric() || *c == '\'')
                    .collect::<String>()
                    .to_lowercase()
            })
            .filter(|t| t.chars().any(|c| c.is_alphabetic()))
            .collect();
        if tokens.is_empty() {
            return None;
        }
        let hits = tokens
            .iter()
            .filter(|t| EN_STOPWORDS.contains(&t.as_str()))
            .count();
        let hit_frac = hits as f64 / tokens.len() as f64;
        let alpha: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
        let ascii_frac = if alpha.is_empty() {
            0.0
        } else {
            alpha.iter().filter(|c| c.is_ascii_alphabetic()).count() as f64 / alpha.len() as f64
        };
        let confidence = ascii_frac * (0.5 + (hit_frac * 2.5).min(0.5));
        Some(LangGuess {
            code: "en".into(),
            confidence,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_sentences_score_high() {
        let guess = StopwordDetector
            .detect("this is a post about the new policy and what it means for us")
            .unwrap();
        assert_eq!(guess.code, "en");
        assert!(guess.confidence >= 0.8, "got {}", guess.confidence);
    }

    #[test]
    fn non_english_latin_scores_low() {
        let guess = StopwordDetector
            .detect("je ne sais pas pourquoi elle fait cela aujourd'hui")
            .unwrap();
        assert!(guess.confidence < 0.8, "got {}", guess.confidence);
    }

    #[test]
    fn non_latin_scripts_score_low() {
        let guess = StopwordDetector.detect("это не английский текст").unwrap();
        assert!(guess.confidence < 0.5, "got {}", guess.confidence);
    }

    #[test]
    fn no_tokens_is_undetermined() {
        assert!(StopwordDetector.detect("123 !!!").is_none());
        assert!(StopwordDetector.detect("").is_none());
    }
}
