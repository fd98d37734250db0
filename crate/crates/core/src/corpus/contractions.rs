//! Contraction expansion over a fixed table.
//!
//! Matching is case-insensitive on word boundaries and accepts straight or
//! curly apostrophes. Expansion preserves a leading capital ("Don't" becomes
//! "Do not"). Possessive 's is deliberately untouched: only the listed
//! pronoun/auxiliary forms expand.

use regex::Regex;
use std::sync::OnceLock;

/// Contracted form (lowercase, straight apostrophe) and its expansion.
const TABLE: &[(&str, &str)] = &[
    ("don't", "do not"),
    ("doesn't", "does not"),
    ("didn't", "did not"),
    ("can't", "cannot"),
    ("couldn't", "could not"),
    ("won't", "will not"),
    ("wouldn't", "would not"),
    ("shouldn't", "should not"),
    ("shan't", "shall not"),
    ("mustn't", "must not"),
    ("needn't", "need not"),
    ("isn't", "is not"),
    ("aren't", "are not"),
    ("wasn't", "was not"),
    ("weren't", "were not"),
    ("hasn't", "has not"),
    ("haven't", "have not"),
    ("hadn't", "had not"),
    ("ain't", "is not"),
    ("i'm", "i am"),
    ("you're", "you are"),
    ("we're", "we are"),
    ("they're", "they are"),
    ("he's", "he is"),
    ("she's", "she is"),
    ("it's", "it is"),
    ("that's", "that is"),
    ("there's", "there is"),
    ("here's", "here is"),
    ("what's", "what is"),
    ("who's", "who is"),
    ("where's", "where is"),
    ("when's", "when is"),
    ("how's", "how is"),
    ("let's", "let us"),
    ("i've", "i have"),
    ("you've", "you have"),
    ("we've", "we have"),
    ("they've", "they have"),
    ("could've", "could have"),
    ("should've", "should have"),
    ("would've", "would have"),
    ("i'll", "i will"),
    ("you'll", "you will"),
    ("he'll", "he will"),
    ("she'll", "she will"),
    ("we'll", "we will"),
    ("they'll", "they will"),
    ("it'll", "it will"),
    ("i'd", "i would"),
    ("you'd", "you would"),
    ("he'd", "he would"),
    ("she'd", "she would"),
    ("we'd", "we would"),
    ("they'd", "they would"),
    ("y'all", "you all"),
];

fn contraction_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // Longest-first alternation so e.g. "they're" wins over "he're"-style
        // partials; \b anchors keep matches on whole words.
        let mut forms: Vec<&str> = TABLE.iter().map(|(c, _)| *c).collect();
        forms.sort_by_key(|f| std::cmp::Reverse(f.len()));
        let alternation = forms
            .iter()
            .map(|f| regex::escape(f))
            .collect::<Vec<_>>()
            .join("|");
        Regex::new(&format!(r"(?i)\b({alternation})\b")).expect("static contraction regex")
    })
}

fn lookup(lower: &str) -> Option<&'static str> {
    TABLE
        .iter()
        .find(|(c, _)| *c == lower)
        .map(|(_, e)| *e)
}

/// Expand contractions; idempotent because expansions contain no apostrophes
/// from the table.
pub fn expand_contractions(text: &str) -> String {
    let straightened = text.replace('\u{2019}', "'");
    contraction_regex()
        .replace_all(&straightened, |caps: &regex::Captures<'_>| {
            let matched = caps.get(0).expect("whole match").as_str();
            let expansion = lookup(&matched.to_lowercase()).expect("matched form is in table");
            let first_is_upper = matched.chars().next().is_some_and(|c| c.is_uppercase());
            if first_is_upper {
                let mut chars = expansion.chars();
                match chars.next() {
                    Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
                    None => String::new(),
                }
            } else {
                expansion.to_string()
            }
        })
        .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_basic_forms() {
        assert_eq!(expand_contractions("don't"), "do not");
        assert_eq!(expand_contractions("I can't go"), "I cannot go");
        assert_eq!(expand_contractions("she'll win"), "she will win");
    }

    #[test]
    fn preserves_leading_capital_and_curly_apostrophes() {
        assert_eq!(expand_contractions("Don't do it"), "Do not do it");
        assert_eq!(expand_contractions("Don\u{2019}t"), "Do not");
    }

    #[test]
    fn leaves_possessives_and_unknown_forms_alone() {
        assert_eq!(expand_contractions("Rayner's speech"), "Rayner's speech");
        assert_eq!(expand_contractions("o'clock"), "o'clock");
    }

    #[test]
    fn is_idempotent() {
        let once = expand_contractions("Don't say it's fine when they're not");
        assert_eq!(expand_contractions(&once), once);
    }

    #[test]
    fn does_not_match_inside_words() {
        // "she'll" must not be rewritten via the shorter "he'll".
        assert_eq!(expand_contractions("she'll"), "she will");
    }
}
