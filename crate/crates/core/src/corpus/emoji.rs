//! Emoji handling: replace mapped emojis with ASCII emoticons, delete the
//! rest of the emoji block.

/// Mapped emoji sequences, longest first at use time. Sequence keys allow
/// multi-scalar emojis (variation selectors).
const EMOTICONS: &[(&str, &str)] = &[
    ("\u{2764}\u{FE0F}", "<3"), // red heart with VS16
    ("❤", "<3"),
    ("💕", "<3"),
    ("💖", "<3"),
    ("💙", "<3"),
    ("💚", "<3"),
    ("💛", "<3"),
    ("💜", "<3"),
    ("🧡", "<3"),
    ("🖤", "<3"),
    ("🤍", "<3"),
    ("💔", "</3"),
    ("😀", ":)"),
    ("😃", ":)"),
    ("😄", ":)"),
    ("😁", ":)"),
    ("🙂", ":)"),
    ("😊", ":)"),
    ("☺", ":)"),
    ("😂", ":D"),
    ("🤣", ":D"),
    ("😆", ":D"),
    ("😅", ":D"),
    ("😉", ";)"),
    ("😜", ";P"),
    ("😛", ":P"),
    ("😝", ":P"),
    ("😋", ":P"),
    ("😍", "<3"),
    ("😘", ":*"),
    ("😎", "8)"),
    ("😮", ":O"),
    ("😲", ":O"),
    ("😯", ":O"),
    ("😦", ":O"),
    ("🙁", ":("),
    ("☹", ":("),
    ("😞", ":("),
    ("😔", ":("),
    ("😟", ":("),
    ("😠", ">:("),
    ("😡", ">:("),
    ("😢", ":'("),
    ("😭", ":'("),
    ("😐", ":|"),
    ("😑", ":|"),
    ("😒", "-_-"),
    ("😕", ":/"),
    ("🤔", ":?"),
];

/// True for code points in the emoji blocks (pictographs, emoticons,
/// transport, supplemental symbols, regional indicators, misc symbols and
/// dingbats) and the joining machinery (ZWJ, variation selectors, keycap).
pub fn is_emoji_char(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1F0FF   // mahjong, dominoes, cards
        | 0x1F300..=0x1F5FF // misc symbols and pictographs
        | 0x1F600..=0x1F64F // emoticons
        | 0x1F680..=0x1F6FF // transport and map
        | 0x1F700..=0x1F77F // alchemical
        | 0x1F780..=0x1F7FF // geometric shapes extended
        | 0x1F800..=0x1F8FF // supplemental arrows-C
        | 0x1F900..=0x1F9FF // supplemental symbols and pictographs
        | 0x1FA00..=0x1FAFF // symbols and pictographs extended-A
        | 0x1F1E6..=0x1F1FF // regional indicators
        | 0x2600..=0x26FF   // misc symbols
        | 0x2700..=0x27BF   // dingbats
        | 0x2B00..=0x2BFF   // misc symbols and arrows (stars etc.)
        | 0xFE00..=0xFE0F   // variation selectors
        | 0x200D            // zero-width joiner
        | 0x20E3            // combining enclosing keycap
    )
}

/// Replace mapped emojis with their text emoticon (space-padded) and delete
/// unmapped emoji characters. Callers collapse whitespace afterwards.
pub fn replace_emojis(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    'outer: while !rest.is_empty() {
        for (emoji, emoticon) in EMOTICONS {
            if let Some(after) = rest.strip_prefix(emoji) {
                out.push(' ');
                out.push_str(emoticon);
                out.push(' ');
                rest = after;
                continue 'outer;
            }
        }
        let c = rest.chars().next().expect("non-empty rest");
        if !is_emoji_char(c) {
            out.push(c);
        }
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// True when the string contains nothing but emoji characters and whitespace.
pub fn is_emoji_only(text: &str) -> bool {
    let mut saw_emoji = false;
    for c in text.chars() {
        if c.is_whitespace() {
            continue;
        }
        if is_emoji_char(c) {
            saw_emoji = true;
        } else {
            return false;
        }
    }
    saw_emoji
}
