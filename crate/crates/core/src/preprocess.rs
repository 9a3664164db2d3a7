//! Tweet normalization and whitespace tokenization.
//!
//! Normalization lowercases the text, deletes mentions, URLs and emoji,
//! and collapses whitespace. Hashtags and the `RT` marker are kept as-is.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// `@` followed by word characters, not preceded by a word character.
pub const MENTION_PATTERN: &str = r"\B@\w+";
/// `http://`/`https://` links and bare `www.` tokens.
pub const URL_PATTERN: &str = r"https?://\S+|\bwww\.\S+";

/// Codepoint ranges treated as emoji: pictographs, emoticons, transport
/// and map symbols, supplemental pictographs, misc symbols, dingbats,
/// regional indicators, variation selectors and the zero-width joiner.
pub const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x200D, 0x200D),
    (0x2600, 0x26FF),
    (0x2700, 0x27BF),
    (0xFE00, 0xFE0F),
    (0x1F1E6, 0x1F1FF),
    (0x1F300, 0x1F5FF),
    (0x1F600, 0x1F64F),
    (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF),
    (0x1FA70, 0x1FAFF),
];

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(MENTION_PATTERN).unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(URL_PATTERN).unwrap());

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

/// Lowercases one character without ever expanding it to several.
fn lower(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Normalizes raw text. Total, idempotent, and never lengthens the input
/// (measured in characters).
pub fn normalize(text: &str) -> String {
    let mut s: String = text.chars().map(lower).collect();
    // Deleting one match can expose another (e.g. "!@a@b"), so iterate.
    loop {
        let stripped: String = s.chars().filter(|&c| !is_emoji(c)).collect();
        let stripped = URL.replace_all(&stripped, "");
        let stripped = MENTION.replace_all(&stripped, "").into_owned();
        if stripped == s {
            break;
        }
        s = stripped;
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub source_id: String,
    pub tokens: Vec<String>,
}

/// Splits on whitespace; punctuation stays attached to its token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn tokenize_document(source_id: &str, normalized: &str) -> TokenSequence {
    TokenSequence {
        source_id: source_id.to_string(),
        tokens: tokenize(normalized),
    }
}

/// A document after normalization and tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedText {
    pub normalized: String,
    pub tokens: Vec<String>,
}

impl ProcessedText {
    pub fn new(raw: &str) -> Self {
        let normalized = normalize(raw);
        let tokens = tokenize(&normalized);
        ProcessedText { normalized, tokens }
    }
}
