//! Tokenization shared by tf-idf and the bigram analysis.

use unicode_segmentation::UnicodeSegmentation;

/// Lowercased Unicode words, no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().unicode_words().map(str::to_owned).collect()
}

/// Adjacent token pairs joined by a single space.
pub fn bigrams(tokens: &[String]) -> Vec<String> {
    tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect()
}
