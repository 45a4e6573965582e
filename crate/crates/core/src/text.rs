//! Small text helpers shared by the other modules.

use unicode_segmentation::UnicodeSegmentation;

/// Extended grapheme clusters of `s`, in order.
pub fn graphemes(s: &str) -> Vec<&str> {
    s.graphemes(true).collect()
}

/// Number of extended grapheme clusters in `s`.
pub fn grapheme_len(s: &str) -> usize {
    s.graphemes(true).count()
}

pub fn is_combining_mark(c: char) -> bool {
    unicode_normalization::char::is_combining_mark(c)
}

/// True when every scalar value of `s` is a combining mark (and `s` is non-empty).
pub fn is_all_combining(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_combining_mark)
}

/// Removes every U+0020 SPACE from `s`.
pub fn remove_spaces(s: &str) -> String {
    s.chars().filter(|&c| c != ' ').collect()
}

/// Splits on whitespace runs, the tokenisation used everywhere a spaced line is read.
pub fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Byte offsets of grapheme boundaries in `s`, including `0` and `s.len()`.
pub(crate) fn grapheme_boundaries(s: &str) -> Vec<usize> {
    let mut out: Vec<usize> = s.grapheme_indices(true).map(|(i, _)| i).collect();
    out.push(s.len());
    out
}
