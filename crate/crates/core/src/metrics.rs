//! Edit-distance metrics and precision/recall/F arithmetic.
//!
//! CER and WER follow the usual definition used by common scorers: unit-cost
//! Levenshtein distance divided by the reference length, as a percentage. Character
//! units are Unicode scalar values by default; [`CharUnit::Grapheme`] counts a base
//! letter and its combining marks as one unit instead. Both arguments are trimmed of
//! trailing whitespace before scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("hypothesis and reference counts differ ({hyp} vs {reference})")]
    LengthMismatch { hyp: usize, reference: usize },
    #[error("invalid counts: correct={correct}, predicted={predicted}, gold={gold}")]
    InvalidCounts {
        correct: usize,
        predicted: usize,
        gold: usize,
    },
}

/// Symbol unit used by [`cer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharUnit {
    #[default]
    Codepoint,
    Grapheme,
}

/// Unit-cost edit distance between two symbol sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn char_units(s: &str, unit: CharUnit) -> Vec<&str> {
    let s = s.trim_end();
    match unit {
        CharUnit::Codepoint => s
            .char_indices()
            .map(|(i, c)| &s[i..i + c.len_utf8()])
            .collect(),
        CharUnit::Grapheme => text::graphemes(s),
    }
}

/// Edit distance and reference length in character units.
pub fn char_edits(hyp: &str, reference: &str, unit: CharUnit) -> (usize, usize) {
    let h = char_units(hyp, unit);
    let r = char_units(reference, unit);
    (levenshtein(&h, &r), r.len())
}

/// Edit distance and reference length in whitespace-separated tokens.
pub fn word_edits(hyp: &str, reference: &str) -> (usize, usize) {
    let h = text::tokens(hyp);
    let r = text::tokens(reference);
    (levenshtein(&h, &r), r.len())
}

/// Character error rate, in percent. May exceed 100.
pub fn cer(hyp: &str, reference: &str, unit: CharUnit) -> Result<f64, MetricsError> {
    let (d, n) = char_edits(hyp, reference, unit);
    rate(d, n)
}

/// Word error rate, in percent.
pub fn wer(hyp: &str, reference: &str) -> Result<f64, MetricsError> {
    let (d, n) = word_edits(hyp, reference);
    rate(d, n)
}

/// Corpus-level CER: summed distances over summed reference lengths.
pub fn corpus_cer<H, R>(hyps: &[H], refs: &[R], unit: CharUnit) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    corpus_rate(hyps, refs, |h, r| char_edits(h, r, unit))
}

/// Corpus-level WER: summed token distances over summed reference token counts.
pub fn corpus_wer<H, R>(hyps: &[H], refs: &[R]) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    corpus_rate(hyps, refs, word_edits)
}

fn corpus_rate<H, R, F>(hyps: &[H], refs: &[R], edits: F) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
    F: Fn(&str, &str) -> (usize, usize),
{
    if hyps.len() != refs.len() {
        return Err(MetricsError::LengthMismatch {
            hyp: hyps.len(),
            reference: refs.len(),
        });
    }
    let (d, n) = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| edits(h.as_ref(), r.as_ref()))
        .fold((0, 0), |(d, n), (dd, nn)| (d + dd, n + nn));
    rate(d, n)
}

fn rate(distance: usize, ref_len: usize) -> Result<f64, MetricsError> {
    if ref_len == 0 {
        return Err(MetricsError::EmptyReference);
    }
    Ok(100.0 * distance as f64 / ref_len as f64)
}

/// Precision, recall and balanced F-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Computes P/R/F from raw counts.
///
/// Empty sets count as perfect: precision is 1 when nothing was predicted, recall is 1
/// when there is nothing to find. F is 0 whenever `P + R = 0`.
pub fn prf(n_correct: usize, n_pred: usize, n_gold: usize) -> Result<Prf, MetricsError> {
    if n_correct > n_pred.min(n_gold) {
        return Err(MetricsError::InvalidCounts {
            correct: n_correct,
            predicted: n_pred,
            gold: n_gold,
        });
    }
    let precision = if n_pred == 0 {
        1.0
    } else {
        n_correct as f64 / n_pred as f64
    };
    let recall = if n_gold == 0 {
        1.0
    } else {
        n_correct as f64 / n_gold as f64
    };
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f,
    })
}

/// Two-decimal fixed formatting used in every rendered table.
pub fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}
