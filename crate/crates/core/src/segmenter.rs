//! Word segmentation of space-free text.
//!
//! Every gap between two grapheme clusters is classified as boundary / no boundary by a
//! logistic scorer over hashed character n-grams taken from a window around the gap.
//! Training is plain seeded SGD; after each epoch the model is scored on a dev set and
//! the best epoch (by boundary F) is kept.
//!
//! Decoding either thresholds each gap independently or, given a unigram word list,
//! runs a dynamic program over word splits that uses the gap scores as a prior.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::AbbreviationLexicon;
use crate::container::{self, ContainerError, ModelKind};
use crate::corpus::DatasetVariant;
use crate::metrics::{self, Prf};
use crate::text;

const PAD_LEFT: &str = "<s>";
const PAD_RIGHT: &str = "</s>";
const GRAM_SEP: char = '\u{1F}';

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("invalid segmenter config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training lines contain no spaces, so there are no gold boundaries")]
    NoSpaces,
    #[error("gap {gap} out of range for a line of {len} graphemes")]
    GapOutOfRange { gap: usize, len: usize },
    #[error("input to the segmenter already contains a space")]
    SpaceInInput,
    #[error("model has {found} weights, config expects {expected}")]
    WeightCount { expected: usize, found: usize },
    #[error(transparent)]
    Container(#[from] ContainerError),
}

fn default_restarts() -> usize {
    1
}

fn default_oov_penalty() -> f64 {
    -8.0
}

fn default_max_word_len() -> usize {
    24
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub window_radius: usize,
    pub ngram_orders: Vec<usize>,
    pub feature_space_bits: u32,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Boundary threshold on the sigmoid output, in (0, 1).
    pub threshold: f64,
    pub seed: u64,
    /// Independent training runs (seeds `seed`, `seed + 1`, ...); the best on dev wins.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Per-grapheme log-score of an out-of-lexicon word in lexicon decoding.
    #[serde(default = "default_oov_penalty")]
    pub oov_penalty: f64,
    /// Longest out-of-lexicon word considered by lexicon decoding, in graphemes.
    #[serde(default = "default_max_word_len")]
    pub max_word_len: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            window_radius: 5,
            ngram_orders: vec![1, 2, 3],
            feature_space_bits: 20,
            learning_rate: 0.01,
            epochs: 20,
            l2: 1e-6,
            threshold: 0.5,
            seed: 0,
            restarts: default_restarts(),
            oov_penalty: default_oov_penalty(),
            max_word_len: default_max_word_len(),
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmenterError> {
        let bad = |m: &str| Err(SegmenterError::InvalidConfig(m.to_string()));
        if self.window_radius < 1 {
            return bad("window_radius must be >= 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.restarts < 1 {
            return bad("restarts must be >= 1");
        }
        if self.ngram_orders.is_empty()
            || self
                .ngram_orders
                .iter()
                .any(|&n| n == 0 || n > 2 * self.window_radius)
        {
            return bad("ngram_orders must be non-empty and within 1..=2*window_radius");
        }
        if !(1..=28).contains(&self.feature_space_bits) {
            return bad("feature_space_bits must lie in 1..=28");
        }
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.l2.is_nan()
            || self.l2 < 0.0
        {
            return bad("learning_rate must be > 0 and l2 >= 0");
        }
        if self.max_word_len < 1 {
            return bad("max_word_len must be >= 1");
        }
        Ok(())
    }

    pub fn feature_space(&self) -> usize {
        1usize << self.feature_space_bits
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Human-readable feature keys for gap `gap` (between graphemes `gap` and `gap + 1`).
///
/// A key is `order|offset|gram`, where `offset` locates the n-gram's first grapheme:
/// `-1` is the grapheme just left of the gap, `+1` the one just right of it. Positions
/// outside the line read as `<s>` (left) or `</s>` (right).
pub fn gap_feature_keys(
    graphemes: &[&str],
    gap: usize,
    config: &SegmenterConfig,
) -> Result<Vec<String>, SegmenterError> {
    let len = graphemes.len();
    if gap + 1 >= len {
        return Err(SegmenterError::GapOutOfRange { gap, len });
    }
    let r = config.window_radius as isize;
    let g = gap as isize;
    let lo = g + 1 - r;
    let hi = g + r;
    let sym = |p: isize| -> &str {
        if p < 0 {
            PAD_LEFT
        } else if p as usize >= len {
            PAD_RIGHT
        } else {
            graphemes[p as usize]
        }
    };
    let mut keys = Vec::new();
    for &n in &config.ngram_orders {
        let n = n as isize;
        for start in lo..=hi - n + 1 {
            let offset = if start <= g { start - g - 1 } else { start - g };
            let mut gram = String::new();
            for p in start..start + n {
                if p > start {
                    gram.push(GRAM_SEP);
                }
                gram.push_str(sym(p));
            }
            keys.push(format!("{n}|{offset:+}|{gram}"));
        }
    }
    Ok(keys)
}

/// Hashed feature indices for a gap, sorted and deduplicated.
pub fn gap_features(
    graphemes: &[&str],
    gap: usize,
    config: &SegmenterConfig,
) -> Result<Vec<u32>, SegmenterError> {
    let mask = (config.feature_space() - 1) as u64;
    let mut idx: Vec<u32> = gap_feature_keys(graphemes, gap, config)?
        .iter()
        .map(|k| (fnv1a(k.as_bytes()) & mask) as u32)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

/// A labelled gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<u32>,
    pub label: bool,
}

/// Splits a spaced line into its unspaced form and the gap indices that carry a space.
///
/// A space directly before a combining mark cannot be represented as a gap between
/// grapheme clusters and is dropped.
pub fn gold_boundaries(spaced: &str) -> (String, BTreeSet<usize>) {
    let mut unspaced = String::with_capacity(spaced.len());
    let mut space_before: BTreeSet<usize> = BTreeSet::new();
    let mut pending = false;
    for c in spaced.chars() {
        if c == ' ' {
            pending = true;
            continue;
        }
        if pending && !unspaced.is_empty() {
            space_before.insert(unspaced.len());
        }
        pending = false;
        unspaced.push(c);
    }
    let bounds = text::grapheme_boundaries(&unspaced);
    let gaps = bounds
        .iter()
        .enumerate()
        .filter(|(_, off)| space_before.contains(off))
        .map(|(k, _)| k - 1)
        .collect();
    (unspaced, gaps)
}

fn line_examples(spaced: &str, config: &SegmenterConfig) -> Vec<Example> {
    let (unspaced, gold) = gold_boundaries(spaced);
    let g = text::graphemes(&unspaced);
    (0..g.len().saturating_sub(1))
        .map(|gap| Example {
            features: gap_features(&g, gap, config).expect("gap in range"),
            label: gold.contains(&gap),
        })
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn raw_score(weights: &[f64], bias: f64, features: &[u32]) -> f64 {
    bias + features.iter().map(|&f| weights[f as usize]).sum::<f64>()
}

/// Mean logistic loss over `batch` plus `l2 / 2 * ||w||²`.
pub fn batch_objective(weights: &[f64], bias: f64, batch: &[Example], l2: f64) -> f64 {
    let n = batch.len().max(1) as f64;
    let data: f64 = batch
        .iter()
        .map(|ex| {
            let z = raw_score(weights, bias, &ex.features);
            softplus(z) - if ex.label { z } else { 0.0 }
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Exact gradient of [`batch_objective`] with respect to the weights and the bias.
pub fn batch_gradient(weights: &[f64], bias: f64, batch: &[Example], l2: f64) -> (Vec<f64>, f64) {
    let n = batch.len().max(1) as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_bias = 0.0;
    for ex in batch {
        let residual =
            sigmoid(raw_score(weights, bias, &ex.features)) - f64::from(u8::from(ex.label));
        for &f in &ex.features {
            grad[f as usize] += residual / n;
        }
        grad_bias += residual / n;
    }
    (grad, grad_bias)
}

/// Boundary-level P/R/F plus the raw counts behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegEvalResult {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_gold: usize,
    pub n_pred: usize,
    pub n_correct: usize,
}

impl SegEvalResult {
    pub fn from_counts(n_correct: usize, n_pred: usize, n_gold: usize) -> Self {
        let Prf {
            precision,
            recall,
            f,
        } = metrics::prf(n_correct, n_pred, n_gold).expect("counts come from set intersection");
        SegEvalResult {
            f_score: f,
            precision,
            recall,
            n_gold,
            n_pred,
            n_correct,
        }
    }
}

/// Unigram word counts used by lexicon-constrained decoding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordLexicon {
    counts: BTreeMap<String, u64>,
    total: u64,
    longest: usize,
}

impl WordLexicon {
    pub fn from_counts<'a>(counts: impl IntoIterator<Item = (&'a str, u64)>) -> Self {
        let mut lex = WordLexicon::default();
        for (w, n) in counts {
            lex.add(w, n);
        }
        lex
    }

    pub fn add(&mut self, word: &str, count: u64) {
        if count == 0 || word.is_empty() {
            return;
        }
        *self.counts.entry(word.to_string()).or_default() += count;
        self.total += count;
        self.longest = self.longest.max(text::grapheme_len(word));
    }

    /// Words of the abbreviated side of an abbreviation lexicon.
    pub fn from_abbreviations(lex: &AbbreviationLexicon) -> Self {
        Self::from_counts(lex.abbr_counts())
    }

    /// Words of the expanded side of an abbreviation lexicon.
    pub fn from_expansions(lex: &AbbreviationLexicon) -> Self {
        Self::from_counts(lex.exp_counts())
    }

    /// Whitespace tokens of a spaced variant.
    pub fn from_variant(variant: &DatasetVariant) -> Self {
        let mut lex = WordLexicon::default();
        for line in &variant.lines {
            for t in text::tokens(line) {
                lex.add(t, 1);
            }
        }
        lex
    }

    pub fn log_prob(&self, word: &str) -> Option<f64> {
        self.counts
            .get(word)
            .map(|&n| (n as f64 / self.total as f64).ln())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SegmentMode<'a> {
    /// Boundary wherever the gap probability exceeds the model threshold.
    Threshold,
    /// Best word split under a unigram lexicon, with gap scores as a prior.
    LexiconDp(&'a WordLexicon),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterModel {
    pub config: SegmenterConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// SHA-256 of the training lines.
    pub trained_on: String,
    /// Epoch (1-based) of the retained snapshot.
    pub best_epoch: usize,
    /// Dev F of the retained snapshot.
    pub dev_f: f64,
}

#[derive(Serialize, Deserialize)]
struct SegmenterHeader {
    config: SegmenterConfig,
    bias: f64,
    trained_on: String,
    best_epoch: usize,
    dev_f: f64,
}

struct DevLine {
    examples: Vec<Example>,
}

fn count_predictions(
    weights: &[f64],
    bias: f64,
    threshold: f64,
    examples: &[Example],
) -> (usize, usize, usize) {
    let mut correct = 0;
    let mut pred = 0;
    let mut gold = 0;
    for ex in examples {
        let p = sigmoid(raw_score(weights, bias, &ex.features)) > threshold;
        pred += usize::from(p);
        gold += usize::from(ex.label);
        correct += usize::from(p && ex.label);
    }
    (correct, pred, gold)
}

fn fingerprint(lines: &[String]) -> String {
    let mut buf = Vec::new();
    for l in lines {
        buf.extend_from_slice(l.as_bytes());
        buf.push(b'\n');
    }
    crate::sha256_hex(&buf)
}

/// Fits a segmenter on spaced `train` lines, selecting the epoch with the best F on
/// `dev` (or on the training gaps when `dev` is empty).
pub fn train_segmenter(
    train: &DatasetVariant,
    dev: &DatasetVariant,
    config: &SegmenterConfig,
) -> Result<SegmenterModel, SegmenterError> {
    config.validate()?;
    if train.lines.iter().all(|l| l.trim().is_empty()) {
        return Err(SegmenterError::EmptyTrainingSet);
    }
    let train_ex: Vec<Example> = train
        .lines
        .iter()
        .flat_map(|l| line_examples(l, config))
        .collect();
    if !train_ex.iter().any(|e| e.label) {
        return Err(SegmenterError::NoSpaces);
    }
    let dev_lines: Vec<DevLine> = dev
        .lines
        .iter()
        .map(|l| DevLine {
            examples: line_examples(l, config),
        })
        .collect();
    let dev_ex: Vec<Example> = dev_lines.into_iter().flat_map(|d| d.examples).collect();
    let selection = if dev_ex.is_empty() {
        &train_ex
    } else {
        &dev_ex
    };
    let trained_on = fingerprint(&train.lines);

    let mut best: Option<SegmenterModel> = None;
    for restart in 0..config.restarts {
        let seed = config.seed.wrapping_add(restart as u64);
        let model = train_run(&train_ex, selection, config, seed, &trained_on);
        if best.as_ref().is_none_or(|b| model.dev_f > b.dev_f) {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn train_run(
    train: &[Example],
    selection: &[Example],
    config: &SegmenterConfig,
    seed: u64,
    trained_on: &str,
) -> SegmenterModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0f64; config.feature_space()];
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let lr = config.learning_rate;
    let mut best: Option<(f64, usize, Vec<f64>, f64)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let ex = &train[i];
            let residual =
                sigmoid(raw_score(&weights, bias, &ex.features)) - f64::from(u8::from(ex.label));
            // L2 is applied lazily, to the active coordinates only.
            for &f in &ex.features {
                let w = &mut weights[f as usize];
                *w -= lr * (residual + config.l2 * *w);
            }
            bias -= lr * residual;
        }
        let (c, p, g) = count_predictions(&weights, bias, config.threshold, selection);
        let f = SegEvalResult::from_counts(c, p, g).f_score;
        if best.as_ref().is_none_or(|b| f > b.0) {
            best = Some((f, epoch, weights.clone(), bias));
        }
    }
    let (dev_f, best_epoch, weights, bias) = best.expect("epochs >= 1");
    SegmenterModel {
        config: config.clone(),
        weights,
        bias,
        trained_on: trained_on.to_string(),
        best_epoch,
        dev_f,
    }
}

impl SegmenterModel {
    /// Boundary probability of every gap of an unspaced grapheme sequence.
    pub fn gap_probabilities(&self, graphemes: &[&str]) -> Vec<f64> {
        (0..graphemes.len().saturating_sub(1))
            .map(|gap| {
                let f = gap_features(graphemes, gap, &self.config).expect("gap in range");
                sigmoid(raw_score(&self.weights, self.bias, &f))
            })
            .collect()
    }

    /// Predicted boundary gaps of `unspaced`.
    pub fn boundaries(
        &self,
        unspaced: &str,
        mode: SegmentMode<'_>,
    ) -> Result<Vec<usize>, SegmenterError> {
        if unspaced.contains(' ') {
            return Err(SegmenterError::SpaceInInput);
        }
        let g = text::graphemes(unspaced);
        let probs = self.gap_probabilities(&g);
        Ok(match mode {
            SegmentMode::Threshold => probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > self.config.threshold)
                .map(|(i, _)| i)
                .collect(),
            SegmentMode::LexiconDp(lex) => self.lexicon_dp(&g, &probs, lex),
        })
    }

    fn lexicon_dp(&self, g: &[&str], probs: &[f64], lex: &WordLexicon) -> Vec<usize> {
        let n = g.len();
        if n == 0 {
            return Vec::new();
        }
        const EPS: f64 = 1e-12;
        let log_yes: Vec<f64> = probs.iter().map(|p| p.clamp(EPS, 1.0 - EPS).ln()).collect();
        // prefix sums of log P(no boundary)
        let mut no_prefix = vec![0.0; probs.len() + 1];
        for (k, p) in probs.iter().enumerate() {
            no_prefix[k + 1] = no_prefix[k] + (1.0 - p.clamp(EPS, 1.0 - EPS)).ln();
        }
        let max_len = self.config.max_word_len.max(lex.longest);
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        let mut back = vec![0usize; n + 1];
        best[0] = 0.0;
        for j in 1..=n {
            for i in j.saturating_sub(max_len)..j {
                if best[i] == f64::NEG_INFINITY {
                    continue;
                }
                let word: String = g[i..j].concat();
                let word_score = lex
                    .log_prob(&word)
                    .unwrap_or(self.config.oov_penalty * (j - i) as f64);
                // gaps i..j-1 lie inside the word; gap j-1 closes it unless j == n
                let inner = no_prefix[j - 1] - no_prefix[i];
                let close = if j < n { log_yes[j - 1] } else { 0.0 };
                let s = best[i] + word_score + inner + close;
                if s > best[j] {
                    best[j] = s;
                    back[j] = i;
                }
            }
        }
        let mut cuts = Vec::new();
        let mut j = n;
        while j > 0 {
            let i = back[j];
            if i > 0 {
                cuts.push(i - 1);
            }
            j = i;
        }
        cuts.reverse();
        cuts
    }

    /// Inserts spaces into `unspaced`. Removing the spaces again gives back the input.
    pub fn segment(&self, unspaced: &str, mode: SegmentMode<'_>) -> Result<String, SegmenterError> {
        let cuts: BTreeSet<usize> = self.boundaries(unspaced, mode)?.into_iter().collect();
        let mut out = String::with_capacity(unspaced.len() + cuts.len());
        for (i, g) in text::graphemes(unspaced).into_iter().enumerate() {
            out.push_str(g);
            if cuts.contains(&i) {
                out.push(' ');
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = SegmenterHeader {
            config: self.config.clone(),
            bias: self.bias,
            trained_on: self.trained_on.clone(),
            best_epoch: self.best_epoch,
            dev_f: self.dev_f,
        };
        let header = serde_json::to_vec(&header).expect("header serialises");
        let nonzero: Vec<(u32, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i as u32, w))
            .collect();
        let mut payload = Vec::with_capacity(8 + 12 * nonzero.len());
        payload.extend_from_slice(&(nonzero.len() as u64).to_le_bytes());
        for (i, w) in nonzero {
            payload.extend_from_slice(&i.to_le_bytes());
            payload.extend_from_slice(&w.to_le_bytes());
        }
        container::encode(ModelKind::Segmenter, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SegmenterError> {
        let (header, payload) = container::decode(bytes, ModelKind::Segmenter)?;
        let header: SegmenterHeader =
            serde_json::from_slice(header).map_err(ContainerError::Header)?;
        header.config.validate()?;
        let size = header.config.feature_space();
        let bad = |m: &str| ContainerError::Payload(m.to_string());
        if payload.len() < 8 {
            return Err(bad("missing weight count").into());
        }
        let count = u64::from_le_bytes(payload[..8].try_into().expect("8 bytes")) as usize;
        let body = &payload[8..];
        if body.len() != count.saturating_mul(12) {
            return Err(bad("weight table length mismatch").into());
        }
        let mut weights = vec![0.0; size];
        for chunk in body.chunks_exact(12) {
            let i = u32::from_le_bytes(chunk[..4].try_into().expect("4 bytes")) as usize;
            let w = f64::from_le_bytes(chunk[4..].try_into().expect("8 bytes"));
            if i >= size {
                return Err(SegmenterError::WeightCount {
                    expected: size,
                    found: i + 1,
                });
            }
            weights[i] = w;
        }
        Ok(SegmenterModel {
            config: header.config,
            weights,
            bias: header.bias,
            trained_on: header.trained_on,
            best_epoch: header.best_epoch,
            dev_f: header.dev_f,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SegmenterError> {
        std::fs::write(path, self.to_bytes()).map_err(ContainerError::Io)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmenterError> {
        let bytes = std::fs::read(path).map_err(ContainerError::Io)?;
        Self::from_bytes(&bytes)
    }

    /// Short identifier of the model: a digest of its serialised form.
    pub fn fingerprint(&self) -> String {
        crate::sha256_hex(&self.to_bytes())[..16].to_string()
    }
}

/// Scores predicted against gold boundaries over all gold lines, per gap.
pub fn evaluate_segmenter(
    model: &SegmenterModel,
    gold: &DatasetVariant,
    mode: SegmentMode<'_>,
) -> Result<SegEvalResult, SegmenterError> {
    let (mut correct, mut pred, mut n_gold) = (0, 0, 0);
    for line in &gold.lines {
        let (unspaced, gold_gaps) = gold_boundaries(line);
        let predicted: BTreeSet<usize> = model.boundaries(&unspaced, mode)?.into_iter().collect();
        correct += predicted.intersection(&gold_gaps).count();
        pred += predicted.len();
        n_gold += gold_gaps.len();
    }
    Ok(SegEvalResult::from_counts(correct, pred, n_gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VariantKind;
    use proptest::prelude::*;

    fn small_config() -> SegmenterConfig {
        SegmenterConfig {
            feature_space_bits: 16,
            ..Default::default()
        }
    }

    fn variant(lines: &[&str]) -> DatasetVariant {
        DatasetVariant {
            kind: VariantKind::Exp1,
            lines: lines.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn smallest_feature_set() {
        let cfg = SegmenterConfig {
            window_radius: 1,
            ngram_orders: vec![1],
            ..Default::default()
        };
        let keys = gap_feature_keys(&["a", "b"], 0, &cfg).unwrap();
        assert_eq!(keys, ["1|-1|a", "1|+1|b"]);
        assert_eq!(
            gap_features(&["a", "b"], 0, &cfg).unwrap(),
            gap_features(&["a", "b"], 0, &cfg).unwrap()
        );
    }

    #[test]
    fn edge_windows_are_padded() {
        let cfg = SegmenterConfig {
            window_radius: 2,
            ngram_orders: vec![1],
            ..Default::default()
        };
        let keys = gap_feature_keys(&["a", "b"], 0, &cfg).unwrap();
        assert_eq!(keys, ["1|-2|<s>", "1|-1|a", "1|+1|b", "1|+2|</s>"]);
        let cfg = SegmenterConfig {
            window_radius: 1,
            ngram_orders: vec![2],
            ..Default::default()
        };
        assert_eq!(
            gap_feature_keys(&["a", "b"], 0, &cfg).unwrap(),
            ["2|-1|a\u{1F}b"]
        );
    }

    #[test]
    fn gap_range_checked() {
        let cfg = SegmenterConfig::default();
        assert!(matches!(
            gap_feature_keys(&["a", "b"], 1, &cfg),
            Err(SegmenterError::GapOutOfRange { gap: 1, len: 2 })
        ));
        assert!(gap_feature_keys(&["a"], 0, &cfg).is_err());
    }

    #[test]
    fn gold_boundaries_follow_graphemes() {
        let (u, g) = gold_boundaries("pro domo dn\u{303}i");
        assert_eq!(u, "prodomodn\u{303}i");
        assert_eq!(g.into_iter().collect::<Vec<_>>(), [2, 6]);
        let (u, g) = gold_boundaries("  a  b ");
        assert_eq!(u, "ab");
        assert_eq!(g.into_iter().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn config_validation() {
        assert!(SegmenterConfig::default().validate().is_ok());
        for cfg in [
            SegmenterConfig {
                window_radius: 0,
                ..Default::default()
            },
            SegmenterConfig {
                threshold: 1.0,
                ..Default::default()
            },
            SegmenterConfig {
                threshold: 0.0,
                ..Default::default()
            },
            SegmenterConfig {
                epochs: 0,
                ..Default::default()
            },
            SegmenterConfig {
                ngram_orders: vec![],
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn training_errors() {
        let cfg = small_config();
        assert!(matches!(
            train_segmenter(&variant(&[]), &variant(&[]), &cfg),
            Err(SegmenterError::EmptyTrainingSet)
        ));
        assert!(matches!(
            train_segmenter(&variant(&["abc", "def"]), &variant(&[]), &cfg),
            Err(SegmenterError::NoSpaces)
        ));
    }

    fn toy_model() -> SegmenterModel {
        let line = "in principio erat verbum";
        let train = variant(&vec![line; 200]);
        let dev = variant(&[line]);
        train_segmenter(&train, &dev, &small_config()).unwrap()
    }

    #[test]
    fn separable_toy_task() {
        let model = toy_model();
        assert_eq!(model.dev_f, 1.0);
        let dev = variant(&["in principio erat verbum"]);
        let r = evaluate_segmenter(&model, &dev, SegmentMode::Threshold).unwrap();
        assert_eq!(r.f_score, 1.0);
        assert_eq!(
            model
                .segment("inprincipioeratverbum", SegmentMode::Threshold)
                .unwrap(),
            "in principio erat verbum"
        );
        assert_eq!(model.segment("", SegmentMode::Threshold).unwrap(), "");
        assert!(matches!(
            model.segment("in principio", SegmentMode::Threshold),
            Err(SegmenterError::SpaceInInput)
        ));
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let a = toy_model();
        let b = toy_model();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn restarts_pick_best_run() {
        let line = "in principio erat verbum";
        let cfg = SegmenterConfig {
            restarts: 3,
            epochs: 2,
            ..small_config()
        };
        let m = train_segmenter(&variant(&vec![line; 20]), &variant(&[line]), &cfg).unwrap();
        assert!(m.dev_f > 0.0);
        assert!(m.best_epoch <= 2);
    }

    #[test]
    fn model_bytes_round_trip() {
        let m = toy_model();
        let back = SegmenterModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        let mut bytes = m.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(SegmenterModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn lexicon_decoding() {
        let model = toy_model();
        let lex = WordLexicon::from_counts([("pro", 3), ("domo", 2), ("domini", 2)]);
        // The toy model knows nothing about these words; the lexicon carries the split.
        let out = model
            .segment("prodomodomini", SegmentMode::LexiconDp(&lex))
            .unwrap();
        assert_eq!(out, "pro domo domini");
        assert_eq!(model.segment("", SegmentMode::LexiconDp(&lex)).unwrap(), "");
    }

    #[test]
    fn evaluation_conventions() {
        assert_eq!(SegEvalResult::from_counts(0, 0, 3).f_score, 0.0);
        assert_eq!(SegEvalResult::from_counts(0, 0, 3).precision, 1.0);
        let r = SegEvalResult::from_counts(1, 1, 2);
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        assert!((r.f_score - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = SegmenterConfig {
            feature_space_bits: 8,
            ..Default::default()
        };
        let batch: Vec<Example> = ["ab cd", "abc d", "a bcd"]
            .iter()
            .flat_map(|l| line_examples(l, &cfg))
            .collect();
        let weights: Vec<f64> = (0..cfg.feature_space())
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 100.0)
            .collect();
        let bias = 0.3;
        let l2 = 0.01;
        let (grad, grad_bias) = batch_gradient(&weights, bias, &batch, l2);
        let h = 1e-6;
        for &k in &[
            batch[0].features[0] as usize,
            batch[1].features[3] as usize,
            0,
            255,
        ] {
            let mut plus = weights.clone();
            plus[k] += h;
            let mut minus = weights.clone();
            minus[k] -= h;
            let numeric = (batch_objective(&plus, bias, &batch, l2)
                - batch_objective(&minus, bias, &batch, l2))
                / (2.0 * h);
            let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-8);
            assert!(rel < 1e-4, "coordinate {k}: {numeric} vs {}", grad[k]);
        }
        let numeric = (batch_objective(&weights, bias + h, &batch, l2)
            - batch_objective(&weights, bias - h, &batch, l2))
            / (2.0 * h);
        assert!((numeric - grad_bias).abs() / grad_bias.abs().max(1e-8) < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn segmentation_preserves_characters(s in "[a-dñ&ꝯ.\u{303}\u{304}]{0,30}") {
            let model = toy_model_cached();
            for mode in [SegmentMode::Threshold, SegmentMode::LexiconDp(&WordLexicon::from_counts([("ab", 1), ("c", 1)]))] {
                let out = model.segment(&s, mode).unwrap();
                prop_assert_eq!(text::remove_spaces(&out), s.clone());
                // never a space before a combining mark
                prop_assert!(!out.chars().zip(out.chars().skip(1)).any(|(a, b)| a == ' ' && text::is_combining_mark(b)));
            }
        }

        #[test]
        fn raising_threshold_never_adds_boundaries(s in "[a-z]{0,30}", t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let mut model = toy_model_cached().clone();
            model.config.threshold = lo;
            let n_lo = model.boundaries(&s, SegmentMode::Threshold).unwrap().len();
            model.config.threshold = hi;
            let n_hi = model.boundaries(&s, SegmentMode::Threshold).unwrap().len();
            prop_assert!(n_hi <= n_lo);
        }
    }

    fn toy_model_cached() -> &'static SegmenterModel {
        static MODEL: std::sync::OnceLock<SegmenterModel> = std::sync::OnceLock::new();
        MODEL.get_or_init(toy_model)
    }
}
