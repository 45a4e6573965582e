//! Contextual abbreviation expansion.
//!
//! Each abbreviated token gets a candidate list (lexicon targets when the token was
//! seen in training, sign-rule expansions otherwise). A left-to-right beam search then
//! picks one candidate per token, scoring each step as
//!
//! ```text
//! λ · ln P_lex(e | a) + (1 − λ) · ln P_lm(e | previous n−1 outputs)
//! ```
//!
//! `P_lex` is the add-α smoothed count distribution over a token's observed targets
//! (uniform over candidates for unseen tokens); `P_lm` is an interpolated Witten-Bell
//! n-gram model over expanded tokens.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbrev::{self, AbbreviationLexicon, SignRule};
use crate::container::{self, ContainerError, ModelKind};
use crate::corpus::AlignedCorpus;

const BOS: &str = "<s>";
const SEP: char = '\u{1F}';

#[derive(Debug, Error)]
pub enum NormalizerError {
    #[error("invalid normalizer config: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyTrainingSet,
    #[error("token {index} is empty")]
    EmptyToken { index: usize },
    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// Interpolated Witten-Bell n-gram model over expanded tokens.
///
/// Histories are padded with `<s>`. The distribution for any history covers the
/// vocabulary plus one unknown-word symbol and sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LmRepr", into = "LmRepr")]
pub struct ContextLM {
    order: usize,
    /// n-gram (k ≤ order) counts, tokens joined by U+001F.
    counts: BTreeMap<String, u64>,
    /// Σ_w c(h, w) for every history h.
    context_totals: BTreeMap<String, u64>,
    /// Number of distinct words seen after h.
    context_types: BTreeMap<String, u64>,
    vocab: BTreeSet<String>,
    tokens: u64,
}

#[derive(Serialize, Deserialize)]
struct LmRepr {
    order: usize,
    counts: BTreeMap<String, u64>,
}

impl From<LmRepr> for ContextLM {
    fn from(r: LmRepr) -> Self {
        let mut lm = ContextLM::empty(r.order);
        for (gram, n) in r.counts {
            lm.add_gram(&gram, n);
        }
        lm
    }
}

impl From<ContextLM> for LmRepr {
    fn from(lm: ContextLM) -> Self {
        LmRepr {
            order: lm.order,
            counts: lm.counts,
        }
    }
}

fn join(parts: &[&str]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push(SEP);
        }
        s.push_str(p);
    }
    s
}

impl ContextLM {
    fn empty(order: usize) -> Self {
        ContextLM {
            order: order.max(1),
            counts: BTreeMap::new(),
            context_totals: BTreeMap::new(),
            context_types: BTreeMap::new(),
            vocab: BTreeSet::new(),
            tokens: 0,
        }
    }

    fn add_gram(&mut self, gram: &str, n: u64) {
        let (history, word) = match gram.rfind(SEP) {
            Some(i) => (&gram[..i], &gram[i + SEP.len_utf8()..]),
            None => ("", gram),
        };
        let slot = self.counts.entry(gram.to_string()).or_default();
        let new_type = *slot == 0;
        *slot += n;
        *self.context_totals.entry(history.to_string()).or_default() += n;
        if new_type {
            *self.context_types.entry(history.to_string()).or_default() += 1;
        }
        if history.is_empty() {
            self.vocab.insert(word.to_string());
            self.tokens += n;
        }
    }

    /// Estimates the model from token sequences.
    pub fn train<'a, I, S>(sentences: I, order: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a str>,
    {
        let mut lm = ContextLM::empty(order);
        let order = lm.order;
        for sentence in sentences {
            let mut padded: Vec<&str> = vec![BOS; order - 1];
            padded.extend(sentence);
            for i in order - 1..padded.len() {
                for k in 1..=order {
                    lm.add_gram(&join(&padded[i + 1 - k..=i]), 1);
                }
            }
        }
        lm
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains(word)
    }

    /// Raw count of an n-gram given as tokens.
    pub fn count(&self, gram: &[&str]) -> u64 {
        self.counts.get(&join(gram)).copied().unwrap_or(0)
    }

    /// Total count of events observed after history `h`.
    pub fn context_total(&self, history: &[&str]) -> u64 {
        self.context_totals
            .get(&join(history))
            .copied()
            .unwrap_or(0)
    }

    /// All stored n-grams with their counts.
    pub fn grams(&self) -> impl Iterator<Item = (Vec<&str>, u64)> {
        self.counts
            .iter()
            .map(|(g, &n)| (g.split(SEP).collect(), n))
    }

    /// P(word | history). Only the last `order - 1` history tokens are used; shorter
    /// histories are padded with `<s>`. Unknown words share the unknown-symbol mass.
    pub fn prob(&self, word: &str, history: &[&str]) -> f64 {
        let need = self.order - 1;
        let mut ctx: Vec<&str> = Vec::with_capacity(need);
        if history.len() < need {
            ctx.extend(std::iter::repeat_n(BOS, need - history.len()));
            ctx.extend_from_slice(history);
        } else {
            ctx.extend_from_slice(&history[history.len() - need..]);
        }
        let known = self.vocab.contains(word);
        self.wb(word, known, &ctx)
    }

    fn wb(&self, word: &str, known: bool, ctx: &[&str]) -> f64 {
        if ctx.is_empty() {
            let v = self.vocab.len() as f64;
            let base = 1.0 / (v + 1.0);
            let n = self.tokens as f64;
            if n + v == 0.0 {
                return base;
            }
            let c = if known {
                self.count(&[word]) as f64
            } else {
                0.0
            };
            return (c + v * base) / (n + v);
        }
        let lower = self.wb(word, known, &ctx[1..]);
        let key = join(ctx);
        let total = self.context_totals.get(&key).copied().unwrap_or(0) as f64;
        if total == 0.0 {
            return lower;
        }
        let types = self.context_types.get(&key).copied().unwrap_or(0) as f64;
        let c = if known {
            self.counts
                .get(&format!("{key}{SEP}{word}"))
                .copied()
                .unwrap_or(0) as f64
        } else {
            0.0
        };
        (c + types * lower) / (total + types)
    }

    /// Probability of the unknown-word symbol after `history`.
    pub fn unk_prob(&self, history: &[&str]) -> f64 {
        // No vocabulary word contains the separator, so this is always out of vocabulary.
        self.prob("\u{1F}", history)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizerConfig {
    /// Weight of the lexicon term against the LM term, in [0, 1].
    pub lambda: f64,
    pub beam_width: usize,
    pub lm_order: usize,
    /// Additive smoothing of lexicon counts over a token's observed targets.
    pub lex_smoothing: f64,
    /// Cap on sign-rule candidates for an unseen token.
    pub max_candidates: usize,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        NormalizerConfig {
            lambda: 0.5,
            beam_width: 4,
            lm_order: 3,
            lex_smoothing: 0.1,
            max_candidates: 16,
        }
    }
}

impl NormalizerConfig {
    pub fn validate(&self) -> Result<(), NormalizerError> {
        let bad = |m: &str| Err(NormalizerError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.beam_width < 1 {
            return bad("beam_width must be >= 1");
        }
        if self.lm_order < 1 {
            return bad("lm_order must be >= 1");
        }
        if self.lex_smoothing.is_nan() || self.lex_smoothing <= 0.0 {
            return bad("lex_smoothing must be > 0");
        }
        if self.max_candidates < 1 {
            return bad("max_candidates must be >= 1");
        }
        Ok(())
    }
}

/// A candidate expansion with its lexical log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub form: String,
    pub log_lex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerModel {
    pub config: NormalizerConfig,
    pub lexicon: AbbreviationLexicon,
    pub rules: Vec<SignRule>,
    pub lm: ContextLM,
    /// SHA-256 of the serialised training corpus.
    pub trained_on: String,
}

pub fn train_normalizer(
    train: &AlignedCorpus,
    rules: Vec<SignRule>,
    config: &NormalizerConfig,
) -> Result<NormalizerModel, NormalizerError> {
    config.validate()?;
    if train.is_empty() {
        return Err(NormalizerError::EmptyTrainingSet);
    }
    let lexicon = abbrev::learn_lexicon(train);
    let lm = ContextLM::train(train.lines.iter().map(|l| l.exp_tokens()), config.lm_order);
    let trained_on = crate::sha256_hex(crate::corpus::serialize_corpus_to_string(train).as_bytes());
    Ok(NormalizerModel {
        config: config.clone(),
        lexicon,
        rules,
        lm,
        trained_on,
    })
}

#[derive(Serialize, Deserialize)]
struct NormalizerHeader {
    config: NormalizerConfig,
    trained_on: String,
}

#[derive(Serialize, Deserialize)]
struct NormalizerPayload {
    lexicon: AbbreviationLexicon,
    rules: Vec<SignRule>,
    lm: ContextLM,
}

impl NormalizerModel {
    /// Ranked candidates for `token`; never empty.
    pub fn scored_candidates(&self, token: &str) -> Vec<Candidate> {
        if self.lexicon.is_known(token) {
            let targets = self.lexicon.expansions_of(token);
            let alpha = self.config.lex_smoothing;
            let denom = self.lexicon.count_of(token) as f64 + alpha * targets.len() as f64;
            return targets
                .into_iter()
                .map(|(form, n)| Candidate {
                    form,
                    log_lex: ((n as f64 + alpha) / denom).ln(),
                })
                .collect();
        }
        let forms =
            abbrev::compositional_candidates(token, &self.rules, self.config.max_candidates);
        let (in_vocab, out_vocab): (Vec<String>, Vec<String>) = forms
            .into_iter()
            .filter(|f| f != token)
            .partition(|f| self.lm.contains(f));
        let mut ordered = in_vocab;
        ordered.extend(out_vocab);
        ordered.push(token.to_string());
        let log_uniform = -(ordered.len() as f64).ln();
        ordered
            .into_iter()
            .map(|form| Candidate {
                form,
                log_lex: log_uniform,
            })
            .collect()
    }

    pub fn candidates(&self, token: &str) -> Vec<String> {
        self.scored_candidates(token)
            .into_iter()
            .map(|c| c.form)
            .collect()
    }

    fn step_score(&self, cand: &Candidate, history: &[&str]) -> f64 {
        let lambda = self.config.lambda;
        let lm = self.lm.prob(&cand.form, history).ln();
        let mut s = lambda * cand.log_lex;
        if lambda < 1.0 {
            s += (1.0 - lambda) * lm;
        }
        s
    }

    /// Score of a complete output sequence, or `-inf` if some output is not a
    /// candidate of its token.
    pub fn score_sequence(&self, tokens: &[&str], outputs: &[&str]) -> f64 {
        if tokens.len() != outputs.len() {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for (i, (tok, out)) in tokens.iter().zip(outputs).enumerate() {
            let cands = self.scored_candidates(tok);
            let Some(c) = cands.iter().find(|c| c.form == *out) else {
                return f64::NEG_INFINITY;
            };
            total += self.step_score(c, &outputs[..i]);
        }
        total
    }

    /// Expands `tokens` with the configured beam width.
    pub fn normalize_sequence(&self, tokens: &[&str]) -> Result<Vec<String>, NormalizerError> {
        self.decode(tokens, self.config.beam_width)
    }

    /// Beam search with an explicit width; returns the best full hypothesis.
    pub fn decode(
        &self,
        tokens: &[&str],
        beam_width: usize,
    ) -> Result<Vec<String>, NormalizerError> {
        if let Some(index) = tokens.iter().position(|t| t.is_empty()) {
            return Err(NormalizerError::EmptyToken { index });
        }
        let width = beam_width.max(1);
        let mut beam: Vec<(Vec<String>, f64)> = vec![(Vec::with_capacity(tokens.len()), 0.0)];
        for tok in tokens {
            let cands = self.scored_candidates(tok);
            let mut next: Vec<(Vec<String>, f64)> = Vec::with_capacity(beam.len() * cands.len());
            for (outs, score) in &beam {
                let history: Vec<&str> = outs.iter().map(String::as_str).collect();
                for c in &cands {
                    let s = score + self.step_score(c, &history);
                    let mut o = outs.clone();
                    o.push(c.form.clone());
                    next.push((o, s));
                }
            }
            // stable: equal scores keep hypothesis order, then candidate rank
            next.sort_by(|a, b| b.1.total_cmp(&a.1));
            next.truncate(width);
            beam = next;
        }
        Ok(beam.swap_remove(0).0)
    }

    /// Normalises one spaced line; an empty line stays empty.
    pub fn normalize_line(&self, line: &str) -> Result<String, NormalizerError> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            return Ok(String::new());
        }
        Ok(self.normalize_sequence(&tokens)?.join(" "))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&NormalizerHeader {
            config: self.config.clone(),
            trained_on: self.trained_on.clone(),
        })
        .expect("header serialises");
        let payload = serde_json::to_vec(&NormalizerPayload {
            lexicon: self.lexicon.clone(),
            rules: self.rules.clone(),
            lm: self.lm.clone(),
        })
        .expect("payload serialises");
        container::encode(ModelKind::Normalizer, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NormalizerError> {
        let (header, payload) = container::decode(bytes, ModelKind::Normalizer)?;
        let header: NormalizerHeader =
            serde_json::from_slice(header).map_err(ContainerError::Header)?;
        header.config.validate()?;
        let payload: NormalizerPayload =
            serde_json::from_slice(payload).map_err(|e| ContainerError::Payload(e.to_string()))?;
        Ok(NormalizerModel {
            config: header.config,
            lexicon: payload.lexicon,
            rules: payload.rules,
            lm: payload.lm,
            trained_on: header.trained_on,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NormalizerError> {
        std::fs::write(path, self.to_bytes()).map_err(ContainerError::Io)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NormalizerError> {
        let bytes = std::fs::read(path).map_err(ContainerError::Io)?;
        Self::from_bytes(&bytes)
    }

    pub fn fingerprint(&self) -> String {
        crate::sha256_hex(&self.to_bytes())[..16].to_string()
    }
}

/// Token accuracy overall and per category.
///
/// Categories, relative to the training lexicon: *known* tokens were seen in training,
/// *unknown* were not, *ambiguous* tokens are known with two or more distinct targets,
/// and *unknown target* tokens have a gold expansion never produced in training. An
/// empty category reports accuracy 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEvalResult {
    pub acc_all: f64,
    pub acc_known: f64,
    pub acc_unknown: f64,
    pub acc_ambiguous: f64,
    pub acc_unknown_target: f64,
    pub n_all: usize,
    pub n_known: usize,
    pub n_unknown: usize,
    pub n_ambiguous: usize,
    pub n_unknown_target: usize,
    pub correct_all: usize,
    pub correct_known: usize,
    pub correct_unknown: usize,
    pub correct_ambiguous: usize,
    pub correct_unknown_target: usize,
}

fn ratio(correct: usize, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        correct as f64 / n as f64
    }
}

impl NormEvalResult {
    /// Scores `predictions` (one expanded token list per test line) against `test`.
    /// Extra or missing predicted tokens count as errors.
    pub fn from_predictions(
        test: &AlignedCorpus,
        predictions: &[Vec<String>],
        train_lexicon: &AbbreviationLexicon,
    ) -> Self {
        let mut n = [0usize; 5];
        let mut c = [0usize; 5];
        for (line, pred) in test.lines.iter().zip(predictions) {
            for (i, (abbr, gold)) in line.pairs.iter().enumerate() {
                let ok = pred.get(i).is_some_and(|p| p == gold);
                let known = train_lexicon.is_known(abbr);
                let cats = [
                    true,
                    known,
                    !known,
                    train_lexicon.is_ambiguous(abbr),
                    !train_lexicon.has_target(gold),
                ];
                for (k, member) in cats.into_iter().enumerate() {
                    if member {
                        n[k] += 1;
                        c[k] += usize::from(ok);
                    }
                }
            }
        }
        NormEvalResult {
            acc_all: ratio(c[0], n[0]),
            acc_known: ratio(c[1], n[1]),
            acc_unknown: ratio(c[2], n[2]),
            acc_ambiguous: ratio(c[3], n[3]),
            acc_unknown_target: ratio(c[4], n[4]),
            n_all: n[0],
            n_known: n[1],
            n_unknown: n[2],
            n_ambiguous: n[3],
            n_unknown_target: n[4],
            correct_all: c[0],
            correct_known: c[1],
            correct_unknown: c[2],
            correct_ambiguous: c[3],
            correct_unknown_target: c[4],
        }
    }
}

pub fn evaluate_normalizer(
    model: &NormalizerModel,
    test: &AlignedCorpus,
    train_lexicon: &AbbreviationLexicon,
) -> Result<NormEvalResult, NormalizerError> {
    let predictions = test
        .lines
        .iter()
        .map(|l| model.normalize_sequence(&l.abbr_tokens().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NormEvalResult::from_predictions(
        test,
        &predictions,
        train_lexicon,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abbrev::{default_rules, Position, SignCategory};
    use crate::corpus::AlignedLine;
    use proptest::prelude::*;

    fn corpus(lines: &[&[(&str, &str)]]) -> AlignedCorpus {
        AlignedCorpus::new(
            lines
                .iter()
                .enumerate()
                .map(|(i, p)| AlignedLine::from_pairs(&format!("l{i}"), p).unwrap())
                .collect(),
            Default::default(),
        )
        .unwrap()
    }

    fn model(c: &AlignedCorpus) -> NormalizerModel {
        train_normalizer(c, default_rules(), &NormalizerConfig::default()).unwrap()
    }

    #[test]
    fn lm_distribution_sums_to_one() {
        let lm = ContextLM::train(
            [
                vec!["sic", "ita", "est"],
                vec!["in", "illa", "parte"],
                vec!["sic", "ita"],
            ],
            3,
        );
        for history in [vec![], vec!["sic"], vec!["in", "illa"], vec!["zzz", "yyy"]] {
            let total: f64 = lm.vocab().iter().map(|w| lm.prob(w, &history)).sum::<f64>()
                + lm.unk_prob(&history);
            assert!((total - 1.0).abs() < 1e-12, "{history:?}: {total}");
        }
        assert!(lm.prob("ita", &["sic"]) > lm.prob("illa", &["sic"]));
        assert_eq!(lm.prob("never", &["sic"]), lm.unk_prob(&["sic"]));
        let empty = ContextLM::train(Vec::<Vec<&str>>::new(), 3);
        assert_eq!(empty.unk_prob(&[]), 1.0);
    }

    #[test]
    fn lm_counts_are_consistent() {
        let lm = ContextLM::train([vec!["a", "b", "a", "b", "c"], vec!["b", "c"]], 3);
        for (gram, n) in lm.grams() {
            let history = &gram[..gram.len() - 1];
            assert!(n <= lm.context_total(history));
        }
        assert_eq!(lm.count(&["b"]), 3);
        assert_eq!(lm.count(&["<s>", "<s>", "a"]), 1);
    }

    #[test]
    fn lm_serde_round_trip() {
        let lm = ContextLM::train([vec!["a", "b"], vec!["b", "c"]], 2);
        let back: ContextLM = serde_json::from_str(&serde_json::to_string(&lm).unwrap()).unwrap();
        assert_eq!(back, lm);
    }

    #[test]
    fn training_basics() {
        let c = corpus(&[&[("p̄", "pro"), ("domo", "domo")]]);
        let m = model(&c);
        let vocab: Vec<_> = m.lm.vocab().iter().cloned().collect();
        assert_eq!(vocab, ["domo", "pro"]);
        assert_eq!(m.lexicon, abbrev::learn_lexicon(&c));
        assert_eq!(model(&c), m);
        assert!(matches!(
            train_normalizer(
                &AlignedCorpus::default(),
                vec![],
                &NormalizerConfig::default()
            ),
            Err(NormalizerError::EmptyTrainingSet)
        ));
        let bad = NormalizerConfig {
            lambda: 1.5,
            ..Default::default()
        };
        assert!(train_normalizer(&c, vec![], &bad).is_err());
    }

    #[test]
    fn candidate_lists() {
        let c = corpus(&[
            &[("rōe", "ratione"), ("concordia", "concordia")],
            &[("ĩ", "ita"), ("ĩ", "illa"), ("ĩ", "ita")],
        ]);
        let m = model(&c);
        assert_eq!(m.candidates("rōe"), ["ratione"]);
        assert_eq!(m.candidates("ĩ"), ["ita", "illa"]);
        assert_eq!(m.candidates("xyz"), ["xyz"]);
        let rule = SignRule::new(
            "ꝯ",
            &["cum", "con", "com"],
            Position::Anywhere,
            SignCategory::Tachygraphic,
        )
        .unwrap();
        let m = train_normalizer(&c, vec![rule], &NormalizerConfig::default()).unwrap();
        assert_eq!(
            m.candidates("ꝯcordia"),
            ["concordia", "cumcordia", "comcordia", "ꝯcordia"]
        );
    }

    #[test]
    fn lexical_probabilities_are_smoothed() {
        let c = corpus(&[&[("ĩ", "ita"), ("ĩ", "illa"), ("ĩ", "ita")]]);
        let m = model(&c);
        let cands = m.scored_candidates("ĩ");
        assert!((cands[0].log_lex - (2.1f64 / 3.2).ln()).abs() < 1e-12);
        assert!((cands[1].log_lex - (1.1f64 / 3.2).ln()).abs() < 1e-12);
        let unk = m.scored_candidates("ꝯx");
        let expected = -(unk.len() as f64).ln();
        assert!(unk.iter().all(|c| c.log_lex == expected));
    }

    #[test]
    fn expands_table_line() {
        let c = corpus(&[&[("p̄", "pro"), ("domo", "domo"), ("dñi", "domini")]]);
        let m = model(&c);
        assert_eq!(
            m.normalize_sequence(&["p̄", "domo", "dñi"]).unwrap(),
            ["pro", "domo", "domini"]
        );
        assert_eq!(m.normalize_line("p̄  domo dñi").unwrap(), "pro domo domini");
        assert_eq!(m.normalize_line("").unwrap(), "");
        assert!(matches!(
            m.normalize_sequence(&["p̄", ""]),
            Err(NormalizerError::EmptyToken { index: 1 })
        ));
    }

    fn ambiguous_corpus() -> AlignedCorpus {
        corpus(&[
            &[("sic", "sic"), ("ĩ", "ita"), ("est", "est")],
            &[("sic", "sic"), ("ĩ", "ita"), ("dixit", "dixit")],
            &[("in", "in"), ("ĩ", "illa"), ("parte", "parte")],
            &[("in", "in"), ("ĩ", "illa"), ("die", "die")],
        ])
    }

    #[test]
    fn context_flips_ambiguous_token() {
        let m = model(&ambiguous_corpus());
        assert_eq!(m.normalize_sequence(&["sic", "ĩ"]).unwrap(), ["sic", "ita"]);
        assert_eq!(m.normalize_sequence(&["in", "ĩ"]).unwrap(), ["in", "illa"]);
    }

    #[test]
    fn model_bytes_round_trip() {
        let m = model(&ambiguous_corpus());
        let back = NormalizerModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }

    #[test]
    fn evaluation_arithmetic() {
        // train: "a"→"x" (known), "b"→{"y","z"} (ambiguous)
        let train = corpus(&[&[("a", "x"), ("b", "y"), ("b", "z")]]);
        let lex = abbrev::learn_lexicon(&train);
        let test = corpus(&[&[("a", "x"), ("b", "y"), ("c", "c"), ("d", "w")]]);
        // known: a correct, b wrong; unknown: c correct, d correct
        let preds = vec![vec!["x".into(), "z".into(), "c".into(), "w".into()]];
        let r = NormEvalResult::from_predictions(&test, &preds, &lex);
        assert_eq!((r.acc_known, r.acc_unknown, r.acc_all), (0.5, 1.0, 0.75));
        assert_eq!((r.n_ambiguous, r.acc_ambiguous), (1, 0.0));
        // unknown targets: "c" and "w" never produced in training
        assert_eq!((r.n_unknown_target, r.acc_unknown_target), (2, 1.0));

        let perfect = vec![vec!["x".into(), "y".into(), "c".into(), "w".into()]];
        let r = NormEvalResult::from_predictions(&test, &perfect, &lex);
        assert_eq!(
            [
                r.acc_all,
                r.acc_known,
                r.acc_unknown,
                r.acc_ambiguous,
                r.acc_unknown_target
            ],
            [1.0; 5]
        );
    }

    #[test]
    fn copying_model_on_identity_test() {
        let train = corpus(&[&[("a", "a")]]);
        let m = train_normalizer(&train, vec![], &NormalizerConfig::default()).unwrap();
        let test = corpus(&[&[("u", "u"), ("v", "v")], &[("a", "a")]]);
        let r = evaluate_normalizer(&m, &test, &m.lexicon).unwrap();
        assert_eq!(r.acc_all, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn beam_is_sound(
            seqs in prop::collection::vec(prop::collection::vec((0usize..4, 0usize..3), 1..5), 1..6),
            query in prop::collection::vec(0usize..5, 1..5),
            lambda in 0.0f64..=1.0,
        ) {
            // abbreviations a0..a3 with up to three targets each; a4 is unseen
            let lines: Vec<Vec<(String, String)>> = seqs
                .iter()
                .map(|s| s.iter().map(|&(a, e)| (format!("a{a}"), format!("e{a}{e}"))).collect())
                .collect();
            let c = AlignedCorpus::new(
                lines.into_iter().enumerate().map(|(i, p)| AlignedLine::new(format!("l{i}"), p).unwrap()).collect(),
                Default::default(),
            ).unwrap();
            let cfg = NormalizerConfig { lambda, ..Default::default() };
            let m = train_normalizer(&c, vec![], &cfg).unwrap();
            let tokens: Vec<String> = query.iter().map(|q| format!("a{q}")).collect();
            let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();

            // exhaustive optimum over every candidate sequence
            let cands: Vec<Vec<String>> = tokens.iter().map(|t| m.candidates(t)).collect();
            let product: usize = cands.iter().map(Vec::len).product();
            let mut best = f64::NEG_INFINITY;
            for code in 0..product {
                let mut rem = code;
                let outs: Vec<&str> = cands
                    .iter()
                    .map(|c| {
                        let pick = rem % c.len();
                        rem /= c.len();
                        c[pick].as_str()
                    })
                    .collect();
                best = best.max(m.score_sequence(&tokens, &outs));
            }

            let beam = m.normalize_sequence(&tokens).unwrap();
            prop_assert_eq!(beam.len(), tokens.len());
            let beam_refs: Vec<&str> = beam.iter().map(String::as_str).collect();
            let beam_score = m.score_sequence(&tokens, &beam_refs);
            prop_assert!(beam_score <= best + 1e-9);

            let full = m.decode(&tokens, product).unwrap();
            let full_refs: Vec<&str> = full.iter().map(String::as_str).collect();
            prop_assert!((m.score_sequence(&tokens, &full_refs) - best).abs() < 1e-9);

            // tokens with a single training target are always mapped to it
            for (t, out) in tokens.iter().zip(&beam) {
                let targets = m.lexicon.expansions_of(t);
                if targets.len() == 1 {
                    prop_assert_eq!(&targets[0].0, out);
                }
            }
        }
    }
}
