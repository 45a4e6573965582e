//! Token-aligned ground truth and the datasets derived from it.
//!
//! A corpus is read from JSON Lines, one record per transcribed line:
//!
//! ```text
//! {"line_id":"f1-01","abbr":"p̄ domo","exp":"pro domo","pairs":[["p̄","pro"],["domo","domo"]]}
//! ```
//!
//! Two optional extensions are accepted and emitted only when needed: a first record of
//! the form `{"metadata":{...}}` holding string key/value pairs, and a `"hyphen_joined":
//! true` field on lines produced by [`normalize_hyphenation`].
//!
//! Text is kept byte-for-byte as given; no Unicode normalisation is ever applied.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line} ({line_id}): empty token")]
    EmptyToken { line: usize, line_id: String },
    #[error("line {line} ({line_id}): token {token:?} contains whitespace")]
    TokenWhitespace {
        line: usize,
        line_id: String,
        token: String,
    },
    #[error("line {line} ({line_id}): no token pairs")]
    NoPairs { line: usize, line_id: String },
    #[error("line {line} ({line_id}): {side} tokens do not join to the {side} text")]
    Alignment {
        line: usize,
        line_id: String,
        side: &'static str,
    },
    #[error("line {line}: duplicate line_id {line_id:?}")]
    DuplicateId { line: usize, line_id: String },
    #[error("line {line_id:?} ends with a hyphen but is the last line of the corpus")]
    DanglingHyphen { line_id: String },
    #[error("hyphen marker must not be empty")]
    EmptyHyphenMarker,
    #[error("split counts sum to {got}, corpus has {expected} lines")]
    SplitCounts { expected: usize, got: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown dataset variant {0:?} (expected exp1, exp2, abb1 or abb2)")]
    UnknownVariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One transcribed line, aligned token by token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedLine {
    pub line_id: String,
    pub abbr_text: String,
    pub exp_text: String,
    pub pairs: Vec<(String, String)>,
    /// Set when the line absorbed the continuation of a hyphenated word.
    pub hyphen_joined: bool,
}

impl AlignedLine {
    /// Builds a line from its token pairs; the two texts are the space-joined tokens.
    pub fn new(
        line_id: impl Into<String>,
        pairs: Vec<(String, String)>,
    ) -> Result<Self, CorpusError> {
        let line_id = line_id.into();
        let abbr_text = join_side(&pairs, |p| &p.0);
        let exp_text = join_side(&pairs, |p| &p.1);
        let line = AlignedLine {
            line_id,
            abbr_text,
            exp_text,
            pairs,
            hyphen_joined: false,
        };
        line.validate(0)?;
        Ok(line)
    }

    /// Convenience constructor from borrowed pairs.
    pub fn from_pairs(line_id: &str, pairs: &[(&str, &str)]) -> Result<Self, CorpusError> {
        Self::new(
            line_id,
            pairs
                .iter()
                .map(|(a, e)| (a.to_string(), e.to_string()))
                .collect(),
        )
    }

    pub fn abbr_tokens(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.0.as_str())
    }

    pub fn exp_tokens(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.1.as_str())
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let id = || self.line_id.clone();
        if self.pairs.is_empty() {
            return Err(CorpusError::NoPairs {
                line,
                line_id: id(),
            });
        }
        for (a, e) in &self.pairs {
            for tok in [a, e] {
                if tok.is_empty() {
                    return Err(CorpusError::EmptyToken {
                        line,
                        line_id: id(),
                    });
                }
                if tok.chars().any(char::is_whitespace) {
                    return Err(CorpusError::TokenWhitespace {
                        line,
                        line_id: id(),
                        token: tok.clone(),
                    });
                }
            }
        }
        if join_side(&self.pairs, |p| &p.0) != self.abbr_text {
            return Err(CorpusError::Alignment {
                line,
                line_id: id(),
                side: "abbr",
            });
        }
        if join_side(&self.pairs, |p| &p.1) != self.exp_text {
            return Err(CorpusError::Alignment {
                line,
                line_id: id(),
                side: "exp",
            });
        }
        Ok(())
    }
}

fn join_side<'a>(
    pairs: &'a [(String, String)],
    side: impl Fn(&'a (String, String)) -> &'a String,
) -> String {
    pairs
        .iter()
        .map(side)
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

/// An ordered, validated collection of aligned lines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedCorpus {
    pub lines: Vec<AlignedLine>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    line_id: String,
    abbr: String,
    exp: String,
    pairs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hyphen_joined: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataRecord {
    metadata: BTreeMap<String, String>,
}

impl AlignedCorpus {
    /// Validates `lines` and wraps them into a corpus.
    pub fn new(
        lines: Vec<AlignedLine>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, line) in lines.iter().enumerate() {
            line.validate(i + 1)?;
            if !seen.insert(line.line_id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    line_id: line.line_id.clone(),
                });
            }
        }
        Ok(AlignedCorpus { lines, metadata })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// All token pairs in document order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.lines
            .iter()
            .flat_map(|l| l.pairs.iter().map(|(a, e)| (a.as_str(), e.as_str())))
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| l.pairs.len()).sum()
    }
}

/// Parses the JSON Lines ground-truth format. Blank lines are skipped.
pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<AlignedCorpus, CorpusError> {
    let mut lines = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut seen = HashSet::new();
    for (idx, raw) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let raw = raw?;
        let raw = raw.strip_suffix('\r').unwrap_or(&raw);
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        if value.get("metadata").is_some() {
            if !lines.is_empty() || !metadata.is_empty() {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "metadata record must come first".into(),
                });
            }
            let rec: MetadataRecord =
                serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
                    line: lineno,
                    message: e.to_string(),
                })?;
            metadata = rec.metadata;
            continue;
        }
        let rec: Record = serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = AlignedLine {
            line_id: rec.line_id,
            abbr_text: rec.abbr,
            exp_text: rec.exp,
            pairs: rec.pairs,
            hyphen_joined: rec.hyphen_joined,
        };
        line.validate(lineno)?;
        if !seen.insert(line.line_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: lineno,
                line_id: line.line_id,
            });
        }
        lines.push(line);
    }
    Ok(AlignedCorpus { lines, metadata })
}

/// Parses ground truth held in memory.
pub fn parse_ground_truth_str(s: &str) -> Result<AlignedCorpus, CorpusError> {
    parse_ground_truth(s.as_bytes())
}

/// Writes `corpus` as JSON Lines (LF endings, raw UTF-8).
pub fn serialize_corpus<W: Write>(corpus: &AlignedCorpus, mut out: W) -> std::io::Result<()> {
    if !corpus.metadata.is_empty() {
        let rec = MetadataRecord {
            metadata: corpus.metadata.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    for line in &corpus.lines {
        let rec = Record {
            line_id: line.line_id.clone(),
            abbr: line.abbr_text.clone(),
            exp: line.exp_text.clone(),
            pairs: line.pairs.clone(),
            hyphen_joined: line.hyphen_joined,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn serialize_corpus_to_string(corpus: &AlignedCorpus) -> String {
    let mut buf = Vec::new();
    serialize_corpus(corpus, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

fn strip_marker<'a>(token: &'a str, marker: &str) -> Option<&'a str> {
    token.strip_suffix(marker).filter(|rest| !rest.is_empty())
}

/// Merges words split across lines by a trailing hyphen `marker`.
///
/// The continuation (first token of the following line) is appended to the hyphenated
/// token, which stays on the first line. A continuation line left without tokens is
/// dropped. The marker is removed from whichever side (abbreviated or expanded) carries
/// it. Tokens consisting only of the marker are left alone.
pub fn normalize_hyphenation(
    corpus: &AlignedCorpus,
    marker: &str,
) -> Result<AlignedCorpus, CorpusError> {
    if marker.is_empty() {
        return Err(CorpusError::EmptyHyphenMarker);
    }
    let ends_hyphenated = |line: &AlignedLine| {
        line.pairs.last().is_some_and(|(a, e)| {
            strip_marker(a, marker).is_some() || strip_marker(e, marker).is_some()
        })
    };

    let mut out: Vec<AlignedLine> = Vec::with_capacity(corpus.len());
    let mut carry: Option<usize> = None;
    for line in &corpus.lines {
        let mut pairs = line.pairs.clone();
        if let Some(target) = carry.take() {
            let (cont_a, cont_e) = pairs.remove(0);
            let host = &mut out[target];
            let last = host
                .pairs
                .last_mut()
                .expect("validated lines are non-empty");
            let a = strip_marker(&last.0, marker).unwrap_or(&last.0).to_string();
            let e = strip_marker(&last.1, marker).unwrap_or(&last.1).to_string();
            *last = (a + &cont_a, e + &cont_e);
            host.hyphen_joined = true;
            if pairs.is_empty() {
                if ends_hyphenated(host) {
                    carry = Some(target);
                }
                continue;
            }
        }
        let mut merged = line.clone();
        merged.pairs = pairs;
        if ends_hyphenated(&merged) {
            carry = Some(out.len());
        }
        out.push(merged);
    }
    if let Some(idx) = carry {
        return Err(CorpusError::DanglingHyphen {
            line_id: out[idx].line_id.clone(),
        });
    }
    for line in &mut out {
        line.abbr_text = join_side(&line.pairs, |p| &p.0);
        line.exp_text = join_side(&line.pairs, |p| &p.1);
    }
    Ok(AlignedCorpus {
        lines: out,
        metadata: corpus.metadata.clone(),
    })
}

/// The four dataset flavours: expanded or abbreviated, with or without spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Exp1,
    Exp2,
    Abb1,
    Abb2,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [Self::Exp1, Self::Exp2, Self::Abb1, Self::Abb2];

    pub fn is_spaced(self) -> bool {
        matches!(self, Self::Exp1 | Self::Abb1)
    }

    pub fn is_abbreviated(self) -> bool {
        matches!(self, Self::Abb1 | Self::Abb2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exp1 => "exp1",
            Self::Exp2 => "exp2",
            Self::Abb1 => "abb1",
            Self::Abb2 => "abb2",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "exp1" | "dexp1" => Ok(Self::Exp1),
            "exp2" | "dexp2" => Ok(Self::Exp2),
            "abb1" | "dabb1" => Ok(Self::Abb1),
            "abb2" | "dabb2" => Ok(Self::Abb2),
            _ => Err(CorpusError::UnknownVariant(s.to_string())),
        }
    }
}

/// Plain-text lines of one dataset flavour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetVariant {
    pub kind: VariantKind,
    pub lines: Vec<String>,
}

impl DatasetVariant {
    /// One line per record, LF-terminated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    pub fn from_text(kind: VariantKind, text: &str) -> Self {
        DatasetVariant {
            kind,
            lines: text
                .lines()
                .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
                .collect(),
        }
    }
}

pub fn build_variant(corpus: &AlignedCorpus, kind: VariantKind) -> DatasetVariant {
    let lines = corpus
        .lines
        .iter()
        .map(|l| {
            let spaced = if kind.is_abbreviated() {
                &l.abbr_text
            } else {
                &l.exp_text
            };
            if kind.is_spaced() {
                spaced.clone()
            } else {
                text::remove_spaces(spaced)
            }
        })
        .collect();
    DatasetVariant { kind, lines }
}

/// Train/dev/test partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: AlignedCorpus,
    pub dev: AlignedCorpus,
    pub test: AlignedCorpus,
    pub seed: u64,
}

/// Partitions `corpus` into parts of the requested sizes.
///
/// Without shuffling the parts are consecutive runs in document order. With shuffling
/// line indices are permuted by a seeded ChaCha generator, then each part is restored
/// to document order.
pub fn split_corpus(
    corpus: &AlignedCorpus,
    counts: (usize, usize, usize),
    seed: u64,
    shuffled: bool,
) -> Result<Split, CorpusError> {
    let (n_train, n_dev, n_test) = counts;
    let total = n_train + n_dev + n_test;
    if total != corpus.len() {
        return Err(CorpusError::SplitCounts {
            expected: corpus.len(),
            got: total,
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    if shuffled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let part = |range: std::ops::Range<usize>| {
        let mut idx = order[range].to_vec();
        idx.sort_unstable();
        AlignedCorpus {
            lines: idx.into_iter().map(|i| corpus.lines[i].clone()).collect(),
            metadata: corpus.metadata.clone(),
        }
    };
    Ok(Split {
        train: part(0..n_train),
        dev: part(n_train..n_train + n_dev),
        test: part(n_train + n_dev..total),
        seed,
    })
}

/// How characters are grouped into classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    /// Extended grapheme clusters: a base letter and its marks form one class.
    #[default]
    Grapheme,
    /// Unicode scalar values: every combining mark is a class of its own.
    Codepoint,
}

impl FromStr for ClassMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grapheme" => Ok(Self::Grapheme),
            "codepoint" => Ok(Self::Codepoint),
            other => Err(format!("unknown class mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInventory {
    pub classes: BTreeMap<String, usize>,
    /// Classes made up only of combining marks.
    pub combining_count: usize,
}

impl ClassInventory {
    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> usize {
        self.classes.values().sum()
    }
}

pub fn class_inventory(variant: &DatasetVariant, mode: ClassMode) -> ClassInventory {
    let mut classes: BTreeMap<String, usize> = BTreeMap::new();
    for line in &variant.lines {
        match mode {
            ClassMode::Grapheme => {
                for g in text::graphemes(line) {
                    *classes.entry(g.to_string()).or_default() += 1;
                }
            }
            ClassMode::Codepoint => {
                for c in line.chars() {
                    *classes.entry(c.to_string()).or_default() += 1;
                }
            }
        }
    }
    let combining_count = classes.keys().filter(|k| text::is_all_combining(k)).count();
    ClassInventory {
        classes,
        combining_count,
    }
}

/// Share of token pairs whose abbreviated and expanded forms differ.
pub fn abbreviation_density(corpus: &AlignedCorpus) -> Result<f64, CorpusError> {
    let total = corpus.token_count();
    if total == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let abbreviated = corpus.pairs().filter(|(a, e)| a != e).count();
    Ok(abbreviated as f64 / total as f64)
}

/// Summary figures printed by the `stats` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub lines: usize,
    pub tokens: usize,
    pub abbreviated_tokens: usize,
    pub density: f64,
    /// Inventory size per variant, in the requested class mode.
    pub classes: BTreeMap<VariantKind, usize>,
    pub combining_classes: BTreeMap<VariantKind, usize>,
}

pub fn corpus_stats(corpus: &AlignedCorpus, mode: ClassMode) -> Result<CorpusStats, CorpusError> {
    let density = abbreviation_density(corpus)?;
    let mut classes = BTreeMap::new();
    let mut combining_classes = BTreeMap::new();
    for kind in VariantKind::ALL {
        let inv = class_inventory(&build_variant(corpus, kind), mode);
        classes.insert(kind, inv.size());
        combining_classes.insert(kind, inv.combining_count);
    }
    Ok(CorpusStats {
        lines: corpus.len(),
        tokens: corpus.token_count(),
        abbreviated_tokens: corpus.pairs().filter(|(a, e)| a != e).count(),
        density,
        classes,
        combining_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[(&str, &[(&str, &str)])]) -> AlignedCorpus {
        AlignedCorpus::new(
            lines
                .iter()
                .map(|(id, p)| AlignedLine::from_pairs(id, p).unwrap())
                .collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn parses_single_record() {
        let c = parse_ground_truth_str(
            r#"{"line_id":"1","abbr":"rōe","exp":"ratione","pairs":[["rōe","ratione"]]}"#,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.lines[0].pairs, vec![("rōe".into(), "ratione".into())]);
        assert!(!c.lines[0].hyphen_joined);
    }

    #[test]
    fn rejects_empty_token() {
        let err =
            parse_ground_truth_str(r#"{"line_id":"1","abbr":"","exp":"x","pairs":[["","x"]]}"#)
                .unwrap_err();
        assert!(matches!(err, CorpusError::EmptyToken { line: 1, .. }));
    }

    #[test]
    fn rejects_misaligned_pairs() {
        let err = parse_ground_truth_str(
            r#"{"line_id":"1","abbr":"p̄ domo","exp":"pro domo","pairs":[["p̄","pro"],["domus","domo"]]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Alignment { side: "abbr", .. }));
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        let rec = r#"{"line_id":"a","abbr":"x","exp":"x","pairs":[["x","x"]]}"#;
        let err = parse_ground_truth_str(&format!("{rec}\n{rec}\n")).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
        let err = parse_ground_truth_str(&format!("{rec}\n\n{{not json\n")).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 3, .. }));
        let err = parse_ground_truth_str(r#"{"line_id":"a","abbr":"x","exp":"x","pairs":[]}"#)
            .unwrap_err();
        assert!(matches!(err, CorpusError::NoPairs { .. }));
    }

    #[test]
    fn round_trip_keeps_marks_decomposed() {
        let mut c = corpus(&[("1", &[("m\u{303}", "modo"), ("dn\u{303}i", "domini")])]);
        c.metadata.insert("source".into(), "fixture".into());
        let text = serialize_corpus_to_string(&c);
        assert!(text.contains("m\u{303}"));
        let back = parse_ground_truth_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serialize_corpus_to_string(&back), text);

        let empty = AlignedCorpus::default();
        assert_eq!(serialize_corpus_to_string(&empty), "");
        assert_eq!(parse_ground_truth_str("").unwrap(), empty);
    }

    #[test]
    fn hyphenation_merges_halves() {
        let c = corpus(&[
            ("1", &[("a", "a"), ("defen-", "defen-")]),
            ("2", &[("sione", "sione"), ("iusticie", "iusticie")]),
        ]);
        let n = normalize_hyphenation(&c, "-").unwrap();
        assert_eq!(n.lines[0].abbr_text, "a defensione");
        assert!(n.lines[0].hyphen_joined);
        assert_eq!(n.lines[1].exp_text, "iusticie");
        assert!(!n.lines[1].hyphen_joined);

        let c = corpus(&[
            ("1", &[("defen-", "defen-")]),
            ("2", &[("sione", "sione"), ("iusticie", "iusticie")]),
        ]);
        let n = normalize_hyphenation(&c, "-").unwrap();
        let texts: Vec<_> = n.lines.iter().map(|l| l.exp_text.as_str()).collect();
        assert_eq!(texts, ["defensione", "iusticie"]);
    }

    #[test]
    fn hyphenation_edge_cases() {
        let plain = corpus(&[("1", &[("a", "a")]), ("2", &[("b", "b")])]);
        assert_eq!(normalize_hyphenation(&plain, "-").unwrap(), plain);

        let dangling = corpus(&[("1", &[("a", "a")]), ("2", &[("de-", "de-")])]);
        assert!(matches!(
            normalize_hyphenation(&dangling, "-"),
            Err(CorpusError::DanglingHyphen { .. })
        ));

        // continuation line consumed entirely, then hyphenated again
        let chain = corpus(&[
            ("1", &[("mi-", "mi-")]),
            ("2", &[("seri-", "seri-")]),
            ("3", &[("cordia", "cordia"), ("dei", "dei")]),
        ]);
        let n = normalize_hyphenation(&chain, "-").unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n.lines[0].exp_text, "misericordia");
        assert_eq!(n.lines[1].exp_text, "dei");

        // only the abbreviated side carries the marker
        let one_side = corpus(&[("1", &[("ꝯ-", "con")]), ("2", &[("cordia", "cordia")])]);
        let n = normalize_hyphenation(&one_side, "=").unwrap();
        assert_eq!(n, one_side);
        let n = normalize_hyphenation(&one_side, "-").unwrap();
        assert_eq!(
            n.lines[0].pairs,
            vec![("ꝯcordia".into(), "concordia".into())]
        );

        assert!(normalize_hyphenation(&plain, "").is_err());
    }

    #[test]
    fn variants() {
        let c = corpus(&[("1", &[("p̄", "pro"), ("domo", "domo")])]);
        assert_eq!(build_variant(&c, VariantKind::Abb2).lines, ["p̄domo"]);
        assert_eq!(build_variant(&c, VariantKind::Exp1).lines, ["pro domo"]);
        assert_eq!(build_variant(&c, VariantKind::Exp2).lines, ["prodomo"]);
        assert_eq!(build_variant(&c, VariantKind::Abb1).lines, ["p̄ domo"]);
        assert!(build_variant(&AlignedCorpus::default(), VariantKind::Exp1)
            .lines
            .is_empty());
        assert_eq!("D-abb2".parse::<VariantKind>().unwrap(), VariantKind::Abb2);
    }

    #[test]
    fn split_sizes_and_errors() {
        let lines: Vec<_> = (0..10)
            .map(|i| AlignedLine::from_pairs(&i.to_string(), &[("a", "a")]).unwrap())
            .collect();
        let c = AlignedCorpus::new(lines, BTreeMap::new()).unwrap();
        let s = split_corpus(&c, (10, 0, 0), 0, false).unwrap();
        assert_eq!(s.train, c);
        assert!(s.dev.is_empty() && s.test.is_empty());
        assert!(matches!(
            split_corpus(&c, (5, 2, 2), 0, false),
            Err(CorpusError::SplitCounts {
                expected: 10,
                got: 9
            })
        ));
        let ordered = split_corpus(&c, (6, 2, 2), 0, false).unwrap();
        assert_eq!(ordered.dev.lines[0].line_id, "6");
        let a = split_corpus(&c, (6, 2, 2), 42, true).unwrap();
        let b = split_corpus(&c, (6, 2, 2), 42, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inventories() {
        let v = DatasetVariant {
            kind: VariantKind::Exp2,
            lines: vec!["aaa".into()],
        };
        let inv = class_inventory(&v, ClassMode::Grapheme);
        assert_eq!(
            inv.classes.into_iter().collect::<Vec<_>>(),
            vec![("a".to_string(), 3)]
        );

        let v = DatasetVariant {
            kind: VariantKind::Abb2,
            lines: vec!["m\u{303}".into()],
        };
        assert_eq!(class_inventory(&v, ClassMode::Grapheme).size(), 1);
        let cp = class_inventory(&v, ClassMode::Codepoint);
        assert_eq!(cp.size(), 2);
        assert_eq!(cp.combining_count, 1);
    }

    #[test]
    fn density() {
        let c = corpus(&[("1", &[("rōe", "ratione"), ("domo", "domo")])]);
        assert_eq!(abbreviation_density(&c).unwrap(), 0.5);
        let c = corpus(&[("1", &[("domo", "domo")])]);
        assert_eq!(abbreviation_density(&c).unwrap(), 0.0);
        let c = corpus(&[("1", &[("ꝯ", "cum"), ("ē", "est")])]);
        assert_eq!(abbreviation_density(&c).unwrap(), 1.0);
        assert!(matches!(
            abbreviation_density(&AlignedCorpus::default()),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    fn arb_token() -> impl Strategy<Value = String> {
        "[a-zāēīōūñ&ꝯꝰ\u{303}\u{304}.]{1,6}"
            .prop_filter("leading mark", |s| !s.starts_with(['\u{303}', '\u{304}']))
    }

    fn arb_corpus() -> impl Strategy<Value = AlignedCorpus> {
        prop::collection::vec(
            prop::collection::vec((arb_token(), arb_token()), 1..6),
            0..8,
        )
        .prop_map(|lines| {
            let lines = lines
                .into_iter()
                .enumerate()
                .map(|(i, p)| AlignedLine::new(format!("l{i}"), p).unwrap())
                .collect();
            AlignedCorpus::new(lines, BTreeMap::new()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn parse_serialize_round_trip(c in arb_corpus()) {
            let text = serialize_corpus_to_string(&c);
            prop_assert_eq!(parse_ground_truth_str(&text).unwrap(), c);
        }

        #[test]
        fn variant_coherence_and_class_delta(c in arb_corpus()) {
            for (spaced, unspaced) in [(VariantKind::Exp1, VariantKind::Exp2), (VariantKind::Abb1, VariantKind::Abb2)] {
                let s = build_variant(&c, spaced);
                let u = build_variant(&c, unspaced);
                for (a, b) in s.lines.iter().zip(&u.lines) {
                    prop_assert_eq!(&text::remove_spaces(a), b);
                }
                let si = class_inventory(&s, ClassMode::Grapheme);
                let ui = class_inventory(&u, ClassMode::Grapheme);
                prop_assert_eq!(si.total(), s.lines.iter().map(|l| text::grapheme_len(l)).sum::<usize>());
                let mut expected = ui.classes.keys().cloned().collect::<std::collections::BTreeSet<_>>();
                if s.lines.iter().any(|l| l.contains(' ')) {
                    expected.insert(" ".to_string());
                }
                prop_assert_eq!(si.classes.keys().cloned().collect::<std::collections::BTreeSet<_>>(), expected);
            }
        }

        #[test]
        fn density_is_bounded(c in arb_corpus()) {
            if let Ok(d) = abbreviation_density(&c) {
                prop_assert!((0.0..=1.0).contains(&d));
            }
        }

        #[test]
        fn split_partitions(c in arb_corpus(), seed in any::<u64>(), a in 0usize..8, shuffled in any::<bool>()) {
            let n = c.len();
            let a = a.min(n);
            let b = (n - a) / 2;
            let s = split_corpus(&c, (a, b, n - a - b), seed, shuffled).unwrap();
            let mut ids: Vec<_> = s.train.lines.iter().chain(&s.dev.lines).chain(&s.test.lines).map(|l| l.line_id.clone()).collect();
            ids.sort();
            let mut all: Vec<_> = c.lines.iter().map(|l| l.line_id.clone()).collect();
            all.sort();
            prop_assert_eq!(ids, all);
        }
    }
}
