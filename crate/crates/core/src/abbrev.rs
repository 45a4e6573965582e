//! The abbreviation system: sign taxonomy, the learned token lexicon, and
//! compositional sign-substitution rules for tokens never seen in training.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AlignedCorpus;
use crate::text;

/// The default rule table shipped with the crate.
pub const DEFAULT_RULES_TSV: &str = include_str!("../data/sign_rules.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("rule line {line}: expected 4 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("rule line {line}: empty pattern")]
    EmptyPattern { line: usize },
    #[error("rule line {line}: unknown position {value:?}")]
    Position { line: usize, value: String },
    #[error("rule line {line}: unknown category {value:?}")]
    Category { line: usize, value: String },
    #[error("rule line {line}: bad escape in {value:?}")]
    Escape { line: usize, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignCategory {
    Tachygraphic,
    SuperscriptLetter,
    Suspension,
    SimpleContraction,
    CompositeContraction,
}

impl SignCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tachygraphic => "tachygraphic",
            Self::SuperscriptLetter => "superscript_letter",
            Self::Suspension => "suspension",
            Self::SimpleContraction => "simple_contraction",
            Self::CompositeContraction => "composite_contraction",
        }
    }
}

impl FromStr for SignCategory {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "tachygraphic" => Self::Tachygraphic,
            "superscript_letter" => Self::SuperscriptLetter,
            "suspension" => Self::Suspension,
            "simple_contraction" => Self::SimpleContraction,
            "composite_contraction" => Self::CompositeContraction,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignClass {
    pub category: SignCategory,
    pub ambiguous: bool,
}

/// Where in a token a sign may be substituted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    #[default]
    Anywhere,
    WordInitial,
    WordFinal,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Anywhere => "anywhere",
            Self::WordInitial => "word_initial",
            Self::WordFinal => "word_final",
        }
    }
}

impl FromStr for Position {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "anywhere" => Self::Anywhere,
            "word_initial" | "initial" => Self::WordInitial,
            "word_final" | "final" => Self::WordFinal,
            _ => return Err(()),
        })
    }
}

/// A sign (one or more scalar values, possibly a lone combining mark) and what it
/// may stand for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignRule {
    pub pattern: String,
    /// Candidate replacements, tried in order. An empty string drops the sign.
    pub expansions: Vec<String>,
    pub position: Position,
    pub class: SignClass,
}

impl SignRule {
    /// Returns `None` if the pattern or the expansion list is empty.
    pub fn new(
        pattern: &str,
        expansions: &[&str],
        position: Position,
        category: SignCategory,
    ) -> Option<Self> {
        if pattern.is_empty() || expansions.is_empty() {
            return None;
        }
        Some(SignRule {
            pattern: pattern.to_string(),
            expansions: expansions.iter().map(|s| s.to_string()).collect(),
            position,
            class: SignClass {
                category,
                ambiguous: expansions.len() > 1,
            },
        })
    }

    /// Whether the rule may apply to `token[start..start + pattern.len()]`.
    fn matches_at(&self, token: &str, start: usize, bounds: &[usize]) -> bool {
        if !token[start..].starts_with(&self.pattern) {
            return false;
        }
        let end = start + self.pattern.len();
        let at_boundary = |i: usize| bounds.binary_search(&i).is_ok();
        let starts_with_mark = self
            .pattern
            .chars()
            .next()
            .is_some_and(text::is_combining_mark);
        let ends_with_mark = self
            .pattern
            .chars()
            .next_back()
            .is_some_and(text::is_combining_mark);
        if !(at_boundary(start) || starts_with_mark) || !(at_boundary(end) || ends_with_mark) {
            return false;
        }
        match self.position {
            Position::Anywhere => true,
            Position::WordInitial => start == 0,
            Position::WordFinal => end == token.len(),
        }
    }
}

impl fmt::Display for SignRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.pattern,
            self.expansions.join("|"),
            self.position.as_str(),
            self.class.category.as_str()
        )
    }
}

fn unescape(s: &str, line: usize) -> Result<String, RuleError> {
    let err = || RuleError::Escape {
        line,
        value: s.to_string(),
    };
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("\\u{") {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 3..];
        let close = after.find('}').ok_or_else(err)?;
        let code = u32::from_str_radix(&after[..close], 16).map_err(|_| err())?;
        out.push(char::from_u32(code).ok_or_else(err)?);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses a rule table. Blank lines and lines starting with `#` are ignored.
pub fn parse_rules(tsv: &str) -> Result<Vec<SignRule>, RuleError> {
    let mut rules = Vec::new();
    for (i, raw) in tsv.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(RuleError::Columns {
                line,
                found: cols.len(),
            });
        }
        let pattern = unescape(cols[0], line)?;
        if pattern.is_empty() {
            return Err(RuleError::EmptyPattern { line });
        }
        let expansions = cols[1]
            .split('|')
            .map(|e| unescape(e, line))
            .collect::<Result<Vec<_>, _>>()?;
        let position = cols[2].trim().parse().map_err(|_| RuleError::Position {
            line,
            value: cols[2].to_string(),
        })?;
        let category: SignCategory = cols[3].trim().parse().map_err(|_| RuleError::Category {
            line,
            value: cols[3].to_string(),
        })?;
        rules.push(SignRule {
            pattern,
            class: SignClass {
                category,
                ambiguous: expansions.len() > 1,
            },
            expansions,
            position,
        });
    }
    Ok(rules)
}

pub fn default_rules() -> Vec<SignRule> {
    parse_rules(DEFAULT_RULES_TSV).expect("bundled rule table is valid")
}

/// Expands `token` by substituting every matching sign occurrence with each of its
/// expansions.
///
/// The token is scanned left to right; at each position the first rule (in `rules`
/// order) that matches consumes its pattern. Candidates are the cartesian product of
/// the matched occurrences' expansions, enumerated with the leftmost occurrence varying
/// slowest, deduplicated and capped at `max_candidates`. The unmodified token is always
/// present and always last.
pub fn compositional_candidates(
    token: &str,
    rules: &[SignRule],
    max_candidates: usize,
) -> Vec<String> {
    let max_candidates = max_candidates.max(1);
    let bounds = text::grapheme_boundaries(token);

    // Each segment is either a literal run (one option) or a matched sign.
    let mut segments: Vec<Vec<&str>> = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    while i < token.len() {
        if let Some(rule) = rules.iter().find(|r| r.matches_at(token, i, &bounds)) {
            if literal_start < i {
                segments.push(vec![&token[literal_start..i]]);
            }
            segments.push(rule.expansions.iter().map(String::as_str).collect());
            i += rule.pattern.len();
            literal_start = i;
        } else {
            i += token[i..].chars().next().map_or(1, char::len_utf8);
        }
    }
    if literal_start < token.len() {
        segments.push(vec![&token[literal_start..]]);
    }

    let mut out: Vec<String> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut choice = vec![0usize; segments.len()];
    'product: while out.len() < max_candidates - 1 {
        let form: String = segments
            .iter()
            .zip(&choice)
            .map(|(opts, &c)| opts[c])
            .collect();
        if form != token && seen.insert(form.clone()) {
            out.push(form);
        }
        // odometer: rightmost segment varies fastest
        for k in (0..segments.len()).rev() {
            choice[k] += 1;
            if choice[k] < segments[k].len() {
                continue 'product;
            }
            choice[k] = 0;
        }
        break;
    }
    out.push(token.to_string());
    out
}

/// Count-weighted many-to-many relation between abbreviated and expanded tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LexiconRepr", into = "LexiconRepr")]
pub struct AbbreviationLexicon {
    forward: BTreeMap<String, BTreeMap<String, u64>>,
    reverse: BTreeMap<String, BTreeSet<String>>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct LexiconRepr {
    forward: BTreeMap<String, BTreeMap<String, u64>>,
}

impl From<LexiconRepr> for AbbreviationLexicon {
    fn from(r: LexiconRepr) -> Self {
        let mut lex = AbbreviationLexicon::default();
        for (a, targets) in r.forward {
            for (e, n) in targets {
                lex.add(&a, &e, n);
            }
        }
        lex
    }
}

impl From<AbbreviationLexicon> for LexiconRepr {
    fn from(l: AbbreviationLexicon) -> Self {
        LexiconRepr { forward: l.forward }
    }
}

impl AbbreviationLexicon {
    /// Records `count` occurrences of the pair. A zero count is ignored.
    pub fn add(&mut self, abbr: &str, exp: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .forward
            .entry(abbr.to_string())
            .or_default()
            .entry(exp.to_string())
            .or_default() += count;
        self.reverse
            .entry(exp.to_string())
            .or_default()
            .insert(abbr.to_string());
        self.total += count;
    }

    pub fn forward(&self) -> &BTreeMap<String, BTreeMap<String, u64>> {
        &self.forward
    }

    pub fn reverse(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.reverse
    }

    /// Number of token pairs the lexicon was learned from.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn is_known(&self, abbr: &str) -> bool {
        self.forward.contains_key(abbr)
    }

    /// Known abbreviated token with at least two distinct targets.
    pub fn is_ambiguous(&self, abbr: &str) -> bool {
        self.forward.get(abbr).is_some_and(|t| t.len() >= 2)
    }

    pub fn has_target(&self, exp: &str) -> bool {
        self.reverse.contains_key(exp)
    }

    /// Occurrences of `abbr` across all its targets.
    pub fn count_of(&self, abbr: &str) -> u64 {
        self.forward.get(abbr).map_or(0, |t| t.values().sum())
    }

    /// Targets of `abbr` by descending count, ties in lexicographic order.
    pub fn expansions_of(&self, abbr: &str) -> Vec<(String, u64)> {
        let mut out: Vec<(String, u64)> = self
            .forward
            .get(abbr)
            .map(|t| t.iter().map(|(e, &n)| (e.clone(), n)).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn abbreviations_of(&self, exp: &str) -> BTreeSet<String> {
        self.reverse.get(exp).cloned().unwrap_or_default()
    }

    /// Unigram counts of the abbreviated side.
    pub fn abbr_counts(&self) -> impl Iterator<Item = (&str, u64)> {
        self.forward
            .iter()
            .map(|(a, t)| (a.as_str(), t.values().sum()))
    }

    /// Unigram counts of the expanded side.
    pub fn exp_counts(&self) -> BTreeMap<&str, u64> {
        let mut out: BTreeMap<&str, u64> = BTreeMap::new();
        for targets in self.forward.values() {
            for (e, &n) in targets {
                *out.entry(e.as_str()).or_default() += n;
            }
        }
        out
    }
}

pub fn learn_lexicon(train: &AlignedCorpus) -> AbbreviationLexicon {
    let mut lex = AbbreviationLexicon::default();
    for (a, e) in train.pairs() {
        lex.add(a, e, 1);
    }
    lex
}
