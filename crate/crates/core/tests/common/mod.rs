//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scripta::{AlignedCorpus, AlignedLine};

/// Expanded word and its abbreviated spelling. Every spelling is unique and never
/// collides with an expanded word.
pub const ABBREVIATED: &[(&str, &str)] = &[
    ("dominus", "dñs"),
    ("domini", "dñi"),
    ("domino", "dño"),
    ("sanctus", "sc\u{304}s"),
    ("sancti", "sc\u{304}i"),
    ("est", "ē"),
    ("et", "⁊"),
    ("quod", "q\u{304}d"),
    ("quam", "q̃"),
    ("per", "ꝑ"),
    ("pro", "ꝓ"),
    ("non", "ñ"),
    ("noster", "nr\u{304}"),
    ("omnia", "oĩa"),
    ("omnes", "oẽs"),
    ("gratia", "grã"),
    ("misericordia", "mīa"),
    ("spiritus", "sp\u{304}s"),
    ("autem", "aũ"),
    ("tamen", "tñ"),
    ("nisi", "nĩ"),
    ("ecclesia", "eccl\u{304}ia"),
    ("contra", "ꝯtra"),
    ("concordia", "ꝯcordia"),
    ("curamus", "curam\u{303}"),
    ("opponere", "oppoñe"),
];

/// Words that are always written out.
pub const PLAIN: &[&str] = &[
    "in",
    "ad",
    "cum",
    "de",
    "ex",
    "sed",
    "ut",
    "si",
    "nunc",
    "hic",
    "ille",
    "illa",
    "ita",
    "sic",
    "enim",
    "nos",
    "vos",
    "ego",
    "tu",
    "deus",
    "rex",
    "lex",
    "pax",
    "terra",
    "caelum",
    "verbum",
    "erat",
    "apud",
    "principio",
    "homo",
    "homines",
    "populus",
    "civitas",
    "tempore",
    "anno",
    "die",
    "filius",
    "pater",
    "mater",
    "frater",
    "liber",
    "locus",
    "opus",
    "vita",
    "mors",
    "corpus",
    "anima",
    "sermo",
    "scriptura",
    "ratio",
    "causa",
    "modo",
    "domo",
    "magna",
    "parva",
    "bona",
    "mala",
    "nova",
    "vetus",
    "dixit",
    "fecit",
    "venit",
    "habet",
    "debet",
    "potest",
    "videtur",
    "dicitur",
    "scilicet",
    "videlicet",
    "item",
    "quoque",
    "iterum",
    "semper",
    "numquam",
    "ibi",
    "ubi",
    "unde",
    "postea",
    "ante",
    "post",
    "inter",
    "super",
    "sub",
    "sine",
    "propter",
    "secundum",
    "usque",
    "ergo",
    "igitur",
    "tunc",
    "ti",
];

/// Probability that an abbreviable word is written abbreviated.
pub const ABBREVIATION_RATE: f64 = 0.7;

/// Seeded synthetic corpus: `n_lines` lines of 4 to 9 words drawn with Zipf-like weights.
pub fn synthetic_corpus(n_lines: usize, seed: u64) -> AlignedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<(&str, Option<&str>)> = ABBREVIATED
        .iter()
        .map(|&(e, a)| (e, Some(a)))
        .chain(PLAIN.iter().map(|&w| (w, None)))
        .collect();
    // interleave so both word kinds get high ranks
    let mut order: Vec<usize> = (0..vocab.len()).collect();
    order.sort_by_key(|&i| (i % 7, i));
    let weights: Vec<f64> = (0..vocab.len()).map(|r| 1.0 / (r as f64 + 2.0)).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let lines = (0..n_lines)
        .map(|i| {
            let n = rng.gen_range(4..=9);
            let pairs: Vec<(String, String)> = (0..n)
                .map(|_| {
                    let (exp, abbr) = vocab[order[dist.sample(&mut rng)]];
                    let written = match abbr {
                        Some(a) if rng.gen_bool(ABBREVIATION_RATE) => a,
                        _ => exp,
                    };
                    (written.to_string(), exp.to_string())
                })
                .collect();
            AlignedLine::new(format!("syn-{i:05}"), pairs).expect("valid line")
        })
        .collect();
    AlignedCorpus::new(lines, Default::default()).expect("unique ids")
}

/// The line from the printed ground-truth sample.
pub const SAMPLE_PAIRS: &[(&str, &str)] = &[
    ("p\u{304}", "pro"),
    ("domo", "domo"),
    ("dñi", "domini"),
    ("nos", "nos"),
    ("oppoñe", "opponere"),
    ("ñ", "non"),
    ("curam\u{303}.", "curamus."),
    ("ti", "ti"),
];
pub const SAMPLE_ABB2: &str = "p\u{304}domodñinosoppoñeñcuram\u{303}.ti";
pub const SAMPLE_EXP1: &str = "pro domo domini nos opponere non curamus. ti";

pub fn sample_line() -> AlignedLine {
    AlignedLine::from_pairs("sample", SAMPLE_PAIRS).expect("valid line")
}

/// A corpus whose every abbreviated token has exactly one expansion: the sample line
/// followed by `n` seeded recombinations of its tokens.
pub fn unambiguous_fixture(n: usize, seed: u64) -> AlignedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = vec![sample_line()];
    for i in 0..n {
        let len = rng.gen_range(3..=7);
        let pairs: Vec<(&str, &str)> = (0..len)
            .map(|_| SAMPLE_PAIRS[rng.gen_range(0..SAMPLE_PAIRS.len())])
            .collect();
        lines.push(AlignedLine::from_pairs(&format!("fx-{i:04}"), &pairs).expect("valid line"));
    }
    AlignedCorpus::new(lines, Default::default()).expect("unique ids")
}
