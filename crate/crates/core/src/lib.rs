//! Normalisation toolkit for heavily abbreviated medieval Latin transcriptions.
//!
//! The crate is organised after the processing chain it implements:
//!
//! - [`corpus`]: token-aligned ground truth, dataset variants, splits and statistics.
//! - [`abbrev`]: sign taxonomy, the learned abbreviation lexicon and sign-substitution rules.
//! - [`segmenter`]: a trainable word segmenter for space-free text.
//! - [`normalizer`]: contextual abbreviation expansion (lexicon + rules + n-gram LM, beam decoded).
//! - [`metrics`]: Levenshtein-based CER/WER and precision/recall/F arithmetic.
//! - [`pipeline`]: HTR noise simulation, end-to-end runs, experiment matrices and reports.
//!
//! Text is never Unicode-normalised: combining abbreviation marks are kept exactly as
//! transcribed, and most operations work on extended grapheme clusters so that a mark
//! stays attached to its base letter.

pub mod abbrev;
pub mod container;
pub mod corpus;
pub mod metrics;
pub mod normalizer;
pub mod pipeline;
pub mod segmenter;
pub mod text;

pub use abbrev::{AbbreviationLexicon, SignCategory, SignClass, SignRule};
pub use corpus::{AlignedCorpus, AlignedLine, DatasetVariant, Split, VariantKind};
pub use normalizer::{NormalizerConfig, NormalizerModel};
pub use pipeline::{EvalReport, NoiseConfig, PipelineConfig};
pub use segmenter::{SegmenterConfig, SegmenterModel};

/// Hex-encoded SHA-256 digest, used for dataset fingerprints and config hashes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    use std::fmt::Write;

    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}
