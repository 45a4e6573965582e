//! End-to-end runs: optional noise, then segmentation, then abbreviation expansion,
//! scored against expanded gold lines.

mod noise;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use noise::{line_seed, simulate_htr_noise, NoiseConfig};
pub use report::{parse_report_csv, render_report, ReportFormat, SummaryRow};

use crate::corpus::{
    build_variant, class_inventory, AlignedCorpus, ClassMode, DatasetVariant, VariantKind,
};
use crate::metrics::{self, CharUnit, MetricsError};
use crate::normalizer::{NormalizerError, NormalizerModel};
use crate::segmenter::{SegmentMode, SegmenterError, SegmenterModel, WordLexicon};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("setup {setup}: {message}")]
    InvalidConfig { setup: String, message: String },
    #[error("setup {setup}: the {stage} stage is enabled but no model was given")]
    MissingModel { setup: String, stage: &'static str },
    #[error("setup {setup}: {stage} model fingerprint {found} does not match recorded {expected}")]
    FingerprintMismatch {
        setup: String,
        stage: &'static str,
        expected: String,
        found: String,
    },
    #[error("setup {setup}, line {line}: {message}")]
    StageContract {
        setup: String,
        line: usize,
        message: String,
    },
    #[error("{what} has {found} lines, gold has {expected}")]
    LineCountMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate setup id {0:?}")]
    DuplicateSetup(String),
    #[error("no input lines for variant {0}")]
    MissingInput(VariantKind),
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
    #[error(transparent)]
    Normalizer(#[from] NormalizerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentModeName {
    #[default]
    Threshold,
    /// Lexicon decoding; the word list comes from the normaliser model's lexicon
    /// (abbreviated side for abbreviated input, expanded side otherwise).
    LexiconDp,
}

/// One row of the setup matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub setup_id: String,
    pub input_variant: VariantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub use_segmenter: bool,
    #[serde(default)]
    pub use_normalizer: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmenter_model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer_model: Option<PathBuf>,
    #[serde(default)]
    pub segment_mode: SegmentModeName,
    #[serde(default)]
    pub cer_unit: CharUnit,
}

impl PipelineConfig {
    /// A configuration with every stage off.
    pub fn identity(setup_id: &str, input_variant: VariantKind) -> Self {
        PipelineConfig {
            setup_id: setup_id.to_string(),
            input_variant,
            noise: None,
            use_segmenter: false,
            use_normalizer: false,
            segmenter_model: None,
            normalizer_model: None,
            segment_mode: SegmentModeName::Threshold,
            cer_unit: CharUnit::Codepoint,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| PipelineError::InvalidConfig {
            setup: self.setup_id.clone(),
            message: m,
        };
        if self.setup_id.is_empty() {
            return Err(bad("setup_id must not be empty".into()));
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(bad)?;
        }
        if self.use_segmenter && self.input_variant.is_spaced() {
            return Err(bad(format!(
                "the segmenter expects unspaced input, {} is spaced",
                self.input_variant
            )));
        }
        if self.use_normalizer && self.input_variant == VariantKind::Abb2 && !self.use_segmenter {
            return Err(bad(
                "unspaced abbreviated input needs the segmenter before the normaliser".into(),
            ));
        }
        Ok(())
    }

    /// Short digest of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        crate::sha256_hex(&json)[..16].to_string()
    }
}

/// A configured pipeline with its models loaded.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    segmenter: Option<Arc<SegmenterModel>>,
    normalizer: Option<Arc<NormalizerModel>>,
    word_lexicon: Option<Arc<WordLexicon>>,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        segmenter: Option<Arc<SegmenterModel>>,
        normalizer: Option<Arc<NormalizerModel>>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let missing = |stage| PipelineError::MissingModel {
            setup: config.setup_id.clone(),
            stage,
        };
        if config.use_segmenter && segmenter.is_none() {
            return Err(missing("segmentation"));
        }
        if config.use_normalizer && normalizer.is_none() {
            return Err(missing("normalisation"));
        }
        let word_lexicon = match (config.use_segmenter, config.segment_mode) {
            (true, SegmentModeName::LexiconDp) => {
                let norm = normalizer
                    .as_ref()
                    .ok_or_else(|| missing("lexicon (normaliser model)"))?;
                Some(Arc::new(if config.input_variant.is_abbreviated() {
                    WordLexicon::from_abbreviations(&norm.lexicon)
                } else {
                    WordLexicon::from_expansions(&norm.lexicon)
                }))
            }
            _ => None,
        };
        Ok(Pipeline {
            config,
            segmenter,
            normalizer,
            word_lexicon,
        })
    }

    /// Loads the models named in `config`; relative paths resolve against `base_dir`.
    pub fn from_config(config: PipelineConfig, base_dir: &Path) -> Result<Self, PipelineError> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        let segmenter = match (&config.segmenter_model, config.use_segmenter) {
            (Some(p), true) => Some(Arc::new(SegmenterModel::load(resolve(p))?)),
            _ => None,
        };
        let needs_norm = config.use_normalizer
            || (config.use_segmenter && config.segment_mode == SegmentModeName::LexiconDp);
        let normalizer = match (&config.normalizer_model, needs_norm) {
            (Some(p), true) => Some(Arc::new(NormalizerModel::load(resolve(p))?)),
            _ => None,
        };
        Self::new(config, segmenter, normalizer)
    }

    /// Rebuilds a pipeline from a report row, checking that the models on disk are the
    /// ones the row was produced with.
    pub fn from_provenance(
        prov: &report::Provenance,
        base_dir: &Path,
    ) -> Result<Self, PipelineError> {
        let p = Self::from_config(prov.config.clone(), base_dir)?;
        let check =
            |stage, expected: &Option<String>, found: Option<String>| match (expected, found) {
                (Some(e), Some(f)) if *e != f => Err(PipelineError::FingerprintMismatch {
                    setup: prov.config.setup_id.clone(),
                    stage,
                    expected: e.clone(),
                    found: f,
                }),
                _ => Ok(()),
            };
        check(
            "segmentation",
            &prov.segmenter,
            p.segmenter.as_ref().map(|m| m.fingerprint()),
        )?;
        check(
            "normalisation",
            &prov.normalizer,
            p.normalizer.as_ref().map(|m| m.fingerprint()),
        )?;
        Ok(p)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn contract(&self, line: usize, message: String) -> PipelineError {
        PipelineError::StageContract {
            setup: self.config.setup_id.clone(),
            line,
            message,
        }
    }

    /// Charset used by the noise stage for these input lines.
    pub fn noise_charset(&self, lines: &[impl AsRef<str>]) -> String {
        match &self.config.noise {
            Some(n) if !n.charset.is_empty() => n.charset.clone(),
            Some(_) => default_charset(lines),
            None => String::new(),
        }
    }

    /// Noise stage for line `index` (0-based). Identity when noise is off.
    pub fn noise_stage(&self, index: usize, line: &str, charset: &str) -> String {
        match &self.config.noise {
            Some(n) if !n.is_silent() => {
                let graphemes = crate::text::graphemes(charset);
                let mut rng = ChaCha8Rng::seed_from_u64(line_seed(n.seed, index));
                noise::corrupt(line, n, &graphemes, &mut rng)
            }
            _ => line.to_string(),
        }
    }

    /// Segmentation stage; identity when the segmenter is off.
    pub fn segment_stage(&self, index: usize, line: &str) -> Result<String, PipelineError> {
        let Some(model) = self
            .segmenter
            .as_deref()
            .filter(|_| self.config.use_segmenter)
        else {
            return Ok(line.to_string());
        };
        if line.contains(' ') {
            return Err(self.contract(index + 1, "spaced input reached the segmenter".into()));
        }
        let mode = match &self.word_lexicon {
            Some(lex) => SegmentMode::LexiconDp(lex),
            None => SegmentMode::Threshold,
        };
        Ok(model.segment(line, mode)?)
    }

    /// Normalisation stage; identity when the normaliser is off.
    pub fn normalize_stage(&self, index: usize, line: &str) -> Result<String, PipelineError> {
        let Some(model) = self
            .normalizer
            .as_deref()
            .filter(|_| self.config.use_normalizer)
        else {
            return Ok(line.to_string());
        };
        model
            .normalize_line(line)
            .map_err(|e| self.contract(index + 1, e.to_string()))
    }

    /// Runs every stage over `lines`, preserving order.
    pub fn run(&self, lines: &[impl AsRef<str>]) -> Result<Vec<String>, PipelineError> {
        Ok(self.run_traced(lines)?.1)
    }

    /// Like [`run`](Self::run) but also returns the post-noise lines.
    pub fn run_traced(
        &self,
        lines: &[impl AsRef<str>],
    ) -> Result<(Vec<String>, Vec<String>), PipelineError> {
        let charset = self.noise_charset(lines);
        let mut noisy = Vec::with_capacity(lines.len());
        let mut out = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let n = self.noise_stage(i, line.as_ref(), &charset);
            let s = self.segment_stage(i, &n)?;
            out.push(self.normalize_stage(i, &s)?);
            noisy.push(n);
        }
        Ok((noisy, out))
    }

    fn provenance(&self) -> report::Provenance {
        report::Provenance {
            config_hash: self.config.hash(),
            config: self.config.clone(),
            segmenter: self
                .segmenter
                .as_ref()
                .filter(|_| self.config.use_segmenter)
                .map(|m| m.fingerprint()),
            normalizer: self
                .normalizer
                .as_ref()
                .filter(|_| self.config.use_normalizer || self.word_lexicon.is_some())
                .map(|m| m.fingerprint()),
            noise_seed: self.config.noise.as_ref().map(|n| n.seed),
        }
    }
}

fn default_charset(lines: &[impl AsRef<str>]) -> String {
    let variant = DatasetVariant {
        kind: VariantKind::Exp2,
        lines: lines.iter().map(|l| l.as_ref().to_string()).collect(),
    };
    class_inventory(&variant, ClassMode::Grapheme)
        .classes
        .into_keys()
        .filter(|k| !k.chars().all(char::is_whitespace))
        .collect()
}

/// Input lines for every variant plus the expanded gold, all from one corpus.
pub fn experiment_inputs(
    corpus: &AlignedCorpus,
) -> (BTreeMap<VariantKind, Vec<String>>, Vec<String>) {
    let inputs = VariantKind::ALL
        .into_iter()
        .map(|k| (k, build_variant(corpus, k).lines))
        .collect();
    (inputs, build_variant(corpus, VariantKind::Exp1).lines)
}

/// One scored setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub setup_id: String,
    pub cer: f64,
    pub wer: f64,
    /// CER of the corrupted input against the clean input, when noise is on.
    pub htr_cer: Option<f64>,
    pub lines: usize,
    pub provenance: report::Provenance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// SHA-256 of the gold lines.
    pub gold_fingerprint: String,
}

fn lines_fingerprint(lines: &[String]) -> String {
    let mut buf = Vec::new();
    for l in lines {
        buf.extend_from_slice(l.as_bytes());
        buf.push(b'\n');
    }
    crate::sha256_hex(&buf)
}

/// Runs every setup on its input variant and scores the output against `gold`.
///
/// Setups run on up to `jobs` threads; rows come back sorted by setup id whatever the
/// scheduling.
pub fn run_experiment(
    setups: &[Pipeline],
    inputs: &BTreeMap<VariantKind, Vec<String>>,
    gold: &[String],
    jobs: usize,
) -> Result<EvalReport, PipelineError> {
    let mut ids = BTreeSet::new();
    for s in setups {
        if !ids.insert(s.config.setup_id.as_str()) {
            return Err(PipelineError::DuplicateSetup(s.config.setup_id.clone()));
        }
        let kind = s.config.input_variant;
        let lines = inputs.get(&kind).ok_or(PipelineError::MissingInput(kind))?;
        if lines.len() != gold.len() {
            return Err(PipelineError::LineCountMismatch {
                what: format!("input {kind}"),
                expected: gold.len(),
                found: lines.len(),
            });
        }
    }

    let score = |s: &Pipeline| -> Result<ReportRow, PipelineError> {
        let input = &inputs[&s.config.input_variant];
        let (noisy, out) = s.run_traced(input)?;
        let unit = s.config.cer_unit;
        let htr_cer = match &s.config.noise {
            Some(_) => Some(metrics::corpus_cer(&noisy, input, unit)?),
            None => None,
        };
        Ok(ReportRow {
            setup_id: s.config.setup_id.clone(),
            cer: metrics::corpus_cer(&out, gold, unit)?,
            wer: metrics::corpus_wer(&out, gold)?,
            htr_cer,
            lines: gold.len(),
            provenance: s.provenance(),
        })
    };

    let rows: Vec<Result<ReportRow, PipelineError>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| setups.par_iter().map(score).collect())
    } else {
        setups.iter().map(score).collect()
    };
    let mut rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| a.setup_id.cmp(&b.setup_id));
    Ok(EvalReport {
        rows,
        gold_fingerprint: lines_fingerprint(gold),
    })
}
