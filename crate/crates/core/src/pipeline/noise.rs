//! Random character corruption standing in for recognition errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text;

/// Per-grapheme substitution, deletion and insertion rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sub_rate: f64,
    #[serde(default)]
    pub del_rate: f64,
    #[serde(default)]
    pub ins_rate: f64,
    /// Graphemes drawn for substitutions and insertions. When empty, the pipeline
    /// uses the class inventory of its input lines (spaces excluded).
    #[serde(default)]
    pub charset: String,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [
            ("sub_rate", self.sub_rate),
            ("del_rate", self.del_rate),
            ("ins_rate", self.ins_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.sub_rate + self.del_rate > 1.0 {
            return Err("sub_rate + del_rate must not exceed 1".into());
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sub_rate == 0.0 && self.del_rate == 0.0 && self.ins_rate == 0.0
    }
}

/// Corrupts `line` with a generator seeded from `cfg.seed`.
pub fn simulate_htr_noise(line: &str, cfg: &NoiseConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    corrupt(line, cfg, &text::graphemes(&cfg.charset), &mut rng)
}

/// Seed used for line `index` of a run, so that every line's corruption is
/// independent of the others and of processing order.
pub fn line_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finaliser over (seed, index)
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn corrupt<R: Rng>(
    line: &str,
    cfg: &NoiseConfig,
    charset: &[&str],
    rng: &mut R,
) -> String {
    if cfg.is_silent() {
        return line.to_string();
    }
    let mut out = String::with_capacity(line.len());
    let draw = |rng: &mut R| -> Option<&str> {
        if charset.is_empty() {
            None
        } else {
            Some(charset[rng.gen_range(0..charset.len())])
        }
    };
    for g in text::graphemes(line) {
        let u: f64 = rng.gen();
        if u < cfg.del_rate {
            // deleted
        } else if u < cfg.del_rate + cfg.sub_rate {
            out.push_str(draw(rng).unwrap_or(g));
        } else {
            out.push_str(g);
        }
        if rng.gen::<f64>() < cfg.ins_rate {
            if let Some(ins) = draw(rng) {
                out.push_str(ins);
            }
        }
    }
    out
}
