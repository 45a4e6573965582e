//! Config file: TOML or JSON, chosen by extension (anything but `.json` is TOML).
//!
//! ```toml
//! [segmenter]
//! epochs = 10
//!
//! [normalizer]
//! lambda = 0.6
//!
//! [[setup]]
//! setup_id = "3b"
//! input_variant = "abb2"
//! use_segmenter = true
//! use_normalizer = true
//! segmenter_model = "seg.model"
//! normalizer_model = "norm.model"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use scripta::{NormalizerConfig, PipelineConfig, SegmenterConfig};
use serde::Deserialize;

pub const ENV_VAR: &str = "SCRIPTA_CONFIG";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub segmenter: Option<SegmenterConfig>,
    #[serde(default)]
    pub normalizer: Option<NormalizerConfig>,
    #[serde(default, rename = "setup")]
    pub setups: Vec<PipelineConfig>,
}

/// A loaded config and the directory its relative paths resolve against.
#[derive(Debug, Default)]
pub struct Loaded {
    pub file: FileConfig,
    pub base_dir: PathBuf,
}

pub fn parse(text: &str, json: bool) -> Result<FileConfig> {
    if json {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(toml::from_str(text)?)
    }
}

/// Loads `explicit`, else the file named by `SCRIPTA_CONFIG`, else an empty config.
pub fn load(explicit: Option<&Path>) -> Result<Loaded> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(ENV_VAR)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from),
    };
    let Some(path) = path else {
        return Ok(Loaded {
            base_dir: PathBuf::from("."),
            ..Default::default()
        });
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let json = path.extension().is_some_and(|e| e == "json");
    let file = parse(&text, json).with_context(|| format!("parsing config {}", path.display()))?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { file, base_dir })
}
