use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, finish, read_to_string, write_err};
use crate::detector::{DetectorParams, Rois};
use crate::error::{Error, Result};
use crate::source::SourceParams;
use crate::stats::DEFAULT_CUTOFF;

pub const CONFIG_SCHEMA: u32 = 1;

/// Everything a run needs, as stored in the TOML configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    pub source: SourceParams,
    pub detector: DetectorParams,
    #[serde(default)]
    pub regions: Rois,
    #[serde(default)]
    pub run: RunControls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunControls {
    #[serde(default = "default_frames")]
    pub n_frames: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    /// Position-histogram bin width (mrad); one macropixel when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width_mrad: Option<f64>,
    /// Half width of the window around `s = 0` used for the Gaussian fits.
    #[serde(default = "default_fit_half_range")]
    pub fit_half_range_mrad: f64,
}

fn default_frames() -> u64 {
    10_000
}
fn default_seed() -> u64 {
    1
}
fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}
fn default_resamples() -> usize {
    200
}
fn default_fit_half_range() -> f64 {
    20.0
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            n_frames: default_frames(),
            seed: default_seed(),
            cutoff: default_cutoff(),
            resamples: default_resamples(),
            bin_width_mrad: None,
            fit_half_range_mrad: default_fit_half_range(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA,
            source: SourceParams::default(),
            detector: DetectorParams::default(),
            regions: Rois::default(),
            run: RunControls::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::invalid(
                "schema",
                format!(
                    "unsupported schema {} (expected {CONFIG_SCHEMA})",
                    self.schema
                ),
            ));
        }
        self.source.validate()?;
        self.detector.validate()?;
        self.regions.validate()?;
        if let Some(w) = self.run.bin_width_mrad {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(
                    "run.bin_width_mrad",
                    format!("must be > 0, got {w}"),
                ));
            }
        }
        let r = self.run.fit_half_range_mrad;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(
                "run.fit_half_range_mrad",
                format!("must be > 0, got {r}"),
            ));
        }
        Ok(())
    }

    /// Position-histogram bin width (mrad).
    pub fn bin_width(&self) -> f64 {
        self.run
            .bin_width_mrad
            .unwrap_or_else(|| self.detector.mrad_per_macropixel())
    }

    /// Parse and validate; unknown keys are returned as warnings.
    pub fn from_toml_str(text: &str) -> Result<(RunConfig, Vec<String>)> {
        let de = toml::Deserializer::parse(text).map_err(|e| toml_error(text, &e))?;
        let mut unknown = Vec::new();
        let config: RunConfig =
            serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
                .map_err(|e| toml_error(text, &e))?;
        let warnings = unknown
            .into_iter()
            .map(|key| {
                let segments: Vec<&str> = key.split('.').collect();
                match locate_key(text, &segments) {
                    Some(line) => format!("config line {line}: unknown key `{key}` ignored"),
                    None => format!("config: unknown key `{key}` ignored"),
                }
            })
            .collect();
        config.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let segments: Vec<&str> = name.split('.').collect();
                Error::Config {
                    line: locate_key(text, &segments),
                    key: Some(name),
                    message: reason,
                }
            }
            other => other,
        })?;
        Ok((config, warnings))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    Error::Config {
        line: e.span().map(|s| line_of(text, s.start)),
        key: None,
        message: e.message().trim().to_string(),
    }
}

/// 1-based line where a dotted key is assigned, following `[section]` headers.
fn locate_key(text: &str, path: &[&str]) -> Option<usize> {
    let (key, table) = path.split_last()?;
    let mut section: Vec<String> = Vec::new();
    let mut fallback = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            let inner = line.trim_matches(|c| c == '[' || c == ']').trim();
            section = inner.split('.').map(|s| s.trim().to_string()).collect();
            if section == table && key.is_empty() {
                return Some(n + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let mut full = section.clone();
        full.extend(
            lhs.trim()
                .split('.')
                .map(|s| s.trim().trim_matches('"').to_string()),
        );
        if full.len() == path.len() && full.iter().zip(path).all(|(a, b)| a == b) {
            return Some(n + 1);
        }
        // region rectangles are reported by their table header
        if fallback.is_none()
            && full.len() > table.len()
            && full.iter().zip(path.iter()).all(|(a, b)| a == b)
        {
            fallback = Some(n + 1);
        }
    }
    fallback
}

/// Read a configuration, logging any unknown keys.
pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let (config, warnings) = read_config_with_warnings(path)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(config)
}

pub fn read_config_with_warnings(path: impl AsRef<Path>) -> Result<(RunConfig, Vec<String>)> {
    RunConfig::from_toml_str(&read_to_string(path.as_ref())?)
}

pub fn write_config(config: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(config.to_toml_string().as_bytes())
        .map_err(write_err(path))?;
    finish(w, path)
}
