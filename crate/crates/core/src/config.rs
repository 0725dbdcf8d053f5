//! The shared pipeline config file and its override layers.
//!
//! Precedence, lowest first: built-in defaults, the TOML file, `ECVQA_*`
//! environment variables, `--set section.key=value` flags. Every layer is
//! merged into one TOML table before deserializing, so all layers accept
//! exactly the keys the file does.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderConfig, Prompts};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::ingest::NormalizationMode;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Prefix of environment overrides: `ECVQA_TRAIN__EPOCHS=5` sets `train.epochs`.
pub const ENV_PREFIX: &str = "ECVQA_";
/// Log filter variable; not a config key.
pub const LOG_ENV: &str = "ECVQA_LOG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    /// Directory video paths resolve against; the manifest's own directory if unset.
    pub video_root: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub runs_dir: PathBuf,
    pub normalization: NormalizationMode,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            video_root: None,
            cache_dir: "cache".into(),
            runs_dir: "runs".into(),
            normalization: NormalizationMode::PerSubset,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub encoders: EncoderConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub prompts: Prompts,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table = Self::default_table()?;
        merge(&mut table, toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?);
        Self::from_table(table)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut table = Self::default_table()?;
        merge(&mut table, read_table(path)?);
        Self::from_table(table)
    }

    fn default_table() -> Result<toml::Table> {
        toml::Table::try_from(Self::default()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the effective config from all layers. `env` is usually
    /// `std::env::vars()`; `sets` are `section.key=value` strings.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        sets: &[String],
    ) -> Result<Self> {
        let mut table = Self::default_table()?;
        if let Some(p) = file {
            merge(&mut table, read_table(p)?);
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| env_key(&k).map(|key| (key, v)))
            .collect();
        env.sort();
        for (key, value) in &env {
            set_path(&mut table, key, parse_value(value))?;
        }
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form section.key=value")))?;
            set_path(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.prompts.validate()?;
        if self.features.global_stride == 0 {
            return Err(Error::Config("features.global_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Overlays `top` onto `base`; sub-tables merge key by key, other values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `ECVQA_TRAIN__BATCH_SIZE` -> `train.batch_size`; `None` for non-config variables.
fn env_key(name: &str) -> Option<String> {
    let rest = name.strip_prefix(ENV_PREFIX)?;
    if name == LOG_ENV || !rest.contains("__") {
        return None;
    }
    Some(rest.split("__").map(|p| p.to_ascii_lowercase()).collect::<Vec<_>>().join("."))
}

/// A TOML literal if `raw` parses as one, else the raw text as a string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed config key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("config key `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
