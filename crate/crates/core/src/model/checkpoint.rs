use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::QualityModelParams;
use crate::error::{Error, Result};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// On-disk form of a parameter set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamsFile {
    pub format_version: u32,
    pub params: QualityModelParams,
}

/// Serialises `value` as JSON and renames it into place.
pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer(&mut tmp, value).map_err(|e| Error::checkpoint(path, e.to_string()))?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::checkpoint(path, e.to_string()))?;
    Ok(())
}

pub fn save_params(path: &Path, params: &QualityModelParams) -> Result<()> {
    write_json_atomic(
        path,
        &ParamsFile {
            format_version: PARAMS_FORMAT_VERSION,
            params: params.clone(),
        },
    )
}

pub fn load_params(path: &Path) -> Result<QualityModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::checkpoint(path, e.to_string()))?;
    let file: ParamsFile = serde_json::from_slice(&bytes).map_err(|e| Error::checkpoint(path, e.to_string()))?;
    if file.format_version != PARAMS_FORMAT_VERSION {
        return Err(Error::checkpoint(
            path,
            format!("format version {} (expected {PARAMS_FORMAT_VERSION})", file.format_version),
        ));
    }
    file.params.config.validate()?;
    Ok(file.params)
}

#[derive(Serialize)]
struct HvsExport<'a> {
    weights: &'a [f64],
    normalized: Vec<f64>,
}

/// Writes `{"weights": [...], "normalized": [...]}`, where `normalized`
/// divides by the weight sum.
pub fn export_hvs_weights(path: &Path, weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    write_json_atomic(
        path,
        &HvsExport {
            weights,
            normalized: weights.iter().map(|w| w / total).collect(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn params_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = QualityModelParams::init(ModelConfig { hidden_dim: 8, heads: 2, head_hidden: 4, ..Default::default() }, 5, 3, 9)
            .unwrap();
        let path = dir.path().join("params.json");
        save_params(&path, &p).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
    }

    #[test]
    fn rejects_other_versions() {
        let dir = tempfile::tempdir().unwrap();
        let p = QualityModelParams::init(ModelConfig { hidden_dim: 4, heads: 1, head_hidden: 2, ..Default::default() }, 2, 2, 0)
            .unwrap();
        let path = dir.path().join("p.json");
        write_json_atomic(&path, &ParamsFile { format_version: 99, params: p }).unwrap();
        assert!(matches!(load_params(&path), Err(Error::Checkpoint { .. })));
    }
}
