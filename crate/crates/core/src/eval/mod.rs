//! Correlation and error metrics, the quartic scatter fit, and per-video
//! picture attributes.

mod attributes;
mod fit;
mod metrics;

pub use attributes::{analyze_video, attribute_brightness, attribute_colorfulness, attribute_contrast, AttributeReport};
pub use fit::{poly_eval, poly_fit4, FIT_DEGREE};
pub use metrics::{average_ranks, plcc, rmse, srcc};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{read_cache, ProvenanceHeader};
use crate::ingest::{DatasetManifest, Split};
use crate::model::{forward_clips, QualityModelParams};
use crate::training::Sample;

/// Metrics over one set of predictions. Correlations that are undefined
/// for the inputs are `None`, with the reason listed in `errors`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub srcc: Option<f64>,
    pub plcc_raw: Option<f64>,
    pub plcc_fitted: Option<f64>,
    pub rmse: f64,
    pub fit_coeffs: Option<[f64; FIT_DEGREE + 1]>,
    pub errors: Vec<String>,
}

pub fn compute_metrics(pred: &[f64], gt: &[f64]) -> Result<MetricReport> {
    let rmse = rmse(pred, gt)?;
    let mut errors = Vec::new();
    let mut keep = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    let srcc = keep("srcc", srcc(pred, gt));
    let plcc_raw = keep("plcc_raw", plcc(pred, gt, false));
    let plcc_fitted = keep("plcc_fitted", plcc(pred, gt, true));
    let fit_coeffs = poly_fit4(pred, gt).ok();
    Ok(MetricReport {
        n: pred.len(),
        srcc,
        plcc_raw,
        plcc_fitted,
        rmse,
        fit_coeffs,
        errors,
    })
}

/// One row of the scores file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub video_id: String,
    pub gt_mos: f64,
    pub pred_score: f64,
}

/// Scores every sample with the model and computes all metrics.
pub fn evaluate(params: &QualityModelParams, samples: &[Sample]) -> Result<(MetricReport, Vec<ScoreRow>)> {
    if samples.is_empty() {
        return Err(Error::Training("nothing to evaluate: the split is empty".into()));
    }
    let rows = samples
        .par_iter()
        .map(|s| {
            let (q, _) = forward_clips(&s.inputs(), params)?;
            Ok(ScoreRow {
                video_id: s.video_id.clone(),
                gt_mos: s.target,
                pred_score: q,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pred: Vec<f64> = rows.iter().map(|r| r.pred_score).collect();
    let gt: Vec<f64> = rows.iter().map(|r| r.gt_mos).collect();
    Ok((compute_metrics(&pred, &gt)?, rows))
}

/// Loads the cached features of one split as labelled samples.
pub fn load_split_samples(
    manifest: &DatasetManifest,
    split: Split,
    cache_dir: &Path,
    expected: &ProvenanceHeader,
) -> Result<Vec<Sample>> {
    manifest
        .split(split)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|rec| {
            let bundle = read_cache(&rec.video_id, cache_dir, expected)?;
            Ok(Sample::from_bundle(&bundle, rec.target()?))
        })
        .collect()
}

pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &MetricReport) -> Result<()> {
    crate::model::write_json_atomic(path, report)
}

/// Writes one summary row per video (`video_id,frames,brightness,contrast,colorfulness`).
pub fn write_attributes_csv(path: &Path, reports: &[AttributeReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["video_id", "frames", "brightness", "contrast", "colorfulness"])
        .map_err(|e| Error::Io(e.into()))?;
    for r in reports {
        w.write_record([
            r.video_id.clone(),
            r.frame_indices.len().to_string(),
            r.brightness.to_string(),
            r.contrast.to_string(),
            r.colorfulness.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Long-form per-frame series (`video_id,frame,brightness,contrast,colorfulness`).
pub fn write_attribute_series_csv(path: &Path, reports: &[AttributeReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["video_id", "frame", "brightness", "contrast", "colorfulness"])
        .map_err(|e| Error::Io(e.into()))?;
    for r in reports {
        for i in 0..r.frame_indices.len() {
            w.write_record([
                r.video_id.clone(),
                r.frame_indices[i].to_string(),
                r.brightness_series[i].to_string(),
                r.contrast_series[i].to_string(),
                r.colorfulness_series[i].to_string(),
            ])
            .map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}
