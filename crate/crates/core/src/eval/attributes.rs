use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::frame::RgbFrame;
use crate::ingest::{subsample_one_in_four, VideoFrames};

/// Per-frame attribute series over the 1-in-4 subsample, plus their means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub video_id: String,
    /// 1-based positions of the analysed frames in the source video.
    pub frame_indices: Vec<usize>,
    pub brightness_series: Vec<f64>,
    pub contrast_series: Vec<f64>,
    pub colorfulness_series: Vec<f64>,
    pub brightness: f64,
    pub contrast: f64,
    pub colorfulness: f64,
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    (mean, (m2 / n).max(0.0).sqrt())
}

/// Mean luma, 0-255.
pub fn attribute_brightness(frame: &RgbFrame) -> f64 {
    mean_std(frame.luma().into_iter()).0
}

/// Population standard deviation of luma.
pub fn attribute_contrast(frame: &RgbFrame) -> f64 {
    mean_std(frame.luma().into_iter()).1
}

/// Hasler–Süsstrunk colorfulness on `rg = R - G`, `yb = (R + G) / 2 - B`.
pub fn attribute_colorfulness(frame: &RgbFrame) -> f64 {
    let rg = frame.pixels().map(|[r, g, _]| r as f64 - g as f64);
    let yb = frame.pixels().map(|[r, g, b]| 0.5 * (r as f64 + g as f64) - b as f64);
    let (mu_rg, sd_rg) = mean_std(rg);
    let (mu_yb, sd_yb) = mean_std(yb);
    (sd_rg.powi(2) + sd_yb.powi(2)).sqrt() + 0.3 * (mu_rg.powi(2) + mu_yb.powi(2)).sqrt()
}

pub fn analyze_video(video: &VideoFrames) -> Result<AttributeReport> {
    let sampled = subsample_one_in_four(video)?;
    let rows: Vec<(f64, f64, f64)> = sampled
        .frames()
        .par_iter()
        .map(|f| {
            let (b, c) = mean_std(f.luma().into_iter());
            (b, c, attribute_colorfulness(f))
        })
        .collect();
    let mean = |k: fn(&(f64, f64, f64)) -> f64| rows.iter().map(k).sum::<f64>() / rows.len() as f64;
    Ok(AttributeReport {
        video_id: video.video_id().to_string(),
        frame_indices: (0..rows.len()).map(|i| 4 * i + 1).collect(),
        brightness: mean(|r| r.0),
        contrast: mean(|r| r.1),
        colorfulness: mean(|r| r.2),
        brightness_series: rows.iter().map(|r| r.0).collect(),
        contrast_series: rows.iter().map(|r| r.1).collect(),
        colorfulness_series: rows.iter().map(|r| r.2).collect(),
    })
}
