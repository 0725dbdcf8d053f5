//! Video ingestion: manifests, MOS normalization, decoding and frame subsampling.

mod decode;
mod manifest;

pub use decode::{decode_video, encode_y4m, write_frame_dir};
pub use manifest::{
    load_manifest, DatasetManifest, MosRange, NormalizationMode, QualityRecord, Split, Subset,
    ValidationIssue, ValidationReport,
};

use crate::error::{Error, Result};
use crate::frame::RgbFrame;

/// Frames a video must have before it can be split into clips.
pub const MIN_FRAMES: usize = 8;

/// Frame rate as a rational number. Informational only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Self {
        Self { num, den: den.max(1) }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        Self::new(30, 1)
    }
}

/// A decoded frame sequence in presentation order.
///
/// All frames share one resolution. Construction accepts any non-empty
/// sequence so that subsampled views can be represented; the clip pipeline
/// separately requires at least [`MIN_FRAMES`].
#[derive(Clone, Debug, PartialEq)]
pub struct VideoFrames {
    video_id: String,
    frames: Vec<RgbFrame>,
    fps: FrameRate,
}

impl VideoFrames {
    pub fn new(video_id: impl Into<String>, frames: Vec<RgbFrame>, fps: FrameRate) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidFrame("video has no frames".into()))?;
        let (w, h) = (first.width(), first.height());
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.width() != w || f.height() != h)
        {
            return Err(Error::InvalidFrame(format!(
                "frame {} is {}x{}, expected {w}x{h}",
                i + 1,
                f.width(),
                f.height()
            )));
        }
        Ok(Self {
            video_id: video_id.into(),
            frames,
            fps,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frames(&self) -> &[RgbFrame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn fps(&self) -> FrameRate {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Frame at a 1-indexed position.
    pub fn frame(&self, index: usize) -> Result<&RgbFrame> {
        index
            .checked_sub(1)
            .and_then(|i| self.frames.get(i))
            .ok_or_else(|| {
                Error::InvalidIndex(format!(
                    "frame {index} outside 1..={}",
                    self.frames.len()
                ))
            })
    }
}

/// Maps a raw MOS onto [0, 100] with the affine transform
/// `100 * (mos - min) / (max - min)`.
pub fn normalize_mos(mos: f64, mos_min: f64, mos_max: f64) -> Result<f64> {
    if !(mos_max > mos_min) {
        return Err(Error::DegenerateRange {
            min: mos_min,
            max: mos_max,
        });
    }
    Ok(100.0 * (mos - mos_min) / (mos_max - mos_min))
}

/// Keeps the frames at 1-indexed positions 1, 5, 9, ...
pub fn subsample_one_in_four(video: &VideoFrames) -> Result<VideoFrames> {
    if video.frame_count() < 4 {
        return Err(Error::InvalidFrame(format!(
            "1-in-4 subsampling needs at least 4 frames, got {}",
            video.frame_count()
        )));
    }
    let frames = video.frames.iter().step_by(4).cloned().collect();
    VideoFrames::new(video.video_id.clone(), frames, video.fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn video(n: usize) -> VideoFrames {
        let frames = (0..n)
            .map(|i| RgbFrame::filled(2, 2, [i as u8, 0, 0]))
            .collect();
        VideoFrames::new("v", frames, FrameRate::default()).unwrap()
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        assert_eq!(normalize_mos(20.0, 20.0, 100.0).unwrap(), 0.0);
        assert_eq!(normalize_mos(100.0, 20.0, 100.0).unwrap(), 100.0);
        assert!((normalize_mos(60.0, 20.0, 100.0).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_degenerate_range() {
        assert!(matches!(
            normalize_mos(3.0, 3.0, 3.0),
            Err(Error::DegenerateRange { .. })
        ));
        assert!(normalize_mos(3.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn subsample_counts() {
        assert_eq!(subsample_one_in_four(&video(240)).unwrap().frame_count(), 60);
        let one = subsample_one_in_four(&video(4)).unwrap();
        assert_eq!(one.frames()[0].pixel(0, 0)[0], 0);
        let two = subsample_one_in_four(&video(5)).unwrap();
        let picked: Vec<u8> = two.frames().iter().map(|f| f.pixel(0, 0)[0]).collect();
        assert_eq!(picked, vec![0, 4]);
        assert!(subsample_one_in_four(&video(3)).is_err());
    }

    #[test]
    fn mixed_resolution_rejected() {
        let frames = vec![RgbFrame::filled(2, 2, [0; 3]), RgbFrame::filled(3, 2, [0; 3])];
        assert!(VideoFrames::new("v", frames, FrameRate::default()).is_err());
    }

    #[test]
    fn frame_lookup_is_one_indexed() {
        let v = video(8);
        assert_eq!(v.frame(1).unwrap().pixel(0, 0)[0], 0);
        assert_eq!(v.frame(8).unwrap().pixel(0, 0)[0], 7);
        assert!(v.frame(0).is_err());
        assert!(v.frame(9).is_err());
    }

    proptest! {
        #[test]
        fn subsample_length_is_ceil_quarter(n in 4usize..200) {
            prop_assert_eq!(subsample_one_in_four(&video(n)).unwrap().frame_count(), n.div_ceil(4));
        }

        #[test]
        fn normalization_preserves_order(
            scores in proptest::collection::vec(-50.0f64..150.0, 2..30),
        ) {
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi > lo);
            let norm: Vec<f64> = scores.iter().map(|&s| normalize_mos(s, lo, hi).unwrap()).collect();
            for i in 0..scores.len() {
                for j in 0..scores.len() {
                    if scores[i] < scores[j] {
                        prop_assert!(norm[i] < norm[j]);
                    }
                }
            }
        }
    }
}
