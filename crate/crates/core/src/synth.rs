//! Deterministic synthetic videos and datasets, for tests, examples and
//! smoke runs without real footage.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::ingest::{encode_y4m, FrameRate, Split, Subset, VideoFrames};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Scene brightness in `[0, 1]`.
    pub brightness: f64,
    /// Amplitude of per-pixel uniform noise, in 8-bit levels.
    pub noise: f64,
    /// Horizontal pan in pixels per frame.
    pub motion: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            frames: 16,
            brightness: 0.5,
            noise: 4.0,
            motion: 1.0,
        }
    }
}

fn scene_pixel(x: f64, y: f64, w: f64, h: f64) -> [f64; 3] {
    let u = x / w;
    let v = y / h;
    [
        0.55 + 0.35 * (6.0 * u).sin() * (4.0 * v).cos(),
        0.5 + 0.3 * (5.0 * (u + v)).cos(),
        0.45 + 0.25 * (9.0 * u - 3.0 * v).sin(),
    ]
}

/// Renders one frame of the panning test scene.
pub fn synth_frame(spec: &SynthSpec, t: usize, rng: &mut impl Rng) -> RgbFrame {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let shift = spec.motion * t as f64;
    RgbFrame::from_fn(spec.width, spec.height, |x, y| {
        let base = scene_pixel(x as f64 + shift, y as f64, w, h);
        let mut px = [0u8; 3];
        for c in 0..3 {
            let n = if spec.noise > 0.0 {
                rng.random_range(-spec.noise..=spec.noise)
            } else {
                0.0
            };
            let v = 255.0 * spec.brightness * 2.0 * base[c] + n;
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
        px
    })
}

pub fn synth_video(video_id: &str, spec: &SynthSpec, seed: u64) -> Result<VideoFrames> {
    if spec.frames == 0 || spec.width < 2 || spec.height < 2 {
        return Err(Error::Config("synthetic video needs frames and at least 2x2 pixels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..spec.frames).map(|t| synth_frame(spec, t, &mut rng)).collect();
    VideoFrames::new(video_id, frames, FrameRate::default())
}

/// One video per entry of `specs`, split 60/20/20 into train/val/test (in
/// order), encoded as `.y4m` under `dir` with a `manifest.csv` beside them.
/// The raw MOS of each video is `mos(spec)`.
pub fn write_synth_dataset(
    dir: &Path,
    specs: &[SynthSpec],
    seed: u64,
    mos: impl Fn(usize, &SynthSpec) -> f64,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.join("videos"))?;
    let n = specs.len();
    let n_train = (n * 3).div_ceil(5);
    let n_val = (n - n_train) / 2;
    let mut w = csv::Writer::from_path(dir.join("manifest.csv")).map_err(|e| Error::Io(e.into()))?;
    w.write_record(["video_path", "mos", "subset", "split"]).map_err(|e| Error::Io(e.into()))?;
    for (i, spec) in specs.iter().enumerate() {
        let rel = format!("videos/synth_{i:03}.y4m");
        let video = synth_video(&format!("synth_{i:03}"), spec, seed.wrapping_add(i as u64))?;
        encode_y4m(&dir.join(&rel), &video)?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        let subset = if spec.brightness < 0.5 { Subset::LowLight } else { Subset::OverExposed };
        w.write_record([rel, mos(i, spec).to_string(), subset.as_str().into(), split.as_str().into()])
            .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(dir.join("manifest.csv"))
}

/// `count` specs with brightness and noise spread evenly over their ranges.
pub fn graded_specs(count: usize, frames: usize) -> Vec<SynthSpec> {
    (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.5 };
            SynthSpec {
                frames,
                brightness: 0.15 + 0.7 * t,
                noise: 2.0 + 20.0 * ((i * 7) % count.max(1)) as f64 / count.max(1) as f64,
                motion: 0.5 + (i % 3) as f64,
                ..Default::default()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{decode_video, load_manifest, NormalizationMode};

    #[test]
    fn same_seed_same_video() {
        let s = SynthSpec::default();
        assert_eq!(synth_video("a", &s, 4).unwrap(), synth_video("a", &s, 4).unwrap());
        assert_ne!(synth_video("a", &s, 4).unwrap(), synth_video("a", &s, 5).unwrap());
    }

    #[test]
    fn brightness_orders_mean_luma() {
        let dark = synth_video("d", &SynthSpec { brightness: 0.2, ..Default::default() }, 0).unwrap();
        let bright = synth_video("b", &SynthSpec { brightness: 0.8, ..Default::default() }, 0).unwrap();
        let mean = |v: &VideoFrames| v.frames()[0].luma().iter().sum::<f64>();
        assert!(mean(&dark) < mean(&bright));
    }

    #[test]
    fn dataset_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let specs = graded_specs(5, 8);
        let path = write_synth_dataset(dir.path(), &specs, 1, |i, _| i as f64).unwrap();
        let m = load_manifest(&path, NormalizationMode::PerSubset, None).unwrap();
        assert_eq!(m.records.len(), 5);
        assert_eq!(m.split(Split::Train).count(), 3);
        assert_eq!(m.split(Split::Val).count(), 1);
        let v = decode_video(&m.resolve(&m.records[0])).unwrap();
        assert_eq!(v.frame_count(), 8);
    }
}
