//! Per-clip spatial and temporal feature assembly plus the on-disk cache.
//!
//! Memory layout (layout version 1):
//!
//! | vector        | length        | order                                              |
//! |---------------|---------------|----------------------------------------------------|
//! | `sf`          | C1 + C2       | stage-1 GAP, then stage-2 GAP                      |
//! | `bnf_local`   | 150           | tiles row-major; per tile 5 brightness, 5 noise    |
//! | `bnf_global`  | 150           | same as `bnf_local`, averaged over clip frames     |
//! | `si`          | C1 + C2 + 300 | `sf`, `bnf_local`, `bnf_global`                    |
//! | `mf`          | D_mot         | motion encoder output                              |
//! | `bcf`         | 300           | levels 1..4, 75 each; per level tiles row-major x 5 |
//! | `ti`          | D_mot + 300   | `mf`, `bcf`                                        |

mod cache;
mod spatial;
mod temporal;

pub use cache::{cache_path, is_fresh, read_cache, read_cache_unchecked, write_cache, CACHE_EXTENSION};
pub use spatial::{assemble_spatial, brightness_noise_clip_global, brightness_noise_frame, semantic_feature};
pub use temporal::{
    assemble_temporal, assemble_temporal_with, brightness_consistency_levels,
    brightness_consistency_subvideo, brightness_feature_frame, population_variance, BrightnessTrack,
    LevelFeatures,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::{match_tiles, EncoderHandles, Prompts, HINT_COUNT};
use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::ingest::VideoFrames;
use crate::sampling::{resize_and_tile, select_key_frame, split_into_clips, CLIP_COUNT, LEVEL_COUNT, TILE_COUNT};

pub const LAYOUT_VERSION: u32 = 1;
/// 15 tiles x 5 probabilities x 2 categories.
pub const BNF_DIM: usize = TILE_COUNT * HINT_COUNT * 2;
/// 15 tiles x 5 brightness probabilities.
pub const BRIGHTNESS_DIM: usize = TILE_COUNT * HINT_COUNT;
pub const BCF_DIM: usize = BRIGHTNESS_DIM * LEVEL_COUNT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Frame stride for the clip-averaged brightness/noise vector; 1 = every frame.
    pub global_stride: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { global_stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFeatures {
    sf: Vec<f64>,
    bnf_local: Vec<f64>,
    bnf_global: Vec<f64>,
    si: Vec<f64>,
}

impl SpatialFeatures {
    pub fn new(sf: Vec<f64>, bnf_local: Vec<f64>, bnf_global: Vec<f64>) -> Result<Self> {
        if bnf_local.len() != BNF_DIM || bnf_global.len() != BNF_DIM {
            return Err(Error::Shape(format!(
                "brightness/noise blocks are {} and {}, expected {BNF_DIM}",
                bnf_local.len(),
                bnf_global.len()
            )));
        }
        let si = [sf.as_slice(), &bnf_local, &bnf_global].concat();
        Ok(Self {
            sf,
            bnf_local,
            bnf_global,
            si,
        })
    }

    pub fn sf(&self) -> &[f64] {
        &self.sf
    }

    pub fn bnf_local(&self) -> &[f64] {
        &self.bnf_local
    }

    pub fn bnf_global(&self) -> &[f64] {
        &self.bnf_global
    }

    pub fn si(&self) -> &[f64] {
        &self.si
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalFeatures {
    mf: Vec<f64>,
    bcf: Vec<f64>,
    ti: Vec<f64>,
}

impl TemporalFeatures {
    pub fn new(mf: Vec<f64>, bcf: Vec<f64>) -> Result<Self> {
        if bcf.len() != BCF_DIM {
            return Err(Error::Shape(format!("bcf has {} values, expected {BCF_DIM}", bcf.len())));
        }
        let ti = [mf.as_slice(), &bcf].concat();
        Ok(Self { mf, bcf, ti })
    }

    pub fn mf(&self) -> &[f64] {
        &self.mf
    }

    pub fn bcf(&self) -> &[f64] {
        &self.bcf
    }

    /// The 75-value block of `bcf` for `level` (1..=4).
    pub fn bcf_level(&self, level: usize) -> &[f64] {
        &self.bcf[(level - 1) * BRIGHTNESS_DIM..level * BRIGHTNESS_DIM]
    }

    pub fn ti(&self) -> &[f64] {
        &self.ti
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipFeatures {
    pub spatial: SpatialFeatures,
    pub temporal: TemporalFeatures,
}

/// Everything that determines feature values besides the pixels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceHeader {
    pub layout_version: u32,
    pub pipeline_version: String,
    pub semantic_backbone: String,
    pub motion_backbone: String,
    pub matcher_backbone: String,
    pub semantic_dims: (usize, usize),
    pub motion_dim: usize,
    pub prompts: Prompts,
    /// Set when the default graded placeholder hints are in use.
    pub placeholder_hints: bool,
    pub global_stride: usize,
}

impl ProvenanceHeader {
    pub fn new(encoders: &EncoderHandles, prompts: &Prompts, config: &FeatureConfig) -> Self {
        Self {
            layout_version: LAYOUT_VERSION,
            pipeline_version: env!("CARGO_PKG_VERSION").to_string(),
            semantic_backbone: encoders.semantic.name().to_string(),
            motion_backbone: encoders.motion.name().to_string(),
            matcher_backbone: encoders.matcher.name().to_string(),
            semantic_dims: encoders.semantic.stage_dims(),
            motion_dim: encoders.motion.dim(),
            prompts: prompts.clone(),
            placeholder_hints: prompts.uses_placeholder_hints(),
            global_stride: config.global_stride,
        }
    }

    pub fn si_dim(&self) -> usize {
        self.semantic_dims.0 + self.semantic_dims.1 + 2 * BNF_DIM
    }

    pub fn ti_dim(&self) -> usize {
        self.motion_dim + BCF_DIM
    }

    /// Names of fields that differ from `other`, empty when equal.
    pub fn differences(&self, other: &Self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut check = |name, differs: bool| {
            if differs {
                out.push(name);
            }
        };
        check("layout_version", self.layout_version != other.layout_version);
        check("pipeline_version", self.pipeline_version != other.pipeline_version);
        check("semantic_backbone", self.semantic_backbone != other.semantic_backbone);
        check("motion_backbone", self.motion_backbone != other.motion_backbone);
        check("matcher_backbone", self.matcher_backbone != other.matcher_backbone);
        check("semantic_dims", self.semantic_dims != other.semantic_dims);
        check("motion_dim", self.motion_dim != other.motion_dim);
        check("prompts", self.prompts != other.prompts);
        check("placeholder_hints", self.placeholder_hints != other.placeholder_hints);
        check("global_stride", self.global_stride != other.global_stride);
        out
    }
}

/// Eight clips of features for one video.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBundle {
    pub video_id: String,
    pub header: ProvenanceHeader,
    clips: Vec<ClipFeatures>,
}

impl FeatureBundle {
    pub fn new(video_id: impl Into<String>, header: ProvenanceHeader, clips: Vec<ClipFeatures>) -> Result<Self> {
        if clips.len() != CLIP_COUNT {
            return Err(Error::Shape(format!("{} clips, expected {CLIP_COUNT}", clips.len())));
        }
        let (si, ti) = (header.si_dim(), header.ti_dim());
        for (i, c) in clips.iter().enumerate() {
            if c.spatial.si().len() != si || c.temporal.ti().len() != ti {
                return Err(Error::Shape(format!(
                    "clip {}: |si| = {}, |ti| = {}, header declares {si} and {ti}",
                    i + 1,
                    c.spatial.si().len(),
                    c.temporal.ti().len()
                )));
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            header,
            clips,
        })
    }

    pub fn clips(&self) -> &[ClipFeatures] {
        &self.clips
    }
}

struct FrameScores {
    brightness: Vec<f64>,
    noise: Option<Vec<f64>>,
}

fn score_frame(encoders: &EncoderHandles, prompts: &Prompts, frame: &RgbFrame, with_noise: bool) -> Result<FrameScores> {
    let grid = resize_and_tile(frame)?;
    let flat = |scores: Vec<crate::encoders::MatcherScores>| -> Vec<f64> {
        scores.iter().flat_map(|s| s.probabilities).collect()
    };
    let brightness = flat(match_tiles(encoders.matcher.as_ref(), &grid.tiles, &prompts.brightness)?);
    let noise = if with_noise {
        Some(flat(match_tiles(encoders.matcher.as_ref(), &grid.tiles, &prompts.noise)?))
    } else {
        None
    };
    Ok(FrameScores { brightness, noise })
}

fn interleave(brightness: &[f64], noise: &[f64]) -> Vec<f64> {
    brightness
        .chunks_exact(HINT_COUNT)
        .zip(noise.chunks_exact(HINT_COUNT))
        .flat_map(|(b, n)| b.iter().chain(n).copied())
        .collect()
}

/// Full feature extraction for one video.
///
/// Each frame in `1..=8n` is tiled and matched once; the brightness scores
/// of every frame feed the consistency levels, and noise scores are computed
/// only for frames the brightness/noise vectors need. Frames are processed
/// in parallel; results do not depend on scheduling.
pub fn extract_features(
    video: &VideoFrames,
    encoders: &EncoderHandles,
    prompts: &Prompts,
    config: &FeatureConfig,
) -> Result<FeatureBundle> {
    prompts.validate()?;
    if config.global_stride == 0 {
        return Err(Error::Config("global_stride must be at least 1".into()));
    }
    let partition = split_into_clips(video.frame_count())?;
    let n = partition.frames_per_clip();
    let stride = config.global_stride;
    let needs_noise = |index: usize| ((index - 1) % n).is_multiple_of(stride);
    let scores: Vec<FrameScores> = (1..=partition.used_frames())
        .into_par_iter()
        .map(|i| score_frame(encoders, prompts, video.frame(i)?, needs_noise(i)))
        .collect::<Result<_>>()?;
    let track = BrightnessTrack::from_vectors(scores.iter().map(|s| s.brightness.clone()).collect())?;
    let levels = LevelFeatures::from_track(&track, n)?;
    let bn = |index: usize| -> Vec<f64> {
        let s = &scores[index - 1];
        interleave(&s.brightness, s.noise.as_ref().expect("noise scored for sampled frame"))
    };

    let clips = (1..=CLIP_COUNT)
        .into_par_iter()
        .map(|clip| -> Result<ClipFeatures> {
            let range = partition.clip_range(clip)?;
            let key = select_key_frame(&partition, clip)?;
            let sf = semantic_feature(encoders.semantic.as_ref(), video.frame(key)?)?;
            let local = bn(key);
            let sampled: Vec<usize> = range.clone().step_by(stride).collect();
            let mut global = vec![0.0; BNF_DIM];
            for &i in &sampled {
                global.iter_mut().zip(bn(i)).for_each(|(g, v)| *g += v);
            }
            global.iter_mut().for_each(|g| *g /= sampled.len() as f64);
            let spatial = SpatialFeatures::new(sf, local, global)?;
            let temporal = assemble_temporal_with(&levels, &partition, clip, video, encoders)?;
            Ok(ClipFeatures { spatial, temporal })
        })
        .collect::<Result<Vec<_>>>()?;

    let header = ProvenanceHeader::new(encoders, prompts, config);
    check_dimension_ledger(&header, encoders, &clips)?;
    FeatureBundle::new(video.video_id(), header, clips)
}

fn check_dimension_ledger(header: &ProvenanceHeader, encoders: &EncoderHandles, clips: &[ClipFeatures]) -> Result<()> {
    let si = encoders.semantic_dim() + 2 * BNF_DIM;
    let ti = encoders.motion_dim() + BCF_DIM;
    if header.si_dim() != si || header.ti_dim() != ti {
        return Err(Error::Shape("header dims disagree with encoder dims".into()));
    }
    for c in clips {
        if c.spatial.si().len() != si || c.temporal.ti().len() != ti {
            return Err(Error::Shape(format!(
                "assembled |si| = {}, |ti| = {}; expected {si} and {ti}",
                c.spatial.si().len(),
                c.temporal.ti().len()
            )));
        }
    }
    Ok(())
}
