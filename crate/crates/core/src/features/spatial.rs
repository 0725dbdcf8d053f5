use super::{interleave, SpatialFeatures, BNF_DIM};
use crate::encoders::{match_tiles, EncoderHandles, ImageTextMatcher, Prompts, SemanticEncoder};
use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::ingest::VideoFrames;
use crate::sampling::{resize_and_tile, select_key_frame, ClipPartition};

/// GAP of each of the two stage maps, concatenated.
pub fn semantic_feature(encoder: &dyn SemanticEncoder, frame: &RgbFrame) -> Result<Vec<f64>> {
    let (first, second) = encoder.encode_stages(frame)?;
    let (c1, c2) = encoder.stage_dims();
    if first.channels != c1 || second.channels != c2 {
        return Err(Error::Shape(format!(
            "semantic encoder `{}` declared ({c1}, {c2}) channels but produced ({}, {})",
            encoder.name(),
            first.channels,
            second.channels
        )));
    }
    let mut out = first.global_average_pool();
    out.extend(second.global_average_pool());
    Ok(out)
}

/// The 150-value brightness/noise vector of one frame.
pub fn brightness_noise_frame(matcher: &dyn ImageTextMatcher, frame: &RgbFrame, prompts: &Prompts) -> Result<Vec<f64>> {
    let grid = resize_and_tile(frame)?;
    let flat = |set| -> Result<Vec<f64>> {
        Ok(match_tiles(matcher, &grid.tiles, set)?
            .into_iter()
            .flat_map(|s| s.probabilities)
            .collect())
    };
    let brightness = flat(&prompts.brightness)?;
    let noise = flat(&prompts.noise)?;
    Ok(interleave(&brightness, &noise))
}

/// Elementwise mean of [`brightness_noise_frame`] over every `stride`-th frame.
pub fn brightness_noise_clip_global(
    matcher: &dyn ImageTextMatcher,
    frames: &[RgbFrame],
    prompts: &Prompts,
    stride: usize,
) -> Result<Vec<f64>> {
    if stride == 0 || frames.is_empty() {
        return Err(Error::InvalidIndex("clip average needs frames and a positive stride".into()));
    }
    let mut sum = vec![0.0; BNF_DIM];
    let mut count = 0usize;
    for f in frames.iter().step_by(stride) {
        sum.iter_mut()
            .zip(brightness_noise_frame(matcher, f, prompts)?)
            .for_each(|(s, v)| *s += v);
        count += 1;
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    Ok(sum)
}

/// Spatial information of one clip: semantic and local brightness/noise
/// from the key frame, global brightness/noise from the clip.
pub fn assemble_spatial(
    partition: &ClipPartition,
    clip: usize,
    video: &VideoFrames,
    encoders: &EncoderHandles,
    prompts: &Prompts,
    stride: usize,
) -> Result<SpatialFeatures> {
    let range = partition.clip_range(clip)?;
    if range.end - 1 > video.frame_count() {
        return Err(Error::InvalidIndex(format!(
            "clip {clip} ends at frame {} but the video has {}",
            range.end - 1,
            video.frame_count()
        )));
    }
    let key = video.frame(select_key_frame(partition, clip)?)?;
    let sf = semantic_feature(encoders.semantic.as_ref(), key)?;
    let local = brightness_noise_frame(encoders.matcher.as_ref(), key, prompts)?;
    let frames = &video.frames()[range.start - 1..range.end - 1];
    let global = brightness_noise_clip_global(encoders.matcher.as_ref(), frames, prompts, stride)?;
    let expected = encoders.semantic_dim();
    if sf.len() != expected {
        return Err(Error::Shape(format!("|sf| = {}, expected {expected}", sf.len())));
    }
    SpatialFeatures::new(sf, local, global)
}
