use super::{TemporalFeatures, BRIGHTNESS_DIM};
use crate::encoders::{match_tiles, EncoderHandles, ImageTextMatcher, PromptSet};
use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::ingest::VideoFrames;
use crate::sampling::{
    covering_part_index, level_parts, level_stride, resize_and_tile, subvideo, ClipPartition, SubVideoSpec,
    LEVEL_COUNT,
};

/// The 75-value brightness vector of one frame, tiles row-major.
pub fn brightness_feature_frame(matcher: &dyn ImageTextMatcher, frame: &RgbFrame, prompts: &PromptSet) -> Result<Vec<f64>> {
    let grid = resize_and_tile(frame)?;
    Ok(match_tiles(matcher, &grid.tiles, prompts)?
        .into_iter()
        .flat_map(|s| s.probabilities)
        .collect())
}

/// Per-dimension population variance across samples. One sample gives zeros.
pub fn population_variance<'a>(samples: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let samples: Vec<&[f64]> = samples.into_iter().collect();
    let dim = samples.first().map_or(0, |s| s.len());
    let count = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in &samples {
        mean.iter_mut().zip(*s).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; dim];
    for s in &samples {
        var.iter_mut()
            .zip(*s)
            .zip(&mean)
            .for_each(|((acc, v), m)| *acc += (v - m) * (v - m));
    }
    var.iter_mut().for_each(|v| *v /= count);
    var
}

/// Brightness vectors of frames `1..=len`, precomputed once per video.
#[derive(Clone, Debug, PartialEq)]
pub struct BrightnessTrack {
    vectors: Vec<Vec<f64>>,
}

impl BrightnessTrack {
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != BRIGHTNESS_DIM) {
            return Err(Error::Shape(format!("brightness vector of {} values", v.len())));
        }
        Ok(Self { vectors })
    }

    pub fn compute(
        matcher: &dyn ImageTextMatcher,
        video: &VideoFrames,
        frames: usize,
        prompts: &PromptSet,
    ) -> Result<Self> {
        let vectors = (1..=frames)
            .map(|i| brightness_feature_frame(matcher, video.frame(i)?, prompts))
            .collect::<Result<_>>()?;
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vector of the 1-indexed frame `index`.
    pub fn get(&self, index: usize) -> Result<&[f64]> {
        index
            .checked_sub(1)
            .and_then(|i| self.vectors.get(i))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidIndex(format!("frame {index} outside 1..={}", self.vectors.len())))
    }

    /// Population variance over the sub-video's frames, per dimension.
    pub fn subvideo_variance(&self, spec: &SubVideoSpec) -> Result<Vec<f64>> {
        let rows = spec
            .frame_indices
            .iter()
            .map(|&i| self.get(i))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::InvalidIndex("empty sub-video".into()));
        }
        Ok(population_variance(rows))
    }
}

/// Brightness consistency of one sub-video, computed straight from frames.
pub fn brightness_consistency_subvideo(
    spec: &SubVideoSpec,
    video: &VideoFrames,
    matcher: &dyn ImageTextMatcher,
    prompts: &PromptSet,
) -> Result<Vec<f64>> {
    let rows = spec
        .frame_indices
        .iter()
        .map(|&i| brightness_feature_frame(matcher, video.frame(i)?, prompts))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::InvalidIndex("empty sub-video".into()));
    }
    Ok(population_variance(rows.iter().map(Vec::as_slice)))
}

/// The 15 per-(level, part) consistency vectors: 1 + 2 + 4 + 8.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelFeatures {
    /// `by_level[level - 1][part]`
    by_level: Vec<Vec<Vec<f64>>>,
}

impl LevelFeatures {
    /// Averages the sub-video variances over offsets for each (level, part).
    pub fn from_track(track: &BrightnessTrack, n: usize) -> Result<Self> {
        let mut by_level = Vec::with_capacity(LEVEL_COUNT);
        for level in 1..=LEVEL_COUNT {
            let mut parts = Vec::with_capacity(level_parts(level));
            for part in 0..level_parts(level) {
                let offsets = level_stride(level);
                let mut mean = vec![0.0; BRIGHTNESS_DIM];
                for offset in 1..=offsets {
                    let var = track.subvideo_variance(&subvideo(level, part, offset, n)?)?;
                    mean.iter_mut().zip(var).for_each(|(m, v)| *m += v);
                }
                mean.iter_mut().for_each(|m| *m /= offsets as f64);
                parts.push(mean);
            }
            by_level.push(parts);
        }
        Ok(Self { by_level })
    }

    pub fn get(&self, level: usize, part: usize) -> Result<&[f64]> {
        level
            .checked_sub(1)
            .and_then(|l| self.by_level.get(l))
            .and_then(|parts| parts.get(part))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidIndex(format!("no consistency feature at level {level}, part {part}")))
    }

    pub fn count(&self) -> usize {
        self.by_level.iter().map(Vec::len).sum()
    }

    /// The concatenated 300-value vector for one clip, levels ascending.
    pub fn for_clip(&self, clip: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(BRIGHTNESS_DIM * LEVEL_COUNT);
        for level in 1..=LEVEL_COUNT {
            out.extend_from_slice(self.get(level, covering_part_index(level, clip)?)?);
        }
        Ok(out)
    }
}

pub fn brightness_consistency_levels(
    video: &VideoFrames,
    partition: &ClipPartition,
    matcher: &dyn ImageTextMatcher,
    prompts: &PromptSet,
) -> Result<LevelFeatures> {
    let track = BrightnessTrack::compute(matcher, video, partition.used_frames(), prompts)?;
    LevelFeatures::from_track(&track, partition.frames_per_clip())
}

/// Temporal information of one clip from precomputed level features.
pub fn assemble_temporal_with(
    levels: &LevelFeatures,
    partition: &ClipPartition,
    clip: usize,
    video: &VideoFrames,
    encoders: &EncoderHandles,
) -> Result<TemporalFeatures> {
    let range = partition.clip_range(clip)?;
    if range.end - 1 > video.frame_count() {
        return Err(Error::InvalidIndex(format!("clip {clip} beyond the video's frames")));
    }
    let mf = encoders.motion.encode(&video.frames()[range.start - 1..range.end - 1])?;
    if mf.len() != encoders.motion_dim() {
        return Err(Error::Shape(format!(
            "motion encoder `{}` declared {} dims but produced {}",
            encoders.motion.name(),
            encoders.motion_dim(),
            mf.len()
        )));
    }
    TemporalFeatures::new(mf, levels.for_clip(clip)?)
}

/// Temporal information of one clip, computing all level features first.
pub fn assemble_temporal(
    partition: &ClipPartition,
    clip: usize,
    video: &VideoFrames,
    encoders: &EncoderHandles,
    prompts: &PromptSet,
) -> Result<TemporalFeatures> {
    let levels = brightness_consistency_levels(video, partition, encoders.matcher.as_ref(), prompts)?;
    assemble_temporal_with(&levels, partition, clip, video, encoders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::mock::{GradedStatisticMatcher, UniformMatcher};
    use crate::encoders::Prompts;
    use crate::ingest::FrameRate;
    use crate::sampling::enumerate_subvideos;

    fn video_with_levels(levels: &[u8]) -> VideoFrames {
        let frames = levels
            .iter()
            .map(|&l| RgbFrame::from_fn(20, 12, |x, _| [l, l.saturating_add(x as u8), l]))
            .collect();
        VideoFrames::new("t", frames, FrameRate::default()).unwrap()
    }

    fn graded() -> GradedStatisticMatcher {
        let p = Prompts::default();
        GradedStatisticMatcher::new(&p.brightness, &p.noise).unwrap()
    }

    #[test]
    fn variance_formula() {
        let a = [1.0, 4.0];
        let b = [3.0, 0.0];
        let v = population_variance([&a[..], &b[..]]);
        assert_eq!(v, vec![1.0, 4.0]);
        assert_eq!(population_variance([&a[..]]), vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_brightness_vector() {
        let p = Prompts::default();
        let f = RgbFrame::filled(8, 8, [1, 2, 3]);
        let v = brightness_feature_frame(&UniformMatcher, &f, &p.brightness).unwrap();
        assert_eq!(v.len(), 75);
        assert!(v.iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn brightness_is_slice_of_bnf() {
        let p = Prompts::default();
        let m = graded();
        let f = RgbFrame::from_fn(50, 30, |x, y| [(x * 5) as u8, (y * 7) as u8, 90]);
        let b = brightness_feature_frame(&m, &f, &p.brightness).unwrap();
        let bn = super::super::brightness_noise_frame(&m, &f, &p).unwrap();
        let from_bn: Vec<f64> = bn.chunks_exact(10).flat_map(|c| c[..5].to_vec()).collect();
        assert_eq!(b, from_bn);
    }

    #[test]
    fn constant_video_has_zero_consistency() {
        let p = Prompts::default();
        let v = video_with_levels(&[77; 16]);
        let part = ClipPartition::new(2).unwrap();
        let levels = brightness_consistency_levels(&v, &part, &graded(), &p.brightness).unwrap();
        assert_eq!(levels.count(), 15);
        for level in 1..=4 {
            for p in 0..level_parts(level) {
                assert!(levels.get(level, p).unwrap().iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn two_frame_variance_matches_closed_form() {
        let p = Prompts::default();
        let m = graded();
        let v = video_with_levels(&[10, 10, 10, 10, 10, 10, 10, 10, 200, 10, 10, 10, 10, 10, 10, 10]);
        let spec = SubVideoSpec {
            level: 4,
            part: 0,
            offset: 1,
            frame_indices: vec![1, 9],
        };
        let var = brightness_consistency_subvideo(&spec, &v, &m, &p.brightness).unwrap();
        let a = brightness_feature_frame(&m, v.frame(1).unwrap(), &p.brightness).unwrap();
        let b = brightness_feature_frame(&m, v.frame(9).unwrap(), &p.brightness).unwrap();
        for i in 0..75 {
            let expected = ((a[i] - b[i]) / 2.0).powi(2);
            assert!((var[i] - expected).abs() < 1e-15);
        }
        assert!(var.iter().any(|&x| x > 0.0));
    }

    #[test]
    fn single_frame_subvideos_are_zero() {
        let p = Prompts::default();
        let v = video_with_levels(&[0, 30, 60, 90, 120, 150, 180, 210]);
        for spec in enumerate_subvideos(1).unwrap().iter().filter(|s| s.level == 4) {
            let var = brightness_consistency_subvideo(spec, &v, &graded(), &p.brightness).unwrap();
            assert!(var.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn direct_and_track_routes_agree() {
        let p = Prompts::default();
        let m = graded();
        let levels: Vec<u8> = (0..24).map(|i| (i * 37 % 250) as u8).collect();
        let v = video_with_levels(&levels);
        let track = BrightnessTrack::compute(&m, &v, 24, &p.brightness).unwrap();
        for spec in enumerate_subvideos(3).unwrap() {
            let direct = brightness_consistency_subvideo(&spec, &v, &m, &p.brightness).unwrap();
            assert_eq!(direct, track.subvideo_variance(&spec).unwrap());
        }
    }

    #[test]
    fn level_four_equals_clip_variance() {
        let p = Prompts::default();
        let m = graded();
        let levels: Vec<u8> = (0..32).map(|i| (i * 53 % 240) as u8).collect();
        let v = video_with_levels(&levels);
        let part = ClipPartition::new(4).unwrap();
        let feats = brightness_consistency_levels(&v, &part, &m, &p.brightness).unwrap();
        for clip in 1..=8 {
            let range = part.clip_range(clip).unwrap();
            let rows: Vec<Vec<f64>> = range
                .map(|i| brightness_feature_frame(&m, v.frame(i).unwrap(), &p.brightness).unwrap())
                .collect();
            let direct = population_variance(rows.iter().map(Vec::as_slice));
            let bcf = feats.for_clip(clip).unwrap();
            assert_eq!(&bcf[225..300], direct.as_slice());
            assert_eq!(feats.get(4, clip - 1).unwrap(), direct.as_slice());
        }
    }

    #[test]
    fn clip_three_selects_expected_parts() {
        let p = Prompts::default();
        let m = graded();
        let levels: Vec<u8> = (0..16).map(|i| (i * 71 % 250) as u8).collect();
        let v = video_with_levels(&levels);
        let part = ClipPartition::new(2).unwrap();
        let feats = brightness_consistency_levels(&v, &part, &m, &p.brightness).unwrap();
        let bcf = feats.for_clip(3).unwrap();
        assert_eq!(bcf.len(), 300);
        for (level, expected_part) in [(1, 0), (2, 0), (3, 1), (4, 2)] {
            assert_eq!(
                &bcf[(level - 1) * 75..level * 75],
                feats.get(level, expected_part).unwrap()
            );
        }
    }

    #[test]
    fn scaling_probabilities_scales_variance_quadratically() {
        let samples = [vec![0.1, 0.5, 0.2], vec![0.3, 0.1, 0.2], vec![0.6, 0.4, 0.2]];
        let c = 0.37;
        let base = population_variance(samples.iter().map(Vec::as_slice));
        let scaled: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|v| v * c).collect()).collect();
        let out = population_variance(scaled.iter().map(Vec::as_slice));
        for (o, b) in out.iter().zip(&base) {
            assert!((o - c * c * b).abs() < 1e-15);
        }
    }
}
