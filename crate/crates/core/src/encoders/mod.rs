//! Interfaces over the frozen pretrained backbones.
//!
//! The pipeline never sees model weights. It talks to three traits:
//! a semantic encoder producing the last two stage feature maps of a
//! hierarchical vision transformer, a clip-level motion encoder, and an
//! image-text matcher returning one logit per prompt. Deterministic mock
//! implementations living in [`mock`] are pure functions of pixel
//! statistics, so the whole pipeline runs in CI without weights.
//!
//! Adapters own their input normalization (mean/std, color order,
//! resampling to the backbone's input size). The pipeline contract is raw
//! 8-bit RGB.

pub mod mock;
mod prompts;
mod registry;

use std::sync::Arc;

pub use prompts::{PromptCategory, PromptSet, Prompts, HINT_COUNT, HINT_SLOT};
pub use registry::{BackboneConfig, EncoderConfig, EncoderRegistry};

use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::sampling::TILE_SIZE;

/// A spatial grid of channel vectors, position-major:
/// `data[(y * width + x) * channels + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height * width == 0 || channels == 0 || data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "feature map {height}x{width}x{channels} with {} values",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Global average pooling over spatial positions.
    pub fn global_average_pool(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        for cell in self.data.chunks_exact(self.channels) {
            for (o, v) in out.iter_mut().zip(cell) {
                *o += v;
            }
        }
        let positions = (self.height * self.width) as f64;
        out.iter_mut().for_each(|o| *o /= positions);
        out
    }
}

/// Last two stages of a pretrained hierarchical vision backbone.
pub trait SemanticEncoder: Send + Sync {
    fn name(&self) -> &str;
    /// Channel counts `(C1, C2)` of the two returned maps.
    fn stage_dims(&self) -> (usize, usize);
    fn encode_stages(&self, frame: &RgbFrame) -> Result<(FeatureMap, FeatureMap)>;
}

/// Clip-level motion backbone.
pub trait MotionEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// One vector for the whole clip. Adapters resample frames internally.
    fn encode(&self, clip: &[RgbFrame]) -> Result<Vec<f64>>;
}

/// Vision-language matcher scoring a 224x224 image against text prompts.
pub trait ImageTextMatcher: Send + Sync {
    fn name(&self) -> &str;
    /// Unnormalized matching logits, one per prompt, in prompt order.
    fn logits(&self, tile: &RgbFrame, prompts: &[String]) -> Result<Vec<f64>>;

    /// Batched variant; adapters can override to run tiles together.
    fn logits_batch(&self, tiles: &[RgbFrame], prompts: &[String]) -> Result<Vec<Vec<f64>>> {
        tiles.iter().map(|t| self.logits(t, prompts)).collect()
    }
}

/// Softmax matching probabilities over one prompt set, in hint order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatcherScores {
    pub probabilities: [f64; HINT_COUNT],
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_tile(tile: &RgbFrame) -> Result<()> {
    if tile.width() != TILE_SIZE || tile.height() != TILE_SIZE {
        return Err(Error::Contract(format!(
            "matcher tiles must be {TILE_SIZE}x{TILE_SIZE}, got {}x{}",
            tile.width(),
            tile.height()
        )));
    }
    Ok(())
}

fn scores_from_logits(logits: Vec<f64>) -> Result<MatcherScores> {
    if logits.len() != HINT_COUNT || logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Encoder(format!(
            "matcher returned {} logits (finite: {}), expected {HINT_COUNT} finite values",
            logits.len(),
            logits.iter().all(|l| l.is_finite())
        )));
    }
    let p = softmax(&logits);
    Ok(MatcherScores {
        probabilities: [p[0], p[1], p[2], p[3], p[4]],
    })
}

/// Matching probabilities of one tile against a prompt set.
pub fn match_probabilities(
    matcher: &dyn ImageTextMatcher,
    tile: &RgbFrame,
    prompts: &PromptSet,
) -> Result<MatcherScores> {
    check_tile(tile)?;
    let rendered = prompts.render()?;
    scores_from_logits(matcher.logits(tile, &rendered)?)
}

/// [`match_probabilities`] for a batch of tiles through `logits_batch`.
pub fn match_tiles(
    matcher: &dyn ImageTextMatcher,
    tiles: &[RgbFrame],
    prompts: &PromptSet,
) -> Result<Vec<MatcherScores>> {
    tiles.iter().try_for_each(check_tile)?;
    let rendered = prompts.render()?;
    let batch = matcher.logits_batch(tiles, &rendered)?;
    if batch.len() != tiles.len() {
        return Err(Error::Encoder(format!(
            "matcher returned {} results for {} tiles",
            batch.len(),
            tiles.len()
        )));
    }
    batch.into_iter().map(scores_from_logits).collect()
}

/// Instantiated backbones for one run.
#[derive(Clone)]
pub struct EncoderHandles {
    pub semantic: Arc<dyn SemanticEncoder>,
    pub motion: Arc<dyn MotionEncoder>,
    pub matcher: Arc<dyn ImageTextMatcher>,
}

impl std::fmt::Debug for EncoderHandles {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EncoderHandles")
            .field("semantic", &self.semantic.name())
            .field("motion", &self.motion.name())
            .field("matcher", &self.matcher.name())
            .finish()
    }
}

impl EncoderHandles {
    pub fn new(
        semantic: Arc<dyn SemanticEncoder>,
        motion: Arc<dyn MotionEncoder>,
        matcher: Arc<dyn ImageTextMatcher>,
    ) -> Self {
        Self {
            semantic,
            motion,
            matcher,
        }
    }

    /// `C1 + C2`.
    pub fn semantic_dim(&self) -> usize {
        let (a, b) = self.semantic.stage_dims();
        a + b
    }

    pub fn motion_dim(&self) -> usize {
        self.motion.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::mock::{FixedLogitsMatcher, UniformMatcher};
    use super::*;

    fn tile() -> RgbFrame {
        RgbFrame::filled(224, 224, [90, 90, 90])
    }

    #[test]
    fn uniform_logits_give_uniform_probabilities() {
        let s = match_probabilities(&UniformMatcher, &tile(), &PromptSet::default_brightness()).unwrap();
        assert!(s.probabilities.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn one_hot_logit_closed_form() {
        let m = FixedLogitsMatcher::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let s = match_probabilities(&m, &tile(), &PromptSet::default_noise()).unwrap();
        let e = std::f64::consts::E;
        let denom = e + 4.0;
        assert!((s.probabilities[0] - e / denom).abs() < 1e-15);
        for p in &s.probabilities[1..] {
            assert!((p - 1.0 / denom).abs() < 1e-15);
        }
        let sum: f64 = s.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_tile_size_is_contract_violation() {
        let small = RgbFrame::filled(100, 224, [0; 3]);
        assert!(matches!(
            match_probabilities(&UniformMatcher, &small, &PromptSet::default_noise()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn wrong_logit_count_rejected() {
        let m = FixedLogitsMatcher::new(vec![0.0; 3]);
        assert!(matches!(
            match_probabilities(&m, &tile(), &PromptSet::default_noise()),
            Err(Error::Encoder(_))
        ));
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn gap_on_hand_built_map() {
        // 2x2 grid, 2 channels.
        let m = FeatureMap::new(2, 2, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 6.0, 60.0]).unwrap();
        assert_eq!(m.global_average_pool(), vec![3.0, 30.0]);
        let single = FeatureMap::new(1, 1, 3, vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(single.global_average_pool(), vec![4.0, 5.0, 6.0]);
        assert!(FeatureMap::new(2, 2, 2, vec![0.0; 7]).is_err());
    }
}
