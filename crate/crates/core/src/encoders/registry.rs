use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mock::{
    ConstantSemanticEncoder, FrameDifferenceMotionEncoder, GradedStatisticMatcher,
    PixelStatsSemanticEncoder, UniformMatcher,
};
use super::{EncoderHandles, ImageTextMatcher, MotionEncoder, PromptSet, SemanticEncoder};
use crate::error::{Error, Result};

/// One backbone entry of the `[encoders]` config section.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub backbone: String,
    /// Weights path or identifier; opaque to the pipeline.
    #[serde(default)]
    pub weights: String,
    /// Declared output dims: `[C1, C2]` for semantic, `[D_mot]` for motion.
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default = "default_device")]
    pub device: String,
}

fn default_device() -> String {
    "cpu".into()
}

impl BackboneConfig {
    pub fn named(backbone: &str, dims: Vec<usize>) -> Self {
        Self {
            backbone: backbone.into(),
            weights: String::new(),
            dims,
            device: default_device(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub semantic: BackboneConfig,
    pub motion: BackboneConfig,
    pub matcher: BackboneConfig,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            semantic: BackboneConfig::named("mock-pixel-stats", vec![4, 8]),
            motion: BackboneConfig::named("mock-frame-diff", vec![16]),
            matcher: BackboneConfig::named("mock-graded", vec![]),
        }
    }
}

type SemanticFactory = Box<dyn Fn(&BackboneConfig) -> Result<Arc<dyn SemanticEncoder>> + Send + Sync>;
type MotionFactory = Box<dyn Fn(&BackboneConfig) -> Result<Arc<dyn MotionEncoder>> + Send + Sync>;
type MatcherFactory =
    Box<dyn Fn(&BackboneConfig, &PromptSet, &PromptSet) -> Result<Arc<dyn ImageTextMatcher>> + Send + Sync>;

/// Maps backbone names to constructors.
///
/// [`EncoderRegistry::with_mocks`] knows the built-in mocks. Real adapters
/// (Swin, SlowFast, CLIP runtimes) are registered by the embedding
/// application under their own names.
#[derive(Default)]
pub struct EncoderRegistry {
    semantic: BTreeMap<String, SemanticFactory>,
    motion: BTreeMap<String, MotionFactory>,
    matcher: BTreeMap<String, MatcherFactory>,
}

fn dims_at(cfg: &BackboneConfig, n: usize) -> Result<&[usize]> {
    if cfg.dims.len() != n || cfg.dims.contains(&0) {
        return Err(Error::Config(format!(
            "backbone `{}` needs {n} positive dims, got {:?}",
            cfg.backbone, cfg.dims
        )));
    }
    Ok(&cfg.dims)
}

impl EncoderRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_mocks() -> Self {
        let mut r = Self::empty();
        r.register_semantic("mock-constant", |cfg| {
            let d = dims_at(cfg, 2)?;
            Ok(Arc::new(ConstantSemanticEncoder::ones(d[0], d[1])))
        });
        r.register_semantic("mock-pixel-stats", |cfg| {
            let d = dims_at(cfg, 2)?;
            Ok(Arc::new(PixelStatsSemanticEncoder::new(d[0], d[1])))
        });
        r.register_motion("mock-frame-diff", |cfg| {
            let d = dims_at(cfg, 1)?;
            Ok(Arc::new(FrameDifferenceMotionEncoder::new(d[0])))
        });
        r.register_matcher("mock-uniform", |_, _, _| Ok(Arc::new(UniformMatcher)));
        r.register_matcher("mock-graded", |_, b, n| Ok(Arc::new(GradedStatisticMatcher::new(b, n)?)));
        r
    }

    pub fn register_semantic(
        &mut self,
        name: &str,
        f: impl Fn(&BackboneConfig) -> Result<Arc<dyn SemanticEncoder>> + Send + Sync + 'static,
    ) {
        self.semantic.insert(name.into(), Box::new(f));
    }

    pub fn register_motion(
        &mut self,
        name: &str,
        f: impl Fn(&BackboneConfig) -> Result<Arc<dyn MotionEncoder>> + Send + Sync + 'static,
    ) {
        self.motion.insert(name.into(), Box::new(f));
    }

    pub fn register_matcher(
        &mut self,
        name: &str,
        f: impl Fn(&BackboneConfig, &PromptSet, &PromptSet) -> Result<Arc<dyn ImageTextMatcher>>
            + Send
            + Sync
            + 'static,
    ) {
        self.matcher.insert(name.into(), Box::new(f));
    }

    /// Instantiates all three backbones and checks their dims against the
    /// declared ones.
    pub fn build(
        &self,
        cfg: &EncoderConfig,
        brightness: &PromptSet,
        noise: &PromptSet,
    ) -> Result<EncoderHandles> {
        let unavailable = |kind: &str, name: &str, known: Vec<&String>| {
            Error::Encoder(format!(
                "{kind} backbone `{name}` unavailable; registered: {known:?}"
            ))
        };
        let semantic = self
            .semantic
            .get(&cfg.semantic.backbone)
            .ok_or_else(|| unavailable("semantic", &cfg.semantic.backbone, self.semantic.keys().collect()))?(
            &cfg.semantic,
        )?;
        let motion = self
            .motion
            .get(&cfg.motion.backbone)
            .ok_or_else(|| unavailable("motion", &cfg.motion.backbone, self.motion.keys().collect()))?(
            &cfg.motion,
        )?;
        let matcher = self
            .matcher
            .get(&cfg.matcher.backbone)
            .ok_or_else(|| unavailable("matcher", &cfg.matcher.backbone, self.matcher.keys().collect()))?(
            &cfg.matcher,
            brightness,
            noise,
        )?;
        let (c1, c2) = semantic.stage_dims();
        if !cfg.semantic.dims.is_empty() && cfg.semantic.dims != [c1, c2] {
            return Err(Error::Config(format!(
                "semantic backbone reports dims ({c1}, {c2}) but config declares {:?}",
                cfg.semantic.dims
            )));
        }
        if !cfg.motion.dims.is_empty() && cfg.motion.dims != [motion.dim()] {
            return Err(Error::Config(format!(
                "motion backbone reports dim {} but config declares {:?}",
                motion.dim(),
                cfg.motion.dims
            )));
        }
        Ok(EncoderHandles::new(semantic, motion, matcher))
    }
}
