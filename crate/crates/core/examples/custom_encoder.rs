//! Registers a user-supplied semantic backbone and extracts features with
//! it. Real adapters (ONNX, libtorch, ...) plug in the same way.
//!
//! `cargo run --example custom_encoder`

use std::sync::Arc;

use ecvqa::encoders::{BackboneConfig, EncoderConfig, EncoderRegistry, FeatureMap, Prompts, SemanticEncoder};
use ecvqa::features::{extract_features, FeatureConfig};
use ecvqa::synth::{synth_video, SynthSpec};
use ecvqa::{Error, RgbFrame};

/// Channel-mean histogram: `bins` per channel at stage 1, coarse 2-bin
/// version at stage 2.
struct Histogram {
    bins: usize,
}

impl SemanticEncoder for Histogram {
    fn name(&self) -> &str {
        "histogram"
    }

    fn stage_dims(&self) -> (usize, usize) {
        (3 * self.bins, 6)
    }

    fn encode_stages(&self, frame: &RgbFrame) -> ecvqa::Result<(FeatureMap, FeatureMap)> {
        let mut fine = vec![0.0; 3 * self.bins];
        let mut coarse = vec![0.0; 6];
        for px in frame.pixels() {
            for (c, &v) in px.iter().enumerate() {
                fine[c * self.bins + v as usize * self.bins / 256] += 1.0;
                coarse[c * 2 + usize::from(v >= 128)] += 1.0;
            }
        }
        Ok((FeatureMap::new(1, 1, fine.len(), fine)?, FeatureMap::new(1, 1, 6, coarse)?))
    }
}

fn main() -> ecvqa::Result<()> {
    let mut registry = EncoderRegistry::with_mocks();
    registry.register_semantic("histogram", |cfg: &BackboneConfig| {
        let bins = cfg.dims.first().map(|d| d / 3).unwrap_or(8);
        if bins == 0 {
            return Err(Error::Config("histogram needs at least 3 dims".into()));
        }
        Ok(Arc::new(Histogram { bins }) as Arc<dyn SemanticEncoder>)
    });
    let config = EncoderConfig {
        semantic: BackboneConfig::named("histogram", vec![24, 6]),
        ..Default::default()
    };
    let prompts = Prompts::default();
    let handles = registry.build(&config, &prompts.brightness, &prompts.noise)?;
    let video = synth_video("demo", &SynthSpec::default(), 0)?;
    let bundle = extract_features(&video, &handles, &prompts, &FeatureConfig::default())?;
    println!("semantic backbone {}: |si| = {}", handles.semantic.name(), bundle.header.si_dim());
    println!("clip 1 sf: {:?}", &bundle.clips()[0].spatial.sf()[..8]);
    Ok(())
}
