//! Runs the model stages one at a time on a video's features and prints
//! the clip scores and the weighted quality score.
//!
//! `cargo run --example fuse_and_score`

use ecvqa::encoders::{EncoderConfig, EncoderRegistry, Prompts};
use ecvqa::features::{extract_features, FeatureConfig};
use ecvqa::model::{aggregate_hvs, cross_fuse, forward, project, regress_clip, ModelConfig, QualityModelParams};
use ecvqa::synth::{synth_video, SynthSpec};

fn main() -> ecvqa::Result<()> {
    let prompts = Prompts::default();
    let handles = EncoderRegistry::with_mocks().build(&EncoderConfig::default(), &prompts.brightness, &prompts.noise)?;
    let video = synth_video("demo", &SynthSpec::default(), 3)?;
    let bundle = extract_features(&video, &handles, &prompts, &FeatureConfig::default())?;
    let mut params = QualityModelParams::init(ModelConfig::default(), bundle.header.si_dim(), bundle.header.ti_dim(), 0)?;
    println!("{} parameters", params.parameter_count());

    let mut scores = Vec::new();
    for (i, c) in bundle.clips().iter().enumerate() {
        let (si, ti) = project(c.spatial.si(), c.temporal.ti(), &params)?;
        let ff = cross_fuse(&si, &ti, &params)?;
        let q = regress_clip(&ff, &params)?;
        println!("clip {}: |si'| = {} |ff| = {} q = {q:.5}", i + 1, si.len(), ff.len());
        scores.push(q);
    }
    println!("uniform weights: Q = {:.5}", aggregate_hvs(&scores, &params.hvs_weights)?);
    params.hvs_weights = vec![3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let (q, _) = forward(&bundle, &params)?;
    println!("first clip weighted x3: Q = {q:.5}");
    Ok(())
}
