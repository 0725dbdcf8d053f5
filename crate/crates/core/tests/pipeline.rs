//! Whole-pipeline checks: frozen golden score, and frozen encoders.

use std::path::Path;

use ecvqa::encoders::{EncoderConfig, EncoderRegistry, Prompts};
use ecvqa::features::{extract_features, semantic_feature, FeatureBundle, FeatureConfig};
use ecvqa::model::{forward, ModelConfig, QualityModelParams};
use ecvqa::synth::{synth_video, SynthSpec};
use ecvqa::training::{Sample, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};

const GOLDEN: &str = "tests/golden/forward.json";
/// Set to regenerate the golden file.
const BLESS_ENV: &str = "ECVQA_BLESS_GOLDEN";

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    quality: f64,
    clip_scores: Vec<f64>,
}

fn bundle(id: &str, spec: &SynthSpec, seed: u64) -> FeatureBundle {
    let prompts = Prompts::default();
    let handles = EncoderRegistry::with_mocks()
        .build(&EncoderConfig::default(), &prompts.brightness, &prompts.noise)
        .unwrap();
    let video = synth_video(id, spec, seed).unwrap();
    extract_features(&video, &handles, &prompts, &FeatureConfig::default()).unwrap()
}

#[test]
fn golden_forward_score() {
    let b = bundle("golden", &SynthSpec { frames: 24, ..Default::default() }, 2024);
    let params = QualityModelParams::init(ModelConfig::default(), b.header.si_dim(), b.header.ti_dim(), 7).unwrap();
    let (q, clips) = forward(&b, &params).unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os(BLESS_ENV).is_some() {
        let g = Golden {
            quality: q,
            clip_scores: clips.to_vec(),
        };
        std::fs::write(&path, serde_json::to_string_pretty(&g).unwrap()).unwrap();
    }
    let g: Golden = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((q - g.quality).abs() <= 1e-6, "{q} vs golden {}", g.quality);
    for (a, b) in clips.iter().zip(&g.clip_scores) {
        assert!((a - b).abs() <= 1e-6, "{a} vs golden {b}");
    }
    let (again, _) = forward(&b, &params).unwrap();
    assert_eq!(q, again);
}

#[test]
fn training_leaves_encoders_untouched() {
    let prompts = Prompts::default();
    let handles = EncoderRegistry::with_mocks()
        .build(&EncoderConfig::default(), &prompts.brightness, &prompts.noise)
        .unwrap();
    let probe = synth_video("probe", &SynthSpec::default(), 1).unwrap();
    let snapshot = || {
        let frame = &probe.frames()[0];
        let sem = semantic_feature(handles.semantic.as_ref(), frame).unwrap();
        let mot = handles.motion.encode(probe.frames()).unwrap();
        let logits = handles.matcher.logits(frame, &prompts.brightness.render().unwrap()).unwrap();
        (sem, mot, logits)
    };
    let before = snapshot();

    let samples: Vec<Sample> = (0..6)
        .map(|i| {
            let spec = SynthSpec {
                brightness: 0.2 + 0.1 * i as f64,
                ..Default::default()
            };
            let b = extract_features(&synth_video("v", &spec, i).unwrap(), &handles, &prompts, &FeatureConfig::default())
                .unwrap();
            Sample::from_bundle(&b, 10.0 * i as f64)
        })
        .collect();
    let cfg = ModelConfig {
        hidden_dim: 16,
        heads: 2,
        head_hidden: 8,
        ..Default::default()
    };
    let params = QualityModelParams::init(cfg, samples[0].clips[0].0.len(), samples[0].clips[0].1.len(), 0).unwrap();
    let train = TrainConfig {
        epochs: 3,
        batch_size: 3,
        ..Default::default()
    };
    let mut t = Trainer::new(params.clone(), train, &samples).unwrap();
    t.fit(&samples, &[], |_, _| Ok(())).unwrap();
    assert_ne!(t.state().params, params);
    assert_eq!(snapshot(), before);
}
