//! Matches tiles of a dark and a bright frame against the brightness and
//! noise prompt sets.
//!
//! `cargo run --example prompt_matching`

use ecvqa::encoders::{match_probabilities, EncoderConfig, EncoderRegistry, Prompts};
use ecvqa::sampling::resize_and_tile;
use ecvqa::synth::{synth_frame, SynthSpec};
use rand::SeedableRng;

fn main() -> ecvqa::Result<()> {
    let prompts = Prompts::default();
    for (set, texts) in [("brightness", &prompts.brightness), ("noise", &prompts.noise)] {
        println!("{set} prompts: {:?}", texts.render()?);
    }
    let handles = EncoderRegistry::with_mocks().build(&EncoderConfig::default(), &prompts.brightness, &prompts.noise)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for brightness in [0.15, 0.5, 0.9] {
        let spec = SynthSpec {
            brightness,
            ..Default::default()
        };
        let grid = resize_and_tile(&synth_frame(&spec, 0, &mut rng))?;
        let tile = &grid.tiles[7];
        let b = match_probabilities(handles.matcher.as_ref(), tile, &prompts.brightness)?;
        let n = match_probabilities(handles.matcher.as_ref(), tile, &prompts.noise)?;
        println!("scene brightness {brightness:.2}");
        println!("  brightness probs {:.3?}", b.probabilities);
        println!("  noise probs      {:.3?}", n.probabilities);
    }
    Ok(())
}
