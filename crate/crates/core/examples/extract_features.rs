//! Extracts per-clip `si` / `ti` vectors from a video, caches them, and
//! prints the feature layout.
//!
//! `cargo run --example extract_features [video.y4m]`

use ecvqa::encoders::{EncoderConfig, EncoderRegistry, Prompts};
use ecvqa::features::{extract_features, read_cache, write_cache, FeatureConfig, ProvenanceHeader};
use ecvqa::ingest::decode_video;
use ecvqa::synth::{synth_video, SynthSpec};

fn main() -> ecvqa::Result<()> {
    let video = match std::env::args().nth(1) {
        Some(p) => decode_video(p.as_ref())?,
        None => synth_video("demo", &SynthSpec::default(), 1)?,
    };
    let prompts = Prompts::default();
    let config = FeatureConfig::default();
    let handles = EncoderRegistry::with_mocks().build(&EncoderConfig::default(), &prompts.brightness, &prompts.noise)?;
    let bundle = extract_features(&video, &handles, &prompts, &config)?;
    let header = ProvenanceHeader::new(&handles, &prompts, &config);
    println!("{}: {} frames", video.video_id(), video.frame_count());
    println!("|si| = {}  |ti| = {}", header.si_dim(), header.ti_dim());
    for (i, c) in bundle.clips().iter().enumerate() {
        let s = &c.spatial;
        let t = &c.temporal;
        println!(
            "clip {}: sf {} bnf {}+{} mf {} bcf {} (level-4 mean {:.4})",
            i + 1,
            s.sf().len(),
            s.bnf_local().len(),
            s.bnf_global().len(),
            t.mf().len(),
            t.bcf().len(),
            t.bcf_level(4).iter().sum::<f64>() / t.bcf_level(4).len() as f64
        );
    }
    let dir = tempfile::tempdir()?;
    let path = write_cache(&bundle, dir.path())?;
    let back = read_cache(&bundle.video_id, dir.path(), &header)?;
    println!("cached to {} ({} bytes); round trip exact: {}", path.display(), std::fs::metadata(&path)?.len(), back == bundle);
    Ok(())
}
