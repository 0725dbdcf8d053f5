//! Brightness, contrast and colorfulness of a video on every fourth frame.
//!
//! `cargo run --example analyze_attributes [video.y4m]`

use ecvqa::eval::{analyze_video, attribute_colorfulness};
use ecvqa::ingest::decode_video;
use ecvqa::synth::{synth_video, SynthSpec};
use ecvqa::RgbFrame;

fn main() -> ecvqa::Result<()> {
    let video = match std::env::args().nth(1) {
        Some(p) => decode_video(p.as_ref())?,
        None => synth_video("demo", &SynthSpec { frames: 40, ..Default::default() }, 5)?,
    };
    let r = analyze_video(&video)?;
    println!("{}: {} sampled frames {:?}", r.video_id, r.frame_indices.len(), r.frame_indices);
    println!("brightness {:.3}  contrast {:.3}  colorfulness {:.3}", r.brightness, r.contrast, r.colorfulness);
    let red = RgbFrame::filled(8, 8, [255, 0, 0]);
    println!("uniform red colorfulness {:.4}", attribute_colorfulness(&red));
    Ok(())
}
