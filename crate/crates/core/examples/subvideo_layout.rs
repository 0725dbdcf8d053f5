//! Prints the clip partition and the 32 brightness-consistency sub-videos
//! of a video with `n` frames per clip.
//!
//! `cargo run --example subvideo_layout [n]`

use ecvqa::sampling::{covering_part_index, enumerate_subvideos, split_into_clips, CLIP_COUNT, LEVEL_COUNT};

fn main() -> ecvqa::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let partition = split_into_clips(8 * n)?;
    for (i, r) in partition.clip_ranges().iter().enumerate() {
        println!("clip {}: frames {}..={}", i + 1, r.start, r.end - 1);
    }
    for s in enumerate_subvideos(n)? {
        println!("level {} part {} offset {:>2}: {:?}", s.level, s.part, s.offset, s.frame_indices);
    }
    for clip in 1..=CLIP_COUNT {
        let parts: Vec<usize> = (1..=LEVEL_COUNT)
            .map(|l| covering_part_index(l, clip))
            .collect::<ecvqa::Result<_>>()?;
        println!("clip {clip} uses parts {parts:?} at levels 1..=4");
    }
    Ok(())
}
