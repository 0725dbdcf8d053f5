//! Index arithmetic for clips, key frames, tiles and multi-level sub-videos.
//!
//! Frame positions are 1-indexed everywhere in this module. Conversion to
//! 0-indexed storage happens in [`VideoFrames::frame`](crate::ingest::VideoFrames::frame).

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::RgbFrame;

pub const CLIP_COUNT: usize = 8;
pub const LEVEL_COUNT: usize = 4;

pub const TILE_SIZE: usize = 224;
pub const TILE_ROWS: usize = 3;
pub const TILE_COLS: usize = 5;
pub const TILE_COUNT: usize = TILE_ROWS * TILE_COLS;
/// Resized frame geometry before tiling.
pub const TILED_HEIGHT: usize = TILE_SIZE * TILE_ROWS;
pub const TILED_WIDTH: usize = TILE_SIZE * TILE_COLS;

/// Split of the first `8n` frames into eight equal contiguous clips.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipPartition {
    frames_per_clip: usize,
}

impl ClipPartition {
    pub fn new(frames_per_clip: usize) -> Result<Self> {
        if frames_per_clip == 0 {
            return Err(Error::InvalidIndex("clips need at least one frame".into()));
        }
        Ok(Self { frames_per_clip })
    }

    pub fn frames_per_clip(&self) -> usize {
        self.frames_per_clip
    }

    /// Frames actually used, `8n`.
    pub fn used_frames(&self) -> usize {
        CLIP_COUNT * self.frames_per_clip
    }

    /// Half-open 1-indexed range of clip `clip` (1..=8).
    pub fn clip_range(&self, clip: usize) -> Result<Range<usize>> {
        check_clip(clip)?;
        let n = self.frames_per_clip;
        Ok((clip - 1) * n + 1..clip * n + 1)
    }

    pub fn clip_ranges(&self) -> Vec<Range<usize>> {
        (1..=CLIP_COUNT)
            .map(|c| self.clip_range(c).expect("clip in range"))
            .collect()
    }
}

/// Partitions a video of `frame_count` frames, dropping the trailing
/// `frame_count mod 8` frames.
pub fn split_into_clips(frame_count: usize) -> Result<ClipPartition> {
    if frame_count < CLIP_COUNT {
        return Err(Error::InvalidIndex(format!(
            "{frame_count} frames cannot fill {CLIP_COUNT} clips"
        )));
    }
    ClipPartition::new(frame_count / CLIP_COUNT)
}

/// Key frame of a clip: its first frame.
pub fn select_key_frame(partition: &ClipPartition, clip: usize) -> Result<usize> {
    Ok(partition.clip_range(clip)?.start)
}

fn check_clip(clip: usize) -> Result<()> {
    if (1..=CLIP_COUNT).contains(&clip) {
        Ok(())
    } else {
        Err(Error::InvalidIndex(format!("clip {clip} outside 1..={CLIP_COUNT}")))
    }
}

fn check_level(level: usize) -> Result<()> {
    if (1..=LEVEL_COUNT).contains(&level) {
        Ok(())
    } else {
        Err(Error::InvalidIndex(format!("level {level} outside 1..={LEVEL_COUNT}")))
    }
}

/// Fifteen 224x224 tiles of a frame resized to 1120x672, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TileGrid {
    pub tiles: Vec<RgbFrame>,
}

impl TileGrid {
    /// Stitches the tiles back into the 1120x672 frame they were cut from.
    pub fn reassemble(&self) -> RgbFrame {
        RgbFrame::from_fn(TILED_WIDTH, TILED_HEIGHT, |x, y| {
            let tile = &self.tiles[(y / TILE_SIZE) * TILE_COLS + x / TILE_SIZE];
            tile.pixel(x % TILE_SIZE, y % TILE_SIZE)
        })
    }
}

/// Bilinear resize to 672 rows by 1120 columns, then a 3x5 cut into tiles
/// ordered left to right within a row and rows top to bottom.
pub fn resize_and_tile(frame: &RgbFrame) -> Result<TileGrid> {
    if frame.width() < 2 || frame.height() < 2 {
        return Err(Error::InvalidFrame(format!(
            "{}x{} is too small to tile",
            frame.width(),
            frame.height()
        )));
    }
    let resized = frame.resize_bilinear(TILED_WIDTH, TILED_HEIGHT)?;
    let mut tiles = Vec::with_capacity(TILE_COUNT);
    for row in 0..TILE_ROWS {
        for col in 0..TILE_COLS {
            tiles.push(resized.crop(col * TILE_SIZE, row * TILE_SIZE, TILE_SIZE, TILE_SIZE)?);
        }
    }
    Ok(TileGrid { tiles })
}

/// One strided sub-video: frames `offset + 2^(4-level) * (t + part * n)`
/// for `t` in `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubVideoSpec {
    pub level: usize,
    pub part: usize,
    pub offset: usize,
    #[serde(rename = "indices")]
    pub frame_indices: Vec<usize>,
}

/// Stride (and sub-video count per part) at a level: `2^(4 - level)`.
pub fn level_stride(level: usize) -> usize {
    1 << (LEVEL_COUNT - level)
}

/// Number of parts at a level: `2^(level - 1)`.
pub fn level_parts(level: usize) -> usize {
    1 << (level - 1)
}

pub fn subvideo(level: usize, part: usize, offset: usize, n: usize) -> Result<SubVideoSpec> {
    check_level(level)?;
    if part >= level_parts(level) {
        return Err(Error::InvalidIndex(format!("part {part} at level {level}")));
    }
    let stride = level_stride(level);
    if !(1..=stride).contains(&offset) {
        return Err(Error::InvalidIndex(format!("offset {offset} at level {level}")));
    }
    let frame_indices = (0..n).map(|t| offset + stride * (t + part * n)).collect();
    Ok(SubVideoSpec {
        level,
        part,
        offset,
        frame_indices,
    })
}

/// All 32 sub-videos, ordered by level, then part, then offset.
pub fn enumerate_subvideos(n: usize) -> Result<Vec<SubVideoSpec>> {
    if n == 0 {
        return Err(Error::InvalidIndex("clips need at least one frame".into()));
    }
    let mut specs = Vec::with_capacity(LEVEL_COUNT * CLIP_COUNT);
    for level in 1..=LEVEL_COUNT {
        for part in 0..level_parts(level) {
            for offset in 1..=level_stride(level) {
                specs.push(subvideo(level, part, offset, n)?);
            }
        }
    }
    Ok(specs)
}

/// Half-open 1-indexed frame range of part `part` at `level`.
pub fn part_range(level: usize, part: usize, n: usize) -> Result<Range<usize>> {
    check_level(level)?;
    if part >= level_parts(level) {
        return Err(Error::InvalidIndex(format!("part {part} at level {level}")));
    }
    let len = CLIP_COUNT * n / level_parts(level);
    Ok(part * len + 1..(part + 1) * len + 1)
}

/// The part at `level` whose frames contain clip `clip`.
pub fn covering_part_index(level: usize, clip: usize) -> Result<usize> {
    check_level(level)?;
    check_clip(clip)?;
    Ok((clip - 1) / level_stride(level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_examples() {
        assert_eq!(split_into_clips(240).unwrap().frames_per_clip(), 30);
        let p = split_into_clips(245).unwrap();
        assert_eq!((p.frames_per_clip(), p.used_frames()), (30, 240));
        assert_eq!(split_into_clips(8).unwrap().frames_per_clip(), 1);
        assert!(split_into_clips(7).is_err());
    }

    #[test]
    fn clip_ranges_cover_exactly() {
        let p = ClipPartition::new(30).unwrap();
        let ranges = p.clip_ranges();
        assert_eq!(ranges[0], 1..31);
        assert_eq!(ranges[7], 211..241);
        for w in ranges.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!(p.clip_range(0).is_err());
        assert!(p.clip_range(9).is_err());
    }

    #[test]
    fn key_frames() {
        let p = ClipPartition::new(30).unwrap();
        assert_eq!(select_key_frame(&p, 1).unwrap(), 1);
        assert_eq!(select_key_frame(&p, 3).unwrap(), 61);
        assert_eq!(select_key_frame(&ClipPartition::new(1).unwrap(), 8).unwrap(), 8);
    }

    #[test]
    fn level_two_structure() {
        let specs = enumerate_subvideos(3).unwrap();
        assert_eq!(specs.len(), 32);
        let lv2: Vec<_> = specs.iter().filter(|s| s.level == 2).collect();
        assert_eq!(lv2.len(), 8);
        assert_eq!(lv2.iter().filter(|s| s.part == 0).count(), 4);
        assert_eq!(lv2[0].frame_indices, vec![1, 5, 9]);
        assert_eq!(lv2[4].frame_indices, vec![13, 17, 21]);
    }

    #[test]
    fn level_four_equals_clips() {
        let n = 5;
        let p = ClipPartition::new(n).unwrap();
        let specs = enumerate_subvideos(n).unwrap();
        let lv4: Vec<_> = specs.iter().filter(|s| s.level == 4).collect();
        for (spec, range) in lv4.iter().zip(p.clip_ranges()) {
            assert_eq!(spec.frame_indices, range.collect::<Vec<_>>());
        }
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_part_index(3, 3).unwrap(), 1);
        assert_eq!(covering_part_index(4, 3).unwrap(), 2);
        for clip in 1..=8 {
            assert_eq!(covering_part_index(1, clip).unwrap(), 0);
        }
        assert!(covering_part_index(5, 1).is_err());
        assert!(covering_part_index(1, 0).is_err());
    }

    #[test]
    fn tiles_of_native_size_frame_are_exact_crops() {
        let f = RgbFrame::from_fn(TILED_WIDTH, TILED_HEIGHT, |x, y| {
            [(x % 251) as u8, (y % 241) as u8, ((x + y) % 13) as u8]
        });
        let grid = resize_and_tile(&f).unwrap();
        assert_eq!(grid.tiles.len(), 15);
        assert_eq!(grid.tiles[6].pixel(0, 0), f.pixel(224, 224));
        assert_eq!(grid.reassemble(), f);
    }

    #[test]
    fn tiling_720p() {
        let f = RgbFrame::from_fn(1280, 720, |x, y| [(x % 256) as u8, (y % 256) as u8, 0]);
        let grid = resize_and_tile(&f).unwrap();
        assert_eq!(grid.tiles.len(), 15);
        assert!(grid.tiles.iter().all(|t| t.width() == 224 && t.height() == 224));
        let resized = f.resize_bilinear(TILED_WIDTH, TILED_HEIGHT).unwrap();
        assert_eq!(grid.reassemble(), resized);
        assert_eq!(15 * 224 * 224, TILED_WIDTH * TILED_HEIGHT);
    }

    #[test]
    fn tiny_frames_rejected() {
        assert!(resize_and_tile(&RgbFrame::filled(1, 5, [0; 3])).is_err());
    }

    #[test]
    fn spec_json_field_names() {
        let s = subvideo(3, 1, 2, 2).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["indices"], serde_json::json!([6, 8]));
        assert_eq!(json["offset"], 2);
    }

    proptest! {
        #[test]
        fn each_level_partitions_frames(n in 1usize..=16) {
            let specs = enumerate_subvideos(n).unwrap();
            for level in 1..=4 {
                let mut hits = vec![0u32; 8 * n + 1];
                for s in specs.iter().filter(|s| s.level == level) {
                    prop_assert_eq!(s.frame_indices.len(), n);
                    let part = part_range(level, s.part, n).unwrap();
                    for &i in &s.frame_indices {
                        prop_assert!(part.contains(&i));
                        hits[i] += 1;
                    }
                }
                prop_assert!(hits[1..].iter().all(|&h| h == 1));
            }
        }
    }
}
