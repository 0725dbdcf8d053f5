//! One `<video_id>.feat` archive per video.
//!
//! ```text
//! magic        8 bytes  "ECVQFEAT"
//! json_len     u32 LE
//! json         json_len bytes, UTF-8: {video_id, provenance, arrays: [{name, len}]}
//! payload      concatenated f64 LE values of `arrays`, in listed order
//! ```
//!
//! Arrays are named `clip<i>/<field>` for fields `sf`, `bnf_local`,
//! `bnf_global`, `mf` and `bcf`; `si` and `ti` are rebuilt on read.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClipFeatures, FeatureBundle, ProvenanceHeader, SpatialFeatures, TemporalFeatures};
use crate::error::{Error, Result};

pub const CACHE_EXTENSION: &str = "feat";
const MAGIC: &[u8; 8] = b"ECVQFEAT";
const FIELDS: [&str; 5] = ["sf", "bnf_local", "bnf_global", "mf", "bcf"];

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct ArchiveHeader {
    video_id: String,
    provenance: ProvenanceHeader,
    arrays: Vec<ArrayEntry>,
}

pub fn cache_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.{CACHE_EXTENSION}"))
}

/// Writes the bundle atomically (temp file in `dir`, then rename).
pub fn write_cache(bundle: &FeatureBundle, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut arrays = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    for (i, clip) in bundle.clips().iter().enumerate() {
        let values: [&[f64]; 5] = [
            clip.spatial.sf(),
            clip.spatial.bnf_local(),
            clip.spatial.bnf_global(),
            clip.temporal.mf(),
            clip.temporal.bcf(),
        ];
        for (field, data) in FIELDS.iter().zip(values) {
            arrays.push(ArrayEntry {
                name: format!("clip{}/{field}", i + 1),
                len: data.len(),
            });
            payload.extend(data.iter().flat_map(|v| v.to_le_bytes()));
        }
    }
    let header = serde_json::to_vec(&ArchiveHeader {
        video_id: bundle.video_id.clone(),
        provenance: bundle.header.clone(),
        arrays,
    })
    .map_err(|e| Error::cache(dir, e.to_string()))?;
    let path = cache_path(dir, &bundle.video_id);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(MAGIC)?;
    tmp.write_all(&(header.len() as u32).to_le_bytes())?;
    tmp.write_all(&header)?;
    tmp.write_all(&payload)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| Error::cache(&path, e.to_string()))?;
    Ok(path)
}

/// Reads a cached bundle and rejects it when its provenance differs from
/// `expected`.
pub fn read_cache(video_id: &str, dir: &Path, expected: &ProvenanceHeader) -> Result<FeatureBundle> {
    let bundle = read_cache_unchecked(video_id, dir)?;
    let diff = bundle.header.differences(expected);
    if !diff.is_empty() {
        return Err(Error::StaleCache {
            video_id: video_id.into(),
            reason: format!("header fields changed: {}", diff.join(", ")),
        });
    }
    Ok(bundle)
}

/// True when a cache entry exists and matches `expected`.
pub fn is_fresh(video_id: &str, dir: &Path, expected: &ProvenanceHeader) -> bool {
    read_cache(video_id, dir, expected).is_ok()
}

/// Reads a cached bundle without checking its provenance.
pub fn read_cache_unchecked(video_id: &str, dir: &Path) -> Result<FeatureBundle> {
    let path = cache_path(dir, video_id);
    let bytes = fs::read(&path).map_err(|e| Error::cache(&path, format!("unreadable: {e}")))?;
    let bad = |msg: &str| Error::cache(&path, msg.to_string());
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("not a feature archive"));
    }
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let json_end = 12usize.checked_add(json_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let header: ArchiveHeader =
        serde_json::from_slice(&bytes[12..json_end]).map_err(|e| Error::cache(&path, format!("bad header: {e}")))?;
    if header.video_id != video_id {
        return Err(bad(&format!("archive holds `{}`", header.video_id)));
    }
    let mut payload = &bytes[json_end..];
    let mut arrays = std::collections::HashMap::new();
    for entry in &header.arrays {
        let n = entry.len.checked_mul(8).filter(|&n| n <= payload.len()).ok_or_else(|| bad("truncated payload"))?;
        let values: Vec<f64> = payload[..n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        payload = &payload[n..];
        arrays.insert(entry.name.as_str(), values);
    }
    if !payload.is_empty() {
        return Err(bad("trailing bytes after payload"));
    }
    let mut take = |clip: usize, field: &str| {
        arrays
            .remove(format!("clip{clip}/{field}").as_str())
            .ok_or_else(|| bad(&format!("missing array clip{clip}/{field}")))
    };
    let mut clips = Vec::new();
    for clip in 1..=crate::sampling::CLIP_COUNT {
        let spatial = SpatialFeatures::new(take(clip, "sf")?, take(clip, "bnf_local")?, take(clip, "bnf_global")?)?;
        let temporal = TemporalFeatures::new(take(clip, "mf")?, take(clip, "bcf")?)?;
        clips.push(ClipFeatures { spatial, temporal });
    }
    FeatureBundle::new(header.video_id, header.provenance, clips)
        .map_err(|e| Error::cache(&path, e.to_string()))
}
