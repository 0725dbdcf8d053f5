//! Loads a manifest, normalizes MOS per subset and prints the targets.
//!
//! `cargo run --example normalize_manifest [manifest.csv]`

use ecvqa::ingest::{load_manifest, NormalizationMode};
use ecvqa::synth::{graded_specs, write_synth_dataset};

fn main() -> ecvqa::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => write_synth_dataset(dir.path(), &graded_specs(6, 8), 0, |i, _| 1.0 + 0.7 * i as f64)?,
    };
    for mode in [NormalizationMode::PerSubset, NormalizationMode::Joint] {
        let m = load_manifest(&path, mode, None)?;
        println!("{mode:?}");
        for (subset, range) in &m.normalization_stats {
            println!("  {}: raw MOS in [{}, {}]", subset.as_str(), range.min, range.max);
        }
        for r in &m.records {
            println!("  {:<20} {:<12} raw {:>6.2} -> {:?}", r.video_id, r.subset.as_str(), r.mos_raw, r.mos_norm);
        }
        for issue in m.validate().issues {
            println!("  issue: {issue}");
        }
    }
    Ok(())
}
