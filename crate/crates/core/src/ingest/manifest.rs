use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::normalize_mos;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    LowLight,
    OverExposed,
}

impl Subset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Subset::LowLight => "low_light",
            Subset::OverExposed => "over_exposed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split `{other}` (expected train, val or test)"
            ))),
        }
    }
}

/// Whether MOS ranges are computed per subset or over the whole manifest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    #[default]
    PerSubset,
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosRange {
    pub min: f64,
    pub max: f64,
}

impl MosRange {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(MosRange { min: v, max: v }),
            Some(r) => Some(MosRange {
                min: r.min.min(v),
                max: r.max.max(v),
            }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub video_id: String,
    /// Path as written in the manifest, relative to the video root.
    pub video_path: PathBuf,
    pub mos_raw: f64,
    /// `None` when the record's normalization range is degenerate.
    pub mos_norm: Option<f64>,
    pub subset: Subset,
    pub split: Split,
}

impl QualityRecord {
    /// Normalized MOS used as the regression target.
    pub fn target(&self) -> Result<f64> {
        self.mos_norm.ok_or(Error::DegenerateRange {
            min: self.mos_raw,
            max: self.mos_raw,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<QualityRecord>,
    pub video_root: PathBuf,
    /// Raw MOS range of every subset present, over all splits.
    pub normalization_stats: BTreeMap<Subset, MosRange>,
    pub mode: NormalizationMode,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    MosOutOfRange { video_id: String, mos: f64 },
    MissingFile { video_id: String, path: PathBuf },
    DegenerateRange { subset: Option<Subset>, mos: f64 },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::MosOutOfRange { video_id, mos } => {
                write!(f, "{video_id}: raw MOS {mos} outside [0, 100]")
            }
            ValidationIssue::MissingFile { video_id, path } => {
                write!(f, "{video_id}: video file {} not found", path.display())
            }
            ValidationIssue::DegenerateRange { subset, mos } => match subset {
                Some(s) => write!(f, "subset {}: all raw MOS equal {mos}", s.as_str()),
                None => write!(f, "all raw MOS equal {mos}"),
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Deserialize)]
struct Row {
    video_path: String,
    mos: f64,
    subset: Subset,
    split: Split,
}

const COLUMNS: [&str; 4] = ["video_path", "mos", "subset", "split"];

/// Parses a CSV or JSONL manifest. JSONL is chosen for `.jsonl`/`.ndjson`
/// extensions, CSV otherwise. Video paths resolve against the manifest's
/// directory unless `video_root` is given.
pub fn load_manifest(
    path: &Path,
    mode: NormalizationMode,
    video_root: Option<&Path>,
) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::manifest(path, format!("unreadable: {e}")))?;
    let is_jsonl = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    );
    let rows = if is_jsonl {
        parse_jsonl(path, &text)?
    } else {
        parse_csv(path, &text)?
    };
    if rows.is_empty() {
        return Err(Error::manifest(path, "manifest has no records"));
    }
    let root = match video_root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let video_id = video_id_for(Path::new(&row.video_path));
        if video_id.is_empty() {
            return Err(Error::manifest(path, format!("record {line}: empty video_path")));
        }
        if !row.mos.is_finite() {
            return Err(Error::manifest(path, format!("record {line}: MOS is not finite")));
        }
        if !seen.insert(video_id.clone()) {
            return Err(Error::manifest(
                path,
                format!("record {line}: duplicate video id `{video_id}`"),
            ));
        }
        records.push(QualityRecord {
            video_id,
            video_path: PathBuf::from(row.video_path),
            mos_raw: row.mos,
            mos_norm: None,
            subset: row.subset,
            split: row.split,
        });
    }
    Ok(DatasetManifest::from_records(records, root, mode))
}

/// Derives a filesystem-safe id from a relative video path: the extension is
/// dropped and directory separators become `__`.
pub(crate) fn video_id_for(path: &Path) -> String {
    let stemmed = path.with_extension("");
    stemmed
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("__")
}

fn parse_csv(path: &Path, text: &str) -> Result<Vec<(usize, Row)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::manifest(path, format!("bad header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::manifest(path, "manifest has no header"));
    }
    for col in COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::manifest(path, format!("missing column `{col}`")));
        }
    }
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|row| (i + 2, row))
                .map_err(|e| Error::manifest(path, format!("line {}: {e}", i + 2)))
        })
        .collect()
}

fn parse_jsonl(path: &Path, text: &str) -> Result<Vec<(usize, Row)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let value: serde_json::Value = serde_json::from_str(l)
                .map_err(|e| Error::manifest(path, format!("line {}: {e}", i + 1)))?;
            for col in COLUMNS {
                if value.get(col).is_none() {
                    return Err(Error::manifest(
                        path,
                        format!("line {}: missing column `{col}`", i + 1),
                    ));
                }
            }
            serde_json::from_value(value)
                .map(|row| (i + 1, row))
                .map_err(|e| Error::manifest(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

impl DatasetManifest {
    /// Builds a manifest from records, computing per-subset ranges and
    /// filling in `mos_norm` under `mode`.
    pub fn from_records(
        mut records: Vec<QualityRecord>,
        video_root: PathBuf,
        mode: NormalizationMode,
    ) -> Self {
        let mut normalization_stats = BTreeMap::new();
        for subset in [Subset::LowLight, Subset::OverExposed] {
            if let Some(r) = MosRange::of(
                records
                    .iter()
                    .filter(|r| r.subset == subset)
                    .map(|r| r.mos_raw),
            ) {
                normalization_stats.insert(subset, r);
            }
        }
        let joint = MosRange::of(records.iter().map(|r| r.mos_raw));
        for rec in &mut records {
            let range = match mode {
                NormalizationMode::PerSubset => normalization_stats.get(&rec.subset).copied(),
                NormalizationMode::Joint => joint,
            };
            rec.mos_norm = range.and_then(|r| normalize_mos(rec.mos_raw, r.min, r.max).ok());
        }
        Self {
            records,
            video_root,
            normalization_stats,
            mode,
        }
    }

    pub fn resolve(&self, record: &QualityRecord) -> PathBuf {
        self.video_root.join(&record.video_path)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &QualityRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn get(&self, video_id: &str) -> Option<&QualityRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }

    /// The range applied to a subset under the manifest's mode.
    pub fn range_for(&self, subset: Subset) -> Option<MosRange> {
        match self.mode {
            NormalizationMode::PerSubset => self.normalization_stats.get(&subset).copied(),
            NormalizationMode::Joint => {
                MosRange::of(self.normalization_stats.values().flat_map(|r| [r.min, r.max]))
            }
        }
    }

    /// Reports raw MOS outside [0, 100], missing video files and degenerate
    /// normalization ranges. Never fails; anomalies are data, not errors.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        for rec in &self.records {
            if !(0.0..=100.0).contains(&rec.mos_raw) {
                issues.push(ValidationIssue::MosOutOfRange {
                    video_id: rec.video_id.clone(),
                    mos: rec.mos_raw,
                });
            }
            let path = self.resolve(rec);
            if !path.exists() {
                issues.push(ValidationIssue::MissingFile {
                    video_id: rec.video_id.clone(),
                    path,
                });
            }
        }
        match self.mode {
            NormalizationMode::PerSubset => {
                for (subset, r) in &self.normalization_stats {
                    if r.max <= r.min {
                        issues.push(ValidationIssue::DegenerateRange {
                            subset: Some(*subset),
                            mos: r.min,
                        });
                    }
                }
            }
            NormalizationMode::Joint => {
                if let Some(r) = self.range_for(Subset::LowLight) {
                    if r.max <= r.min {
                        issues.push(ValidationIssue::DegenerateRange {
                            subset: None,
                            mos: r.min,
                        });
                    }
                }
            }
        }
        ValidationReport { issues }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn csv_min_max_per_subset() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "video_path,mos,subset,split\na.mp4,20,low_light,train\nb.mp4,60,low_light,val\nc.mp4,100,low_light,test\n",
        );
        let m = load_manifest(&p, NormalizationMode::PerSubset, None).unwrap();
        let r = m.normalization_stats[&Subset::LowLight];
        assert_eq!((r.min, r.max), (20.0, 100.0));
        assert_eq!(m.records[1].mos_norm, Some(50.0));
        assert_eq!(m.video_root, dir.path());
    }

    #[test]
    fn empty_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "");
        assert!(matches!(
            load_manifest(&p, NormalizationMode::PerSubset, None),
            Err(Error::Manifest { .. })
        ));
        let p = write(dir.path(), "h.csv", "video_path,mos,subset,split\n");
        assert!(load_manifest(&p, NormalizationMode::PerSubset, None).is_err());
    }

    #[test]
    fn missing_column_named_in_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "video_path,mos,split\na.mp4,1,train\n");
        let err = load_manifest(&p, NormalizationMode::PerSubset, None).unwrap_err();
        assert!(err.to_string().contains("`subset`"), "{err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "video_path,mos,subset,split\na.mp4,1,low_light,train\na.y4m,2,low_light,train\n",
        );
        let err = load_manifest(&p, NormalizationMode::PerSubset, None).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn unreadable_file() {
        let err = load_manifest(Path::new("/nonexistent/m.csv"), NormalizationMode::Joint, None)
            .unwrap_err();
        assert!(err.to_string().contains("unreadable"));
    }

    #[test]
    fn out_of_range_mos_is_flagged_not_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "video_path,mos,subset,split\na.mp4,120,over_exposed,train\nb.mp4,3,over_exposed,test\n",
        );
        let m = load_manifest(&p, NormalizationMode::PerSubset, None).unwrap();
        assert_eq!(m.records[0].mos_norm, Some(100.0));
        let report = m.validate();
        assert!(report.issues.iter().any(|i| matches!(
            i,
            ValidationIssue::MosOutOfRange { video_id, .. } if video_id == "a"
        )));
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::MissingFile { .. })));
    }

    #[test]
    fn jsonl_same_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.jsonl",
            "{\"video_path\":\"x/a.mp4\",\"mos\":1,\"subset\":\"low_light\",\"split\":\"train\"}\n\n{\"video_path\":\"x/b.mp4\",\"mos\":3,\"subset\":\"over_exposed\",\"split\":\"val\"}\n",
        );
        let m = load_manifest(&p, NormalizationMode::Joint, None).unwrap();
        assert_eq!(m.records[0].video_id, "x__a");
        assert_eq!(m.records[0].mos_norm, Some(0.0));
        assert_eq!(m.records[1].mos_norm, Some(100.0));
        // Per-subset each subset has one record, so the range collapses.
        let m = load_manifest(&p, NormalizationMode::PerSubset, None).unwrap();
        assert_eq!(m.records[0].mos_norm, None);
        assert!(m.records[0].target().is_err());
        assert!(m
            .validate()
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::DegenerateRange { .. })));
    }

    #[test]
    fn per_subset_vs_joint() {
        let recs = |m: &[(f64, Subset)]| {
            m.iter()
                .enumerate()
                .map(|(i, &(mos, subset))| QualityRecord {
                    video_id: format!("v{i}"),
                    video_path: format!("v{i}.y4m").into(),
                    mos_raw: mos,
                    mos_norm: None,
                    subset,
                    split: Split::Train,
                })
                .collect::<Vec<_>>()
        };
        let data = [
            (10.0, Subset::LowLight),
            (30.0, Subset::LowLight),
            (50.0, Subset::OverExposed),
            (90.0, Subset::OverExposed),
        ];
        let per = DatasetManifest::from_records(recs(&data), PathBuf::new(), NormalizationMode::PerSubset);
        let norm: Vec<f64> = per.records.iter().map(|r| r.mos_norm.unwrap()).collect();
        assert_eq!(norm, vec![0.0, 100.0, 0.0, 100.0]);
        let joint = DatasetManifest::from_records(recs(&data), PathBuf::new(), NormalizationMode::Joint);
        let norm: Vec<f64> = joint.records.iter().map(|r| r.mos_norm.unwrap()).collect();
        assert_eq!(norm, vec![0.0, 25.0, 50.0, 100.0]);
    }

    #[test]
    fn split_parse() {
        assert_eq!("val".parse::<Split>().unwrap(), Split::Val);
        assert!("holdout".parse::<Split>().is_err());
    }
}
