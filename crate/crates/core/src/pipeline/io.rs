//! On-disk formats: JSON for structured data, CSV for traces and pair
//! annotations, and a whitespace-separated text format for word vectors.
//! Every error names the offending file, and the field or line when known.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TermEmbeddings;
use crate::segment::SweepPoint;

fn data_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| data_err(path, e.to_string()))
}

/// Pretty-printed, with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| data_err(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// One term per line followed by its whitespace-separated coordinates.
/// Blank lines are skipped. Every vector must have the same dimension.
pub fn read_embeddings(path: &Path) -> Result<TermEmbeddings> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = TermEmbeddings::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(term) = fields.next() else { continue };
        let v = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| data_err(path, format!("line {}: term '{term}' has bad value '{f}'", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if v.is_empty() {
            return Err(data_err(path, format!("line {}: term '{term}' has no values", i + 1)));
        }
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(data_err(
                    path,
                    format!("line {}: term '{term}' has {} values, expected {d}", i + 1, v.len()),
                ))
            }
            _ => {}
        }
        if out.insert(term.to_string(), v).is_some() {
            return Err(data_err(path, format!("line {}: duplicate term '{term}'", i + 1)));
        }
    }
    if out.is_empty() {
        return Err(data_err(path, "no embeddings"));
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, embeddings: &TermEmbeddings) -> Result<()> {
    create_parent(path)?;
    let mut text = String::new();
    for (term, v) in embeddings {
        text.push_str(term);
        for x in v {
            text.push(' ');
            text.push_str(&x.to_string());
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| data_err(path, e.to_string()))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| data_err(path, e.to_string())))
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    create_parent(path)?;
    let mut writer = csv::Writer::from_path(path).map_err(|e| data_err(path, e.to_string()))?;
    if rows.is_empty() {
        writer.write_record(header).map_err(|e| data_err(path, e.to_string()))?;
    }
    for r in rows {
        writer.serialize(r).map_err(|e| data_err(path, e.to_string()))?;
    }
    writer.flush().map_err(io_err(path))
}

/// One preference between two keyframes of the same story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub story_id: String,
    pub better_keyframe: String,
    pub worse_keyframe: String,
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairRecord>> {
    read_csv(path)
}

pub fn write_pairs_csv(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    write_csv(path, pairs, &["story_id", "better_keyframe", "worse_keyframe"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LossRow {
    iteration: usize,
    loss: f64,
}

/// Loss per iteration, numbered from 1.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let rows: Vec<LossRow> = losses
        .iter()
        .enumerate()
        .map(|(i, &loss)| LossRow { iteration: i + 1, loss })
        .collect();
    write_csv(path, &rows, &["iteration", "loss"])
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<f64>> {
    let rows: Vec<LossRow> = read_csv(path)?;
    for (i, r) in rows.iter().enumerate() {
        if r.iteration != i + 1 {
            return Err(data_err(path, format!("row {}: iteration {} out of order", i + 1, r.iteration)));
        }
    }
    Ok(rows.into_iter().map(|r| r.loss).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    #[serde(rename = "C")]
    c: f64,
    m: usize,
    objective: f64,
}

/// Penalty sweep as `C,m,objective` rows, `m` being the number of change
/// points.
pub fn write_trace_csv(path: &Path, trace: &[SweepPoint]) -> Result<()> {
    let rows: Vec<TraceRow> = trace
        .iter()
        .map(|p| TraceRow {
            c: p.c,
            m: p.change_points,
            objective: p.objective,
        })
        .collect();
    write_csv(path, &rows, &["C", "m", "objective"])
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<SweepPoint>> {
    let rows: Vec<TraceRow> = read_csv(path)?;
    Ok(rows
        .into_iter()
        .map(|r| SweepPoint {
            c: r.c,
            change_points: r.m,
            objective: r.objective,
        })
        .collect())
}

/// Files of one video. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub id: String,
    /// Shot list with raw per-shot inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnails: Option<PathBuf>,
    #[serde(default)]
    pub annotations: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub videos: Vec<ManifestVideo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base.join(path)
    }

    pub fn video(&self, id: &str) -> Option<&ManifestVideo> {
        self.videos.iter().find(|v| v.id == id)
    }

    /// Ids are unique, split ids exist and train and test are disjoint.
    pub fn check(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for v in &self.videos {
            if !ids.insert(v.id.as_str()) {
                return Err(Error::invalid(format!("duplicate video id '{}'", v.id)));
            }
        }
        if let Some(split) = &self.split {
            for id in split.train.iter().chain(&split.test) {
                if !ids.contains(id.as_str()) {
                    return Err(Error::invalid(format!("split names unknown video '{id}'")));
                }
            }
            if let Some(id) = split.train.iter().find(|id| split.test.contains(id)) {
                return Err(Error::invalid(format!("video '{id}' is in both train and test")));
            }
        }
        Ok(())
    }

    /// Every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        for v in &self.videos {
            let paths = v
                .video
                .iter()
                .chain(&v.features)
                .chain(&v.terms)
                .chain(&v.thumbnails)
                .chain(&v.annotations);
            for p in paths {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::invalid(format!(
                        "video '{}' references missing file {}",
                        v.id,
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reads a manifest and checks it; relative paths resolve against its
/// directory.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let mut m: CorpusManifest = read_json(path)?;
    m.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.check()
        .and_then(|()| m.check_files())
        .map_err(|e| data_err(path, e.to_string()))?;
    Ok(m)
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    write_json(path, manifest)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Segmentation;

    #[test]
    fn segmentation_json_round_trip_and_field_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seg.json");
        let s = Segmentation::from_boundaries(9, &[0, 4, 7]).unwrap();
        write_json(&p, &s).unwrap();
        assert_eq!(read_json::<Segmentation>(&p).unwrap(), s);

        fs::write(&p, r#"{"n_shots": 4}"#).unwrap();
        let msg = read_json::<Segmentation>(&p).unwrap_err().to_string();
        assert!(msg.contains("seg.json") && msg.contains("boundaries"), "{msg}");
        fs::write(&p, r#"{"n_shots": 4, "boundaries": [1, 2]}"#).unwrap();
        assert!(read_json::<Segmentation>(&p).is_err());
    }

    #[test]
    fn embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        let mut e = TermEmbeddings::new();
        e.insert("alpha".into(), vec![0.1, -2.5e-7, 3.0]);
        e.insert("beta".into(), vec![1.0 / 3.0, 0.0, -1.0]);
        write_embeddings(&p, &e).unwrap();
        assert_eq!(read_embeddings(&p).unwrap(), e);
    }

    #[test]
    fn embeddings_errors_name_line_and_term() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        fs::write(&p, "a 1 2\nb 1 x\n").unwrap();
        let msg = read_embeddings(&p).unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("'b'"), "{msg}");
        fs::write(&p, "a 1 2\n\nb 1\n").unwrap();
        assert!(read_embeddings(&p).unwrap_err().to_string().contains("line 3"));
        fs::write(&p, "a 1\na 2\n").unwrap();
        assert!(read_embeddings(&p).unwrap_err().to_string().contains("duplicate"));
        fs::write(&p, "\n").unwrap();
        assert!(read_embeddings(&p).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![
            PairRecord {
                story_id: "v:0".into(),
                better_keyframe: "k1".into(),
                worse_keyframe: "k2".into(),
            },
            PairRecord {
                story_id: "v:1".into(),
                better_keyframe: "k, with comma".into(),
                worse_keyframe: "k4".into(),
            },
        ];
        let p = dir.path().join("pairs.csv");
        write_pairs_csv(&p, &pairs).unwrap();
        assert_eq!(read_pairs_csv(&p).unwrap(), pairs);
        assert!(fs::read_to_string(&p).unwrap().starts_with("story_id,better_keyframe,worse_keyframe"));

        let losses = vec![1.5, 0.25, 1.0 / 7.0];
        let p = dir.path().join("loss.csv");
        write_loss_csv(&p, &losses).unwrap();
        assert_eq!(read_loss_csv(&p).unwrap(), losses);
        write_loss_csv(&p, &[]).unwrap();
        assert!(read_loss_csv(&p).unwrap().is_empty());

        let trace = vec![
            SweepPoint {
                c: 0.001,
                change_points: 12,
                objective: 3.25,
            },
            SweepPoint {
                c: 0.002,
                change_points: 4,
                objective: 0.1 + 0.2,
            },
        ];
        let p = dir.path().join("trace.csv");
        write_trace_csv(&p, &trace).unwrap();
        assert_eq!(read_trace_csv(&p).unwrap(), trace);
        assert!(fs::read_to_string(&p).unwrap().starts_with("C,m,objective"));
    }

    #[test]
    fn malformed_csv_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        fs::write(&p, "iteration,loss\n1,abc\n").unwrap();
        let msg = read_loss_csv(&p).unwrap_err().to_string();
        assert!(msg.contains("loss.csv"), "{msg}");
        fs::write(&p, "iteration,loss\n2,1.0\n").unwrap();
        assert!(read_loss_csv(&p).is_err());
    }

    fn manifest() -> CorpusManifest {
        CorpusManifest {
            videos: vec![
                ManifestVideo {
                    id: "a".into(),
                    video: Some("a.video.json".into()),
                    features: None,
                    terms: None,
                    thumbnails: None,
                    annotations: vec!["a.truth.json".into()],
                },
                ManifestVideo {
                    id: "b".into(),
                    video: None,
                    features: Some("b.features.json".into()),
                    terms: None,
                    thumbnails: None,
                    annotations: vec![],
                },
            ],
            split: Some(Split {
                train: vec!["a".into()],
                test: vec!["b".into()],
            }),
            base: PathBuf::new(),
        }
    }

    #[test]
    fn manifest_round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["a.video.json", "a.truth.json", "b.features.json"] {
            fs::write(dir.path().join(f), "{}").unwrap();
        }
        let p = dir.path().join("manifest.json");
        let m = manifest();
        write_manifest(&p, &m).unwrap();
        let back = read_manifest(&p).unwrap();
        assert_eq!(back.base, dir.path());
        assert_eq!(CorpusManifest { base: PathBuf::new(), ..back }, m);

        let mut bad = manifest();
        bad.split.as_mut().unwrap().test.push("a".into());
        write_manifest(&p, &bad).unwrap();
        assert!(read_manifest(&p).unwrap_err().to_string().contains("both"));

        let mut missing = manifest();
        missing.videos[1].features = Some("nope.json".into());
        write_manifest(&p, &missing).unwrap();
        assert!(read_manifest(&p).unwrap_err().to_string().contains("nope.json"));

        let mut dup = manifest();
        dup.videos[1].id = "a".into();
        assert!(dup.check().is_err());
    }
}
