//! Held-out evaluation of the story detector.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{train, EmbeddingModel, TrainConfig, TrainingVideo};
use crate::error::{Error, Result};
use crate::metric::mean_iou;
use crate::segment::auto_segment;
use crate::types::{AnnotationSet, Segmentation, Timeline};

/// One video as seen by the evaluation: shot descriptors, frame layout and
/// human annotations. Training uses the first annotation.
#[derive(Debug, Clone)]
pub struct EvalVideo {
    pub id: String,
    pub features: Vec<Vec<f64>>,
    pub timeline: Timeline,
    pub annotations: AnnotationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EvalMode {
    /// Train on every video but one, test on that one, for each video.
    LeaveOneOut,
    /// Train on `train` (or use a supplied model) and test on `test`.
    Split { train: Vec<String>, test: Vec<String> },
    /// Segment the descriptors directly, without an embedding.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub train: TrainConfig,
    /// Step of the per-video penalty sweep.
    pub step: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            step: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub iou: f64,
    pub predicted_stories: usize,
    pub annotated_stories: usize,
    /// Penalty weight picked by the sweep.
    pub c: f64,
    pub segmentation: Segmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub rows: Vec<EvalRow>,
    pub mean_iou: f64,
}

impl EvalReport {
    /// Plain-text table, one row per test video and a closing mean.
    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>6}  {:>9}  {:>9}", "video", "IoU", "predicted", "annotated");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>6.3}  {:>9}  {:>9}",
                r.id, r.iou, r.predicted_stories, r.annotated_stories
            );
        }
        let _ = writeln!(s, "{:<width$}  {:>6.3}", "mean", self.mean_iou);
        s
    }
}

/// Per-fold seed, independent of scheduling.
fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn test_video(video: &EvalVideo, model: Option<&EmbeddingModel>, step: f64) -> Result<EvalRow> {
    let embedded = match model {
        Some(m) => m.embed_all(&video.features)?,
        None => video.features.clone(),
    };
    let auto = auto_segment(&embedded, step)?;
    let iou = mean_iou(&auto.segmentation, &video.annotations, &video.timeline)?;
    Ok(EvalRow {
        id: video.id.clone(),
        iou,
        predicted_stories: auto.segmentation.n_stories(),
        annotated_stories: video.annotations.annotations()[0].n_stories(),
        c: auto.c,
        segmentation: auto.segmentation,
    })
}

fn train_on(videos: &[&EvalVideo], cfg: &TrainConfig) -> Result<EmbeddingModel> {
    let corpus: Vec<TrainingVideo<'_>> = videos
        .iter()
        .map(|v| TrainingVideo {
            features: &v.features,
            truth: &v.annotations.annotations()[0],
        })
        .collect();
    Ok(train(&corpus, cfg)?.model)
}

fn check_videos(videos: &[EvalVideo]) -> Result<()> {
    for v in videos {
        if v.features.len() != v.annotations.n_shots() || v.timeline.n_shots() != v.features.len() {
            return Err(Error::shape(format!(
                "video {}: {} descriptors, {} annotated shots, {} timeline shots",
                v.id,
                v.features.len(),
                v.annotations.n_shots(),
                v.timeline.n_shots()
            )));
        }
    }
    let mut ids: Vec<&str> = videos.iter().map(|v| v.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate video id '{}'", w[0])));
    }
    Ok(())
}

fn report(mode: EvalMode, rows: Vec<EvalRow>) -> EvalReport {
    let mean_iou = rows.iter().map(|r| r.iou).sum::<f64>() / rows.len() as f64;
    EvalReport { mode, rows, mean_iou }
}

/// Runs the evaluation protocol selected by `mode`. Leave-one-out folds run
/// in parallel; each fold trains with its own seed derived from
/// `cfg.train.seed`. In split mode a supplied `model` replaces training.
pub fn run_evaluation(
    videos: &[EvalVideo],
    mode: &EvalMode,
    cfg: &EvalConfig,
    model: Option<&EmbeddingModel>,
) -> Result<EvalReport> {
    check_videos(videos)?;
    if videos.is_empty() {
        return Err(Error::invalid("no videos to evaluate"));
    }
    let rows = match mode {
        EvalMode::Raw => videos
            .iter()
            .map(|v| test_video(v, None, cfg.step))
            .collect::<Result<Vec<_>>>()?,
        EvalMode::LeaveOneOut => {
            if videos.len() < 2 {
                return Err(Error::invalid("leave-one-out needs at least two videos"));
            }
            (0..videos.len())
                .into_par_iter()
                .map(|fold| {
                    let train_set: Vec<&EvalVideo> =
                        videos.iter().enumerate().filter(|(i, _)| *i != fold).map(|(_, v)| v).collect();
                    let tc = TrainConfig {
                        seed: fold_seed(cfg.train.seed, fold),
                        ..cfg.train.clone()
                    };
                    let m = train_on(&train_set, &tc)?;
                    test_video(&videos[fold], Some(&m), cfg.step)
                })
                .collect::<Result<Vec<_>>>()?
        }
        EvalMode::Split { train: train_ids, test } => {
            let find = |id: &String| {
                videos
                    .iter()
                    .find(|v| &v.id == id)
                    .ok_or_else(|| Error::invalid(format!("split names unknown video '{id}'")))
            };
            if let Some(id) = train_ids.iter().find(|id| test.contains(id)) {
                return Err(Error::invalid(format!("video '{id}' is in both train and test")));
            }
            if test.is_empty() {
                return Err(Error::invalid("split has no test videos"));
            }
            let trained;
            let m = match model {
                Some(m) => m,
                None => {
                    let train_set = train_ids.iter().map(find).collect::<Result<Vec<_>>>()?;
                    if train_set.is_empty() {
                        return Err(Error::invalid("split has no training videos and no model was given"));
                    }
                    trained = train_on(&train_set, &cfg.train)?;
                    &trained
                }
            };
            test.iter()
                .map(|id| test_video(find(id)?, Some(m), cfg.step))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(report(mode.clone(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(id: &str, features: Vec<Vec<f64>>, truth: &[usize]) -> EvalVideo {
        let n = features.len();
        EvalVideo {
            id: id.into(),
            features,
            timeline: Timeline::unit(n),
            annotations: AnnotationSet::new(vec![Segmentation::from_boundaries(n, truth).unwrap()]).unwrap(),
        }
    }

    fn blocks() -> Vec<Vec<f64>> {
        let mut f = vec![vec![0.0, 0.0]; 4];
        f.extend(vec![vec![5.0, 1.0]; 5]);
        f
    }

    #[test]
    fn raw_mode_on_clean_blocks() {
        let vs = vec![video("a", blocks(), &[0, 4]), video("b", blocks(), &[0, 4])];
        let r = run_evaluation(&vs, &EvalMode::Raw, &EvalConfig::default(), None).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].iou, 1.0);
        assert_eq!(r.rows[0].iou, r.rows[1].iou);
        assert_eq!(r.mean_iou, (r.rows[0].iou + r.rows[1].iou) / 2.0);
        assert!(r.table().contains("mean"));
    }

    #[test]
    fn leave_one_out_needs_two_videos() {
        let vs = vec![video("a", blocks(), &[0, 4])];
        assert!(run_evaluation(&vs, &EvalMode::LeaveOneOut, &EvalConfig::default(), None).is_err());
    }

    #[test]
    fn identical_videos_score_equally() {
        let vs: Vec<EvalVideo> = (0..3).map(|i| video(&format!("v{i}"), blocks(), &[0, 4])).collect();
        let cfg = EvalConfig {
            train: TrainConfig {
                iterations: 5,
                batch_size: 20,
                hidden: vec![8, 4],
                seed: 3,
                ..TrainConfig::default()
            },
            ..EvalConfig::default()
        };
        let a = run_evaluation(&vs, &EvalMode::LeaveOneOut, &cfg, None).unwrap();
        let b = run_evaluation(&vs, &EvalMode::LeaveOneOut, &cfg, None).unwrap();
        assert_eq!(a, b);
        let mean = a.rows.iter().map(|r| r.iou).sum::<f64>() / 3.0;
        assert_eq!(a.mean_iou, mean);
    }

    #[test]
    fn split_validation() {
        let vs = vec![video("a", blocks(), &[0, 4]), video("b", blocks(), &[0, 4])];
        let overlap = EvalMode::Split { train: vec!["a".into()], test: vec!["a".into()] };
        assert!(run_evaluation(&vs, &overlap, &EvalConfig::default(), None).is_err());
        let unknown = EvalMode::Split { train: vec!["a".into()], test: vec!["z".into()] };
        let m = EmbeddingModel::zeros(&[2, 3], true).unwrap();
        assert!(run_evaluation(&vs, &unknown, &EvalConfig::default(), Some(&m)).is_err());
        let ok = EvalMode::Split { train: vec![], test: vec!["b".into()] };
        let r = run_evaluation(&vs, &ok, &EvalConfig::default(), Some(&m)).unwrap();
        assert_eq!(r.rows.len(), 1);
        let dup = vec![video("a", blocks(), &[0, 4]), video("a", blocks(), &[0, 4])];
        assert!(run_evaluation(&dup, &EvalMode::Raw, &EvalConfig::default(), None).is_err());
    }
}
