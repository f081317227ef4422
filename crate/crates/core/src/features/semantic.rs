//! Concept features from the transcript: each term occurrence spreads a
//! Gaussian-in-time weight over nearby shots, optionally scaled by a visual
//! concept detector's probability for the shot.

use serde::{Deserialize, Serialize};

use super::spectral::ConceptGroups;
use crate::error::{Error, Result};
use crate::types::{ShotRecord, Video};

/// One occurrence of a unigram in the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTerm {
    pub unigram: String,
    /// Frame index at which the term is spoken.
    pub t_u: f64,
    /// Probability of the term's visual concept in every shot of the video.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svm_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticConfig {
    /// Standard deviation of the temporal Gaussian, in frames.
    pub sigma_a: f64,
    /// Number of concept groups.
    pub k: usize,
}

impl SemanticConfig {
    /// 20 seconds of video and 50 concept groups.
    pub fn for_fps(fps: f64) -> Self {
        SemanticConfig {
            sigma_a: 20.0 * fps,
            k: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_a > 0.0 && self.sigma_a.is_finite()) {
            return Err(Error::invalid(format!("sigma_a must be positive, got {}", self.sigma_a)));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticMode {
    /// Gaussian weight times the concept detector probability.
    Visual,
    /// Gaussian weight alone.
    Textual,
}

/// Unnormalized Gaussian (peak 1) of the distance between two timestamps.
#[inline]
pub fn gaussian_weight(t_u: f64, t_s: f64, sigma: f64) -> f64 {
    let d = t_u - t_s;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

/// Probability that `term` is present in `shot`.
///
/// In visual mode a term without detector probabilities falls back to the
/// Gaussian weight alone; a probability vector too short for the shot counts
/// as probability 0.
pub fn term_shot_probability(
    term: &TranscriptTerm,
    shot: &ShotRecord,
    cfg: &SemanticConfig,
    mode: SemanticMode,
) -> f64 {
    let w = gaussian_weight(term.t_u, shot.timestamp(), cfg.sigma_a);
    match (mode, &term.svm_probs) {
        (SemanticMode::Visual, Some(p)) => p.get(shot.index).copied().unwrap_or(0.0) * w,
        _ => w,
    }
}

fn concept_vector(
    shot: &ShotRecord,
    terms: &[TranscriptTerm],
    groups: &ConceptGroups,
    cfg: &SemanticConfig,
    mode: SemanticMode,
) -> Result<Vec<f64>> {
    let mut v = vec![0.0; groups.k];
    for term in terms {
        let g = groups.group_of(&term.unigram).ok_or_else(|| {
            Error::invalid(format!("term '{}' has no concept group", term.unigram))
        })?;
        if mode == SemanticMode::Visual && term.svm_probs.is_none() {
            continue;
        }
        v[g] += term_shot_probability(term, shot, cfg, mode);
    }
    Ok(v)
}

/// Per concept group, the summed presence probability of its terms.
/// Terms without detector probabilities carry no visual evidence and are
/// skipped.
pub fn visual_semantic_vector(
    shot: &ShotRecord,
    terms: &[TranscriptTerm],
    groups: &ConceptGroups,
    cfg: &SemanticConfig,
) -> Result<Vec<f64>> {
    concept_vector(shot, terms, groups, cfg, SemanticMode::Visual)
}

/// Per concept group, the summed temporal weight of its terms.
pub fn textual_semantic_vector(
    shot: &ShotRecord,
    terms: &[TranscriptTerm],
    groups: &ConceptGroups,
    cfg: &SemanticConfig,
) -> Result<Vec<f64>> {
    concept_vector(shot, terms, groups, cfg, SemanticMode::Textual)
}

/// Checks timestamps and probability vector lengths against the video.
pub fn validate_terms(terms: &[TranscriptTerm], video: &Video) -> Result<()> {
    let (Some(first), Some(last)) = (video.shots.first(), video.shots.last()) else {
        return Err(Error::invalid("video has no shots"));
    };
    for (i, t) in terms.iter().enumerate() {
        if !(t.t_u >= first.start_frame as f64 && t.t_u <= last.end_frame as f64) {
            return Err(Error::invalid(format!(
                "term {i} ('{}') at frame {} lies outside the video",
                t.unigram, t.t_u
            )));
        }
        if let Some(p) = &t.svm_probs {
            if p.len() != video.n_shots() {
                return Err(Error::shape(format!(
                    "term {i} ('{}') has {} probabilities for {} shots",
                    t.unigram,
                    p.len(),
                    video.n_shots()
                )));
            }
            if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::invalid(format!(
                    "term {i} ('{}') has a probability outside [0, 1]",
                    t.unigram
                )));
            }
        }
    }
    Ok(())
}
