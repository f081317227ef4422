//! Query matching and story ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{term_shot_probability, SemanticConfig, SemanticMode, TermEmbeddings, TranscriptTerm};
use crate::types::{Segmentation, ShotRecord, Story};

/// Weight of the semantic term against the aesthetic one.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    /// Query words that have an embedding.
    pub words: Vec<String>,
    pub resolved_term: String,
    /// Mean embedding of `words`.
    pub embedding: Vec<f64>,
    /// Cosine similarity between `embedding` and the resolved term.
    pub similarity: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Matches a whitespace-separated query to the vocabulary term whose
/// embedding is most cosine-similar to the mean query embedding. Ties go to
/// the lexicographically smallest term.
pub fn match_query(text: &str, embeddings: &TermEmbeddings, vocabulary: &[String]) -> Result<Query> {
    let words: Vec<String> = text
        .split_whitespace()
        .filter(|w| embeddings.contains_key(*w))
        .map(str::to_owned)
        .collect();
    if words.is_empty() {
        return Err(Error::invalid(format!("no word of query '{text}' has an embedding")));
    }
    let dim = embeddings[&words[0]].len();
    let mut mean = vec![0.0; dim];
    for w in &words {
        let v = &embeddings[w];
        if v.len() != dim {
            return Err(Error::shape(format!("embedding of '{w}' has dimension {}, expected {dim}", v.len())));
        }
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / words.len() as f64);
    }
    let mut candidates: Vec<&String> = vocabulary.iter().filter(|t| embeddings.contains_key(*t)).collect();
    candidates.sort();
    candidates.dedup();
    let mut best: Option<(&String, f64)> = None;
    for term in candidates {
        let v = &embeddings[term];
        if v.len() != dim {
            return Err(Error::shape(format!("embedding of '{term}' has dimension {}, expected {dim}", v.len())));
        }
        let s = cosine(&mean, v);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((term, s));
        }
    }
    let Some((term, similarity)) = best else {
        return Err(Error::invalid("no vocabulary term has an embedding"));
    };
    Ok(Query {
        text: text.to_owned(),
        words,
        resolved_term: term.clone(),
        embedding: mean,
        similarity,
    })
}

/// Presence of a unigram in one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermPresence {
    pub p: f64,
    /// No occurrence of the term carries detector probabilities, so `p` is
    /// the temporal weight alone.
    pub textual_only: bool,
}

/// Highest presence probability over all occurrences of `term`.
pub fn term_presence(shot: &ShotRecord, terms: &[TranscriptTerm], term: &str, cfg: &SemanticConfig) -> TermPresence {
    let mut p = 0.0f64;
    let mut textual_only = true;
    for t in terms.iter().filter(|t| t.unigram == term) {
        p = p.max(term_shot_probability(t, shot, cfg, SemanticMode::Visual));
        textual_only &= t.svm_probs.is_none();
    }
    TermPresence { p, textual_only }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredKeyframe {
    pub id: String,
    /// Aesthetic score.
    pub score: f64,
}

/// Per-shot inputs of the story ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotEvidence {
    pub p: f64,
    pub keyframes: Vec<ScoredKeyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedStory {
    pub story: Story,
    pub best_keyframe: Option<String>,
    pub score: f64,
    /// The story has no keyframes and was scored on the semantic term alone.
    pub no_keyframes: bool,
}

/// Scores each story by the best shot value of
/// `α P(s, u) + (1 − α) max_d A(d)` and sorts descending; equal scores keep
/// story order. A shot without keyframes contributes `α P(s, u)`.
pub fn rank_stories(seg: &Segmentation, shots: &[ShotEvidence], alpha: f64) -> Result<Vec<RankedStory>> {
    if shots.len() != seg.n_shots() {
        return Err(Error::shape(format!(
            "{} shot records for a segmentation of {} shots",
            shots.len(),
            seg.n_shots()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let mut out = Vec::with_capacity(seg.n_stories());
    for &story in seg.stories() {
        let mut score = f64::NEG_INFINITY;
        let mut best_kf: Option<&ScoredKeyframe> = None;
        for s in &shots[story.shots()] {
            let top = s.keyframes.iter().fold(None::<&ScoredKeyframe>, |b, k| match b {
                Some(b) if b.score >= k.score => Some(b),
                _ => Some(k),
            });
            let value = alpha * s.p + top.map_or(0.0, |k| (1.0 - alpha) * k.score);
            score = score.max(value);
            if let Some(k) = top {
                if best_kf.is_none_or(|b| k.score > b.score) {
                    best_kf = Some(k);
                }
            }
        }
        out.push(RankedStory {
            story,
            best_keyframe: best_kf.map(|k| k.id.clone()),
            score,
            no_keyframes: best_kf.is_none(),
        });
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}
