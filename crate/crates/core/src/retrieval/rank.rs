//! Linear ranking model over thumbnail descriptors, trained as an SVM on
//! pairwise difference vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `better` was preferred over `worse` by an annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub better: Vec<f64>,
    pub worse: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankConfig {
    pub c_r: f64,
    pub iterations: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            c_r: 100.0,
            iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    pub w_r: Vec<f64>,
    pub c_r: f64,
    /// Best objective value seen up to each iteration, starting at `w = 0`.
    pub objective_trace: Vec<f64>,
}

fn check_pairs(pairs: &[PreferencePair]) -> Result<usize> {
    let Some(first) = pairs.first() else {
        return Err(Error::invalid("ranking needs at least one preference pair"));
    };
    let dim = first.better.len();
    for (i, p) in pairs.iter().enumerate() {
        if p.better.len() != dim || p.worse.len() != dim {
            return Err(Error::shape(format!("pair {i} does not have dimension {dim}")));
        }
        if p.better.iter().chain(&p.worse).any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("pair {i} has non-finite features")));
        }
    }
    Ok(dim)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `½‖w‖² + C Σ max(0, 1 − w·d)` over difference vectors `d`.
pub fn rank_objective(w: &[f64], diffs: &[Vec<f64>], c_r: f64) -> f64 {
    let hinge: f64 = diffs.iter().map(|d| (1.0 - dot(w, d)).max(0.0)).sum();
    0.5 * dot(w, w) + c_r * hinge
}

/// Projected subgradient descent with step `1/(t+1)`. The iterate is kept in
/// the ball of radius `sqrt(2 C P)`, which contains the optimum, and the
/// best iterate seen is returned.
pub fn train_rank_model(pairs: &[PreferencePair], cfg: &RankConfig) -> Result<RankModel> {
    let dim = check_pairs(pairs)?;
    if !(cfg.c_r > 0.0 && cfg.c_r.is_finite()) {
        return Err(Error::invalid(format!("C_r must be positive, got {}", cfg.c_r)));
    }
    let diffs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| p.better.iter().zip(&p.worse).map(|(a, b)| a - b).collect())
        .collect();
    let radius = (2.0 * cfg.c_r * diffs.len() as f64).sqrt();
    let mut w = vec![0.0; dim];
    let mut best_w = w.clone();
    let mut best = rank_objective(&w, &diffs, cfg.c_r);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(best);
    for t in 0..cfg.iterations {
        let mut g = w.clone();
        for d in &diffs {
            if dot(&w, d) < 1.0 {
                g.iter_mut().zip(d).for_each(|(gi, di)| *gi -= cfg.c_r * di);
            }
        }
        let eta = 1.0 / (t as f64 + 1.0);
        w.iter_mut().zip(&g).for_each(|(wi, gi)| *wi -= eta * gi);
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            w.iter_mut().for_each(|wi| *wi *= radius / norm);
        }
        let obj = rank_objective(&w, &diffs, cfg.c_r);
        if obj < best {
            best = obj;
            best_w.clone_from(&w);
        }
        trace.push(best);
    }
    Ok(RankModel {
        w_r: best_w,
        c_r: cfg.c_r,
        objective_trace: trace,
    })
}

/// `A(d) = w_r · τ(d)`.
pub fn aesthetic_score(model: &RankModel, tau: &[f64]) -> Result<f64> {
    if tau.len() != model.w_r.len() {
        return Err(Error::shape(format!(
            "descriptor has dimension {}, model expects {}",
            tau.len(),
            model.w_r.len()
        )));
    }
    Ok(dot(&model.w_r, tau))
}

/// Percentage of pairs the model orders against the annotation. A tie
/// counts as half a swap.
pub fn swapped_pairs(model: &RankModel, pairs: &[PreferencePair]) -> Result<f64> {
    check_pairs(pairs)?;
    let mut swapped = 0.0;
    for p in pairs {
        let (b, w) = (aesthetic_score(model, &p.better)?, aesthetic_score(model, &p.worse)?);
        if b < w {
            swapped += 1.0;
        } else if b == w {
            swapped += 0.5;
        }
    }
    Ok(100.0 * swapped / pairs.len() as f64)
}
