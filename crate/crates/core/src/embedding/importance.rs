use serde::{Deserialize, Serialize};

use super::model::EmbeddingModel;
use crate::error::{Error, Result};
use crate::types::{BlockMap, FeatureBlock};

/// Jacobian `∂φ_i/∂x_j` of the (dropout-free) embedding at `x`, one row per
/// embedding dimension.
pub fn input_jacobian(model: &EmbeddingModel, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() != model.input_dim() {
        return Err(Error::shape(format!(
            "input has dimension {}, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    let trace = model.trace(x, None);
    let out = model.output_dim();
    let mut rows = Vec::with_capacity(out);
    let mut unit = vec![0.0; out];
    for i in 0..out {
        unit[i] = 1.0;
        rows.push(model.backward(&trace, None, &unit, None, true).expect("input gradient requested"));
        unit[i] = 0.0;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockImportance {
    pub block: FeatureBlock,
    pub importance: f64,
}

/// Relative influence of each feature family on the embedding.
///
/// Absolute partial derivatives are averaged over the samples, then over the
/// coordinates of each block and the embedding dimensions; the per-block
/// values are L1-normalized. Empty blocks are omitted. A model whose
/// Jacobian vanishes everywhere yields all zeros.
pub fn feature_importance(
    model: &EmbeddingModel,
    samples: &[Vec<f64>],
    block_map: &BlockMap,
) -> Result<Vec<BlockImportance>> {
    if samples.is_empty() {
        return Err(Error::invalid("feature importance needs at least one sample"));
    }
    block_map.validate()?;
    let d = model.input_dim();
    if block_map.dim() != d {
        return Err(Error::shape(format!(
            "block map covers {} features, model expects {d}",
            block_map.dim()
        )));
    }
    let out = model.output_dim();
    let mut mean_abs = vec![vec![0.0; d]; out];
    for x in samples {
        let jac = input_jacobian(model, x)?;
        for (acc, row) in mean_abs.iter_mut().zip(&jac) {
            for (a, g) in acc.iter_mut().zip(row) {
                *a += g.abs();
            }
        }
    }
    let n = samples.len() as f64;
    let mut result: Vec<BlockImportance> = block_map
        .blocks
        .iter()
        .filter(|b| b.end > b.start)
        .map(|b| {
            let per_dim: f64 = mean_abs
                .iter()
                .map(|row| row[b.start..b.end].iter().sum::<f64>() / ((b.end - b.start) as f64 * n))
                .sum();
            BlockImportance {
                block: b.block,
                importance: per_dim / out as f64,
            }
        })
        .collect();
    let total: f64 = result.iter().map(|b| b.importance).sum();
    if total > 0.0 {
        for b in &mut result {
            b.importance /= total;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> EmbeddingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = EmbeddingModel::glorot(&[7, 10, 6, 3], true, &mut rng).unwrap();
        for b in m.biases.iter_mut().flatten() {
            *b = rng.random_range(0.0..0.5);
        }
        m
    }

    #[test]
    fn dead_block_has_zero_importance() {
        let mut m = model(1);
        let map = BlockMap::from_sizes([3, 2, 1, 1, 0, 0]);
        // zero first-layer columns of the audio block (features 3 and 4)
        for i in 0..10 {
            m.weights[0][i * 7 + 3] = 0.0;
            m.weights[0][i * 7 + 4] = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let imp = feature_importance(&m, &xs, &map).unwrap();
        assert_eq!(imp.len(), 4);
        let audio = imp.iter().find(|b| b.block == FeatureBlock::Audio).unwrap();
        assert_eq!(audio.importance, 0.0);
        let sum: f64 = imp.iter().map(|b| b.importance).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(imp.iter().all(|b| b.importance >= 0.0));
    }

    #[test]
    fn linear_model_importance_is_mean_abs_weight() {
        let mut m = EmbeddingModel::zeros(&[4, 2], false).unwrap();
        m.weights[0] = vec![1.0, -2.0, 0.5, 0.0, -3.0, 1.0, 0.5, 2.0];
        let map = BlockMap::from_sizes([2, 0, 1, 1, 0, 0]);
        let imp = feature_importance(&m, &[vec![0.3, 0.1, -0.4, 2.0]], &map).unwrap();
        // mean |w| per block: visual (1+2+3+1)/4, qos (0.5+0.5)/2, time (0+2)/2
        let raw = [7.0 / 4.0, 0.5, 1.0];
        let total: f64 = raw.iter().sum();
        for (b, r) in imp.iter().zip(raw) {
            assert!((b.importance - r / total).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let m = model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = input_jacobian(&m, &x).unwrap();
        let eps = 1e-6;
        for j in 0..7 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let fp = m.forward(&xp, None).unwrap();
            let fm = m.forward(&xm, None).unwrap();
            for i in 0..3 {
                assert!((jac[i][j] - (fp[i] - fm[i]) / (2.0 * eps)).abs() < 1e-6);
            }
        }
    }
}
