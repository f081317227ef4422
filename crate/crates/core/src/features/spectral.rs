//! Grouping of transcript terms into concept groups by spectral clustering
//! of their word-embedding cosine similarities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Word vector of every known term.
pub type TermEmbeddings = BTreeMap<String, Vec<f64>>;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptGroups {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl ConceptGroups {
    pub fn group_of(&self, term: &str) -> Option<usize> {
        self.assignment.get(term).copied()
    }
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[i]` is the unit eigenvector of `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a dense symmetric `n x n` matrix (row-major).
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<SymmetricEigen> {
    if matrix.len() != n * n {
        return Err(Error::shape(format!("expected {n}x{n} matrix, got {} values", matrix.len())));
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    let tol = 1e-30 * total.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[idx].clone());
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeansResult {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let (j, _) = nearest(p, &centers);
            if *l != j {
                *l = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (j, (s, &c)) in sums.into_iter().zip(&counts).enumerate() {
            // an emptied cluster keeps its previous center
            if c > 0 {
                centers[j] = s.into_iter().map(|x| x / c as f64).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}

/// Lloyd's k-means with k-means++ seeding; the restart with the lowest
/// inertia wins, ties going to the earliest restart.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || points.len() < k {
        return Err(Error::invalid(format!(
            "k-means needs 1 <= k <= points, got k={k} for {} points",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..KMEANS_RESTARTS {
        let init = kmeans_pp_init(points, k, &mut rng);
        let run = lloyd(points, init);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Clusters terms into `k` concept groups.
///
/// Affinities are cosine similarities clipped at zero, with each term's
/// self-similarity kept on the diagonal so every degree is positive. The
/// rows of the `k` eigenvectors of the symmetric normalized Laplacian with the
/// smallest eigenvalues are unit-normalized and clustered with k-means.
/// Group ids are renumbered by first appearance in term order.
pub fn spectral_cluster_terms(embeddings: &TermEmbeddings, k: usize, seed: u64) -> Result<ConceptGroups> {
    let n = embeddings.len();
    if k == 0 {
        return Err(Error::invalid("number of concept groups must be at least 1"));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "only {n} distinct terms for {k} concept groups; choose a smaller K"
        )));
    }
    let terms: Vec<&String> = embeddings.keys().collect();
    let mut unit = Vec::with_capacity(n);
    for (term, v) in embeddings {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid(format!("embedding of term '{term}' has zero or non-finite norm")));
        }
        unit.push(v.iter().map(|x| x / norm).collect::<Vec<_>>());
    }
    let dim = unit[0].len();
    if let Some((t, _)) = embeddings.iter().find(|(_, v)| v.len() != dim) {
        return Err(Error::shape(format!("embedding of term '{t}' has a different dimension")));
    }

    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let c = if i == j {
                1.0
            } else {
                unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>().max(0.0)
            };
            w[i * n + j] = c;
            w[j * n + i] = c;
        }
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / w[i * n..(i + 1) * n].iter().sum::<f64>().sqrt())
        .collect();
    let mut lap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let ident = if i == j { 1.0 } else { 0.0 };
            lap[i * n + j] = ident - inv_sqrt_deg[i] * w[i * n + j] * inv_sqrt_deg[j];
        }
    }
    let eig = symmetric_eigen(&lap, n)?;

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = eig.vectors[..k].iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let km = kmeans(&rows, k, seed)?;

    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    let mut assignment = BTreeMap::new();
    for (term, &l) in terms.iter().zip(&km.labels) {
        if relabel[l] == usize::MAX {
            relabel[l] = next;
            next += 1;
        }
        assignment.insert((*term).clone(), relabel[l]);
    }
    Ok(ConceptGroups { k, assignment })
}
