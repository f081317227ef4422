//! Temporally constrained clustering of embedded shots.
//!
//! A video with `n` shots is split by `m` change points into `m + 1`
//! contiguous groups so as to minimize the total within-group sum of squares
//! plus `C · g(m, n)`, where `g(m, n) = m (ln(n / m) + 1)`. The table of
//! optimal costs for every `m` is filled once by dynamic programming; any
//! `C` then only needs an argmin over `m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Segmentation, Story};

/// Within-group sum of squares of every contiguous run of shots.
#[derive(Debug, Clone)]
pub struct WssTable {
    n: usize,
    /// `data[start * n + len - 1]`
    data: Vec<f64>,
}

impl WssTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// WSS of the `len` shots starting at `start`.
    #[inline]
    pub fn get(&self, start: usize, len: usize) -> f64 {
        debug_assert!(len >= 1 && start + len <= self.n);
        self.data[start * self.n + len - 1]
    }

    /// WSS of shots `start..end`.
    #[inline]
    pub fn range(&self, start: usize, end: usize) -> f64 {
        self.get(start, end - start)
    }
}

fn check_embedded(embedded: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = embedded.first() else {
        return Err(Error::invalid("cannot segment a video without shots"));
    };
    let dim = first.len();
    if let Some(i) = embedded.iter().position(|v| v.len() != dim) {
        return Err(Error::shape(format!(
            "embedded shot {i} has dimension {}, shot 0 has {dim}",
            embedded[i].len()
        )));
    }
    if embedded.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("embedded shots contain non-finite values"));
    }
    Ok(dim)
}

/// Fills the WSS table through the pairwise form
/// `WSS = (1 / 2len) Σ_{i,j} ‖x_i − x_j‖²`.
///
/// Extending a run by one point `x` adds `2 Σ_t ‖x − x_t‖²` to the pairwise
/// sum, and that inner sum is `len‖x‖² − 2x·S + Q` with `S` and `Q` the
/// running sum and sum of squared norms, so the whole table costs
/// `O(n² · dim)`. Points are centered on their mean first.
pub fn compute_wss_table(embedded: &[Vec<f64>]) -> Result<WssTable> {
    let dim = check_embedded(embedded)?;
    let n = embedded.len();
    let mut mean = vec![0.0; dim];
    for v in embedded {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = embedded
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let norms: Vec<f64> = centered.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();

    let mut data = vec![0.0; n * n];
    let mut sum = vec![0.0; dim];
    for start in 0..n {
        sum.iter_mut().for_each(|s| *s = 0.0);
        let mut sq = 0.0;
        let mut pairwise = 0.0;
        for (len, end) in (start..n).enumerate() {
            let x = &centered[end];
            let dot: f64 = x.iter().zip(&sum).map(|(a, b)| a * b).sum();
            let to_run = len as f64 * norms[end] - 2.0 * dot + sq;
            pairwise += 2.0 * to_run.max(0.0);
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
            sq += norms[end];
            data[start * n + len] = pairwise / (2.0 * (len + 1) as f64);
        }
    }
    Ok(WssTable { n, data })
}

/// `g(m, n) = m (ln(n/m) + 1)` for `1 <= m <= n`.
pub fn penalty(m: usize, n: usize) -> Result<f64> {
    if m < 1 || m > n {
        return Err(Error::invalid(format!("penalty needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(m * ((n / m).ln() + 1.0))
}

/// [`penalty`] extended with `g(0, n) = 0`.
fn penalty_or_zero(m: usize, n: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        penalty(m, n).expect("m within range")
    }
}

/// Optimal cost `D[m][j]` of the first `j` shots split by `m` change points,
/// with backpointers, for every `m` in `0..n`.
#[derive(Debug, Clone)]
pub struct DpState {
    n: usize,
    /// `cost[m * (n + 1) + j]`; infinite where `j <= m`.
    cost: Vec<f64>,
    /// Start of the last group in the optimum for `(m, j)`.
    back: Vec<usize>,
}

impl DpState {
    pub fn new(table: &WssTable) -> Self {
        let n = table.n();
        let w = n + 1;
        let mut cost = vec![f64::INFINITY; n * w];
        let mut back = vec![0usize; n * w];
        for j in 1..=n {
            cost[j] = table.range(0, j);
        }
        for m in 1..n {
            for j in m + 1..=n {
                let mut best = f64::INFINITY;
                let mut arg = m;
                for k in m..j {
                    let c = cost[(m - 1) * w + k] + table.range(k, j);
                    if c < best {
                        best = c;
                        arg = k;
                    }
                }
                cost[m * w + j] = best;
                back[m * w + j] = arg;
            }
        }
        DpState { n, cost, back }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Optimal total WSS of the whole video with `m` change points.
    pub fn cost(&self, m: usize) -> f64 {
        self.cost[m * (self.n + 1) + self.n]
    }

    pub fn cost_at(&self, m: usize, j: usize) -> f64 {
        self.cost[m * (self.n + 1) + j]
    }

    /// Penalized objective for `m` change points.
    pub fn objective(&self, m: usize, c: f64) -> f64 {
        self.cost(m) + c * penalty_or_zero(m, self.n)
    }

    /// Best number of change points for penalty weight `c`; the smallest
    /// `m` wins ties.
    pub fn best_m(&self, c: f64) -> usize {
        let mut best = 0;
        let mut best_val = self.objective(0, c);
        for m in 1..self.n {
            let v = self.objective(m, c);
            if v < best_val {
                best_val = v;
                best = m;
            }
        }
        best
    }

    /// Optimal segmentation with exactly `m` change points.
    pub fn reconstruct(&self, m: usize) -> Segmentation {
        let w = self.n + 1;
        let mut stories = Vec::with_capacity(m + 1);
        let mut end = self.n;
        for level in (0..=m).rev() {
            let start = if level == 0 { 0 } else { self.back[level * w + end] };
            stories.push(Story {
                first_shot: start,
                last_shot: end - 1,
            });
            end = start;
        }
        stories.reverse();
        Segmentation::from_stories(self.n, stories).expect("backtracking yields a partition")
    }
}

#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub segmentation: Segmentation,
    pub change_points: usize,
    /// Total WSS plus `C · g(m, n)`.
    pub objective: f64,
}

/// Globally optimal segmentation of `embedded` for a fixed penalty weight.
pub fn segment_video(embedded: &[Vec<f64>], c: f64) -> Result<SegmentResult> {
    if !(c >= 0.0) {
        return Err(Error::invalid(format!("penalty weight must be non-negative, got {c}")));
    }
    let dp = DpState::new(&compute_wss_table(embedded)?);
    let m = dp.best_m(c);
    Ok(SegmentResult {
        segmentation: dp.reconstruct(m),
        change_points: m,
        objective: dp.objective(m, c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub change_points: usize,
    pub objective: f64,
}

/// Evaluates the optimum at each penalty weight in `cs`.
pub fn sweep(dp: &DpState, cs: &[f64]) -> Vec<SweepPoint> {
    cs.iter()
        .map(|&c| {
            let m = dp.best_m(c);
            SweepPoint {
                c,
                change_points: m,
                objective: dp.objective(m, c),
            }
        })
        .collect()
}

/// Upper bound on the number of sweep steps before giving up.
pub const MAX_SWEEP_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone)]
pub struct AutoSegment {
    pub segmentation: Segmentation,
    pub c: f64,
    pub objective: f64,
    /// Sweep points actually evaluated.
    pub trace: Vec<SweepPoint>,
    /// Set when the sweep reached [`MAX_SWEEP_STEPS`] without merging any
    /// shots; the segmentation is then the one at the cap.
    pub capped: bool,
}

/// Picks `C` per video: `C = k · step` for `k = 1, 2, …`, stopping at the
/// first value whose optimum has fewer stories than shots.
///
/// Penalty weights below the smallest value at which some `m < n − 1` ties
/// with the all-singletons solution are skipped analytically, since none of
/// them can produce a merge; the result equals stepping from `k = 1`.
pub fn auto_segment(embedded: &[Vec<f64>], step: f64) -> Result<AutoSegment> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("sweep step must be positive, got {step}")));
    }
    let dp = DpState::new(&compute_wss_table(embedded)?);
    Ok(auto_segment_dp(&dp, step))
}

pub fn auto_segment_dp(dp: &DpState, step: f64) -> AutoSegment {
    let n = dp.n();
    if n == 1 {
        return AutoSegment {
            segmentation: dp.reconstruct(0),
            c: step,
            objective: dp.objective(0, step),
            trace: Vec::new(),
            capped: false,
        };
    }
    let full = n - 1;
    let g_full = penalty_or_zero(full, n);
    let threshold = (0..full)
        .map(|m| (dp.cost(m) - dp.cost(full)) / (g_full - penalty_or_zero(m, n)))
        .fold(f64::INFINITY, f64::min);
    let mut k = ((threshold / step).floor() as u64).saturating_sub(1).max(1);
    let mut trace = Vec::new();
    loop {
        let c = k as f64 * step;
        let m = dp.best_m(c);
        let point = SweepPoint {
            c,
            change_points: m,
            objective: dp.objective(m, c),
        };
        trace.push(point);
        let capped = k >= MAX_SWEEP_STEPS;
        if m < full || capped {
            return AutoSegment {
                segmentation: dp.reconstruct(m),
                c,
                objective: point.objective,
                trace,
                capped: capped && m == full,
            };
        }
        k += 1;
    }
}
