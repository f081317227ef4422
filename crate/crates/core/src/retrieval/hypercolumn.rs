//! Thumbnail descriptors from convolutional activations: per-group averages
//! of resized maps, weighted by a center prior, summarized by mean and std.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Tensor3;

/// Number of layer groups, one per pooling stage.
pub const N_GROUPS: usize = 5;

/// Dense row-major 2-D map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Map2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Map2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::shape(format!(
                "map of {rows}x{cols} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Map2 { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Map2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.cols + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mu = self.mean();
        let var = self.data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / self.data.len() as f64;
        var.sqrt()
    }

    /// Channel `k` of an activation tensor.
    pub fn from_channel(t: &Tensor3, k: usize) -> Result<Self> {
        t.validate()?;
        let [h, w, c] = t.shape;
        if k >= c {
            return Err(Error::shape(format!("channel {k} out of range for {c} channels")));
        }
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(t.get(y, x, k));
            }
        }
        Map2::new(h, w, data)
    }
}

/// Source sample positions for one output axis: `(lo, hi, frac)` with
/// half-pixel centers, clamped at the borders.
fn axis_samples(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Adds the bilinear resize of `src` to `rows x cols`, times `weight`, into
/// `acc`.
fn resize_accumulate(src: &Map2, acc: &mut Map2, weight: f64) {
    let ys = axis_samples(src.rows, acc.rows);
    let xs = axis_samples(src.cols, acc.cols);
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        let row = &mut acc.data[oy * acc.cols..(oy + 1) * acc.cols];
        for (out, &(x0, x1, fx)) in row.iter_mut().zip(&xs) {
            let top = src.get(y0, x0) * (1.0 - fx) + src.get(y0, x1) * fx;
            let bottom = src.get(y1, x0) * (1.0 - fx) + src.get(y1, x1) * fx;
            *out += weight * (top * (1.0 - fy) + bottom * fy);
        }
    }
}

pub fn bilinear_resize(src: &Map2, rows: usize, cols: usize) -> Result<Map2> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("resize target must be non-empty"));
    }
    let mut out = Map2::zeros(rows, cols);
    resize_accumulate(src, &mut out, 1.0);
    Ok(out)
}

/// Gaussian centered on the map with std `sigma_b · size` on both axes,
/// scaled to peak 1.
pub fn center_prior(size: usize, sigma_b: f64) -> Map2 {
    let c = (size as f64 - 1.0) / 2.0;
    let s = sigma_b * size as f64;
    let mut m = Map2::zeros(size, size);
    for y in 0..size {
        for x in 0..size {
            let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
            m.data[y * size + x] = (-d2 / (2.0 * s * s)).exp();
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypercolumnConfig {
    /// Side of the square output maps.
    pub size: usize,
    pub sigma_b: f64,
    pub center_prior: bool,
}

impl Default for HypercolumnConfig {
    fn default() -> Self {
        HypercolumnConfig {
            size: 224,
            sigma_b: 0.3,
            center_prior: true,
        }
    }
}

/// Activations of one keyframe, grouped by pooling stage. Every channel of
/// every tensor in a group is one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThumbnailActivations {
    pub id: String,
    /// Index of the shot the keyframe belongs to.
    #[serde(default)]
    pub shot: usize,
    pub groups: Vec<Vec<Tensor3>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThumbnailFeatures {
    pub maps: Vec<Map2>,
    /// `(mean, std)` of each map in group order.
    pub tau: Vec<f64>,
}

/// Builds the group maps and their statistics from grouped 2-D maps.
pub fn build_hypercolumns(groups: &[Vec<Map2>], cfg: &HypercolumnConfig) -> Result<ThumbnailFeatures> {
    if groups.len() != N_GROUPS {
        return Err(Error::shape(format!("expected {N_GROUPS} layer groups, got {}", groups.len())));
    }
    if cfg.size == 0 {
        return Err(Error::invalid("hypercolumn size must be positive"));
    }
    if cfg.center_prior && !(cfg.sigma_b > 0.0 && cfg.sigma_b.is_finite()) {
        return Err(Error::invalid(format!("sigma_b must be positive, got {}", cfg.sigma_b)));
    }
    let prior = cfg.center_prior.then(|| center_prior(cfg.size, cfg.sigma_b));
    let mut maps = Vec::with_capacity(N_GROUPS);
    let mut tau = Vec::with_capacity(2 * N_GROUPS);
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::invalid(format!("layer group {} is empty", g + 1)));
        }
        let mut acc = Map2::zeros(cfg.size, cfg.size);
        let w = 1.0 / group.len() as f64;
        for m in group {
            Map2::new(m.rows, m.cols, m.data.clone())?;
            resize_accumulate(m, &mut acc, w);
        }
        if let Some(p) = &prior {
            acc.data.iter_mut().zip(&p.data).for_each(|(a, b)| *a *= b);
        }
        if acc.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("layer group {} produced non-finite values", g + 1)));
        }
        tau.push(acc.mean());
        tau.push(acc.std());
        maps.push(acc);
    }
    Ok(ThumbnailFeatures { maps, tau })
}

/// [`build_hypercolumns`] on tensor activations, one map per channel.
pub fn thumbnail_features(act: &ThumbnailActivations, cfg: &HypercolumnConfig) -> Result<ThumbnailFeatures> {
    let mut groups = Vec::with_capacity(act.groups.len());
    for tensors in &act.groups {
        let mut maps = Vec::new();
        for t in tensors {
            for k in 0..t.shape[2] {
                maps.push(Map2::from_channel(t, k)?);
            }
        }
        groups.push(maps);
    }
    build_hypercolumns(&groups, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut impl Rng, r: usize, c: usize) -> Map2 {
        Map2::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Scalar bilinear interpolation at output pixel `(oy, ox)`.
    fn oracle(src: &Map2, rows: usize, cols: usize, oy: usize, ox: usize) -> f64 {
        let sy = ((oy as f64 + 0.5) * src.rows as f64 / rows as f64 - 0.5).max(0.0).min((src.rows - 1) as f64);
        let sx = ((ox as f64 + 0.5) * src.cols as f64 / cols as f64 - 0.5).max(0.0).min((src.cols - 1) as f64);
        let mut v = 0.0;
        for y in 0..src.rows {
            for x in 0..src.cols {
                let wy = (1.0 - (sy - y as f64).abs()).max(0.0);
                let wx = (1.0 - (sx - x as f64).abs()).max(0.0);
                v += wy * wx * src.get(y, x);
            }
        }
        v
    }

    #[test]
    fn resize_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = random_map(&mut rng, 7, 5);
        let out = bilinear_resize(&src, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert!((out.get(y, x) - oracle(&src, 4, 4, y, x)).abs() < 1e-9);
            }
        }
        let up = bilinear_resize(&src, 11, 13).unwrap();
        for y in 0..11 {
            for x in 0..13 {
                assert!((up.get(y, x) - oracle(&src, 11, 13, y, x)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resize_identity_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_map(&mut rng, 6, 9);
        let same = bilinear_resize(&src, 6, 9).unwrap();
        for (a, b) in same.data.iter().zip(&src.data) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = Map2::new(3, 4, vec![2.5; 12]).unwrap();
        let r = bilinear_resize(&c, 10, 7).unwrap();
        assert!(r.data.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn prior_peaks_at_center() {
        let p = center_prior(5, 0.3);
        assert_eq!(p.get(2, 2), 1.0);
        assert!(p.get(0, 0) < p.get(1, 1));
        assert!((p.get(0, 2) - p.get(2, 4)).abs() < 1e-15);
    }

    fn groups_of(m: Map2) -> Vec<Vec<Map2>> {
        vec![vec![m]; N_GROUPS]
    }

    #[test]
    fn constant_and_zero_maps() {
        let cfg = HypercolumnConfig {
            size: 8,
            sigma_b: 0.3,
            center_prior: false,
        };
        let f = build_hypercolumns(&groups_of(Map2::new(2, 3, vec![1.5; 6]).unwrap()), &cfg).unwrap();
        for g in 0..N_GROUPS {
            assert!((f.tau[2 * g] - 1.5).abs() < 1e-12);
            assert!(f.tau[2 * g + 1].abs() < 1e-12);
        }
        let z = build_hypercolumns(&groups_of(Map2::zeros(4, 4)), &HypercolumnConfig { size: 8, ..Default::default() }).unwrap();
        assert_eq!(z.tau, vec![0.0; 2 * N_GROUPS]);
    }

    #[test]
    fn group_average_then_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = HypercolumnConfig { size: 6, sigma_b: 0.3, center_prior: true };
        let groups: Vec<Vec<Map2>> = (0..N_GROUPS)
            .map(|g| (0..g + 1).map(|_| random_map(&mut rng, 3 + g, 4)).collect())
            .collect();
        let f = build_hypercolumns(&groups, &cfg).unwrap();
        let prior = center_prior(6, 0.3);
        for (g, group) in groups.iter().enumerate() {
            let resized: Vec<Map2> = group.iter().map(|m| bilinear_resize(m, 6, 6).unwrap()).collect();
            let want: Vec<f64> = (0..36)
                .map(|i| resized.iter().map(|r| r.data[i]).sum::<f64>() / group.len() as f64 * prior.data[i])
                .collect();
            for (a, b) in f.maps[g].data.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            let mu = want.iter().sum::<f64>() / 36.0;
            let sd = (want.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 36.0).sqrt();
            assert!((f.tau[2 * g] - mu).abs() < 1e-12);
            assert!((f.tau[2 * g + 1] - sd).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_groups() {
        let cfg = HypercolumnConfig::default();
        let mut g = groups_of(Map2::zeros(2, 2));
        g[3].clear();
        assert!(build_hypercolumns(&g, &cfg).is_err());
        assert!(build_hypercolumns(&g[..4], &cfg).is_err());
    }

    #[test]
    fn tensor_channels_become_maps() {
        let t = Tensor3::new([2, 2, 2], vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap();
        assert_eq!(Map2::from_channel(&t, 1).unwrap().data, vec![10.0, 20.0, 30.0, 40.0]);
        let act = ThumbnailActivations { id: "k".into(), shot: 0, groups: vec![vec![t]; N_GROUPS] };
        let cfg = HypercolumnConfig { size: 2, sigma_b: 0.3, center_prior: false };
        let f = thumbnail_features(&act, &cfg).unwrap();
        assert!((f.tau[0] - 13.75).abs() < 1e-12);
    }
}
