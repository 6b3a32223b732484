//! Patch-wise correlation ratio with linear Parzen binning.
//!
//! For one patch with samples `(x_i, y_i)`, each `x_i` spreads unit mass over
//! its two nearest bin centres with weights `lambda_ij`. With bin masses
//! `N_j = sum_i lambda_ij`, bin means `mu_j = sum_i lambda_ij y_i / N_j` and
//! `S = sum_i (y_i - mu)^2`,
//!
//! `1 - eta(Y|X) = (sum_i y_i^2 - sum_j N_j mu_j^2) / S`.
//!
//! The dissimilarity is the mean of `1 - eta` over the accepted patches of a
//! regular tiling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume;

/// How the bin range over the fixed-image intensities is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntensityRangePolicy {
    /// Global minimum and maximum of the fixed volume.
    VolumeMinMax,
    /// An explicit `[min, max]`; values outside fall into the edge bins.
    Fixed { min: f64, max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RaptorConfig {
    pub num_bins: usize,
    pub patch_size: usize,
    pub patch_stride: usize,
    /// Patches whose `Y` variance is below `min_variance * (Y range)^2` are skipped.
    pub min_variance: f64,
    pub intensity_range_policy: IntensityRangePolicy,
}

impl Default for RaptorConfig {
    fn default() -> Self {
        Self {
            num_bins: 32,
            patch_size: 9,
            patch_stride: 6,
            min_variance: 1e-6,
            intensity_range_policy: IntensityRangePolicy::VolumeMinMax,
        }
    }
}

impl RaptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(Error::invalid("num_bins must be at least 2"));
        }
        if self.patch_size < 2 {
            return Err(Error::invalid("patch_size must be at least 2"));
        }
        if self.patch_stride < 1 {
            return Err(Error::invalid("patch_stride must be at least 1"));
        }
        if !(self.min_variance >= 0.0) || !self.min_variance.is_finite() {
            return Err(Error::invalid("min_variance must be non-negative"));
        }
        if let IntensityRangePolicy::Fixed { min, max } = self.intensity_range_policy {
            if !(max > min) || !min.is_finite() || !max.is_finite() {
                return Err(Error::invalid("fixed intensity range needs min < max"));
            }
        }
        Ok(())
    }
}

/// Bin centres placed uniformly over an intensity range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinLayout {
    pub min: f64,
    pub max: f64,
    pub num_bins: usize,
}

impl BinLayout {
    pub fn new(min: f64, max: f64, num_bins: usize) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::invalid("num_bins must be at least 2"));
        }
        if !(max > min) {
            return Err(Error::invalid("bin range is empty"));
        }
        Ok(Self { min, max, num_bins })
    }

    pub fn center(&self, j: usize) -> f64 {
        self.min + j as f64 * self.spacing()
    }

    /// Distance between neighbouring bin centres.
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.num_bins - 1) as f64
    }

    /// Lower bin and the weights `(lambda_lower, lambda_upper)`.
    #[inline]
    pub fn weights(&self, x: f64) -> (usize, [f64; 2]) {
        let last = (self.num_bins - 1) as f64;
        let t = ((x - self.min) / (self.max - self.min) * last).clamp(0.0, last);
        let j = (t.floor() as usize).min(self.num_bins - 2);
        let f = t - j as f64;
        (j, [1.0 - f, f])
    }
}

/// Histogram statistics of one accepted patch.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchHistogramState {
    /// Lower bin of each sample; the sample's weights are `weights[i]`.
    pub lower_bin: Vec<usize>,
    pub weights: Vec<[f64; 2]>,
    /// `N_j`.
    pub bin_mass: Vec<f64>,
    /// `mu_j`, zero for empty bins.
    pub bin_mean: Vec<f64>,
    /// Population variance of `Y`.
    pub variance: f64,
    pub mean: f64,
    /// `sum_i y_i^2 - sum_j N_j mu_j^2`.
    pub residual: f64,
}

impl PatchHistogramState {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Thresholds that depend on whole volumes rather than on one patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchContext {
    pub bins: BinLayout,
    /// Absolute variance threshold for `Y`.
    pub min_variance: f64,
}

impl PatchContext {
    pub fn new(x: &Volume, y: &Volume, cfg: &RaptorConfig) -> Result<Self> {
        cfg.validate()?;
        let (min, max) = match cfg.intensity_range_policy {
            IntensityRangePolicy::VolumeMinMax => x.min_max(),
            IntensityRangePolicy::Fixed { min, max } => (min, max),
        };
        if !(max > min) {
            return Err(Error::MetricUndefined);
        }
        let (ylo, yhi) = y.min_max();
        let yr = yhi - ylo;
        Ok(Self { bins: BinLayout::new(min, max, cfg.num_bins)?, min_variance: cfg.min_variance * yr * yr })
    }
}

/// `1 - eta(Y|X)` of one patch, or `None` when the patch is rejected.
///
/// A patch is rejected when its `X` values span less than one bin spacing
/// (the histogram then cannot resolve any dependence) or when the variance of
/// `Y` is below the context threshold.
pub fn patch_cr(x: &[f64], y: &[f64], ctx: &PatchContext) -> Option<(f64, PatchHistogramState)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let (xlo, xhi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(xhi - xlo >= ctx.bins.spacing()) || !(xhi > xlo) {
        return None;
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let variance = ss / nf;
    if !(variance > 0.0) || variance < ctx.min_variance {
        return None;
    }

    let nb = ctx.bins.num_bins;
    let mut bin_mass = vec![0.0; nb];
    let mut bin_sum = vec![0.0; nb];
    let mut lower_bin = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (&xi, &yi) in x.iter().zip(y) {
        let (j, w) = ctx.bins.weights(xi);
        bin_mass[j] += w[0];
        bin_mass[j + 1] += w[1];
        bin_sum[j] += w[0] * yi;
        bin_sum[j + 1] += w[1] * yi;
        lower_bin.push(j);
        weights.push(w);
    }
    let bin_mean: Vec<f64> = bin_sum.iter().zip(&bin_mass).map(|(s, m)| if *m > 0.0 { s / m } else { 0.0 }).collect();
    // sum_i (y_i - mu)^2 - sum_j N_j (mu_j - mu)^2, the same residual in centred form
    let explained: f64 = bin_mass.iter().zip(&bin_mean).map(|(m, b)| m * (b - mean) * (b - mean)).sum();
    let residual = (ss - explained).max(0.0);
    let value = residual / ss;
    Some((value, PatchHistogramState { lower_bin, weights, bin_mass, bin_mean, variance, mean, residual }))
}

/// `d(1 - eta) / d y_i` for every sample of an accepted patch.
pub fn patch_cr_gradient(y: &[f64], state: &PatchHistogramState) -> Vec<f64> {
    let s = state.variance * y.len() as f64;
    let ratio = state.residual / s;
    y.iter()
        .enumerate()
        .map(|(i, &yi)| {
            let j = state.lower_bin[i];
            let w = state.weights[i];
            let fitted = w[0] * state.bin_mean[j] + w[1] * state.bin_mean[j + 1];
            2.0 / s * (yi - fitted - (yi - state.mean) * ratio)
        })
        .collect()
}

/// Patch start offsets along one axis; a patch never exceeds the axis length.
pub fn patch_starts(n: usize, patch: usize, stride: usize) -> (Vec<usize>, usize) {
    let p = patch.min(n);
    ((0..=n - p).step_by(stride).collect(), p)
}

struct Tiling {
    starts: [Vec<usize>; 3],
    size: [usize; 3],
}

impl Tiling {
    fn new(dims: [usize; 3], cfg: &RaptorConfig) -> Self {
        let t = dims.map(|n| patch_starts(n, cfg.patch_size, cfg.patch_stride));
        Self { starts: [t[0].0.clone(), t[1].0.clone(), t[2].0.clone()], size: [t[0].1, t[1].1, t[2].1] }
    }

    fn origins(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for &z in &self.starts[2] {
            for &y in &self.starts[1] {
                for &x in &self.starts[0] {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }

    fn indices(&self, origin: [usize; 3], dims: [usize; 3]) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.size.iter().product());
        for k in 0..self.size[2] {
            for j in 0..self.size[1] {
                let row = dims[0] * (origin[1] + j + dims[1] * (origin[2] + k));
                for i in 0..self.size[0] {
                    idx.push(row + origin[0] + i);
                }
            }
        }
        idx
    }
}

struct PatchEval {
    indices: Vec<usize>,
    value: f64,
    gradient: Option<Vec<f64>>,
}

fn evaluate_patches(x: &Volume, y: &Volume, cfg: &RaptorConfig, with_gradient: bool) -> Result<Vec<PatchEval>> {
    x.grid.ensure_same_dims(&y.grid)?;
    let ctx = PatchContext::new(x, y, cfg)?;
    let dims = x.dims();
    let tiling = Tiling::new(dims, cfg);
    let evals: Vec<PatchEval> = tiling
        .origins()
        .into_par_iter()
        .filter_map(|origin| {
            let indices = tiling.indices(origin, dims);
            let xs: Vec<f64> = indices.iter().map(|&i| x.data[i]).collect();
            let ys: Vec<f64> = indices.iter().map(|&i| y.data[i]).collect();
            let (value, state) = patch_cr(&xs, &ys, &ctx)?;
            let gradient = with_gradient.then(|| patch_cr_gradient(&ys, &state));
            Some(PatchEval { indices, value, gradient })
        })
        .collect();
    if evals.is_empty() {
        return Err(Error::MetricUndefined);
    }
    Ok(evals)
}

/// Mean `1 - eta` over accepted patches.
pub fn raptor_total(x: &Volume, y: &Volume, cfg: &RaptorConfig) -> Result<f64> {
    let evals = evaluate_patches(x, y, cfg, false)?;
    Ok(evals.iter().map(|e| e.value).sum::<f64>() / evals.len() as f64)
}

/// Value and per-voxel derivative with respect to `y_warped`.
pub fn raptor_value_and_gradient(x: &Volume, y_warped: &Volume, cfg: &RaptorConfig) -> Result<(f64, Volume)> {
    let evals = evaluate_patches(x, y_warped, cfg, true)?;
    let np = evals.len() as f64;
    let mut grad = vec![0.0; x.grid.len()];
    let mut total = 0.0;
    // fixed accumulation order keeps the result independent of the thread count
    for e in &evals {
        total += e.value;
        for (&i, g) in e.indices.iter().zip(e.gradient.as_ref().expect("requested")) {
            grad[i] += g / np;
        }
    }
    Ok((total / np, Volume { grid: x.grid, data: grad }))
}

/// Per-voxel derivative of [`raptor_total`] with respect to `y_warped`.
pub fn raptor_gradient(x: &Volume, y_warped: &Volume, cfg: &RaptorConfig) -> Result<Volume> {
    Ok(raptor_value_and_gradient(x, y_warped, cfg)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(min: f64, max: f64, bins: usize) -> PatchContext {
        PatchContext { bins: BinLayout::new(min, max, bins).unwrap(), min_variance: 0.0 }
    }

    /// Direct evaluation with hard-coded weights, independent of the state struct.
    fn brute_force_cr(x: &[f64], y: &[f64], bins: &BinLayout) -> f64 {
        let n = x.len() as f64;
        let nb = bins.num_bins;
        let lambda = |i: usize, j: usize| -> f64 {
            let c = bins.center(j);
            let h = (bins.max - bins.min) / (nb - 1) as f64;
            let xi = x[i].clamp(bins.min, bins.max);
            (1.0 - (xi - c).abs() / h).max(0.0)
        };
        let mut explained = 0.0;
        for j in 0..nb {
            let nj: f64 = (0..x.len()).map(|i| lambda(i, j)).sum();
            if nj > 0.0 {
                let mj = (0..x.len()).map(|i| lambda(i, j) * y[i]).sum::<f64>() / nj;
                explained += nj * mj * mj;
            }
        }
        let sy2: f64 = y.iter().map(|v| v * v).sum();
        let mean = y.iter().sum::<f64>() / n;
        (sy2 - explained) / (sy2 - n * mean * mean)
    }

    /// The derivative with the `(N - 1) sigma^2` factor in the residual term,
    /// `sigma^2` being the population variance used by the value.
    fn printed_gradient(y: &[f64], s: &PatchHistogramState) -> Vec<f64> {
        let n = y.len() as f64;
        let sy2: f64 = y.iter().map(|v| v * v).sum();
        let snm: f64 = s.bin_mass.iter().zip(&s.bin_mean).map(|(a, b)| a * b * b).sum();
        y.iter()
            .enumerate()
            .map(|(i, &yi)| {
                let j = s.lower_bin[i];
                let w = s.weights[i];
                2.0 / (n * s.variance)
                    * (yi
                        - w[0] * s.bin_mean[j]
                        - w[1] * s.bin_mean[j + 1]
                        - (yi - s.mean) * (sy2 - snm) / ((n - 1.0) * s.variance))
            })
            .collect()
    }

    fn fd_gradient(x: &[f64], y: &[f64], c: &PatchContext) -> Vec<f64> {
        let h = 1e-6;
        (0..y.len())
            .map(|i| {
                let mut p = y.to_vec();
                p[i] += h;
                let mut m = y.to_vec();
                m[i] -= h;
                (patch_cr(x, &p, c).unwrap().0 - patch_cr(x, &m, c).unwrap().0) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    fn random_patch(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin() + rng.random_range(-0.5..0.5)).collect();
        (x, y)
    }

    #[test]
    fn deterministic_relation_gives_zero() {
        let (v, s) = patch_cr(&[0.0, 0.0, 1.0, 1.0], &[2.0, 2.0, 4.0, 4.0], &ctx(0.0, 1.0, 2)).unwrap();
        assert!(v.abs() < 1e-12);
        assert_eq!(s.bin_mass, vec![2.0, 2.0]);
        assert_eq!(s.bin_mean, vec![2.0, 4.0]);
        let g = patch_cr_gradient(&[2.0, 2.0, 4.0, 4.0], &s);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn independence_gives_one() {
        let (v, s) = patch_cr(&[0.0, 1.0, 0.0, 1.0], &[2.0, 2.0, 4.0, 4.0], &ctx(0.0, 1.0, 2)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(s.bin_mean, vec![3.0, 3.0]);
    }

    #[test]
    fn degenerate_patches_are_rejected() {
        let c = ctx(0.0, 1.0, 4);
        assert!(patch_cr(&[0.0, 0.5, 1.0], &[3.0, 3.0, 3.0], &c).is_none());
        assert!(patch_cr(&[0.5, 0.5, 0.5], &[1.0, 2.0, 3.0], &c).is_none());
        // X spans less than one bin spacing (1/3)
        assert!(patch_cr(&[0.4, 0.5, 0.6], &[1.0, 2.0, 3.0], &c).is_none());
        assert!(patch_cr(&[0.2, 0.4, 0.6], &[1.0, 2.0, 3.0], &c).is_some());
        assert!(patch_cr(&[0.5], &[1.0], &c).is_none());
        let strict = PatchContext { min_variance: 10.0, ..c };
        assert!(patch_cr(&[0.0, 0.5, 1.0], &[1.0, 2.0, 3.0], &strict).is_none());
    }

    #[test]
    fn state_invariants_and_brute_force_value() {
        let (x, y) = random_patch(1, 216);
        let c = ctx(0.0, 1.0, 8);
        let (v, s) = patch_cr(&x, &y, &c).unwrap();
        for w in &s.weights {
            assert!((w[0] + w[1] - 1.0).abs() < 1e-12);
        }
        assert!((s.bin_mass.iter().sum::<f64>() - 216.0).abs() < 1e-9);
        for j in 0..8 {
            let sum: f64 = (0..216)
                .map(|i| {
                    let lb = s.lower_bin[i];
                    let w = if lb == j {
                        s.weights[i][0]
                    } else if lb + 1 == j {
                        s.weights[i][1]
                    } else {
                        0.0
                    };
                    w * y[i]
                })
                .sum();
            assert!((s.bin_mass[j] * s.bin_mean[j] - sum).abs() < 1e-9);
        }
        assert!((v - brute_force_cr(&x, &y, &c.bins)).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (x, y) = random_patch(10 + seed, 216);
            let c = ctx(0.0, 1.0, 8);
            let (_, s) = patch_cr(&x, &y, &c).unwrap();
            let err = rel_err(&patch_cr_gradient(&y, &s), &fd_gradient(&x, &y, &c));
            assert!(err < 1e-6, "relative error {err}");
        }
    }

    #[test]
    fn printed_residual_factor_fails_finite_differences() {
        let (x, y) = random_patch(20, 216);
        let c = ctx(0.0, 1.0, 8);
        let (_, s) = patch_cr(&x, &y, &c).unwrap();
        let err = rel_err(&printed_gradient(&y, &s), &fd_gradient(&x, &y, &c));
        assert!(err > 1e-4, "printed form unexpectedly agrees: {err}");
    }

    fn vol(n: usize, f: impl Fn([usize; 3]) -> f64 + Sync) -> Volume {
        Volume::from_fn(Grid::unit([n; 3]).unwrap(), f)
    }

    fn structured(i: [usize; 3]) -> f64 {
        let [a, b, c] = i.map(|v| v as f64);
        100.0 + 60.0 * (0.4 * a).sin() * (0.3 * b).cos() + 40.0 * (0.25 * c + 0.1 * a).sin()
    }

    #[test]
    fn monotone_remap_scores_near_zero() {
        let x = vol(20, structured);
        let y = vol(20, |i| 255.0 - structured(i));
        let cfg = RaptorConfig::default();
        assert!(raptor_total(&x, &y, &cfg).unwrap() < 0.05);
        assert!(raptor_total(&x, &x, &cfg).unwrap() <= 0.05);
    }

    #[test]
    fn identical_phantoms_score_below_parzen_tolerance() {
        use crate::io::{make_phantom, PhantomKind, PhantomParams};
        for n in [40, 64] {
            let (x, _) = make_phantom(PhantomKind::Sphere, [n; 3], &PhantomParams::default()).unwrap();
            let v = raptor_total(&x, &x, &RaptorConfig::default()).unwrap();
            assert!(v <= 0.05, "{n}: {v}");
        }
    }

    #[test]
    fn noise_scores_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..32 * 32 * 32).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = vol(32, structured);
        let y = Volume::new(x.grid, noise).unwrap();
        let psi = raptor_total(&x, &y, &RaptorConfig::default()).unwrap();
        assert!(psi >= 0.8, "psi = {psi}");
    }

    #[test]
    fn affine_invariance_in_y() {
        let x = vol(16, structured);
        let y = vol(16, |i| ((i[0] * 7 + i[1] * 3 + i[2]) % 11) as f64 + 0.1 * structured(i));
        let cfg = RaptorConfig::default();
        let base = raptor_total(&x, &y, &cfg).unwrap();
        for (a, b) in [(2.5, -3.0), (-0.5, 10.0), (1e3, 0.0)] {
            let t = vol(16, |i| a * y.at(i) + b);
            assert!((raptor_total(&x, &t, &cfg).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn total_is_mean_of_patches() {
        let x = vol(15, structured);
        let y = vol(15, |i| (structured(i) * 0.05).cos());
        let cfg = RaptorConfig { patch_size: 5, patch_stride: 4, ..Default::default() };
        let c = PatchContext::new(&x, &y, &cfg).unwrap();
        let (starts, p) = patch_starts(15, 5, 4);
        assert_eq!(starts, vec![0, 4, 8]);
        let mut values = Vec::new();
        for &k in &starts {
            for &j in &starts {
                for &i in &starts {
                    let mut xs = Vec::new();
                    let mut ys = Vec::new();
                    for dz in 0..p {
                        for dy in 0..p {
                            for dx in 0..p {
                                xs.push(x.at([i + dx, j + dy, k + dz]));
                                ys.push(y.at([i + dx, j + dy, k + dz]));
                            }
                        }
                    }
                    if let Some((v, _)) = patch_cr(&xs, &ys, &c) {
                        values.push(v);
                    }
                }
            }
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((raptor_total(&x, &y, &cfg).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn volume_gradient_matches_finite_differences() {
        let x = vol(10, structured);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = vol(10, |i| (structured(i) * 0.03).sin());
        let y = Volume::new(y.grid, y.data.iter().map(|v| v + 0.1 * rng.random_range(-1.0..1.0)).collect()).unwrap();
        let cfg = RaptorConfig { num_bins: 8, patch_size: 5, patch_stride: 3, ..Default::default() };
        let (_, grad) = raptor_value_and_gradient(&x, &y, &cfg).unwrap();
        let h = 1e-6;
        let mut an = Vec::new();
        let mut fd = Vec::new();
        for idx in (0..1000).step_by(37) {
            let mut p = y.clone();
            p.data[idx] += h;
            let mut m = y.clone();
            m.data[idx] -= h;
            fd.push((raptor_total(&x, &p, &cfg).unwrap() - raptor_total(&x, &m, &cfg).unwrap()) / (2.0 * h));
            an.push(grad.data[idx]);
        }
        assert!(rel_err(&an, &fd) < 1e-6);
    }

    #[test]
    fn fully_rejected_tiling_is_undefined() {
        let x = vol(8, structured);
        let y = vol(8, |_| 4.0);
        assert!(matches!(raptor_total(&x, &y, &RaptorConfig::default()), Err(Error::MetricUndefined)));
        let flat = vol(8, |_| 1.0);
        assert!(matches!(raptor_gradient(&flat, &x, &RaptorConfig::default()), Err(Error::MetricUndefined)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn value_is_in_unit_interval(seed in 0u64..100_000, n in 8usize..80, bins in 2usize..20) {
            let (x, y) = random_patch(seed, n);
            let c = ctx(0.0, 1.0, bins);
            if let Some((v, _)) = patch_cr(&x, &y, &c) {
                prop_assert!((0.0..=1.0 + 1e-9).contains(&v));
            }
        }
    }
}
