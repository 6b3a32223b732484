//! Bandlimited velocity fields and their frequency-domain operators.
//!
//! A [`BandlimitedVelocity`] keeps, per vector component, the low-frequency
//! Fourier coefficients `|k_d| <= h_d` of a real field living on a dense grid of
//! `full_dims` voxels. Coefficients use the unscaled forward DFT; the inverse
//! carries the `1/N` factor, so a constant field `c` has DC coefficient `c * N`.
//!
//! Band storage is centred: axis index `j = k + h`, x-fastest like the dense
//! grids. With that layout the coefficient at `-k` sits at `len - 1 - idx`.
//!
//! Pointwise products of band fields are evaluated on a zero-padded grid of at
//! least `3h + 1` samples per axis, which makes the re-truncated product exact
//! (no aliasing into the band). All derivative symbols refer to the dense grid,
//! `i sin(2 pi k / N)`, i.e. the periodic central difference.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::volume::{Grid, VectorField};

pub type C64 = Complex64;

/// Per-component coefficients of a bandlimited rank-2 tensor field, `[row][col]`.
pub type BandTensor = [[Vec<C64>; 3]; 3];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const SYMMETRY_TOL: f64 = 1e-10;

/// The retained frequency box of a bandlimited field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Band {
    full_dims: [usize; 3],
    trunc_dims: [usize; 3],
    half: [usize; 3],
}

impl Band {
    /// Retains `|k_d| <= trunc_dims[d] / 2`, further limited to `(full_dims[d] - 1) / 2`
    /// so a Nyquist frequency is never kept.
    pub fn new(full_dims: [usize; 3], trunc_dims: [usize; 3]) -> Result<Self> {
        if full_dims.iter().chain(&trunc_dims).any(|&n| n == 0) {
            return Err(Error::invalid("band dimensions must be positive"));
        }
        if (0..3).any(|d| trunc_dims[d] > full_dims[d]) {
            return Err(Error::invalid(format!("trunc_dims {trunc_dims:?} exceed full_dims {full_dims:?}")));
        }
        let half = [0, 1, 2].map(|d| (trunc_dims[d] / 2).min((full_dims[d] - 1) / 2));
        Ok(Self { full_dims, trunc_dims, half })
    }

    pub fn full_dims(&self) -> [usize; 3] {
        self.full_dims
    }

    pub fn trunc_dims(&self) -> [usize; 3] {
        self.trunc_dims
    }

    /// Largest retained `|k_d|` per axis.
    pub fn half(&self) -> [usize; 3] {
        self.half
    }

    /// Stored coefficients per axis, `2h + 1`.
    pub fn shape(&self) -> [usize; 3] {
        self.half.map(|h| 2 * h + 1)
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of voxels of the dense grid.
    pub fn voxel_count(&self) -> usize {
        self.full_dims.iter().product()
    }

    pub fn index(&self, k: [i64; 3]) -> Option<usize> {
        let s = self.shape();
        let mut j = [0usize; 3];
        for d in 0..3 {
            let h = self.half[d] as i64;
            if k[d].abs() > h {
                return None;
            }
            j[d] = (k[d] + h) as usize;
        }
        Some(j[0] + s[0] * (j[1] + s[1] * j[2]))
    }

    pub fn freq(&self, idx: usize) -> [i64; 3] {
        let s = self.shape();
        let j = [idx % s[0], (idx / s[0]) % s[1], idx / (s[0] * s[1])];
        [0, 1, 2].map(|d| j[d] as i64 - self.half[d] as i64)
    }

    /// Index of `-k` for the coefficient stored at `idx`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn dc_index(&self) -> usize {
        self.len() / 2
    }
}

/// Truncated Fourier representation of a real 3-vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct BandlimitedVelocity {
    pub band: Band,
    pub coeffs: [Vec<C64>; 3],
}

impl BandlimitedVelocity {
    pub fn zeros(band: Band) -> Self {
        let n = band.len();
        Self { band, coeffs: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]] }
    }

    pub fn from_coeffs(band: Band, coeffs: [Vec<C64>; 3]) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() != band.len()) {
            return Err(Error::invalid("coefficient table does not match band shape"));
        }
        Ok(Self { band, coeffs })
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|z| *z == ZERO))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Largest `|c(k) - conj(c(-k))|` relative to the largest coefficient magnitude.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for comp in &self.coeffs {
            for (idx, z) in comp.iter().enumerate() {
                let m = comp[self.band.mirror(idx)].conj();
                worst = worst.max((z - m).norm());
                scale = scale.max(z.norm());
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.symmetry_residual() <= tol
    }

    /// Projects onto conjugate-symmetric tables, `c <- (c(k) + conj(c(-k))) / 2`.
    pub fn enforce_symmetry(&mut self) {
        for comp in &mut self.coeffs {
            symmetrize(comp);
        }
    }

    /// Grid inner product `sum_x iota(a)(x) . iota(b)(x) = (1/N) Re sum_k conj(a_k) b_k`.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for c in 0..3 {
            acc += self.coeffs[c].iter().zip(&other.coeffs[c]).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>();
        }
        acc / self.band.voxel_count() as f64
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().flatten().for_each(|z| *z *= s);
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        for c in 0..3 {
            for (a, b) in self.coeffs[c].iter_mut().zip(&other.coeffs[c]) {
                *a += b * s;
            }
        }
    }

    /// Copies the coefficients onto another band (zero outside the overlap) and
    /// multiplies them by `gain`.
    pub fn transfer(&self, band: Band, gain: f64) -> Self {
        let mut out = Self::zeros(band);
        for idx in 0..self.band.len() {
            if let Some(j) = band.index(self.band.freq(idx)) {
                for c in 0..3 {
                    out.coeffs[c][j] = self.coeffs[c][idx] * gain;
                }
            }
        }
        out
    }
}

pub(crate) fn symmetrize(comp: &mut [C64]) {
    let n = comp.len();
    for idx in 0..=n / 2 {
        let m = n - 1 - idx;
        let avg = 0.5 * (comp[idx] + comp[m].conj());
        comp[idx] = avg;
        comp[m] = avg.conj();
    }
}

/// Plans for a 3D transform on a fixed grid, used band-pruned.
struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

#[inline]
fn wrap(k: i64, n: usize) -> usize {
    if k < 0 {
        (n as i64 + k) as usize
    } else {
        k as usize
    }
}

impl Fft3 {
    fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|n| planner.plan_fft_forward(n));
        let inv = dims.map(|n| planner.plan_fft_inverse(n));
        Self { dims, fwd, inv }
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Unnormalised inverse transform of a centred band table onto the full grid.
    fn band_to_grid(&self, half: [usize; 3], band: &[C64]) -> Vec<C64> {
        let [g0, g1, g2] = self.dims;
        let [m0, m1, m2] = half.map(|h| 2 * h + 1);
        let pos = |d: usize, j: usize| wrap(j as i64 - half[d] as i64, self.dims[d]);

        // axis 0: A[i0 + g0 * (j1 + m1 * j2)]
        let mut a = vec![ZERO; g0 * m1 * m2];
        let plan = &self.inv[0];
        a.par_chunks_mut(g0).enumerate().for_each_init(
            || vec![ZERO; plan.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                let base = m0 * line;
                for j0 in 0..m0 {
                    out[pos(0, j0)] = band[base + j0];
                }
                plan.process_with_scratch(out, scratch);
            },
        );

        // axis 1: B[i1 + g1 * (i0 + g0 * j2)]
        let mut b = vec![ZERO; g1 * g0 * m2];
        let plan = &self.inv[1];
        b.par_chunks_mut(g1).enumerate().for_each_init(
            || vec![ZERO; plan.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                let i0 = line % g0;
                let j2 = line / g0;
                for j1 in 0..m1 {
                    out[pos(1, j1)] = a[i0 + g0 * (j1 + m1 * j2)];
                }
                plan.process_with_scratch(out, scratch);
            },
        );
        drop(a);

        // axis 2: C[i2 + g2 * (i0 + g0 * i1)]
        let mut c = vec![ZERO; self.len()];
        let plan = &self.inv[2];
        c.par_chunks_mut(g2).enumerate().for_each_init(
            || vec![ZERO; plan.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                let i0 = line % g0;
                let i1 = line / g0;
                for j2 in 0..m2 {
                    out[pos(2, j2)] = b[i1 + g1 * (i0 + g0 * j2)];
                }
                plan.process_with_scratch(out, scratch);
            },
        );
        drop(b);

        let mut out = vec![ZERO; self.len()];
        out.par_chunks_mut(g0 * g1).enumerate().for_each(|(i2, slab)| {
            for i1 in 0..g1 {
                for i0 in 0..g0 {
                    slab[i0 + g0 * i1] = c[i2 + g2 * (i0 + g0 * i1)];
                }
            }
        });
        out
    }

    /// Unscaled forward transform of a full grid, keeping only the centred band.
    fn grid_to_band(&self, half: [usize; 3], grid: &[C64]) -> Vec<C64> {
        let [g0, g1, g2] = self.dims;
        let [m0, m1, m2] = half.map(|h| 2 * h + 1);
        let pos = |d: usize, j: usize| wrap(j as i64 - half[d] as i64, self.dims[d]);

        // axis 2: C[i2 + g2 * (i0 + g0 * i1)]
        let mut c = vec![ZERO; self.len()];
        let plan = &self.fwd[2];
        c.par_chunks_mut(g2).enumerate().for_each_init(
            || vec![ZERO; plan.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                for (i2, o) in out.iter_mut().enumerate() {
                    *o = grid[line + g0 * g1 * i2];
                }
                plan.process_with_scratch(out, scratch);
            },
        );

        // axis 1: D[i1 + g1 * (i0 + g0 * j2)]
        let mut dbuf = vec![ZERO; g1 * g0 * m2];
        let plan = &self.fwd[1];
        dbuf.par_chunks_mut(g1).enumerate().for_each_init(
            || vec![ZERO; plan.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                let i0 = line % g0;
                let p2 = pos(2, line / g0);
                for (i1, o) in out.iter_mut().enumerate() {
                    *o = c[p2 + g2 * (i0 + g0 * i1)];
                }
                plan.process_with_scratch(out, scratch);
            },
        );
        drop(c);

        // axis 0, written straight into the band table
        let mut band = vec![ZERO; m0 * m1 * m2];
        let plan = &self.fwd[0];
        band.par_chunks_mut(m0).enumerate().for_each_init(
            || (vec![ZERO; g0], vec![ZERO; plan.get_inplace_scratch_len()]),
            |(line_buf, scratch), (line, out)| {
                let p1 = pos(1, line % m1);
                let j2 = line / m1;
                for (i0, l) in line_buf.iter_mut().enumerate() {
                    *l = dbuf[p1 + g1 * (i0 + g0 * j2)];
                }
                plan.process_with_scratch(line_buf, scratch);
                for (j0, o) in out.iter_mut().enumerate() {
                    *o = line_buf[pos(0, j0)];
                }
            },
        );
        band
    }

    /// Inverse-transforms two Hermitian band tables at once, returning their real
    /// fields multiplied by `scale`.
    fn band_pair_to_real(
        &self,
        half: [usize; 3],
        a: &[C64],
        b: Option<&[C64]>,
        scale: f64,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let packed: Vec<C64> = match b {
            Some(b) => a.iter().zip(b).map(|(x, y)| x + C64::i() * y).collect(),
            None => a.to_vec(),
        };
        let z = self.band_to_grid(half, &packed);
        let re = z.iter().map(|v| v.re * scale).collect();
        let im = b.map(|_| z.iter().map(|v| v.im * scale).collect());
        (re, im)
    }

    /// Forward-transforms two real grids at once, returning their band tables
    /// multiplied by `scale`.
    fn real_pair_to_band(
        &self,
        half: [usize; 3],
        f: &[f64],
        g: Option<&[f64]>,
        scale: f64,
    ) -> (Vec<C64>, Option<Vec<C64>>) {
        let packed: Vec<C64> = match g {
            Some(g) => f.iter().zip(g).map(|(&x, &y)| C64::new(x, y)).collect(),
            None => f.iter().map(|&x| C64::new(x, 0.0)).collect(),
        };
        let z = self.grid_to_band(half, &packed);
        let n = z.len();
        match g {
            None => {
                let mut out: Vec<C64> = z.into_iter().map(|v| v * scale).collect();
                symmetrize(&mut out);
                (out, None)
            }
            Some(_) => {
                let mut fa = vec![ZERO; n];
                let mut ga = vec![ZERO; n];
                for idx in 0..n {
                    let zm = z[n - 1 - idx].conj();
                    fa[idx] = 0.5 * (z[idx] + zm) * scale;
                    // (z - conj(z(-k))) / 2i
                    let d = 0.5 * (z[idx] - zm);
                    ga[idx] = C64::new(d.im, -d.re) * scale;
                }
                (fa, Some(ga))
            }
        }
    }
}

fn smooth_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// The operator `L = (-alpha Lap + I)^c` and its inverse `K` on a band, together
/// with the transform plans every bandlimited computation on this band needs.
pub struct FourierOperator {
    band: Band,
    alpha: f64,
    power: u32,
    l: Vec<f64>,
    k: Vec<f64>,
    /// `sin(2 pi k / N)` per axis, indexed by centred band position.
    sin: [Vec<f64>; 3],
    full: Fft3,
    padded: Fft3,
}

impl std::fmt::Debug for FourierOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierOperator")
            .field("band", &self.band)
            .field("alpha", &self.alpha)
            .field("power", &self.power)
            .field("padded_dims", &self.padded.dims)
            .finish()
    }
}

/// Builds `L~` and `K~` for the given band.
pub fn build_operator(alpha: f64, c: u32, trunc_dims: [usize; 3], full_dims: [usize; 3]) -> Result<FourierOperator> {
    FourierOperator::new(alpha, c, Band::new(full_dims, trunc_dims)?)
}

impl FourierOperator {
    pub fn new(alpha: f64, power: u32, band: Band) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if power == 0 {
            return Err(Error::invalid("operator power c must be at least 1"));
        }
        let full_dims = band.full_dims();
        let l: Vec<f64> = (0..band.len()).map(|idx| l_symbol(alpha, power, full_dims, band.freq(idx))).collect();
        let k = l.iter().map(|v| 1.0 / v).collect();
        let half = band.half();
        let sin = [0, 1, 2].map(|d| {
            (0..2 * half[d] + 1).map(|j| (2.0 * PI * (j as f64 - half[d] as f64) / full_dims[d] as f64).sin()).collect()
        });
        let padded_dims = half.map(|h| smooth_size(3 * h + 1));
        Ok(Self { band, alpha, power, l, k, sin, full: Fft3::new(full_dims), padded: Fft3::new(padded_dims) })
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn padded_dims(&self) -> [usize; 3] {
        self.padded.dims
    }

    /// `L~` multiplier table in band order.
    pub fn l_table(&self) -> &[f64] {
        &self.l
    }

    /// `K~` multiplier table in band order.
    pub fn k_table(&self) -> &[f64] {
        &self.k
    }

    /// `L~` evaluated at an arbitrary frequency of the dense grid.
    pub fn l_multiplier(&self, k: [i64; 3]) -> f64 {
        l_symbol(self.alpha, self.power, self.band.full_dims(), k)
    }

    pub fn k_multiplier(&self, k: [i64; 3]) -> f64 {
        1.0 / self.l_multiplier(k)
    }

    fn check_band(&self, band: Band) -> Result<()> {
        if band != self.band {
            return Err(Error::invalid(format!("band mismatch: operator has {:?}, field has {:?}", self.band, band)));
        }
        Ok(())
    }

    fn apply_table(table: &[f64], v: &BandlimitedVelocity) -> BandlimitedVelocity {
        let mut out = v.clone();
        for comp in &mut out.coeffs {
            comp.iter_mut().zip(table).for_each(|(z, m)| *z *= *m);
        }
        out
    }

    pub fn apply_l(&self, v: &BandlimitedVelocity) -> BandlimitedVelocity {
        Self::apply_table(&self.l, v)
    }

    pub fn apply_k(&self, v: &BandlimitedVelocity) -> BandlimitedVelocity {
        Self::apply_table(&self.k, v)
    }

    /// Forward DFT of a dense scalar grid restricted to the band (`nu` per component).
    pub fn project_scalar(&self, data: &[f64]) -> Result<Vec<C64>> {
        if data.len() != self.band.voxel_count() {
            return Err(Error::invalid("scalar grid does not match the operator's full dims"));
        }
        Ok(self.full.real_pair_to_band(self.band.half(), data, None, 1.0).0)
    }

    /// `nu`: projection of a dense vector field onto the band.
    pub fn project(&self, field: &VectorField) -> Result<BandlimitedVelocity> {
        let dims = self.band.full_dims();
        if field.dims() != dims {
            return Err(Error::DimensionMismatch { expected: dims, found: field.dims() });
        }
        Ok(self.project_components(&field.components))
    }

    pub(crate) fn project_components(&self, comps: &[Vec<f64>; 3]) -> BandlimitedVelocity {
        let half = self.band.half();
        let (c0, c1) = self.full.real_pair_to_band(half, &comps[0], Some(&comps[1]), 1.0);
        let (c2, _) = self.full.real_pair_to_band(half, &comps[2], None, 1.0);
        BandlimitedVelocity { band: self.band, coeffs: [c0, c1.unwrap(), c2] }
    }

    /// `iota`: zero-padded inverse transform onto the dense grid.
    pub fn lift(&self, b: &BandlimitedVelocity) -> Result<VectorField> {
        self.check_band(b.band)?;
        let residual = b.symmetry_residual();
        if residual > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { residual });
        }
        Ok(self.lift_unchecked(b))
    }

    pub(crate) fn lift_unchecked(&self, b: &BandlimitedVelocity) -> VectorField {
        let grid = Grid::unit(self.band.full_dims()).expect("band dims are positive");
        VectorField { grid, components: self.lift_components(&b.coeffs) }
    }

    pub(crate) fn lift_components(&self, coeffs: &[Vec<C64>; 3]) -> [Vec<f64>; 3] {
        let half = self.band.half();
        let scale = 1.0 / self.band.voxel_count() as f64;
        let (f0, f1) = self.full.band_pair_to_real(half, &coeffs[0], Some(&coeffs[1]), scale);
        let (f2, _) = self.full.band_pair_to_real(half, &coeffs[2], None, scale);
        [f0, f1.unwrap(), f2]
    }

    /// Multiplies one scalar table by the derivative symbol of `axis`.
    pub(crate) fn derivative(&self, table: &[C64], axis: usize) -> Vec<C64> {
        let s = self.band.shape();
        let sin = &self.sin[axis];
        table
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let j = match axis {
                    0 => idx % s[0],
                    1 => (idx / s[0]) % s[1],
                    _ => idx / (s[0] * s[1]),
                };
                // i * sin * z
                let m = sin[j];
                C64::new(-z.im * m, z.re * m)
            })
            .collect()
    }

    /// `D~`: entry `[d][e]` is the derivative of component `d` along axis `e`.
    pub fn fourier_gradient(&self, b: &BandlimitedVelocity) -> BandTensor {
        std::array::from_fn(|d| std::array::from_fn(|e| self.derivative(&b.coeffs[d], e)))
    }

    /// `Gamma~`: row-wise divergence, `out_i = sum_e d_e T[i][e]`.
    pub fn divergence(&self, t: &BandTensor) -> BandlimitedVelocity {
        let coeffs = std::array::from_fn(|i| {
            let mut acc = vec![ZERO; self.band.len()];
            for (e, entry) in t[i].iter().enumerate() {
                for (a, z) in acc.iter_mut().zip(self.derivative(entry, e)) {
                    *a += z;
                }
            }
            acc
        });
        BandlimitedVelocity { band: self.band, coeffs }
    }

    /// Evaluates band tables as real fields on the padded product grid.
    pub(crate) fn padded_fields(&self, tables: &[&[C64]]) -> Vec<Vec<f64>> {
        let half = self.band.half();
        let scale = 1.0 / self.band.voxel_count() as f64;
        let mut out = Vec::with_capacity(tables.len());
        for pair in tables.chunks(2) {
            let (a, b) = self.padded.band_pair_to_real(half, pair[0], pair.get(1).copied(), scale);
            out.push(a);
            if let Some(b) = b {
                out.push(b);
            }
        }
        out
    }

    /// Band tables of real fields sampled on the padded product grid.
    pub(crate) fn padded_project(&self, fields: &[Vec<f64>]) -> Vec<Vec<C64>> {
        let half = self.band.half();
        let scale = self.band.voxel_count() as f64 / self.padded.len() as f64;
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let (a, b) = self.padded.real_pair_to_band(half, &pair[0], pair.get(1).map(|v| v.as_slice()), scale);
            out.push(a);
            if let Some(b) = b {
                out.push(b);
            }
        }
        out
    }

    /// `star`: band-limited projection of the pointwise product of two scalar
    /// band fields, exact up to round-off.
    pub fn truncated_correlation(&self, a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
        if a.len() != self.band.len() || b.len() != self.band.len() {
            return Err(Error::invalid("band mismatch in truncated correlation"));
        }
        let f = self.padded_fields(&[a, b]);
        let prod: Vec<f64> = f[0].iter().zip(&f[1]).map(|(x, y)| x * y).collect();
        Ok(self.padded_project(&[prod]).remove(0))
    }

    /// `(D~a)^T star m`: `out_i = P[sum_d (d_i a_d) m_d]`.
    pub fn transposed_gradient_correlation(
        &self,
        a: &BandlimitedVelocity,
        m: &BandlimitedVelocity,
    ) -> Result<BandlimitedVelocity> {
        self.check_band(a.band)?;
        self.check_band(m.band)?;
        let jac = self.fourier_gradient(a);
        let mut tables: Vec<&[C64]> = Vec::with_capacity(12);
        for row in &jac {
            for entry in row {
                tables.push(entry);
            }
        }
        for comp in &m.coeffs {
            tables.push(comp);
        }
        let f = self.padded_fields(&tables);
        let len = f[0].len();
        let sums: Vec<Vec<f64>> =
            (0..3).map(|i| (0..len).map(|x| (0..3).map(|d| f[3 * d + i][x] * f[9 + d][x]).sum()).collect()).collect();
        let out = self.padded_project(&sums);
        let mut it = out.into_iter();
        let coeffs = std::array::from_fn(|_| it.next().unwrap());
        Ok(BandlimitedVelocity { band: self.band, coeffs })
    }

    /// `m (x) v` projected onto the band: entry `[i][e] = P[m_i v_e]`.
    pub fn tensor_product(&self, m: &BandlimitedVelocity, v: &BandlimitedVelocity) -> Result<BandTensor> {
        self.check_band(m.band)?;
        self.check_band(v.band)?;
        let tables: Vec<&[C64]> = m.coeffs.iter().chain(v.coeffs.iter()).map(|c| c.as_slice()).collect();
        let f = self.padded_fields(&tables);
        let prods: Vec<Vec<f64>> = (0..9)
            .map(|ie| {
                let (i, e) = (ie / 3, ie % 3);
                f[i].iter().zip(&f[3 + e]).map(|(x, y)| x * y).collect()
            })
            .collect();
        let mut it = self.padded_project(&prods).into_iter();
        Ok(std::array::from_fn(|_| std::array::from_fn(|_| it.next().unwrap())))
    }

    /// `Gamma~(m (x) v)`.
    pub fn truncated_product(&self, m: &BandlimitedVelocity, v: &BandlimitedVelocity) -> Result<BandlimitedVelocity> {
        Ok(self.divergence(&self.tensor_product(m, v)?))
    }
}

fn l_symbol(alpha: f64, power: u32, full_dims: [usize; 3], k: [i64; 3]) -> f64 {
    let lap: f64 = (0..3).map(|d| 2.0 * (1.0 - (2.0 * PI * k[d] as f64 / full_dims[d] as f64).cos())).sum();
    (alpha * lap + 1.0).powi(power as i32)
}

/// Random conjugate-symmetric coefficients whose magnitude decays like
/// `1 / (1 + |k|^2)`, rescaled so the dense field peaks at `amplitude` voxels.
pub fn random_velocity(op: &FourierOperator, amplitude: f64, rng: &mut impl Rng) -> BandlimitedVelocity {
    let band = op.band();
    let mut v = BandlimitedVelocity::zeros(band);
    for comp in &mut v.coeffs {
        for (idx, z) in comp.iter_mut().enumerate() {
            let k = band.freq(idx);
            let decay = 1.0 / (1.0 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64);
            *z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * decay;
        }
    }
    v.enforce_symmetry();
    let peak = op.lift_unchecked(&v).max_norm();
    if peak > 0.0 {
        v.scale(amplitude / peak);
    }
    v
}
