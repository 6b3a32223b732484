//! Dense 3D scalar and vector grids.
//!
//! Storage is x-fastest: voxel `(i0, i1, i2)` lives at `i0 + n0 * (i1 + n1 * i2)`,
//! which is the NIfTI on-disk order. Positions passed to the sampling routines
//! are continuous voxel coordinates in the same axis order.
//!
//! Sampling outside the grid clamps to the nearest edge voxel. Displacements are
//! always in voxel units; spacing and origin are carried along for I/O only.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Geometry shared by scalar volumes and vector fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid(format!("grid dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Unit spacing, zero origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n0 = self.dims[0];
        let n1 = self.dims[1];
        [idx % n0, (idx / n0) % n1, idx / (n0 * n1)]
    }

    pub(crate) fn ensure_same_dims(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.dims, found: other.dims });
        }
        Ok(())
    }
}

/// Scalar volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::invalid(format!(
                "volume data has {} values, dims {:?} need {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite voxel value at index {pos}")));
        }
        Ok(Self { grid, data })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([usize; 3]) -> f64 + Sync) -> Self {
        let data = (0..grid.len()).into_par_iter().map(|idx| f(grid.coords(idx))).collect();
        Self { grid, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn at(&self, i: [usize; 3]) -> f64 {
        self.data[self.grid.index(i)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Dense vector field of voxel-unit displacements, stored per component.
///
/// As an inverse map it encodes `phi^{-1}(x) = x + d(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub grid: Grid,
    pub components: [Vec<f64>; 3],
}

/// Dense velocity or other vector-valued grids share the displacement layout.
pub type VectorField = DisplacementField;

impl DisplacementField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, components: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn new(grid: Grid, components: [Vec<f64>; 3]) -> Result<Self> {
        if components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::invalid("displacement component length does not match dims"));
        }
        Ok(Self { grid, components })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([usize; 3]) -> [f64; 3] + Sync) -> Self {
        let vecs: Vec<[f64; 3]> = (0..grid.len()).into_par_iter().map(|idx| f(grid.coords(idx))).collect();
        let mut out = Self::zeros(grid);
        for (idx, v) in vecs.into_iter().enumerate() {
            for c in 0..3 {
                out.components[c][idx] = v[c];
            }
        }
        out
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn get(&self, idx: usize) -> [f64; 3] {
        [self.components[0][idx], self.components[1][idx], self.components[2][idx]]
    }

    pub fn is_identity(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let v = self.get(i);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Displacement of `(id + outer) o (id + self)`.
    pub fn compose(&self, outer: &DisplacementField) -> Result<DisplacementField> {
        self.grid.ensure_same_dims(&outer.grid)?;
        let grid = self.grid;
        Ok(DisplacementField::from_fn(grid, |i| {
            let idx = grid.index(i);
            let inner = self.get(idx);
            let p = [i[0] as f64 + inner[0], i[1] as f64 + inner[1], i[2] as f64 + inner[2]];
            let mut out = inner;
            for (c, o) in out.iter_mut().enumerate() {
                *o += sample(&outer.components[c], grid.dims, p);
            }
            out
        }))
    }
}

/// Per-axis sampling stencil: up to two `(index, weight)` taps.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Taps {
    pub idx: [usize; 2],
    pub w: [f64; 2],
    pub len: usize,
}

impl Taps {
    #[inline]
    fn one(i: usize, w: f64) -> Self {
        Self { idx: [i, i], w: [w, 0.0], len: 1 }
    }

    #[inline]
    fn two(i0: usize, w0: f64, i1: usize, w1: f64) -> Self {
        Self { idx: [i0, i1], w: [w0, w1], len: 2 }
    }

    #[inline]
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.idx[k], self.w[k]))
    }
}

/// Linear interpolation taps along one axis with clamp-to-edge.
#[inline]
pub(crate) fn value_taps(p: f64, n: usize) -> Taps {
    if n == 1 {
        return Taps::one(0, 1.0);
    }
    let pc = p.clamp(0.0, (n - 1) as f64);
    let i = (pc.floor() as usize).min(n - 2);
    let f = pc - i as f64;
    Taps::two(i, 1.0 - f, i + 1, f)
}

/// Derivative taps along one axis.
///
/// Inside a cell this is the exact slope of the linear interpolant. At an exact
/// grid node the slope is ambiguous; there the central difference (one-sided at
/// the first and last node) is used, which makes the sampled gradient agree with
/// [`spatial_gradient`] on the grid. Outside the clamped range the slope is zero.
#[inline]
pub(crate) fn slope_taps(p: f64, n: usize) -> Taps {
    let last = (n - 1) as f64;
    if n == 1 || p < 0.0 || p > last {
        return Taps::one(0, 0.0);
    }
    let fl = p.floor();
    let i = fl as usize;
    if p == fl {
        if i == 0 {
            Taps::two(0, -1.0, 1, 1.0)
        } else if i == n - 1 {
            Taps::two(n - 2, -1.0, n - 1, 1.0)
        } else {
            Taps::two(i - 1, -0.5, i + 1, 0.5)
        }
    } else {
        Taps::two(i, -1.0, i + 1, 1.0)
    }
}

#[inline]
fn tensor_sum(data: &[f64], dims: [usize; 3], t: [&Taps; 3]) -> f64 {
    let mut acc = 0.0;
    for (i2, w2) in t[2].iter() {
        for (i1, w1) in t[1].iter() {
            let row = dims[0] * (i1 + dims[1] * i2);
            let w12 = w1 * w2;
            for (i0, w0) in t[0].iter() {
                acc += w0 * w12 * data[row + i0];
            }
        }
    }
    acc
}

/// Trilinear sample of raw grid data at a continuous voxel position.
#[inline]
pub fn sample(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> f64 {
    let t = [value_taps(p[0], dims[0]), value_taps(p[1], dims[1]), value_taps(p[2], dims[2])];
    tensor_sum(data, dims, [&t[0], &t[1], &t[2]])
}

/// Trilinear sample and its spatial gradient (see [`slope_taps`] for the node rule).
#[inline]
pub fn sample_with_gradient(data: &[f64], dims: [usize; 3], p: [f64; 3]) -> (f64, [f64; 3]) {
    let v = [value_taps(p[0], dims[0]), value_taps(p[1], dims[1]), value_taps(p[2], dims[2])];
    let s = [slope_taps(p[0], dims[0]), slope_taps(p[1], dims[1]), slope_taps(p[2], dims[2])];
    let value = tensor_sum(data, dims, [&v[0], &v[1], &v[2]]);
    let grad = [
        tensor_sum(data, dims, [&s[0], &v[1], &v[2]]),
        tensor_sum(data, dims, [&v[0], &s[1], &v[2]]),
        tensor_sum(data, dims, [&v[0], &v[1], &s[2]]),
    ];
    (value, grad)
}

/// Adds `value` into `data` with the trilinear weights of position `p`
/// (the transpose of [`sample`]).
#[cfg(test)]
fn splat(data: &mut [f64], dims: [usize; 3], p: [f64; 3], value: f64) {
    Stencil::value_only(p, dims).splat(data, dims, value);
}

/// Value and slope taps at one position, shared by every field on the same grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    value: [Taps; 3],
    slope: [Taps; 3],
}

impl Stencil {
    #[inline]
    pub fn new(p: [f64; 3], dims: [usize; 3]) -> Self {
        Self {
            value: [value_taps(p[0], dims[0]), value_taps(p[1], dims[1]), value_taps(p[2], dims[2])],
            slope: [slope_taps(p[0], dims[0]), slope_taps(p[1], dims[1]), slope_taps(p[2], dims[2])],
        }
    }

    /// Value taps only; [`Stencil::gradient`] must not be used on the result.
    #[inline]
    pub fn value_only(p: [f64; 3], dims: [usize; 3]) -> Self {
        let v = [value_taps(p[0], dims[0]), value_taps(p[1], dims[1]), value_taps(p[2], dims[2])];
        Self { value: v, slope: v }
    }

    #[inline]
    pub fn sample(&self, data: &[f64], dims: [usize; 3]) -> f64 {
        let v = &self.value;
        tensor_sum(data, dims, [&v[0], &v[1], &v[2]])
    }

    #[inline]
    pub fn gradient(&self, data: &[f64], dims: [usize; 3]) -> [f64; 3] {
        let (v, s) = (&self.value, &self.slope);
        [
            tensor_sum(data, dims, [&s[0], &v[1], &v[2]]),
            tensor_sum(data, dims, [&v[0], &s[1], &v[2]]),
            tensor_sum(data, dims, [&v[0], &v[1], &s[2]]),
        ]
    }

    #[inline]
    pub fn splat(&self, data: &mut [f64], dims: [usize; 3], value: f64) {
        let t = &self.value;
        for (i2, w2) in t[2].iter() {
            for (i1, w1) in t[1].iter() {
                let row = dims[0] * (i1 + dims[1] * i2);
                let w12 = w1 * w2 * value;
                for (i0, w0) in t[0].iter() {
                    data[row + i0] += w0 * w12;
                }
            }
        }
    }
}

/// Trilinear interpolation with clamp-to-edge.
pub fn interpolate(v: &Volume, p: [f64; 3]) -> f64 {
    sample(&v.data, v.grid.dims, p)
}

/// `out(x) = v(x + d(x))`.
pub fn warp(v: &Volume, d: &DisplacementField) -> Result<Volume> {
    v.grid.ensure_same_dims(&d.grid)?;
    let grid = v.grid;
    let data = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let i = grid.coords(idx);
            let u = d.get(idx);
            sample(&v.data, grid.dims, [i[0] as f64 + u[0], i[1] as f64 + u[1], i[2] as f64 + u[2]])
        })
        .collect();
    Ok(Volume { grid, data })
}

/// Finite-difference derivative of raw grid data along `axis`, in voxel units.
pub(crate) fn axis_derivative(data: &[f64], dims: [usize; 3], axis: usize) -> Vec<f64> {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let grid = Grid { dims, spacing: [1.0; 3], origin: [0.0; 3] };
    (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let i = grid.coords(idx)[axis];
            if i == 0 {
                data[idx + stride] - data[idx]
            } else if i == n - 1 {
                data[idx] - data[idx - stride]
            } else {
                0.5 * (data[idx + stride] - data[idx - stride])
            }
        })
        .collect()
}

/// Central differences in the interior, one-sided on the boundary.
pub fn spatial_gradient(v: &Volume) -> Result<[Volume; 3]> {
    if let Some(axis) = v.grid.dims.iter().position(|&n| n < 2) {
        return Err(Error::invalid(format!("gradient needs at least 2 voxels along axis {axis}")));
    }
    let g = |axis| Volume { grid: v.grid, data: axis_derivative(&v.data, v.grid.dims, axis) };
    Ok([g(0), g(1), g(2)])
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Separable Gaussian smoothing with clamp-to-edge borders.
pub fn gaussian_smooth(v: &Volume, sigma: f64) -> Volume {
    if sigma <= 0.0 {
        return v.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let grid = v.grid;
    let mut data = v.data.clone();
    for axis in 0..3 {
        let n = grid.dims[axis] as i64;
        let src = data;
        data = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let mut i = grid.coords(idx);
                let centre = i[axis] as i64;
                let mut acc = 0.0;
                for (t, w) in kernel.iter().enumerate() {
                    i[axis] = (centre + t as i64 - radius).clamp(0, n - 1) as usize;
                    acc += w * src[grid.index(i)];
                }
                acc
            })
            .collect();
    }
    Volume { grid, data }
}

/// Gaussian pre-smoothing (stddev `0.5 * factor` voxels) then subsampling by `factor`.
pub fn downsample(v: &Volume, factor: usize) -> Result<Volume> {
    if factor == 0 {
        return Err(Error::invalid("downsample factor must be at least 1"));
    }
    if v.grid.dims.iter().any(|&n| factor > n) {
        return Err(Error::invalid(format!("downsample factor {factor} exceeds volume dims {:?}", v.grid.dims)));
    }
    let smooth = gaussian_smooth(v, 0.5 * factor as f64);
    let dims = v.grid.dims.map(|n| n.div_ceil(factor));
    let grid = Grid { dims, spacing: v.grid.spacing.map(|s| s * factor as f64), origin: v.grid.origin };
    Ok(Volume::from_fn(grid, |i| smooth.at([i[0] * factor, i[1] * factor, i[2] * factor])))
}

/// Resamples a displacement field onto a finer grid, rescaling vectors so they
/// stay in voxel units of the target grid.
pub fn upsample_displacement(d: &DisplacementField, target_dims: [usize; 3]) -> Result<DisplacementField> {
    let src = d.grid.dims;
    if (0..3).any(|a| target_dims[a] < src[a]) {
        return Err(Error::invalid(format!("upsample target {target_dims:?} is smaller than source {src:?}")));
    }
    let ratio = [0, 1, 2].map(|a| target_dims[a] as f64 / src[a] as f64);
    let grid =
        Grid { dims: target_dims, spacing: [0, 1, 2].map(|a| d.grid.spacing[a] / ratio[a]), origin: d.grid.origin };
    Ok(DisplacementField::from_fn(grid, |i| {
        let q = [0, 1, 2].map(|a| i[a] as f64 / ratio[a]);
        [0, 1, 2].map(|c| sample(&d.components[c], src, q) * ratio[c])
    }))
}
