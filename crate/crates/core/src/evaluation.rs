//! Overlap and deformation-regularity measures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{axis_derivative, DisplacementField, Grid, Volume};

/// Integer label volume; 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    pub grid: Grid,
    pub data: Vec<u32>,
}

impl LabelMap {
    pub fn new(grid: Grid, data: Vec<u32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::invalid(format!("label data has {} entries, grid needs {}", data.len(), grid.len())));
        }
        Ok(Self { grid, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn at(&self, i: [usize; 3]) -> u32 {
        self.data[self.grid.index(i)]
    }

    pub fn count(&self, label: u32) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }
}

/// `2 |A & B| / (|A| + |B|)` for the voxels carrying `label`; 1 when both are empty.
pub fn dice(a: &LabelMap, b: &LabelMap, label: u32) -> Result<f64> {
    a.grid.ensure_same_dims(&b.grid)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let (ia, ib) = (x == label, y == label);
        na += ia as usize;
        nb += ib as usize;
        both += (ia && ib) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Nearest-neighbour resampling of labels at `x + d(x)`, clamped to the grid.
pub fn warp_labels(m: &LabelMap, d: &DisplacementField) -> Result<LabelMap> {
    m.grid.ensure_same_dims(&d.grid)?;
    let dims = m.dims();
    let grid = m.grid;
    let data = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let i = grid.coords(x);
            let j = [0, 1, 2].map(|a| {
                let p = (i[a] as f64 + d.components[a][x]).round();
                p.clamp(0.0, (dims[a] - 1) as f64) as usize
            });
            m.data[grid.index(j)]
        })
        .collect();
    Ok(LabelMap { grid, data })
}

/// `det(I + grad d)` per voxel with central differences (one-sided at edges).
pub fn jacobian_determinant(d: &DisplacementField) -> Result<Volume> {
    let dims = d.dims();
    if dims.iter().any(|&n| n < 2) {
        return Err(Error::invalid("Jacobian needs at least two voxels per axis"));
    }
    let grads: Vec<Vec<f64>> =
        (0..9).into_par_iter().map(|ce| axis_derivative(&d.components[ce / 3], dims, ce % 3)).collect();
    let data = (0..d.grid.len())
        .into_par_iter()
        .map(|x| {
            let j = |c: usize, e: usize| grads[3 * c + e][x] + if c == e { 1.0 } else { 0.0 };
            j(0, 0) * (j(1, 1) * j(2, 2) - j(1, 2) * j(2, 1)) - j(0, 1) * (j(1, 0) * j(2, 2) - j(1, 2) * j(2, 0))
                + j(0, 2) * (j(1, 0) * j(2, 1) - j(1, 1) * j(2, 0))
        })
        .collect();
    Ok(Volume { grid: d.grid, data })
}

/// Histogram of `log10 det J` with bins centred on multiples of `bin_width`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianHistogram {
    pub bin_width: f64,
    /// Bin index of `counts[0]`; bin `k` covers `[(k - 1/2) w, (k + 1/2) w)`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub non_positive: u64,
}

impl JacobianHistogram {
    pub fn from_determinants(det: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::invalid("bin_width must be positive"));
        }
        let mut non_positive = 0;
        let mut bins = Vec::with_capacity(det.len());
        for &v in det {
            if v > 0.0 {
                bins.push((v.log10() / bin_width).round() as i64);
            } else {
                non_positive += 1;
            }
        }
        let first_bin = bins.iter().copied().min().unwrap_or(0);
        let last = bins.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u64; (last - first_bin + 1) as usize];
        for b in bins {
            counts[(b - first_bin) as usize] += 1;
        }
        Ok(Self { bin_width, first_bin, counts, non_positive })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.non_positive
    }

    /// Count in the bin whose centre is nearest to `log10_det`.
    pub fn count_at(&self, log10_det: f64) -> u64 {
        let k = (log10_det / self.bin_width).round() as i64 - self.first_bin;
        if k < 0 {
            return 0;
        }
        self.counts.get(k as usize).copied().unwrap_or(0)
    }

    /// `(lower edge, upper edge, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let k = (self.first_bin + i as i64) as f64;
            ((k - 0.5) * self.bin_width, (k + 0.5) * self.bin_width, c)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("log10_det_low,log10_det_high,count\n");
        for (lo, hi, c) in self.bins() {
            out.push_str(&format!("{lo:.6},{hi:.6},{c}\n"));
        }
        out.push_str(&format!("non_positive,,{}\n", self.non_positive));
        out
    }
}

pub fn jacobian_histogram(d: &DisplacementField, bin_width: f64) -> Result<JacobianHistogram> {
    JacobianHistogram::from_determinants(&jacobian_determinant(d)?.data, bin_width)
}

/// Fraction of voxels with a positive determinant and `|log10 det| <= bound`.
pub fn log_det_fraction_within(det: &Volume, bound: f64) -> f64 {
    let inside = det.data.iter().filter(|&&v| v > 0.0 && v.log10().abs() <= bound).count();
    inside as f64 / det.data.len() as f64
}
