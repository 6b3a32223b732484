//! Deterministic synthetic volumes with matching label maps.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::evaluation::LabelMap;
use crate::volume::{Grid, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhantomKind {
    /// Textured ball on a dark background; label 1 inside.
    Sphere,
    /// Alternating cubes of side `period / 2`; labels 1 and 2.
    Checker,
    /// Linear ramp along the first axis; label 1 where intensity >= 0.5.
    Ramp,
}

impl PhantomKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "checker" => Ok(Self::Checker),
            "ramp" => Ok(Self::Ramp),
            other => Err(Error::invalid(format!("unknown phantom kind '{other}' (sphere, checker, ramp)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomParams {
    /// Sphere radius in voxels; defaults to 0.3 of the smallest dimension.
    pub radius: Option<f64>,
    /// Checker period in voxels; defaults to a quarter of the smallest dimension.
    pub period: Option<usize>,
    /// Amplitude of the sinusoidal texture inside the sphere.
    pub texture: f64,
    /// Standard deviation of additive Gaussian noise; 0 disables noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self { radius: None, period: None, texture: 0.15, noise_sigma: 0.0, seed: 0 }
    }
}

/// Builds a phantom of `kind` on a unit-spaced grid.
pub fn make_phantom(kind: PhantomKind, dims: [usize; 3], params: &PhantomParams) -> Result<(Volume, LabelMap)> {
    if dims.iter().any(|&n| n < 8) {
        return Err(Error::invalid(format!("phantom dims must be at least 8, got {dims:?}")));
    }
    if !(params.noise_sigma >= 0.0) || !params.texture.is_finite() {
        return Err(Error::invalid("noise_sigma must be non-negative and texture finite"));
    }
    let grid = Grid::unit(dims)?;
    let min_dim = *dims.iter().min().expect("three dims") as f64;
    let center = dims.map(|n| (n as f64 - 1.0) / 2.0);
    let (intensity, labels): (Vec<f64>, Vec<u32>) = match kind {
        PhantomKind::Sphere => {
            let r = params.radius.unwrap_or(0.3 * min_dim);
            if !(r >= 0.0) {
                return Err(Error::invalid("radius must be non-negative"));
            }
            let wavelength = (r / 2.0).max(4.0);
            (0..grid.len())
                .map(|x| {
                    let i = grid.coords(x);
                    let rel = [0, 1, 2].map(|a| i[a] as f64 - center[a]);
                    let rho = rel.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let inside = 1.0 / (1.0 + ((rho - r) / 1.0).exp());
                    let tex = rel.iter().map(|v| (2.0 * PI * v / wavelength).cos()).product::<f64>();
                    let value = 0.1 + 0.7 * inside + params.texture * inside * tex;
                    (if r > 0.0 { value } else { 0.1 }, (r > 0.0 && rho <= r) as u32)
                })
                .unzip()
        }
        PhantomKind::Checker => {
            let period = params.period.unwrap_or((min_dim as usize / 4).max(2));
            if period < 2 {
                return Err(Error::invalid("checker period must be at least 2"));
            }
            let cell = period / 2;
            (0..grid.len())
                .map(|x| {
                    let i = grid.coords(x);
                    let parity = (i[0] / cell + i[1] / cell + i[2] / cell) % 2;
                    (0.25 + 0.5 * parity as f64, 1 + parity as u32)
                })
                .unzip()
        }
        PhantomKind::Ramp => (0..grid.len())
            .map(|x| {
                let v = grid.coords(x)[0] as f64 / (dims[0] - 1) as f64;
                (v, (v >= 0.5) as u32)
            })
            .unzip(),
    };
    let mut intensity = intensity;
    if params.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let normal = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        intensity.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok((Volume::new(grid, intensity)?, LabelMap::new(grid, labels)?))
}
