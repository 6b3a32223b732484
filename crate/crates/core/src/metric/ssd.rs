//! Sum of squared differences.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsdConfig {
    /// Noise parameter; the data term is scaled by `1 / (2 sigma^2)`.
    pub sigma: f64,
}

impl Default for SsdConfig {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

impl SsdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `(1 / 2 sigma^2) sum (y_warped - x)^2`.
pub fn ssd_value(x: &Volume, y_warped: &Volume, cfg: &SsdConfig) -> Result<f64> {
    cfg.validate()?;
    x.grid.ensure_same_dims(&y_warped.grid)?;
    let sum: f64 = x.data.par_iter().zip(&y_warped.data).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(sum / (2.0 * cfg.sigma * cfg.sigma))
}

/// `(1 / sigma^2) (y_warped - x)` per voxel.
pub fn ssd_gradient(x: &Volume, y_warped: &Volume, cfg: &SsdConfig) -> Result<Volume> {
    cfg.validate()?;
    x.grid.ensure_same_dims(&y_warped.grid)?;
    let s = 1.0 / (cfg.sigma * cfg.sigma);
    let data = x.data.par_iter().zip(&y_warped.data).map(|(a, b)| (b - a) * s).collect();
    Ok(Volume { grid: x.grid, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use proptest::prelude::*;

    fn g(n: usize) -> Grid {
        Grid::unit([n; 3]).unwrap()
    }

    #[test]
    fn value_examples() {
        let cfg = SsdConfig::default();
        let x = Volume::from_fn(g(4), |i| i[0] as f64 - i[2] as f64);
        assert_eq!(ssd_value(&x, &x, &cfg).unwrap(), 0.0);

        let mut y = x.clone();
        y.data[17] += 3.0;
        assert_eq!(ssd_value(&x, &y, &cfg).unwrap(), 4.5);

        let zeros = Volume::constant(g(4), 0.0);
        let ones = Volume::constant(g(4), 1.0);
        assert_eq!(ssd_value(&zeros, &ones, &cfg).unwrap(), 32.0);
    }

    #[test]
    fn gradient_examples() {
        let x = Volume::constant(g(3), 1.0);
        assert!(ssd_gradient(&x, &x, &SsdConfig::default()).unwrap().data.iter().all(|&v| v == 0.0));
        let mut y = x.clone();
        y.data[5] += 2.0;
        let grad = ssd_gradient(&x, &y, &SsdConfig { sigma: 2.0 }).unwrap();
        for (i, v) in grad.data.iter().enumerate() {
            assert_eq!(*v, if i == 5 { 0.5 } else { 0.0 });
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = Volume::constant(g(3), 1.0);
        assert!(ssd_value(&x, &x, &SsdConfig { sigma: 0.0 }).is_err());
        assert!(ssd_value(&x, &Volume::constant(g(4), 1.0), &SsdConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            vals in proptest::collection::vec(-5.0f64..5.0, 54),
            sigma in 0.3f64..3.0,
            idx in 0usize..27,
        ) {
            let cfg = SsdConfig { sigma };
            let x = Volume::new(g(3), vals[..27].to_vec()).unwrap();
            let y = Volume::new(g(3), vals[27..].to_vec()).unwrap();
            let h = 1e-4;
            let mut yp = y.clone();
            yp.data[idx] += h;
            let mut ym = y.clone();
            ym.data[idx] -= h;
            let fd = (ssd_value(&x, &yp, &cfg).unwrap() - ssd_value(&x, &ym, &cfg).unwrap()) / (2.0 * h);
            let an = ssd_gradient(&x, &y, &cfg).unwrap().data[idx];
            prop_assert!((fd - an).abs() <= 1e-8 * an.abs().max(1.0));
            prop_assert!(ssd_value(&x, &y, &cfg).unwrap() >= 0.0);
        }
    }
}
