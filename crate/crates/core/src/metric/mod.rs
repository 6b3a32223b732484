//! Dissimilarity terms and their per-voxel derivatives.

pub mod raptor;
pub mod ssd;

pub use raptor::{raptor_gradient, raptor_total, RaptorConfig};
pub use ssd::{ssd_gradient, ssd_value, SsdConfig};

use crate::error::Result;
use crate::volume::Volume;

/// The data term of the registration energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Ssd(SsdConfig),
    Raptor(RaptorConfig),
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ssd(_) => "ssd",
            Metric::Raptor(_) => "raptor",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Metric::Ssd(c) => c.validate(),
            Metric::Raptor(c) => c.validate(),
        }
    }

    pub fn value(&self, x: &Volume, y_warped: &Volume) -> Result<f64> {
        match self {
            Metric::Ssd(c) => ssd_value(x, y_warped, c),
            Metric::Raptor(c) => raptor_total(x, y_warped, c),
        }
    }

    /// Value and `dPsi/dY` at every voxel.
    pub fn value_and_gradient(&self, x: &Volume, y_warped: &Volume) -> Result<(f64, Volume)> {
        match self {
            Metric::Ssd(c) => Ok((ssd_value(x, y_warped, c)?, ssd_gradient(x, y_warped, c)?)),
            Metric::Raptor(c) => raptor::raptor_value_and_gradient(x, y_warped, c),
        }
    }
}
