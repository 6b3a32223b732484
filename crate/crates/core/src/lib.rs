//! Diffeomorphic image registration with bandlimited geodesic shooting and a
//! patch-wise correlation-ratio similarity for multimodal images.

pub mod error;
pub mod evaluation;
pub mod fourier;
pub mod geodesic;
pub mod io;
pub mod metric;
pub mod optimizer;
pub mod volume;

pub use error::{Error, Result};
pub use evaluation::{dice, jacobian_determinant, jacobian_histogram, warp_labels, JacobianHistogram, LabelMap};
pub use fourier::{build_operator, Band, BandlimitedVelocity, FourierOperator};
pub use geodesic::{backward_adjoint, integrate_inverse_map, shoot_forward, GeodesicTrajectory, ShootingConfig};
pub use metric::{Metric, RaptorConfig, SsdConfig};
pub use optimizer::{energy, energy_gradient, minimize, MetricKind, RegistrationConfig, RegistrationResult};
pub use volume::{DisplacementField, Grid, VectorField, Volume};
