//! File formats, synthetic inputs and configuration.

pub mod config;
pub mod nifti;
pub mod phantom;

pub use nifti::{read_displacement, read_labels, read_volume, write_displacement, write_labels, write_volume};
pub use phantom::{make_phantom, PhantomKind, PhantomParams};
