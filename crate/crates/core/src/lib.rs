//! Discrete-time Feynman path distributions as computable objects: actions
//! and covariance kernels, the Feynman-Thomas measure and its majorant,
//! convergence bounds, pairings with potentials, wave-function evolution and
//! lattice scattering.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod evolution;
pub mod extrapolate;
pub mod gaussian;
pub mod lattice;
pub mod measure;
pub mod montecarlo;
pub mod oracle;
pub mod pairing;
pub mod scattering;
pub mod verify;

pub use error::{Error, Result};
pub use evolution::{AtomicMeasure, SpatialGrid, WaveFunction};
pub use lattice::{Boundary, CovarianceKernel, TimeGrid};
pub use measure::MeasureConfig;
pub use montecarlo::Estimate;
pub use num_complex::Complex64;
pub use pairing::{CouplingSchedule, PotentialModel, TabulatedPotential};
pub use scattering::ScatterConfig;
