//! Simulation core for a discrete-time spatial branching system with logistic
//! local regulation on a finite lattice torus.
//!
//! The crate covers four layers that build on each other:
//!
//! * [`kernel`] / [`model`] — dispersal and competition kernels, model
//!   parameters, the per-site offspring mean and its dispersal, occupancy,
//!   space-time boxes and the colonization horizon.
//! * [`logistic`] — the one-dimensional logistic machinery: maps, exact
//!   interval images, shrinking invariant interval sequences, margin
//!   selection and contraction bounds.
//! * [`cml`] / [`sandbox`] — the deterministic coupled map lattice, its
//!   perturbed variant with cap/noise condition checkers, local convergence
//!   certification and the adversarial colonization sandbox.
//! * [`rng`] / [`stochastic`] / [`percolation`] — counter-keyed random
//!   draws, the stochastic step, the two-copy coupling, the two-species
//!   extension, trajectory statistics, and oriented site percolation with
//!   cluster/exposure analysis and good-block extraction.
//!
//! All real arithmetic is generic over [`scalar::Real`] (`f32` or `f64`);
//! the type aliases at the crate root pin the default `f64` instantiation.

pub mod cml;
pub mod error;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod logistic;
pub mod model;
pub mod percolation;
pub mod rng;
pub mod sandbox;
pub mod scalar;
pub mod stochastic;

pub use error::CoreError;
pub use scalar::Real;

/// Default scalar used by the CLI and most tests.
pub type Scalar = f64;
/// Integer occupancy count per site.
pub type Count = u64;

pub type Field64 = field::Field<f64>;
pub type CountField = field::Field<Count>;
pub type DispersalKernel64 = kernel::DispersalKernel<f64>;
pub type CompetitionKernel64 = kernel::CompetitionKernel<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type LogisticMap64 = logistic::LogisticMap<f64>;
