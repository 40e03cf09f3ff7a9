//! Semiclassical Monte Carlo simulation of a two-level atom moving in the
//! standing-wave mode of a driven, lossy optical cavity.
//!
//! The atom's position and momentum and the two field quadratures evolve
//! under coupled stochastic differential equations whose noise correlates
//! the momentum kicks with the phase fluctuations of the cavity field.
//! On top of the integrator the crate provides trajectory ensembles,
//! steady-state observables and trapping-time analysis.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod histogram;
pub mod observables;
pub mod params;
pub mod rng;
pub mod sde;
pub mod trapping;

pub use error::{Error, Result};
pub use params::{DerivedParams, ModeFunction, StandingWave, SystemParams};
pub use sde::{DiffusionTriple, Model, PhaseState, StepDiagnostics};
