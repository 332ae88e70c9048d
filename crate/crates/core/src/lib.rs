//! Noise budget and Monte Carlo validation for fiber optic gyroscopes driven
//! by N-photon N00N states.
//!
//! The crate covers the ideal Sagnac relations ([`sagnac`]), loss propagation
//! of N00N pairs and uncorrelated singles ([`propagation`]), spurious
//! coincidences and the phase error they induce ([`spurious`]), coherence and
//! dispersion corrections ([`dispersion`]) and a Poisson-arrival simulator
//! used as an independent check ([`montecarlo`]). [`config`] and [`report`]
//! back the `qfog` command-line tool.

pub mod config;
pub mod dispersion;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod propagation;
pub mod report;
pub mod sagnac;
pub mod spurious;

pub use error::{Error, Result};
pub use model::{DetectionSpec, GyroGeometry, OpticalPath, PhasePoint, SourceSpec, WindowMode};
