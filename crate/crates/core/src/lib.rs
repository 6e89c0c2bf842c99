//! Gauge-invariant open-system simulations of one and two two-level atoms
//! coupled to a single cavity mode in the ultrastrong-coupling regime.

pub mod config;
pub mod dressed;
pub mod error;
pub mod gme;
pub mod hamiltonian;
pub mod hilbert;
pub mod linalg;
pub mod spectra;
pub mod sweep;

pub use config::{BathKind, Gauge, ModelConfig, ModelKind, RateUnit};
pub use error::{Error, Result};
