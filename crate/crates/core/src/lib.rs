//! Spin-wave reservoir computing on a thin-film micromagnetic solver.

pub mod aor;
pub mod data;
pub mod error;
pub mod excitation;
pub mod experiment;
pub mod magnetics;
pub mod psm;
pub mod readout;

pub use error::{Error, Result};
