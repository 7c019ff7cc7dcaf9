//! Forward simulation of femtosecond rotational-wavepacket Ramsey
//! interferometry for trapped linear molecular ions in the effective rotor
//! picture.
//!
//! Internally everything is in atomic units; see [`units`] for conversions.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod interferometry;
pub mod landscape;
pub mod pulse;
pub mod rotor;
pub mod sensitivity;
pub mod units;

pub use error::{Error, Result};
