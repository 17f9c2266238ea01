//! Simulation and analysis toolkit for cryogenic microwave-cavity loss
//! measurements.
//!
//! The crate is organised around the measurement chain:
//!
//! * [`ringdown`] simulates pulsed ringdown with frequency jitter and finite
//!   detector bandwidth, and estimates decay rates, coupling and photon number.
//! * [`tls`] fits two-level-system saturation curves to power sweeps and
//!   derives cavity loss-factor bounds.
//! * [`participation`] holds participation tables, the composite substrate
//!   loss identity and the polynomial basis representation.
//! * [`inversion`] solves the bounded participation-matrix system, computes
//!   covariances and sensitivity maps.
//! * [`separation`] turns substrate loss tangents into bulk/surface and
//!   dielectric/magnetic components and coherence limits.
//! * [`cli`] wires everything into the `cavloss` command-line tool.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod consts;
pub mod error;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod participation;
pub mod quad;
pub mod ringdown;
pub mod separation;
pub mod synth;
pub mod tls;

pub use error::{Error, Result};
