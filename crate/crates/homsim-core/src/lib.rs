//! Two-photon interference of dissimilar single-photon emitters.
//!
//! Simulates time-resolved and pulse-wise Hong-Ou-Mandel correlations for a
//! pair of independently driven two-level emitters with unequal decay rates,
//! spectral detuning, arrival-time delay, pure dephasing, polarization
//! mismatch and slow spectral wandering.

// Validations use `!(x > 0.0)` on purpose: NaN fails the comparison and is
// rejected, which `x <= 0.0` would not do.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod correlators;
pub mod error;
pub mod grid;
pub mod hom;
pub mod ode;
pub mod oracle;
pub mod output;
pub mod quadrature;
pub mod scenario;
pub mod sweep;
pub mod systems;
pub mod tls;
pub mod units;
pub mod wandering;

pub use error::{Error, Result};
