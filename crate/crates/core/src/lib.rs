//! Finite-blocklength performance analysis of links assisted by a
//! reconfigurable intelligent surface (RIS).
//!
//! The received SNR of an `N`-element RIS link is approximated by a Gamma
//! distribution fitted to its first two moments. On top of that fit the crate
//! evaluates the average achievable rate, block error rate and blocklength
//! from the normal approximation of finite-blocklength coding, and checks all
//! of it against a Monte Carlo channel simulator.
//!
//! - [`specfun`]: special functions and quadrature.
//! - [`channel`]: path loss, phase models, SNR moments and the Gamma fit.
//! - [`fbl`]: instantaneous and averaged finite-blocklength metrics.
//! - [`montecarlo`]: seeded channel simulation and empirical statistics.
//! - [`experiments`]: scenario configuration and figure sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tabulated constants keep the digits they were published with.
#![allow(clippy::excessive_precision)]

pub mod channel;
pub mod error;
pub mod experiments;
pub mod fbl;
pub mod montecarlo;
pub mod specfun;

pub use error::{Error, Result};
