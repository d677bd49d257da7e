//! Grand-canonical distribution functions of a classical fluid from the
//! truncated Kirkwood–Salsburg hierarchy, and their derivatives with respect
//! to the pair potential.
//!
//! * [`config`]: the JSON run configuration used by the command-line tool.
//! * [`potentials`]: pair potentials, admissibility envelopes, perturbation
//!   norms and the regularity/stability constants.
//! * [`quadrature`]: cubic boxes, midpoint tensor grids, grid functions.
//! * [`ks`]: the hierarchy operators and their Neumann-series solution.
//! * [`derivative`]: derivative operators, finite-difference studies and box sweeps.
//! * [`oracle`]: brute-force grand-canonical sums and the explicit
//!   first/second-order derivative formulas on the same grid.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod derivative;
pub mod error;
pub mod ks;
pub mod oracle;
pub mod par;
pub mod potentials;
pub mod quadrature;

pub use error::{KsError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
