// SPDX-License-Identifier: Apache-2.0

//! Weak values and meter readouts for weak measurements whose system undergoes
//! Lindblad dissipation between the weak interaction and post-selection.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`]: dense complex operators, Bloch vectors, truncated Fock
//!   space and the six-level `J_g = 1/2 <-> J_e = 3/2` system.
//! * [`lindblad`]: dissipators, superoperator propagation, the analytic
//!   amplitude-damping channel, the non-Markovian Jaynes-Cummings channel and
//!   asymptotic (steady) spaces.
//! * [`weakvalue`]: the dissipative weak value, its long-time limits, the
//!   two-level Bloch closed forms and the short-time expansions.
//! * [`meter`]: quadrature shifts of a cavity-mode meter, their inversion, and
//!   a joint system-meter simulation used as ground truth.
//! * [`scenarios`]: packaged experiments (sodium traces, rate estimation,
//!   Markovianity classification).
//!
//! Conventions: `hbar = 1` unless passed explicitly; two-level systems use the
//! basis order `(|e>, |g>)`; superoperators act on column-stacked operators.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod meter;
pub mod ode;
pub mod operator;
pub mod scenarios;
pub mod tolerances;
pub mod weakvalue;

pub use error::{Error, Result};
pub use lindblad::{DissipationChannel, Dissipator, Rate, SteadyState};
pub use meter::{MeterAverages, MeterState, ShiftReport};
pub use operator::{BlochVector, FockSpace, Operator, SodiumLevel};
pub use weakvalue::{WeakMeasurementSetup, WeakValue, WeakValueTrace};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
