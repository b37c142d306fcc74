// SPDX-License-Identifier: Apache-2.0

//! Named numerical thresholds shared by the library and its tests.

/// Structural checks (hermiticity, trace, round trips) on small dense matrices.
pub const STRUCTURAL: f64 = 1e-12;

/// Density-matrix validation of user supplied states.
pub const DENSITY: f64 = 1e-10;

/// Propagation invariants (trace and adjoint preservation).
pub const PROPAGATION: f64 = 1e-10;

/// Cross-checks against numerical integration.
pub const INTEGRATION: f64 = 1e-8;

/// Relative tolerance of the adaptive integrator used for time-dependent rates.
pub const ODE_RTOL: f64 = 1e-10;

/// Absolute tolerance of the adaptive integrator.
pub const ODE_ATOL: f64 = 1e-13;

/// Relative singular-value threshold separating the null space of a generator.
pub const NULL_SPACE: f64 = 1e-9;

/// Below this modulus the weak-value denominator is treated as zero.
pub const POSTSELECTION_VANISHES: f64 = 1e-14;

/// Below this modulus the inversion denominator is treated as zero.
pub const INVERSION_SINGULAR: f64 = 1e-12;

/// Largest allowed imaginary residue when a real rate is evaluated through
/// complex arithmetic.
pub const IMAGINARY_RESIDUE: f64 = 1e-10;

/// Soft bound on `gamma * tau` (or `lambda * tau`) for the short-time laws.
pub const SHORT_TIME_GUARD: f64 = 0.05;

/// Soft bound on `Delta * t` for the rotating-wave shifts.
pub const DETUNING_GUARD: f64 = 0.05;

/// A model fit wins the Markovianity classification when its relative
/// residual is below this fraction of the competing model's.
pub const CLASSIFY_RESIDUAL_RATIO: f64 = 0.1;

/// Relative fit residual above which a short-time estimate is flagged as
/// outside its regime.
pub const REGIME_RESIDUAL: f64 = 1e-2;
