//! Numerical thresholds of the verification suites.

/// Largest `|G − I|` entry of the GNS Gram matrix.
pub const GRAM: f64 = 1e-10;
/// Allowed distance of a fitted slope from the closed-form exponent, for
/// the λ-product sweep.
pub const LEMMA_SLOPE: f64 = 0.05;
/// Quantities that vanish identically must stay below this.
pub const LEMMA_ZERO: f64 = 1e-13;
/// Vacuum/excited cross blocks of the step unitary.
pub const BLOCK_OFFDIAG: f64 = 1e-12;
/// Slope tolerance of the block-expansion fits.
pub const BLOCK_SLOPE: f64 = 0.1;
/// Coefficients that vanish identically.
pub const COEFF_ZERO: f64 = 1e-12;
/// Last-point bound of the `√h`-rescaled coefficients.
pub const HALF_CLASS_LAST: f64 = 1e-2;
/// Last-point bound of the drift residual, relative to `‖H_S + γ_0 I‖`.
pub const DRIFT_LAST_RELATIVE: f64 = 1e-2;
/// Minimum fitted slope of a gauge residual.
pub const GAUGE_MIN_SLOPE: f64 = 0.9;
/// `‖Σ K†K − I‖`.
pub const TRACE_PRESERVATION: f64 = 1e-11;
/// Lower bound on the smallest Choi eigenvalue.
pub const CHOI_MIN_EIGENVALUE: f64 = -1e-10;
/// Slope tolerance of the reduced-dynamics error fit.
pub const DYNAMICS_SLOPE: f64 = 0.2;
/// Error bound at the finest grid point of the reduced-dynamics sweep.
pub const DYNAMICS_LAST: f64 = 1e-2;
/// Error of the decoupled control.
pub const DYNAMICS_CONTROL: f64 = 1e-12;
/// `‖L^{00} + L^{00†}‖`.
pub const DRIFT_SKEW: f64 = 1e-12;
/// Unitarity residual of the assembled scattering operator.
pub const GAUGE_UNITARY: f64 = 1e-10;
/// Norm bookkeeping of the sector simulation.
pub const SECTOR_ACCOUNTING: f64 = 1e-10;
