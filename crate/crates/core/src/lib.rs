//! Repeated quantum interactions with an `n`-level bath at low density, and
//! numerical checks of their convergence to a scattering-driven quantum
//! stochastic differential equation.
//!
//! The step length `h` is tied to the chemical potential by `h² = e^{βμ}`.
//! Each module builds one layer: bath weights, the step unitary, the GNS
//! coefficients, their limits, the reduced dynamics and the noise algebra.

// Index loops mirror the formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod gns;
pub mod instances;
pub mod interaction;
pub mod limit;
pub mod matrix;
pub mod noisealg;
pub mod tolerances;

pub use bath::{gibbs_weights, BathSpec, CouplingPoint, GibbsWeights};
pub use dynamics::{DensityMatrix, QuantumChannel};
pub use error::{Error, Result};
pub use fit::{HGrid, RateFit};
pub use gns::{CoefficientTable, GnsBasis};
pub use interaction::{Hamiltonian, StepUnitary, SystemSpec};
pub use limit::{CoeffClass, LimitGenerator};
pub use matrix::{ComplexMatrix, Norm, C64};
pub use noisealg::{MultiplicityIndex, NoiseDifferential};
