//! Nonparametric estimation of a scalar-on-function regression functional and
//! its functional derivatives.
//!
//! Curves live on a shared [`Grid`] over `[0, 1]` with trapezoid quadrature.
//! [`fpca`] supplies the eigenbasis, [`regression`] the Nadaraya–Watson fit,
//! and [`derivative`] the pairwise difference-quotient estimates of the
//! derivative coefficients along each eigenfunction. [`simulate`] and
//! [`smallball`] provide data with known ground truth.

pub mod derivative;
pub mod error;
pub mod fpca;
pub mod function_space;
pub mod ingest;
pub mod regression;
pub mod rng;
pub mod simulate;
pub mod smallball;
pub mod stats;

pub use derivative::{
    derivative_generating_function, directional_derivative, steepest_direction, BandwidthChoice, BandwidthRule,
    DerivBandwidths, DerivativeEstimate, DerivativeEstimator,
};
pub use error::{Error, Result};
pub use fpca::{ComponentRule, EigenSystem, Sample};
pub use function_space::{inner_product, l2_norm, Curve, Grid};
pub use regression::{nw_estimate, KernelFamily, KernelSpec, RegressionFit};
