//! Joint transmit-precoder and IRS phase-shift design for multiuser MIMO downlinks with
//! imperfect channel estimates.
//!
//! The weighted sum rate is maximized through its WMMSE reformulation by block coordinate
//! descent. The transmit block has closed-form filters and weights and a bisection-solved
//! power dual; the phase block reduces to a unit-modulus quadratic solved by either a
//! majorization-minimization step or an Armijo gradient step. A geometry-based channel
//! simulator and a seeded Monte Carlo harness sit on top.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod bcd;
pub mod channel;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod linalg;
pub mod mc_oracle;
pub mod model;
pub mod passive;
pub mod random;

pub use active::{DualSettings, DualSolveReport};
pub use bcd::{OptimizerConfig, PassiveMethod, Problem, RunResult, StopReason};
pub use channel::{ScenarioConfig, WeightMode};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use model::{BeamformingState, ChannelEstimates, CovarianceBundle, ErrorModel, SystemDims};
pub use passive::{ArmijoParams, PassiveCoefficients};
