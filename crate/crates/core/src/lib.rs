//! Feasible GLS for seemingly unrelated regressions with many equations,
//! using a graphical-lasso estimate of the error precision matrix.
//!
//! The pipeline is OLS per equation, the residual covariance Σ̂, a sparse
//! precision Ω̂ from the graphical lasso ([`glasso`]) with λ chosen by
//! cross-validation ([`modelselect`]), then GLS with Ω̂ ([`sur`]).
//! [`dgp`], [`harness`] and [`diagnostics`] reproduce the simulation
//! designs and experiments; [`cli`] backs the `fglasso` binary.

pub mod cli;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod glasso;
pub mod harness;
pub mod linalg;
pub mod modelselect;
pub mod rng;
pub mod stats;
pub mod sur;
