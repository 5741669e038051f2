//! Kernels, simulation and diagnostics for continuous-time autoregressive
//! models driven by Lévy noise.
//!
//! Two model families are covered:
//!
//! * the stochastic delay equation `dX_t = ∫ X_{t-v} η(dv) dt + dZ_t`, whose
//!   stationary solution is a moving average with kernel built from `x0`,
//!   the function with bilateral Laplace transform `1/h`, `h(z) = -z - L[η](z)`;
//! * the level model `X_t = ∫ X_{t-u} φ(du) + ∫ θ(t-u) dL_u`, whose kernel `ψ`
//!   solves `ψ = θ + ψ ∗ φ`.
//!
//! [`measure`] holds the signed-measure algebra, [`solver`] the kernel
//! solvers, [`closed_forms`] analytic fixtures, [`simulation`] path
//! generation, [`stats`] autocovariances and [`cli`] the batch front end.

// NaN must fail the validity checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closed_forms;
mod conv;
pub mod error;
pub mod kernel;
pub mod measure;
mod numerics;
pub mod simulation;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use kernel::{Jump, SampledKernel};
pub use measure::{Atom, CharacteristicFunction, ConvolveConfig, GammaTerm, GridDensity, SignedMeasure};
