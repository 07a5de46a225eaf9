//! A two-level normal model with an unknown precision, whose posterior is
//! explored by two blocked Gibbs samplers with very different convergence.

pub mod density;
pub mod diagnostics;
pub mod model;
pub mod quad;
pub mod verify;

pub use density::{k_cdf, lambda, marginal_density_k, tau};
pub use diagnostics::{acceptance_curve, ergodicity_contrast, invariance_check, one_step_ks};
pub use model::{run_chain, ChainTrace, HierModel, HierState, Sampler};
pub use verify::{verify_drift, verify_minorization};
