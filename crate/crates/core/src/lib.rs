//! Multi-objective Bayesian optimisation with preference-order constraints
//! on the stability of the objectives.
//!
//! Gaussian-process surrogates supply posterior distributions of the objective
//! gradients; a point is preferred when its gradients lie in the cone-derived
//! set for the requested importance ordering. The probability of that event
//! weights the expected hypervolume improvement.

pub mod acquisition;
pub mod benchmarks;
pub mod cli;
pub mod cone;
pub mod constraint_prob;
pub mod design;
pub mod error;
pub mod gp;
pub mod hypervolume;
pub mod optimizer;
pub mod rng;

pub use error::{Error, Result};
