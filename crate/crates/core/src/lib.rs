//! Federated optimization with regularized client participation.
//!
//! The crate simulates RR-CLI, a FedAvg-style method in which clients are
//! dealt into disjoint cohorts once per meta-epoch and both the cohort order
//! and each client's data order are reshuffled, alongside the FedAvg and
//! NASTYA baselines. It also carries the machinery to check the method's
//! analysis numerically: closed-form variances of double-shuffled averages
//! with enumeration oracles, and the right-hand sides of the convergence
//! bounds.
//!
//! Numeric code is generic over [`Scalar`] (real floats) or [`Field`]
//! (anything with exact field arithmetic); the aliases below fix `f64`.

pub mod dataset;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod problem;
pub mod rng;
pub mod scalar;
pub mod shuffling;
pub mod theory;
pub mod variance_lab;

pub use error::{Error, Result};
pub use scalar::{Field, Scalar};

pub type Problem = problem::FederatedProblem<f64>;
pub type Optimum = problem::Optimum<f64>;
pub type Steps = optimizer::StepSizes<f64>;
pub type Config = optimizer::AlgoConfig<f64>;
pub type Trace = optimizer::RunTrace<f64>;
pub type Params = theory::RegimeParams<f64>;
pub type Inputs = variance_lab::VarianceInputs<f64>;
