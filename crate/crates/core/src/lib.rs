//! Bicomplex time-dependent variational principle for a Bose–Einstein
//! condensate in a three-dimensional PT-symmetric double well, with branch
//! continuation, fold tracking and cusp localization.

// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bicomplex;
pub mod continuation;
pub mod error;
pub mod gauss;
pub mod io;
pub mod linalg;
pub mod normalform;
pub mod parallel;
pub mod quadrature;
pub mod scenario;
pub mod stationary;
pub mod tdvp;

pub use bicomplex::{Bicomplex, IdempotentPair};
pub use error::{Error, Result};
pub use gauss::{AnsatzChannel, BicomplexAnsatz, Channel, Gaussian, PotentialConfig, ProblemParams};
