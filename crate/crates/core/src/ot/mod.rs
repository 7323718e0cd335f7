//! Entropic optimal transport between sample clouds.
//!
//! The ground cost is always half the squared Euclidean distance,
//! `d(a, b) = ½‖a − b‖²`, so that the gradient of the transport value with
//! respect to a sample is `Σ_j T_ij (a_i − b_j)` at the optimal plan.

mod assignment;
mod cost;
mod grad;
mod sinkhorn;

pub use assignment::{exact_assignment_oracle, hungarian, Assignment, MAX_ORACLE_SIZE};
pub use cost::{pairwise_half_sq_euclidean, CostMatrix, Marginals};
pub use grad::{grad_wrt_samples, SampleGradients};
pub use sinkhorn::{eot_value, sinkhorn_log, EotSolution, SinkhornConfig};
