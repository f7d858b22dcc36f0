//! Trajectory optimization toolkit built around Differential Dynamic Programming.
//!
//! The crate provides a family of trajectory optimizers that share one DDP core:
//!
//! - [`ddp`]: deterministic DDP/iLQR with a regularized backward pass and a
//!   backtracking forward pass.
//! - [`meddp`]: maximum-entropy DDP policies (unimodal Gaussian and
//!   value-weighted Gaussian mixture) used to perturb trajectories between
//!   deterministic iterations.
//! - [`svddp`]: Stein variational DDP — an ensemble of DDP solves coupled by a
//!   kernel repulsion term with a Newton-type update per timestep.
//! - [`mppi`]: sampling-based MPC baselines (unimodal, multimodal, and Stein
//!   variational MPPI).
//! - [`mpc`]: receding-horizon harness with randomized obstacle fields and
//!   success/violation metrics.
//!
//! Constraints (obstacles and control bounds) enter the DDP solvers through a
//! relaxed log-barrier penalty with Gauss-Newton Hessian conditioning; the MPPI
//! baselines use a crash cost instead. See [`cost`].
//!
//! All solvers are deterministic given a seed: random streams are derived per
//! mode from the run seed, and parallel reductions happen in a fixed order.

pub mod benchmarks;
pub mod cost;
pub mod ddp;
pub mod dynamics;
pub mod ensemble;
pub mod meddp;
pub mod mpc;
pub mod mppi;
pub mod numdiff;
pub mod rng;
pub mod svddp;

pub use cost::{BarrierParams, Constraint, CostDerivatives, Problem, QuadraticCost};
pub use ddp::{GainSchedule, QuadraticModel, SolverConfig, Trajectory};
pub use dynamics::{Control, DynamicsModel, Linearization, State};
pub use ensemble::ParticleEnsemble;

/// Failures that can be reported by the solver layer (as opposed to contract
/// violations such as dimension mismatches, which panic).
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    /// Q_uu could not be made positive definite within the regularization ladder.
    #[error("backward pass failed: Q_uu not positive definite at t={t} with reg={reg}")]
    BackwardPass { t: usize, reg: f64 },
}
