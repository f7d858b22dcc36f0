//! Discrete-time dynamics models `x_{t+1} = f(x_t, u_t)`.
//!
//! Three benchmark systems (planar car, quadrotor, 7-joint arm) plus a linear
//! system used by the LQ test problems. All models integrate their continuous
//! dynamics with one explicit Euler step of length `dt` and expose analytic
//! Jacobians of the discrete step.

use nalgebra::{DMatrix, DVector};
use std::ops::Range;

mod arm;
mod car;
mod linear;
mod quadrotor;

pub use arm::SevenDofArm;
pub use car::Car2d;
pub use linear::LinearSystem;
pub use quadrotor::Quadrotor;

/// State vector, dimension `n_x` of the owning model.
pub type State = DVector<f64>;
/// Control vector, dimension `n_u` of the owning model.
pub type Control = DVector<f64>;

/// Jacobians of the discrete step: `δx' ≈ f_x δx + f_u δu`.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `n_x × n_x` state Jacobian.
    pub f_x: DMatrix<f64>,
    /// `n_x × n_u` control Jacobian.
    pub f_u: DMatrix<f64>,
}

/// A discrete-time dynamics model.
///
/// Models are immutable after construction; `step` and `linearize` are pure
/// and safe to call from many workers concurrently. Control bounds are *not*
/// enforced inside `step` — they are handled by the cost layer (barriers) or
/// by sample clamping in MPPI.
pub trait DynamicsModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn dt(&self) -> f64;
    /// Elementwise control bounds `(lower, upper)`, `lower < upper`.
    fn control_bounds(&self) -> (&DVector<f64>, &DVector<f64>);
    /// One Euler step of the dynamics. Panics on dimension mismatch or
    /// non-finite input.
    fn step(&self, x: &State, u: &Control) -> State;
    /// Analytic Jacobians of `step` at `(x, u)`.
    fn linearize(&self, x: &State, u: &Control) -> Linearization;
    /// Range of state entries holding the workspace position used by obstacle
    /// constraints and reach metrics (car: (x, y); quadrotor: (x, y, z);
    /// arm: end-effector position).
    fn position_range(&self) -> Range<usize>;
    /// Control that holds the system still when possible (zeros for the car
    /// and arm, hover thrust for the quadrotor). Used to seed nominal
    /// control sequences.
    fn neutral_control(&self) -> Control {
        DVector::zeros(self.control_dim())
    }
    fn name(&self) -> &'static str;
}

impl dyn DynamicsModel {
    /// Workspace position slice of a state.
    pub fn position_of<'a>(&self, x: &'a State) -> &'a [f64] {
        &x.as_slice()[self.position_range()]
    }
}

/// Contract check shared by all models: dimensions must match and inputs must
/// be finite.
pub(crate) fn check_input(model: &dyn DynamicsModel, x: &State, u: &Control) {
    assert_eq!(
        x.len(),
        model.state_dim(),
        "{}: state dimension {} != n_x {}",
        model.name(),
        x.len(),
        model.state_dim()
    );
    assert_eq!(
        u.len(),
        model.control_dim(),
        "{}: control dimension {} != n_u {}",
        model.name(),
        u.len(),
        model.control_dim()
    );
    assert!(
        x.iter().all(|v| v.is_finite()) && u.iter().all(|v| v.is_finite()),
        "{}: non-finite input to dynamics",
        model.name()
    );
}
