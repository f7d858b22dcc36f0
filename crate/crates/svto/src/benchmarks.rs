//! Trajectory-optimization benchmark presets for the three systems.
//!
//! The car task drives straight at a pocket of overlapping circles that
//! opens toward the start; the initial rollout pierces the pocket, plain DDP
//! refines into the cul-de-sac, and only the exploring solvers find the way
//! around. The quadrotor and arm tasks are reaching problems with a single
//! obstacle near the path.

use crate::cost::{BarrierParams, Constraint, Problem, QuadraticCost};
use crate::ddp::{self, Trajectory};
use crate::dynamics::{Car2d, Control, DynamicsModel, Quadrotor, SevenDofArm, State};
use nalgebra::{DVector, Vector2, Vector3};
use std::sync::Arc;

/// A TO benchmark: the problem, its planning horizon, and the nominal
/// initial rollout the solvers start from.
pub struct ToBenchmark {
    pub problem: Problem,
    pub horizon: usize,
    pub x0: State,
    pub u0: Control,
}

impl ToBenchmark {
    pub fn initial_trajectory(&self) -> Trajectory {
        ddp::rollout(&self.problem, &self.x0, &vec![self.u0.clone(); self.horizon])
    }

    /// Override the barrier parameters (the benchmarks carry their own
    /// defaults).
    pub fn with_barrier(mut self, barrier: BarrierParams) -> Self {
        self.problem.barrier = barrier;
        self
    }
}

/// 2D-car pocket problem: reach (5,5) from a heading-aligned start whose
/// straight-line rollout drives into a U-shaped obstacle cluster.
pub fn car_pocket() -> ToBenchmark {
    let model = Arc::new(Car2d::default());
    let cost = QuadraticCost::new(
        DVector::from_vec(vec![0.05, 0.05, 0.0]),
        DVector::from_vec(vec![0.02, 0.005]),
        DVector::from_vec(vec![20.0, 20.0, 0.0]),
        DVector::from_vec(vec![5.0, 5.0, 0.0]),
    );
    // Tightly overlapped wall across the diagonal with wings folding back
    // toward the start: the junction "waists" are deep enough that cutting
    // through never pays.
    let obstacles = vec![
        Constraint::circle(Vector2::new(2.5, 2.5), 0.65, 0.05),
        Constraint::circle(Vector2::new(2.11, 2.89), 0.65, 0.05),
        Constraint::circle(Vector2::new(2.89, 2.11), 0.65, 0.05),
        Constraint::circle(Vector2::new(1.72, 3.28), 0.65, 0.05),
        Constraint::circle(Vector2::new(3.28, 1.72), 0.65, 0.05),
        Constraint::circle(Vector2::new(1.19, 3.03), 0.65, 0.05),
        Constraint::circle(Vector2::new(3.03, 1.19), 0.65, 0.05),
        Constraint::circle(Vector2::new(0.66, 2.71), 0.65, 0.05),
        Constraint::circle(Vector2::new(2.71, 0.66), 0.65, 0.05),
    ];
    // Stronger barrier than the MPC default: crossing the pocket wall must
    // never beat retreating to its inside.
    let problem = Problem::new(model, cost, obstacles, BarrierParams::new(1.0, 0.05));
    ToBenchmark {
        problem,
        horizon: 200,
        x0: DVector::from_vec(vec![0.0, 0.0, std::f64::consts::FRAC_PI_4]),
        u0: DVector::from_vec(vec![2.5, 0.0]),
    }
}

/// Quadrotor reaching task: fly from hover at the origin to (3, 0, 3) past a
/// cylindrical obstacle.
pub fn quadrotor_reach() -> ToBenchmark {
    let model: Arc<Quadrotor> = Arc::new(Quadrotor::default());
    let u0 = model.neutral_control();
    let mut x_goal = DVector::zeros(12);
    x_goal[0] = 3.0;
    x_goal[2] = 3.0;
    let mut p = DVector::zeros(12);
    let mut qf = DVector::zeros(12);
    for i in 0..3 {
        p[i] = 0.05;
        p[3 + i] = 0.5;
        p[6 + i] = 0.05;
        p[9 + i] = 0.05;
        qf[i] = 20.0;
        qf[3 + i] = 2.0;
        qf[6 + i] = 2.0;
        qf[9 + i] = 1.0;
    }
    let cost = QuadraticCost::new(p, DVector::from_element(4, 0.02), qf, x_goal);
    let obstacles = vec![Constraint::cylinder(Vector3::new(1.5, 0.0, 1.5), 1, 0.6, 0.05)];
    let problem = Problem::new(model, cost, obstacles, BarrierParams::default());
    ToBenchmark { problem, horizon: 150, x0: DVector::zeros(12), u0 }
}

/// 7-DoF arm reaching task: move the end effector to a workspace point past
/// a vertical cylindrical obstacle. Controls are joint accelerations.
pub fn arm_reach() -> ToBenchmark {
    let model = Arc::new(SevenDofArm::default());
    let x0 = model.state_from(&[0.0; 7], &[0.0; 7]);
    let target = Vector3::new(0.4, 1.6, 0.5);
    let mut x_goal = DVector::zeros(17);
    x_goal[14] = target.x;
    x_goal[15] = target.y;
    x_goal[16] = target.z;
    let mut p = DVector::zeros(17);
    let mut qf = DVector::zeros(17);
    for i in 0..7 {
        p[7 + i] = 0.01; // joint velocity damping
        qf[7 + i] = 1.0;
    }
    for i in 14..17 {
        p[i] = 0.5;
        qf[i] = 50.0;
    }
    let cost = QuadraticCost::new(p, DVector::from_element(7, 0.01), qf, x_goal);
    let obstacles = vec![Constraint::cylinder(Vector3::new(1.3, 0.9, 0.0), 2, 0.25, 0.05)];
    let problem = Problem::new(model, cost, obstacles, BarrierParams::default());
    ToBenchmark { problem, horizon: 120, x0, u0: DVector::zeros(7) }
}
