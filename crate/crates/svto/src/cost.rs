//! Task costs, constraints, and the relaxed log-barrier penalty.
//!
//! The objective is the quadratic tracking cost
//!
//! ```text
//! J = Σ_t [ ½ uₜ'R uₜ + ½ (xₜ-x_g)'P (xₜ-x_g) ] + ½ (x_T-x_g)'Q_f (x_T-x_g)
//! ```
//!
//! plus, for every scalar constraint g(y) ≤ 0 with y = (x, u), the relaxed
//! log barrier
//!
//! ```text
//! P_r(g) = −μ ln(−g)                               for g ≤ −δ
//!          μ [ ½( ((g+2δ)/δ)² − 1 ) − ln δ ]       for g > −δ
//! ```
//!
//! which is finite for every finite g (so infeasible iterates are admissible)
//! and C¹ across the branch point. Barrier Hessians keep only the
//! positive-semidefinite outer-product term, dropping the constraint
//! curvature term (Gauss-Newton conditioning).

use crate::dynamics::{Control, DynamicsModel, State};
use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Diagonal quadratic tracking cost toward `x_goal`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    /// Running state weight (diagonal, entries ≥ 0).
    pub p_diag: DVector<f64>,
    /// Control weight (diagonal, entries > 0).
    pub r_diag: DVector<f64>,
    /// Terminal state weight (diagonal, entries ≥ 0).
    pub qf_diag: DVector<f64>,
    pub x_goal: State,
}

impl QuadraticCost {
    pub fn new(p_diag: DVector<f64>, r_diag: DVector<f64>, qf_diag: DVector<f64>, x_goal: State) -> Self {
        assert_eq!(p_diag.len(), x_goal.len());
        assert_eq!(qf_diag.len(), x_goal.len());
        assert!(p_diag.iter().all(|&v| v >= 0.0), "P must be nonnegative");
        assert!(qf_diag.iter().all(|&v| v >= 0.0), "Qf must be nonnegative");
        assert!(r_diag.iter().all(|&v| v > 0.0), "R must be strictly positive");
        Self { p_diag, r_diag, qf_diag, x_goal }
    }

    /// Running cost ½u'Ru + ½(x−x_g)'P(x−x_g).
    pub fn stage(&self, x: &State, u: &Control) -> f64 {
        let mut c = 0.0;
        for i in 0..u.len() {
            c += 0.5 * self.r_diag[i] * u[i] * u[i];
        }
        for i in 0..x.len() {
            let e = x[i] - self.x_goal[i];
            c += 0.5 * self.p_diag[i] * e * e;
        }
        c
    }

    /// Terminal cost ½(x−x_g)'Q_f(x−x_g).
    pub fn terminal(&self, x: &State) -> f64 {
        let mut c = 0.0;
        for i in 0..x.len() {
            let e = x[i] - self.x_goal[i];
            c += 0.5 * self.qf_diag[i] * e * e;
        }
        c
    }
}

/// Relaxed log-barrier parameters: penalty weight μ and relaxation width δ.
///
/// μ is held fixed across a solve. μ = 0 disables the barrier entirely
/// (useful for testing the quadratic-cost limit).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BarrierParams {
    pub mu: f64,
    pub delta: f64,
}

impl BarrierParams {
    pub fn new(mu: f64, delta: f64) -> Self {
        assert!(mu >= 0.0 && delta > 0.0, "need mu >= 0 and delta > 0");
        Self { mu, delta }
    }
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self { mu: 0.1, delta: 0.05 }
    }
}

/// Relaxed log barrier value. Total on all finite g.
pub fn relaxed_barrier(g: f64, p: &BarrierParams) -> f64 {
    if g <= -p.delta {
        -p.mu * (-g).ln()
    } else {
        let s = (g + 2.0 * p.delta) / p.delta;
        p.mu * (0.5 * (s * s - 1.0) - p.delta.ln())
    }
}

/// First derivative dP_r/dg.
pub fn relaxed_barrier_d1(g: f64, p: &BarrierParams) -> f64 {
    if g <= -p.delta {
        -p.mu / g
    } else {
        p.mu * (g + 2.0 * p.delta) / (p.delta * p.delta)
    }
}

/// Second derivative d²P_r/dg² (exactly the term kept by the Gauss-Newton
/// Hessian; it is positive on both branches).
pub fn relaxed_barrier_d2(g: f64, p: &BarrierParams) -> f64 {
    if g <= -p.delta {
        p.mu / (g * g)
    } else {
        p.mu / (p.delta * p.delta)
    }
}

/// Gradient and Gauss-Newton Hessian of the barrier composed with one scalar
/// constraint: grad = P'(g)·g_y, hess = P''(g)·g_y g_y'. The curvature term
/// P'(g)·g_yy is dropped on both branches so the Hessian contribution stays
/// PSD.
pub fn barrier_derivatives(
    g: f64,
    g_y: &DVector<f64>,
    p: &BarrierParams,
) -> (DVector<f64>, DMatrix<f64>) {
    let d1 = relaxed_barrier_d1(g, p);
    let d2 = relaxed_barrier_d2(g, p);
    let grad = g_y * d1;
    let hess = g_y * g_y.transpose() * d2;
    (grad, hess)
}

/// Obstacle geometry or control-limit constraint, `g ≤ 0` feasible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Constraint {
    /// Circular obstacle in the 2D workspace: g = (r+margin)² − ‖p−c‖².
    Circle { center: [f64; 2], radius: f64, margin: f64 },
    /// Cylindrical obstacle whose axis is aligned with workspace coordinate
    /// `axis`; distance is measured in the two remaining coordinates.
    Cylinder { center: [f64; 3], axis: usize, radius: f64, margin: f64 },
    /// Box bounds on the control: two one-sided terms per channel,
    /// u_i − hi ≤ 0 and lo − u_i ≤ 0.
    ControlBound { lower: Vec<f64>, upper: Vec<f64> },
}

impl Constraint {
    pub fn circle(center: Vector2<f64>, radius: f64, margin: f64) -> Self {
        assert!(radius > 0.0 && margin >= 0.0);
        Constraint::Circle { center: [center.x, center.y], radius, margin }
    }

    pub fn cylinder(center: Vector3<f64>, axis: usize, radius: f64, margin: f64) -> Self {
        assert!(radius > 0.0 && margin >= 0.0 && axis < 3);
        Constraint::Cylinder { center: [center.x, center.y, center.z], axis, radius, margin }
    }

    fn is_obstacle(&self) -> bool {
        !matches!(self, Constraint::ControlBound { .. })
    }

    /// Planar coordinates and center used for the distance computation, given
    /// the model's workspace position.
    fn planar(&self, pos: &[f64]) -> ([f64; 2], [f64; 2]) {
        match self {
            Constraint::Circle { center, .. } => {
                assert!(pos.len() >= 2, "circle constraint needs a 2D position");
                ([pos[0], pos[1]], *center)
            }
            Constraint::Cylinder { center, axis, .. } => {
                assert_eq!(pos.len(), 3, "cylinder constraint needs a 3D position");
                let (i, j) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                ([pos[i], pos[j]], [center[i], center[j]])
            }
            Constraint::ControlBound { .. } => unreachable!("control bound has no geometry"),
        }
    }

    /// Signed violation r² − ‖c−p‖² at the *true* radius (no margin):
    /// positive inside the obstacle. Used by the benchmark metrics.
    pub fn violation(&self, pos: &[f64]) -> f64 {
        let radius = match self {
            Constraint::Circle { radius, .. } | Constraint::Cylinder { radius, .. } => *radius,
            Constraint::ControlBound { .. } => return f64::NEG_INFINITY,
        };
        let (p, c) = self.planar(pos);
        let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        radius * radius - d2
    }

    /// Barrier-side constraint value at the inflated radius (r + margin),
    /// saturated at a sensing shell: beyond `SENSING_SHELL` of clearance the
    /// value is held constant, so distant obstacles exert no force on the
    /// optimizer (the log tail would otherwise act as a long-range repulsor
    /// that can overwhelm the tracking cost in cluttered fields). Returns
    /// the saturated value and whether the obstacle is inside the shell
    /// (i.e. its gradient is nonzero).
    fn barrier_value(&self, pos: &[f64]) -> (f64, bool) {
        let (radius, margin) = match self {
            Constraint::Circle { radius, margin, .. }
            | Constraint::Cylinder { radius, margin, .. } => (*radius, *margin),
            Constraint::ControlBound { .. } => unreachable!(),
        };
        let (p, c) = self.planar(pos);
        let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
        let r = radius + margin;
        let g = r * r - d2;
        let s = SENSING_SHELL;
        let g_floor = -(2.0 * r * s + s * s);
        if g <= g_floor {
            (g_floor, false)
        } else {
            (g, true)
        }
    }
}

/// Clearance beyond which obstacle barriers are saturated (no gradient).
pub const SENSING_SHELL: f64 = 0.5;

/// Per-timestep cost expansion: value, gradients, and Hessians used by the
/// DDP backward pass.
#[derive(Debug, Clone)]
pub struct CostDerivatives {
    pub l: f64,
    pub l_x: DVector<f64>,
    pub l_u: DVector<f64>,
    pub l_xx: DMatrix<f64>,
    pub l_ux: DMatrix<f64>,
    pub l_uu: DMatrix<f64>,
}

/// A complete trajectory-optimization problem: dynamics, quadratic cost,
/// constraints, and barrier parameters.
#[derive(Clone)]
pub struct Problem {
    pub model: Arc<dyn DynamicsModel>,
    pub cost: QuadraticCost,
    pub constraints: Vec<Constraint>,
    pub barrier: BarrierParams,
}

impl Problem {
    /// Builds a problem and appends the model's control bounds as barrier
    /// constraints.
    pub fn new(
        model: Arc<dyn DynamicsModel>,
        cost: QuadraticCost,
        mut constraints: Vec<Constraint>,
        barrier: BarrierParams,
    ) -> Self {
        let (lo, hi) = model.control_bounds();
        constraints.push(Constraint::ControlBound {
            lower: lo.as_slice().to_vec(),
            upper: hi.as_slice().to_vec(),
        });
        Self { model, cost, constraints, barrier }
    }

    /// Builds a problem without control-limit barriers (obstacles only).
    pub fn unbounded(
        model: Arc<dyn DynamicsModel>,
        cost: QuadraticCost,
        constraints: Vec<Constraint>,
        barrier: BarrierParams,
    ) -> Self {
        Self { model, cost, constraints, barrier }
    }

    fn position<'a>(&self, x: &'a State) -> &'a [f64] {
        &x.as_slice()[self.model.position_range()]
    }

    /// Sum of relaxed barriers at one stage (obstacles on x, bounds on u).
    pub fn barrier_stage(&self, x: &State, u: &Control) -> f64 {
        if self.barrier.mu == 0.0 {
            return 0.0;
        }
        let pos = self.position(x);
        let mut total = 0.0;
        for con in &self.constraints {
            match con {
                Constraint::ControlBound { lower, upper } => {
                    for i in 0..u.len() {
                        total += relaxed_barrier(u[i] - upper[i], &self.barrier);
                        total += relaxed_barrier(lower[i] - u[i], &self.barrier);
                    }
                }
                _ => total += relaxed_barrier(con.barrier_value(pos).0, &self.barrier),
            }
        }
        total
    }

    /// Terminal barrier: obstacle terms only (there is no terminal control).
    pub fn barrier_terminal(&self, x: &State) -> f64 {
        if self.barrier.mu == 0.0 {
            return 0.0;
        }
        let pos = self.position(x);
        self.constraints
            .iter()
            .filter(|c| c.is_obstacle())
            .map(|c| relaxed_barrier(c.barrier_value(pos).0, &self.barrier))
            .sum()
    }

    /// Total cost of a state/control sequence: quadratic cost plus summed
    /// barriers. Returns +∞ if any entry is non-finite, which the line
    /// searches treat as a rejection.
    pub fn total_cost(&self, states: &[State], controls: &[Control]) -> f64 {
        assert_eq!(states.len(), controls.len() + 1);
        let mut total = 0.0;
        for (x, u) in states.iter().zip(controls.iter()) {
            if !x.iter().all(|v| v.is_finite()) || !u.iter().all(|v| v.is_finite()) {
                return f64::INFINITY;
            }
            total += self.cost.stage(x, u) + self.barrier_stage(x, u);
        }
        let x_t = states.last().unwrap();
        if !x_t.iter().all(|v| v.is_finite()) {
            return f64::INFINITY;
        }
        total += self.cost.terminal(x_t) + self.barrier_terminal(x_t);
        if total.is_nan() {
            f64::INFINITY
        } else {
            total
        }
    }

    /// Largest obstacle violation (true radius, no margin) at a state;
    /// ≤ 0 when feasible.
    pub fn max_violation(&self, x: &State) -> f64 {
        let pos = self.position(x);
        self.constraints
            .iter()
            .filter(|c| c.is_obstacle())
            .map(|c| c.violation(pos))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stage cost expansion: quadratic terms plus barrier gradients/GN
    /// Hessians accumulated into (l_x, l_u, l_xx, l_ux, l_uu).
    pub fn stage_derivatives(&self, x: &State, u: &Control) -> CostDerivatives {
        let n_x = x.len();
        let n_u = u.len();
        let mut d = CostDerivatives {
            l: self.cost.stage(x, u) + self.barrier_stage(x, u),
            l_x: DVector::zeros(n_x),
            l_u: DVector::zeros(n_u),
            l_xx: DMatrix::zeros(n_x, n_x),
            l_ux: DMatrix::zeros(n_u, n_x),
            l_uu: DMatrix::zeros(n_u, n_u),
        };
        for i in 0..n_x {
            let e = x[i] - self.cost.x_goal[i];
            d.l_x[i] = self.cost.p_diag[i] * e;
            d.l_xx[(i, i)] = self.cost.p_diag[i];
        }
        for i in 0..n_u {
            d.l_u[i] = self.cost.r_diag[i] * u[i];
            d.l_uu[(i, i)] = self.cost.r_diag[i];
        }
        if self.barrier.mu == 0.0 {
            return d;
        }

        let range = self.model.position_range();
        let pos = self.position(x);
        for con in &self.constraints {
            match con {
                Constraint::ControlBound { lower, upper } => {
                    for i in 0..n_u {
                        // g = u_i − hi: g_u = e_i
                        let g = u[i] - upper[i];
                        d.l_u[i] += relaxed_barrier_d1(g, &self.barrier);
                        d.l_uu[(i, i)] += relaxed_barrier_d2(g, &self.barrier);
                        // g = lo − u_i: g_u = −e_i
                        let g = lower[i] - u[i];
                        d.l_u[i] -= relaxed_barrier_d1(g, &self.barrier);
                        d.l_uu[(i, i)] += relaxed_barrier_d2(g, &self.barrier);
                    }
                }
                _ => {
                    let (g, active) = con.barrier_value(pos);
                    if !active {
                        continue;
                    }
                    let (p, c) = con.planar(pos);
                    // g_x is −2(p−c) on the two active position coordinates.
                    let (gi, gj) = planar_indices(con, &range);
                    let gx_i = -2.0 * (p[0] - c[0]);
                    let gx_j = -2.0 * (p[1] - c[1]);
                    let d1 = relaxed_barrier_d1(g, &self.barrier);
                    let d2 = relaxed_barrier_d2(g, &self.barrier);
                    d.l_x[gi] += d1 * gx_i;
                    d.l_x[gj] += d1 * gx_j;
                    d.l_xx[(gi, gi)] += d2 * gx_i * gx_i;
                    d.l_xx[(gi, gj)] += d2 * gx_i * gx_j;
                    d.l_xx[(gj, gi)] += d2 * gx_j * gx_i;
                    d.l_xx[(gj, gj)] += d2 * gx_j * gx_j;
                }
            }
        }
        d
    }

    /// Terminal cost expansion (quadratic + obstacle barriers).
    pub fn terminal_derivatives(&self, x: &State) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n_x = x.len();
        let l = self.cost.terminal(x) + self.barrier_terminal(x);
        let mut l_x = DVector::zeros(n_x);
        let mut l_xx = DMatrix::zeros(n_x, n_x);
        for i in 0..n_x {
            let e = x[i] - self.cost.x_goal[i];
            l_x[i] = self.cost.qf_diag[i] * e;
            l_xx[(i, i)] = self.cost.qf_diag[i];
        }
        if self.barrier.mu == 0.0 {
            return (l, l_x, l_xx);
        }
        let range = self.model.position_range();
        let pos = self.position(x);
        for con in self.constraints.iter().filter(|c| c.is_obstacle()) {
            let (g, active) = con.barrier_value(pos);
            if !active {
                continue;
            }
            let (p, c) = con.planar(pos);
            let (gi, gj) = planar_indices(con, &range);
            let gx_i = -2.0 * (p[0] - c[0]);
            let gx_j = -2.0 * (p[1] - c[1]);
            let d1 = relaxed_barrier_d1(g, &self.barrier);
            let d2 = relaxed_barrier_d2(g, &self.barrier);
            l_x[gi] += d1 * gx_i;
            l_x[gj] += d1 * gx_j;
            l_xx[(gi, gi)] += d2 * gx_i * gx_i;
            l_xx[(gi, gj)] += d2 * gx_i * gx_j;
            l_xx[(gj, gi)] += d2 * gx_j * gx_i;
            l_xx[(gj, gj)] += d2 * gx_j * gx_j;
        }
        (l, l_x, l_xx)
    }
}

/// State indices of the two position coordinates a planar constraint acts on.
fn planar_indices(con: &Constraint, range: &std::ops::Range<usize>) -> (usize, usize) {
    match con {
        Constraint::Circle { .. } => (range.start, range.start + 1),
        Constraint::Cylinder { axis, .. } => {
            let (i, j) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            (range.start + i, range.start + j)
        }
        Constraint::ControlBound { .. } => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Car2d;
    use crate::numdiff;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn car_problem(constraints: Vec<Constraint>, barrier: BarrierParams) -> Problem {
        let model = Arc::new(Car2d::default());
        let cost = QuadraticCost::new(
            DVector::from_vec(vec![0.1, 0.1, 0.0]),
            DVector::from_vec(vec![0.01, 0.01]),
            DVector::from_vec(vec![10.0, 10.0, 0.1]),
            DVector::from_vec(vec![5.0, 5.0, 0.0]),
        );
        Problem::unbounded(model, cost, constraints, barrier)
    }

    #[test]
    fn stage_cost_zero_at_goal() {
        let p = car_problem(vec![], BarrierParams::new(0.0, 0.05));
        let x = p.cost.x_goal.clone();
        assert_eq!(p.cost.stage(&x, &DVector::zeros(2)), 0.0);
    }

    #[test]
    fn stage_cost_scalar_arithmetic() {
        // P = 2, x − x_g = 3, R = 1, u = 1 → ½·1 + ½·2·9 = 9.5
        let cost = QuadraticCost::new(
            DVector::from_vec(vec![2.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![0.0]),
        );
        let c = cost.stage(&DVector::from_vec(vec![3.0]), &DVector::from_vec(vec![1.0]));
        assert_relative_eq!(c, 9.5, epsilon = 1e-15);
    }

    #[test]
    fn stage_cost_invariant_under_coordinate_permutation() {
        let make = |p: Vec<f64>, x: Vec<f64>| {
            QuadraticCost::new(
                DVector::from_vec(p),
                DVector::from_vec(vec![1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
                DVector::zeros(2),
            )
            .stage(&DVector::from_vec(x), &DVector::from_vec(vec![0.3]))
        };
        let a = make(vec![2.0, 5.0], vec![1.0, -0.7]);
        let b = make(vec![5.0, 2.0], vec![-0.7, 1.0]);
        assert_relative_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn barrier_branches_agree_at_boundary() {
        let p = BarrierParams::new(1.0, 0.3);
        let g = -p.delta;
        let log_side = -p.mu * (-g).ln();
        let s = (g + 2.0 * p.delta) / p.delta;
        let quad_side = p.mu * (0.5 * (s * s - 1.0) - p.delta.ln());
        assert_relative_eq!(log_side, quad_side, epsilon = 1e-15);
        assert_relative_eq!(relaxed_barrier(g, &p), log_side, epsilon = 1e-15);
    }

    #[test]
    fn barrier_arithmetic_examples() {
        // μ=1, δ=1, g=0 → ½(2²−1) − ln 1 = 1.5
        let p = BarrierParams::new(1.0, 1.0);
        assert_relative_eq!(relaxed_barrier(0.0, &p), 1.5, epsilon = 1e-15);
        // μ=1, δ=0.1, g=−1 → −ln 1 = 0
        let p = BarrierParams::new(1.0, 0.1);
        assert_relative_eq!(relaxed_barrier(-1.0, &p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn barrier_is_c1_at_100_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = BarrierParams::new(rng.random_range(0.01..10.0), rng.random_range(0.01..1.0));
            let g = -p.delta;
            let s = (g + 2.0 * p.delta) / p.delta;
            let quad_val = p.mu * (0.5 * (s * s - 1.0) - p.delta.ln());
            let log_val = -p.mu * (-g).ln();
            assert_relative_eq!(quad_val, log_val, max_relative = 1e-12);
            // First derivatives: μ/δ from both branches.
            let log_d1 = -p.mu / g;
            let quad_d1 = p.mu * (g + 2.0 * p.delta) / (p.delta * p.delta);
            assert_relative_eq!(log_d1, quad_d1, max_relative = 1e-12);
            assert_relative_eq!(relaxed_barrier_d1(g, &p), log_d1, max_relative = 1e-12);
        }
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = BarrierParams::new(rng.random_range(0.05..2.0), rng.random_range(0.05..0.5));
            let g = rng.random_range(-2.0..1.0);
            let fd = {
                let h = 1e-6;
                (relaxed_barrier(g + h, &p) - relaxed_barrier(g - h, &p)) / (2.0 * h)
            };
            assert_relative_eq!(relaxed_barrier_d1(g, &p), fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn barrier_hessian_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = BarrierParams::new(rng.random_range(0.05..2.0), rng.random_range(0.05..0.5));
            let g = rng.random_range(-2.0..1.0);
            let g_y = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            let (_, hess) = barrier_derivatives(g, &g_y, &p);
            let eigs = hess.symmetric_eigenvalues();
            assert!(eigs.iter().all(|&e| e >= -1e-10), "negative eigenvalue: {eigs}");
        }
    }

    #[test]
    fn constraint_violation_examples() {
        let con = Constraint::circle(Vector2::new(0.0, 0.0), 1.0, 0.0);
        assert_relative_eq!(con.violation(&[0.0, 0.0]), 1.0);
        assert_relative_eq!(con.violation(&[1.0, 0.0]), 0.0);
        assert_relative_eq!(con.violation(&[2.0, 0.0]), -3.0);
    }

    #[test]
    fn total_cost_zero_when_pinned_at_goal() {
        let p = car_problem(vec![], BarrierParams::new(0.0, 0.05));
        let goal = p.cost.x_goal.clone();
        let states = vec![goal.clone(), goal.clone(), goal];
        let controls = vec![DVector::zeros(2), DVector::zeros(2)];
        assert_eq!(p.total_cost(&states, &controls), 0.0);
    }

    #[test]
    fn vanishing_mu_leaves_cost_unchanged() {
        // Constraint far away (g < −δ everywhere); as μ→0, the barrier
        // contribution vanishes.
        let far = Constraint::circle(Vector2::new(100.0, 100.0), 1.0, 0.0);
        let base = car_problem(vec![], BarrierParams::new(0.0, 0.05));
        let with = car_problem(vec![far], BarrierParams::new(1e-14, 0.05));
        let states = vec![DVector::zeros(3), DVector::zeros(3)];
        let controls = vec![DVector::from_vec(vec![0.5, 0.1])];
        let a = base.total_cost(&states, &controls);
        let b = with.total_cost(&states, &controls);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn non_finite_state_marks_cost_non_finite() {
        let p = car_problem(vec![], BarrierParams::default());
        let mut bad = DVector::zeros(3);
        bad[1] = f64::NAN;
        let states = vec![DVector::zeros(3), bad];
        let controls = vec![DVector::zeros(2)];
        assert!(!p.total_cost(&states, &controls).is_finite());
    }

    #[test]
    fn stage_derivative_gradients_match_finite_differences() {
        let con = Constraint::circle(Vector2::new(1.0, 1.0), 0.8, 0.05);
        let p = Problem::new(
            Arc::new(Car2d::default()),
            car_problem(vec![], BarrierParams::default()).cost,
            vec![con],
            BarrierParams::default(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-0.5..2.5));
            let u = DVector::from_fn(2, |_, _| rng.random_range(-1.5..1.5));
            let d = p.stage_derivatives(&x, &u);
            let fd_x = numdiff::gradient_central(
                |xp| p.cost.stage(xp, &u) + p.barrier_stage(xp, &u),
                &x,
                1e-6,
            );
            let fd_u = numdiff::gradient_central(
                |up| p.cost.stage(&x, up) + p.barrier_stage(&x, up),
                &u,
                1e-6,
            );
            assert!((d.l_x - fd_x).amax() < 1e-4);
            assert!((d.l_u - fd_u).amax() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn barrier_finite_monotone_convex(
            mu in 0.01f64..5.0,
            delta in 0.01f64..1.0,
            g in -50.0f64..50.0,
            dg in 0.001f64..1.0,
        ) {
            let p = BarrierParams::new(mu, delta);
            let v0 = relaxed_barrier(g, &p);
            let v1 = relaxed_barrier(g + dg, &p);
            prop_assert!(v0.is_finite() && v1.is_finite());
            // Monotonically increasing in g.
            prop_assert!(v1 >= v0);
            // Convex: second derivative positive on both branches.
            prop_assert!(relaxed_barrier_d2(g, &p) > 0.0);
        }
    }
}
