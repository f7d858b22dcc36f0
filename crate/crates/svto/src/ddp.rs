//! Deterministic DDP (Gauss-Newton / iLQR form): quadratic expansion of the
//! Q function along a nominal trajectory, regularized backward recursion for
//! gains, and a backtracking forward pass.

use crate::cost::Problem;
use crate::dynamics::{Control, State};
use crate::SolverError;
use nalgebra::{DMatrix, DVector};

/// A dynamically feasible trajectory with its total cost.
///
/// Invariant for trajectories produced by the solvers: `states[t+1]` is the
/// exact `step(states[t], controls[t])` (states are always re-propagated,
/// never patched algebraically), and `cost` is `total_cost` of the sequences.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub cost: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

/// Per-timestep Q-function derivatives and value derivatives from one
/// backward pass. `q_uu` is stored after regularization (positive definite).
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub q_x: Vec<DVector<f64>>,
    pub q_u: Vec<DVector<f64>>,
    pub q_xx: Vec<DMatrix<f64>>,
    pub q_ux: Vec<DMatrix<f64>>,
    pub q_uu: Vec<DMatrix<f64>>,
    /// Value gradient, length T+1 (terminal entry included).
    pub v_x: Vec<DVector<f64>>,
    /// Value Hessian, length T+1.
    pub v_xx: Vec<DMatrix<f64>>,
}

/// Feedforward and feedback gains per timestep: δu* = κ_t + K_t δx.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub kappa: Vec<Control>,
    pub feedback: Vec<DMatrix<f64>>,
}

/// DDP iteration parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub reg_init: f64,
    pub reg_min: f64,
    pub reg_max: f64,
    /// Backtracking multipliers for the forward pass, descending in (0, 1].
    pub line_search_steps: Vec<f64>,
    /// Stop when an accepted iteration decreases the cost by less than this.
    pub convergence_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            reg_init: 0.0,
            reg_min: 0.0,
            reg_max: 1e6,
            line_search_steps: (0..=10).map(|k| 0.5f64.powi(k)).collect(),
            convergence_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    /// Next rung of the regularization ladder (×10, entering at 1e-9,
    /// capped at `reg_max`).
    pub fn raise_reg(&self, reg: f64) -> f64 {
        let next = if reg <= 0.0 {
            1e-9f64.max(self.reg_min)
        } else {
            reg * 10.0
        };
        next.min(self.reg_max)
    }

    /// Relax regularization after an accepted step (÷10, dropping to
    /// `reg_min` below 1e-9).
    pub fn lower_reg(&self, reg: f64) -> f64 {
        let r = reg / 10.0;
        if r < 1e-9 {
            self.reg_min
        } else {
            r
        }
    }
}

/// Result of one backward pass.
pub struct BackwardPass {
    pub qmodel: QuadraticModel,
    pub gains: GainSchedule,
    /// −Σ(κ'Q_u + ½κ'Q_uuκ): the model-predicted cost decrease at full step.
    pub expected_reduction: f64,
}

/// Backward recursion over the nominal trajectory. Q_uu is regularized by
/// `reg·I`; if the Cholesky factorization fails at any timestep the pass
/// reports failure so the caller can raise `reg` and retry.
pub fn backward_pass(
    problem: &Problem,
    traj: &Trajectory,
    reg: f64,
) -> Result<BackwardPass, SolverError> {
    let t_len = traj.horizon();
    let n_x = problem.model.state_dim();
    let n_u = problem.model.control_dim();

    let (_, vx_t, vxx_t) = problem.terminal_derivatives(&traj.states[t_len]);
    let mut v_x = vec![DVector::zeros(n_x); t_len + 1];
    let mut v_xx = vec![DMatrix::zeros(n_x, n_x); t_len + 1];
    v_x[t_len] = vx_t;
    v_xx[t_len] = vxx_t;

    let mut q_x = vec![DVector::zeros(0); t_len];
    let mut q_u = vec![DVector::zeros(0); t_len];
    let mut q_xx = vec![DMatrix::zeros(0, 0); t_len];
    let mut q_ux = vec![DMatrix::zeros(0, 0); t_len];
    let mut q_uu = vec![DMatrix::zeros(0, 0); t_len];
    let mut kappa = vec![DVector::zeros(0); t_len];
    let mut feedback = vec![DMatrix::zeros(0, 0); t_len];
    let mut expected_reduction = 0.0;

    for t in (0..t_len).rev() {
        let d = problem.stage_derivatives(&traj.states[t], &traj.controls[t]);
        let lin = problem.model.linearize(&traj.states[t], &traj.controls[t]);
        let fx_t = lin.f_x.transpose();
        let fu_t = lin.f_u.transpose();
        let vxx_next = &v_xx[t + 1];

        let qx = &d.l_x + &fx_t * &v_x[t + 1];
        let qu = &d.l_u + &fu_t * &v_x[t + 1];
        let qxx = &d.l_xx + &fx_t * vxx_next * &lin.f_x;
        let qux = &d.l_ux + &fu_t * vxx_next * &lin.f_x;
        let mut quu = &d.l_uu + &fu_t * vxx_next * &lin.f_u;
        for i in 0..n_u {
            quu[(i, i)] += reg;
        }
        // Symmetrize against drift before factorizing.
        quu = (&quu + quu.transpose()) * 0.5;

        // An exponentially unstable linearization (wild nominal) can
        // overflow the value recursion; report that as a pass failure
        // instead of letting non-finite gains escape.
        if !quu.iter().all(|v| v.is_finite()) || !qu.iter().all(|v| v.is_finite()) {
            return Err(SolverError::BackwardPass { t, reg });
        }
        let chol = match quu.clone().cholesky() {
            Some(c) => c,
            None => return Err(SolverError::BackwardPass { t, reg }),
        };
        let k_ff = -chol.solve(&qu);
        let k_fb = -chol.solve(&qux);
        if !k_ff.iter().all(|v| v.is_finite()) || !k_fb.iter().all(|v| v.is_finite()) {
            return Err(SolverError::BackwardPass { t, reg });
        }

        expected_reduction -= k_ff.dot(&qu) + 0.5 * (&quu * &k_ff).dot(&k_ff);

        v_x[t] = &qx + qux.transpose() * &k_ff;
        let vxx = &qxx + qux.transpose() * &k_fb;
        v_xx[t] = (&vxx + vxx.transpose()) * 0.5;

        q_x[t] = qx;
        q_u[t] = qu;
        q_xx[t] = qxx;
        q_ux[t] = qux;
        q_uu[t] = quu;
        kappa[t] = k_ff;
        feedback[t] = k_fb;
    }

    Ok(BackwardPass {
        qmodel: QuadraticModel { q_x, q_u, q_xx, q_ux, q_uu, v_x, v_xx },
        gains: GainSchedule { kappa, feedback },
        expected_reduction,
    })
}

/// Closed-loop rollout around a reference trajectory. `control_fn(t, δx)`
/// produces the control to apply at time t given the state deviation. If the
/// rollout produces a non-finite control or state, the remaining steps are
/// frozen and the returned cost is +∞ (callers backtrack on that).
pub fn closed_loop_rollout<F>(problem: &Problem, reference: &Trajectory, mut control_fn: F) -> Trajectory
where
    F: FnMut(usize, &DVector<f64>) -> Control,
{
    let t_len = reference.horizon();
    let n_u = problem.model.control_dim();
    let mut states = Vec::with_capacity(t_len + 1);
    let mut controls = Vec::with_capacity(t_len);
    let mut x = reference.states[0].clone();
    states.push(x.clone());
    let mut diverged = false;

    for t in 0..t_len {
        if diverged {
            controls.push(DVector::zeros(n_u));
            states.push(x.clone());
            continue;
        }
        let dx = &x - &reference.states[t];
        let u = control_fn(t, &dx);
        if !u.iter().all(|v| v.is_finite()) {
            diverged = true;
            controls.push(DVector::zeros(n_u));
            states.push(x.clone());
            continue;
        }
        let next = problem.model.step(&x, &u);
        controls.push(u);
        if next.iter().all(|v| v.is_finite()) {
            x = next;
            states.push(x.clone());
        } else {
            diverged = true;
            states.push(x.clone());
        }
    }

    let cost = if diverged {
        f64::INFINITY
    } else {
        problem.total_cost(&states, &controls)
    };
    Trajectory { states, controls, cost }
}

/// Open-loop rollout of a control sequence from `x0`.
pub fn rollout(problem: &Problem, x0: &State, controls: &[Control]) -> Trajectory {
    let reference = Trajectory {
        states: vec![x0.clone(); controls.len() + 1],
        controls: controls.to_vec(),
        cost: f64::INFINITY,
    };
    closed_loop_rollout(problem, &reference, |t, _| controls[t].clone())
}

/// Forward pass: u_t = ū_t + step_mult·κ_t + K_t(x_t − x̄_t), states
/// re-propagated through the dynamics.
pub fn forward_pass(
    problem: &Problem,
    traj: &Trajectory,
    gains: &GainSchedule,
    step_mult: f64,
) -> Trajectory {
    closed_loop_rollout(problem, traj, |t, dx| {
        &traj.controls[t] + &gains.kappa[t] * step_mult + &gains.feedback[t] * dx
    })
}

/// Outcome of one DDP iteration.
pub struct IterationResult {
    pub traj: Trajectory,
    pub gains: GainSchedule,
    pub qmodel: QuadraticModel,
    /// Whether the line search accepted a new trajectory.
    pub accepted: bool,
    /// The nominal is stationary (predicted reduction ≈ 0): the iterate is
    /// returned unchanged and the regularization is left alone.
    pub converged: bool,
}

/// One backward pass plus a backtracking forward pass. The accepted cost
/// never increases. A stationary nominal (the backward pass predicts no
/// reduction) is reported as converged without touching `reg`; a genuine
/// line-search exhaustion raises `reg` for the next attempt. Backward-pass
/// failures raise `reg` and retry within the call.
pub fn solve_one_iteration(
    problem: &Problem,
    traj: &Trajectory,
    config: &SolverConfig,
    reg: &mut f64,
) -> Result<IterationResult, SolverError> {
    loop {
        match backward_pass(problem, traj, *reg) {
            Ok(bp) => {
                let stationary = bp.expected_reduction <= 1e-10 * (1.0 + traj.cost.abs());
                if !stationary {
                    for &mult in &config.line_search_steps {
                        let candidate = forward_pass(problem, traj, &bp.gains, mult);
                        if candidate.cost.is_finite() && candidate.cost < traj.cost {
                            *reg = config.lower_reg(*reg);
                            return Ok(IterationResult {
                                traj: candidate,
                                gains: bp.gains,
                                qmodel: bp.qmodel,
                                accepted: true,
                                converged: false,
                            });
                        }
                    }
                    *reg = config.raise_reg(*reg);
                }
                return Ok(IterationResult {
                    traj: traj.clone(),
                    gains: bp.gains,
                    qmodel: bp.qmodel,
                    accepted: false,
                    converged: stationary,
                });
            }
            Err(e) => {
                if *reg >= config.reg_max {
                    return Err(e);
                }
                *reg = config.raise_reg(*reg);
            }
        }
    }
}

/// Full deterministic solve.
pub struct SolveResult {
    pub traj: Trajectory,
    pub gains: GainSchedule,
    pub qmodel: QuadraticModel,
    /// Accepted cost after each iteration (index 0 = initial cost).
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
}

/// Iterates DDP from an initial trajectory until the cost decrease falls
/// below `convergence_tol`, the regularization ladder is exhausted, or
/// `max_iters` is reached.
pub fn solve(problem: &Problem, initial: Trajectory, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    let mut reg = config.reg_init;
    let mut traj = initial;
    let mut cost_trace = vec![traj.cost];
    let mut last: Option<(GainSchedule, QuadraticModel)> = None;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        let prev_cost = traj.cost;
        let result = solve_one_iteration(problem, &traj, config, &mut reg)?;
        iterations += 1;
        traj = result.traj;
        cost_trace.push(traj.cost);
        let decrease = prev_cost - traj.cost;
        last = Some((result.gains, result.qmodel));
        // convergence_tol = 0 disables early stopping entirely (useful for
        // iterate-for-iterate comparisons against the ensemble solvers).
        if config.convergence_tol > 0.0 {
            if result.converged || (result.accepted && decrease.abs() < config.convergence_tol) {
                break;
            }
            if !result.accepted && !result.converged && reg >= config.reg_max {
                break;
            }
        }
    }

    let (gains, qmodel) = match last {
        Some(pair) => pair,
        None => {
            let bp = backward_pass(problem, &traj, reg)?;
            (bp.gains, bp.qmodel)
        }
    };
    Ok(SolveResult { traj, gains, qmodel, cost_trace, iterations })
}
