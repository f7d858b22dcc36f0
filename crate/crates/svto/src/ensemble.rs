//! Mode ensembles: N trajectories optimized by DDP in parallel.
//!
//! Both the maximum-entropy solvers and the Stein variational solver drive
//! the same loop: every mode takes deterministic DDP iterations, and every
//! m-th iteration a perturbation round (sampling or kernel repulsion) is
//! applied to all modes except the best one, so the best cost is monotone.

use crate::cost::Problem;
use crate::ddp::{self, GainSchedule, QuadraticModel, SolverConfig, Trajectory};
use crate::dynamics::Control;
use crate::rng;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// One mode: a trajectory plus the gains and Q-model from its latest
/// backward pass, its own regularization state, and its own random stream.
pub struct Mode {
    pub traj: Trajectory,
    pub gains: Option<GainSchedule>,
    pub qmodel: Option<QuadraticModel>,
    pub reg: f64,
    pub rng: ChaCha8Rng,
}

impl Mode {
    /// Receding-horizon warm start: shift controls (and per-timestep solver
    /// data) by one step, repeat the last entry, and re-roll from `x0`.
    pub fn shift_for_mpc(&mut self, problem: &Problem, x0: &DVector<f64>) {
        let t_len = self.traj.horizon();
        let mut controls = Vec::with_capacity(t_len);
        for t in 1..t_len {
            controls.push(self.traj.controls[t].clone());
        }
        controls.push(self.traj.controls[t_len - 1].clone());
        self.traj = ddp::rollout(problem, x0, &controls);
        if let Some(g) = self.gains.as_mut() {
            g.kappa.rotate_left(1);
            let last = g.kappa.len() - 1;
            g.kappa[last] = DVector::zeros(problem.model.control_dim());
            g.feedback.rotate_left(1);
            g.feedback[last] = g.feedback[last.saturating_sub(1)].clone();
        }
        if let Some(q) = self.qmodel.as_mut() {
            let last = q.q_uu.len() - 1;
            q.q_x.rotate_left(1);
            q.q_u.rotate_left(1);
            q.q_xx.rotate_left(1);
            q.q_ux.rotate_left(1);
            q.q_uu.rotate_left(1);
            q.q_uu[last] = q.q_uu[last.saturating_sub(1)].clone();
        }
    }
}

/// N modes with the index of the current best (lowest-cost) one.
pub struct ParticleEnsemble {
    pub modes: Vec<Mode>,
    pub best_index: usize,
    /// Regularization value modes are reset to when a perturbation round
    /// replaces their trajectory (a fresh nominal is a fresh subproblem).
    pub reg_init: f64,
}

impl ParticleEnsemble {
    /// Initializes mode 0 from `initial` and modes 1..N by sampling control
    /// sequences u_t ~ N(ū_t, σ₀²·I) and rolling them out open loop. Each
    /// mode gets random stream `index` of `seed`.
    pub fn initialize(
        problem: &Problem,
        initial: Trajectory,
        n_modes: usize,
        sigma0: f64,
        reg_init: f64,
        seed: u64,
    ) -> Self {
        assert!(n_modes >= 1);
        let n_u = problem.model.control_dim();
        let x0 = initial.states[0].clone();
        let mut modes = Vec::with_capacity(n_modes);
        modes.push(Mode {
            traj: initial.clone(),
            gains: None,
            qmodel: None,
            reg: reg_init,
            rng: rng::stream(seed, 0),
        });
        for n in 1..n_modes {
            let mut mode_rng = rng::stream(seed, n as u64);
            // Retry non-finite rollouts a few times, then fall back to the
            // unperturbed controls.
            let mut traj = None;
            for _ in 0..20 {
                let controls: Vec<Control> = initial
                    .controls
                    .iter()
                    .map(|u| {
                        DVector::from_fn(n_u, |i, _| {
                            u[i] + sigma0 * mode_rng.sample::<f64, _>(StandardNormal)
                        })
                    })
                    .collect();
                let candidate = ddp::rollout(problem, &x0, &controls);
                if candidate.cost.is_finite() {
                    traj = Some(candidate);
                    break;
                }
            }
            modes.push(Mode {
                traj: traj.unwrap_or_else(|| initial.clone()),
                gains: None,
                qmodel: None,
                reg: reg_init,
                rng: mode_rng,
            });
        }
        let mut ens = Self { modes, best_index: 0, reg_init };
        ens.refresh_best();
        ens
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.traj.cost).collect()
    }

    pub fn best_cost(&self) -> f64 {
        self.modes[self.best_index].traj.cost
    }

    pub fn best(&self) -> &Mode {
        &self.modes[self.best_index]
    }

    /// Recomputes `best_index` (first index wins ties, so the reduction is
    /// deterministic).
    pub fn refresh_best(&mut self) {
        let mut best = 0;
        for (i, m) in self.modes.iter().enumerate() {
            if m.traj.cost < self.modes[best].traj.cost {
                best = i;
            }
        }
        self.best_index = best;
    }

    /// One DDP iteration on every mode, in parallel. A mode whose
    /// regularization ladder is exhausted keeps its trajectory.
    pub fn ddp_round(&mut self, problem: &Problem, config: &SolverConfig) {
        self.modes.par_iter_mut().for_each(|mode| {
            let mut reg = mode.reg;
            match ddp::solve_one_iteration(problem, &mode.traj, config, &mut reg) {
                Ok(result) => {
                    mode.traj = result.traj;
                    mode.gains = Some(result.gains);
                    mode.qmodel = Some(result.qmodel);
                    mode.reg = reg;
                }
                Err(_) => {
                    mode.reg = config.reg_init;
                }
            }
        });
        self.refresh_best();
    }

    /// Runs `iters` iterations; every `every`-th iteration (skipping the
    /// first, which has no gains yet) `perturb` is applied before the DDP
    /// round. Returns the best-cost trace (entry 0 = initial best cost).
    pub fn run_schedule<F>(
        &mut self,
        problem: &Problem,
        config: &SolverConfig,
        iters: usize,
        every: usize,
        mut perturb: F,
    ) -> Vec<f64>
    where
        F: FnMut(&mut Self),
    {
        let mut trace = Vec::with_capacity(iters + 1);
        trace.push(self.best_cost());
        for i in 0..iters {
            if every > 0 && i > 0 && i % every == 0 {
                perturb(self);
            }
            self.ddp_round(problem, config);
            trace.push(self.best_cost());
        }
        trace
    }
}
