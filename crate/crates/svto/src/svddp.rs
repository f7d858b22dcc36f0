//! Stein variational DDP.
//!
//! N trajectories are optimized by DDP in parallel; every m-th iteration the
//! controls of all modes except the best receive a kernel-based Newton
//! update. At a DDP optimum the Q-gradient term of the Stein functional
//! gradient vanishes, so only the repulsive force
//!
//! ```text
//! φ(u⁽ˢ⁾) = (1/N) Σ_n ∇_{u⁽ⁿ⁾} k(u⁽ⁿ⁾, u⁽ˢ⁾)
//! ```
//!
//! survives. The Newton direction scales this force by the inverse of the
//! block-diagonal Stein Hessian
//!
//! ```text
//! H⁽ˢ⸴ˢ⁾ = (1/N) Σ_n [ (Q_uu⁽ⁿ⁾/α) k(u⁽ⁿ⁾,u⁽ˢ⁾)² + ∇k ∇kᵀ ]
//! ```
//!
//! which projects the repulsion into directions where the cost curvature is
//! small and re-introduces the temperature α. The per-timestep systems are
//! independent (no recursion), so they are solved in parallel.

use crate::cost::Problem;
use crate::ddp::{self, Trajectory};
use crate::ensemble::ParticleEnsemble;
use crate::meddp::{self, EnsembleSolveResult, Temperature};
use crate::SolverConfig;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Gaussian-kernel bandwidth (the squared distance is divided by `length`).
#[derive(Debug, Clone, Copy)]
pub struct KernelParams {
    pub length: f64,
}

impl KernelParams {
    pub fn new(length: f64) -> Self {
        assert!(length > 0.0 && length.is_finite());
        Self { length }
    }
}

/// k(θ, θ') = exp(−‖θ−θ'‖²/L), symmetric, in (0, 1].
pub fn kernel(theta: &DVector<f64>, theta2: &DVector<f64>, params: &KernelParams) -> f64 {
    (-(theta - theta2).norm_squared() / params.length).exp()
}

/// ∇_θ k(θ, θ') = −(2/L)(θ − θ')·k(θ, θ'). Zero at θ = θ', so the repulsive
/// force vanishes for coincident particles.
pub fn kernel_gradient(
    theta: &DVector<f64>,
    theta2: &DVector<f64>,
    params: &KernelParams,
) -> DVector<f64> {
    let k = kernel(theta, theta2, params);
    (theta2 - theta) * (2.0 / params.length * k)
}

/// Median heuristic: L = med{‖θᵢ−θⱼ‖²} / ln d over the off-diagonal pairs,
/// floored at 1e-8 (degenerate case: all particles identical). `d` is the
/// particle dimension; d ≥ 2 keeps ln d positive.
pub fn median_bandwidth(particles: &[DVector<f64>], d: usize) -> KernelParams {
    assert!(particles.len() >= 2, "median heuristic needs at least two particles");
    assert!(d >= 2, "median heuristic needs dimension >= 2");
    let n = particles.len();
    let mut d2: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d2.push((&particles[i] - &particles[j]).norm_squared());
        }
    }
    d2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = d2.len();
    let median = if m % 2 == 1 {
        d2[m / 2]
    } else {
        0.5 * (d2[m / 2 - 1] + d2[m / 2])
    };
    KernelParams::new((median / (d as f64).ln()).max(1e-8))
}

/// Repulsive Stein gradient for every mode: the Q-gradient term is zero at
/// the DDP optimality condition, leaving φ_s = (1/N)Σ_n ∇_{u⁽ⁿ⁾}k(u⁽ⁿ⁾, u⁽ˢ⁾)
/// (the n = s term contributes nothing).
pub fn repulsive_gradient(controls: &[DVector<f64>], params: &KernelParams) -> Vec<DVector<f64>> {
    let n = controls.len();
    let dim = controls[0].len();
    (0..n)
        .map(|s| {
            let mut phi = DVector::zeros(dim);
            for u_n in controls {
                phi += kernel_gradient(u_n, &controls[s], params);
            }
            phi / n as f64
        })
        .collect()
}

/// Block-diagonal Stein Newton Hessian of mode `s`:
/// H = (1/N)Σ_n[(Q_uu⁽ⁿ⁾/α)k² + ∇k∇kᵀ]. Symmetric PSD by construction.
pub fn svnm_hessian(
    controls: &[DVector<f64>],
    q_uu: &[&DMatrix<f64>],
    alpha: Temperature,
    params: &KernelParams,
    s: usize,
) -> DMatrix<f64> {
    let n = controls.len();
    let dim = controls[0].len();
    let mut h = DMatrix::zeros(dim, dim);
    for (u_n, q_n) in controls.iter().zip(q_uu) {
        let k = kernel(u_n, &controls[s], params);
        let gk = kernel_gradient(u_n, &controls[s], params);
        h += *q_n * (k * k / alpha.value());
        h += &gk * gk.transpose();
    }
    h /= n as f64;
    (&h + h.transpose()) * 0.5
}

/// Per-timestep Stein Newton update: coefficients β⁽ⁿ⁾ and composed
/// directions w⁽ˢ⁾ = Σ_n β⁽ⁿ⁾ k(u⁽ⁿ⁾, u⁽ˢ⁾).
pub struct SteinUpdate {
    pub beta: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
}

/// Solves H⁽ⁿ⸴ⁿ⁾β⁽ⁿ⁾ = φ⁽ⁿ⁾ per mode (φ is already the negated functional
/// gradient) and composes the Galerkin expansion. Each system is regularized
/// with 1e-9·I, escalating ×10 on factorization failure; a system that stays
/// singular contributes β = 0.
pub fn solve_and_compose(
    hessians: &[DMatrix<f64>],
    phi: &[DVector<f64>],
    controls: &[DVector<f64>],
    params: &KernelParams,
) -> SteinUpdate {
    let n = hessians.len();
    let dim = phi[0].len();
    let mut beta = Vec::with_capacity(n);
    for (h, g) in hessians.iter().zip(phi) {
        let mut reg = 1e-9;
        let mut solved = DVector::zeros(dim);
        loop {
            let mut h_reg = h.clone();
            for i in 0..dim {
                h_reg[(i, i)] += reg;
            }
            if let Some(chol) = h_reg.cholesky() {
                solved = chol.solve(g);
                break;
            }
            reg *= 10.0;
            if reg > 1e6 {
                break; // skip the update for this mode
            }
        }
        beta.push(solved);
    }
    let w = (0..n)
        .map(|s| {
            let mut out = DVector::zeros(dim);
            for (n_idx, b) in beta.iter().enumerate() {
                out += b * kernel(&controls[n_idx], &controls[s], params);
            }
            out
        })
        .collect();
    SteinUpdate { beta, w }
}

/// Stein Newton update at one timestep, assembled from the modes' controls
/// and Q_uu blocks.
pub fn newton_direction(
    controls: &[DVector<f64>],
    q_uu: &[&DMatrix<f64>],
    alpha: Temperature,
    params: &KernelParams,
) -> SteinUpdate {
    let phi = repulsive_gradient(controls, params);
    let hessians: Vec<DMatrix<f64>> = (0..controls.len())
        .map(|s| svnm_hessian(controls, q_uu, alpha, params, s))
        .collect();
    solve_and_compose(&hessians, &phi, controls, params)
}

/// Step-size backtracking for the Stein update: tries each ε in order and
/// accepts the first rollout with finite cost. The trailing ε = 0 reproduces
/// the unmodified trajectory, so the search always terminates with a finite
/// cost. Returns the trajectory and the accepted ε.
pub fn sv_line_search(
    problem: &Problem,
    traj: &Trajectory,
    feedback: &[DMatrix<f64>],
    w: &[DVector<f64>],
    epsilons: &[f64],
    with_feedback: bool,
) -> (Trajectory, f64) {
    for &eps in epsilons {
        let candidate = ddp::closed_loop_rollout(problem, traj, |t, dx| {
            let mut u = &traj.controls[t] + &w[t] * eps;
            if with_feedback {
                u += &feedback[t] * dx;
            }
            u
        });
        if candidate.cost.is_finite() {
            return (candidate, eps);
        }
    }
    (traj.clone(), 0.0)
}

/// Update schedule: an SV round every `every`-th iteration, with step-size
/// candidates `epsilons` in non-increasing order ending at 0.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub every: usize,
    pub epsilons: Vec<f64>,
}

impl Schedule {
    pub fn new(every: usize, epsilons: Vec<f64>) -> Self {
        assert!(every >= 1);
        assert!(!epsilons.is_empty());
        assert!(
            epsilons.windows(2).all(|w| w[0] >= w[1]),
            "epsilons must be non-increasing"
        );
        assert_eq!(*epsilons.last().unwrap(), 0.0, "epsilons must end with 0");
        Self { every, epsilons }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::new(5, vec![4.0, 3.0, 2.0, 1.0, 0.5, 0.0])
    }
}

#[derive(Debug, Clone)]
pub struct SvddpConfig {
    pub alpha: f64,
    /// Isotropic std of the initial control sampling Σ₀.
    pub sigma0: f64,
    pub n_modes: usize,
    pub schedule: Schedule,
    /// Keep the DDP feedback term in the SV rollout.
    pub with_feedback: bool,
}

impl Default for SvddpConfig {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            sigma0: 0.5,
            n_modes: 8,
            schedule: Schedule::default(),
            with_feedback: true,
        }
    }
}

/// One Stein variational round: per-timestep Newton directions (computed in
/// parallel, with the bandwidth re-estimated per timestep from that
/// timestep's controls), then a NaN-backtracking rollout for every mode
/// except the best.
pub fn sv_round(ens: &mut ParticleEnsemble, problem: &Problem, cfg: &SvddpConfig) {
    let n = ens.n_modes();
    if n < 2 {
        return;
    }
    if ens.modes.iter().any(|m| m.gains.is_none() || m.qmodel.is_none()) {
        return; // no backward pass yet
    }
    let alpha = Temperature::new(cfg.alpha);
    let n_u = problem.model.control_dim();
    let horizon = ens.modes[0].traj.horizon();

    // w indexed as [t][mode].
    let per_t: Vec<Vec<DVector<f64>>> = (0..horizon)
        .into_par_iter()
        .map(|t| {
            let controls: Vec<DVector<f64>> =
                ens.modes.iter().map(|m| m.traj.controls[t].clone()).collect();
            let q_uu: Vec<&DMatrix<f64>> = ens
                .modes
                .iter()
                .map(|m| &m.qmodel.as_ref().unwrap().q_uu[t])
                .collect();
            let params = median_bandwidth(&controls, n_u);
            newton_direction(&controls, &q_uu, alpha, &params).w
        })
        .collect();

    let best = ens.best_index;
    let reset_reg = ens.reg_init;
    ens.modes
        .par_iter_mut()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .for_each(|(i, mode)| {
            let w_seq: Vec<DVector<f64>> = per_t.iter().map(|wt| wt[i].clone()).collect();
            let gains = mode.gains.as_ref().unwrap();
            let (traj, accepted_eps) = sv_line_search(
                problem,
                &mode.traj,
                &gains.feedback,
                &w_seq,
                &cfg.schedule.epsilons,
                cfg.with_feedback,
            );
            mode.traj = traj;
            // A nonzero step is a fresh nominal; restart its ladder.
            if accepted_eps > 0.0 {
                mode.reg = reset_reg;
            }
        });
}

/// Full SVDDP solve: sampled initialization, scheduled SV rounds, per-mode
/// DDP iterations, best-mode selection.
pub fn solve(
    problem: &Problem,
    initial: Trajectory,
    cfg: &SvddpConfig,
    solver: &SolverConfig,
    seed: u64,
) -> EnsembleSolveResult {
    let mut ens = ParticleEnsemble::initialize(
        problem,
        initial,
        cfg.n_modes,
        cfg.sigma0,
        solver.reg_init,
        seed,
    );
    let trace = ens.run_schedule(problem, solver, solver.max_iters, cfg.schedule.every, |e| {
        sv_round(e, problem, cfg)
    });
    meddp::finish(ens, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{BarrierParams, QuadraticCost};
    use crate::dynamics::Car2d;
    use crate::numdiff;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rand_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::new(1.7);
        let a = DVector::from_vec(vec![0.3, -0.5]);
        assert_relative_eq!(kernel(&a, &a, &p), 1.0);
        // ‖θ−θ'‖² = L → e⁻¹.
        let b = DVector::from_vec(vec![0.3 + p.length.sqrt(), -0.5]);
        assert_relative_eq!(kernel(&a, &b, &p), (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = KernelParams::new(0.8);
        for _ in 0..100 {
            let a = rand_vec(&mut rng, 3);
            let b = rand_vec(&mut rng, 3);
            assert_eq!(kernel(&a, &b, &p), kernel(&b, &a, &p));
        }
    }

    #[test]
    fn kernel_gradient_vanishes_at_coincidence_and_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = KernelParams::new(1.3);
        let a = rand_vec(&mut rng, 4);
        assert_eq!(kernel_gradient(&a, &a, &p).amax(), 0.0);
        for _ in 0..50 {
            let a = rand_vec(&mut rng, 4);
            let b = rand_vec(&mut rng, 4);
            let grad = kernel_gradient(&a, &b, &p);
            let fd = numdiff::gradient_central(|x| kernel(x, &b, &p), &a, 1e-6);
            assert!((&grad - &fd).amax() < 1e-6);
            // Direction parallel to (θ'−θ) with a positive coefficient.
            let coeff = grad.dot(&(&b - &a));
            assert!(coeff > 0.0);
        }
    }

    #[test]
    fn median_bandwidth_examples() {
        // Two particles at distance 1 in d = 2: L = 1/ln 2.
        let a = DVector::from_vec(vec![0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let p = median_bandwidth(&[a.clone(), b.clone()], 2);
        assert_relative_eq!(p.length, 1.0 / 2f64.ln(), epsilon = 1e-12);
        // Identical particles: floored.
        let p = median_bandwidth(&[a.clone(), a.clone(), a.clone()], 2);
        assert_relative_eq!(p.length, 1e-8);
        // Scaling all particles by c scales L by c².
        let c = 3.0;
        let p1 = median_bandwidth(&[a.clone(), b.clone()], 2);
        let p2 = median_bandwidth(&[&a * c, &b * c], 2);
        assert_relative_eq!(p2.length, c * c * p1.length, epsilon = 1e-12);
    }

    #[test]
    fn repulsive_gradient_single_particle_is_zero() {
        let p = KernelParams::new(1.0);
        let phi = repulsive_gradient(&[DVector::from_vec(vec![1.0, 2.0])], &p);
        assert_eq!(phi[0].amax(), 0.0);
    }

    #[test]
    fn repulsive_gradient_two_particles_antisymmetric() {
        let p = KernelParams::new(1.0);
        let a = DVector::from_vec(vec![0.5, 0.0]);
        let b = DVector::from_vec(vec![-0.5, 0.0]);
        let phi = repulsive_gradient(&[a, b], &p);
        assert!((&phi[0] + &phi[1]).amax() < 1e-15);
        assert!(phi[0][0] > 0.0); // pushed away from b
    }

    /// Brute-force re-derivation of the Stein functional gradient with the
    /// log-density gradient term explicitly set to zero (the DDP optimality
    /// condition).
    fn stein_gradient_oracle(
        controls: &[DVector<f64>],
        params: &KernelParams,
    ) -> Vec<DVector<f64>> {
        let n = controls.len();
        (0..n)
            .map(|i| {
                let mut acc = DVector::zeros(controls[0].len());
                for x_n in controls {
                    let log_p_grad = DVector::zeros(controls[0].len());
                    let k = kernel(x_n, &controls[i], params);
                    acc += log_p_grad * k + kernel_gradient(x_n, &controls[i], params);
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn repulsive_gradient_matches_functional_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = KernelParams::new(0.9);
        for _ in 0..20 {
            let controls: Vec<DVector<f64>> = (0..5).map(|_| rand_vec(&mut rng, 3)).collect();
            let got = repulsive_gradient(&controls, &p);
            let want = stein_gradient_oracle(&controls, &p);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn hessian_single_particle_reduces_to_quu_over_alpha() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let p = KernelParams::new(1.0);
        let u = vec![DVector::from_vec(vec![0.1, 0.2])];
        let alpha = Temperature::new(4.0);
        let h = svnm_hessian(&u, &[&q], alpha, &p, 0);
        assert!((&h - &q / 4.0).amax() < 1e-14);
        // Doubling α halves the Q_uu contribution exactly.
        let h2 = svnm_hessian(&u, &[&q], Temperature::new(8.0), &p, 0);
        assert!((&h2 - &h / 2.0).amax() < 1e-14);
    }

    #[test]
    fn hessian_is_psd_over_random_ensembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = rng.random_range(2..6);
            let dim = rng.random_range(2..4);
            let controls: Vec<DVector<f64>> = (0..n).map(|_| rand_vec(&mut rng, dim)).collect();
            let q_mats: Vec<DMatrix<f64>> = (0..n)
                .map(|_| {
                    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                    &m * m.transpose() + DMatrix::identity(dim, dim) * 0.1
                })
                .collect();
            let q_refs: Vec<&DMatrix<f64>> = q_mats.iter().collect();
            let params = median_bandwidth(&controls, dim);
            let alpha = Temperature::new(rng.random_range(0.5..40.0));
            for s in 0..n {
                let h = svnm_hessian(&controls, &q_refs, alpha, &params, s);
                let eigs = h.symmetric_eigenvalues();
                assert!(eigs.iter().all(|&e| e >= -1e-10), "H not PSD: {eigs}");
            }
        }
    }

    #[test]
    fn newton_direction_hand_solved_two_modes() {
        // H = I for both modes, φ = (−g, +g): β = (−g, +g) and
        // w⁽¹⁾ = −g + g·k₁₂.
        let params = KernelParams::new(2.0);
        let u1 = DVector::from_vec(vec![0.0, 0.0]);
        let u2 = DVector::from_vec(vec![1.0, 0.0]);
        let g = DVector::from_vec(vec![0.7, -0.2]);
        let h = vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)];
        let phi = vec![-&g, g.clone()];
        let upd = solve_and_compose(&h, &phi, &[u1.clone(), u2.clone()], &params);
        assert!((&upd.beta[0] + &g).amax() < 1e-8);
        assert!((&upd.beta[1] - &g).amax() < 1e-8);
        let k12 = kernel(&u1, &u2, &params);
        let expected_w1 = -&g + &g * k12;
        assert!((&upd.w[0] - expected_w1).amax() < 1e-8);
    }

    #[test]
    fn newton_direction_single_mode_collapses_to_zero() {
        let q = DMatrix::identity(2, 2);
        let params = KernelParams::new(1.0);
        let upd = newton_direction(
            &[DVector::from_vec(vec![0.3, 0.4])],
            &[&q],
            Temperature::new(1.0),
            &params,
        );
        assert_eq!(upd.w[0].amax(), 0.0);
        assert_eq!(upd.beta[0].amax(), 0.0);
    }

    #[test]
    fn newton_solve_residuals_are_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let n = rng.random_range(2..6);
            let dim = 3;
            let controls: Vec<DVector<f64>> = (0..n).map(|_| rand_vec(&mut rng, dim)).collect();
            let q_mats: Vec<DMatrix<f64>> = (0..n)
                .map(|_| {
                    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                    &m * m.transpose() + DMatrix::identity(dim, dim)
                })
                .collect();
            let q_refs: Vec<&DMatrix<f64>> = q_mats.iter().collect();
            let params = median_bandwidth(&controls, dim);
            let alpha = Temperature::new(5.0);
            let phi = repulsive_gradient(&controls, &params);
            let upd = newton_direction(&controls, &q_refs, alpha, &params);
            for s in 0..n {
                let h = svnm_hessian(&controls, &q_refs, alpha, &params, s);
                let residual = (&h * &upd.beta[s] - &phi[s]).norm();
                assert!(
                    residual <= 1e-8 * (1.0 + phi[s].norm()),
                    "residual {residual:.2e}"
                );
            }
        }
    }

    fn car_problem() -> Problem {
        Problem::unbounded(
            Arc::new(Car2d::default()),
            QuadraticCost::new(
                DVector::from_vec(vec![0.1, 0.1, 0.0]),
                DVector::from_vec(vec![0.05, 0.05]),
                DVector::from_vec(vec![5.0, 5.0, 0.0]),
                DVector::from_vec(vec![2.0, 1.0, 0.0]),
            ),
            vec![],
            BarrierParams::new(0.0, 0.05),
        )
    }

    #[test]
    fn sv_line_search_zero_direction_keeps_trajectory() {
        let problem = car_problem();
        let traj = ddp::rollout(&problem, &DVector::zeros(3), &vec![DVector::zeros(2); 10]);
        let w = vec![DVector::zeros(2); 10];
        let feedback = vec![DMatrix::zeros(2, 3); 10];
        let (out, _) = sv_line_search(&problem, &traj, &feedback, &w, &[1.0, 0.0], true);
        for (a, b) in out.states.iter().zip(&traj.states) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sv_line_search_survives_adversarial_directions() {
        let problem = car_problem();
        let traj = ddp::rollout(&problem, &DVector::zeros(3), &vec![DVector::zeros(2); 10]);
        let feedback = vec![DMatrix::zeros(2, 3); 10];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let w: Vec<DVector<f64>> = (0..10)
                .map(|_| {
                    DVector::from_fn(2, |_, _| {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        v * 1e300
                    })
                })
                .collect();
            let (out, _) =
                sv_line_search(&problem, &traj, &feedback, &w, &[4.0, 2.0, 1.0, 0.0], true);
            assert!(out.cost.is_finite(), "accepted cost must be finite");
        }
    }

    #[test]
    fn per_timestep_updates_commute() {
        // Newton directions at different timesteps are independent, so the
        // computation order cannot matter.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 4;
        let mut make = |rng: &mut ChaCha8Rng| -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
            let controls: Vec<DVector<f64>> = (0..n).map(|_| rand_vec(rng, 2)).collect();
            let q: Vec<DMatrix<f64>> = (0..n)
                .map(|_| {
                    let m = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
                    &m * m.transpose() + DMatrix::identity(2, 2)
                })
                .collect();
            (controls, q)
        };
        let (c0, q0) = make(&mut rng);
        let (c1, q1) = make(&mut rng);
        let alpha = Temperature::new(10.0);
        let solve_t = |c: &Vec<DVector<f64>>, q: &Vec<DMatrix<f64>>| {
            let refs: Vec<&DMatrix<f64>> = q.iter().collect();
            let params = median_bandwidth(c, 2);
            newton_direction(c, &refs, alpha, &params)
                .w
                .into_iter()
                .collect::<Vec<_>>()
        };
        let (w0_first, w1_first) = (solve_t(&c0, &q0), solve_t(&c1, &q1));
        let (w1_second, w0_second) = (solve_t(&c1, &q1), solve_t(&c0, &q0));
        for (a, b) in w0_first.iter().zip(&w0_second) {
            assert_eq!(a, b);
        }
        for (a, b) in w1_first.iter().zip(&w1_second) {
            assert_eq!(a, b);
        }
    }
}
