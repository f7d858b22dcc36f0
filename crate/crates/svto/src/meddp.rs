//! Maximum-entropy DDP sampling policies.
//!
//! On the entropy-regularized objective the optimal per-timestep policy is
//! Gaussian, `π*(δu|δx) ~ N(δu*, α·Q_uu⁻¹)`, around the deterministic DDP
//! solution δu* = κ + Kδx. The multimodal variant mixes the per-mode
//! Gaussians with weights proportional to exp(−V⁽ⁿ⁾/α), which is the
//! desirability transform of each mode's value. Sampling perturbs all modes
//! except the best between deterministic DDP iterations.

use crate::cost::Problem;
use crate::ddp::{self, GainSchedule, QuadraticModel, SolverConfig, Trajectory};
use crate::ensemble::ParticleEnsemble;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Entropy temperature α > 0: scales the policy covariance α·Q_uu⁻¹ and the
/// curvature term of the Stein Newton Hessian.
#[derive(Debug, Clone, Copy)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha.is_finite(), "temperature must be > 0");
        Self(alpha)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Entropy contribution of the Gaussian policy to the value function:
/// (α/2)[ln det Q_uu − n_u ln(2πα)]. Q_uu must be positive definite.
pub fn entropy_offset(q_uu: &DMatrix<f64>, alpha: Temperature, n_u: usize) -> f64 {
    assert_eq!(q_uu.nrows(), n_u);
    let chol = q_uu
        .clone()
        .cholesky()
        .expect("entropy_offset: Q_uu must be positive definite");
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let a = alpha.value();
    0.5 * a * (log_det - n_u as f64 * (2.0 * std::f64::consts::PI * a).ln())
}

/// Per-mode value bookkeeping for the mixture weights.
#[derive(Debug, Clone, Copy)]
pub struct ValueRecord {
    /// Deterministic cost-to-go of the mode's trajectory.
    pub v_tilde: f64,
    /// Accumulated Gaussian-policy entropy offset along the horizon.
    pub v_h: f64,
}

impl ValueRecord {
    pub fn total(&self) -> f64 {
        self.v_tilde + self.v_h
    }

    /// Value of a mode: forward-pass cost-to-go plus the entropy offsets of
    /// its latest backward pass.
    pub fn of_mode(traj: &Trajectory, qmodel: &QuadraticModel, alpha: Temperature) -> Self {
        let n_u = qmodel.q_uu.first().map_or(0, |m| m.nrows());
        let v_h = qmodel
            .q_uu
            .iter()
            .map(|q| entropy_offset(q, alpha, n_u))
            .sum();
        Self { v_tilde: traj.cost, v_h }
    }
}

/// Categorical weights over modes: entries ≥ 0 summing to 1.
#[derive(Debug, Clone)]
pub struct ModeWeights(pub Vec<f64>);

/// ω⁽ⁿ⁾ = exp(−V⁽ⁿ⁾/α) / Σ_k exp(−V⁽ᵏ⁾/α), evaluated in log space with
/// max subtraction. Lower value ⇒ larger weight.
pub fn mode_weights(values: &[f64], alpha: Temperature) -> ModeWeights {
    assert!(!values.is_empty());
    assert!(values.iter().all(|v| v.is_finite()), "mode values must be finite");
    let a = alpha.value();
    let scores: Vec<f64> = values.iter().map(|v| -v / a).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ModeWeights(exps.into_iter().map(|e| e / sum).collect())
}

/// Mode-collapse guard: raise every weight to at least `floor` and
/// renormalize the rest proportionally (iterating in case the rescale pushes
/// further entries below the floor). Requires 0 ≤ floor < 1/N; ordering of
/// entries is preserved.
pub fn guard_collapse(omega: &ModeWeights, floor: f64) -> ModeWeights {
    let n = omega.0.len();
    assert!(
        floor >= 0.0 && floor < 1.0 / n as f64,
        "collapse floor must satisfy 0 <= floor < 1/N"
    );
    let mut w = omega.0.clone();
    let mut fixed = vec![false; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if !fixed[i] && w[i] < floor {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_mass = 1.0 - n_fixed as f64 * floor;
        let free_sum: f64 = (0..n).filter(|&i| !fixed[i]).map(|i| w[i]).sum();
        for i in 0..n {
            w[i] = if fixed[i] { floor } else { w[i] * free_mass / free_sum };
        }
    }
    ModeWeights(w)
}

/// The Gaussian policy of one mode: mean κ_t, covariance factor M_t with
/// M_tM_t' = α·Q_uu,t⁻¹, and feedback K_t.
pub struct UnimodalPolicy {
    pub mean: Vec<DVector<f64>>,
    pub cov_factor: Vec<DMatrix<f64>>,
    pub feedback: Vec<DMatrix<f64>>,
}

impl UnimodalPolicy {
    /// Builds the policy from a backward pass. The covariance factor comes
    /// from the Cholesky factor of Q_uu: M = √α·L⁻ᵀ.
    pub fn from_backward_pass(
        gains: &GainSchedule,
        qmodel: &QuadraticModel,
        alpha: Temperature,
    ) -> Self {
        let sqrt_a = alpha.value().sqrt();
        let cov_factor = qmodel
            .q_uu
            .iter()
            .map(|q| {
                let n_u = q.nrows();
                let l = q
                    .clone()
                    .cholesky()
                    .expect("policy covariance requires PD Q_uu")
                    .l();
                let l_inv = l
                    .solve_lower_triangular(&DMatrix::identity(n_u, n_u))
                    .expect("Cholesky factor is invertible");
                l_inv.transpose() * sqrt_a
            })
            .collect();
        Self {
            mean: gains.kappa.clone(),
            cov_factor,
            feedback: gains.feedback.clone(),
        }
    }

    /// Draws δu_t ~ N(κ_t, α·Q_uu,t⁻¹).
    pub fn sample_deviation(&self, t: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n_u = self.mean[t].len();
        let z = DVector::from_fn(n_u, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean[t] + &self.cov_factor[t] * z
    }
}

/// Samples a perturbed trajectory around `source`: u_t = ū_t + δu_t + K_tδx
/// with δu_t drawn from the policy (the feedback term is dropped when
/// `with_feedback` is false). Non-finite rollouts are resampled up to
/// `max_retries`, after which the unperturbed source is returned.
pub fn sample_perturbation(
    problem: &Problem,
    source: &Trajectory,
    policy: &UnimodalPolicy,
    rng: &mut ChaCha8Rng,
    with_feedback: bool,
    max_retries: usize,
) -> Trajectory {
    for _ in 0..=max_retries {
        let candidate = ddp::closed_loop_rollout(problem, source, |t, dx| {
            let du = policy.sample_deviation(t, rng);
            if with_feedback {
                &source.controls[t] + du + &policy.feedback[t] * dx
            } else {
                &source.controls[t] + du
            }
        });
        if candidate.cost.is_finite() {
            return candidate;
        }
    }
    source.clone()
}

/// Configuration of the maximum-entropy ensemble solvers.
#[derive(Debug, Clone)]
pub struct MeddpConfig {
    pub alpha: f64,
    /// Isotropic std of the initial control sampling Σ₀.
    pub sigma0: f64,
    /// Sampling round every m-th iteration.
    pub sample_every: usize,
    pub n_modes: usize,
    /// Multimodal (mixture) sampling instead of best-mode-only sampling.
    pub multimodal: bool,
    /// Weight floor of the mode-collapse guard (multimodal only).
    pub collapse_floor: f64,
    /// Keep the DDP feedback term when sampling.
    pub with_feedback: bool,
    pub max_sample_retries: usize,
}

impl Default for MeddpConfig {
    fn default() -> Self {
        Self {
            alpha: 30.0,
            sigma0: 0.5,
            sample_every: 5,
            n_modes: 8,
            multimodal: false,
            collapse_floor: 0.02,
            with_feedback: true,
            max_sample_retries: 5,
        }
    }
}

/// Result of an ensemble solve: the best mode and the best-cost trace.
pub struct EnsembleSolveResult {
    pub traj: Trajectory,
    pub gains: GainSchedule,
    pub cost_trace: Vec<f64>,
    pub ensemble: ParticleEnsemble,
}

/// Sampling round shared by UG- and MG-MEDDP: every mode except the best is
/// replaced by a perturbation sampled from the unimodal policy of a source
/// mode. UG always sources the best mode; MG draws the source from the
/// value-weighted categorical (guarded against collapse), once per sampled
/// trajectory, held for the whole horizon.
pub fn sampling_round(ens: &mut ParticleEnsemble, problem: &Problem, cfg: &MeddpConfig) {
    let n = ens.n_modes();
    if n < 2 {
        return;
    }
    if ens.modes.iter().any(|m| m.gains.is_none() || m.qmodel.is_none()) {
        return; // no backward pass yet
    }
    let alpha = Temperature::new(cfg.alpha);
    let best = ens.best_index;
    let reset_reg = ens.reg_init;

    let weights = if cfg.multimodal {
        let values: Vec<f64> = ens
            .modes
            .iter()
            .map(|m| ValueRecord::of_mode(&m.traj, m.qmodel.as_ref().unwrap(), alpha).total())
            .collect();
        // The configured floor is capped at half the uniform weight so the
        // guard precondition (floor < 1/N) holds for any mode count.
        let floor = cfg.collapse_floor.min(0.5 / n as f64);
        Some(guard_collapse(&mode_weights(&values, alpha), floor))
    } else {
        None
    };

    let policies: Vec<UnimodalPolicy> = ens
        .modes
        .iter()
        .map(|m| {
            UnimodalPolicy::from_backward_pass(
                m.gains.as_ref().unwrap(),
                m.qmodel.as_ref().unwrap(),
                alpha,
            )
        })
        .collect();
    let sources: Vec<Trajectory> = ens.modes.iter().map(|m| m.traj.clone()).collect();

    for i in 0..n {
        if i == best {
            continue;
        }
        let mode = &mut ens.modes[i];
        let source_idx = match &weights {
            Some(w) => {
                // Mode committed once at t=0 and held for the horizon.
                let draw: f64 = mode.rng.random();
                let mut acc = 0.0;
                let mut idx = n - 1;
                for (k, &wk) in w.0.iter().enumerate() {
                    acc += wk;
                    if draw < acc {
                        idx = k;
                        break;
                    }
                }
                idx
            }
            None => best,
        };
        mode.traj = sample_perturbation(
            problem,
            &sources[source_idx],
            &policies[source_idx],
            &mut mode.rng,
            cfg.with_feedback,
            cfg.max_sample_retries,
        );
        mode.reg = reset_reg;
    }
    // The best mode is untouched, so the ensemble minimum cannot increase.
}

/// Full UG-/MG-MEDDP solve: alternating sampling rounds and per-mode DDP
/// iterations, returning the best mode.
pub fn solve(
    problem: &Problem,
    initial: Trajectory,
    cfg: &MeddpConfig,
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
    let trace = ens.run_schedule(problem, solver, solver.max_iters, cfg.sample_every, |e| {
        sampling_round(e, problem, cfg)
    });
    finish(ens, trace)
}

pub(crate) fn finish(ens: ParticleEnsemble, trace: Vec<f64>) -> EnsembleSolveResult {
    let best = ens.best_index;
    let traj = ens.modes[best].traj.clone();
    let gains = ens.modes[best]
        .gains
        .clone()
        .expect("solve performed at least one backward pass");
    EnsembleSolveResult { traj, gains, cost_trace: trace, ensemble: ens }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{BarrierParams, QuadraticCost};
    use crate::dynamics::Car2d;
    use crate::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn entropy_offset_examples() {
        let tau = 2.0 * std::f64::consts::PI;
        // Q_uu = 2πα·I → ln det cancels n_u ln(2πα) exactly.
        for (alpha, n_u) in [(1.0, 2usize), (2.0, 2), (0.5, 3)] {
            let q = DMatrix::identity(n_u, n_u) * (tau * alpha);
            assert_relative_eq!(
                entropy_offset(&q, Temperature::new(alpha), n_u),
                0.0,
                epsilon = 1e-12
            );
        }
        // α=1, n_u=1, Q_uu = 2π·e² → ½[ln(2πe²) − ln 2π] = 1.
        let q = DMatrix::from_element(1, 1, tau * std::f64::consts::E.powi(2));
        assert_relative_eq!(entropy_offset(&q, Temperature::new(1.0), 1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_offset_monotone_in_log_det() {
        let alpha = Temperature::new(3.0);
        let mut prev = f64::NEG_INFINITY;
        for scale in [0.5, 1.0, 2.0, 4.0] {
            let q = DMatrix::identity(2, 2) * scale;
            let v = entropy_offset(&q, alpha, 2);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    #[should_panic(expected = "positive definite")]
    fn entropy_offset_rejects_non_pd() {
        let q = DMatrix::from_element(2, 2, -1.0);
        entropy_offset(&q, Temperature::new(1.0), 2);
    }

    #[test]
    fn mode_weights_examples() {
        let alpha = Temperature::new(1.0);
        let w = mode_weights(&[1.0, 1.0, 1.0, 1.0], alpha);
        for wi in &w.0 {
            assert_relative_eq!(*wi, 0.25, epsilon = 1e-12);
        }
        // V = (0, ln 3) at α = 1 → (0.75, 0.25).
        let w = mode_weights(&[0.0, 3f64.ln()], alpha);
        assert_relative_eq!(w.0[0], 0.75, epsilon = 1e-12);
        assert_relative_eq!(w.0[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn guard_collapse_examples() {
        // Already above the floor: unchanged.
        let w = ModeWeights(vec![0.5, 0.5]);
        let g = guard_collapse(&w, 0.1);
        assert_eq!(g.0, vec![0.5, 0.5]);
        // (0.99, 0.01) with floor 0.1 → (0.9, 0.1).
        let g = guard_collapse(&ModeWeights(vec![0.99, 0.01]), 0.1);
        assert_relative_eq!(g.0[0], 0.9, epsilon = 1e-12);
        assert_relative_eq!(g.0[1], 0.1, epsilon = 1e-12);
        // floor = 0 is the identity.
        let g = guard_collapse(&ModeWeights(vec![0.7, 0.3]), 0.0);
        assert_eq!(g.0, vec![0.7, 0.3]);
    }

    /// Brute-force waterfall oracle: repeatedly clamp the minimum entry and
    /// renormalize the rest until stable.
    fn waterfall_oracle(mut w: Vec<f64>, floor: f64) -> Vec<f64> {
        loop {
            let mut below: Vec<usize> = vec![];
            for (i, &v) in w.iter().enumerate() {
                if v < floor - 1e-15 {
                    below.push(i);
                }
            }
            if below.is_empty() {
                return w;
            }
            let i = below[0];
            let deficit = floor - w[i];
            w[i] = floor;
            let others: f64 = w
                .iter()
                .enumerate()
                .filter(|&(k, &v)| k != i && v > floor)
                .map(|(_, &v)| v)
                .sum();
            let scale = (others - deficit) / others;
            for (k, v) in w.iter_mut().enumerate() {
                if k != i && *v > floor {
                    *v *= scale;
                }
            }
        }
    }

    #[test]
    fn guard_collapse_matches_waterfall_oracle() {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = r.random_range(2..8);
            let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.001..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
            let floor = r.random_range(0.0..(0.9 / n as f64));
            let got = guard_collapse(&ModeWeights(w.clone()), floor).0;
            let want = waterfall_oracle(w, floor);
            for (a, b) in got.iter().zip(&want) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
            let total: f64 = got.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
            assert!(got.iter().all(|&v| v >= floor - 1e-12));
        }
    }

    #[test]
    #[should_panic(expected = "collapse floor")]
    fn guard_collapse_rejects_large_floor() {
        guard_collapse(&ModeWeights(vec![0.5, 0.5]), 0.5);
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

    fn solved_policy(problem: &Problem) -> (Trajectory, UnimodalPolicy) {
        let initial = ddp::rollout(problem, &DVector::zeros(3), &vec![DVector::zeros(2); 30]);
        let result = ddp::solve(problem, initial, &SolverConfig::default()).unwrap();
        let policy = UnimodalPolicy::from_backward_pass(
            &result.gains,
            &result.qmodel,
            Temperature::new(10.0),
        );
        (result.traj, policy)
    }

    #[test]
    fn sampling_is_deterministic_under_fixed_seed() {
        let problem = car_problem();
        let (traj, policy) = solved_policy(&problem);
        let a = sample_perturbation(&problem, &traj, &policy, &mut rng::stream(9, 0), true, 3);
        let b = sample_perturbation(&problem, &traj, &policy, &mut rng::stream(9, 0), true, 3);
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x, y);
        }
        assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn degenerate_covariance_reproduces_deterministic_rollout() {
        let problem = car_problem();
        let initial = ddp::rollout(&problem, &DVector::zeros(3), &vec![DVector::zeros(2); 30]);
        let result = ddp::solve(&problem, initial, &SolverConfig::default()).unwrap();
        // α → 0 limit: shrink the covariance factor to ~zero.
        let mut policy = UnimodalPolicy::from_backward_pass(
            &result.gains,
            &result.qmodel,
            Temperature::new(1.0),
        );
        for m in &mut policy.cov_factor {
            *m *= 1e-12;
        }
        let sample =
            sample_perturbation(&problem, &result.traj, &policy, &mut rng::stream(1, 0), true, 0);
        let reference = ddp::forward_pass(&problem, &result.traj, &result.gains, 1.0);
        for (a, b) in sample.states.iter().zip(&reference.states) {
            assert!((a - b).amax() < 1e-4);
        }
    }

    #[test]
    fn empirical_covariance_matches_policy() {
        let problem = car_problem();
        let (_, policy) = solved_policy(&problem);
        let alpha = 10.0;
        // Reconstruct the target covariance α·Q_uu⁻¹ from the stored factor.
        let m = &policy.cov_factor[0];
        let target = m * m.transpose();
        let mut r = rng::stream(77, 0);
        let n = 10_000;
        let mut mean = DVector::zeros(2);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let du = policy.sample_deviation(0, &mut r);
            mean += &du;
            samples.push(du);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(2, 2);
        for s in &samples {
            let d = s - &mean;
            cov += &d * d.transpose();
        }
        cov /= (n - 1) as f64;
        let err = (&cov - &target).norm() / target.norm();
        assert!(err < 0.05, "covariance relative error {err:.3} (alpha={alpha})");
    }

    #[test]
    fn best_mode_cost_never_increases_over_sampling_rounds() {
        let problem = car_problem();
        for seed in 0..50 {
            let initial = ddp::rollout(&problem, &DVector::zeros(3), &vec![DVector::zeros(2); 20]);
            let cfg = MeddpConfig { n_modes: 4, sample_every: 2, ..Default::default() };
            let solver = SolverConfig { max_iters: 8, convergence_tol: 0.0, ..Default::default() };
            let mut ens = ParticleEnsemble::initialize(
                &problem,
                initial,
                cfg.n_modes,
                cfg.sigma0,
                solver.reg_init,
                seed,
            );
            ens.ddp_round(&problem, &solver);
            let before = ens.best_cost();
            sampling_round(&mut ens, &problem, &cfg);
            ens.refresh_best();
            assert!(ens.best_cost() <= before, "sampling must preserve the best mode");
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_shift_invariant(
            values in proptest::collection::vec(-50.0f64..50.0, 1..10),
            shift in -20.0f64..20.0,
            alpha in 0.1f64..50.0,
        ) {
            let alpha = Temperature::new(alpha);
            let w = mode_weights(&values, alpha);
            let sum: f64 = w.0.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let w2 = mode_weights(&shifted, alpha);
            for (a, b) in w.0.iter().zip(&w2.0) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // The smallest value always receives the largest weight.
            let argmin = values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let argmax = w.0
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            prop_assert!((w.0[argmax] - w.0[argmin]).abs() < 1e-12);
        }
    }
}
