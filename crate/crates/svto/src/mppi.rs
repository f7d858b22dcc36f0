//! Sampling-based MPC baselines: unimodal MPPI, multimodal MPPI, and Stein
//! variational MPPI.
//!
//! Constraints are handled with a crash cost instead of barriers: rollouts
//! freeze at the first obstacle contact and every violating timestep adds
//! `c_crush`. Control limits are enforced by clamping the sampled sequences.

use crate::cost::Problem;
use crate::dynamics::Control;
use crate::rng;
use crate::svddp::{median_bandwidth, repulsive_gradient};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct MppiConfig {
    /// Total rollout budget per update (split across modes/particles).
    pub n_samples: usize,
    /// Softmax temperature λ of the importance weights.
    pub lambda: f64,
    /// Per-channel sampling std.
    pub sigma: Vec<f64>,
    /// Penalty added for every timestep spent in violation.
    pub c_crush: f64,
    /// Mode count of the multimodal variant.
    pub n_modes: usize,
    /// Particle count of the Stein variational variant.
    pub n_particles: usize,
    /// Step size of the Stein repulsion on mean control sequences.
    pub sv_epsilon: f64,
}

impl MppiConfig {
    pub fn isotropic(n_samples: usize, lambda: f64, sigma: f64, n_u: usize) -> Self {
        Self {
            n_samples,
            lambda,
            sigma: vec![sigma; n_u],
            c_crush: 1e4,
            n_modes: 8,
            n_particles: 8,
            sv_epsilon: 0.5,
        }
    }
}

/// Clamp a control sequence to the model bounds, in place.
pub fn clamp_controls(problem: &Problem, controls: &mut [Control]) {
    let (lo, hi) = problem.model.control_bounds();
    for u in controls {
        for i in 0..u.len() {
            u[i] = u[i].clamp(lo[i], hi[i]);
        }
    }
}

/// Quadratic cost plus crash penalty. Propagation freezes at the first
/// obstacle contact; every violating timestep (including the frozen tail)
/// adds `c_crush`.
pub fn rollout_cost(
    problem: &Problem,
    x0: &DVector<f64>,
    controls: &[Control],
    c_crush: f64,
) -> f64 {
    let mut x = x0.clone();
    let mut frozen = false;
    let mut total = 0.0;
    for u in controls {
        if problem.max_violation(&x) > 0.0 {
            total += c_crush;
            frozen = true;
        }
        total += problem.cost.stage(&x, u);
        if !frozen {
            let next = problem.model.step(&x, u);
            if !next.iter().all(|v| v.is_finite()) {
                return f64::INFINITY;
            }
            x = next;
        }
    }
    if problem.max_violation(&x) > 0.0 {
        total += c_crush;
    }
    total += problem.cost.terminal(&x);
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

/// Exponential path-integral weights w_i ∝ exp(−(J_i − min J)/λ). Non-finite
/// costs get zero weight; returns None when every cost is non-finite.
pub fn importance_weights(costs: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let min = costs.iter().cloned().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { (-(c - min) / lambda).exp() } else { 0.0 })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Some(weights)
}

/// One MPPI update of a nominal control sequence: sample Gaussian
/// perturbations, clamp, roll out, and return the importance-weighted mean.
/// If every rollout diverges the nominal is returned unchanged.
pub fn mppi_update(
    problem: &Problem,
    x0: &DVector<f64>,
    nominal: &[Control],
    n_samples: usize,
    cfg: &MppiConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Control> {
    let n_u = problem.model.control_dim();
    let horizon = nominal.len();

    // Draw all noise sequentially (deterministic), evaluate in parallel.
    let mut samples: Vec<Vec<Control>> = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut seq: Vec<Control> = nominal
            .iter()
            .map(|u| {
                DVector::from_fn(n_u, |i, _| {
                    u[i] + cfg.sigma[i] * rng.sample::<f64, _>(StandardNormal)
                })
            })
            .collect();
        clamp_controls(problem, &mut seq);
        samples.push(seq);
    }

    let costs: Vec<f64> = samples
        .par_iter()
        .map(|seq| rollout_cost(problem, x0, seq, cfg.c_crush))
        .collect();

    let weights = match importance_weights(&costs, cfg.lambda) {
        Some(w) => w,
        None => return nominal.to_vec(),
    };

    let mut out = vec![DVector::zeros(n_u); horizon];
    for (seq, w) in samples.iter().zip(&weights) {
        for (t, u) in seq.iter().enumerate() {
            out[t] += u * *w;
        }
    }
    out
}

/// Nominal sequences of a (possibly multimodal) MPPI controller, one random
/// stream per unit.
pub struct MppiEnsemble {
    pub nominals: Vec<Vec<Control>>,
    pub rngs: Vec<ChaCha8Rng>,
}

impl MppiEnsemble {
    pub fn new(problem: &Problem, n_units: usize, horizon: usize, seed: u64) -> Self {
        assert!(n_units >= 1);
        let neutral = problem.model.neutral_control();
        Self {
            nominals: vec![vec![neutral; horizon]; n_units],
            rngs: (0..n_units).map(|i| rng::stream(seed, i as u64)).collect(),
        }
    }

    /// Receding-horizon shift: drop the first control, repeat the last.
    pub fn shift(&mut self) {
        for nominal in &mut self.nominals {
            nominal.rotate_left(1);
            let last = nominal.len() - 1;
            nominal[last] = nominal[last.saturating_sub(1)].clone();
        }
    }

    /// Index of the unit whose nominal currently achieves the lowest
    /// rollout cost (first index wins ties).
    pub fn best_unit(&self, problem: &Problem, x0: &DVector<f64>, c_crush: f64) -> usize {
        let costs: Vec<f64> = self
            .nominals
            .iter()
            .map(|n| rollout_cost(problem, x0, n, c_crush))
            .collect();
        let mut best = 0;
        for (i, c) in costs.iter().enumerate() {
            if *c < costs[best] {
                best = i;
            }
        }
        best
    }
}

/// Unimodal MPPI: a single nominal updated with the full sample budget.
pub fn ug_update(problem: &Problem, x0: &DVector<f64>, ens: &mut MppiEnsemble, cfg: &MppiConfig) {
    let nominal = ens.nominals[0].clone();
    ens.nominals[0] = mppi_update(problem, x0, &nominal, cfg.n_samples, cfg, &mut ens.rngs[0]);
}

/// Multimodal MPPI: independent updates per mode, sample budget split evenly.
pub fn mg_update(problem: &Problem, x0: &DVector<f64>, ens: &mut MppiEnsemble, cfg: &MppiConfig) {
    let per_mode = (cfg.n_samples / ens.nominals.len()).max(1);
    let x0 = x0.clone();
    let nominals = std::mem::take(&mut ens.nominals);
    ens.nominals = nominals
        .into_iter()
        .zip(ens.rngs.iter_mut())
        .map(|(nominal, rng)| mppi_update(problem, &x0, &nominal, per_mode, cfg, rng))
        .collect();
}

/// Stein variational MPPI: per-particle MPPI updates followed by one SVGD
/// repulsion step on the flattened mean control sequences (median-heuristic
/// bandwidth over the whole-trajectory particles), then re-clamping.
pub fn sv_update(problem: &Problem, x0: &DVector<f64>, ens: &mut MppiEnsemble, cfg: &MppiConfig) {
    let n = ens.nominals.len();
    let per_particle = (cfg.n_samples / n).max(1);
    let x0v = x0.clone();
    let nominals = std::mem::take(&mut ens.nominals);
    let mut updated: Vec<Vec<Control>> = nominals
        .into_iter()
        .zip(ens.rngs.iter_mut())
        .map(|(nominal, rng)| mppi_update(problem, &x0v, &nominal, per_particle, cfg, rng))
        .collect();

    if n >= 2 {
        let n_u = problem.model.control_dim();
        let horizon = updated[0].len();
        let dim = n_u * horizon;
        let thetas: Vec<DVector<f64>> = updated
            .iter()
            .map(|seq| {
                DVector::from_fn(dim, |k, _| seq[k / n_u][k % n_u])
            })
            .collect();
        let params = median_bandwidth(&thetas, dim);
        let phi = repulsive_gradient(&thetas, &params);
        for (p_idx, seq) in updated.iter_mut().enumerate() {
            for t in 0..horizon {
                for i in 0..n_u {
                    seq[t][i] += cfg.sv_epsilon * phi[p_idx][t * n_u + i];
                }
            }
            clamp_controls(problem, seq);
        }
    }
    ens.nominals = updated;
}
