//! Experiment configuration: JSON schema with strict key checking and
//! materialized defaults.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Single trajectory-optimization solves.
    To,
    /// Receding-horizon benchmark on randomized obstacle fields.
    Mpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Car,
    Quadrotor,
    Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Ddp,
    UgMeddp,
    MgMeddp,
    Svddp,
    UgMppi,
    MgMppi,
    SvMppi,
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Ddp => "ddp",
            Solver::UgMeddp => "ug_meddp",
            Solver::MgMeddp => "mg_meddp",
            Solver::Svddp => "svddp",
            Solver::UgMppi => "ug_mppi",
            Solver::MgMppi => "mg_mppi",
            Solver::SvMppi => "sv_mppi",
        }
    }

    pub fn is_mppi(&self) -> bool {
        matches!(self, Solver::UgMppi | Solver::MgMppi | Solver::SvMppi)
    }
}

/// One or several solvers (a sweep compares them on identical fields/seeds).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolverChoice {
    One(Solver),
    Many(Vec<Solver>),
}

impl SolverChoice {
    pub fn list(&self) -> Vec<Solver> {
        match self {
            SolverChoice::One(s) => vec![*s],
            SolverChoice::Many(v) => v.clone(),
        }
    }
}

/// DDP-family and sampling hyperparameters. Defaults are the desk-scale
/// values used by the benchmark suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Entropy temperature α.
    pub alpha: f64,
    /// Isotropic std of the initial control sampling Σ₀.
    pub sigma0: f64,
    /// Perturbation round every m-th iteration.
    pub sample_every: usize,
    /// Ensemble size N.
    pub n_modes: usize,
    /// SV step-size candidates, non-increasing, ending with 0.
    pub epsilon_array: Vec<f64>,
    /// Mode-collapse weight floor (multimodal sampling).
    pub collapse_floor: f64,
    /// Keep the DDP feedback term when sampling / applying SV updates.
    pub with_feedback: bool,
    /// Relaxed-barrier weight μ (None: benchmark default, 0.1 for MPC).
    pub mu: Option<f64>,
    /// Relaxed-barrier width δ (None: benchmark default, 0.05 for MPC).
    pub delta: Option<f64>,
    /// TO iteration budget.
    pub max_iters: usize,
    /// DDP iterations on the first MPC call.
    pub mpc_warmup_iters: usize,
    /// DDP iterations on subsequent MPC calls.
    pub mpc_iters_per_call: usize,
    pub mppi: MppiParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            sigma0: 0.5,
            sample_every: 5,
            n_modes: 8,
            epsilon_array: vec![1.0, 0.5, 0.25, 0.0],
            collapse_floor: 0.02,
            with_feedback: true,
            mu: None,
            delta: None,
            max_iters: 100,
            mpc_warmup_iters: 20,
            mpc_iters_per_call: 3,
            mppi: MppiParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiParams {
    pub n_samples: usize,
    pub lambda: f64,
    /// Per-channel sampling std (scalar, applied to every channel).
    pub sigma: f64,
    pub c_crush: f64,
    pub n_modes: usize,
    pub n_particles: usize,
    pub sv_epsilon: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self {
            n_samples: 2048,
            lambda: 1.0,
            sigma: 0.6,
            c_crush: 1e4,
            n_modes: 8,
            n_particles: 8,
            sv_epsilon: 0.5,
        }
    }
}

/// Receding-horizon protocol overrides (defaults depend on the system).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub prediction_horizon: Option<usize>,
    pub total_steps: Option<usize>,
    pub success_radius: Option<f64>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { prediction_horizon: None, total_steps: None, success_radius: None }
    }
}

/// Obstacle-field sweep: which field seeds to generate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSweep {
    pub seeds: Vec<u64>,
}

impl Default for FieldSweep {
    fn default() -> Self {
        Self { seeds: (0..10).collect() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub system: System,
    pub solver: SolverChoice,
    /// Episode seeds (mpc) or solve seeds (to).
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub solver_params: SolverParams,
    #[serde(default)]
    pub protocol: ProtocolParams,
    #[serde(default)]
    pub fields: FieldSweep,
    /// TO horizon override (defaults per system benchmark).
    #[serde(default)]
    pub to_horizon: Option<usize>,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_output_dir() -> String {
    "runs/out".to_string()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config error: `seeds` must not be empty");
        }
        let p = &self.solver_params;
        if p.alpha <= 0.0 || p.sigma0 < 0.0 {
            bail!("config error: alpha > 0 and sigma0 >= 0 required");
        }
        if p.mu.is_some_and(|m| m < 0.0) || p.delta.is_some_and(|d| d <= 0.0) {
            bail!("config error: mu >= 0 and delta > 0 required");
        }
        if p.n_modes == 0 || p.sample_every == 0 {
            bail!("config error: n_modes and sample_every must be >= 1");
        }
        if p.epsilon_array.is_empty()
            || p.epsilon_array.windows(2).any(|w| w[0] < w[1])
            || *p.epsilon_array.last().unwrap() != 0.0
        {
            bail!("config error: epsilon_array must be non-increasing and end with 0");
        }
        for solver in self.solver.list() {
            if solver.is_mppi() && self.mode == Mode::To {
                bail!(
                    "config error: solver {} runs in mpc mode only",
                    solver.name()
                );
            }
        }
        if self.mode == Mode::Mpc && self.system == System::Arm {
            bail!("config error: mpc mode supports car and quadrotor");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"mode":"to","system":"car","solver":"ddp"}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.solver_params.n_modes, 8);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_name() {
        let err = serde_json::from_str::<ExperimentConfig>(
            r#"{"mode":"to","system":"car","solver":"ddp","tempratures":[1]}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("tempratures"), "diagnostic must name the key: {err}");
    }

    #[test]
    fn solver_list_accepts_string_or_array() {
        let one: ExperimentConfig =
            serde_json::from_str(r#"{"mode":"to","system":"car","solver":"svddp"}"#).unwrap();
        assert_eq!(one.solver.list(), vec![Solver::Svddp]);
        let many: ExperimentConfig = serde_json::from_str(
            r#"{"mode":"to","system":"car","solver":["ddp","svddp"]}"#,
        )
        .unwrap();
        assert_eq!(many.solver.list().len(), 2);
    }

    #[test]
    fn mppi_in_to_mode_is_rejected() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"mode":"to","system":"car","solver":"ug_mppi"}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
