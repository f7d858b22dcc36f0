//! Receding-horizon harness: randomized obstacle fields, the MPC controllers
//! for every solver family, episode execution, and success/violation
//! metrics.

use crate::cost::{BarrierParams, Constraint, Problem, QuadraticCost};
use crate::ddp::{self, SolverConfig};
use crate::dynamics::{Car2d, Control, DynamicsModel, Quadrotor, State};
use crate::ensemble::ParticleEnsemble;
use crate::meddp::{self, MeddpConfig};
use crate::mppi::{self, MppiConfig, MppiEnsemble};
use crate::rng;
use crate::svddp::{self, SvddpConfig};
use nalgebra::{DVector, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

/// Geometry family of a generated field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldGeometry {
    /// Circles in the (x, y) plane (planar car).
    Circles2d,
    /// Cylinders with axis along y, placed in the (x, z) plane (quadrotor).
    CylindersAlongY,
}

/// Parameters of the randomized field generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldParams {
    pub geometry: FieldGeometry,
    pub count_min: usize,
    pub count_max: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Box the obstacle centers are drawn from, in the two active
    /// coordinates.
    pub arena_min: [f64; 2],
    pub arena_max: [f64; 2],
    /// Barrier margin attached to the generated obstacles.
    pub margin: f64,
    /// Required distance from the start/target to every obstacle surface.
    pub clearance: f64,
    /// When set, obstacle centers are drawn from a band of this half-width
    /// around the start-target line instead of the full arena, so every
    /// field contests the direct route.
    pub corridor_halfwidth: Option<f64>,
}

/// A randomized obstacle field with the benchmark start and target.
#[derive(Debug, Clone)]
pub struct ObstacleField {
    pub obstacles: Vec<Constraint>,
    pub start: State,
    /// Workspace target position (2D for the car, 3D for the quadrotor).
    pub target: DVector<f64>,
    pub seed: u64,
}

/// Planar coordinates of a workspace position under the field geometry.
fn active_plane(geometry: FieldGeometry, pos: &[f64]) -> [f64; 2] {
    match geometry {
        FieldGeometry::Circles2d => [pos[0], pos[1]],
        FieldGeometry::CylindersAlongY => [pos[0], pos[2]],
    }
}

/// Rejection-samples obstacles, keeping the start and target clear of every
/// obstacle surface by at least `clearance`. Deterministic per seed. If an
/// obstacle cannot be placed within a bounded number of attempts the count
/// is reduced with a warning.
pub fn generate_field(
    seed: u64,
    params: &FieldParams,
    start: State,
    target: DVector<f64>,
    start_pos: &[f64],
) -> ObstacleField {
    let mut r = rng::stream(seed, 0);
    let n_target = if params.count_max > params.count_min {
        r.random_range(params.count_min..=params.count_max)
    } else {
        params.count_min
    };
    let sp = active_plane(params.geometry, start_pos);
    let tp = active_plane(params.geometry, target.as_slice());

    // Unit vectors along and across the start-target line, used by the
    // corridor-biased placement.
    let axis = [tp[0] - sp[0], tp[1] - sp[1]];
    let axis_len = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt().max(1e-9);
    let along = [axis[0] / axis_len, axis[1] / axis_len];
    let across = [-along[1], along[0]];

    let mut obstacles = Vec::with_capacity(n_target);
    for _ in 0..n_target {
        let mut placed = false;
        for _ in 0..100 {
            let (cx, cy) = match params.corridor_halfwidth {
                Some(hw) => {
                    let s = r.random_range(0.12..0.88) * axis_len;
                    let l = r.random_range(-hw..hw);
                    (
                        (sp[0] + s * along[0] + l * across[0])
                            .clamp(params.arena_min[0], params.arena_max[0]),
                        (sp[1] + s * along[1] + l * across[1])
                            .clamp(params.arena_min[1], params.arena_max[1]),
                    )
                }
                None => (
                    r.random_range(params.arena_min[0]..params.arena_max[0]),
                    r.random_range(params.arena_min[1]..params.arena_max[1]),
                ),
            };
            let radius = r.random_range(params.radius_min..params.radius_max);
            let clear = |p: [f64; 2]| {
                let d = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
                d - radius >= params.clearance
            };
            if clear(sp) && clear(tp) {
                let con = match params.geometry {
                    FieldGeometry::Circles2d => {
                        Constraint::circle(Vector2::new(cx, cy), radius, params.margin)
                    }
                    FieldGeometry::CylindersAlongY => Constraint::cylinder(
                        Vector3::new(cx, 0.0, cy),
                        1,
                        radius,
                        params.margin,
                    ),
                };
                obstacles.push(con);
                placed = true;
                break;
            }
        }
        if !placed {
            eprintln!(
                "field {seed}: obstacle placement failed after 100 attempts, reducing count to {}",
                obstacles.len()
            );
            break;
        }
    }

    ObstacleField { obstacles, start, target, seed }
}

/// Receding-horizon protocol: per-step planning horizon, episode length, and
/// the success radius around the target.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MpcProtocol {
    pub prediction_horizon: usize,
    pub total_steps: usize,
    pub success_radius: f64,
}

/// Execution record of one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub solver: String,
    pub field_seed: u64,
    pub episode_seed: u64,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// Reached the success ball at some step with no obstacle contact.
    pub success: bool,
    /// Reached the success ball at some step (violations allowed).
    pub reached: bool,
    pub violated: bool,
    pub max_violation: f64,
    /// Wall time of each MPC call in seconds.
    pub call_times_s: Vec<f64>,
}

/// A receding-horizon controller: plans from the current state and returns
/// the control to execute.
pub trait Controller: Send {
    fn plan(&mut self, x0: &State) -> Control;
}

/// Runs one closed-loop episode: plan, execute the first control through the
/// true dynamics, record. A controller failure (non-finite control) executes
/// zero control for that step.
pub fn run_episode(
    controller: &mut dyn Controller,
    problem: &Problem,
    field: &ObstacleField,
    protocol: &MpcProtocol,
    solver_name: &str,
    episode_seed: u64,
) -> EpisodeRecord {
    let model = problem.model.as_ref();
    let mut x = field.start.clone();
    let mut states = vec![x.as_slice().to_vec()];
    let mut controls = Vec::with_capacity(protocol.total_steps);
    let mut call_times = Vec::with_capacity(protocol.total_steps);
    let range = model.position_range();

    let dist_to_target = |x: &State| -> f64 {
        let pos = &x.as_slice()[range.clone()];
        pos.iter()
            .zip(field.target.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let mut max_violation = problem.max_violation(&x);
    let mut reached = dist_to_target(&x) <= protocol.success_radius;

    for _ in 0..protocol.total_steps {
        let t0 = Instant::now();
        let mut u = controller.plan(&x);
        call_times.push(t0.elapsed().as_secs_f64());
        if !u.iter().all(|v| v.is_finite()) {
            u = DVector::zeros(model.control_dim());
        }
        x = model.step(&x, &u);
        controls.push(u.as_slice().to_vec());
        states.push(x.as_slice().to_vec());
        max_violation = max_violation.max(problem.max_violation(&x));
        reached = reached || dist_to_target(&x) <= protocol.success_radius;
    }

    let violated = max_violation > 0.0;
    EpisodeRecord {
        solver: solver_name.to_string(),
        field_seed: field.seed,
        episode_seed,
        states,
        controls,
        success: reached && !violated,
        reached,
        violated,
        max_violation,
        call_times_s: call_times,
    }
}

/// Aggregate statistics over a set of episode records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub solver: String,
    pub episodes: usize,
    pub success_pct: f64,
    /// Reached the target, violations allowed.
    pub success_with_violation_pct: f64,
    /// Mean max-violation over episodes that reached the target while
    /// violating; 0 when there are none.
    pub mean_violation: f64,
    pub mean_call_time_s: f64,
    pub std_call_time_s: f64,
}

pub fn aggregate(solver: &str, records: &[&EpisodeRecord]) -> SummaryRow {
    assert!(!records.is_empty());
    let n = records.len() as f64;
    let success = records.iter().filter(|r| r.success).count() as f64;
    let reached = records.iter().filter(|r| r.reached).count() as f64;
    let violating: Vec<f64> = records
        .iter()
        .filter(|r| r.reached && r.violated)
        .map(|r| r.max_violation)
        .collect();
    let mean_violation = if violating.is_empty() {
        0.0
    } else {
        violating.iter().sum::<f64>() / violating.len() as f64
    };
    let times: Vec<f64> = records.iter().flat_map(|r| r.call_times_s.iter().copied()).collect();
    let mean_t = times.iter().sum::<f64>() / times.len() as f64;
    let var_t = times.iter().map(|t| (t - mean_t) * (t - mean_t)).sum::<f64>() / times.len() as f64;
    SummaryRow {
        solver: solver.to_string(),
        episodes: records.len(),
        success_pct: 100.0 * success / n,
        success_with_violation_pct: 100.0 * reached / n,
        mean_violation,
        mean_call_time_s: mean_t,
        std_call_time_s: var_t.sqrt(),
    }
}

// ---------------------------------------------------------------------------
// Controllers
// ---------------------------------------------------------------------------

/// Plain DDP in MPC mode with shift-by-one warm starting.
pub struct DdpController {
    problem: Problem,
    solver: SolverConfig,
    horizon: usize,
    warmup_iters: usize,
    iters_per_call: usize,
    controls: Option<Vec<Control>>,
    reg: f64,
}

impl DdpController {
    pub fn new(
        problem: Problem,
        solver: SolverConfig,
        horizon: usize,
        warmup_iters: usize,
        iters_per_call: usize,
    ) -> Self {
        let reg = solver.reg_init;
        Self { problem, solver, horizon, warmup_iters, iters_per_call, controls: None, reg }
    }
}

impl Controller for DdpController {
    fn plan(&mut self, x0: &State) -> Control {
        let (controls, iters) = match self.controls.take() {
            Some(mut c) => {
                c.rotate_left(1);
                let last = c.len() - 1;
                c[last] = c[last.saturating_sub(1)].clone();
                (c, self.iters_per_call)
            }
            None => (
                vec![self.problem.model.neutral_control(); self.horizon],
                self.warmup_iters,
            ),
        };
        let mut traj = ddp::rollout(&self.problem, x0, &controls);
        for _ in 0..iters {
            match ddp::solve_one_iteration(&self.problem, &traj, &self.solver, &mut self.reg) {
                Ok(result) => traj = result.traj,
                Err(_) => {
                    self.reg = self.solver.reg_init;
                    break;
                }
            }
        }
        let u = traj.controls[0].clone();
        self.controls = Some(traj.controls);
        u
    }
}

/// Which perturbation family an ensemble MPC controller uses.
pub enum EnsembleKind {
    UgMeddp(MeddpConfig),
    MgMeddp(MeddpConfig),
    Svddp(SvddpConfig),
}

impl EnsembleKind {
    fn n_modes(&self) -> usize {
        match self {
            EnsembleKind::UgMeddp(c) | EnsembleKind::MgMeddp(c) => c.n_modes,
            EnsembleKind::Svddp(c) => c.n_modes,
        }
    }

    fn sigma0(&self) -> f64 {
        match self {
            EnsembleKind::UgMeddp(c) | EnsembleKind::MgMeddp(c) => c.sigma0,
            EnsembleKind::Svddp(c) => c.sigma0,
        }
    }

    fn every(&self) -> usize {
        match self {
            EnsembleKind::UgMeddp(c) | EnsembleKind::MgMeddp(c) => c.sample_every,
            EnsembleKind::Svddp(c) => c.schedule.every,
        }
    }
}

/// MEDDP/SVDDP in MPC mode: the mode ensemble persists across calls (each
/// mode shift-warm-started), and the perturbation schedule counts global DDP
/// iterations across calls.
pub struct EnsembleController {
    problem: Problem,
    solver: SolverConfig,
    kind: EnsembleKind,
    horizon: usize,
    warmup_iters: usize,
    iters_per_call: usize,
    seed: u64,
    ensemble: Option<ParticleEnsemble>,
    global_iter: usize,
}

impl EnsembleController {
    pub fn new(
        problem: Problem,
        solver: SolverConfig,
        kind: EnsembleKind,
        horizon: usize,
        warmup_iters: usize,
        iters_per_call: usize,
        seed: u64,
    ) -> Self {
        Self {
            problem,
            solver,
            kind,
            horizon,
            warmup_iters,
            iters_per_call,
            seed,
            ensemble: None,
            global_iter: 0,
        }
    }
}

impl Controller for EnsembleController {
    fn plan(&mut self, x0: &State) -> Control {
        let iters = match self.ensemble.as_mut() {
            None => {
                let initial = ddp::rollout(
                    &self.problem,
                    x0,
                    &vec![self.problem.model.neutral_control(); self.horizon],
                );
                self.ensemble = Some(ParticleEnsemble::initialize(
                    &self.problem,
                    initial,
                    self.kind.n_modes(),
                    self.kind.sigma0(),
                    self.solver.reg_init,
                    self.seed,
                ));
                self.warmup_iters
            }
            Some(ens) => {
                for mode in &mut ens.modes {
                    mode.shift_for_mpc(&self.problem, x0);
                }
                ens.refresh_best();
                self.iters_per_call
            }
        };

        let ens = self.ensemble.as_mut().unwrap();
        let every = self.kind.every();
        for _ in 0..iters {
            if every > 0 && self.global_iter > 0 && self.global_iter % every == 0 {
                match &self.kind {
                    EnsembleKind::UgMeddp(cfg) | EnsembleKind::MgMeddp(cfg) => {
                        meddp::sampling_round(ens, &self.problem, cfg)
                    }
                    EnsembleKind::Svddp(cfg) => svddp::sv_round(ens, &self.problem, cfg),
                }
            }
            ens.ddp_round(&self.problem, &self.solver);
            self.global_iter += 1;
        }
        ens.best().traj.controls[0].clone()
    }
}

/// MPPI variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MppiKind {
    Unimodal,
    Multimodal,
    SteinVariational,
}

/// MPPI in MPC mode.
pub struct MppiController {
    problem: Problem,
    cfg: MppiConfig,
    kind: MppiKind,
    horizon: usize,
    seed: u64,
    ensemble: Option<MppiEnsemble>,
}

impl MppiController {
    pub fn new(problem: Problem, cfg: MppiConfig, kind: MppiKind, horizon: usize, seed: u64) -> Self {
        Self { problem, cfg, kind, horizon, seed, ensemble: None }
    }
}

impl Controller for MppiController {
    fn plan(&mut self, x0: &State) -> Control {
        if self.ensemble.is_none() {
            let units = match self.kind {
                MppiKind::Unimodal => 1,
                MppiKind::Multimodal => self.cfg.n_modes,
                MppiKind::SteinVariational => self.cfg.n_particles,
            };
            self.ensemble = Some(MppiEnsemble::new(&self.problem, units, self.horizon, self.seed));
        }
        let ens = self.ensemble.as_mut().unwrap();
        ens.shift();
        match self.kind {
            MppiKind::Unimodal => mppi::ug_update(&self.problem, x0, ens, &self.cfg),
            MppiKind::Multimodal => mppi::mg_update(&self.problem, x0, ens, &self.cfg),
            MppiKind::SteinVariational => mppi::sv_update(&self.problem, x0, ens, &self.cfg),
        }
        let best = ens.best_unit(&self.problem, x0, self.cfg.c_crush);
        ens.nominals[best][0].clone()
    }
}

// ---------------------------------------------------------------------------
// Benchmark presets
// ---------------------------------------------------------------------------

/// 2D-car navigation benchmark: start (0,0), target (5,5), 6×6 arena.
pub fn car_benchmark() -> (Arc<dyn DynamicsModel>, State, DVector<f64>, FieldParams, MpcProtocol) {
    let model: Arc<dyn DynamicsModel> = Arc::new(Car2d::default());
    let start = DVector::zeros(3);
    let target = DVector::from_vec(vec![5.0, 5.0]);
    let params = FieldParams {
        geometry: FieldGeometry::Circles2d,
        count_min: 10,
        count_max: 14,
        radius_min: 0.45,
        radius_max: 0.75,
        arena_min: [0.3, 0.3],
        arena_max: [5.7, 5.7],
        margin: 0.12,
        clearance: 0.5,
        corridor_halfwidth: Some(1.3),
    };
    let protocol = MpcProtocol {
        prediction_horizon: 60,
        total_steps: 200,
        success_radius: 0.5,
    };
    (model, start, target, params, protocol)
}

/// Quadrotor navigation benchmark: start (0,0,0), target (5,0,5), cylinders
/// along the y axis.
pub fn quadrotor_benchmark(
) -> (Arc<dyn DynamicsModel>, State, DVector<f64>, FieldParams, MpcProtocol) {
    let model: Arc<dyn DynamicsModel> = Arc::new(Quadrotor::default());
    let start = DVector::zeros(12);
    let target = DVector::from_vec(vec![5.0, 0.0, 5.0]);
    let params = FieldParams {
        geometry: FieldGeometry::CylindersAlongY,
        count_min: 6,
        count_max: 9,
        radius_min: 0.35,
        radius_max: 0.6,
        arena_min: [0.3, 0.3],
        arena_max: [5.7, 5.7],
        margin: 0.12,
        clearance: 0.5,
        corridor_halfwidth: Some(1.3),
    };
    let protocol = MpcProtocol {
        prediction_horizon: 50,
        total_steps: 350,
        success_radius: 0.5,
    };
    (model, start, target, params, protocol)
}

/// Tracking cost used by the car navigation tasks.
pub fn car_tracking_cost(target: &DVector<f64>) -> QuadraticCost {
    QuadraticCost::new(
        DVector::from_vec(vec![0.1, 0.1, 0.0]),
        DVector::from_vec(vec![0.02, 0.005]),
        DVector::from_vec(vec![10.0, 10.0, 0.0]),
        DVector::from_vec(vec![target[0], target[1], 0.0]),
    )
}

/// Tracking cost used by the quadrotor navigation tasks: position plus
/// attitude/velocity damping, hovering at the target.
pub fn quadrotor_tracking_cost(target: &DVector<f64>) -> QuadraticCost {
    let mut x_goal = DVector::zeros(12);
    x_goal[0] = target[0];
    x_goal[1] = target[1];
    x_goal[2] = target[2];
    let mut p = DVector::zeros(12);
    for i in 0..3 {
        p[i] = 0.05; // position
        p[3 + i] = 0.5; // attitude
        p[6 + i] = 0.05; // velocity
        p[9 + i] = 0.05; // body rates
    }
    let mut qf = DVector::zeros(12);
    for i in 0..3 {
        qf[i] = 10.0;
        qf[3 + i] = 2.0;
        qf[6 + i] = 1.0;
        qf[9 + i] = 1.0;
    }
    QuadraticCost::new(p, DVector::from_element(4, 0.02), qf, x_goal)
}

/// Assembles the constrained planning problem for a generated field.
pub fn field_problem(
    model: Arc<dyn DynamicsModel>,
    cost: QuadraticCost,
    field: &ObstacleField,
    barrier: BarrierParams,
) -> Problem {
    Problem::new(model, cost, field.obstacles.clone(), barrier)
}
