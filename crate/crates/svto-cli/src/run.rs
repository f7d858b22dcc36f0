//! Experiment execution: TO sweeps, MPC benchmark sweeps, CSV/JSON/SVG
//! emission.

use crate::config::{ExperimentConfig, Mode, Solver, SolverParams, System};
use crate::plot;
use anyhow::{Context, Result};
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};
use svto::benchmarks;
use svto::cost::{BarrierParams, Problem};
use svto::ddp::{self, SolverConfig, Trajectory};
use svto::meddp::{self, MeddpConfig};
use svto::mpc::{
    self, Controller, DdpController, EnsembleController, EnsembleKind, EpisodeRecord,
    FieldGeometry, MpcProtocol, MppiController, MppiKind, ObstacleField, SummaryRow,
};
use svto::mppi::MppiConfig;
use svto::svddp::{Schedule, SvddpConfig};

/// One line of results.csv. Hyperparameters are echoed on every row so the
/// file round-trips without the config.
struct ResultRow {
    mode: &'static str,
    system: &'static str,
    solver: &'static str,
    field_seed: Option<u64>,
    episode_seed: u64,
    final_cost: Option<f64>,
    iterations: Option<usize>,
    success: Option<bool>,
    reached: Option<bool>,
    violated: Option<bool>,
    max_violation: Option<f64>,
}

pub const CSV_HEADER: &str = "mode,system,solver,field_seed,episode_seed,final_cost,iterations,\
success,reached,violated,max_violation,alpha,sigma0,sample_every,n_modes,epsilon_array,\
collapse_floor,with_feedback,mu,delta,max_iters,mpc_warmup_iters,mpc_iters_per_call,\
mppi_n_samples,mppi_lambda,mppi_sigma,mppi_c_crush,mppi_n_modes,mppi_n_particles,mppi_sv_epsilon";

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    fn to_csv(&self, p: &SolverParams) -> String {
        let eps: Vec<String> = p.epsilon_array.iter().map(|e| e.to_string()).collect();
        let mu = p.mu.map(|v| v.to_string()).unwrap_or_default();
        let delta = p.delta.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.system,
            self.solver,
            fmt_opt(&self.field_seed),
            self.episode_seed,
            fmt_opt(&self.final_cost),
            fmt_opt(&self.iterations),
            fmt_opt(&self.success),
            fmt_opt(&self.reached),
            fmt_opt(&self.violated),
            fmt_opt(&self.max_violation),
            p.alpha,
            p.sigma0,
            p.sample_every,
            p.n_modes,
            eps.join(";"),
            p.collapse_floor,
            p.with_feedback,
            mu,
            delta,
            p.max_iters,
            p.mpc_warmup_iters,
            p.mpc_iters_per_call,
            p.mppi.n_samples,
            p.mppi.lambda,
            p.mppi.sigma,
            p.mppi.c_crush,
            p.mppi.n_modes,
            p.mppi.n_particles,
            p.mppi.sv_epsilon,
        )
    }
}

fn system_name(s: System) -> &'static str {
    match s {
        System::Car => "car",
        System::Quadrotor => "quadrotor",
        System::Arm => "arm",
    }
}

fn barrier_of(p: &SolverParams) -> BarrierParams {
    BarrierParams::new(p.mu.unwrap_or(0.1), p.delta.unwrap_or(0.05))
}

/// Barrier override for TO mode: only when the config sets μ or δ.
fn barrier_override(p: &SolverParams) -> Option<BarrierParams> {
    if p.mu.is_none() && p.delta.is_none() {
        None
    } else {
        Some(barrier_of(p))
    }
}

fn meddp_config(p: &SolverParams, multimodal: bool) -> MeddpConfig {
    MeddpConfig {
        alpha: p.alpha,
        sigma0: p.sigma0,
        sample_every: p.sample_every,
        n_modes: p.n_modes,
        multimodal,
        collapse_floor: p.collapse_floor,
        with_feedback: p.with_feedback,
        max_sample_retries: 5,
    }
}

fn svddp_config(p: &SolverParams) -> SvddpConfig {
    SvddpConfig {
        alpha: p.alpha,
        sigma0: p.sigma0,
        n_modes: p.n_modes,
        schedule: Schedule::new(p.sample_every, p.epsilon_array.clone()),
        with_feedback: p.with_feedback,
    }
}

fn mppi_config(p: &SolverParams, n_u: usize) -> MppiConfig {
    MppiConfig {
        n_samples: p.mppi.n_samples,
        lambda: p.mppi.lambda,
        sigma: vec![p.mppi.sigma; n_u],
        c_crush: p.mppi.c_crush,
        n_modes: p.mppi.n_modes,
        n_particles: p.mppi.n_particles,
        sv_epsilon: p.mppi.sv_epsilon,
    }
}

fn solver_config(p: &SolverParams) -> SolverConfig {
    SolverConfig {
        max_iters: p.max_iters,
        convergence_tol: 0.0,
        ..Default::default()
    }
}

/// Executes a validated configuration. Returns the output directory.
pub fn execute(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&out)?;
    // Provenance: the resolved configuration with all defaults materialized.
    fs::write(
        out.join("resolved_config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    match cfg.mode {
        Mode::To => run_to(cfg, &out)?,
        Mode::Mpc => run_mpc(cfg, &out)?,
    }
    Ok(out)
}

fn to_benchmark(cfg: &ExperimentConfig) -> benchmarks::ToBenchmark {
    let mut bench = match cfg.system {
        System::Car => benchmarks::car_pocket(),
        System::Quadrotor => benchmarks::quadrotor_reach(),
        System::Arm => benchmarks::arm_reach(),
    };
    if let Some(h) = cfg.to_horizon {
        bench.horizon = h;
    }
    if let Some(b) = barrier_override(&cfg.solver_params) {
        bench = bench.with_barrier(b);
    }
    bench
}

fn run_to(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let bench = to_benchmark(cfg);
    let params = &cfg.solver_params;
    let solver_cfg = solver_config(params);

    let mut rows: Vec<String> = Vec::new();
    let mut traces: Vec<(String, Vec<f64>)> = Vec::new();

    for solver in cfg.solver.list() {
        let runs: Vec<(f64, usize, Vec<f64>)> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let initial = bench.initial_trajectory();
                run_to_solver(solver, &bench.problem, initial, params, &solver_cfg, seed)
            })
            .collect();
        // Mean cost trace across seeds (traces padded to the longest).
        let longest = runs.iter().map(|(_, _, t)| t.len()).max().unwrap_or(0);
        let mut mean_trace = vec![0.0; longest];
        for (_, _, trace) in &runs {
            for i in 0..longest {
                let v = *trace.get(i).or(trace.last()).unwrap_or(&0.0);
                mean_trace[i] += v / runs.len() as f64;
            }
        }
        traces.push((solver.name().to_string(), mean_trace));

        for (&seed, (cost, iterations, _)) in cfg.seeds.iter().zip(&runs) {
            let row = ResultRow {
                mode: "to",
                system: system_name(cfg.system),
                solver: solver.name(),
                field_seed: None,
                episode_seed: seed,
                final_cost: Some(*cost),
                iterations: Some(*iterations),
                success: None,
                reached: None,
                violated: None,
                max_violation: None,
            };
            rows.push(row.to_csv(params));
        }
    }

    write_results(out, &rows)?;
    let plots = out.join("plots");
    fs::create_dir_all(&plots)?;
    match plot::convergence_svg(&traces) {
        Some(svg) => fs::write(plots.join("convergence.svg"), svg)?,
        None => eprintln!("warning: no cost traces to plot"),
    }
    Ok(())
}

fn run_to_solver(
    solver: Solver,
    problem: &Problem,
    initial: Trajectory,
    params: &SolverParams,
    solver_cfg: &SolverConfig,
    seed: u64,
) -> (f64, usize, Vec<f64>) {
    match solver {
        Solver::Ddp => {
            let r = ddp::solve(problem, initial, solver_cfg).expect("ddp solve failed");
            (r.traj.cost, r.iterations, r.cost_trace)
        }
        Solver::UgMeddp | Solver::MgMeddp => {
            let r = meddp::solve(
                problem,
                initial,
                &meddp_config(params, solver == Solver::MgMeddp),
                solver_cfg,
                seed,
            );
            (r.traj.cost, r.cost_trace.len() - 1, r.cost_trace)
        }
        Solver::Svddp => {
            let r = svto::svddp::solve(problem, initial, &svddp_config(params), solver_cfg, seed);
            (r.traj.cost, r.cost_trace.len() - 1, r.cost_trace)
        }
        _ => unreachable!("mppi solvers are rejected in to mode"),
    }
}

struct MpcSetup {
    model: std::sync::Arc<dyn svto::dynamics::DynamicsModel>,
    start: svto::dynamics::State,
    target: svto::dynamics::State,
    field_params: mpc::FieldParams,
    protocol: MpcProtocol,
    geometry: FieldGeometry,
}

fn mpc_setup(cfg: &ExperimentConfig) -> MpcSetup {
    let (model, start, target, field_params, mut protocol) = match cfg.system {
        System::Car => mpc::car_benchmark(),
        System::Quadrotor => mpc::quadrotor_benchmark(),
        System::Arm => unreachable!("validated"),
    };
    if let Some(v) = cfg.protocol.prediction_horizon {
        protocol.prediction_horizon = v;
    }
    if let Some(v) = cfg.protocol.total_steps {
        protocol.total_steps = v;
    }
    if let Some(v) = cfg.protocol.success_radius {
        protocol.success_radius = v;
    }
    let geometry = field_params.geometry;
    MpcSetup { model, start, target, field_params, protocol, geometry }
}

fn tracking_cost(cfg: &ExperimentConfig, target: &svto::dynamics::State) -> svto::QuadraticCost {
    match cfg.system {
        System::Car => mpc::car_tracking_cost(target),
        System::Quadrotor => mpc::quadrotor_tracking_cost(target),
        System::Arm => unreachable!("validated"),
    }
}

fn make_controller(
    solver: Solver,
    problem: &Problem,
    protocol: &MpcProtocol,
    params: &SolverParams,
    seed: u64,
) -> Box<dyn Controller> {
    let solver_cfg = solver_config(params);
    let horizon = protocol.prediction_horizon;
    match solver {
        Solver::Ddp => Box::new(DdpController::new(
            problem.clone(),
            solver_cfg,
            horizon,
            params.mpc_warmup_iters,
            params.mpc_iters_per_call,
        )),
        Solver::UgMeddp | Solver::MgMeddp => Box::new(EnsembleController::new(
            problem.clone(),
            solver_cfg,
            if solver == Solver::MgMeddp {
                EnsembleKind::MgMeddp(meddp_config(params, true))
            } else {
                EnsembleKind::UgMeddp(meddp_config(params, false))
            },
            horizon,
            params.mpc_warmup_iters,
            params.mpc_iters_per_call,
            seed,
        )),
        Solver::Svddp => Box::new(EnsembleController::new(
            problem.clone(),
            solver_cfg,
            EnsembleKind::Svddp(svddp_config(params)),
            horizon,
            params.mpc_warmup_iters,
            params.mpc_iters_per_call,
            seed,
        )),
        Solver::UgMppi | Solver::MgMppi | Solver::SvMppi => {
            let kind = match solver {
                Solver::UgMppi => MppiKind::Unimodal,
                Solver::MgMppi => MppiKind::Multimodal,
                _ => MppiKind::SteinVariational,
            };
            Box::new(MppiController::new(
                problem.clone(),
                mppi_config(params, problem.model.control_dim()),
                kind,
                horizon,
                seed,
            ))
        }
    }
}

fn run_mpc(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let setup = mpc_setup(cfg);
    let params = &cfg.solver_params;
    let episodes_dir = out.join("episodes");
    let plots_dir = out.join("plots");
    fs::create_dir_all(&episodes_dir)?;
    fs::create_dir_all(&plots_dir)?;

    let mut field_params = setup.field_params.clone();
        let fields: Vec<ObstacleField> = cfg
        .fields
        .seeds
        .iter()
        .map(|&fs| {
            mpc::generate_field(
                fs,
                &field_params,
                setup.start.clone(),
                setup.target.clone(),
                &setup.start.as_slice()[setup.model.position_range()],
            )
        })
        .collect();

    let mut rows: Vec<String> = Vec::new();
    let mut summaries: Vec<SummaryRow> = Vec::new();

    for solver in cfg.solver.list() {
        let mut solver_records: Vec<EpisodeRecord> = Vec::new();
        for field in &fields {
            let problem = mpc::field_problem(
                setup.model.clone(),
                tracking_cost(cfg, &setup.target),
                field,
                barrier_of(params),
            );
            let records: Vec<EpisodeRecord> = cfg
                .seeds
                .par_iter()
                .map(|&seed| {
                    let mut controller =
                        make_controller(solver, &problem, &setup.protocol, params, seed);
                    mpc::run_episode(
                        controller.as_mut(),
                        &problem,
                        field,
                        &setup.protocol,
                        solver.name(),
                        seed,
                    )
                })
                .collect();

            for rec in &records {
                fs::write(
                    episodes_dir.join(format!(
                        "{}_field{}_seed{}.json",
                        solver.name(),
                        field.seed,
                        rec.episode_seed
                    )),
                    serde_json::to_string(rec)?,
                )?;
                rows.push(
                    ResultRow {
                        mode: "mpc",
                        system: system_name(cfg.system),
                        solver: solver.name(),
                        field_seed: Some(field.seed),
                        episode_seed: rec.episode_seed,
                        final_cost: None,
                        iterations: None,
                        success: Some(rec.success),
                        reached: Some(rec.reached),
                        violated: Some(rec.violated),
                        max_violation: Some(rec.max_violation),
                    }
                    .to_csv(params),
                );
            }
            let refs: Vec<&EpisodeRecord> = records.iter().collect();
            let svg = plot::trajectories_svg(field, setup.geometry, &refs, setup.model.position_range());
            fs::write(
                plots_dir.join(format!("trajectories_{}_field{}.svg", solver.name(), field.seed)),
                svg,
            )?;
            solver_records.extend(records);
        }
        let refs: Vec<&EpisodeRecord> = solver_records.iter().collect();
        summaries.push(mpc::aggregate(solver.name(), &refs));
    }

    write_results(out, &rows)?;

    // Aggregate rows (success statistics and wall-time stats; the latter vary
    // between runs, which is why they live outside results.csv).
    let mut summary = String::from(
        "solver,episodes,success_pct,success_with_violation_pct,mean_violation,mean_call_time_s,std_call_time_s\n",
    );
    for s in &summaries {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.solver,
            s.episodes,
            s.success_pct,
            s.success_with_violation_pct,
            s.mean_violation,
            s.mean_call_time_s,
            s.std_call_time_s
        ));
    }
    fs::write(out.join("summary.csv"), summary)?;
    Ok(())
}

fn write_results(out: &Path, rows: &[String]) -> Result<()> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(out.join("results.csv"), text).context("writing results.csv")
}
