//! Plan, initialise, optimise, recover and check, repeated over seeds.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use tether_core::environment::compute_edf;
use tether_core::optimizer::{
    evaluate, initialize_from_path, optimize, recover_catenaries, CurveMode, Problem, Trajectory, TrajectoryMetrics,
};
use tether_core::planner::{plan, DpMode, PlannerParams, PlanningEnv};

use crate::config::Config;
use crate::scenarios::Scenario;
use crate::stats::summarize;

/// One seeded pipeline run. Failures are recorded in `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario: &'static str,
    pub mode: &'static str,
    pub seed: u64,
    pub planned: bool,
    pub path_nodes: usize,
    pub plan_iterations: usize,
    pub dp_rate: f64,
    pub opt_iterations: usize,
    pub termination: String,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub monotone: bool,
    pub feasible: bool,
    pub min_do_ugv: f64,
    pub min_do_uav: f64,
    pub min_do_tether: f64,
    pub mean_vel_ugv: f64,
    pub mean_vel_uav: f64,
    pub mean_acc_ugv: f64,
    pub mean_acc_uav: f64,
    /// Recovered catenaries, and how many meet the length and gap margins.
    pub recovered: usize,
    pub recovered_length_ok: usize,
    pub recovered_gap_ok: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTiming {
    pub scenario: &'static str,
    pub mode: &'static str,
    pub seed: u64,
    pub plan_time_s: f64,
    pub opt_time_s: f64,
}

pub fn mode_tag(mode: CurveMode) -> &'static str {
    match mode {
        CurveMode::Parabola => "parabola",
        CurveMode::Catenary => "catenary",
    }
}

/// Planner parameters for a scenario, seed and curve mode: parabola runs
/// plan with the parabola decision problem, catenary runs with the numeric
/// catenary one.
pub fn planner_params(cfg: &Config, scenario: &Scenario, mode: CurveMode, seed: u64) -> PlannerParams {
    PlannerParams {
        l_max: scenario.l_max,
        rng_seed: seed,
        dp_mode: match mode {
            CurveMode::Parabola => DpMode::Pdp,
            CurveMode::Catenary => DpMode::Cdp,
        },
        cdp_dl: cfg.cdp_dl,
        cdp_samples: cfg.cdp_samples,
        ..cfg.planner
    }
}

pub fn build_env(cfg: &Config, scenario: &Scenario) -> anyhow::Result<PlanningEnv> {
    let grid = compute_edf(&scenario.grid)?;
    Ok(PlanningEnv::new(grid, &cfg.planner))
}

/// Full pipeline output for a single run.
pub struct RunOutput {
    pub record: RunRecord,
    pub timing: RunTiming,
    pub trajectory: Option<Trajectory>,
    pub metrics: Option<TrajectoryMetrics>,
}

pub fn run_once(cfg: &Config, scenario: &Scenario, env: &PlanningEnv, mode: CurveMode, seed: u64) -> RunOutput {
    let mut record = RunRecord {
        scenario: scenario.name,
        mode: mode_tag(mode),
        seed,
        planned: false,
        path_nodes: 0,
        plan_iterations: 0,
        dp_rate: 0.0,
        opt_iterations: 0,
        termination: String::new(),
        initial_cost: f64::NAN,
        final_cost: f64::NAN,
        monotone: true,
        feasible: false,
        min_do_ugv: f64::NAN,
        min_do_uav: f64::NAN,
        min_do_tether: f64::NAN,
        mean_vel_ugv: f64::NAN,
        mean_vel_uav: f64::NAN,
        mean_acc_ugv: f64::NAN,
        mean_acc_uav: f64::NAN,
        recovered: 0,
        recovered_length_ok: 0,
        recovered_gap_ok: 0,
        error: String::new(),
    };
    let mut timing = RunTiming { scenario: scenario.name, mode: mode_tag(mode), seed, plan_time_s: 0.0, opt_time_s: 0.0 };
    let params = planner_params(cfg, scenario, mode, seed);

    let t0 = Instant::now();
    let outcome = match plan(&scenario.start, scenario.goal_uav, &params, env) {
        Ok(o) => o,
        Err(e) => {
            record.error = format!("plan: {e}");
            return RunOutput { record, timing, trajectory: None, metrics: None };
        }
    };
    timing.plan_time_s = t0.elapsed().as_secs_f64();
    record.plan_iterations = outcome.stats.iterations;
    record.dp_rate = outcome.stats.dp_rate;
    let Some(path) = outcome.path else {
        record.error = "plan: no path".into();
        return RunOutput { record, timing, trajectory: None, metrics: None };
    };
    record.planned = true;
    record.path_nodes = path.nodes.len();
    if path.nodes.len() < 2 {
        record.error = "plan: single-node path".into();
        return RunOutput { record, timing, trajectory: None, metrics: None };
    }

    let t0 = Instant::now();
    let result = (|| -> anyhow::Result<(Trajectory, tether_core::optimizer::OptimizeReport)> {
        let init = initialize_from_path(&path.nodes, mode, &cfg.weights, cfg.tether_samples_m)?;
        let prob = Problem { env, weights: &cfg.weights, l_max: scenario.l_max };
        let (opt, report) = optimize(&init, &prob, &cfg.solver)?;
        let traj = match mode {
            CurveMode::Parabola => {
                let (rec, recovery) = recover_catenaries(&opt, &env.grid, scenario.l_max, cfg.weights.rho_ot)?;
                let tau = cfg.tau_fraction * scenario.l_max;
                let hanging: Vec<_> = recovery.iter().filter(|r| !r.taut).collect();
                record.recovered = hanging.len();
                record.recovered_length_ok = hanging
                    .iter()
                    .filter(|r| r.length >= r.chord * (1.0 - 1e-9) && r.length <= scenario.l_max * (1.0 + 1e-9))
                    .count();
                record.recovered_gap_ok = hanging.iter().filter(|r| r.max_gap <= tau).count();
                rec
            }
            CurveMode::Catenary => opt,
        };
        Ok((traj, report))
    })();
    timing.opt_time_s = t0.elapsed().as_secs_f64();
    match result {
        Ok((traj, report)) => {
            record.opt_iterations = report.iterations;
            record.termination = format!("{:?}", report.termination).to_lowercase();
            record.initial_cost = report.initial_cost;
            record.final_cost = report.final_cost;
            record.monotone = report.cost_history.windows(2).all(|w| w[1] <= w[0]);
            let m = evaluate(&traj, &env.grid, &cfg.weights, timing.opt_time_s);
            record.feasible = m.feasible;
            record.min_do_ugv = m.min_do_ugv;
            record.min_do_uav = m.min_do_uav;
            record.min_do_tether = m.min_do_tether;
            record.mean_vel_ugv = m.mean_vel_ugv;
            record.mean_vel_uav = m.mean_vel_uav;
            record.mean_acc_ugv = m.mean_acc_ugv;
            record.mean_acc_uav = m.mean_acc_uav;
            RunOutput { record, timing, trajectory: Some(traj), metrics: Some(m) }
        }
        Err(e) => {
            record.error = format!("optimize: {e}");
            RunOutput { record, timing, trajectory: None, metrics: None }
        }
    }
}

/// `repeats` seeds starting at `seed`, fanned out over the thread pool and
/// returned in seed order.
pub fn run_end_to_end(
    cfg: &Config,
    scenario: &Scenario,
    env: &PlanningEnv,
    mode: CurveMode,
    repeats: usize,
    seed: u64,
) -> (Vec<RunRecord>, Vec<RunTiming>) {
    let outs: Vec<(RunRecord, RunTiming)> = (0..repeats as u64)
        .into_par_iter()
        .map(|k| {
            let o = run_once(cfg, scenario, env, mode, seed + k);
            (o.record, o.timing)
        })
        .collect();
    outs.into_iter().unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct E2eSummary {
    pub scenario: &'static str,
    pub mode: &'static str,
    pub runs: usize,
    pub planned: usize,
    /// Percentage of runs ending in a feasible trajectory.
    pub feasibility_pct: f64,
    pub mean_opt_time_s: f64,
    pub mean_min_do_ugv: f64,
    pub mean_min_do_uav: f64,
    pub mean_min_do_tether: f64,
    pub mean_vel_ugv: f64,
    pub mean_vel_uav: f64,
    pub mean_acc_ugv: f64,
    pub mean_acc_uav: f64,
    pub all_monotone: bool,
}

pub fn summarize_runs(records: &[RunRecord], timings: &[RunTiming]) -> Option<E2eSummary> {
    let first = records.first()?;
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_empty()).collect();
    let mean = |f: fn(&RunRecord) -> f64| summarize(&ok.iter().map(|r| f(r)).collect::<Vec<_>>()).mean;
    Some(E2eSummary {
        scenario: first.scenario,
        mode: first.mode,
        runs: records.len(),
        planned: records.iter().filter(|r| r.planned).count(),
        feasibility_pct: 100.0 * records.iter().filter(|r| r.feasible).count() as f64 / records.len() as f64,
        mean_opt_time_s: summarize(&timings.iter().map(|t| t.opt_time_s).collect::<Vec<_>>()).mean,
        mean_min_do_ugv: mean(|r| r.min_do_ugv),
        mean_min_do_uav: mean(|r| r.min_do_uav),
        mean_min_do_tether: mean(|r| r.min_do_tether),
        mean_vel_ugv: mean(|r| r.mean_vel_ugv),
        mean_vel_uav: mean(|r| r.mean_vel_uav),
        mean_acc_ugv: mean(|r| r.mean_acc_ugv),
        mean_acc_uav: mean(|r| r.mean_acc_uav),
        all_monotone: records.iter().all(|r| r.monotone),
    })
}
