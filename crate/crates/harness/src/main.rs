use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use tether_core::environment::{compute_edf, GridFile, OccupancyGrid};
use tether_core::optimizer::{
    evaluate, initialize_from_path, optimize, recover_catenaries, CurveMode, Problem, Trajectory, TrajectoryFile,
};
use tether_core::planner::{plan, PlannedPath, PlanningEnv};
use tether_harness::config::Config;
use tether_harness::e2e::{planner_params, run_end_to_end, summarize_runs};
use tether_harness::output::{read_json, write_csv, write_json};
use tether_harness::scenarios::{self, Scenario};
use tether_harness::{dpbench, fitbench};

#[derive(Parser)]
#[command(name = "tether", about = "Tethered UGV-UAV planning benchmarks")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON configuration file; missing fields use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Parabola,
    Catenary,
    Both,
}

impl Mode {
    fn modes(self) -> Vec<CurveMode> {
        match self {
            Mode::Parabola => vec![CurveMode::Parabola],
            Mode::Catenary => vec![CurveMode::Catenary],
            Mode::Both => vec![CurveMode::Parabola, CurveMode::Catenary],
        }
    }

    fn single(self) -> anyhow::Result<CurveMode> {
        match self {
            Mode::Parabola => Ok(CurveMode::Parabola),
            Mode::Catenary => Ok(CurveMode::Catenary),
            Mode::Both => bail!("this command takes a single mode"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a scenario's occupancy grid as JSON.
    GenGrid {
        #[arg(long, default_value = "doorway")]
        scenario: String,
    },
    /// Parabola-to-catenary approximation benchmark.
    BenchFit,
    /// Parabola vs numeric catenary decision-problem timings.
    BenchDp,
    /// Plan a path for a scenario.
    Plan {
        #[arg(long, default_value = "doorway")]
        scenario: String,
        /// Use this grid file instead of the scenario's own world.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parabola")]
        mode: Mode,
    },
    /// Optimise a planned path.
    Optimize {
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value = "doorway")]
        scenario: String,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parabola")]
        mode: Mode,
    },
    /// Plan, optimise and check over repeated seeds.
    Run {
        /// Scenario name or `all`.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
        /// Seeds per scenario and mode; defaults to the config value.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Feasibility metrics of a trajectory file.
    Check {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, default_value = "doorway")]
        scenario: String,
        #[arg(long)]
        grid: Option<PathBuf>,
    },
}

fn scenario(name: &str, cfg: &Config, grid: Option<&Path>) -> anyhow::Result<Scenario> {
    let mut s = scenarios::build(name, cfg.resolution)
        .with_context(|| format!("unknown scenario {name}; expected one of {:?}", scenarios::NAMES))?;
    if let Some(path) = grid {
        let file: GridFile = read_json(path)?;
        s.grid = OccupancyGrid::from_file(&file)?;
    }
    Ok(s)
}

fn env_for(cfg: &Config, s: &Scenario) -> anyhow::Result<PlanningEnv> {
    Ok(PlanningEnv::new(compute_edf(&s.grid)?, &cfg.planner))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = Config::load_or_default(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = |name: &str| cli.out.join(name);

    match cli.cmd {
        Cmd::GenGrid { scenario: name } => {
            let s = scenario(&name, &cfg, None)?;
            let path = out(&format!("{name}_grid.json"));
            write_json(&path, &s.grid.to_file())?;
            println!("wrote {}", path.display());
        }
        Cmd::BenchFit => {
            let cases = fitbench::gen_fit_benchmark(cfg.fit_cases, cli.seed);
            let (rows, timings) = fitbench::run_fit_benchmark(&cases, cfg.fit_eps, cfg.fit_sampling_points);
            let summary = fitbench::summarize_fit(&rows);
            write_csv(&out("fit_bench.csv"), &rows)?;
            write_csv(&out("fit_bench_timing.csv"), &timings)?;
            write_csv(&out("fit_bench_summary.csv"), &summary)?;
            for s in &summary {
                println!(
                    "{:<12} eps_mean {:.4} ± {:.4}  eps/L {:.4} ± {:.4}",
                    s.method, s.eps_mean, s.eps_mean_std, s.eps_over_l, s.eps_over_l_std
                );
            }
        }
        Cmd::BenchDp => {
            let scenes = dpbench::gen_dp_scenes(cfg.dp_scenes, cli.seed, &cfg.dp_scene);
            let (rows, timings) = dpbench::run_dp_benchmark(&scenes, cfg.cdp_dl, cfg.cdp_samples);
            let summary = dpbench::summarize_dp(&rows, &timings);
            write_csv(&out("dp_bench.csv"), &rows)?;
            write_csv(&out("dp_bench_timing.csv"), &timings)?;
            write_csv(&out("dp_bench_summary.csv"), &summary)?;
            for s in &summary {
                println!(
                    "{:<12} median {:.3e} s  q1 {:.3e}  q3 {:.3e}  found {}",
                    s.method, s.median_s, s.q1_s, s.q3_s, s.found
                );
            }
            let d = dpbench::disagreements(&rows);
            println!(
                "status agreement {:.1}%  (taut {}, band skip {} = {:.1}%, catenary only {})",
                100.0 * dpbench::agreement(&rows),
                d.taut,
                d.band_skip,
                100.0 * d.band_skip_rate(),
                d.cdp_only
            );
        }
        Cmd::Plan { scenario: name, grid, mode } => {
            let s = scenario(&name, &cfg, grid.as_deref())?;
            let env = env_for(&cfg, &s)?;
            let params = planner_params(&cfg, &s, mode.single()?, cli.seed);
            let outcome = plan(&s.start, s.goal_uav, &params, &env)?;
            let Some(path) = outcome.path else {
                bail!("no path found after {} iterations", outcome.stats.iterations);
            };
            let file = out("path.json");
            write_json(&file, &path)?;
            println!(
                "{} nodes, cost {:.3}, {} iterations, dp rate {:.3}; wrote {}",
                path.nodes.len(),
                path.cost,
                path.stats.iterations,
                path.stats.dp_rate,
                file.display()
            );
        }
        Cmd::Optimize { path, scenario: name, grid, mode } => {
            let s = scenario(&name, &cfg, grid.as_deref())?;
            let env = env_for(&cfg, &s)?;
            let mode = mode.single()?;
            let planned: PlannedPath = read_json(&path)?;
            let init = initialize_from_path(&planned.nodes, mode, &cfg.weights, cfg.tether_samples_m)?;
            let prob = Problem { env: &env, weights: &cfg.weights, l_max: s.l_max };
            let (opt, report) = optimize(&init, &prob, &cfg.solver)?;
            let traj = match mode {
                CurveMode::Parabola => recover_catenaries(&opt, &env.grid, s.l_max, cfg.weights.rho_ot)?.0,
                CurveMode::Catenary => opt,
            };
            let metrics = evaluate(&traj, &env.grid, &cfg.weights, report.time_s);
            write_json(&out("trajectory.json"), &traj.to_file())?;
            write_json(&out("metrics.json"), &metrics)?;
            write_json(&out("optimize_report.json"), &report)?;
            println!(
                "cost {:.6} -> {:.6} in {} iterations ({:?}); feasible {}",
                report.initial_cost, report.final_cost, report.iterations, report.termination, metrics.feasible
            );
        }
        Cmd::Run { scenario: name, mode, repeats } => {
            let names: Vec<&str> = if name == "all" { scenarios::NAMES.to_vec() } else { vec![name.as_str()] };
            let repeats = repeats.unwrap_or(cfg.repeats);
            let (mut records, mut timings, mut summaries) = (Vec::new(), Vec::new(), Vec::new());
            for n in names {
                let s = scenario(n, &cfg, None)?;
                let env = env_for(&cfg, &s)?;
                for m in mode.modes() {
                    let (r, t) = run_end_to_end(&cfg, &s, &env, m, repeats, cli.seed);
                    if let Some(sum) = summarize_runs(&r, &t) {
                        println!(
                            "{:<8} {:<9} F {:5.1}%  T {:.3} s  monotone {}",
                            sum.scenario, sum.mode, sum.feasibility_pct, sum.mean_opt_time_s, sum.all_monotone
                        );
                        summaries.push(sum);
                    }
                    records.extend(r);
                    timings.extend(t);
                }
            }
            write_csv(&out("e2e_metrics.csv"), &records)?;
            write_csv(&out("e2e_timing.csv"), &timings)?;
            write_json(&out("e2e_summary.json"), &summaries)?;
        }
        Cmd::Check { trajectory, scenario: name, grid } => {
            let s = scenario(&name, &cfg, grid.as_deref())?;
            let env = env_for(&cfg, &s)?;
            let file: TrajectoryFile = read_json(&trajectory)?;
            let traj = Trajectory::from_file(&file)?;
            let metrics = evaluate(&traj, &env.grid, &cfg.weights, 0.0);
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            if !metrics.feasible {
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
