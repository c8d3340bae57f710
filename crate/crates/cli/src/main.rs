mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgp_core::estimator::check_prop1;
use dgp_core::harness::{
    build_scenario, compute_metrics, write_csv, AlgorithmKind, Metrics, RunOptions, RunOutput, Scenario, ScenarioConfig, TrajectoryRecord,
    PER_LOAD_COLUMN_LIMIT,
};
use dgp_core::ode::{boundary_counterexample, integrate};
use dgp_core::oracle::{check_optimality, critical_sets, solve_primal};
use dgp_core::plant::spectral_radius;
use dgp_core::Error;

use plot::{line_chart, Series};

#[derive(Parser)]
#[command(name = "dgp-sim", version, about = "Smart-load frequency regulation by distributed gradient projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory.csv and metrics.txt
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides algorithm.kind from the config (dgp, dual or none)
        #[arg(long)]
        algorithm: Option<AlgorithmKind>,
        /// Write per-load columns even for large populations
        #[arg(long)]
        full_trace: bool,
        /// Also render SVG plots next to the CSV
        #[arg(long)]
        plot: bool,
    },
    /// Solve the centralized problem for every schedule segment
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate the two-load boundary instance and compare against its optimum
    Counterexample {
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
    },
    /// Run dgp, dual and none on one scenario and compare frequency nadirs
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// Validate a config: estimator condition, connectivity, feasibility
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Diverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Diverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SimulationDiverged { .. } | Error::EstimatorDiverged { .. } => Failure::Diverged(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(ScenarioConfig, Scenario), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_toml_str(&text)?;
    let scenario = build_scenario(&cfg, seed)?;
    Ok((cfg, scenario))
}

fn write_trajectory(path: &Path, trajectory: &[TrajectoryRecord], include_loads: bool) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(io(path))?;
    write_csv(std::io::BufWriter::new(file), trajectory, include_loads)?;
    Ok(())
}

fn format_metrics(scenario: &Scenario, m: &Metrics) -> String {
    let mut s = String::new();
    s += &format!("algorithm = {}\nseed = {}\nloads = {}\nticks = {}\n", scenario.algorithm, scenario.seed, scenario.n(), scenario.ticks);
    for w in &m.nadirs {
        s += &format!("nadir_hz[t={}] = {}\n", w.start_tick as f64 * scenario.dt(), w.nadir);
    }
    s += &format!("settling_time_s = {}\n", m.settling_time);
    s += &format!("terminal_optimality_gap = {}\n", m.terminal_optimality_gap);
    s += &format!("terminal_optimal = {}\n", m.terminal_optimal);
    s += &format!("total_disutility_integral = {}\n", m.total_disutility_integral);
    s
}

fn series(trajectory: &[TrajectoryRecord], f: impl Fn(&TrajectoryRecord) -> f64) -> Vec<(f64, f64)> {
    trajectory.iter().map(|r| (r.t, f(r))).collect()
}

fn write_plots(dir: &Path, runs: &[(String, &[TrajectoryRecord])]) -> Result<(), Failure> {
    type Column = fn(&TrajectoryRecord) -> f64;
    let charts: [(&str, &str, &str, Column); 3] = [
        ("frequency.svg", "Frequency deviation", "Hz", |r| r.freq_deviation),
        ("mismatch.svg", "Consumption-generation mismatch", "MW", |r| r.u),
        ("disutility.svg", "Total disutility", "", |r| r.total_disutility),
    ];
    for (file, title, unit, column) in charts {
        let data: Vec<Series> = runs.iter().map(|(label, t)| Series { label, points: series(t, column) }).collect();
        let path = dir.join(file);
        fs::write(&path, line_chart(title, "t (s)", unit, &data)).map_err(io(&path))?;
    }
    Ok(())
}

fn simulate(scenario: &Scenario, options: RunOptions, out_dir: &Path, csv_name: &str) -> Result<RunOutput, Failure> {
    match dgp_core::harness::run_with(scenario, options) {
        Ok(out) => Ok(out),
        Err(failure) => {
            let path = out_dir.join(csv_name);
            write_trajectory(&path, &failure.partial, options.record_loads)?;
            Err(Failure::Diverged(format!("{failure}; partial trajectory written to {}", path.display())))
        }
    }
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    algorithm: Option<AlgorithmKind>,
    full_trace: bool,
    plot: bool,
) -> Result<(), Failure> {
    let (_, mut scenario) = load_scenario(config, seed)?;
    if let Some(alg) = algorithm {
        scenario = scenario.with_algorithm(alg)?;
    }
    fs::create_dir_all(out).map_err(io(out))?;
    let include_loads = full_trace || scenario.n() <= PER_LOAD_COLUMN_LIMIT;
    let options = RunOptions { record_loads: include_loads, record_u_hats: false };
    let result = simulate(&scenario, options, out, "trajectory.csv")?;
    write_trajectory(&out.join("trajectory.csv"), &result.trajectory, include_loads)?;
    let metrics = compute_metrics(&result.trajectory, &scenario, &result.final_x);
    let text = format_metrics(&scenario, &metrics);
    let path = out.join("metrics.txt");
    fs::write(&path, &text).map_err(io(&path))?;
    if plot {
        write_plots(out, &[(scenario.algorithm.to_string(), &result.trajectory)])?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_oracle(config: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let (_, scenario) = load_scenario(config, seed)?;
    let nominal = scenario.schedule.nominal();
    for &(tick, level) in scenario.schedule.steps() {
        let target = level - nominal;
        println!("# segment starting t = {} s, target load deviation {target} MW", tick as f64 * scenario.dt());
        let sol = solve_primal(&scenario.specs, target)?;
        println!("# lambda_star = {}", sol.lambda_star);
        println!("# optimal_cost = {}", sol.optimal_cost);
        println!("# strictly_feasible = {}", sol.is_strictly_feasible);
        println!("load,x_star,box_lo,box_hi,critical_lo,critical_hi");
        for (i, ((s, x), (lo, hi))) in scenario.specs.iter().zip(&sol.x_star).zip(critical_sets(&scenario.specs, &sol)).enumerate() {
            println!("{},{x},{},{},{lo},{hi}", i + 1, s.box_lo(), s.box_hi());
        }
    }
    Ok(())
}

fn cmd_counterexample(t_end: f64) -> Result<(), Failure> {
    let mut cfg = boundary_counterexample(t_end);
    let sol = cfg.attach_oracle()?;
    let traj = integrate(&cfg, &[0.1, 0.1])?;
    let end = traj.last().expect("at least the initial point");
    let dist = |p: [f64; 2]| end.x.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("f_i(x) = x^2, boxes [0, 0.25] x [0, 1], c = 1, target 1, start [0.1, 0.1]");
    println!("terminal state at t = {}: [{}, {}]", end.t, end.x[0], end.x[1]);
    println!("distance to equilibrium [0.25, 0.416667]: {:.3e}", dist([0.25, 5.0 / 12.0]));
    println!("distance to optimum [0.25, 0.75]:         {:.3e}", dist([0.25, 0.75]));
    println!("oracle optimum: [{}, {}], strictly feasible: {}", sol.x_star[0], sol.x_star[1], sol.is_strictly_feasible);
    println!("terminal mismatch u = {}", end.u);
    println!("terminal state optimal: {}", check_optimality(&cfg.specs, &end.x, cfg.g_bar, 1e-6).passed);
    Ok(())
}

fn cmd_compare(config: &Path, seed: Option<u64>, out: &Path, plot: bool) -> Result<(), Failure> {
    let (_, base) = load_scenario(config, seed)?;
    fs::create_dir_all(out).map_err(io(out))?;
    let mut runs: Vec<(AlgorithmKind, RunOutput, Metrics)> = Vec::new();
    for alg in [AlgorithmKind::Dgp, AlgorithmKind::Dual, AlgorithmKind::None] {
        let scenario = match base.with_algorithm(alg) {
            Ok(s) => s,
            Err(Error::DualNeedsStrictConvexity) => {
                println!("dual: skipped, it needs strictly convex disutilities");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let result = simulate(&scenario, RunOptions::default(), out, &format!("trajectory_{alg}.csv"))?;
        let metrics = compute_metrics(&result.trajectory, &scenario, &result.final_x);
        runs.push((alg, result, metrics));
    }

    let path = out.join("compare.csv");
    let mut csv = String::from("k,t");
    for col in ["freq_deviation", "u", "total_disutility"] {
        for (alg, _, _) in &runs {
            csv += &format!(",{col}_{alg}");
        }
    }
    csv.push('\n');
    let rows = runs.iter().map(|r| r.1.trajectory.len()).min().unwrap_or(0);
    for i in 0..rows {
        let r0 = &runs[0].1.trajectory[i];
        csv += &format!("{},{}", r0.k, r0.t);
        for f in [|r: &TrajectoryRecord| r.freq_deviation, |r: &TrajectoryRecord| r.u, |r: &TrajectoryRecord| r.total_disutility] {
            for (_, run, _) in &runs {
                csv += &format!(",{}", f(&run.trajectory[i]));
            }
        }
        csv.push('\n');
    }
    fs::write(&path, csv).map_err(io(&path))?;

    let mut report = String::new();
    let events = runs[0].2.contingency_nadirs().len();
    for e in 0..events {
        let start = runs[0].2.contingency_nadirs()[e].start_tick as f64 * base.dt();
        let mut ranked: Vec<(AlgorithmKind, f64)> = runs.iter().map(|(a, _, m)| (*a, m.contingency_nadirs()[e].nadir)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let line: Vec<String> = ranked.iter().map(|(a, n)| format!("{a} {n:.4}")).collect();
        report += &format!("event at t = {start} s, nadir Hz (smallest drop first): {}\n", line.join(", "));
    }
    for (alg, _, m) in &runs {
        report += &format!(
            "{alg}: settling {} s, terminal gap {:.3e}, disutility integral {:.4}\n",
            m.settling_time, m.terminal_optimality_gap, m.total_disutility_integral
        );
    }
    let path = out.join("report.txt");
    fs::write(&path, &report).map_err(io(&path))?;
    if plot {
        let labelled: Vec<(String, &[TrajectoryRecord])> = runs.iter().map(|(a, r, _)| (a.to_string(), r.trajectory.as_slice())).collect();
        write_plots(out, &labelled)?;
    }
    print!("{report}");
    Ok(())
}

fn cmd_check(config: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let (_, scenario) = load_scenario(config, seed)?;
    println!("loads: {} ({:?})", scenario.n(), scenario.specs[0].family());
    println!("graph: connected, {} edges", scenario.topology.edge_count());
    println!("plant: order {}, spectral radius {:.6}", scenario.plant.order(), spectral_radius(scenario.plant.a()));
    println!("estimator eigenvalue condition: {}", check_prop1(&scenario.plant)?);
    println!(
        "steps: gamma0 = {:.6e}, exponent = {}, c = {}",
        scenario.step_schedule.gamma0(),
        scenario.step_schedule.exponent(),
        scenario.step_schedule.c()
    );
    let lo: f64 = scenario.specs.iter().map(|s| s.box_lo()).sum();
    let hi: f64 = scenario.specs.iter().map(|s| s.box_hi()).sum();
    let mut infeasible = Vec::new();
    for &(tick, level) in scenario.schedule.steps() {
        let target = level - scenario.schedule.nominal();
        let ok = lo <= target && target <= hi;
        println!("segment t = {} s: target {target} MW in [{lo}, {hi}]: {ok}", tick as f64 * scenario.dt());
        if !ok {
            infeasible.push(target);
        }
    }
    if infeasible.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(Failure::Config(format!("infeasible targets {infeasible:?}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, algorithm, full_trace, plot } => cmd_run(&config, seed, &out, algorithm, full_trace, plot),
        Command::Oracle { config, seed } => cmd_oracle(&config, seed),
        Command::Counterexample { t_end } => cmd_counterexample(t_end),
        Command::Compare { config, seed, out, plot } => cmd_compare(&config, seed, &out, plot),
        Command::Check { config, seed } => cmd_check(&config, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
