//! Closed-loop simulation. Each tick:
//!
//! 1. `u[k] = g[k] - g* - sum_i x_i[k]`
//! 2. the plant advances with input `u[k] + zeta[k]` and emits `dw[k]`
//! 3. load `i` measures `dw[k] + xi_i[k]` and recovers `u_hat_i[k]`
//! 4. the load algorithm moves every `x_i` to `x_i[k+1]`
//!
//! Row `k` of the trajectory holds `x[k]`, `u[k]` and the frequency
//! deviation produced by `u[k]`.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::AlgorithmKind;
use super::scenario::Scenario;
use crate::dgp::{DgpNetwork, PARALLEL_MIN_AGENTS};
use crate::dual::DualNetwork;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorModel, EstimatorState};
use crate::ode::diagnostics_against;
use crate::oracle::{critical_sets, solve_primal};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub k: u64,
    pub t: f64,
    /// Hz
    pub freq_deviation: f64,
    pub u: f64,
    pub mean_u_hat: f64,
    pub total_disutility: f64,
    /// Distance of `x` to the optimal set of the active segment; `NaN` when
    /// that segment's target is infeasible.
    pub y: f64,
    pub z: f64,
    pub generation: f64,
    pub total_load_deviation: f64,
    pub x: Option<Vec<f64>>,
    pub u_hat: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_loads: bool,
    pub record_u_hats: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Vec<TrajectoryRecord>,
    /// Load deviations after the last tick's update.
    pub final_x: Vec<f64>,
}

/// A run that stopped early; `partial` holds every completed row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Vec<TrajectoryRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} recorded ticks", self.error, self.partial.len())
    }
}

impl std::error::Error for RunFailure {}

enum Loads {
    Frozen(Vec<f64>),
    Dgp(DgpNetwork),
    Dual(DualNetwork),
}

impl Loads {
    fn positions(&self) -> Vec<f64> {
        match self {
            Loads::Frozen(x) => x.clone(),
            Loads::Dgp(net) => net.positions(),
            Loads::Dual(net) => net.positions(),
        }
    }

    fn tick(&mut self, u_hats: &[f64], k: u64) -> Result<()> {
        match self {
            Loads::Frozen(_) => Ok(()),
            Loads::Dgp(net) => net.tick(u_hats, k),
            Loads::Dual(net) => net.tick(u_hats, k),
        }
    }
}

struct LoadFilter {
    state: EstimatorState,
    rng: ChaCha8Rng,
}

/// Per-segment critical sets for the `y`, `z` diagnostics.
fn segment_critical_sets(scenario: &Scenario) -> Vec<Option<Vec<(f64, f64)>>> {
    scenario
        .schedule
        .steps()
        .iter()
        .map(|&(_, level)| {
            let target = level - scenario.schedule.nominal();
            solve_primal(&scenario.specs, target).ok().map(|sol| critical_sets(&scenario.specs, &sol))
        })
        .collect()
}

pub fn run(scenario: &Scenario) -> std::result::Result<RunOutput, RunFailure> {
    run_with(scenario, RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: RunOptions) -> std::result::Result<RunOutput, RunFailure> {
    let mut trajectory = Vec::with_capacity(scenario.ticks as usize);
    match simulate(scenario, options, &mut trajectory) {
        Ok(final_x) => Ok(RunOutput { trajectory, final_x }),
        Err(error) => Err(RunFailure { error, partial: trajectory }),
    }
}

fn simulate(scenario: &Scenario, options: RunOptions, trajectory: &mut Vec<TrajectoryRecord>) -> Result<Vec<f64>> {
    let n = scenario.n();
    let plant = &scenario.plant;
    let specs = &scenario.specs;
    let mut loads = match scenario.algorithm {
        AlgorithmKind::None => Loads::Frozen(vec![0.0; n]),
        AlgorithmKind::Dgp => {
            Loads::Dgp(DgpNetwork::new(specs, &scenario.topology, scenario.step_schedule)?.with_reset_policy(scenario.reset))
        }
        AlgorithmKind::Dual => Loads::Dual(DualNetwork::new(specs, &scenario.topology, scenario.step_schedule).map_err(|e| match e {
            Error::NotInvertible => Error::DualNeedsStrictConvexity,
            other => other,
        })?),
    };
    let est_model = EstimatorModel::new(plant, scenario.sigma_meas)?;
    let mut filters: Vec<LoadFilter> = (0..n)
        .map(|i| LoadFilter { state: est_model.initial_state(), rng: stream(scenario.seed, Purpose::MeasurementNoise, i as u64) })
        .collect();
    let meas_noise = Normal::new(0.0, scenario.sigma_meas).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let proc_noise = Normal::new(0.0, plant.sigma_process()).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let mut proc_rng = stream(scenario.seed, Purpose::ProcessNoise, 0);
    let critical = segment_critical_sets(scenario);
    let nominal = scenario.schedule.nominal();

    let mut plant_state = plant.initial_state();
    let mut u_hats = vec![0.0; n];
    for k in 0..scenario.ticks {
        let x = loads.positions();
        let generation = scenario.schedule.generation_at(k);
        let total_load_deviation: f64 = x.iter().sum();
        let u = generation - nominal - total_load_deviation;

        let zeta = proc_noise.sample(&mut proc_rng);
        let freq = plant.step(&mut plant_state, u + zeta, 0.0).map_err(|e| match e {
            Error::SimulationDiverged { .. } => Error::SimulationDiverged { tick: k },
            other => other,
        })?;

        if scenario.perfect_estimate {
            u_hats.fill(u);
        } else {
            let update = |(filter, u_hat): (&mut LoadFilter, &mut f64)| -> Result<()> {
                let y = freq + meas_noise.sample(&mut filter.rng);
                *u_hat = filter.state.update(&est_model, y).map_err(|_| Error::EstimatorDiverged { tick: k })?;
                Ok(())
            };
            if n >= PARALLEL_MIN_AGENTS {
                filters.par_iter_mut().zip(u_hats.par_iter_mut()).try_for_each(update)?;
            } else {
                filters.iter_mut().zip(u_hats.iter_mut()).try_for_each(update)?;
            }
        }

        let total_disutility: f64 = specs.iter().zip(&x).map(|(s, &v)| s.eval(v)).sum();
        let (y, z) = match &critical[scenario.schedule.segment_at(k)] {
            Some(sets) => {
                let d = diagnostics_against(sets, generation - nominal, &x);
                (d.y, d.z)
            }
            None => (f64::NAN, f64::NAN),
        };
        trajectory.push(TrajectoryRecord {
            k,
            t: k as f64 * scenario.dt(),
            freq_deviation: freq,
            u,
            mean_u_hat: u_hats.iter().sum::<f64>() / n as f64,
            total_disutility,
            y,
            z,
            generation,
            total_load_deviation,
            x: options.record_loads.then(|| x.clone()),
            u_hat: options.record_u_hats.then(|| u_hats.clone()),
        });

        loads.tick(&u_hats, k)?;
    }
    Ok(loads.positions())
}
