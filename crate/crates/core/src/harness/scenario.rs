use rand::Rng;

use super::config::{AlgorithmKind, ScenarioConfig};
use crate::dgp::{ResetPolicy, StepSchedule};
use crate::disutility::{DisutilitySpec, Family};
use crate::error::{Error, Result};
use crate::estimator::check_prop1;
use crate::graph::GraphTopology;
use crate::plant::{GenerationSchedule, PlantModel, PlantParams};
use crate::rng::{stream, Purpose};

/// A validated, fully sampled simulation setup.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub specs: Vec<DisutilitySpec>,
    pub topology: GraphTopology,
    pub plant_params: PlantParams,
    pub plant: PlantModel,
    pub sigma_meas: f64,
    pub schedule: GenerationSchedule,
    pub algorithm: AlgorithmKind,
    pub step_schedule: StepSchedule,
    pub reset: Option<ResetPolicy>,
    pub perfect_estimate: bool,
    pub ticks: u64,
    pub seed: u64,
    pub settling_band: f64,
    pub optimality_tol: f64,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.specs.len()
    }

    pub fn dt(&self) -> f64 {
        self.plant.dt()
    }

    pub fn with_algorithm(&self, algorithm: AlgorithmKind) -> Result<Self> {
        if algorithm == AlgorithmKind::Dual && !self.specs.iter().all(|s| s.is_strictly_convex()) {
            return Err(Error::DualNeedsStrictConvexity);
        }
        Ok(Self { algorithm, ..self.clone() })
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn check_range(field: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
        return Err(config_err(field, format!("expected 0 < lo <= hi, got [{}, {}]", r[0], r[1])));
    }
    Ok(())
}

fn sample_specs(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<DisutilitySpec>> {
    let loads = &cfg.loads;
    let n = loads.n;
    check_range("loads.box_draw", loads.box_draw)?;
    check_range("loads.inv_q_range", loads.inv_q_range)?;
    if !(loads.box_total > 0.0 && loads.box_total.is_finite()) {
        return Err(config_err("loads.box_total", "must be > 0"));
    }
    if loads.family == Family::FlatQuadratic && !(0.0..1.0).contains(&loads.dead_band_fraction) {
        return Err(config_err("loads.dead_band_fraction", "must lie in [0, 1)"));
    }

    let mut box_rng = stream(seed, Purpose::Boxes, 0);
    let raw: Vec<f64> = (0..n).map(|_| box_rng.random_range(loads.box_draw[0]..=loads.box_draw[1])).collect();
    let scale = loads.box_total / raw.iter().sum::<f64>();
    let half_widths: Vec<f64> = raw.iter().map(|w| w * scale).collect();

    let mut q_rng = stream(seed, Purpose::Curvature, 0);
    let [lo, hi] = loads.inv_q_range;
    half_widths
        .iter()
        .map(|&w| {
            let q = 1.0 / q_rng.random_range(lo..=hi);
            let a = match loads.family {
                Family::FlatQuadratic => loads.dead_band_fraction * w,
                Family::Quadratic => 0.0,
            };
            DisutilitySpec::new(loads.family, q, a, -w, w)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| config_err("loads", e))
}

fn explicit_specs(cfg: &ScenarioConfig) -> Result<Vec<DisutilitySpec>> {
    let loads = &cfg.loads;
    let n = loads.n;
    let need = |field: &str, v: &Option<Vec<f64>>| -> Result<Vec<f64>> {
        let v = v.clone().ok_or_else(|| config_err(field, "required when loads.q is given"))?;
        if v.len() != n {
            return Err(config_err(field, format!("expected {n} values, got {}", v.len())));
        }
        Ok(v)
    };
    let q = need("loads.q", &loads.q)?;
    let lo = need("loads.box_lo", &loads.box_lo)?;
    let hi = need("loads.box_hi", &loads.box_hi)?;
    let a = match loads.family {
        Family::FlatQuadratic => need("loads.a", &loads.a)?,
        Family::Quadratic => {
            if loads.a.is_some() {
                return Err(config_err("loads.a", "not allowed for the quadratic family"));
            }
            vec![0.0; n]
        }
    };
    (0..n)
        .map(|i| DisutilitySpec::new(loads.family, q[i], a[i], lo[i], hi[i]).map_err(|e| config_err(&format!("loads[{}]", i + 1), e)))
        .collect()
}

/// Validates a configuration and samples the load population. `seed`
/// overrides `run.seed` when given.
pub fn build_scenario(cfg: &ScenarioConfig, seed: Option<u64>) -> Result<Scenario> {
    let seed = seed.unwrap_or(cfg.run.seed);
    let n = cfg.loads.n;
    if n < 2 {
        return Err(config_err("loads.n", format!("need at least 2 loads, got {n}")));
    }
    let specs = if cfg.loads.q.is_some() {
        explicit_specs(cfg)?
    } else {
        if cfg.loads.a.is_some() || cfg.loads.box_lo.is_some() || cfg.loads.box_hi.is_some() {
            return Err(config_err("loads", "explicit a/box_lo/box_hi need explicit q"));
        }
        sample_specs(cfg, seed)?
    };

    let topology = match &cfg.graph.edges {
        Some(edges) => {
            let zero_based = edges
                .iter()
                .map(|&[i, j]| if i == 0 || j == 0 { Err(config_err("graph.edges", "node ids are 1-based")) } else { Ok((i - 1, j - 1)) })
                .collect::<Result<Vec<_>>>()?;
            GraphTopology::from_edges(n, &zero_based)
        }
        None => GraphTopology::band(n, cfg.graph.n0),
    }
    .map_err(|e| config_err("graph", e))?;

    let noise = &cfg.noise;
    if !(noise.measurement_std >= 0.0 && noise.process_std >= 0.0) {
        return Err(config_err("noise", "standard deviations must be >= 0"));
    }
    let plant_params = cfg.plant.params(noise.process_std);
    let plant = PlantModel::build(&plant_params, cfg.run.dt).map_err(|e| config_err("plant", e))?;
    if !check_prop1(&plant)? {
        return Err(config_err("plant", "input-recovery error dynamics are unstable for this plant"));
    }

    let steps: Vec<(f64, f64)> = cfg.schedule.steps.iter().map(|s| (s[0], s[1])).collect();
    let schedule = GenerationSchedule::from_times(cfg.schedule.nominal, cfg.run.dt, &steps).map_err(|e| config_err("schedule", e))?;

    let alg = &cfg.algorithm;
    let step_schedule = match alg.gamma0 {
        Some(g0) => StepSchedule::new(g0, alg.exponent, alg.c),
        None => StepSchedule::default_for(&specs).and_then(|d| StepSchedule::new(d.gamma0(), alg.exponent, alg.c)),
    }
    .map_err(|e| config_err("algorithm", e))?;
    let reset = match alg.reset_threshold {
        Some(threshold) if threshold > 0.0 => Some(ResetPolicy { threshold, holdoff: alg.reset_holdoff }),
        Some(t) => return Err(config_err("algorithm.reset_threshold", format!("must be > 0, got {t}"))),
        None => None,
    };
    if !(cfg.run.settling_band > 0.0) {
        return Err(config_err("run.settling_band", "must be > 0"));
    }
    if !(cfg.run.optimality_tol > 0.0) {
        return Err(config_err("run.optimality_tol", "must be > 0"));
    }

    let scenario = Scenario {
        specs,
        topology,
        plant_params,
        plant,
        sigma_meas: noise.measurement_std,
        schedule,
        algorithm: AlgorithmKind::None,
        step_schedule,
        reset,
        perfect_estimate: alg.perfect_estimate,
        ticks: cfg.run.ticks,
        seed,
        settling_band: cfg.run.settling_band,
        optimality_tol: cfg.run.optimality_tol,
    };
    scenario.with_algorithm(alg.kind)
}
