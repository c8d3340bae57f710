//! Scenario configuration document (TOML). Every section and key is
//! optional; omitted values fall back to the reference setup of 1000
//! flat-quadratic loads on a band graph with two generation drops.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::disutility::Family;
use crate::error::{Error, Result};
use crate::plant::PlantParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub plant: PlantSection,
    pub loads: LoadsSection,
    pub graph: GraphSection,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub inertia: f64,
    pub damping: f64,
    pub governor_time_constant: f64,
    pub droop: f64,
    pub governor: bool,
    pub integral_gain: f64,
    pub nominal_frequency: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let p = PlantParams::default();
        Self {
            inertia: p.inertia,
            damping: p.damping,
            governor_time_constant: p.governor_time_constant,
            droop: p.droop,
            governor: p.governor,
            integral_gain: p.integral_gain,
            nominal_frequency: p.nominal_frequency,
        }
    }
}

impl PlantSection {
    pub fn params(&self, process_noise_std: f64) -> PlantParams {
        PlantParams {
            inertia: self.inertia,
            damping: self.damping,
            governor_time_constant: self.governor_time_constant,
            droop: self.droop,
            governor: self.governor,
            integral_gain: self.integral_gain,
            nominal_frequency: self.nominal_frequency,
            process_noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadsSection {
    pub n: usize,
    pub family: Family,
    /// Sum of the box half-widths after normalization, MW.
    pub box_total: f64,
    /// Raw half-widths are drawn uniformly from this range before
    /// normalization.
    pub box_draw: [f64; 2],
    /// `1/q` is drawn uniformly from this range.
    pub inv_q_range: [f64; 2],
    /// Dead-band half-width as a fraction of the box half-width.
    pub dead_band_fraction: f64,
    /// Explicit per-load parameters. When `q` is given no sampling happens
    /// and `box_lo`, `box_hi` (and `a` for the flat family) are required.
    pub q: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub box_lo: Option<Vec<f64>>,
    pub box_hi: Option<Vec<f64>>,
}

impl Default for LoadsSection {
    fn default() -> Self {
        Self {
            n: 1000,
            family: Family::FlatQuadratic,
            box_total: 60.0,
            box_draw: [0.5, 1.5],
            inv_q_range: [0.1, 0.3],
            dead_band_fraction: 0.1,
            q: None,
            a: None,
            box_lo: None,
            box_hi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    /// Band half-width: node `i` talks to every `j` with `|i - j| <= n0`.
    pub n0: usize,
    /// Explicit undirected edges with 1-based node ids; overrides `n0`.
    pub edges: Option<Vec<[usize; 2]>>,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { n0: 1, edges: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Per-load frequency measurement noise, Hz.
    pub measurement_std: f64,
    /// Process noise on the plant input, MW.
    pub process_std: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { measurement_std: 1e-4, process_std: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    /// Nominal generation `g*`, MW.
    pub nominal: f64,
    /// `[time_s, generation_mw]` pairs; the first must be at time 0.
    pub steps: Vec<[f64; 2]>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { nominal: 200.0, steps: vec![[0.0, 200.0], [20.0, 190.0], [50.0, 170.0]] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Dgp,
    Dual,
    None,
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dgp" => Ok(Self::Dgp),
            "dual" => Ok(Self::Dual),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown algorithm '{other}' (expected dgp, dual or none)"))),
        }
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Dgp => "dgp",
            Self::Dual => "dual",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    pub kind: AlgorithmKind,
    /// Defaults to `1.5 min_i q_i / n`.
    pub gamma0: Option<f64>,
    pub exponent: f64,
    pub c: f64,
    /// Restart an agent's step schedule when `|u_hat|` exceeds this (MW).
    pub reset_threshold: Option<f64>,
    pub reset_holdoff: u64,
    /// Feed every load the true mismatch instead of its estimate.
    pub perfect_estimate: bool,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            kind: AlgorithmKind::Dgp,
            gamma0: None,
            exponent: 0.8,
            c: 5.0,
            reset_threshold: None,
            reset_holdoff: 100,
            perfect_estimate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub ticks: u64,
    /// Sampling period `T`, s.
    pub dt: f64,
    pub seed: u64,
    /// Half-width of the settling band around nominal frequency, Hz.
    pub settling_band: f64,
    /// Tolerance for the terminal optimality check.
    pub optimality_tol: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { ticks: 800, dt: 0.1, seed: 0, settling_band: 0.01, optimality_tol: 5e-2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.loads.n, 1000);
        assert_eq!(cfg.algorithm.kind, AlgorithmKind::Dgp);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml_str("[loads]\nnn = 3\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("nn")), "{err}");
        assert!(ScenarioConfig::from_toml_str("[extra]\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ScenarioConfig::default();
        cfg.loads.q = Some(vec![1.0, 2.0]);
        cfg.graph.edges = Some(vec![[1, 2]]);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("dual".parse::<AlgorithmKind>().unwrap(), AlgorithmKind::Dual);
        assert!("primal".parse::<AlgorithmKind>().is_err());
        let cfg = ScenarioConfig::from_toml_str("[algorithm]\nkind = \"none\"\n").unwrap();
        assert_eq!(cfg.algorithm.kind, AlgorithmKind::None);
    }
}
