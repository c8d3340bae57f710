//! Single-frequency grid model driven by the consumption-generation mismatch.
//!
//! Continuous model (frequency deviation in Hz, governor output in MW):
//!
//! ```text
//! M dw/dt   = p_m + u - D w
//! tau dp/dt = -p_m - w / R - K_i s      (droop governor, optional trim)
//! ds/dt     = w                         (only present when K_i > 0)
//! ```
//!
//! discretized with an exact zero-order hold. The input `u` is the mismatch
//! (generation deviation minus total load deviation) plus process noise.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the continuous model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    /// M, MW*s/Hz
    pub inertia: f64,
    /// D, MW/Hz
    pub damping: f64,
    /// tau, s
    pub governor_time_constant: f64,
    /// R, Hz/MW
    pub droop: f64,
    /// When false the governor ignores frequency (p_m only decays).
    pub governor: bool,
    /// Secondary (integral) trim gain K_i in MW/(Hz*s). Zero disables the
    /// extra integrator state.
    pub integral_gain: f64,
    /// Hz, only used for reporting absolute frequency.
    pub nominal_frequency: f64,
    /// Standard deviation of the process noise on the input channel, MW.
    pub process_noise_std: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            inertia: 10.0,
            damping: 1.0,
            governor_time_constant: 5.0,
            droop: 0.05,
            governor: true,
            integral_gain: 0.0,
            nominal_frequency: 60.0,
            process_noise_std: 0.5,
        }
    }
}

/// Discrete-time LTI plant `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    dt: f64,
    sigma_process: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub k: u64,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl PlantModel {
    /// Zero-order-hold discretization of the continuous model.
    pub fn build(params: &PlantParams, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParam(format!("discretization interval must be > 0, got {dt}")));
        }
        let p = params;
        if !(p.inertia > 0.0 && p.governor_time_constant > 0.0) {
            return Err(Error::InvalidParam("inertia and governor time constant must be > 0".into()));
        }
        if !(p.damping >= 0.0) {
            return Err(Error::InvalidParam(format!("damping must be >= 0, got {}", p.damping)));
        }
        if p.governor && !(p.droop > 0.0) {
            return Err(Error::InvalidParam(format!("droop must be > 0, got {}", p.droop)));
        }
        if !(p.integral_gain >= 0.0) || !(p.process_noise_std >= 0.0) {
            return Err(Error::InvalidParam("integral gain and noise std must be >= 0".into()));
        }
        let n = if p.integral_gain > 0.0 { 3 } else { 2 };
        let mut ac = DMatrix::zeros(n, n);
        ac[(0, 0)] = -p.damping / p.inertia;
        ac[(0, 1)] = 1.0 / p.inertia;
        ac[(1, 1)] = -1.0 / p.governor_time_constant;
        if p.governor {
            ac[(1, 0)] = -1.0 / (p.droop * p.governor_time_constant);
        }
        if n == 3 {
            ac[(1, 2)] = -p.integral_gain / p.governor_time_constant;
            ac[(2, 0)] = 1.0;
        }
        let mut bc = DVector::zeros(n);
        bc[0] = 1.0 / p.inertia;

        // exp([[Ac, Bc], [0, 0]] * dt) = [[A, B], [0, 1]]
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&ac * dt));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&bc * dt));
        let phi = aug.exp();
        let a = phi.view((0, 0), (n, n)).into_owned();
        let b = phi.view((0, n), (n, 1)).column(0).into_owned();
        let mut c = RowDVector::zeros(n);
        c[0] = 1.0;
        Self::from_matrices(a, b, c, dt, p.process_noise_std)
    }

    /// Wraps explicit discrete matrices, validating stability and `C B != 0`.
    pub fn from_matrices(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, dt: f64, sigma_process: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::InvalidParam("plant matrix dimensions disagree".into()));
        }
        let rho = spectral_radius(&a);
        // pure integrators land at exactly 1; allow for rounding in the eigen solver
        if !(rho < 1.0 - 1e-12) {
            return Err(Error::UnstablePlant { spectral_radius: rho });
        }
        if (&c * &b)[0] == 0.0 {
            return Err(Error::DegenerateInputPath);
        }
        Ok(Self { a, b, c, dt, sigma_process })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sigma_process(&self) -> f64 {
        self.sigma_process
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn cb(&self) -> f64 {
        (&self.c * &self.b)[0]
    }

    /// Steady-state output per unit of constant input, `C (I - A)^-1 B`.
    pub fn dc_gain(&self) -> f64 {
        let n = self.order();
        let i_minus_a = DMatrix::identity(n, n) - &self.a;
        let x = i_minus_a.lu().solve(&self.b).expect("I - A is invertible for a stable plant");
        (&self.c * x)[0]
    }

    pub fn initial_state(&self) -> PlantState {
        PlantState { x: DVector::zeros(self.order()), k: 0 }
    }

    /// Advances one tick with input `u + noise` and returns the output of the
    /// updated state.
    pub fn step(&self, state: &mut PlantState, u: f64, noise: f64) -> Result<f64> {
        let next = &self.a * &state.x + &self.b * (u + noise);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged { tick: state.k });
        }
        state.x = next;
        state.k += 1;
        Ok((&self.c * &state.x)[0])
    }
}

/// Piecewise-constant generation `g[k]` with nominal `g*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSchedule {
    nominal: f64,
    steps: Vec<(u64, f64)>,
}

impl GenerationSchedule {
    pub fn new(nominal: f64, steps: Vec<(u64, f64)>) -> Result<Self> {
        match steps.first() {
            Some(&(0, _)) => {}
            _ => return Err(Error::InvalidParam("schedule must start at tick 0".into())),
        }
        if steps.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParam("schedule ticks must be strictly increasing".into()));
        }
        if !nominal.is_finite() || steps.iter().any(|s| !s.1.is_finite()) {
            return Err(Error::InvalidParam("schedule levels must be finite".into()));
        }
        Ok(Self { nominal, steps })
    }

    /// Builds a schedule from `(seconds, level)` pairs, rounding to ticks.
    pub fn from_times(nominal: f64, dt: f64, steps: &[(f64, f64)]) -> Result<Self> {
        let ticks = steps
            .iter()
            .map(|&(t, g)| {
                if !(t >= 0.0) {
                    return Err(Error::InvalidParam(format!("schedule time must be >= 0, got {t}")));
                }
                Ok(((t / dt).round() as u64, g))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(nominal, ticks)
    }

    /// 200 MW nominal, dropping to 190 MW at 20 s and to 170 MW at 50 s.
    pub fn two_contingencies(dt: f64) -> Result<Self> {
        Self::from_times(200.0, dt, &[(0.0, 200.0), (20.0, 190.0), (50.0, 170.0)])
    }

    pub fn nominal(&self) -> f64 {
        self.nominal
    }

    pub fn steps(&self) -> &[(u64, f64)] {
        &self.steps
    }

    pub fn generation_at(&self, k: u64) -> f64 {
        let idx = self.steps.partition_point(|&(start, _)| start <= k);
        self.steps[idx - 1].1
    }

    /// `g[k] - g*`.
    pub fn deviation_at(&self, k: u64) -> f64 {
        self.generation_at(k) - self.nominal
    }

    /// Index of the schedule segment active at tick `k`.
    pub fn segment_at(&self, k: u64) -> usize {
        self.steps.partition_point(|&(start, _)| start <= k) - 1
    }
}
