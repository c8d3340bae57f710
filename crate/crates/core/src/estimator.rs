//! Unbiased minimum-variance state estimation with an unknown input
//! in the style of Kitanidis, followed by recovery of that input.
//!
//! Each load runs its own filter on its own noisy frequency measurement.
//! The filter gain `L` is the minimum-trace gain subject to `L C B = B`,
//! which makes the state estimate insensitive to the unknown mismatch. The
//! mismatch is then recovered by treating the newest measurement as exact:
//! `u_hat = (C B)^-1 (y - C A x_hat_prev)`.
//!
//! Timing: the plant emits `y[k] = C x[k+1]` after applying `u[k]`, so the
//! value returned by [`EstimatorState::update`] for measurement `y[k]` is the
//! estimate of `u[k]`, the input applied during the same tick.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::plant::{spectral_radius, PlantModel};

/// Initial covariance scale, `P0 = 10 I`.
pub const INITIAL_COVARIANCE: f64 = 10.0;

const ASYMMETRY_TOL: f64 = 1e-9;

/// True iff every eigenvalue of `(I - B (C B)^-1 C) A` lies strictly inside
/// the unit circle, which bounds the input-estimation error variance.
pub fn check_prop1_matrices(a: &DMatrix<f64>, b: &DVector<f64>, c: &RowDVector<f64>) -> Result<bool> {
    let cb = (c * b)[0];
    if cb == 0.0 {
        return Err(Error::DegenerateInputPath);
    }
    Ok(spectral_radius(&error_dynamics(a, b, c, cb)) < 1.0)
}

pub fn check_prop1(model: &PlantModel) -> Result<bool> {
    check_prop1_matrices(model.a(), model.b(), model.c())
}

fn error_dynamics(a: &DMatrix<f64>, b: &DVector<f64>, c: &RowDVector<f64>, cb: f64) -> DMatrix<f64> {
    let n = a.nrows();
    (DMatrix::identity(n, n) - b * c / cb) * a
}

/// Noise statistics and precomputed matrices shared by all load filters.
#[derive(Debug, Clone)]
pub struct EstimatorModel {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    cb: f64,
    /// Process-noise covariance; the plant noise enters through `B`.
    q: DMatrix<f64>,
    /// Measurement-noise variance, Hz^2.
    r: f64,
}

impl EstimatorModel {
    pub fn new(plant: &PlantModel, sigma_meas: f64) -> Result<Self> {
        if !(sigma_meas >= 0.0 && sigma_meas.is_finite()) {
            return Err(Error::InvalidParam(format!("measurement noise std must be >= 0, got {sigma_meas}")));
        }
        if !check_prop1(plant)? {
            return Err(Error::InvalidParam("input-recovery error dynamics are not stable for this plant".into()));
        }
        let b = plant.b().clone();
        let q = &b * b.transpose() * plant.sigma_process().powi(2);
        Ok(Self { a: plant.a().clone(), c: plant.c().clone(), cb: plant.cb(), b, q, r: sigma_meas * sigma_meas })
    }

    pub fn sigma_meas(&self) -> f64 {
        self.r.sqrt()
    }

    pub fn initial_state(&self) -> EstimatorState {
        let n = self.a.nrows();
        EstimatorState { x_hat: DVector::zeros(n), p: DMatrix::identity(n, n) * INITIAL_COVARIANCE, last_u_hat: 0.0, k: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub last_u_hat: f64,
    k: u64,
}

impl EstimatorState {
    /// Processes one frequency measurement and returns the recovered input.
    pub fn update(&mut self, model: &EstimatorModel, y_meas: f64) -> Result<f64> {
        let EstimatorModel { a, b, c, cb, q, r } = model;
        let x_pred = a * &self.x_hat;
        let y_pred = (c * &x_pred)[0];

        let p_pred = a * &self.p * a.transpose() + q;
        let pc = &p_pred * c.transpose();
        let innovation_var = (c * &pc)[0] + r;
        let k_gain = if innovation_var > 0.0 { pc / innovation_var } else { DVector::zeros(b.len()) };
        // decoupling correction: (F' S^-1 F)^-1 F' S^-1 reduces to 1/F for one output
        let gain = &k_gain + (b - &k_gain * *cb) / *cb;

        let innovation = y_meas - y_pred;
        let x_new = x_pred + &gain * innovation;

        let n = b.len();
        let i_lc = DMatrix::identity(n, n) - &gain * c;
        let mut p_new = &i_lc * p_pred * i_lc.transpose() + &gain * gain.transpose() * *r;

        let scale = 1.0 + p_new.amax();
        let asym = (&p_new - p_new.transpose()).amax();
        if !(asym <= ASYMMETRY_TOL * scale) {
            return Err(Error::EstimatorDiverged { tick: self.k });
        }
        p_new = (&p_new + p_new.transpose()) * 0.5;

        let u_hat = innovation / *cb;
        if !u_hat.is_finite() || x_new.iter().any(|v| !v.is_finite()) || p_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::EstimatorDiverged { tick: self.k });
        }
        self.x_hat = x_new;
        self.p = p_new;
        self.last_u_hat = u_hat;
        self.k += 1;
        Ok(u_hat)
    }
}
