//! Noiseless continuous-time limit of the DGP iteration:
//!
//! ```text
//! dx/dt = Proj_x[ -c L grad f(x) + u 1 ],   u = g_bar - 1'x
//! ```
//!
//! integrated by explicit Euler followed by clamping onto the box. The
//! projection zeroes velocity components that point out of the box at a
//! bound. Along trajectories of strictly feasible instances the potential
//! `z = sum_i dist(x_i, X_i*) + |u|` is non-increasing, where `X_i*` is the
//! set of points whose gradient equals the optimal gradient.

use crate::disutility::DisutilitySpec;
use crate::error::{Error, Result};
use crate::graph::GraphTopology;
use crate::oracle::{critical_sets, solve_primal, PrimalSolution};

#[derive(Debug, Clone)]
pub struct OdeConfig {
    pub specs: Vec<DisutilitySpec>,
    pub topology: GraphTopology,
    pub c: f64,
    pub g_bar: f64,
    pub dt: f64,
    pub t_end: f64,
    critical: Option<Vec<(f64, f64)>>,
}

impl OdeConfig {
    /// Uses the default step `1e-3 / (c max_i q_i)`.
    pub fn new(specs: Vec<DisutilitySpec>, topology: GraphTopology, c: f64, g_bar: f64, t_end: f64) -> Result<Self> {
        if specs.len() != topology.n() {
            return Err(Error::InvalidParam(format!("{} specs for {} nodes", specs.len(), topology.n())));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParam(format!("c must be > 0, got {c}")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParam(format!("t_end must be >= 0, got {t_end}")));
        }
        let q_max = specs.iter().map(|s| s.q()).fold(0.0, f64::max);
        let dt = 1e-3 / (c * q_max);
        Ok(Self { specs, topology, c, g_bar, dt, t_end, critical: None })
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {dt}")));
        }
        self.dt = dt;
        Ok(self)
    }

    /// Solves the centralized problem and caches the critical sets used by
    /// the diagnostics.
    pub fn attach_oracle(&mut self) -> Result<PrimalSolution> {
        let solution = solve_primal(&self.specs, self.g_bar)?;
        self.critical = Some(critical_sets(&self.specs, &solution));
        Ok(solution)
    }

    pub fn critical_sets(&self) -> Option<&[(f64, f64)]> {
        self.critical.as_deref()
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.specs.len() {
            return Err(Error::ArityMismatch { expected: self.specs.len(), got: x.len() });
        }
        match self.specs.iter().zip(x).position(|(s, &v)| !s.contains(v)) {
            Some(index) => Err(Error::DomainViolation { index, value: x[index] }),
            None => Ok(()),
        }
    }
}

fn unprojected(cfg: &OdeConfig, x: &[f64]) -> (Vec<f64>, f64) {
    let grads: Vec<f64> = cfg.specs.iter().zip(x).map(|(s, &v)| s.grad(v)).collect();
    let u = cfg.g_bar - x.iter().sum::<f64>();
    let v = (0..x.len())
        .map(|i| {
            let exchange: f64 = cfg.topology.neighbors(i).iter().map(|&j| grads[j] - grads[i]).sum();
            cfg.c * exchange + u
        })
        .collect();
    (v, u)
}

pub fn projected_rhs(cfg: &OdeConfig, x: &[f64]) -> Result<Vec<f64>> {
    cfg.check_domain(x)?;
    let (mut v, _) = unprojected(cfg, x);
    for ((vi, &xi), s) in v.iter_mut().zip(x).zip(&cfg.specs) {
        if (xi >= s.box_hi() && *vi > 0.0) || (xi <= s.box_lo() && *vi < 0.0) {
            *vi = 0.0;
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

pub fn diagnostics(cfg: &OdeConfig, x: &[f64]) -> Result<Diagnostics> {
    let critical = cfg.critical.as_ref().ok_or(Error::OracleRequired)?;
    if x.len() != critical.len() {
        return Err(Error::ArityMismatch { expected: critical.len(), got: x.len() });
    }
    Ok(diagnostics_against(critical, cfg.g_bar, x))
}

/// `y`, `z` and `u` for a point, given precomputed critical sets.
pub fn diagnostics_against(critical: &[(f64, f64)], g_bar: f64, x: &[f64]) -> Diagnostics {
    let y = critical
        .iter()
        .zip(x)
        .map(|(&(lo, hi), &v)| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            }
        })
        .sum::<f64>();
    let u = g_bar - x.iter().sum::<f64>();
    Diagnostics { y, z: y + u.abs(), u }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: f64,
    /// `NaN` unless the oracle has been attached.
    pub y: f64,
    pub z: f64,
}

/// Projected Euler from `x0` to `t_end`, recording every step.
pub fn integrate(cfg: &OdeConfig, x0: &[f64]) -> Result<Vec<OdePoint>> {
    cfg.check_domain(x0)?;
    let steps = (cfg.t_end / cfg.dt).ceil() as usize;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    let record = |t: f64, x: &[f64]| -> OdePoint {
        match &cfg.critical {
            Some(critical) => {
                let d = diagnostics_against(critical, cfg.g_bar, x);
                OdePoint { t, x: x.to_vec(), u: d.u, y: d.y, z: d.z }
            }
            None => OdePoint { t, x: x.to_vec(), u: cfg.g_bar - x.iter().sum::<f64>(), y: f64::NAN, z: f64::NAN },
        }
    };
    out.push(record(0.0, &x));
    for k in 1..=steps {
        let (v, _) = unprojected(cfg, &x);
        for ((xi, vi), s) in x.iter_mut().zip(&v).zip(&cfg.specs) {
            *xi = s.project(*xi + cfg.dt * vi);
        }
        out.push(record(k as f64 * cfg.dt, &x));
    }
    Ok(out)
}

/// The two-load boundary instance: `f = x^2`, boxes `[0, 1/4] x [0, 1]`,
/// one edge, `c = 1`, `g_bar = 1`. Its unique optimum `[1/4, 3/4]` sits on
/// the boundary and is not an equilibrium of the flow, which instead
/// settles at `[1/4, 5/12]`.
pub fn boundary_counterexample(t_end: f64) -> OdeConfig {
    let specs = vec![
        DisutilitySpec::quadratic_on_closed_box(1.0, 0.0, 0.25).expect("valid box"),
        DisutilitySpec::quadratic_on_closed_box(1.0, 0.0, 1.0).expect("valid box"),
    ];
    let topology = GraphTopology::band(2, 1).expect("two nodes");
    OdeConfig::new(specs, topology, 1.0, 1.0, t_end).expect("valid config")
}
