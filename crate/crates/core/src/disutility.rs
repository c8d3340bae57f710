//! Consumer disutility models.
//!
//! Two convex families are supported: a flat-quadratic cost with a closed
//! dead band `[-a, a]` of zero disutility, and a plain quadratic `q x^2`.
//! Both are defined on all of the real line; the box `[box_lo, box_hi]` only
//! matters for [`DisutilitySpec::project`]. Gradients are in cost per MW.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    FlatQuadratic,
    Quadratic,
}

/// Per-load cost parameters and consumption-deviation box (MW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisutilitySpec {
    family: Family,
    q: f64,
    a: f64,
    box_lo: f64,
    box_hi: f64,
}

impl DisutilitySpec {
    pub fn quadratic(q: f64, box_lo: f64, box_hi: f64) -> Result<Self> {
        Self::new(Family::Quadratic, q, 0.0, box_lo, box_hi)
    }

    /// Quadratic cost on a box that may touch zero (`lo <= 0 <= hi`, `lo < hi`).
    /// Such boxes violate the interior-nominal-point assumption and are only
    /// meant for reference instances whose optimum sits on the boundary.
    pub fn quadratic_on_closed_box(q: f64, box_lo: f64, box_hi: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParam(format!("q must be > 0, got {q}")));
        }
        if !(box_lo.is_finite() && box_hi.is_finite() && box_lo <= 0.0 && 0.0 <= box_hi && box_lo < box_hi) {
            return Err(Error::InvalidParam(format!("box must satisfy lo <= 0 <= hi and lo < hi, got [{box_lo}, {box_hi}]")));
        }
        Ok(Self { family: Family::Quadratic, q, a: 0.0, box_lo, box_hi })
    }

    pub fn flat_quadratic(q: f64, a: f64, box_lo: f64, box_hi: f64) -> Result<Self> {
        Self::new(Family::FlatQuadratic, q, a, box_lo, box_hi)
    }

    pub fn new(family: Family, q: f64, a: f64, box_lo: f64, box_hi: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParam(format!("q must be > 0, got {q}")));
        }
        if !(box_lo.is_finite() && box_hi.is_finite() && box_lo < 0.0 && 0.0 < box_hi) {
            return Err(Error::InvalidParam(format!("box must satisfy lo < 0 < hi, got [{box_lo}, {box_hi}]")));
        }
        let a = match family {
            Family::Quadratic => {
                if a != 0.0 {
                    return Err(Error::InvalidParam(format!("quadratic disutility has no dead band, got a = {a}")));
                }
                0.0
            }
            Family::FlatQuadratic => {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::InvalidParam(format!("a must be >= 0, got {a}")));
                }
                if !(a < box_hi && -a > box_lo) {
                    return Err(Error::InvalidParam(format!("dead band [-{a}, {a}] must lie strictly inside [{box_lo}, {box_hi}]")));
                }
                a
            }
        };
        Ok(Self { family, q, a, box_lo, box_hi })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Dead-band half-width; zero for the quadratic family.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn box_lo(&self) -> f64 {
        self.box_lo
    }

    pub fn box_hi(&self) -> f64 {
        self.box_hi
    }

    pub fn is_strictly_convex(&self) -> bool {
        match self.family {
            Family::Quadratic => true,
            Family::FlatQuadratic => self.a == 0.0,
        }
    }

    /// Signed distance outside the dead band (zero inside it).
    fn excess(&self, x: f64) -> f64 {
        if x > self.a {
            x - self.a
        } else if x < -self.a {
            x + self.a
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let e = self.excess(x);
        self.q * e * e
    }

    pub fn grad(&self, x: f64) -> f64 {
        2.0 * self.q * self.excess(x)
    }

    /// Preimage of a gradient value. Only defined when the gradient is
    /// strictly increasing everywhere.
    pub fn inv_grad(&self, g: f64) -> Result<f64> {
        if !self.is_strictly_convex() {
            return Err(Error::NotInvertible);
        }
        Ok(g / (2.0 * self.q))
    }

    pub fn project(&self, v: f64) -> f64 {
        v.clamp(self.box_lo, self.box_hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.box_lo <= x && x <= self.box_hi
    }

    /// Minimizer of `f(x) - lambda * x` over the box. For the flat family at
    /// `lambda == 0` any point of the dead band is a minimizer; the interval
    /// is returned as `(lo, hi)`, otherwise `lo == hi`.
    pub fn best_response(&self, lambda: f64) -> (f64, f64) {
        if lambda == 0.0 {
            return (self.project(-self.a), self.project(self.a));
        }
        let x = lambda.signum() * self.a + lambda / (2.0 * self.q);
        let x = self.project(x);
        (x, x)
    }

    /// `{x : grad(x) == g}`, unclipped. Empty sets cannot occur: the
    /// gradient is onto the reals.
    pub fn gradient_level_set(&self, g: f64) -> (f64, f64) {
        if g == 0.0 {
            (-self.a, self.a)
        } else {
            let x = g.signum() * self.a + g / (2.0 * self.q);
            (x, x)
        }
    }
}
