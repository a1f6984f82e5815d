//! Physical configuration, the Lorentz force and observables.
//!
//! Phase-space points are ordered `(px, py, x, y)` everywhere in the crate,
//! including the array form used by the integrators and the grids.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};

/// Natural constants entering the transport equation. Reduced units
/// (`hbar = mass = charge = 1`) are the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(WignerError::config("constants.hbar", "must be finite and > 0"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(WignerError::config("constants.mass", "must be finite and > 0"));
        }
        if !(self.charge.is_finite() && self.charge != 0.0) {
            return Err(WignerError::config("constants.charge", "must be finite and non-zero"));
        }
        Ok(())
    }
}

/// Linear electromagnetic field: `B = (0, 0, b0 + b1 y)` and `E = (ex x, ey y, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub b0: f64,
    pub b1: f64,
    pub ex: f64,
    pub ey: f64,
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b0", self.b0), ("b1", self.b1), ("ex", self.ex), ("ey", self.ey)] {
            if !v.is_finite() {
                return Err(WignerError::config(format!("fields.{name}"), "must be finite"));
            }
        }
        Ok(())
    }

    /// `b1 == 0` removes the quantum term; trajectories never scatter.
    pub fn is_classical(&self) -> bool {
        self.b1 == 0.0
    }
}

/// A point `(p, x)` of the four-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub px: f64,
    pub py: f64,
    pub x: f64,
    pub y: f64,
}

impl PhaseSpacePoint {
    pub const ORIGIN: PhaseSpacePoint = PhaseSpacePoint {
        px: 0.0,
        py: 0.0,
        x: 0.0,
        y: 0.0,
    };

    pub const fn new(px: f64, py: f64, x: f64, y: f64) -> Self {
        PhaseSpacePoint { px, py, x, y }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        PhaseSpacePoint {
            px: a[0],
            py: a[1],
            x: a[2],
            y: a[3],
        }
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.px, self.py, self.x, self.y]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn momentum_norm_sq(&self) -> f64 {
        self.px * self.px + self.py * self.py
    }
}

impl Add for PhaseSpacePoint {
    type Output = PhaseSpacePoint;
    fn add(self, o: Self) -> Self {
        PhaseSpacePoint::new(self.px + o.px, self.py + o.py, self.x + o.x, self.y + o.y)
    }
}

impl Sub for PhaseSpacePoint {
    type Output = PhaseSpacePoint;
    fn sub(self, o: Self) -> Self {
        PhaseSpacePoint::new(self.px - o.px, self.py - o.py, self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for PhaseSpacePoint {
    type Output = PhaseSpacePoint;
    fn mul(self, s: f64) -> Self {
        PhaseSpacePoint::new(self.px * s, self.py * s, self.x * s, self.y * s)
    }
}

/// In-plane Lorentz force `e [E(x, y) + p x B(y) / m]`.
pub fn lorentz_force(pt: &PhaseSpacePoint, fields: &FieldConfig, consts: &PhysicalConstants) -> (f64, f64) {
    let e = consts.charge;
    let bz = fields.b0 + fields.b1 * pt.y;
    let fx = e * (fields.ex * pt.x + pt.py / consts.mass * bz);
    let fy = e * (fields.ey * pt.y - pt.px / consts.mass * bz);
    (fx, fy)
}

/// Physical quantity `A(p, x, t)` whose expectation value is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    ConstantOne,
    MeanX,
    MeanY,
    MeanPx,
    MeanPy,
    KineticEnergy,
    /// Indicator of the half-open box `[lower, upper)` in `(px, py, x, y)`.
    IndicatorCell {
        lower: [f64; 4],
        upper: [f64; 4],
    },
}

impl Observable {
    pub fn eval(&self, pt: &PhaseSpacePoint, _t: f64, consts: &PhysicalConstants) -> f64 {
        match self {
            Observable::ConstantOne => 1.0,
            Observable::MeanX => pt.x,
            Observable::MeanY => pt.y,
            Observable::MeanPx => pt.px,
            Observable::MeanPy => pt.py,
            Observable::KineticEnergy => pt.momentum_norm_sq() / (2.0 * consts.mass),
            Observable::IndicatorCell { lower, upper } => {
                let a = pt.to_array();
                let inside = (0..4).all(|d| a[d] >= lower[d] && a[d] < upper[d]);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup |A|` when the observable is bounded.
    pub fn abs_bound(&self) -> Option<f64> {
        match self {
            Observable::ConstantOne | Observable::IndicatorCell { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::ConstantOne => "constant_one",
            Observable::MeanX => "mean_x",
            Observable::MeanY => "mean_y",
            Observable::MeanPx => "mean_px",
            Observable::MeanPy => "mean_py",
            Observable::KineticEnergy => "kinetic_energy",
            Observable::IndicatorCell { .. } => "indicator_cell",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Observable::IndicatorCell { lower, upper } = self {
            for d in 0..4 {
                if !(lower[d].is_finite() && upper[d].is_finite() && upper[d] > lower[d]) {
                    return Err(WignerError::config(
                        "observable.upper",
                        "indicator cell needs finite bounds with upper > lower",
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn eval_observable(a: &Observable, pt: &PhaseSpacePoint, t: f64, consts: &PhysicalConstants) -> f64 {
    a.eval(pt, t, consts)
}
