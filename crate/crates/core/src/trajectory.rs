//! Newtonian trajectories under the Lorentz force.
//!
//! The fields are autonomous, so only the elapsed interval matters; backward
//! propagation integrates the same ODE with a negative step.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::model::{lorentz_force, FieldConfig, PhaseSpacePoint, PhysicalConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    #[default]
    Rk4Fixed,
    /// Matrix exponential of the constant-coefficient system; requires `b1 = 0`.
    ClosedFormLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub method: IntegratorMethod,
    pub step_count_per_unit_time: u32,
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            method: IntegratorMethod::Rk4Fixed,
            step_count_per_unit_time: 256,
            max_step: 1.0,
        }
    }
}

impl IntegratorSettings {
    pub fn rk4(step_count_per_unit_time: u32) -> Self {
        IntegratorSettings {
            step_count_per_unit_time,
            ..Default::default()
        }
    }

    pub fn step(&self) -> f64 {
        self.max_step.min(1.0 / self.step_count_per_unit_time as f64)
    }

    pub fn validate(&self, fields: &FieldConfig) -> Result<()> {
        if self.step_count_per_unit_time == 0 {
            return Err(WignerError::config(
                "integrator.step_count_per_unit_time",
                "must be >= 1",
            ));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(WignerError::config("integrator.max_step", "must be finite and > 0"));
        }
        if self.method == IntegratorMethod::ClosedFormLinear && !fields.is_classical() {
            return Err(WignerError::config(
                "integrator.method",
                "closed_form_linear requires fields.b1 = 0",
            ));
        }
        Ok(())
    }
}

/// Coefficient matrix of the linear system in `(px, py, x, y)` for `b1 = 0`.
fn linear_generator(fields: &FieldConfig, consts: &PhysicalConstants) -> Matrix4<f64> {
    let e = consts.charge;
    let m = consts.mass;
    let w = e * fields.b0 / m;
    #[rustfmt::skip]
    let mat = Matrix4::new(
        0.0,     w,   e * fields.ex, 0.0,
        -w,      0.0, 0.0,           e * fields.ey,
        1.0 / m, 0.0, 0.0,           0.0,
        0.0, 1.0 / m, 0.0,           0.0,
    );
    mat
}

fn to_vec(pt: &PhaseSpacePoint) -> Vector4<f64> {
    Vector4::from(pt.to_array())
}

fn from_vec(v: &Vector4<f64>) -> PhaseSpacePoint {
    PhaseSpacePoint::new(v[0], v[1], v[2], v[3])
}

/// `exp(M Δt) z` for the exactly linear case.
pub fn closed_form_propagate(
    pt: &PhaseSpacePoint,
    dt: f64,
    fields: &FieldConfig,
    consts: &PhysicalConstants,
) -> Result<PhaseSpacePoint> {
    if !fields.is_classical() {
        return Err(WignerError::config(
            "integrator.method",
            "closed-form propagation requires fields.b1 = 0",
        ));
    }
    let flow = (linear_generator(fields, consts) * dt).exp();
    let out = from_vec(&(flow * to_vec(pt)));
    if !out.is_finite() {
        return Err(WignerError::NumericalOverflow { time: dt });
    }
    Ok(out)
}

/// Reusable propagator bound to one field configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub fields: FieldConfig,
    pub consts: PhysicalConstants,
    pub settings: IntegratorSettings,
    generator: Option<Matrix4<f64>>,
}

impl Propagator {
    pub fn new(fields: FieldConfig, consts: PhysicalConstants, settings: IntegratorSettings) -> Result<Self> {
        settings.validate(&fields)?;
        let generator = match settings.method {
            IntegratorMethod::ClosedFormLinear => Some(linear_generator(&fields, &consts)),
            IntegratorMethod::Rk4Fixed => None,
        };
        Ok(Propagator {
            fields,
            consts,
            settings,
            generator,
        })
    }

    #[inline]
    fn rhs(&self, s: &[f64; 4]) -> [f64; 4] {
        let pt = PhaseSpacePoint::from_array(*s);
        let (fx, fy) = lorentz_force(&pt, &self.fields, &self.consts);
        [fx, fy, s[0] / self.consts.mass, s[1] / self.consts.mass]
    }

    #[inline]
    fn rk4_step(&self, s: &[f64; 4], h: f64) -> [f64; 4] {
        let k1 = self.rhs(s);
        let a: [f64; 4] = std::array::from_fn(|i| s[i] + 0.5 * h * k1[i]);
        let k2 = self.rhs(&a);
        let b: [f64; 4] = std::array::from_fn(|i| s[i] + 0.5 * h * k2[i]);
        let k3 = self.rhs(&b);
        let c: [f64; 4] = std::array::from_fn(|i| s[i] + h * k3[i]);
        let k4 = self.rhs(&c);
        std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    /// State at `t_to` of the trajectory through `pt` at `t_from`.
    pub fn propagate_between(&self, pt: &PhaseSpacePoint, t_from: f64, t_to: f64) -> Result<PhaseSpacePoint> {
        if !(t_from.is_finite() && t_to.is_finite()) {
            return Err(WignerError::InvalidOperation("propagation times must be finite".into()));
        }
        let dt = t_to - t_from;
        if dt == 0.0 {
            return Ok(*pt);
        }
        if let Some(m) = &self.generator {
            let out = from_vec(&((m * dt).exp() * to_vec(pt)));
            if !out.is_finite() {
                return Err(WignerError::NumericalOverflow { time: t_to });
            }
            return Ok(out);
        }
        let h = self.settings.step();
        let dir = dt.signum();
        let span = dt.abs();
        let full = (span / h * (1.0 + 1e-12)).floor() as u64;
        let rest = span - full as f64 * h;
        let mut s = pt.to_array();
        for k in 0..full {
            s = self.rk4_step(&s, dir * h);
            if !s.iter().all(|v| v.is_finite()) {
                return Err(WignerError::NumericalOverflow {
                    time: t_from + dir * (k + 1) as f64 * h,
                });
            }
        }
        if rest > 1e-9 * h {
            s = self.rk4_step(&s, dir * rest);
            if !s.iter().all(|v| v.is_finite()) {
                return Err(WignerError::NumericalOverflow { time: t_to });
            }
        }
        Ok(PhaseSpacePoint::from_array(s))
    }

    /// Propagate over the signed interval `dt` (negative is backward).
    pub fn propagate(&self, pt: &PhaseSpacePoint, dt: f64) -> Result<PhaseSpacePoint> {
        self.propagate_between(pt, 0.0, dt)
    }

    pub fn jacobian_det(&self, pt: &PhaseSpacePoint, dt: f64) -> Result<f64> {
        let a = pt.to_array();
        let mut jac = Matrix4::<f64>::zeros();
        for d in 0..4 {
            let eps = 1e-6 * (1.0 + a[d].abs());
            let mut plus = a;
            let mut minus = a;
            plus[d] += eps;
            minus[d] -= eps;
            let fp = self.propagate(&PhaseSpacePoint::from_array(plus), dt)?.to_array();
            let fm = self.propagate(&PhaseSpacePoint::from_array(minus), dt)?.to_array();
            for r in 0..4 {
                jac[(r, d)] = (fp[r] - fm[r]) / (2.0 * eps);
            }
        }
        Ok(jac.determinant())
    }
}

pub fn propagate(
    pt: &PhaseSpacePoint,
    t_from: f64,
    t_to: f64,
    fields: &FieldConfig,
    consts: &PhysicalConstants,
    settings: &IntegratorSettings,
) -> Result<PhaseSpacePoint> {
    Propagator::new(*fields, *consts, *settings)?.propagate_between(pt, t_from, t_to)
}

/// Determinant of the flow map Jacobian by relative central differences.
pub fn flow_jacobian_det(
    pt: &PhaseSpacePoint,
    t_from: f64,
    t_to: f64,
    fields: &FieldConfig,
    consts: &PhysicalConstants,
    settings: &IntegratorSettings,
) -> Result<f64> {
    Propagator::new(*fields, *consts, *settings)?.jacobian_det(pt, t_to - t_from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn rel(a: &PhaseSpacePoint, b: &PhaseSpacePoint) -> f64 {
        (*a - *b).norm() / (1.0 + b.norm())
    }

    #[test]
    fn free_flight() {
        let s = IntegratorSettings::default();
        let out = propagate(
            &PhaseSpacePoint::new(1.0, 0.0, 0.0, 0.0),
            0.0,
            2.0,
            &FieldConfig::default(),
            &unit(),
            &s,
        )
        .unwrap();
        assert!(rel(&out, &PhaseSpacePoint::new(1.0, 0.0, 2.0, 0.0)) < 1e-14);
    }

    #[test]
    fn cyclotron_quarter_turn() {
        let fields = FieldConfig {
            b0: 1.0,
            ..Default::default()
        };
        let start = PhaseSpacePoint::new(1.0, 0.0, 0.0, 0.0);
        let expected = PhaseSpacePoint::new(0.0, -1.0, 1.0, -1.0);
        let rk = propagate(&start, 0.0, FRAC_PI_2, &fields, &unit(), &IntegratorSettings::default()).unwrap();
        assert!(rel(&rk, &expected) < 1e-9, "{rk:?}");
        let cf = closed_form_propagate(&start, FRAC_PI_2, &fields, &unit()).unwrap();
        assert!(rel(&cf, &expected) < 1e-13, "{cf:?}");
    }

    #[test]
    fn closed_form_free_shift_and_norm() {
        let start = PhaseSpacePoint::new(2.0, -1.0, 0.5, 0.25);
        let out = closed_form_propagate(&start, 3.0, &FieldConfig::default(), &unit()).unwrap();
        assert!(rel(&out, &PhaseSpacePoint::new(2.0, -1.0, 6.5, -2.75)) < 1e-14);

        let b = FieldConfig {
            b0: 1.0,
            ..Default::default()
        };
        let out = closed_form_propagate(&start, 2.7, &b, &unit()).unwrap();
        assert!((out.momentum_norm_sq().sqrt() - start.momentum_norm_sq().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_electric_series() {
        // dpx/dt = x, dx/dt = px: px(t) = sinh t for x(0) = 1, px(0) = 0.
        let f = FieldConfig {
            ex: 1.0,
            ..Default::default()
        };
        let dt = 0.01;
        let out = closed_form_propagate(&PhaseSpacePoint::new(0.0, 0.0, 1.0, 0.0), dt, &f, &unit()).unwrap();
        assert!((out.px - dt.sinh()).abs() < 1e-15);
        assert!((out.px - dt).abs() < dt.powi(3));
        assert!((out.x - dt.cosh()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_gradient() {
        let f = FieldConfig {
            b1: 0.1,
            ..Default::default()
        };
        let err = closed_form_propagate(&PhaseSpacePoint::ORIGIN, 1.0, &f, &unit()).unwrap_err();
        assert!(matches!(err, WignerError::Config { .. }));
        let s = IntegratorSettings {
            method: IntegratorMethod::ClosedFormLinear,
            ..Default::default()
        };
        assert!(Propagator::new(f, unit(), s).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let s = IntegratorSettings::default();
        let pt = PhaseSpacePoint::new(0.3, -0.7, 1.2, 0.4);
        let zero = FieldConfig::default();
        assert!((flow_jacobian_det(&pt, 0.0, 1.7, &zero, &unit(), &s).unwrap() - 1.0).abs() < 1e-6);
        let b = FieldConfig {
            b0: 1.0,
            ..Default::default()
        };
        assert!((flow_jacobian_det(&pt, 0.0, 1.0, &b, &unit(), &s).unwrap() - 1.0).abs() < 1e-6);
        let full = FieldConfig {
            b0: 0.5,
            b1: 0.3,
            ex: 0.1,
            ey: 0.1,
        };
        assert!((flow_jacobian_det(&pt, 0.0, 0.5, &full, &unit(), &s).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn overflow_reports_time() {
        let f = FieldConfig {
            ex: 1.0e4,
            ey: 1.0e4,
            ..Default::default()
        };
        let s = IntegratorSettings::rk4(4);
        let err = propagate(&PhaseSpacePoint::new(1.0, 1.0, 1.0, 1.0), 0.0, 100.0, &f, &unit(), &s).unwrap_err();
        match err {
            WignerError::NumericalOverflow { time } => assert!(time > 0.0 && time < 100.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_step_lands_on_target() {
        let s = IntegratorSettings::rk4(4);
        let out = propagate(
            &PhaseSpacePoint::new(1.0, 2.0, 0.0, 0.0),
            0.0,
            0.3,
            &FieldConfig::default(),
            &unit(),
            &s,
        )
        .unwrap();
        assert!((out.x - 0.3).abs() < 1e-15 && (out.y - 0.6).abs() < 1e-15);
    }

    fn field_strategy() -> impl Strategy<Value = FieldConfig> {
        (-1.0f64..1.0, -0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5).prop_map(|(b0, b1, ex, ey)| FieldConfig {
            b0,
            b1,
            ex,
            ey,
        })
    }

    fn point_strategy() -> impl Strategy<Value = PhaseSpacePoint> {
        proptest::array::uniform4(-2.0f64..2.0).prop_map(PhaseSpacePoint::from_array)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn round_trip(pt in point_strategy(), f in field_strategy(), dt in 0.0f64..2.0) {
            let p = Propagator::new(f, unit(), IntegratorSettings::default()).unwrap();
            let there = p.propagate(&pt, dt).unwrap();
            let back = p.propagate(&there, -dt).unwrap();
            prop_assert!(rel(&back, &pt) < 1e-8);
        }

        #[test]
        fn rk4_matches_closed_form(pt in point_strategy(), mut f in field_strategy(), dt in 0.0f64..2.0) {
            f.b1 = 0.0;
            let rk = propagate(&pt, 0.0, dt, &f, &unit(), &IntegratorSettings::rk4(10_000)).unwrap();
            let cf = closed_form_propagate(&pt, dt, &f, &unit()).unwrap();
            prop_assert!(rel(&rk, &cf) < 1e-8);
        }

        #[test]
        fn liouville(pt in point_strategy(), f in field_strategy(), dt in 0.0f64..1.5) {
            let p = Propagator::new(f, unit(), IntegratorSettings::default()).unwrap();
            prop_assert!((p.jacobian_det(&pt, dt).unwrap() - 1.0).abs() < 1e-5);
        }

        #[test]
        fn semigroup(pt in point_strategy(), f in field_strategy(), a in 0u32..300, b in 0u32..300) {
            let s = IntegratorSettings::default();
            let p = Propagator::new(f, unit(), s).unwrap();
            let h = s.step();
            let ta = a as f64 * h;
            let tb = (a + b) as f64 * h;
            let mid = p.propagate_between(&pt, 0.0, ta).unwrap();
            let two = p.propagate_between(&mid, ta, tb).unwrap();
            let one = p.propagate_between(&pt, 0.0, tb).unwrap();
            prop_assert!(rel(&two, &one) < 1e-9);
        }
    }
}
