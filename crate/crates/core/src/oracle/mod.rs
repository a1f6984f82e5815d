//! Deterministic low-order terms of the resolvent series.
//!
//! `⟨A⟩_n` for `n ≤ 2` is computed by a product rule over the start (or end)
//! point, iterated Gauss–Legendre rules over the ordered scattering times and
//! exhaustive enumeration of the `15^n` kernel branches. All orders share one
//! branch tree: the time nodes of level `ℓ` serve both as the last event of an
//! order-`ℓ` path and as the parent of the order-`ℓ+1` paths.

pub mod fredholm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::initial::InitialWigner;
use crate::model::{Observable, PhaseSpacePoint};
use crate::problem::Problem;
use crate::quadrature::{GaussHermite, GaussLegendre};

pub const MAX_ORACLE_ORDER: usize = 2;

/// Rule for the four phase-space dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseRule {
    /// Gauss–Hermite nodes matched to each Gaussian component of the
    /// `f_w0` envelope. Falls back to the grid box for tabulated states.
    #[default]
    Hermite,
    /// Tensor Gauss–Legendre on a box.
    Legendre { lower: [f64; 4], upper: [f64; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub phase_nodes: usize,
    pub time_nodes: usize,
    pub rule: PhaseRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            phase_nodes: 6,
            time_nodes: 4,
            rule: PhaseRule::Hermite,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(4..=64).contains(&self.phase_nodes) {
            return Err(WignerError::config("oracle.phase_nodes", "must be in 4..=64"));
        }
        if !(1..=64).contains(&self.time_nodes) {
            return Err(WignerError::config("oracle.time_nodes", "must be in 1..=64"));
        }
        if let PhaseRule::Legendre { lower, upper } = &self.rule {
            for d in 0..4 {
                if !(lower[d].is_finite() && upper[d].is_finite() && upper[d] > lower[d]) {
                    return Err(WignerError::config(
                        "oracle.upper",
                        "box needs finite bounds with upper > lower",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Nodes `w_i` and weights `c_i` with `∫ F(w) dw ≈ Σ c_i F(w_i)`.
pub fn phase_points(problem: &Problem, spec: &QuadratureSpec) -> Result<Vec<(PhaseSpacePoint, f64)>> {
    spec.validate()?;
    let legendre_box = match (&spec.rule, &problem.f0) {
        (PhaseRule::Legendre { lower, upper }, _) => Some((*lower, *upper)),
        (PhaseRule::Hermite, InitialWigner::TabulatedGrid(t)) => Some((t.grid.spec.lower, t.grid.spec.upper)),
        (PhaseRule::Hermite, _) => None,
    };
    let n = spec.phase_nodes;
    let mut points = Vec::new();
    if let Some((lower, upper)) = legendre_box {
        let rule = GaussLegendre::new(n)?;
        let axes: [Vec<(f64, f64)>; 4] = std::array::from_fn(|d| rule.on_interval(lower[d], upper[d]));
        for (a, wa) in &axes[0] {
            for (b, wb) in &axes[1] {
                for (c, wc) in &axes[2] {
                    for (e, we) in &axes[3] {
                        points.push((PhaseSpacePoint::new(*a, *b, *c, *e), wa * wb * wc * we));
                    }
                }
            }
        }
        return Ok(points);
    }
    let components = problem
        .envelope
        .gaussian_components()
        .ok_or_else(|| WignerError::config("oracle.rule", "hermite rule needs a Gaussian envelope"))?;
    let gh = GaussHermite::new(n)?;
    for (pi, g) in &components {
        let c = g.center.to_array();
        let s = g.sigmas();
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    for i3 in 0..n {
                        let idx = [i0, i1, i2, i3];
                        let w = PhaseSpacePoint::from_array(std::array::from_fn(|d| c[d] + s[d] * gh.nodes[idx[d]]));
                        let weight: f64 = idx.iter().map(|i| gh.weights[*i]).product();
                        let env = problem.envelope.density(&w);
                        if env > 0.0 {
                            points.push((w, pi * weight / env));
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

/// Per-order oracle values, `values[n][j]` for observable `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTerms {
    pub values: Vec<Vec<f64>>,
}

impl OracleTerms {
    pub fn term(&self, order: usize, observable: usize) -> f64 {
        self.values[order][observable]
    }

    pub fn sum(&self, observable: usize) -> f64 {
        self.values.iter().map(|v| v[observable]).sum()
    }
}

struct Tree<'a> {
    problem: &'a Problem,
    final_time: f64,
    max_order: usize,
    rule: GaussLegendre,
    observables: &'a [Observable],
}

impl Tree<'_> {
    /// Forward paths from `(z, t)` after `depth` events.
    fn forward(&self, z: PhaseSpacePoint, t: f64, depth: usize, weight: f64, out: &mut [Vec<f64>]) -> Result<()> {
        let p = &self.problem.propagator;
        let end = p.propagate_between(&z, t, self.final_time)?;
        for (j, a) in self.observables.iter().enumerate() {
            out[depth][j] += weight * a.eval(&end, self.final_time, &self.problem.consts);
        }
        if depth == self.max_order {
            return Ok(());
        }
        let st = &self.problem.stencil;
        let mut zc = z;
        let mut tc = t;
        for (tau, w) in self.rule.on_interval(t, self.final_time) {
            zc = p.propagate_between(&zc, tc, tau)?;
            tc = tau;
            for k in 0..15 {
                let a = st.terms[k].alpha as f64;
                self.forward(zc - st.shift(k), tau, depth + 1, weight * st.gamma * a * w, out)?;
            }
        }
        Ok(())
    }

    /// Backward paths from `(z, t)` after `depth` events; accumulates `f_w0` at time 0.
    fn backward(&self, z: PhaseSpacePoint, t: f64, depth: usize, weight: f64, out: &mut [f64]) -> Result<()> {
        let p = &self.problem.propagator;
        let start = p.propagate_between(&z, t, 0.0)?;
        out[depth] += weight * self.problem.f0.eval(&start);
        if depth == self.max_order {
            return Ok(());
        }
        let st = &self.problem.stencil;
        let mut zc = z;
        let mut tc = t;
        // Descending nodes so the propagation walks steadily backward.
        for (tau, w) in self.rule.on_interval(0.0, t).into_iter().rev() {
            zc = p.propagate_between(&zc, tc, tau)?;
            tc = tau;
            for k in 0..15 {
                let a = st.terms[k].alpha as f64;
                self.backward(zc + st.shift(k), tau, depth + 1, weight * st.gamma * a * w, out)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

fn all_terms(
    dir: Direction,
    max_order: usize,
    final_time: f64,
    observables: &[Observable],
    problem: &Problem,
    spec: &QuadratureSpec,
) -> Result<OracleTerms> {
    if max_order > MAX_ORACLE_ORDER {
        return Err(WignerError::UnsupportedOrder {
            order: max_order,
            max: MAX_ORACLE_ORDER,
        });
    }
    if !(final_time.is_finite() && final_time > 0.0) {
        return Err(WignerError::config("oracle.final_time", "must be finite and > 0"));
    }
    for a in observables {
        a.validate()?;
    }
    // Classical mode has no scattering terms.
    let depth = if problem.is_classical() { 0 } else { max_order };
    let tree = Tree {
        problem,
        final_time,
        max_order: depth,
        rule: GaussLegendre::new(spec.time_nodes)?,
        observables,
    };
    let points = phase_points(problem, spec)?;
    let m = observables.len();
    let per_point: Vec<Result<Vec<Vec<f64>>>> = points
        .par_iter()
        .map(|(w, c)| {
            let mut out = vec![vec![0.0; m]; max_order + 1];
            match dir {
                Direction::Forward => {
                    let f = problem.f0.eval(w);
                    if f != 0.0 {
                        tree.forward(*w, 0.0, 0, c * f, &mut out)?;
                    }
                }
                Direction::Backward => {
                    let end = problem.propagator.propagate(w, final_time)?;
                    let mut s = vec![0.0; max_order + 1];
                    tree.backward(end, final_time, 0, 1.0, &mut s)?;
                    for (n, sn) in s.iter().enumerate() {
                        for (j, a) in observables.iter().enumerate() {
                            out[n][j] = c * sn * a.eval(&end, final_time, &problem.consts);
                        }
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let decay = (-final_time * problem.gamma()).exp();
    let mut values = vec![vec![0.0; m]; max_order + 1];
    for r in per_point {
        let r = r?;
        for n in 0..=max_order {
            for j in 0..m {
                values[n][j] += r[n][j];
            }
        }
    }
    for row in values.iter_mut() {
        for v in row.iter_mut() {
            *v *= decay;
        }
    }
    Ok(OracleTerms { values })
}

/// Forward-parameterized terms `⟨A_j⟩_n`, `n = 0..=max_order`, for every observable.
pub fn forward_terms(
    max_order: usize,
    final_time: f64,
    observables: &[Observable],
    problem: &Problem,
    spec: &QuadratureSpec,
) -> Result<OracleTerms> {
    all_terms(Direction::Forward, max_order, final_time, observables, problem, spec)
}

/// Backward-parameterized terms, integrated over the end point `z_T = Φ_T(w)`.
pub fn backward_terms(
    max_order: usize,
    final_time: f64,
    observables: &[Observable],
    problem: &Problem,
    spec: &QuadratureSpec,
) -> Result<OracleTerms> {
    all_terms(Direction::Backward, max_order, final_time, observables, problem, spec)
}

/// Single forward term `⟨A⟩_n` for `n ≤ 2`.
pub fn term_quadrature_forward(
    n: usize,
    final_time: f64,
    observable: &Observable,
    problem: &Problem,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(forward_terms(n, final_time, std::slice::from_ref(observable), problem, spec)?.term(n, 0))
}

/// Single backward term `⟨A⟩_n` for `n ≤ 2`.
pub fn term_quadrature_backward(
    n: usize,
    final_time: f64,
    observable: &Observable,
    problem: &Problem,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(backward_terms(n, final_time, std::slice::from_ref(observable), problem, spec)?.term(n, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::GaussianPacket;
    use crate::model::{FieldConfig, PhysicalConstants};
    use crate::stencil::Discretization;
    use crate::trajectory::IntegratorSettings;

    fn problem(fields: FieldConfig) -> Problem {
        Problem::new(
            PhysicalConstants::default(),
            fields,
            Discretization {
                delta_p: 0.2,
                delta_x: 0.2,
            },
            IntegratorSettings::rk4(64),
            InitialWigner::GaussianPacket(
                GaussianPacket::new(PhaseSpacePoint::new(0.4, -0.2, 0.3, 0.1), 0.5, 0.7).unwrap(),
            ),
        )
        .unwrap()
    }

    fn quantum() -> FieldConfig {
        FieldConfig {
            b0: 0.5,
            b1: 0.2,
            ex: 0.1,
            ey: -0.1,
        }
    }

    fn small() -> QuadratureSpec {
        QuadratureSpec {
            phase_nodes: 4,
            time_nodes: 3,
            rule: PhaseRule::Hermite,
        }
    }

    #[test]
    fn constant_terms_are_poisson() {
        let p = problem(quantum());
        let g = p.gamma();
        let t = 1.0;
        let terms = forward_terms(2, t, &[Observable::ConstantOne], &p, &small()).unwrap();
        let e = (-g * t).exp();
        assert!((terms.term(0, 0) - e).abs() < 1e-6);
        assert!((terms.term(1, 0) - g * t * e).abs() < 1e-6);
        assert!((terms.term(2, 0) - (g * t).powi(2) / 2.0 * e).abs() < 1e-6);
    }

    #[test]
    fn classical_zero_order_is_one() {
        let p = problem(FieldConfig {
            b0: 1.0,
            ..Default::default()
        });
        let v = term_quadrature_forward(0, 1.0, &Observable::ConstantOne, &p, &small()).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        assert_eq!(
            term_quadrature_forward(2, 1.0, &Observable::ConstantOne, &p, &small()).unwrap(),
            0.0
        );
    }

    #[test]
    fn order_three_unsupported() {
        let p = problem(quantum());
        let err = term_quadrature_forward(3, 1.0, &Observable::ConstantOne, &p, &small()).unwrap_err();
        assert_eq!(err, WignerError::UnsupportedOrder { order: 3, max: 2 });
    }

    #[test]
    fn forward_and_backward_agree() {
        let p = problem(quantum());
        let obs = [Observable::ConstantOne, Observable::MeanX, Observable::KineticEnergy];
        let spec = QuadratureSpec::default();
        let f = forward_terms(1, 0.8, &obs, &p, &spec).unwrap();
        let b = backward_terms(1, 0.8, &obs, &p, &spec).unwrap();
        for n in 0..=1 {
            for j in 0..obs.len() {
                let (x, y) = (f.term(n, j), b.term(n, j));
                assert!(
                    (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1e-3),
                    "n={n} j={j} {x} {y}"
                );
            }
        }
    }

    #[test]
    fn legendre_box_agrees_with_hermite_at_order_zero() {
        let p = problem(quantum());
        let c = p.f0.center().to_array();
        let sig = [0.5, 0.5, 0.7, 0.7];
        let spec = QuadratureSpec {
            phase_nodes: 20,
            time_nodes: 2,
            rule: PhaseRule::Legendre {
                lower: std::array::from_fn(|d| c[d] - 7.0 * sig[d]),
                upper: std::array::from_fn(|d| c[d] + 7.0 * sig[d]),
            },
        };
        let a = term_quadrature_forward(0, 0.5, &Observable::MeanX, &p, &spec).unwrap();
        let b = term_quadrature_forward(0, 0.5, &Observable::MeanX, &p, &QuadratureSpec::default()).unwrap();
        assert!((a - b).abs() < 1e-5, "{a} {b}");
    }
}
