//! Dense-matrix check of the resolvent expansion and the exchange identity
//! `⟨f_i, g⟩ = ⟨f, g_i⟩` for `f = f_i + K f` and the adjoint `g = g_i + Kᵀ g`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::model::{Observable, PhaseSpacePoint};
use crate::problem::Problem;

/// Above this dimension the direct solve is skipped.
pub const MAX_DIRECT_DIM: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmSpec {
    /// Cells per phase-space dimension; spacing is `(ΔP, ΔX)` so kernel
    /// shifts land on neighbouring cells.
    pub cells_per_dim: usize,
    pub time_levels: usize,
    pub max_terms: usize,
}

impl Default for FredholmSpec {
    fn default() -> Self {
        FredholmSpec {
            cells_per_dim: 3,
            time_levels: 6,
            max_terms: 60,
        }
    }
}

impl FredholmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.cells_per_dim) {
            return Err(WignerError::config(
                "oracle.fredholm.cells_per_dim",
                "must be in 1..=20",
            ));
        }
        if self.time_levels == 0 {
            return Err(WignerError::config("oracle.fredholm.time_levels", "must be >= 1"));
        }
        let dim = self.cells_per_dim.pow(4) * (self.time_levels + 1);
        if dim > MAX_DIRECT_DIM {
            return Err(WignerError::config(
                "oracle.fredholm.cells_per_dim",
                format!("matrix dimension {dim} exceeds {MAX_DIRECT_DIM}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub dim: usize,
    /// `⟨f_i, g⟩` with `g` from the direct solve.
    pub lhs: f64,
    /// `⟨f, g_i⟩` with `f` from the direct solve.
    pub rhs: f64,
    pub relative_error: f64,
    /// Per order `n`: `(⟨f_n, g_i⟩, ⟨f_i, g_n⟩)` with `f_n = K f_{n-1}`, `g_n = Kᵀ g_{n-1}`.
    pub orders: Vec<(f64, f64)>,
    pub max_order_relative_error: f64,
    /// Truncated series `Σ_n ⟨f_n, g_i⟩` against the direct solve.
    pub series_vs_direct: f64,
    pub diverged: bool,
}

impl FredholmReport {
    pub fn identity_holds(&self, tol: f64) -> bool {
        self.relative_error <= tol && self.max_order_relative_error <= tol
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(scale);
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Runs both Neumann series and the direct solves for a given kernel.
pub fn check_exchange(
    k: &DMatrix<f64>,
    fi: &DVector<f64>,
    gi: &DVector<f64>,
    max_terms: usize,
) -> Result<FredholmReport> {
    let dim = k.nrows();
    if k.ncols() != dim || fi.len() != dim || gi.len() != dim {
        return Err(WignerError::InvalidOperation(
            "kernel and source dimensions differ".into(),
        ));
    }
    let id = DMatrix::<f64>::identity(dim, dim);
    let f = (&id - k)
        .lu()
        .solve(fi)
        .ok_or_else(|| WignerError::Estimation("I - K is singular".into()))?;
    let g = (&id - k.transpose())
        .lu()
        .solve(gi)
        .ok_or_else(|| WignerError::Estimation("I - K^T is singular".into()))?;
    let lhs = fi.dot(&g);
    let rhs = f.dot(gi);
    let scale = fi.norm() * g.norm().max(gi.norm()) * 1e-14;

    let mut orders = Vec::new();
    let mut fn_ = fi.clone();
    let mut gn = gi.clone();
    let mut growth = 0usize;
    let mut last_norm = fn_.norm();
    let mut diverged = false;
    let mut series = 0.0;
    let mut max_err: f64 = 0.0;
    for n in 0..=max_terms {
        if n > 0 {
            fn_ = k * &fn_;
            gn = k.transpose() * &gn;
            let norm = fn_.norm();
            growth = if norm > last_norm { growth + 1 } else { 0 };
            last_norm = norm;
            if growth >= 5 {
                diverged = true;
                break;
            }
        }
        let a = fn_.dot(gi);
        let b = fi.dot(&gn);
        max_err = max_err.max(rel(a, b, fn_.norm() * gi.norm() * 1e-14));
        series += a;
        orders.push((a, b));
        if fn_.norm() == 0.0 && gn.norm() == 0.0 {
            break;
        }
    }
    Ok(FredholmReport {
        dim,
        lhs,
        rhs,
        relative_error: rel(lhs, rhs, scale),
        orders,
        max_order_relative_error: max_err,
        series_vs_direct: if diverged { f64::NAN } else { rel(series, rhs, scale) },
        diverged,
    })
}

/// Random matrix rescaled to spectral norm `target` (so its spectral radius is
/// below `target` as well).
pub fn random_contraction(dim: usize, target: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let norm = m.clone().svd(false, false).singular_values.max();
    m * (target / norm)
}

pub fn random_vector(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DVector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Discretized backward kernel on a coarse phase-space × time grid.
///
/// Unknowns are `f(c, ℓ)` at cell centres `c` and times `t_ℓ = ℓ T / L`. Row
/// `(c, ℓ)` couples to `(c', ℓ')` for `ℓ' < ℓ` with weight
/// `Δt γ e^{-γ (t_ℓ - t_ℓ')} α_k`, where `c'` is the cell nearest to the
/// back-propagated centre plus the shift of term `k`. Targets off the grid
/// are dropped. The kernel is strictly lower triangular in time.
pub fn discretize_kernel(
    problem: &Problem,
    observable: &Observable,
    final_time: f64,
    spec: &FredholmSpec,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    spec.validate()?;
    let n = spec.cells_per_dim;
    let levels = spec.time_levels;
    let ncell = n.pow(4);
    let dim = ncell * (levels + 1);
    let dt = final_time / levels as f64;
    let dp = problem.stencil.disc.delta_p;
    let dx = problem.stencil.disc.delta_x;
    let h = [dp, dp, dx, dx];
    let c0 = problem.f0.center().to_array();
    let half = (n as f64 - 1.0) / 2.0;
    let center = |cell: usize| -> PhaseSpacePoint {
        let mut rem = cell;
        let mut a = [0.0; 4];
        for d in (0..4).rev() {
            a[d] = c0[d] + ((rem % n) as f64 - half) * h[d];
            rem /= n;
        }
        PhaseSpacePoint::from_array(a)
    };
    let nearest = |pt: &PhaseSpacePoint| -> Option<usize> {
        let a = pt.to_array();
        let mut flat = 0usize;
        for d in 0..4 {
            let i = ((a[d] - c0[d]) / h[d] + half).round();
            if !(i >= 0.0 && i < n as f64) {
                return None;
            }
            flat = flat * n + i as usize;
        }
        Some(flat)
    };
    let gamma = problem.gamma();
    let st = &problem.stencil;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut fi = DVector::<f64>::zeros(dim);
    let mut gi = DVector::<f64>::zeros(dim);
    for c in 0..ncell {
        let z = center(c);
        for l in 0..=levels {
            let t = l as f64 * dt;
            let row = l * ncell + c;
            let back = problem.propagator.propagate(&z, -t)?;
            fi[row] = (-gamma * t).exp() * problem.f0.eval(&back);
            if l == levels {
                gi[row] = observable.eval(&z, final_time, &problem.consts);
            }
            if st.classical {
                continue;
            }
            for lp in 0..l {
                let tau = (l - lp) as f64 * dt;
                let base = problem.propagator.propagate(&z, -tau)?;
                let w = dt * gamma * (-gamma * tau).exp();
                for kk in 0..15 {
                    if let Some(target) = nearest(&(base + st.shift(kk))) {
                        k[(row, lp * ncell + target)] += w * st.terms[kk].alpha as f64;
                    }
                }
            }
        }
    }
    Ok((k, fi, gi))
}

/// Discretizes the kernel for `problem` and checks the exchange identity.
pub fn fredholm_matrix_check(
    problem: &Problem,
    observable: &Observable,
    final_time: f64,
    spec: &FredholmSpec,
) -> Result<FredholmReport> {
    if !(final_time.is_finite() && final_time > 0.0) {
        return Err(WignerError::config("oracle.final_time", "must be finite and > 0"));
    }
    let (k, fi, gi) = discretize_kernel(problem, observable, final_time, spec)?;
    check_exchange(&k, &fi, &gi, spec.max_terms)
}
