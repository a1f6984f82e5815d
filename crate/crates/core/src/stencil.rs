//! The 15-term finite-difference scattering kernel and the scattering rate `γ`.
//!
//! The kernel replaces the third-derivative quantum term by
//! `γ Σ_k α_k f(p + i_k ΔP, x + j_k ΔX)`, which equals `γ f` plus the
//! differential operator up to `O(ΔP² + ΔX²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::model::{FieldConfig, PhaseSpacePoint, PhysicalConstants};

/// Momentum and position spacing of the difference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub delta_p: f64,
    pub delta_x: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            delta_p: 0.1,
            delta_x: 0.1,
        }
    }
}

impl Discretization {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_p.is_finite() && self.delta_p > 0.0) {
            return Err(WignerError::config("discretization.delta_p", "must be finite and > 0"));
        }
        if !(self.delta_x.is_finite() && self.delta_x > 0.0) {
            return Err(WignerError::config("discretization.delta_x", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// One kernel term: momentum offset `di`, position offset `dj`, coefficient `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StencilTerm {
    pub di: [i8; 2],
    pub dj: [i8; 2],
    pub alpha: i32,
}

const fn term(di: [i8; 2], dj: [i8; 2], alpha: i32) -> StencilTerm {
    StencilTerm { di, dj, alpha }
}

pub const STENCIL_TERMS: [StencilTerm; 15] = [
    term([0, 1], [1, 0], 4),
    term([0, 0], [1, 0], -8),
    term([0, -1], [1, 0], 4),
    term([0, 1], [-1, 0], -4),
    term([0, 0], [-1, 0], 8),
    term([0, -1], [-1, 0], -4),
    term([1, 1], [0, 1], -1),
    term([1, -1], [0, 1], 1),
    term([-1, 1], [0, 1], 1),
    term([-1, -1], [0, 1], -1),
    term([1, 1], [0, -1], 1),
    term([1, -1], [0, -1], -1),
    term([-1, 1], [0, -1], -1),
    term([-1, -1], [0, -1], 1),
    term([0, 0], [0, 0], 1),
];

pub const IDENTITY_TERM: usize = 14;
pub const ALPHA_ABS_SUM: u32 = 41;

/// A sampled kernel term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub index: usize,
    pub di: [i8; 2],
    pub dj: [i8; 2],
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stencil {
    pub terms: [StencilTerm; 15],
    pub gamma: f64,
    pub alpha_abs_sum: u32,
    /// Running sums of `|alpha|`; term `k` owns `[cum[k-1], cum[k])`.
    pub cumulative_abs: [u32; 15],
    pub cumulative_probabilities: [f64; 15],
    pub disc: Discretization,
    /// `b1 = 0`: the scattering operator vanishes.
    pub classical: bool,
    /// `b1 e < 0`: the table holds `2δ_id - α` so that `gamma` stays positive.
    pub mirrored: bool,
}

/// `B1 ħ² e / (96 m ΔP² ΔX)` with its sign.
pub fn signed_gamma(disc: &Discretization, fields: &FieldConfig, consts: &PhysicalConstants) -> f64 {
    fields.b1 * consts.hbar * consts.hbar * consts.charge
        / (96.0 * consts.mass * disc.delta_p * disc.delta_p * disc.delta_x)
}

/// Coefficient `B1 ħ² e / (12 m)` of the third-derivative operator.
pub fn third_derivative_coefficient(fields: &FieldConfig, consts: &PhysicalConstants) -> f64 {
    fields.b1 * consts.hbar * consts.hbar * consts.charge / (12.0 * consts.mass)
}

pub fn build_stencil(disc: &Discretization, fields: &FieldConfig, consts: &PhysicalConstants) -> Result<Stencil> {
    disc.validate()?;
    fields.validate()?;
    consts.validate()?;
    let raw = signed_gamma(disc, fields, consts);
    if !raw.is_finite() {
        return Err(WignerError::config(
            "discretization.delta_p",
            "scattering rate is not finite",
        ));
    }
    let mirrored = raw < 0.0;
    let mut terms = STENCIL_TERMS;
    if mirrored {
        for (k, t) in terms.iter_mut().enumerate() {
            if k != IDENTITY_TERM {
                t.alpha = -t.alpha;
            }
        }
    }
    let abs_sum: i32 = terms.iter().map(|t| t.alpha.abs()).sum();
    let sum: i32 = terms.iter().map(|t| t.alpha).sum();
    assert_eq!(abs_sum as u32, ALPHA_ABS_SUM);
    assert_eq!(sum, 1);
    let mut cumulative_abs = [0u32; 15];
    let mut acc = 0u32;
    for (k, t) in terms.iter().enumerate() {
        acc += t.alpha.unsigned_abs();
        cumulative_abs[k] = acc;
    }
    let cumulative_probabilities = cumulative_abs.map(|c| c as f64 / ALPHA_ABS_SUM as f64);
    Ok(Stencil {
        terms,
        gamma: raw.abs(),
        alpha_abs_sum: ALPHA_ABS_SUM,
        cumulative_abs,
        cumulative_probabilities,
        disc: *disc,
        classical: raw == 0.0,
        mirrored,
    })
}

impl Stencil {
    pub fn probability(&self, k: usize) -> f64 {
        self.terms[k].alpha.unsigned_abs() as f64 / self.alpha_abs_sum as f64
    }

    /// Phase-space displacement `(i ΔP, j ΔX)` of term `k`.
    pub fn shift(&self, k: usize) -> PhaseSpacePoint {
        let t = &self.terms[k];
        let dp = self.disc.delta_p;
        let dx = self.disc.delta_x;
        PhaseSpacePoint::new(
            t.di[0] as f64 * dp,
            t.di[1] as f64 * dp,
            t.dj[0] as f64 * dx,
            t.dj[1] as f64 * dx,
        )
    }

    /// Picks term `k` with probability `|α_k| / 41` from a uniform `u ∈ [0, 1)`.
    pub fn sample_transition(&self, u: f64) -> Result<Transition> {
        if self.classical {
            return Err(WignerError::InvalidOperation(
                "classical stencil has no scattering transitions".into(),
            ));
        }
        let slot = ((u * self.alpha_abs_sum as f64) as u32).min(self.alpha_abs_sum - 1);
        let index = self.cumulative_abs.partition_point(|c| *c <= slot);
        let t = &self.terms[index];
        Ok(Transition {
            index,
            di: t.di,
            dj: t.dj,
            sign: t.alpha.signum() as i8,
        })
    }

    /// `γ Σ_k α_k f(pt + shift_k)`.
    pub fn apply(&self, f: impl Fn(&PhaseSpacePoint) -> f64, pt: &PhaseSpacePoint) -> f64 {
        if self.classical {
            return 0.0;
        }
        let s: f64 = (0..15)
            .map(|k| self.terms[k].alpha as f64 * f(&(*pt + self.shift(k))))
            .sum();
        self.gamma * s
    }
}

pub fn sample_transition(st: &Stencil, u: f64) -> Result<Transition> {
    st.sample_transition(u)
}

pub fn apply_scattering_operator(f: impl Fn(&PhaseSpacePoint) -> f64, pt: &PhaseSpacePoint, st: &Stencil) -> f64 {
    st.apply(f, pt)
}
