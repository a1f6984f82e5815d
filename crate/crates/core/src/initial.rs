//! Initial Wigner functions and the densities used to sample start points from them.
//!
//! Every initial state comes with an [`Envelope`]: a normalized, directly
//! sampleable density that dominates `|f_w0|` up to a constant. For a single
//! Gaussian packet the envelope is `|f_w0|` itself.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, WignerError};
use crate::grid::{GridSpec, WignerGrid};
use crate::model::PhaseSpacePoint;

/// Product of normal densities with spread `sigma_p` in momentum and
/// `sigma_x` in position, normalized to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub center: PhaseSpacePoint,
    pub sigma_p: f64,
    pub sigma_x: f64,
}

impl GaussianPacket {
    pub fn new(center: PhaseSpacePoint, sigma_p: f64, sigma_x: f64) -> Result<Self> {
        if !(sigma_p.is_finite() && sigma_p > 0.0) {
            return Err(WignerError::config("initial.sigma_p", "must be finite and > 0"));
        }
        if !(sigma_x.is_finite() && sigma_x > 0.0) {
            return Err(WignerError::config("initial.sigma_x", "must be finite and > 0"));
        }
        if !center.is_finite() {
            return Err(WignerError::config("initial.center", "must be finite"));
        }
        Ok(GaussianPacket {
            center,
            sigma_p,
            sigma_x,
        })
    }

    pub fn sigmas(&self) -> [f64; 4] {
        [self.sigma_p, self.sigma_p, self.sigma_x, self.sigma_x]
    }

    pub fn peak(&self) -> f64 {
        (2.0 * PI * self.sigma_p * self.sigma_x).powi(-2)
    }

    pub fn eval(&self, pt: &PhaseSpacePoint) -> f64 {
        let s = self.sigmas();
        let c = self.center.to_array();
        let a = pt.to_array();
        let q: f64 = (0..4).map(|d| ((a[d] - c[d]) / s[d]).powi(2)).sum();
        self.peak() * (-0.5 * q).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseSpacePoint {
        let s = self.sigmas();
        let c = self.center.to_array();
        PhaseSpacePoint::from_array(std::array::from_fn(|d| {
            let z: f64 = rng.sample(StandardNormal);
            c[d] + s[d] * z
        }))
    }
}

/// Two Gaussian packets at `center ± separation / 2` plus an oscillating
/// interference term at the midpoint:
///
/// ```text
/// f(z) = [G(z; c1) + G(z; c2) + 2 G(z; c) cos θ(z)] / Z
/// θ(z) = (Δx·(p - p_c) - Δp·(x - x_c)) / ħ + phase
/// Z    = 2 + 2 cos(phase) exp(-½ Σ k_d² σ_d²)
/// ```
///
/// It is a surrogate, not the transform of a particular wavefunction; its
/// purpose is to produce negative regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpositionSurrogate {
    pub center: PhaseSpacePoint,
    pub separation: PhaseSpacePoint,
    pub sigma_p: f64,
    pub sigma_x: f64,
    pub phase: f64,
    pub hbar: f64,
    norm: f64,
}

impl SuperpositionSurrogate {
    pub fn new(
        center: PhaseSpacePoint,
        separation: PhaseSpacePoint,
        sigma_p: f64,
        sigma_x: f64,
        phase: f64,
        hbar: f64,
    ) -> Result<Self> {
        GaussianPacket::new(center, sigma_p, sigma_x)?;
        if !separation.is_finite() {
            return Err(WignerError::config("initial.separation", "must be finite"));
        }
        if !phase.is_finite() {
            return Err(WignerError::config("initial.phase", "must be finite"));
        }
        let mut s = SuperpositionSurrogate {
            center,
            separation,
            sigma_p,
            sigma_x,
            phase,
            hbar,
            norm: 1.0,
        };
        let k = s.wavevector();
        let sig = [sigma_p, sigma_p, sigma_x, sigma_x];
        let damping = (-0.5 * (0..4).map(|d| (k[d] * sig[d]).powi(2)).sum::<f64>()).exp();
        s.norm = 2.0 + 2.0 * phase.cos() * damping;
        if s.norm.abs() < 1e-12 {
            return Err(WignerError::config(
                "initial.phase",
                "interference term cancels the norm; increase the separation or change the phase",
            ));
        }
        Ok(s)
    }

    /// Wavevector of the cross term along `(px, py, x, y)`.
    fn wavevector(&self) -> [f64; 4] {
        let d = self.separation;
        [d.x / self.hbar, d.y / self.hbar, -d.px / self.hbar, -d.py / self.hbar]
    }

    fn packets(&self) -> [GaussianPacket; 3] {
        let half = self.separation * 0.5;
        let mk = |c| GaussianPacket {
            center: c,
            sigma_p: self.sigma_p,
            sigma_x: self.sigma_x,
        };
        [mk(self.center + half), mk(self.center - half), mk(self.center)]
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, pt: &PhaseSpacePoint) -> f64 {
        let [g1, g2, gc] = self.packets();
        let k = self.wavevector();
        let rel = (*pt - self.center).to_array();
        let theta: f64 = (0..4).map(|d| k[d] * rel[d]).sum::<f64>() + self.phase;
        (g1.eval(pt) + g2.eval(pt) + 2.0 * gc.eval(pt) * theta.cos()) / self.norm
    }
}

/// Multilinear interpolation of a cell-centred grid; zero outside the grid box
/// and constant extrapolation between the outermost centres and the box faces.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedWigner {
    pub grid: WignerGrid,
}

impl TabulatedWigner {
    pub fn new(grid: WignerGrid) -> Result<Self> {
        if grid.density.iter().all(|v| *v == 0.0) {
            return Err(WignerError::config("initial.grid", "tabulated grid is empty"));
        }
        if grid.density.iter().any(|v| !v.is_finite()) {
            return Err(WignerError::config(
                "initial.grid",
                "tabulated grid has non-finite values",
            ));
        }
        Ok(TabulatedWigner { grid })
    }

    fn value(&self, idx: [usize; 4]) -> f64 {
        self.grid.density[self.grid.spec.flat(idx)] * self.grid.scale
    }

    pub fn eval(&self, pt: &PhaseSpacePoint) -> f64 {
        let spec = &self.grid.spec;
        let a = pt.to_array();
        let w = spec.widths();
        let mut base = [0usize; 4];
        let mut frac = [0.0f64; 4];
        for d in 0..4 {
            if !(a[d] >= spec.lower[d] && a[d] <= spec.upper[d]) {
                return 0.0;
            }
            let n = spec.cells[d];
            let u = ((a[d] - spec.lower[d]) / w[d] - 0.5).clamp(0.0, (n - 1) as f64);
            if n == 1 {
                base[d] = 0;
                frac[d] = 0.0;
            } else {
                let i = (u.floor() as usize).min(n - 2);
                base[d] = i;
                frac[d] = u - i as f64;
            }
        }
        let mut acc = 0.0;
        for corner in 0..16u32 {
            let mut weight = 1.0;
            let mut idx = base;
            for d in 0..4 {
                if corner >> d & 1 == 1 {
                    if spec.cells[d] == 1 {
                        weight = 0.0;
                        break;
                    }
                    idx[d] += 1;
                    weight *= frac[d];
                } else {
                    weight *= 1.0 - frac[d];
                }
            }
            if weight != 0.0 {
                acc += weight * self.value(idx);
            }
        }
        acc
    }
}

/// A normalized initial Wigner function `f_w0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialWigner {
    GaussianPacket(GaussianPacket),
    TwoPacketSuperpositionSurrogate(SuperpositionSurrogate),
    TabulatedGrid(TabulatedWigner),
}

impl InitialWigner {
    pub fn eval(&self, pt: &PhaseSpacePoint) -> f64 {
        match self {
            InitialWigner::GaussianPacket(g) => g.eval(pt),
            InitialWigner::TwoPacketSuperpositionSurrogate(s) => s.eval(pt),
            InitialWigner::TabulatedGrid(t) => t.eval(pt),
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self {
            InitialWigner::GaussianPacket(g) => Envelope::Gaussian(*g),
            InitialWigner::TwoPacketSuperpositionSurrogate(s) => {
                let [g1, g2, gc] = s.packets();
                Envelope::Mixture(vec![(0.25, g1), (0.25, g2), (0.5, gc)])
            }
            InitialWigner::TabulatedGrid(t) => Envelope::piecewise(t),
        }
    }

    /// Centre of the packet(s), or of the grid box.
    pub fn center(&self) -> PhaseSpacePoint {
        match self {
            InitialWigner::GaussianPacket(g) => g.center,
            InitialWigner::TwoPacketSuperpositionSurrogate(s) => s.center,
            InitialWigner::TabulatedGrid(t) => {
                let spec = &t.grid.spec;
                PhaseSpacePoint::from_array(std::array::from_fn(|d| 0.5 * (spec.lower[d] + spec.upper[d])))
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InitialWigner::GaussianPacket(_) => "gaussian_packet",
            InitialWigner::TwoPacketSuperpositionSurrogate(_) => "two_packet_superposition_surrogate",
            InitialWigner::TabulatedGrid(_) => "tabulated_grid",
        }
    }
}

pub fn eval_initial_wigner(f0: &InitialWigner, pt: &PhaseSpacePoint) -> f64 {
    f0.eval(pt)
}

/// Normalized sampling density dominating `|f_w0|`.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Gaussian(GaussianPacket),
    Mixture(Vec<(f64, GaussianPacket)>),
    Piecewise(PiecewiseEnvelope),
}

impl Envelope {
    fn piecewise(t: &TabulatedWigner) -> Envelope {
        Envelope::Piecewise(PiecewiseEnvelope::new(t))
    }

    pub fn density(&self, pt: &PhaseSpacePoint) -> f64 {
        match self {
            Envelope::Gaussian(g) => g.eval(pt),
            Envelope::Mixture(parts) => parts.iter().map(|(w, g)| w * g.eval(pt)).sum(),
            Envelope::Piecewise(p) => p.density(pt),
        }
    }

    /// Upper bound of [`Envelope::density`].
    pub fn peak(&self) -> f64 {
        match self {
            Envelope::Gaussian(g) => g.peak(),
            Envelope::Mixture(parts) => parts.iter().map(|(w, g)| w * g.peak()).sum(),
            Envelope::Piecewise(p) => p.peak,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseSpacePoint {
        match self {
            Envelope::Gaussian(g) => g.sample(rng),
            Envelope::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, g) in parts {
                    acc += w;
                    if u < acc {
                        return g.sample(rng);
                    }
                }
                parts[parts.len() - 1].1.sample(rng)
            }
            Envelope::Piecewise(p) => p.sample(rng),
        }
    }

    /// Gaussian components with their mixture weights, when the envelope is a
    /// Gaussian mixture (used by the Gauss–Hermite oracle rule).
    pub fn gaussian_components(&self) -> Option<Vec<(f64, GaussianPacket)>> {
        match self {
            Envelope::Gaussian(g) => Some(vec![(1.0, *g)]),
            Envelope::Mixture(parts) => Some(parts.clone()),
            Envelope::Piecewise(_) => None,
        }
    }
}

/// Piecewise-constant bound of a multilinear interpolant. Along each axis the
/// box is split at the cell centres; on each piece the interpolant is bounded
/// by the largest absolute corner value.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseEnvelope {
    breaks: [Vec<f64>; 4],
    /// Cumulative piece probabilities, in flat piece order.
    cumulative: Vec<f64>,
    values: Vec<f64>,
    norm: f64,
    peak: f64,
}

impl PiecewiseEnvelope {
    fn new(t: &TabulatedWigner) -> Self {
        let spec: &GridSpec = &t.grid.spec;
        let w = spec.widths();
        let breaks: [Vec<f64>; 4] = std::array::from_fn(|d| {
            let mut b = vec![spec.lower[d]];
            for i in 0..spec.cells[d] {
                b.push(spec.lower[d] + (i as f64 + 0.5) * w[d]);
            }
            b.push(spec.upper[d]);
            b
        });
        let pieces: [usize; 4] = std::array::from_fn(|d| spec.cells[d] + 1);
        // Grid indices touched by piece `m` along one axis.
        let touched = |d: usize, m: usize| -> (usize, usize) {
            let n = spec.cells[d];
            if m == 0 {
                (0, 0)
            } else if m == n {
                (n - 1, n - 1)
            } else {
                (m - 1, m)
            }
        };
        let total: usize = pieces.iter().product();
        let mut values = vec![0.0; total];
        let mut masses = vec![0.0; total];
        let mut flat = 0usize;
        for a in 0..pieces[0] {
            for b in 0..pieces[1] {
                for c in 0..pieces[2] {
                    for e in 0..pieces[3] {
                        let m = [a, b, c, e];
                        let ranges: [(usize, usize); 4] = std::array::from_fn(|d| touched(d, m[d]));
                        let mut vmax = 0.0f64;
                        for i0 in ranges[0].0..=ranges[0].1 {
                            for i1 in ranges[1].0..=ranges[1].1 {
                                for i2 in ranges[2].0..=ranges[2].1 {
                                    for i3 in ranges[3].0..=ranges[3].1 {
                                        vmax = vmax.max(t.value([i0, i1, i2, i3]).abs());
                                    }
                                }
                            }
                        }
                        let vol: f64 = (0..4).map(|d| breaks[d][m[d] + 1] - breaks[d][m[d]]).product();
                        values[flat] = vmax;
                        masses[flat] = vmax * vol;
                        flat += 1;
                    }
                }
            }
        }
        let norm: f64 = masses.iter().sum();
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m / norm;
                acc
            })
            .collect();
        let peak = values.iter().cloned().fold(0.0, f64::max) / norm;
        PiecewiseEnvelope {
            breaks,
            cumulative,
            values,
            norm,
            peak,
        }
    }

    fn piece_of(&self, pt: &PhaseSpacePoint) -> Option<usize> {
        let a = pt.to_array();
        let mut flat = 0usize;
        for (b, &v) in self.breaks.iter().zip(&a) {
            if !(v >= b[0] && v <= b[b.len() - 1]) {
                return None;
            }
            let m = b.partition_point(|x| *x <= v).clamp(1, b.len() - 1) - 1;
            flat = flat * (b.len() - 1) + m;
        }
        Some(flat)
    }

    fn density(&self, pt: &PhaseSpacePoint) -> f64 {
        self.piece_of(pt).map(|i| self.values[i] / self.norm).unwrap_or(0.0)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseSpacePoint {
        let u: f64 = rng.random();
        let mut flat = self
            .cumulative
            .partition_point(|c| *c <= u)
            .min(self.cumulative.len() - 1);
        // Skip zero-mass pieces that share a cumulative value with their successor.
        while self.values[flat] == 0.0 && flat + 1 < self.values.len() {
            flat += 1;
        }
        let mut m = [0usize; 4];
        for d in (0..4).rev() {
            let n = self.breaks[d].len() - 1;
            m[d] = flat % n;
            flat /= n;
        }
        PhaseSpacePoint::from_array(std::array::from_fn(|d| {
            let lo = self.breaks[d][m[d]];
            let hi = self.breaks[d][m[d] + 1];
            lo + (hi - lo) * rng.random::<f64>()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn packet() -> GaussianPacket {
        GaussianPacket::new(PhaseSpacePoint::new(0.3, -0.2, 1.0, 0.5), 0.7, 1.1).unwrap()
    }

    fn box_integral(f: impl Fn(&PhaseSpacePoint) -> f64, lo: [f64; 4], hi: [f64; 4], n: usize) -> f64 {
        let rule = GaussLegendre::new(n).unwrap();
        let nodes: [Vec<(f64, f64)>; 4] = std::array::from_fn(|d| rule.on_interval(lo[d], hi[d]));
        let mut acc = 0.0;
        for (a, wa) in &nodes[0] {
            for (b, wb) in &nodes[1] {
                for (c, wc) in &nodes[2] {
                    for (e, we) in &nodes[3] {
                        acc += wa * wb * wc * we * f(&PhaseSpacePoint::new(*a, *b, *c, *e));
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn gaussian_peak_value() {
        let g = packet();
        let expected = 1.0 / (2.0 * PI * 0.7 * 1.1).powi(2);
        assert!((g.eval(&g.center) - expected).abs() < 1e-15);
    }

    #[test]
    fn gaussian_normalized_by_quadrature() {
        let g = packet();
        let c = g.center.to_array();
        let s = g.sigmas();
        let lo = std::array::from_fn(|d| c[d] - 8.0 * s[d]);
        let hi = std::array::from_fn(|d| c[d] + 8.0 * s[d]);
        let total = box_integral(|p| g.eval(p), lo, hi, 40);
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn gaussian_decays_far_away() {
        let g = packet();
        assert!(g.eval(&PhaseSpacePoint::new(50.0, -40.0, 30.0, 80.0)) < 1e-300);
    }

    fn surrogate() -> SuperpositionSurrogate {
        SuperpositionSurrogate::new(
            PhaseSpacePoint::ORIGIN,
            PhaseSpacePoint::new(0.0, 0.0, 3.0, 0.0),
            0.5,
            1.0,
            PI,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn surrogate_is_negative_at_midpoint_with_phase_pi() {
        let s = surrogate();
        assert!(s.eval(&PhaseSpacePoint::ORIGIN) < 0.0);
    }

    #[test]
    fn surrogate_integrates_to_one() {
        let s = surrogate();
        let total = box_integral(|p| s.eval(p), [-5.0, -5.0, -10.0, -9.0], [5.0, 5.0, 10.0, 9.0], 48);
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
    }

    #[test]
    fn grid_scan_finds_negative_region() {
        let s = InitialWigner::TwoPacketSuperpositionSurrogate(surrogate());
        let mut found = false;
        for i in 0..21 {
            for j in 0..21 {
                let pt = PhaseSpacePoint::new(-2.0 + 0.2 * i as f64, 0.0, -3.0 + 0.3 * j as f64, 0.0);
                found |= s.eval(&pt) < 0.0;
            }
        }
        assert!(found);
        let g = InitialWigner::GaussianPacket(packet());
        for i in 0..21 {
            let pt = PhaseSpacePoint::new(-5.0 + 0.5 * i as f64, 1.0, -2.0, 0.3 * i as f64);
            assert!(g.eval(&pt) >= 0.0);
        }
    }

    #[test]
    fn surrogate_envelope_dominates() {
        let s = surrogate();
        let f0 = InitialWigner::TwoPacketSuperpositionSurrogate(s);
        let env = f0.envelope();
        let bound = 4.0 / s.normalization().abs();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let pt = env.sample(&mut rng);
            assert!(f0.eval(&pt).abs() <= bound * env.density(&pt) * (1.0 + 1e-12));
        }
    }

    fn tabulated() -> TabulatedWigner {
        let spec = GridSpec::new([-1.0; 4], [1.0; 4], [3, 2, 2, 3]).unwrap();
        let mut grid = WignerGrid::zeros(spec, 0.0).unwrap();
        for (i, v) in grid.density.iter_mut().enumerate() {
            *v = ((i * 7) % 5) as f64 - 1.5;
        }
        TabulatedWigner::new(grid).unwrap()
    }

    #[test]
    fn tabulated_interpolates_centres_and_vanishes_outside() {
        let t = tabulated();
        let spec = t.grid.spec.clone();
        for i in 0..spec.len() {
            let idx = spec.unflat(i);
            let c = spec.center(idx);
            assert!((t.eval(&c) - t.grid.density[i]).abs() < 1e-12);
        }
        assert_eq!(t.eval(&PhaseSpacePoint::new(1.5, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn tabulated_envelope_dominates_and_normalizes() {
        let t = tabulated();
        let f0 = InitialWigner::TabulatedGrid(t);
        let env = f0.envelope();
        let Envelope::Piecewise(p) = &env else { unreachable!() };
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let pt = env.sample(&mut rng);
            assert!(env.density(&pt) > 0.0);
            assert!(f0.eval(&pt).abs() <= p.norm * env.density(&pt) * (1.0 + 1e-12));
        }
        let total = box_integral(|q| env.density(q), [-1.0; 4], [1.0; 4], 30);
        // Piecewise constant: quadrature is only approximate at the breaks.
        assert!((total - 1.0).abs() < 2e-2, "{total}");
    }

    #[test]
    fn empty_tabulated_grid_is_config_error() {
        let spec = GridSpec::new([-1.0; 4], [1.0; 4], [2; 4]).unwrap();
        let grid = WignerGrid::zeros(spec, 0.0).unwrap();
        assert!(matches!(TabulatedWigner::new(grid), Err(WignerError::Config { .. })));
    }
}
