//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use gauge_wigner::backward::{estimate_wigner_point, run_backward, BackwardPlan, SamplingDensity};
use gauge_wigner::ensemble::{run_slices, SliceSchedule};
use gauge_wigner::forward::{run_forward_ensemble, run_forward_trajectory, ForwardRequest};
use gauge_wigner::grid::GridSpec;
use gauge_wigner::initial::{GaussianPacket, InitialWigner};
use gauge_wigner::model::{FieldConfig, Observable, PhaseSpacePoint, PhysicalConstants};
use gauge_wigner::oracle::fredholm::{fredholm_matrix_check, FredholmSpec};
use gauge_wigner::oracle::{backward_terms, forward_terms, PhaseRule, QuadratureSpec};
use gauge_wigner::problem::Problem;
use gauge_wigner::rng::{domain_stream, StreamDomain};
use gauge_wigner::stats::with_workers;
use gauge_wigner::stencil::{build_stencil, third_derivative_coefficient, Discretization, STENCIL_TERMS};
use gauge_wigner::trajectory::{closed_form_propagate, IntegratorSettings, Propagator};
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unit() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn packet() -> InitialWigner {
    InitialWigner::GaussianPacket(GaussianPacket::new(PhaseSpacePoint::new(0.4, -0.2, 0.3, 0.1), 0.5, 0.7).unwrap())
}

fn problem(fields: FieldConfig, d: f64, steps: u32) -> Problem {
    Problem::new(
        unit(),
        fields,
        Discretization { delta_p: d, delta_x: d },
        IntegratorSettings::rk4(steps),
        packet(),
    )
    .unwrap()
}

/// Fields with `γ = target` at `ΔP = ΔX = 0.2` and unit constants.
fn fields_with_gamma(target: f64) -> FieldConfig {
    FieldConfig {
        b0: 0.5,
        b1: target * 96.0 * 0.2 * 0.2 * 0.2,
        ex: 0.1,
        ey: -0.1,
    }
}

// 1 -------------------------------------------------------------------------

/// Monomial `c · px^e0 py^e1 x^e2 y^e3`.
#[derive(Clone, Copy)]
struct Mono {
    c: f64,
    e: [i32; 4],
}

impl Mono {
    fn d(self, k: usize) -> Mono {
        if self.e[k] == 0 {
            return Mono { c: 0.0, e: self.e };
        }
        let mut e = self.e;
        e[k] -= 1;
        Mono {
            c: self.c * self.e[k] as f64,
            e,
        }
    }

    fn eval(self, z: &PhaseSpacePoint) -> f64 {
        let a = z.to_array();
        self.c * (0..4).map(|k| a[k].powi(self.e[k])).product::<f64>()
    }
}

fn criterion_1() -> Check {
    let abs: i32 = STENCIL_TERMS.iter().map(|t| t.alpha.abs()).sum();
    let sum: i32 = STENCIL_TERMS.iter().map(|t| t.alpha).sum();
    ensure(abs == 41 && sum == 1, || format!("Σ|α| = {abs}, Σα = {sum}"))?;
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    // (px, py, x, y) exponents: py² x and px py y.
    for e in [[0, 2, 1, 0], [1, 1, 0, 1]] {
        for (b1, dp, dx) in [(1.0, 0.1, 0.1), (0.3, 0.25, 0.05), (-0.8, 0.2, 0.3)] {
            let fields = FieldConfig {
                b0: 0.2,
                b1,
                ..Default::default()
            };
            let st = build_stencil(
                &Discretization {
                    delta_p: dp,
                    delta_x: dx,
                },
                &fields,
                &unit(),
            )
            .unwrap();
            let c = third_derivative_coefficient(&fields, &unit());
            let m = Mono { c: 1.0, e };
            // (∂py² ∂x − ∂px ∂py ∂y) applied term by term.
            let a = m.d(1).d(1).d(2);
            let b = m.d(0).d(1).d(3);
            for _ in 0..20 {
                let z = PhaseSpacePoint::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                );
                let exact = st.gamma * m.eval(&z) + c * (a.eval(&z) - b.eval(&z));
                let got = st.apply(|q| m.eval(q), &z);
                let rel = (got - exact).abs() / exact.abs();
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-12, || format!("operator mismatch, max rel {worst:.2e}"))?;
    Ok(format!("Σ|α| = 41, Σα = 1, max rel err {worst:.1e}"))
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Check {
    let consts = PhysicalConstants {
        hbar: 1.0,
        mass: 2.0,
        charge: -1.0,
    };
    let fields = FieldConfig {
        b0: 0.8,
        ..Default::default()
    };
    let (c, sp, sx) = (PhaseSpacePoint::new(0.6, -0.3, 0.2, -0.4), 0.4, 0.6);
    let f0 = InitialWigner::GaussianPacket(GaussianPacket::new(c, sp, sx).unwrap());
    let p = Problem::new(
        consts,
        fields,
        Discretization::default(),
        IntegratorSettings::rk4(256),
        f0,
    )
    .unwrap();
    let t = 1.3;
    let obs = [
        Observable::MeanX,
        Observable::MeanY,
        Observable::MeanPx,
        Observable::MeanPy,
        Observable::KineticEnergy,
    ];
    let mut req = ForwardRequest::new(100_000, t, Observable::ConstantOne);
    req.extra_observables = obs.to_vec();
    let est = run_forward_ensemble(&p, &req, 2024)
        .map_err(|e| e.to_string())?
        .estimate;

    // Cyclotron motion of the packet centre, ω = e B0 / m.
    let m = consts.mass;
    let w = consts.charge * fields.b0 / m;
    let (s, co) = ((w * t).sin(), (w * t).cos());
    let px = c.px * co + c.py * s;
    let py = -c.px * s + c.py * co;
    let x = c.x + (c.px * s + c.py * (1.0 - co)) / (m * w);
    let y = c.y + (c.px * (co - 1.0) + c.py * s) / (m * w);
    let ke = (c.px * c.px + c.py * c.py + 2.0 * sp * sp) / (2.0 * m);
    let exact = [x, y, px, py, ke];
    let mut worst: f64 = 0.0;
    for (e, want) in est.extra.iter().zip(exact) {
        let z = (e.estimate - want).abs() / e.std_err;
        worst = worst.max(z);
        ensure(z <= 3.0, || {
            format!("{}: {} ± {} vs {want}", e.name, e.estimate, e.std_err)
        })?;
    }

    // f_w(z, T) = f_w0(Φ_{-T} z) pointwise, against the matrix-exponential flow.
    let fields = FieldConfig {
        b0: 0.7,
        b1: 0.0,
        ex: 0.3,
        ey: -0.2,
    };
    let p = Problem::new(
        consts,
        fields,
        Discretization::default(),
        IntegratorSettings::rk4(256),
        p.f0.clone(),
    )
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut max_rel: f64 = 0.0;
    for i in 0..20 {
        let z = PhaseSpacePoint::new(
            c.px + rng.random_range(-1.0..1.0),
            c.py + rng.random_range(-1.0..1.0),
            c.x + rng.random_range(-1.5..1.5),
            c.y + rng.random_range(-1.5..1.5),
        );
        let got = estimate_wigner_point(z, t, 0, 1, &p, i).map_err(|e| e.to_string())?;
        let back = closed_form_propagate(&z, -t, &fields, &consts).map_err(|e| e.to_string())?;
        let want = p.f0.eval(&back);
        let rel = (got.total - want).abs() / want.abs();
        max_rel = max_rel.max(rel);
        ensure(got.total_std_err == 0.0, || {
            "classical point estimate has spread".into()
        })?;
    }
    ensure(max_rel <= 1e-8, || format!("pointwise rel err {max_rel:.2e}"))?;
    Ok(format!(
        "max |z| = {worst:.2} over 5 observables; pointwise rel err {max_rel:.1e}"
    ))
}

// 3 -------------------------------------------------------------------------

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn criterion_3() -> Check {
    let gamma = 1.5;
    let p = problem(fields_with_gamma(gamma), 0.2, 64);
    ensure((p.gamma() - gamma).abs() < 1e-12, || format!("γ = {}", p.gamma()))?;
    let m = 100_000u64;

    // First flight of each trajectory over a window of 40 mean flights:
    // censoring probability e^{-40}, so these are i.i.d. Exp(γ).
    let window = 40.0 / gamma;
    let mut flights = Vec::with_capacity(m as usize);
    for i in 0..m {
        let mut rng = domain_stream(77, StreamDomain::Auxiliary, 0, i);
        let mut fl = Vec::new();
        run_forward_trajectory(&p, PhaseSpacePoint::ORIGIN, 1.0, window, 0, &mut rng, Some(&mut fl))
            .map_err(|e| e.to_string())?;
        ensure(fl.len() == 1, || {
            format!("trajectory {i} recorded {} flights", fl.len())
        })?;
        flights.push(fl[0]);
    }
    let d = ks_statistic(flights, |x| 1.0 - (-gamma * x).exp());
    let p_ks = ks_p_value(d, m as usize);
    ensure(p_ks > 1e-3, || format!("KS D = {d:.4}, p = {p_ks:.2e}"))?;

    let t = 1.0;
    let est = run_forward_ensemble(&p, &ForwardRequest::new(m, t, Observable::ConstantOne), 78)
        .map_err(|e| e.to_string())?
        .estimate;
    let mu = gamma * t;
    let pois = |n: usize| (-mu).exp() * mu.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
    // Bins 0..k-1 plus a tail bin, each with expected count ≥ 5.
    let mut k = 0;
    while m as f64 * pois(k) >= 5.0 && m as f64 * (1.0 - (0..=k).map(pois).sum::<f64>()) >= 5.0 {
        k += 1;
    }
    let mut chi2 = 0.0;
    for n in 0..k {
        let e = m as f64 * pois(n);
        chi2 += (est.histogram[n] as f64 - e).powi(2) / e;
    }
    let tail_obs: u64 = est.histogram[k..].iter().sum::<u64>() + est.capped;
    let tail_exp = m as f64 * (1.0 - (0..k).map(pois).sum::<f64>());
    chi2 += (tail_obs as f64 - tail_exp).powi(2) / tail_exp;
    let p_chi2 = 1.0 - ChiSquared::new(k as f64).unwrap().cdf(chi2);
    ensure(p_chi2 > 1e-3, || format!("χ² = {chi2:.2} on {k} dof, p = {p_chi2:.2e}"))?;

    let p0 = est.histogram[0] as f64 / m as f64;
    let want = (-mu).exp();
    let sigma = (want * (1.0 - want) / m as f64).sqrt();
    let z0 = (p0 - want).abs() / sigma;
    ensure(z0 <= 4.0, || format!("P(n=0) = {p0} vs {want} ({z0:.2}σ)"))?;
    Ok(format!(
        "KS p = {p_ks:.3}, χ² p = {p_chi2:.3} ({k} dof), P(n=0) off by {z0:.2}σ"
    ))
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Check {
    let obs = [Observable::ConstantOne, Observable::MeanX, Observable::KineticEnergy];
    let spec = QuadratureSpec {
        phase_nodes: 6,
        time_nodes: 4,
        rule: PhaseRule::Hermite,
    };
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (gamma_t, t) in [(0.1, 0.8), (0.5, 0.8)] {
        let p = problem(fields_with_gamma(gamma_t / t), 0.2, 64);
        let oracle = forward_terms(2, t, &obs, &p, &spec).map_err(|e| e.to_string())?;
        for seed in 1..=3u64 {
            for (j, a) in obs.iter().enumerate() {
                let want = oracle.sum(j);
                let fw = run_forward_ensemble(&p, &ForwardRequest::new(100_000, t, *a), seed)
                    .map_err(|e| e.to_string())?
                    .estimate;
                let (f, fse) = fw.truncated(2);
                let plan = BackwardPlan::uniform(2, 20_000, t, SamplingDensity::AbsF0);
                let bw = run_backward(&plan, &p, a, seed).map_err(|e| e.to_string())?;
                for (label, v, se) in [("forward", f, fse), ("backward", bw.total, bw.total_std_err)] {
                    let z = (v - want).abs() / se;
                    worst = worst.max(z);
                    compared += 1;
                    ensure(z <= 3.0, || {
                        format!(
                            "γT={gamma_t} seed={seed} {}: {label} {v} ± {se} vs oracle {want}",
                            a.name()
                        )
                    })?;
                }
            }
        }
    }
    Ok(format!("{compared} comparisons, max |z| = {worst:.2}"))
}

// 5 -------------------------------------------------------------------------

fn criterion_5() -> Check {
    let t = 0.8;
    let p = problem(fields_with_gamma(0.26), 0.2, 64);
    let obs = [Observable::ConstantOne, Observable::MeanX, Observable::KineticEnergy];
    let spec = QuadratureSpec {
        phase_nodes: 8,
        time_nodes: 4,
        rule: PhaseRule::Hermite,
    };
    let f = forward_terms(2, t, &obs, &p, &spec).map_err(|e| e.to_string())?;
    let b = backward_terms(2, t, &obs, &p, &spec).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 0..=2 {
        for (j, a) in obs.iter().enumerate() {
            let (x, y) = (f.term(n, j), b.term(n, j));
            let rel = (x - y).abs() / x.abs().max(y.abs());
            worst = worst.max(rel);
            ensure(rel <= 1e-6, || format!("n={n} {}: forward {x} backward {y}", a.name()))?;
        }
    }
    let mut fred: f64 = 0.0;
    for a in [Observable::KineticEnergy, Observable::MeanX] {
        let r = fredholm_matrix_check(&p, &a, t, &FredholmSpec::default()).map_err(|e| e.to_string())?;
        fred = fred.max(r.relative_error);
        ensure(!r.diverged && r.identity_holds(1e-8), || format!("{}: {r:?}", a.name()))?;
    }
    Ok(format!(
        "oracle terms max rel diff {worst:.1e}; matrix identity rel err {fred:.1e}"
    ))
}

// 6 -------------------------------------------------------------------------

fn criterion_6() -> Check {
    let mut out = Vec::new();
    for (gamma_t, seed) in [(0.1, 61), (0.5, 62)] {
        let t = 1.0;
        let p = problem(fields_with_gamma(gamma_t / t), 0.2, 64);
        let est = run_forward_ensemble(&p, &ForwardRequest::new(1_000_000, t, Observable::ConstantOne), seed)
            .map_err(|e| e.to_string())?
            .estimate;
        let z = (est.estimate - 1.0).abs() / est.std_err;
        ensure(z <= 3.0, || {
            format!("γT={gamma_t}: ⟨1⟩ = {} ± {}", est.estimate, est.std_err)
        })?;
        // Σα = 1 also fixes every order: ⟨1⟩_n = e^{-γT} (γT)^n / n!.
        let mut fact = 1.0;
        for n in 0..=2 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = (-gamma_t).exp() * f64::powi(gamma_t, n) / fact;
            let (v, se) = est.order_term(n as usize);
            ensure((v - want).abs() <= 3.0 * se, || {
                format!("γT={gamma_t} order {n}: {v} ± {se} vs {want}")
            })?;
        }
        out.push(format!("γT={gamma_t}: {:.4} ± {:.4}", est.estimate, est.std_err));
    }
    Ok(format!("{} (orders 0-2 match the Poisson weights)", out.join(", ")))
}

// 7 -------------------------------------------------------------------------

fn simplex_volume_ratio(prop: &Propagator, z: &PhaseSpacePoint, dt: f64) -> f64 {
    let h = 1e-5;
    let base = prop.propagate(z, dt).unwrap().to_array();
    let mut m = Matrix4::<f64>::zeros();
    for d in 0..4 {
        let mut a = z.to_array();
        a[d] += h;
        let img = prop.propagate(&PhaseSpacePoint::from_array(a), dt).unwrap().to_array();
        for r in 0..4 {
            m[(r, d)] = (img[r] - base[r]) / h;
        }
    }
    m.determinant()
}

fn criterion_7() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    let mut with_gradient = 0;
    for i in 0..100 {
        let fields = FieldConfig {
            b0: rng.random_range(-1.0..1.0),
            b1: if i % 10 == 0 { 0.0 } else { rng.random_range(-0.5..0.5) },
            ex: rng.random_range(-0.3..0.3),
            ey: rng.random_range(-0.3..0.3),
        };
        if fields.b1 != 0.0 {
            with_gradient += 1;
        }
        let consts = PhysicalConstants {
            hbar: 1.0,
            mass: rng.random_range(0.5..2.0),
            charge: if rng.random::<bool>() { 1.0 } else { -1.0 },
        };
        let prop = Propagator::new(fields, consts, IntegratorSettings::rk4(256)).unwrap();
        let z = PhaseSpacePoint::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        );
        let dt = rng.random_range(0.1..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a = prop.jacobian_det(&z, dt).map_err(|e| e.to_string())?;
        let b = simplex_volume_ratio(&prop, &z, dt);
        let err = (a - 1.0).abs().max((b - 1.0).abs());
        worst = worst.max(err);
        ensure(err <= 1e-5, || format!("config {i}: det {a} / {b} for {fields:?}"))?;
    }
    Ok(format!(
        "100 configurations ({with_gradient} with B1 ≠ 0), max |det − 1| = {worst:.1e}"
    ))
}

// 8 -------------------------------------------------------------------------

fn criterion_8() -> Check {
    let fields = FieldConfig {
        b0: 0.7,
        b1: 0.0,
        ex: 0.05,
        ey: -0.05,
    };
    let f0 =
        InitialWigner::GaussianPacket(GaussianPacket::new(PhaseSpacePoint::new(1.0, 0.0, 0.0, 0.0), 0.3, 0.3).unwrap());
    let p = Problem::new(
        unit(),
        fields,
        Discretization::default(),
        IntegratorSettings::rk4(64),
        f0,
    )
    .unwrap();
    let grid = GridSpec::new([-1.0, -2.0, -3.0, -3.0], [3.0, 2.0, 5.0, 3.0], [16, 16, 32, 24]).unwrap();
    let obs = [
        Observable::MeanX,
        Observable::MeanY,
        Observable::MeanPx,
        Observable::MeanPy,
    ];
    let whole = SliceSchedule {
        total_time: 1.0,
        slice_length: 1.0,
        trajectories_per_slice: 100_000,
    };
    let k = 4;
    let sliced = SliceSchedule {
        slice_length: 1.0 / k as f64,
        ..whole
    };
    let a = run_slices(&whole, &grid, &p, &obs, 64, 81).map_err(|e| e.to_string())?;
    let b = run_slices(&sliced, &grid, &p, &obs, 64, 82).map_err(|e| e.to_string())?;
    ensure(b.slices.len() == k, || format!("{} slices", b.slices.len()))?;
    let la = &a.slices.last().unwrap().observables;
    let lb = &b.slices.last().unwrap().observables;
    let mut worst: f64 = 0.0;
    for j in 0..obs.len() {
        // Restart noise accumulates over the slices: the sliced error is
        // taken as √K times the last-slice error.
        let se = (la[j].std_err.powi(2) + k as f64 * lb[j].std_err.powi(2)).sqrt();
        let z = (la[j].estimate - lb[j].estimate).abs() / se;
        worst = worst.max(z);
        ensure(z <= 3.0, || format!("{}: {:?} vs {:?}", la[j].name, la[j], lb[j]))?;
    }

    // Weight bound on a quantum run: restarts reset weights to ±1.
    let q = problem(
        FieldConfig {
            b0: 0.5,
            b1: 0.6,
            ex: 0.0,
            ey: 0.0,
        },
        0.25,
        64,
    );
    let qgrid = GridSpec::new([-2.0, -2.5, -3.0, -3.5], [3.0, 2.5, 4.0, 3.5], [10, 10, 12, 12]).unwrap();
    let sched = SliceSchedule {
        total_time: 1.0,
        slice_length: 0.25,
        trajectories_per_slice: 20_000,
    };
    let run = run_slices(&sched, &qgrid, &q, &[Observable::MeanX], 64, 83).map_err(|e| e.to_string())?;
    let mut events = Vec::new();
    for s in &run.slices {
        let bound = 41f64.powi(s.max_events as i32);
        ensure(s.max_abs_weight <= bound * (1.0 + 1e-12), || {
            format!("slice {}: max |w| {} > 41^{}", s.index, s.max_abs_weight, s.max_events)
        })?;
        events.push(s.max_events);
    }
    ensure(events.iter().any(|e| *e > 0), || "no scattering in any slice".into())?;
    Ok(format!(
        "max |z| = {worst:.2} over 4 means; per-slice max events {events:?}, |w| ≤ 41^n"
    ))
}

// 9 -------------------------------------------------------------------------

fn fingerprint(p: &Problem, grid: &GridSpec) -> Result<String, String> {
    let mut req = ForwardRequest::new(20_000, 0.8, Observable::KineticEnergy);
    req.grid = Some(grid.clone());
    req.extra_observables = vec![Observable::MeanX, Observable::ConstantOne];
    let fw = run_forward_ensemble(p, &req, 9).map_err(|e| e.to_string())?;
    let plan = BackwardPlan::uniform(2, 5_000, 0.8, SamplingDensity::AbsF0);
    let bw = run_backward(&plan, p, &Observable::MeanX, 9).map_err(|e| e.to_string())?;
    let sched = SliceSchedule {
        total_time: 0.8,
        slice_length: 0.3,
        trajectories_per_slice: 10_000,
    };
    let sl = run_slices(&sched, grid, p, &[Observable::MeanPx], 64, 9).map_err(|e| e.to_string())?;
    Ok(format!("{:?}\n{:?}\n{:?}\n{:?}", fw.estimate, fw.grid, bw, sl))
}

fn criterion_9() -> Check {
    let p = problem(fields_with_gamma(0.4), 0.2, 64);
    let grid = GridSpec::new([-1.5, -2.0, -2.5, -3.0], [2.5, 2.0, 3.5, 3.0], [8, 8, 10, 10]).unwrap();
    let reference = with_workers(1, || fingerprint(&p, &grid))?;
    for w in [4, 8] {
        let other = with_workers(w, || fingerprint(&p, &grid))?;
        ensure(other == reference, || format!("{w} workers differ from 1 worker"))?;
    }
    Ok(format!(
        "forward, backward and sliced runs identical at 1/4/8 workers ({} bytes)",
        reference.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 9] = [
        ("stencil exactness", criterion_1),
        ("classical limit", criterion_2),
        ("scattering statistics", criterion_3),
        ("oracle equivalence", criterion_4),
        ("exchange identity", criterion_5),
        ("conservation", criterion_6),
        ("phase-space volume", criterion_7),
        ("time slicing", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
