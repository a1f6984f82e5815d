//! Backward Monte Carlo: trajectories start at the final time and scatter at
//! uniformly nested times `T > t1 > … > tn > 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::model::{Observable, PhaseSpacePoint};
use crate::problem::{Problem, MAX_REJECTIONS};
use crate::quadrature::GaussLegendre;
use crate::rng::{domain_stream, StreamDomain};
use crate::stats::{chunked_reduce, RunningStats};
use crate::stencil::ALPHA_ABS_SUM;

/// Density of the trajectory end point `z_T`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingDensity {
    /// `|f_w0|` (or its envelope) carried to time `T` along classical trajectories.
    #[default]
    AbsF0,
    /// The transported envelope times `|A|`; only for bounded observables.
    #[serde(alias = "abs_f0_times_abs_A")]
    AbsF0TimesAbsA,
    /// Point mass at `point`: estimates `f_w(point, T)` when `A ≡ 1`.
    FixedPoint { point: PhaseSpacePoint },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardPlan {
    pub max_order: usize,
    pub per_order: Vec<u64>,
    pub final_time: f64,
    pub sampling: SamplingDensity,
}

impl BackwardPlan {
    pub fn uniform(max_order: usize, per_order: u64, final_time: f64, sampling: SamplingDensity) -> Self {
        BackwardPlan {
            max_order,
            per_order: vec![per_order; max_order + 1],
            final_time,
            sampling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(WignerError::config("backward.final_time", "must be finite and > 0"));
        }
        if self.per_order.len() != self.max_order + 1 {
            return Err(WignerError::config(
                "backward.per_order",
                format!(
                    "expected {} entries (orders 0..={})",
                    self.max_order + 1,
                    self.max_order
                ),
            ));
        }
        if self.per_order.iter().any(|n| *n == 0 || *n > u32::MAX as u64) {
            return Err(WignerError::config(
                "backward.per_order",
                "every order needs 1..=2^32-1 trajectories",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub order: usize,
    pub mean: f64,
    pub std_err: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardResult {
    pub terms: Vec<TermEstimate>,
    pub total: f64,
    pub total_std_err: f64,
}

impl BackwardResult {
    fn from_terms(terms: Vec<TermEstimate>) -> Self {
        let total = terms.iter().map(|t| t.mean).sum();
        let total_std_err = terms.iter().map(|t| t.std_err * t.std_err).sum::<f64>().sqrt();
        BackwardResult {
            terms,
            total,
            total_std_err,
        }
    }
}

/// One backward trajectory, recorded for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardTrace {
    pub end: PhaseSpacePoint,
    pub start: PhaseSpacePoint,
    /// Scattering times in decreasing order.
    pub times: Vec<f64>,
    pub terms: Vec<usize>,
    /// `e^{-Tγ} Π γ t_{i-1} 41 sign(α_i)`.
    pub weight: f64,
}

/// Runs the scattering recursion backward from `(end, T)`.
pub fn backward_trajectory<R: Rng + ?Sized>(
    problem: &Problem,
    order: usize,
    final_time: f64,
    end: PhaseSpacePoint,
    rng: &mut R,
) -> Result<BackwardTrace> {
    if order > 0 && problem.is_classical() {
        return Err(WignerError::InvalidOperation(
            "scattering orders >= 1 need a non-classical stencil".into(),
        ));
    }
    let gamma = problem.gamma();
    let mut times = Vec::with_capacity(order);
    let mut terms = Vec::with_capacity(order);
    let mut s = (-final_time * gamma).exp();
    let mut t_prev = final_time;
    let mut z = end;
    for _ in 0..order {
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        let t = t_prev * u;
        debug_assert!(t < t_prev && t > 0.0);
        z = problem.propagator.propagate_between(&z, t_prev, t)?;
        let tr = problem.stencil.sample_transition(rng.random())?;
        z = z + problem.stencil.shift(tr.index);
        s *= gamma * t_prev * ALPHA_ABS_SUM as f64 * tr.sign as f64;
        times.push(t);
        terms.push(tr.index);
        t_prev = t;
    }
    let start = problem.propagator.propagate_between(&z, t_prev, 0.0)?;
    Ok(BackwardTrace {
        end,
        start,
        times,
        terms,
        weight: s,
    })
}

/// Draws end points for one run; holds precomputed normalizations.
#[derive(Debug, Clone)]
enum EndSampler {
    Transported,
    Cell {
        lower: [f64; 4],
        upper: [f64; 4],
        norm: f64,
        peak: f64,
    },
    Fixed(PhaseSpacePoint),
}

struct EndDraw {
    end: PhaseSpacePoint,
    density: f64,
    /// Known start of the unscattered trajectory, when the draw produced it.
    origin: Option<PhaseSpacePoint>,
}

impl EndSampler {
    fn new(problem: &Problem, plan: &BackwardPlan, observable: &Observable) -> Result<Self> {
        match (plan.sampling, observable) {
            (SamplingDensity::FixedPoint { point }, _) => {
                if !point.is_finite() {
                    return Err(WignerError::config("backward.sampling.point", "must be finite"));
                }
                Ok(EndSampler::Fixed(point))
            }
            (SamplingDensity::AbsF0, _) | (SamplingDensity::AbsF0TimesAbsA, Observable::ConstantOne) => {
                Ok(EndSampler::Transported)
            }
            (SamplingDensity::AbsF0TimesAbsA, Observable::IndicatorCell { lower, upper }) => {
                let rule = GaussLegendre::new(8)?;
                let nodes: [Vec<(f64, f64)>; 4] = std::array::from_fn(|d| rule.on_interval(lower[d], upper[d]));
                let mut norm = 0.0;
                for (a, wa) in &nodes[0] {
                    for (b, wb) in &nodes[1] {
                        for (c, wc) in &nodes[2] {
                            for (e, we) in &nodes[3] {
                                let u = PhaseSpacePoint::new(*a, *b, *c, *e);
                                let z0 = problem.propagator.propagate(&u, -plan.final_time)?;
                                norm += wa * wb * wc * we * problem.envelope.density(&z0);
                            }
                        }
                    }
                }
                if norm.is_nan() || norm <= 0.0 {
                    return Err(WignerError::config(
                        "observable",
                        "indicator cell carries no transported |f_w0| mass",
                    ));
                }
                Ok(EndSampler::Cell {
                    lower: *lower,
                    upper: *upper,
                    norm,
                    peak: problem.envelope.peak(),
                })
            }
            (SamplingDensity::AbsF0TimesAbsA, other) => Err(WignerError::config(
                "backward.sampling",
                format!("abs_f0_times_abs_a needs a bounded observable, got {}", other.name()),
            )),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, problem: &Problem, t: f64, rng: &mut R) -> Result<EndDraw> {
        match self {
            EndSampler::Fixed(pt) => Ok(EndDraw {
                end: *pt,
                density: 1.0,
                origin: None,
            }),
            EndSampler::Transported => {
                let (z0, p) = problem.draw_initial(rng)?;
                Ok(EndDraw {
                    end: problem.propagator.propagate(&z0, t)?,
                    density: p,
                    origin: Some(z0),
                })
            }
            EndSampler::Cell {
                lower,
                upper,
                norm,
                peak,
            } => {
                for _ in 0..MAX_REJECTIONS {
                    let u = PhaseSpacePoint::from_array(std::array::from_fn(|d| {
                        lower[d] + (upper[d] - lower[d]) * rng.random::<f64>()
                    }));
                    let z0 = problem.propagator.propagate(&u, -t)?;
                    let env = problem.envelope.density(&z0);
                    if env > 0.0 && rng.random::<f64>() * peak < env {
                        return Ok(EndDraw {
                            end: u,
                            density: env / norm,
                            origin: Some(z0),
                        });
                    }
                }
                Err(WignerError::config(
                    "backward.sampling",
                    "rejection cap of 10^6 reached while sampling the indicator cell",
                ))
            }
        }
    }
}

fn contribution<R: Rng + ?Sized>(
    problem: &Problem,
    sampler: &EndSampler,
    order: usize,
    t: f64,
    observable: &Observable,
    rng: &mut R,
) -> Result<f64> {
    let draw = sampler.draw(problem, t, rng)?;
    let a = observable.eval(&draw.end, t, &problem.consts);
    let (start, weight) = match (order, draw.origin) {
        (0, Some(z0)) => (z0, (-t * problem.gamma()).exp()),
        _ => {
            let tr = backward_trajectory(problem, order, t, draw.end, rng)?;
            (tr.start, tr.weight)
        }
    };
    Ok(weight * problem.f0.eval(&start) * a / draw.density)
}

fn run_term_with(
    problem: &Problem,
    sampler: &EndSampler,
    order: usize,
    count: u64,
    final_time: f64,
    observable: &Observable,
    seed: u64,
) -> Result<TermEstimate> {
    let stats = chunked_reduce(
        count,
        RunningStats::default,
        |acc, i| {
            let mut rng = domain_stream(seed, StreamDomain::Backward, order as u32, i);
            acc.push(contribution(problem, sampler, order, final_time, observable, &mut rng)?);
            Ok(())
        },
        RunningStats::merge,
    )?;
    if !stats.mean.is_finite() {
        return Err(WignerError::Estimation(format!(
            "order {order} produced a non-finite mean"
        )));
    }
    Ok(TermEstimate {
        order,
        mean: stats.mean,
        std_err: stats.std_err(),
        count: stats.count,
    })
}

/// Estimates the order-`n` term `⟨A⟩_n(T)` from `plan.per_order[n]` trajectories.
pub fn run_backward_term(
    order: usize,
    plan: &BackwardPlan,
    problem: &Problem,
    observable: &Observable,
    seed: u64,
) -> Result<TermEstimate> {
    plan.validate()?;
    observable.validate()?;
    if order > plan.max_order {
        return Err(WignerError::config(
            "backward.max_order",
            format!("order {order} exceeds the plan"),
        ));
    }
    let sampler = EndSampler::new(problem, plan, observable)?;
    run_term_with(
        problem,
        &sampler,
        order,
        plan.per_order[order],
        plan.final_time,
        observable,
        seed,
    )
}

/// All orders `0..=N` of the plan plus their sum. In classical mode only
/// order 0 is nonzero and higher orders are reported as exact zeros.
pub fn run_backward(
    plan: &BackwardPlan,
    problem: &Problem,
    observable: &Observable,
    seed: u64,
) -> Result<BackwardResult> {
    plan.validate()?;
    observable.validate()?;
    let sampler = EndSampler::new(problem, plan, observable)?;
    let mut terms = Vec::with_capacity(plan.max_order + 1);
    for n in 0..=plan.max_order {
        if n > 0 && problem.is_classical() {
            terms.push(TermEstimate {
                order: n,
                mean: 0.0,
                std_err: 0.0,
                count: 0,
            });
            continue;
        }
        terms.push(run_term_with(
            problem,
            &sampler,
            n,
            plan.per_order[n],
            plan.final_time,
            observable,
            seed,
        )?);
    }
    Ok(BackwardResult::from_terms(terms))
}

/// Pointwise `f_w(pt, T)` from trajectories pinned at `(pt, T)`.
pub fn estimate_wigner_point(
    pt: PhaseSpacePoint,
    final_time: f64,
    max_order: usize,
    per_order: u64,
    problem: &Problem,
    seed: u64,
) -> Result<BackwardResult> {
    let plan = BackwardPlan::uniform(
        max_order,
        per_order,
        final_time,
        SamplingDensity::FixedPoint { point: pt },
    );
    run_backward(&plan, problem, &Observable::ConstantOne, seed)
}
