//! Forward signed-particle Monte Carlo with exponential free flights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::grid::{GridSpec, WignerGrid};
use crate::model::{Observable, PhaseSpacePoint};
use crate::problem::Problem;
use crate::rng::{domain_stream, StreamDomain};
use crate::stats::{chunked_reduce, RunningStats};
use crate::stencil::ALPHA_ABS_SUM;

pub const DEFAULT_EVENT_CAP: u32 = 64;

/// A finished trajectory. `weight` is `Π 41 sign(α)`; the start ratio
/// `f_w0 / P` is kept separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub start: PhaseSpacePoint,
    pub end: PhaseSpacePoint,
    pub weight: f64,
    pub events: u32,
    pub start_ratio: f64,
    /// More than the event cap; `end` is where the trajectory was abandoned.
    pub capped: bool,
}

impl WeightedSample {
    pub fn signed_weight(&self) -> f64 {
        self.weight * self.start_ratio
    }
}

/// Follows one particle from `(start, 0)` to `final_time`. Flight times are
/// pushed to `flights` when given (the last, truncated flight is omitted).
pub fn run_forward_trajectory<R: Rng + ?Sized>(
    problem: &Problem,
    start: PhaseSpacePoint,
    start_ratio: f64,
    final_time: f64,
    event_cap: u32,
    rng: &mut R,
    mut flights: Option<&mut Vec<f64>>,
) -> Result<WeightedSample> {
    let gamma = problem.gamma();
    let mut z = start;
    let mut t = 0.0;
    let mut s = 1.0f64;
    let mut events = 0u32;
    loop {
        if problem.is_classical() {
            z = problem.propagator.propagate_between(&z, t, final_time)?;
            break;
        }
        let r = 1.0 - rng.random::<f64>();
        let flight = -r.ln() / gamma;
        if t + flight >= final_time {
            z = problem.propagator.propagate_between(&z, t, final_time)?;
            break;
        }
        if let Some(f) = flights.as_deref_mut() {
            f.push(flight);
        }
        z = problem.propagator.propagate_between(&z, t, t + flight)?;
        t += flight;
        events += 1;
        if events > event_cap {
            return Ok(WeightedSample {
                start,
                end: z,
                weight: s,
                events,
                start_ratio,
                capped: true,
            });
        }
        let tr = problem.stencil.sample_transition(rng.random())?;
        z = z - problem.stencil.shift(tr.index);
        s *= ALPHA_ABS_SUM as f64 * tr.sign as f64;
    }
    Ok(WeightedSample {
        start,
        end: z,
        weight: s,
        events,
        start_ratio,
        capped: false,
    })
}

/// Cumulative table over the nonzero cells of a grid, for restarting an
/// ensemble from a previous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSampler {
    spec: GridSpec,
    cells: Vec<usize>,
    cumulative: Vec<f64>,
    signs: Vec<f64>,
    /// `Σ |density| · volume` of the grid in its own (raw) units.
    pub scale: f64,
}

impl GridSampler {
    pub fn new(grid: &WignerGrid) -> Result<Self> {
        let vol = grid.spec.cell_volume();
        let mut cells = Vec::new();
        let mut cumulative = Vec::new();
        let mut signs = Vec::new();
        let mut acc = 0.0;
        for (i, d) in grid.density.iter().enumerate() {
            if *d != 0.0 && d.is_finite() {
                acc += d.abs() * vol;
                cells.push(i);
                cumulative.push(acc);
                signs.push(d.signum());
            }
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(WignerError::CannotResample("grid has no mass".into()));
        }
        Ok(GridSampler {
            spec: grid.spec.clone(),
            cells,
            cumulative,
            signs,
            scale: acc,
        })
    }

    /// A point drawn with probability `∝ |density|`, jittered uniformly in its
    /// cell, and the sign of the cell.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (PhaseSpacePoint, f64) {
        let u = rng.random::<f64>() * self.scale;
        let k = self.cumulative.partition_point(|c| *c <= u).min(self.cells.len() - 1);
        let idx = self.spec.unflat(self.cells[k]);
        let lo = self.spec.cell_lower(idx);
        let w = self.spec.widths();
        let pt = PhaseSpacePoint::from_array(std::array::from_fn(|d| lo[d] + w[d] * rng.random::<f64>()));
        (pt, self.signs[k])
    }
}

/// Where trajectories start.
#[derive(Debug, Clone, Copy)]
pub enum StartSource<'a> {
    /// `z ~ envelope of f_w0`, ratio `f_w0(z) / envelope(z)`.
    Initial,
    /// Resampled grid points with unit signed ratios.
    Grid(&'a GridSampler),
}

#[derive(Debug, Clone)]
pub struct ForwardRequest<'a> {
    pub trajectories: u64,
    pub final_time: f64,
    pub observable: Observable,
    pub event_cap: u32,
    pub source: StartSource<'a>,
    pub grid: Option<GridSpec>,
    pub keep_samples: bool,
    /// Stream `sub` field for the trajectories (the slice index).
    pub slice: u32,
    /// Further observables estimated from the same trajectories.
    pub extra_observables: Vec<Observable>,
}

impl<'a> ForwardRequest<'a> {
    pub fn new(trajectories: u64, final_time: f64, observable: Observable) -> Self {
        ForwardRequest {
            trajectories,
            final_time,
            observable,
            event_cap: DEFAULT_EVENT_CAP,
            source: StartSource::Initial,
            grid: None,
            keep_samples: false,
            slice: 0,
            extra_observables: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 || self.trajectories > u32::MAX as u64 {
            return Err(WignerError::config("forward.trajectories", "must be in 1..=2^32-1"));
        }
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(WignerError::config("forward.final_time", "must be finite and > 0"));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        for a in &self.extra_observables {
            a.validate()?;
        }
        self.observable.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub name: String,
    pub estimate: f64,
    pub std_err: f64,
}

/// Sum and sum of squares of the contributions of one event count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderSums {
    pub hits: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    stats: RunningStats,
    extra: Vec<RunningStats>,
    abs_sum: f64,
    histogram: Vec<u64>,
    capped: u64,
    max_abs_weight: f64,
    orders: Vec<OrderSums>,
    /// `(flat cell or usize::MAX when outside, signed weight)` in trajectory order.
    deposits: Vec<(usize, f64)>,
    samples: Vec<WeightedSample>,
}

impl Accumulator {
    fn new(cap: u32, extra: usize) -> Self {
        Accumulator {
            extra: vec![RunningStats::default(); extra],
            histogram: vec![0; cap as usize + 1],
            orders: vec![OrderSums::default(); cap as usize + 1],
            ..Default::default()
        }
    }

    fn merge(mut self, mut o: Accumulator) -> Accumulator {
        self.stats = self.stats.merge(o.stats);
        for (a, b) in self.extra.iter_mut().zip(&o.extra) {
            *a = a.merge(*b);
        }
        self.abs_sum += o.abs_sum;
        for (a, b) in self.histogram.iter_mut().zip(&o.histogram) {
            *a += b;
        }
        self.capped += o.capped;
        self.max_abs_weight = self.max_abs_weight.max(o.max_abs_weight);
        for (a, b) in self.orders.iter_mut().zip(&o.orders) {
            a.hits += b.hits;
            a.sum += b.sum;
            a.sum_sq += b.sum_sq;
        }
        self.deposits.append(&mut o.deposits);
        self.samples.append(&mut o.samples);
        self
    }
}

/// Result of a forward ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardEstimate {
    pub trajectories: u64,
    pub estimate: f64,
    pub std_err: f64,
    /// Trajectories per event count `0..=cap`.
    pub histogram: Vec<u64>,
    pub capped: u64,
    pub capped_fraction: f64,
    /// `Σ |c| / |Σ c|`; 1 without cancellation.
    pub cancellation_ratio: f64,
    /// Largest `|Π 41 sign(α)|` over the ensemble.
    pub max_abs_weight: f64,
    pub orders: Vec<OrderSums>,
    /// Estimates of `extra_observables`, in request order.
    pub extra: Vec<ObservableEstimate>,
}

impl ForwardEstimate {
    /// Mean and standard error of the contributions restricted to trajectories
    /// with at most `max_order` events: an unbiased estimate of `Σ_{n ≤ N} ⟨A⟩_n`.
    pub fn truncated(&self, max_order: usize) -> (f64, f64) {
        let m = self.trajectories as f64;
        let (s, q) = self
            .orders
            .iter()
            .take(max_order + 1)
            .fold((0.0, 0.0), |(s, q), o| (s + o.sum, q + o.sum_sq));
        let mean = s / m;
        let var = if self.trajectories > 1 {
            ((q / m - mean * mean) * m / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / m).sqrt())
    }

    /// Estimate of the single term `⟨A⟩_n`.
    pub fn order_term(&self, n: usize) -> (f64, f64) {
        let m = self.trajectories as f64;
        let Some(o) = self.orders.get(n) else {
            return (0.0, 0.0);
        };
        let mean = o.sum / m;
        let var = if self.trajectories > 1 {
            ((o.sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, (var / m).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub estimate: ForwardEstimate,
    /// Deposited grid in the units of the start ratios, when requested.
    pub grid: Option<WignerGrid>,
    pub samples: Vec<WeightedSample>,
}

/// Runs `request.trajectories` independent particles and averages
/// `s · A(end, T) · f_w0(start) / P(start)`. Capped trajectories contribute
/// zero and are counted.
pub fn run_forward_ensemble(problem: &Problem, request: &ForwardRequest, seed: u64) -> Result<ForwardOutput> {
    request.validate()?;
    let cap = request.event_cap;
    let t = request.final_time;
    let spec = request.grid.as_ref();
    let acc = chunked_reduce(
        request.trajectories,
        || Accumulator::new(cap, request.extra_observables.len()),
        |acc, i| {
            let (start, ratio, mut rng) = match request.source {
                StartSource::Initial => {
                    let mut rng = domain_stream(seed, StreamDomain::Forward, request.slice, i);
                    let (z, p) = problem.draw_initial(&mut rng)?;
                    (z, problem.f0.eval(&z) / p, rng)
                }
                StartSource::Grid(sampler) => {
                    let mut rs = domain_stream(seed, StreamDomain::Resample, request.slice, i);
                    let (z, sign) = sampler.draw(&mut rs);
                    (z, sign, domain_stream(seed, StreamDomain::Forward, request.slice, i))
                }
            };
            let sample = run_forward_trajectory(problem, start, ratio, t, cap, &mut rng, None)?;
            if sample.capped {
                acc.capped += 1;
                acc.stats.push(0.0);
                acc.extra.iter_mut().for_each(|s| s.push(0.0));
            } else {
                for (s, a) in acc.extra.iter_mut().zip(&request.extra_observables) {
                    s.push(sample.signed_weight() * a.eval(&sample.end, t, &problem.consts));
                }
                let c = sample.signed_weight() * request.observable.eval(&sample.end, t, &problem.consts);
                acc.stats.push(c);
                acc.abs_sum += c.abs();
                acc.histogram[sample.events as usize] += 1;
                acc.max_abs_weight = acc.max_abs_weight.max(sample.weight.abs());
                let o = &mut acc.orders[sample.events as usize];
                o.hits += 1;
                o.sum += c;
                o.sum_sq += c * c;
                if let Some(spec) = spec {
                    let cell = spec.locate(&sample.end).map(|idx| spec.flat(idx)).unwrap_or(usize::MAX);
                    acc.deposits.push((cell, sample.signed_weight()));
                }
            }
            if request.keep_samples {
                acc.samples.push(sample);
            }
            Ok(())
        },
        Accumulator::merge,
    )?;
    let m = request.trajectories;
    if acc.capped == m {
        return Err(WignerError::Estimation(format!(
            "all {m} trajectories exceeded the event cap of {cap}"
        )));
    }
    if !acc.stats.mean.is_finite() {
        return Err(WignerError::Estimation("non-finite ensemble mean".into()));
    }
    let total = acc.stats.mean * m as f64;
    let grid = match spec {
        Some(spec) => Some(deposit(spec, &acc.deposits, m, t)?),
        None => None,
    };
    Ok(ForwardOutput {
        estimate: ForwardEstimate {
            trajectories: m,
            estimate: acc.stats.mean,
            std_err: acc.stats.std_err(),
            histogram: acc.histogram,
            capped: acc.capped,
            capped_fraction: acc.capped as f64 / m as f64,
            cancellation_ratio: if total != 0.0 {
                acc.abs_sum / total.abs()
            } else {
                f64::INFINITY
            },
            max_abs_weight: acc.max_abs_weight,
            orders: acc.orders,
            extra: request
                .extra_observables
                .iter()
                .zip(&acc.extra)
                .map(|(a, s)| ObservableEstimate {
                    name: a.name().to_string(),
                    estimate: s.mean,
                    std_err: s.std_err(),
                })
                .collect(),
        },
        grid,
        samples: acc.samples,
    })
}

fn deposit(spec: &GridSpec, deposits: &[(usize, f64)], m: u64, t: f64) -> Result<WignerGrid> {
    let mut grid = WignerGrid::zeros(spec.clone(), t)?;
    let norm = m as f64 * spec.cell_volume();
    for (cell, w) in deposits {
        if *cell == usize::MAX {
            grid.out_of_bounds += w / m as f64;
            grid.out_of_bounds_abs += w.abs() / m as f64;
        } else {
            grid.density[*cell] += w / norm;
        }
    }
    grid.samples = m;
    Ok(grid)
}

/// Histogram estimator: each sample deposits `weight / (M · cell volume)`
/// into the cell of its end point.
pub fn accumulate_grid(samples: &[WeightedSample], total: u64, spec: &GridSpec, time: f64) -> Result<WignerGrid> {
    spec.validate()?;
    if total == 0 {
        return Err(WignerError::config(
            "forward.trajectories",
            "sample count must be positive",
        ));
    }
    let deposits: Vec<(usize, f64)> = samples
        .iter()
        .filter(|s| !s.capped)
        .map(|s| {
            let cell = spec.locate(&s.end).map(|idx| spec.flat(idx)).unwrap_or(usize::MAX);
            (cell, s.signed_weight())
        })
        .collect();
    deposit(spec, &deposits, total, time)
}
