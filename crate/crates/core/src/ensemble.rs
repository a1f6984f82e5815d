//! Phase-space grids from forward ensembles, and time slicing: the grid at
//! the end of one slice becomes the initial condition of the next.
//!
//! Restarted particles carry unit signed weights. The mass `Σ |density| · vol`
//! of the grid they were drawn from is a per-slice scale factor; the running
//! product of these factors converts raw estimates to absolute ones.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::forward::{run_forward_ensemble, ForwardRequest, GridSampler, StartSource};
use crate::grid::{GridSpec, WignerGrid};
use crate::model::{Observable, PhaseSpacePoint};
use crate::problem::Problem;
use crate::rng::{domain_stream, StreamDomain};

pub use crate::forward::{accumulate_grid, ObservableEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSchedule {
    pub total_time: f64,
    pub slice_length: f64,
    pub trajectories_per_slice: u64,
}

impl SliceSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(WignerError::config("final_time", "must be finite and > 0"));
        }
        if !(self.slice_length.is_finite() && self.slice_length > 0.0) {
            return Err(WignerError::config("slice.slice_length", "must be finite and > 0"));
        }
        if self.trajectories_per_slice == 0 || self.trajectories_per_slice > u32::MAX as u64 {
            return Err(WignerError::config(
                "slice.trajectories_per_slice",
                "must be in 1..=2^32-1",
            ));
        }
        if self.total_time / self.slice_length > 100_000.0 {
            return Err(WignerError::config("slice.slice_length", "more than 10^5 slices"));
        }
        Ok(())
    }

    /// `(start, length)` of every slice. A remainder shorter than `1e-9 Δt`
    /// is absorbed; otherwise the last slice is shortened.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let n = (self.total_time / self.slice_length - 1e-9).ceil().max(1.0) as usize;
        (0..n)
            .map(|k| {
                let start = k as f64 * self.slice_length;
                let len = if k + 1 == n {
                    self.total_time - start
                } else {
                    self.slice_length
                };
                (start, len)
            })
            .collect()
    }

    pub fn last_slice_shortened(&self) -> bool {
        let iv = self.intervals();
        let last = iv[iv.len() - 1].1;
        (last - self.slice_length).abs() > 1e-9 * self.slice_length
    }
}

/// Start points drawn from a grid, with unit signed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub points: Vec<(PhaseSpacePoint, f64)>,
    /// `Σ |density| · cell volume`.
    pub scale: f64,
}

/// Draws `m` points with probability `∝ |density| · volume`, uniformly
/// jittered inside their cells; particle `i` uses its own resampling stream.
pub fn resample_from_grid(grid: &WignerGrid, m: u64, seed: u64, slice: u32) -> Result<Resampled> {
    let sampler = GridSampler::new(grid)?;
    let points = (0..m)
        .map(|i| sampler.draw(&mut domain_stream(seed, StreamDomain::Resample, slice, i)))
        .collect();
    Ok(Resampled {
        points,
        scale: sampler.scale,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceResult {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Raw grid; `grid.scale` holds the cumulative factor.
    pub grid: WignerGrid,
    /// Mass of the grid this slice was restarted from (1 for slice 0).
    pub scale_factor: f64,
    pub cumulative_scale: f64,
    /// Absolute estimates at `t_end`.
    pub observables: Vec<ObservableEstimate>,
    pub max_abs_weight: f64,
    pub max_events: u32,
    pub cancellation_ratio: f64,
    pub capped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceRun {
    pub slices: Vec<SliceResult>,
    pub last_slice_shortened: bool,
}

pub fn run_slices(
    schedule: &SliceSchedule,
    spec: &GridSpec,
    problem: &Problem,
    observables: &[Observable],
    event_cap: u32,
    seed: u64,
) -> Result<SliceRun> {
    schedule.validate()?;
    spec.validate()?;
    let mut slices: Vec<SliceResult> = Vec::new();
    let mut sampler: Option<GridSampler> = None;
    let mut cumulative = 1.0;
    let intervals = schedule.intervals();
    let count = intervals.len();
    for (k, (t0, len)) in intervals.into_iter().enumerate() {
        let source = match &sampler {
            None => StartSource::Initial,
            Some(s) => StartSource::Grid(s),
        };
        let factor = sampler.as_ref().map(|s| s.scale).unwrap_or(1.0);
        cumulative *= factor;
        let mut req = ForwardRequest::new(schedule.trajectories_per_slice, len, Observable::ConstantOne);
        req.event_cap = event_cap;
        req.source = source;
        req.grid = Some(spec.clone());
        req.slice = k as u32;
        req.extra_observables = observables.to_vec();
        let out = run_forward_ensemble(problem, &req, seed).map_err(|e| match e {
            WignerError::CannotResample(m) => WignerError::CannotResample(format!("slice {k}: {m}")),
            other => other,
        })?;
        let t_end = t0 + len;
        let mut grid = out.grid.expect("grid requested");
        grid.time = t_end;
        grid.scale = cumulative;
        let ests = out
            .estimate
            .extra
            .iter()
            .map(|e| ObservableEstimate {
                name: e.name.clone(),
                estimate: e.estimate * cumulative,
                std_err: e.std_err * cumulative,
            })
            .collect();
        let max_events = out.estimate.histogram.iter().rposition(|c| *c > 0).unwrap_or(0) as u32;
        let next = GridSampler::new(&grid).map_err(|e| match e {
            WignerError::CannotResample(m) => WignerError::CannotResample(format!("after slice {k}: {m}")),
            other => other,
        });
        slices.push(SliceResult {
            index: k,
            t_start: t0,
            t_end,
            grid,
            scale_factor: factor,
            cumulative_scale: cumulative,
            observables: ests,
            max_abs_weight: out.estimate.max_abs_weight,
            max_events,
            cancellation_ratio: out.estimate.cancellation_ratio,
            capped: out.estimate.capped,
        });
        if k + 1 < count {
            sampler = Some(next?);
        }
    }
    Ok(SliceRun {
        slices,
        last_slice_shortened: schedule.last_slice_shortened(),
    })
}
