//! Rectangular phase-space grids holding signed quasi-probability densities.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WignerError};
use crate::model::PhaseSpacePoint;

/// Box bounds and cell counts of a 4D grid over `(px, py, x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
    pub cells: [usize; 4],
}

impl GridSpec {
    pub fn new(lower: [f64; 4], upper: [f64; 4], cells: [usize; 4]) -> Result<Self> {
        let spec = GridSpec { lower, upper, cells };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for d in 0..4 {
            if self.cells[d] == 0 {
                return Err(WignerError::config(
                    "grid.cells",
                    "every dimension needs at least one cell",
                ));
            }
            if !(self.lower[d].is_finite() && self.upper[d].is_finite()) {
                return Err(WignerError::config("grid.lower", "bounds must be finite"));
            }
            if self.upper[d] <= self.lower[d] {
                return Err(WignerError::config("grid.upper", "upper bound must exceed lower bound"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn widths(&self) -> [f64; 4] {
        std::array::from_fn(|d| (self.upper[d] - self.lower[d]) / self.cells[d] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths().iter().product()
    }

    /// Multi-index of the cell containing `pt`, or `None` outside the box.
    pub fn locate(&self, pt: &PhaseSpacePoint) -> Option<[usize; 4]> {
        let a = pt.to_array();
        let w = self.widths();
        let mut idx = [0usize; 4];
        for d in 0..4 {
            if !(a[d] >= self.lower[d] && a[d] < self.upper[d]) {
                return None;
            }
            let i = ((a[d] - self.lower[d]) / w[d]) as usize;
            idx[d] = i.min(self.cells[d] - 1);
        }
        Some(idx)
    }

    pub fn flat(&self, idx: [usize; 4]) -> usize {
        ((idx[0] * self.cells[1] + idx[1]) * self.cells[2] + idx[2]) * self.cells[3] + idx[3]
    }

    pub fn unflat(&self, mut flat: usize) -> [usize; 4] {
        let mut idx = [0usize; 4];
        for d in (0..4).rev() {
            idx[d] = flat % self.cells[d];
            flat /= self.cells[d];
        }
        idx
    }

    pub fn center(&self, idx: [usize; 4]) -> PhaseSpacePoint {
        let w = self.widths();
        PhaseSpacePoint::from_array(std::array::from_fn(|d| self.lower[d] + (idx[d] as f64 + 0.5) * w[d]))
    }

    pub fn cell_lower(&self, idx: [usize; 4]) -> [f64; 4] {
        let w = self.widths();
        std::array::from_fn(|d| self.lower[d] + idx[d] as f64 * w[d])
    }
}

/// Signed density per cell, plus the bookkeeping of the ensemble that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub density: Vec<f64>,
    pub samples: u64,
    pub time: f64,
    /// Factor converting `density` to absolute quasi-probability density.
    pub scale: f64,
    /// Signed weight (already divided by the sample count) that fell outside the box.
    pub out_of_bounds: f64,
    pub out_of_bounds_abs: f64,
}

impl WignerGrid {
    pub fn zeros(spec: GridSpec, time: f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.len();
        Ok(WignerGrid {
            spec,
            density: vec![0.0; n],
            samples: 0,
            time,
            scale: 1.0,
            out_of_bounds: 0.0,
            out_of_bounds_abs: 0.0,
        })
    }

    /// Sum of `density * cell volume`; the grid's estimate of the norm.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn abs_mass(&self) -> f64 {
        self.density.iter().map(|d| d.abs()).sum::<f64>() * self.spec.cell_volume()
    }

    pub fn value_at(&self, pt: &PhaseSpacePoint) -> f64 {
        self.spec
            .locate(pt)
            .map(|idx| self.density[self.spec.flat(idx)])
            .unwrap_or(0.0)
    }

    /// Mean of an observable under the piecewise-constant density.
    pub fn moment(&self, f: impl Fn(&PhaseSpacePoint) -> f64) -> f64 {
        let vol = self.spec.cell_volume();
        self.density
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0.0)
            .map(|(i, d)| d * vol * f(&self.spec.center(self.spec.unflat(i))))
            .sum()
    }

    /// One row per non-zero cell: indices, cell centre, density (times `scale`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i_px,i_py,i_x,i_y,px,py,x,y,density\n");
        for (i, d) in self.density.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let idx = self.spec.unflat(i);
            let c = self.spec.center(idx);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                idx[0],
                idx[1],
                idx[2],
                idx[3],
                c.px,
                c.py,
                c.x,
                c.y,
                d * self.scale
            ));
        }
        out
    }

    /// Inverse of [`WignerGrid::to_csv`]; the grid geometry comes from `spec`.
    pub fn from_csv(spec: GridSpec, text: &str) -> Result<Self> {
        let mut grid = WignerGrid::zeros(spec, 0.0)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("i_px") || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |msg: &str| WignerError::Parse {
                line: lineno + 1,
                column: 1,
                message: msg.to_string(),
            };
            if cols.len() != 9 {
                return Err(bad("expected 9 comma-separated columns"));
            }
            let mut idx = [0usize; 4];
            for d in 0..4 {
                idx[d] = cols[d].trim().parse().map_err(|_| bad("bad cell index"))?;
                if idx[d] >= grid.spec.cells[d] {
                    return Err(bad("cell index outside grid"));
                }
            }
            let v: f64 = cols[8].trim().parse().map_err(|_| bad("bad density value"))?;
            let flat = grid.spec.flat(idx);
            grid.density[flat] = v;
        }
        Ok(grid)
    }
}
