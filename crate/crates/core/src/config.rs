//! Run configuration: a strict TOML schema with defaults and field-path errors.
//!
//! ```toml
//! seed = 7
//! final_time = 1.0
//!
//! [fields]
//! b0 = 0.5
//! b1 = 0.05
//!
//! [initial]
//! kind = "gaussian_packet"
//! center = [0.5, 0.0, 0.0, 0.0]   # px, py, x, y
//! sigma_p = 0.5
//! sigma_x = 0.5
//!
//! [observable]
//! kind = "mean_x"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backward::{BackwardPlan, SamplingDensity};
use crate::ensemble::SliceSchedule;
use crate::error::{Result, WignerError};
use crate::forward::DEFAULT_EVENT_CAP;
use crate::grid::{GridSpec, WignerGrid};
use crate::initial::{GaussianPacket, InitialWigner, SuperpositionSurrogate, TabulatedWigner};
use crate::model::{FieldConfig, Observable, PhaseSpacePoint, PhysicalConstants};
use crate::oracle::fredholm::FredholmSpec;
use crate::oracle::{PhaseRule, QuadratureSpec, MAX_ORACLE_ORDER};
use crate::problem::Problem;
use crate::stencil::Discretization;
use crate::trajectory::IntegratorSettings;

/// Highest event cap whose weights `41^n` stay finite in `f64`.
pub const MAX_EVENT_CAP: u32 = 180;

fn one() -> f64 {
    1.0
}

fn default_separation() -> [f64; 4] {
    [0.0, 0.0, 3.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    GaussianPacket {
        #[serde(default)]
        center: [f64; 4],
        #[serde(default = "one")]
        sigma_p: f64,
        #[serde(default = "one")]
        sigma_x: f64,
    },
    /// Two packets at `center ± separation / 2` with a cosine cross term of
    /// the given phase at `center`.
    TwoPacketSuperpositionSurrogate {
        #[serde(default)]
        center: [f64; 4],
        #[serde(default = "default_separation")]
        separation: [f64; 4],
        #[serde(default = "one")]
        sigma_p: f64,
        #[serde(default = "one")]
        sigma_x: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Grid CSV as written by the `slice` command; `path` is relative to the
    /// configuration file.
    TabulatedGrid {
        path: PathBuf,
        lower: [f64; 4],
        upper: [f64; 4],
        cells: [usize; 4],
    },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::GaussianPacket {
            center: [0.0; 4],
            sigma_p: 1.0,
            sigma_x: 1.0,
        }
    }
}

impl InitialConfig {
    fn validate(&self, consts: &PhysicalConstants) -> Result<()> {
        match self {
            InitialConfig::TabulatedGrid {
                path,
                lower,
                upper,
                cells,
            } => {
                if path.as_os_str().is_empty() {
                    return Err(WignerError::config("initial.path", "must name a grid CSV file"));
                }
                GridSpec::new(*lower, *upper, *cells)
                    .map(|_| ())
                    .map_err(|e| rename_field(e, "grid.", "initial."))
            }
            _ => self.build(consts, Path::new(".")).map(|_| ()),
        }
    }

    /// Builds the initial state, reading tabulated grids relative to `base`.
    pub fn build(&self, consts: &PhysicalConstants, base: &Path) -> Result<InitialWigner> {
        Ok(match self {
            InitialConfig::GaussianPacket {
                center,
                sigma_p,
                sigma_x,
            } => InitialWigner::GaussianPacket(GaussianPacket::new(
                PhaseSpacePoint::from_array(*center),
                *sigma_p,
                *sigma_x,
            )?),
            InitialConfig::TwoPacketSuperpositionSurrogate {
                center,
                separation,
                sigma_p,
                sigma_x,
                phase,
            } => InitialWigner::TwoPacketSuperpositionSurrogate(SuperpositionSurrogate::new(
                PhaseSpacePoint::from_array(*center),
                PhaseSpacePoint::from_array(*separation),
                *sigma_p,
                *sigma_x,
                *phase,
                consts.hbar,
            )?),
            InitialConfig::TabulatedGrid {
                path,
                lower,
                upper,
                cells,
            } => {
                let spec = GridSpec::new(*lower, *upper, *cells).map_err(|e| rename_field(e, "grid.", "initial."))?;
                let full = base.join(path);
                let text =
                    std::fs::read_to_string(&full).map_err(|e| WignerError::Io(format!("{}: {e}", full.display())))?;
                InitialWigner::TabulatedGrid(TabulatedWigner::new(WignerGrid::from_csv(spec, &text)?)?)
            }
        })
    }
}

fn rename_field(e: WignerError, from: &str, to: &str) -> WignerError {
    match e {
        WignerError::Config { field, message } => WignerError::Config {
            field: field.replacen(from, to, 1),
            message,
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub trajectories: u64,
    pub event_cap: u32,
    /// Write one CSV row per trajectory.
    pub dump_samples: bool,
    /// Optional grid for the end-time density.
    pub grid: Option<GridSpec>,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            trajectories: 100_000,
            event_cap: DEFAULT_EVENT_CAP,
            dump_samples: false,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackwardConfig {
    pub max_order: usize,
    pub trajectories_per_order: u64,
    /// `N_n = round(trajectories_per_order · ratio^n)` when set.
    pub geometric_ratio: Option<f64>,
    /// Explicit budgets; overrides the two fields above.
    pub per_order: Option<Vec<u64>>,
    pub sampling: SamplingDensity,
}

impl Default for BackwardConfig {
    fn default() -> Self {
        BackwardConfig {
            max_order: 2,
            trajectories_per_order: 10_000,
            geometric_ratio: None,
            per_order: None,
            sampling: SamplingDensity::AbsF0,
        }
    }
}

fn default_slice_observables() -> Vec<Observable> {
    vec![
        Observable::ConstantOne,
        Observable::MeanX,
        Observable::MeanY,
        Observable::MeanPx,
        Observable::MeanPy,
        Observable::KineticEnergy,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceConfig {
    /// Defaults to the whole run (a single slice).
    pub slice_length: Option<f64>,
    pub trajectories_per_slice: u64,
    pub grid: Option<GridSpec>,
    pub observables: Vec<Observable>,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            slice_length: None,
            trajectories_per_slice: 100_000,
            grid: None,
            observables: default_slice_observables(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub max_order: usize,
    pub phase_nodes: usize,
    pub time_nodes: usize,
    pub rule: PhaseRule,
    /// Also run the dense-matrix exchange check.
    pub fredholm: Option<FredholmSpec>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        OracleConfig {
            max_order: MAX_ORACLE_ORDER,
            phase_nodes: q.phase_nodes,
            time_nodes: q.time_nodes,
            rule: q.rule,
            fredholm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub final_time: f64,
    pub constants: PhysicalConstants,
    pub fields: FieldConfig,
    pub discretization: Discretization,
    pub initial: InitialConfig,
    pub observable: Observable,
    pub integrator: IntegratorSettings,
    pub forward: ForwardConfig,
    pub backward: BackwardConfig,
    pub slice: SliceConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            final_time: 1.0,
            constants: PhysicalConstants::default(),
            fields: FieldConfig::default(),
            discretization: Discretization::default(),
            initial: InitialConfig::default(),
            observable: Observable::ConstantOne,
            integrator: IntegratorSettings::default(),
            forward: ForwardConfig::default(),
            backward: BackwardConfig::default(),
            slice: SliceConfig::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map(|i| before.len() - i).unwrap_or(before.len() + 1);
    (line, col)
}

/// Parses and validates a configuration document. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        WignerError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return Err(WignerError::config("final_time", "must be finite and > 0"));
        }
        self.constants.validate()?;
        self.fields.validate()?;
        self.discretization.validate()?;
        self.integrator.validate(&self.fields)?;
        self.observable.validate()?;
        self.initial.validate(&self.constants)?;
        if self.forward.trajectories == 0 || self.forward.trajectories > u32::MAX as u64 {
            return Err(WignerError::config("forward.trajectories", "must be in 1..=2^32-1"));
        }
        if self.forward.event_cap > MAX_EVENT_CAP {
            return Err(WignerError::config(
                "forward.event_cap",
                format!("must be <= {MAX_EVENT_CAP} (41^n overflows beyond)"),
            ));
        }
        if let Some(g) = &self.forward.grid {
            g.validate().map_err(|e| rename_field(e, "grid.", "forward.grid."))?;
        }
        if let Some(r) = self.backward.geometric_ratio {
            if !(r.is_finite() && r > 0.0) {
                return Err(WignerError::config(
                    "backward.geometric_ratio",
                    "must be finite and > 0",
                ));
            }
        }
        self.backward_plan()?.validate()?;
        self.slice_schedule().validate()?;
        if let Some(g) = &self.slice.grid {
            g.validate().map_err(|e| rename_field(e, "grid.", "slice.grid."))?;
        }
        for a in &self.slice.observables {
            a.validate()?;
        }
        self.quadrature().validate()?;
        if let Some(f) = &self.oracle.fredholm {
            f.validate()?;
        }
        Ok(())
    }

    /// `b1 = 0`: no scattering, trajectories are purely classical.
    pub fn is_classical(&self) -> bool {
        self.fields.is_classical()
    }

    /// Builds the solver context; tabulated grids are read relative to `base`.
    pub fn problem(&self, base: &Path) -> Result<Problem> {
        Problem::new(
            self.constants,
            self.fields,
            self.discretization,
            self.integrator,
            self.initial.build(&self.constants, base)?,
        )
    }

    pub fn backward_plan(&self) -> Result<BackwardPlan> {
        let b = &self.backward;
        let per_order = match (&b.per_order, b.geometric_ratio) {
            (Some(v), _) => v.clone(),
            (None, Some(r)) => (0..=b.max_order)
                .map(|n| (b.trajectories_per_order as f64 * r.powi(n as i32)).round().max(1.0) as u64)
                .collect(),
            (None, None) => vec![b.trajectories_per_order; b.max_order + 1],
        };
        let plan = BackwardPlan {
            max_order: b.max_order,
            per_order,
            final_time: self.final_time,
            sampling: b.sampling,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn slice_schedule(&self) -> SliceSchedule {
        SliceSchedule {
            total_time: self.final_time,
            slice_length: self.slice.slice_length.unwrap_or(self.final_time),
            trajectories_per_slice: self.slice.trajectories_per_slice,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            phase_nodes: self.oracle.phase_nodes,
            time_nodes: self.oracle.time_nodes,
            rule: self.oracle.rule,
        }
    }
}
