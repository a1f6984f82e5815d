//! Monte Carlo solvers for gauge-invariant Wigner transport of a 2D electron
//! in linear electromagnetic fields.
//!
//! The forward solver follows signed particles from the initial state, the
//! backward solver evaluates the resolvent series from a final phase-space
//! point, and the oracle computes the low-order terms by quadrature.

pub mod backward;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod forward;
pub mod grid;
pub mod initial;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod stencil;
pub mod trajectory;

pub use backward::{run_backward, BackwardPlan, BackwardResult, SamplingDensity, TermEstimate};
pub use config::{parse_config, RunConfig};
pub use ensemble::{run_slices, SliceSchedule};
pub use error::{Result, WignerError};
pub use forward::{run_forward_ensemble, ForwardEstimate, ForwardRequest};
pub use grid::{GridSpec, WignerGrid};
pub use initial::InitialWigner;
pub use model::{FieldConfig, Observable, PhaseSpacePoint, PhysicalConstants};
pub use problem::Problem;
pub use stencil::{build_stencil, Discretization, Stencil};
pub use trajectory::{IntegratorMethod, IntegratorSettings, Propagator};
