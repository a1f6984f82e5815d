//! Bundles everything a trajectory needs: fields, kernel, propagator and `f_w0`.

use rand::Rng;

use crate::error::{Result, WignerError};
use crate::initial::{Envelope, InitialWigner};
use crate::model::{FieldConfig, PhaseSpacePoint, PhysicalConstants};
use crate::stencil::{build_stencil, Discretization, Stencil};
use crate::trajectory::{IntegratorSettings, Propagator};

/// Redraws allowed when a sampling density vanishes at the drawn point.
pub const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct Problem {
    pub consts: PhysicalConstants,
    pub fields: FieldConfig,
    pub stencil: Stencil,
    pub propagator: Propagator,
    pub f0: InitialWigner,
    pub envelope: Envelope,
}

impl Problem {
    pub fn new(
        consts: PhysicalConstants,
        fields: FieldConfig,
        disc: Discretization,
        settings: IntegratorSettings,
        f0: InitialWigner,
    ) -> Result<Self> {
        let stencil = build_stencil(&disc, &fields, &consts)?;
        let propagator = Propagator::new(fields, consts, settings)?;
        let envelope = f0.envelope();
        Ok(Problem {
            consts,
            fields,
            stencil,
            propagator,
            f0,
            envelope,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.stencil.gamma
    }

    pub fn is_classical(&self) -> bool {
        self.stencil.classical
    }

    /// Draws `z ~ envelope` and returns `(z, envelope(z))`, redrawing where the
    /// density vanishes.
    pub fn draw_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(PhaseSpacePoint, f64)> {
        for _ in 0..MAX_REJECTIONS {
            let z = self.envelope.sample(rng);
            let p = self.envelope.density(&z);
            if p > 0.0 && p.is_finite() {
                return Ok((z, p));
            }
        }
        Err(WignerError::config(
            "initial",
            "sampling density vanished for every draw; rejection cap reached",
        ))
    }
}
