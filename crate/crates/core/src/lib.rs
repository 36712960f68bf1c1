//! Simulation and calibration toolkit for blade-type linear Paul traps.
//!
//! The crate follows the design loop of a blade trap: a finite-difference
//! field solve of the electrode geometry ([`fieldsolver`]), extraction of the
//! harmonic coefficients that feed the analytic trap model ([`trapmodel`]),
//! stability and secular-frequency analysis, and full time-dependent ion
//! dynamics ([`dynamics`]). On the operations side it provides ion-chain
//! equilibria ([`crystal`]), atomic response models ([`atomphys`]), RF and
//! microwave chain bookkeeping ([`rfchain`]), a deterministic pulse-sequence
//! engine ([`sequencer`]) and the least-squares fits used to calibrate a
//! running trap ([`calibration`]).
//!
//! The analytic modules are generic over the scalar type through [`Real`];
//! the aliases below fix the common `f64` instantiations.

pub mod atomphys;
pub mod calibration;
pub mod constants;
pub mod crystal;
pub mod dynamics;
pub mod fieldsolver;
pub mod real;
pub mod rfchain;
pub mod scan;
pub mod sequencer;
pub mod trapmodel;

use serde::{Deserialize, Serialize};

pub use real::Real;
pub use scan::ScanRange;

/// Principal trap axis. `Z` is the axial (endcap) direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}' (expected x, y or z)")),
        }
    }
}

pub type TrapCoefficients = trapmodel::TrapCoefficients<f64>;
pub type DriveSettings = trapmodel::DriveSettings<f64>;
pub type TrapModel = trapmodel::TrapModel<f64>;
pub type IonSpecies = trapmodel::IonSpecies<f64>;
pub type MathieuParameters = trapmodel::MathieuParameters<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type StrayField = dynamics::StrayField<f64>;
pub type TransitionLine = atomphys::TransitionLine<f64>;
pub type LaserBeam = atomphys::LaserBeam<f64>;
pub type ResonatorModel = rfchain::ResonatorModel<f64>;
pub type MixerPlan = rfchain::MixerPlan<f64>;

/// Single-precision variants, mainly for memory-bound sweeps.
pub mod f32 {
    pub type TrapModel = crate::trapmodel::TrapModel<f32>;
    pub type IonSpecies = crate::trapmodel::IonSpecies<f32>;
    pub type Trajectory = crate::dynamics::Trajectory<f32>;
}
