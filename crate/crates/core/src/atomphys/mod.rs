//! Atomic response models for Yb and Yb+.
//!
//! Line shapes, saturation, Rabi flopping and photon-count statistics. Laser
//! quantities use the lab units of the experiment (μW, μm, MHz); conversions to
//! SI happen inside each function.

mod isotopes;
mod levels;

pub use isotopes::{neutral_spectrum, Isotope, IsotopeTable, NEUTRAL_LINEWIDTH_MHZ};
pub use levels::LevelScheme171;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{nm_to_thz, PLANCK, SPEED_OF_LIGHT, UM};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtomError {
    #[error("invalid transition line: {0}")]
    InvalidLine(String),
    #[error("invalid laser beam: {0}")]
    InvalidBeam(String),
    #[error("invalid isotope table: {0}")]
    InvalidTable(String),
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Measured 369 nm cooling wavelengths, nm.
pub const YB174_COOLING_NM: f64 = 369.5249;
pub const YB171_COOLING_NM: f64 = 369.5259;
/// Natural linewidth of the 2S1/2 - 2P1/2 line, MHz.
pub const ION_LINEWIDTH_MHZ: f64 = 19.6;
/// First-step (1S0 - 1P1) laser frequencies used for isotope-selective loading, THz.
pub const YB174_FIRST_STEP_THZ: f64 = 751.526_673;
pub const YB171_FIRST_STEP_THZ: f64 = 751.527_573;
/// Ground-state Zeeman slope of the F = 1 manifold, MHz/G.
pub const ZEEMAN_MHZ_PER_GAUSS: f64 = 1.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine<T> {
    pub label: String,
    pub frequency_thz: T,
    /// Natural linewidth (FWHM), MHz.
    pub gamma_mhz: T,
}

impl<T: Real> TransitionLine<T> {
    pub fn new(label: impl Into<String>, frequency_thz: T, gamma_mhz: T) -> Result<Self, AtomError> {
        if !(gamma_mhz > T::zero()) || !gamma_mhz.is_finite() {
            return Err(AtomError::InvalidLine(format!("linewidth must be positive, got {gamma_mhz}")));
        }
        if !(frequency_thz > T::zero()) || !frequency_thz.is_finite() {
            return Err(AtomError::InvalidLine(format!("frequency must be positive, got {frequency_thz}")));
        }
        Ok(Self {
            label: label.into(),
            frequency_thz,
            gamma_mhz,
        })
    }

    pub fn yb174_cooling() -> Self {
        Self {
            label: "174Yb+ 2S1/2-2P1/2".into(),
            frequency_thz: T::lit(nm_to_thz(YB174_COOLING_NM)),
            gamma_mhz: T::lit(ION_LINEWIDTH_MHZ),
        }
    }

    pub fn yb171_cooling() -> Self {
        Self {
            label: "171Yb+ 2S1/2-2P1/2".into(),
            frequency_thz: T::lit(nm_to_thz(YB171_COOLING_NM)),
            gamma_mhz: T::lit(ION_LINEWIDTH_MHZ),
        }
    }

    pub fn wavelength_m(&self) -> T {
        T::lit(SPEED_OF_LIGHT) / (self.frequency_thz * T::lit(1e12))
    }

    /// Wavenumber `2 pi / lambda`, 1/m.
    pub fn wavenumber(&self) -> T {
        T::lit(2.0) * T::PI() / self.wavelength_m()
    }

    /// Decay rate `2 pi gamma`, 1/s.
    pub fn decay_rate(&self) -> T {
        T::lit(2.0) * T::PI() * self.gamma_mhz * T::lit(1e6)
    }

    /// Two-level saturation intensity `pi h c Gamma / (3 lambda^3)`, W/m^2.
    pub fn saturation_intensity(&self) -> T {
        let l = self.wavelength_m();
        T::PI() * T::lit(PLANCK * SPEED_OF_LIGHT) * self.decay_rate() / (T::lit(3.0) * l * l * l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Pi,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserBeam<T> {
    pub power_uw: T,
    /// Reported beam diameter, μm.
    pub diameter_um: T,
    /// Laser minus atomic frequency, MHz.
    pub detuning_mhz: T,
    pub polarization: Polarization,
    /// Unit propagation vector.
    pub direction: [T; 3],
}

impl<T: Real> LaserBeam<T> {
    pub fn new(power_uw: T, diameter_um: T, detuning_mhz: T) -> Result<Self, AtomError> {
        let b = Self {
            power_uw,
            diameter_um,
            detuning_mhz,
            polarization: Polarization::Pi,
            direction: [T::zero(), T::zero(), T::one()],
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_direction(mut self, d: [T; 3]) -> Result<Self, AtomError> {
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(AtomError::InvalidBeam("direction must be a non-zero vector".into()));
        }
        self.direction = [d[0] / n, d[1] / n, d[2] / n];
        Ok(self)
    }

    pub fn with_polarization(mut self, p: Polarization) -> Self {
        self.polarization = p;
        self
    }

    pub fn validate(&self) -> Result<(), AtomError> {
        if !(self.power_uw >= T::zero()) {
            return Err(AtomError::InvalidBeam(format!("power must be >= 0, got {}", self.power_uw)));
        }
        if !(self.diameter_um > T::zero()) {
            return Err(AtomError::InvalidBeam(format!("diameter must be > 0, got {}", self.diameter_um)));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(AtomError::InvalidBeam("detuning must be finite".into()));
        }
        Ok(())
    }

    /// Gaussian waist taken from the reported diameter.
    pub fn waist_m(&self) -> T {
        self.diameter_um * T::lit(WAIST_PER_DIAMETER * UM)
    }

    /// Peak intensity `2 P / (pi w^2)`, W/m^2.
    pub fn peak_intensity(&self) -> T {
        let w = self.waist_m();
        T::lit(2.0) * self.power_uw * T::lit(1e-6) / (T::PI() * w * w)
    }
}

/// Waist-to-diameter convention: the reported diameter is read as `2 w`.
pub const WAIST_PER_DIAMETER: f64 = 0.5;

/// Saturation parameter `I / I_sat`.
pub fn saturation<T: Real>(beam: &LaserBeam<T>, line: &TransitionLine<T>) -> T {
    beam.peak_intensity() / line.saturation_intensity()
}

/// Scattering rate `(gamma/2) s / (1 + s + (2 delta / gamma)^2)` in units of
/// `gamma` (MHz) for each detuning on the grid (MHz).
pub fn lorentzian_spectrum<T: Real>(line: &TransitionLine<T>, s: T, detunings_mhz: &[T]) -> Vec<T> {
    let g = line.gamma_mhz;
    let two = T::lit(2.0);
    detunings_mhz
        .iter()
        .map(|&d| {
            let x = two * d / g;
            g / two * s / (T::one() + s + x * x)
        })
        .collect()
}

/// Power-broadened FWHM `gamma sqrt(1 + s)`, MHz.
pub fn broadened_fwhm<T: Real>(line: &TransitionLine<T>, s: T) -> T {
    line.gamma_mhz * (T::one() + s).sqrt()
}

/// Saturation parameter at which the 171 fluorescence peaks: the 369 nm beam
/// at 27 μW with a 71 μm diameter.
pub fn dark_state_saturation() -> f64 {
    let beam = LaserBeam::new(27.0, 71.0, 0.0).expect("valid beam");
    saturation(&beam, &TransitionLine::<f64>::yb171_cooling())
}

/// Relative 171 fluorescence `s / (1 + s/s_dark)^2`: rises, peaks at `s_dark`, then falls.
pub fn fluorescence_vs_power_171<T: Real>(s: T) -> Result<T, AtomError> {
    fluorescence_with_dark_state(s, T::lit(dark_state_saturation()))
}

pub fn fluorescence_with_dark_state<T: Real>(s: T, s_dark: T) -> Result<T, AtomError> {
    if !(s >= T::zero()) {
        return Err(AtomError::DomainError(format!("saturation must be >= 0, got {s}")));
    }
    if !(s_dark > T::zero()) {
        return Err(AtomError::DomainError(format!("s_dark must be > 0, got {s_dark}")));
    }
    let r = T::one() + s / s_dark;
    Ok(s / (r * r))
}

/// Saturating 174 fluorescence `s / (1 + s)`.
pub fn fluorescence_vs_power_174<T: Real>(s: T) -> T {
    s / (T::one() + s)
}

/// Excited-state population after a square pulse of length `t`.
pub fn rabi_population<T: Real>(rabi_freq: T, detuning: T, t: T) -> Result<T, AtomError> {
    if !(t >= T::zero()) {
        return Err(AtomError::DomainError(format!("pulse length must be >= 0, got {t}")));
    }
    let w2 = rabi_freq * rabi_freq + detuning * detuning;
    if w2 == T::zero() {
        return Ok(T::zero());
    }
    let s = (w2.sqrt() * t / T::lit(2.0)).sin();
    Ok(rabi_freq * rabi_freq / w2 * s * s)
}

/// The three Δm = -1, 0, +1 microwave lines (GHz) at field `b_gauss`.
pub fn zeeman_mw_spectrum<T: Real>(b_gauss: T, f0_ghz: T) -> Result<[T; 3], AtomError> {
    if !(b_gauss >= T::zero()) {
        return Err(AtomError::DomainError(format!("field must be >= 0, got {b_gauss}")));
    }
    let shift = T::lit(ZEEMAN_MHZ_PER_GAUSS) * b_gauss / T::lit(1e3);
    Ok([f0_ghz - shift, f0_ghz, f0_ghz + shift])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitState {
    Bright,
    Dark,
}

/// Count rates seen by the detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRates {
    pub bright_hz: f64,
    pub background_hz: f64,
    /// Count rate of an ion in the dark state (off-resonant scattering).
    pub leakage_hz: f64,
    /// Time constant with which detection light pumps a bright ion dark, s.
    pub pump_tau_s: f64,
}

impl Default for DetectionRates {
    fn default() -> Self {
        Self {
            bright_hz: 300e3,
            background_hz: 20e3,
            leakage_hz: 2e3,
            pump_tau_s: 1.5e-3,
        }
    }
}

/// Mean number of detected photons in a window of length `t_detect`.
pub fn expected_counts(state: QubitState, t_detect: f64, rates: &DetectionRates) -> Result<f64, AtomError> {
    if !(t_detect > 0.0) {
        return Err(AtomError::DomainError(format!("detection time must be > 0, got {t_detect}")));
    }
    let all = [rates.bright_hz, rates.background_hz, rates.leakage_hz, rates.pump_tau_s];
    if all.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(AtomError::DomainError("rates must be finite and >= 0".into()));
    }
    let signal = match state {
        QubitState::Bright if rates.pump_tau_s > 0.0 => {
            rates.bright_hz * rates.pump_tau_s * (1.0 - (-t_detect / rates.pump_tau_s).exp())
        }
        QubitState::Bright => 0.0,
        QubitState::Dark => rates.leakage_hz * t_detect,
    };
    Ok(rates.background_hz * t_detect + signal)
}

/// Poisson draw of the detected counts, reproducible for a given seed.
pub fn detection_counts(state: QubitState, t_detect: f64, rates: &DetectionRates, seed: u64) -> Result<u64, AtomError> {
    let mean = expected_counts(state, t_detect, rates)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(poisson(mean, &mut rng))
}

/// Poisson sample that tolerates a zero mean.
pub fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}
