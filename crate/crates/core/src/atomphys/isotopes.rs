use serde::{Deserialize, Serialize};

use super::AtomError;
use crate::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, SPEED_OF_LIGHT};

const BUILTIN: &str = include_str!("../../../../config/isotopes_yb.json");

/// Natural linewidth of the neutral 1S0 - 1P1 line, MHz.
pub const NEUTRAL_LINEWIDTH_MHZ: f64 = 29.0;
/// Optical frequency of the neutral first-step line, MHz.
const NEUTRAL_LINE_MHZ: f64 = 751.526_673e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Isotope {
    pub label: String,
    pub mass_u: f64,
    pub abundance: f64,
    /// Line position relative to the reference isotope, MHz.
    pub offset_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsotopeTable {
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub reference_isotope: String,
    pub isotopes: Vec<Isotope>,
}

impl Default for IsotopeTable {
    fn default() -> Self {
        Self::from_json(BUILTIN).expect("built-in isotope table is valid")
    }
}

impl IsotopeTable {
    pub fn from_json(text: &str) -> Result<Self, AtomError> {
        let t: Self =
            serde_json::from_str(text).map_err(|e| AtomError::InvalidTable(format!("isotope table JSON: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), AtomError> {
        if self.isotopes.is_empty() {
            return Err(AtomError::InvalidTable("no isotopes".into()));
        }
        for i in &self.isotopes {
            if !(i.mass_u > 0.0) || !(i.abundance >= 0.0) || !i.offset_mhz.is_finite() {
                return Err(AtomError::InvalidTable(format!("bad entry '{}'", i.label)));
            }
        }
        let sum: f64 = self.isotopes.iter().map(|i| i.abundance).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(AtomError::InvalidTable(format!("abundances sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&Isotope> {
        self.isotopes.iter().find(|i| i.label == label)
    }
}

/// Most probable speed in an effusive beam, `sqrt(3 k T / m)`, m/s.
pub fn effusive_speed(mass_u: f64, temp_k: f64) -> f64 {
    (3.0 * BOLTZMANN * temp_k / (mass_u * ATOMIC_MASS_UNIT)).sqrt()
}

/// Doppler shift (MHz) and Gaussian width (MHz, standard deviation) for
/// atoms crossing the laser at `theta_deg`.
pub fn doppler_profile(mass_u: f64, temp_k: f64, theta_deg: f64) -> (f64, f64) {
    let c = theta_deg.to_radians().cos();
    let shift = NEUTRAL_LINE_MHZ * effusive_speed(mass_u, temp_k) / SPEED_OF_LIGHT * c;
    let sigma_v = (BOLTZMANN * temp_k / (mass_u * ATOMIC_MASS_UNIT)).sqrt();
    (shift, NEUTRAL_LINE_MHZ * sigma_v / SPEED_OF_LIGHT * c.abs())
}

fn lorentz(x: f64, gamma: f64) -> f64 {
    let h = gamma / 2.0;
    h / std::f64::consts::PI / (x * x + h * h)
}

/// Area-normalised Voigt profile by Simpson quadrature over the Gaussian.
fn voigt(x: f64, sigma: f64, gamma: f64) -> f64 {
    if sigma < 1e-6 * gamma {
        return lorentz(x, gamma);
    }
    const N: usize = 240;
    let span = 6.0 * sigma;
    let h = 2.0 * span / N as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut acc = 0.0;
    for k in 0..=N {
        let g = -span + k as f64 * h;
        let w = if k == 0 || k == N {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * norm * (-0.5 * g * g / (sigma * sigma)).exp() * lorentz(x - g, gamma);
    }
    acc * h / 3.0
}

/// Abundance-weighted first-step fluorescence versus laser frequency
/// (MHz relative to the reference isotope line).
pub fn neutral_spectrum(
    table: &IsotopeTable,
    theta_oven_deg: f64,
    oven_temp_k: f64,
    laser_mhz: &[f64],
) -> Result<Vec<f64>, AtomError> {
    if !(theta_oven_deg > 0.0 && theta_oven_deg <= 180.0) {
        return Err(AtomError::DomainError(format!("oven angle must lie in (0, 180], got {theta_oven_deg}")));
    }
    if !(oven_temp_k > 0.0) {
        return Err(AtomError::DomainError(format!("oven temperature must be > 0, got {oven_temp_k}")));
    }
    table.validate()?;
    let profiles: Vec<(f64, f64, f64)> = table
        .isotopes
        .iter()
        .map(|iso| {
            let (shift, sigma) = doppler_profile(iso.mass_u, oven_temp_k, theta_oven_deg);
            (iso.abundance, iso.offset_mhz + shift, sigma)
        })
        .collect();
    Ok(laser_mhz
        .iter()
        .map(|&f| {
            profiles
                .iter()
                .map(|&(a, c, s)| a * voigt(f - c, s, NEUTRAL_LINEWIDTH_MHZ))
                .sum()
        })
        .collect())
}
