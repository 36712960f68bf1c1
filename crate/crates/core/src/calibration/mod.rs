//! Least-squares calibration of trap and atomic parameters from measured curves.

mod endcap;
mod fits;
mod lm;
mod montecarlo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fieldsolver::FieldError;

pub use endcap::{
    endcap_correction, fit_endcap_mismatch, EndcapFit, EndcapResponse, ENDCAP_REFERENCE_V, RESPONSE_OFFSETS_MM,
};
pub use fits::{
    b_field_from_zeeman, fit_axial_curve, fit_exponential_decay, fit_lorentzian, fit_rabi_oscillation,
    fit_radial_curve, lorentzian, radial_frequency, AxialFit, RadialFit, MIN_RADIAL_SPAN,
};
pub use lm::{levenberg_marquardt, LmOptions};
pub use montecarlo::{monte_carlo, repeat_rng};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("fit did not converge after {iterations} iterations (best parameters {best:?})")]
    FitError { iterations: usize, best: Vec<f64> },
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("fitted slope {slope:.4e} is not positive")]
    NegativeSlope { slope: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Paired samples with optional 1σ uncertainties on `y`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, CalibrationError> {
        let d = Self { x, y, sigma: None };
        d.validate(0)?;
        Ok(d)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self, CalibrationError> {
        self.sigma = Some(sigma);
        self.validate(0)?;
        Ok(self)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, CalibrationError> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Checks lengths, finiteness and that there are more points than `n_params`.
    pub fn validate(&self, n_params: usize) -> Result<(), CalibrationError> {
        if self.x.len() != self.y.len() {
            return Err(CalibrationError::InvalidData(format!(
                "x has {} values but y has {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() {
                return Err(CalibrationError::InvalidData("sigma length differs from x".into()));
            }
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(CalibrationError::InvalidData("sigma values must be positive".into()));
            }
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(CalibrationError::InvalidData("values must be finite".into()));
        }
        if self.x.len() < n_params + 1 {
            return Err(CalibrationError::InvalidData(format!(
                "need at least {} points, got {}",
                n_params + 1,
                self.x.len()
            )));
        }
        Ok(())
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| 1.0 / s[i])
    }

    /// Reads two or three numeric columns (x, y, optional sigma); a header row is skipped.
    pub fn from_csv(text: &str) -> Result<Self, CalibrationError> {
        let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 || v.len() == 3 => {
                    x.push(v[0]);
                    y.push(v[1]);
                    if v.len() == 3 {
                        s.push(v[2]);
                    }
                }
                Ok(v) => {
                    return Err(CalibrationError::InvalidData(format!(
                        "line {}: expected 2 or 3 columns, got {}",
                        n + 1,
                        v.len()
                    )))
                }
                Err(_) if x.is_empty() => continue,
                Err(e) => return Err(CalibrationError::InvalidData(format!("line {}: {e}", n + 1))),
            }
        }
        let mut d = Self { x, y, sigma: None };
        if !s.is_empty() {
            if s.len() != d.x.len() {
                return Err(CalibrationError::InvalidData("sigma column is incomplete".into()));
            }
            d.sigma = Some(s);
        }
        d.validate(0)?;
        Ok(d)
    }
}

/// Outcome of a least-squares fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
    pub condition_number: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.params[i], self.sigmas[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.0)
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |p| p.1)
    }
}
