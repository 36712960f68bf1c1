//! Endcap mismatch from the voltage pairs that keep the ion position fixed.
//!
//! Near the reference point each endcap contributes a uniform axial field
//! `e_i V_i` at the ion. Holding the ion still while the left endcap moves
//! away from `V_ref` requires `V_R = V_ref + rho (V_L - V_ref)` with
//! `rho = E(0) / E(d)`: the ratio of the centre field of an endcap at its
//! nominal position to that of the right endcap displaced by `d`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::{CalibrationError, Dataset, FitResult};
use crate::fieldsolver::{field_at_center, solve_laplace, SolverSettings, TrapGeometry};

/// Endcap voltage at which the ion sits at the reference position, V.
pub const ENDCAP_REFERENCE_V: f64 = 192.0;

/// Right-endcap offsets (mm) solved to tabulate the centre-field response.
pub const RESPONSE_OFFSETS_MM: [f64; 3] = [0.0, 0.2, 0.4];

/// Centre field of one endcap per volt as a function of its outward offset,
/// stored as a polynomial of degree at most 2 in `ln E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndcapResponse {
    /// Coefficients of `ln E(offset_mm)`, lowest order first.
    pub ln_field_poly: Vec<f64>,
    pub offsets_mm: Vec<f64>,
    pub fields_v_per_mm: Vec<f64>,
}

impl EndcapResponse {
    /// Least-squares fit of `ln E` through sampled `(offset_mm, |E| per volt)`.
    pub fn from_samples(offsets_mm: &[f64], fields_v_per_mm: &[f64]) -> Result<Self, CalibrationError> {
        if offsets_mm.len() != fields_v_per_mm.len() || offsets_mm.len() < 2 {
            return Err(CalibrationError::InvalidData(
                "need at least two matching offset/field samples".into(),
            ));
        }
        if fields_v_per_mm.iter().any(|e| !(*e > 0.0)) {
            return Err(CalibrationError::InvalidData("endcap fields must be positive".into()));
        }
        let degree = (offsets_mm.len() - 1).min(2);
        let n = offsets_mm.len();
        let a = DMatrix::from_fn(n, degree + 1, |i, j| offsets_mm[i].powi(j as i32));
        let b = DVector::from_iterator(n, fields_v_per_mm.iter().map(|e| e.ln()));
        let c = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| CalibrationError::IllConditioned(e.to_string()))?;
        Ok(Self {
            ln_field_poly: c.iter().copied().collect(),
            offsets_mm: offsets_mm.to_vec(),
            fields_v_per_mm: fields_v_per_mm.to_vec(),
        })
    }

    /// `E(d) = e0 exp(-d / decay_mm)`.
    pub fn exponential(e0: f64, decay_mm: f64) -> Result<Self, CalibrationError> {
        if !(e0 > 0.0) || !(decay_mm > 0.0) {
            return Err(CalibrationError::InvalidData("e0 and decay length must be positive".into()));
        }
        Ok(Self {
            ln_field_poly: vec![e0.ln(), -1.0 / decay_mm],
            offsets_mm: Vec::new(),
            fields_v_per_mm: Vec::new(),
        })
    }

    /// Solves the right endcap alone at each offset of `offsets_mm` added to
    /// the geometry's own offset and records `|E_z|` at the trap centre.
    pub fn from_geometry(
        geometry: &TrapGeometry,
        offsets_mm: &[f64],
        settings: &SolverSettings,
    ) -> Result<Self, CalibrationError> {
        let fields = offsets_mm
            .par_iter()
            .map(|&off| {
                let mut g = geometry.clone();
                g.endcap_r_offset_mm += off;
                let grid = Arc::new(g.voxelize()?);
                let v = BTreeMap::from([("endcap_r".to_string(), 1.0)]);
                let f = solve_laplace(&grid, &v, settings)?;
                Ok(field_at_center(&f)[2].abs() / f.drive_volts)
            })
            .collect::<Result<Vec<f64>, crate::fieldsolver::FieldError>>()?;
        Self::from_samples(offsets_mm, &fields)
    }

    pub fn ln_field(&self, offset_mm: f64) -> f64 {
        self.ln_field_poly.iter().rev().fold(0.0, |acc, c| acc * offset_mm + c)
    }

    pub fn field(&self, offset_mm: f64) -> f64 {
        self.ln_field(offset_mm).exp()
    }

    /// `E(0) / E(d)` for a displacement `d` in mm.
    pub fn ratio(&self, d_mm: f64) -> f64 {
        (self.ln_field(0.0) - self.ln_field(d_mm)).exp()
    }
}

/// Right endcap voltage that holds the ion in place for left voltage `v_l`.
pub fn endcap_correction(v_l: f64, d_um: f64, response: &EndcapResponse, v_ref: f64) -> f64 {
    v_ref + response.ratio(d_um * 1e-3) * (v_l - v_ref)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndcapFit {
    /// Outward displacement of the right endcap, μm. Zero when degenerate.
    pub d_um: f64,
    pub sigma_um: f64,
    /// True when the data are consistent with no displacement.
    pub degenerate: bool,
    /// Two-sigma bound on `|d|` when degenerate, μm.
    pub bound_um: f64,
    pub fit: FitResult,
}

/// Fits the right-endcap displacement to `(V_L, V_R)` pairs that keep the
/// ion centred.
pub fn fit_endcap_mismatch(
    data: &Dataset,
    response: &EndcapResponse,
    v_ref: f64,
) -> Result<EndcapFit, CalibrationError> {
    data.validate(1)?;
    if data.len() < 3 {
        return Err(CalibrationError::InvalidData(format!("need at least 3 voltage pairs, got {}", data.len())));
    }
    let res = |p: &[f64]| {
        (0..data.len())
            .map(|i| (endcap_correction(data.x[i], p[0], response, v_ref) - data.y[i]) * data.weight(i))
            .collect::<Vec<f64>>()
    };
    let opts = LmOptions {
        jacobian_min_step: 1e-3,
        ..LmOptions::default()
    };
    let fit = levenberg_marquardt(res, &[0.0], &["d_um"], &opts)?;
    let (d, sigma) = (fit.params[0], fit.sigmas[0]);
    let degenerate = d.abs() <= 2.0 * sigma;
    Ok(EndcapFit {
        d_um: if degenerate { 0.0 } else { d },
        sigma_um: sigma,
        degenerate,
        bound_um: if degenerate { d.abs() + 2.0 * sigma } else { 0.0 },
        fit,
    })
}
