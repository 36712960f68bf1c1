use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{FieldError, PotentialField};
use crate::Axis;

/// Default half-width of the axial fit window, mm.
pub const AXIAL_WINDOW_MM: f64 = 0.5;
/// Default half-width of the radial fit windows, mm.
pub const RADIAL_WINDOW_MM: f64 = 0.2;

const MIN_SAMPLES: usize = 7;

/// Quadratic fit `V(s) = c0 + c1 s + c2 s^2` along one axis through the centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientFit {
    pub axis: crate::Axis,
    /// `2 c2 / drive_volts`, i.e. the harmonic coefficient per applied volt, mm^-2.
    pub coefficient_per_mm2: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub residual_rms: f64,
    pub samples: usize,
    pub window_mm: f64,
}

/// Default window for `axis`, widened to at least ±3 voxels on coarse grids.
pub fn default_window_mm(axis: Axis, spacing_mm: f64) -> f64 {
    let base = match axis {
        Axis::Z => AXIAL_WINDOW_MM,
        Axis::X | Axis::Y => RADIAL_WINDOW_MM,
    };
    base.max(3.0 * spacing_mm)
}

pub fn extract_coefficient(field: &PotentialField, axis: Axis, window_mm: f64) -> Result<CoefficientFit, FieldError> {
    if !(window_mm > 0.0) {
        return Err(FieldError::FitError(format!("window must be positive, got {window_mm}")));
    }
    let grid = &field.grid;
    let h = grid.spacing_mm();
    let c = grid.center_voxel();
    let d = axis.index();
    let reach = (window_mm / h + 1e-9).floor() as usize;
    if reach > c[d] || c[d] + reach >= grid.shape()[d] {
        return Err(FieldError::FitError(format!("window ±{window_mm} mm leaves the grid")));
    }
    let n = 2 * reach + 1;
    if n < MIN_SAMPLES {
        return Err(FieldError::FitError(format!(
            "window ±{window_mm} mm spans {n} samples, need at least {MIN_SAMPLES}"
        )));
    }
    let mut design = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (row, m) in (c[d] - reach..=c[d] + reach).enumerate() {
        let mut v = c;
        v[d] = m;
        let s = grid.position(v[0], v[1], v[2])[d];
        design[(row, 0)] = 1.0;
        design[(row, 1)] = s;
        design[(row, 2)] = s * s;
        rhs[row] = field.at(v[0], v[1], v[2]);
    }
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e12 {
        return Err(FieldError::FitError(format!("ill-conditioned design (cond = {cond:.3e})")));
    }
    let coef = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| FieldError::FitError(e.to_string()))?;
    let resid = &design * &coef - &rhs;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(CoefficientFit {
        axis,
        coefficient_per_mm2: 2.0 * coef[2] / field.drive_volts,
        c0: coef[0],
        c1: coef[1],
        c2: coef[2],
        residual_rms: rms,
        samples: n,
        window_mm,
    })
}

/// Coefficients along all three axes with default windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtractedCoefficients {
    /// Along z.
    pub alpha: f64,
    /// Along y.
    pub beta: f64,
    /// Along x.
    pub gamma: f64,
    pub fits: [CoefficientFit; 3],
}

impl ExtractedCoefficients {
    /// `|alpha + beta + gamma| / max(|alpha|, |beta|, |gamma|)`.
    pub fn closure(&self) -> f64 {
        let m = self.alpha.abs().max(self.beta.abs()).max(self.gamma.abs());
        if m == 0.0 {
            0.0
        } else {
            (self.alpha + self.beta + self.gamma).abs() / m
        }
    }
}

pub fn extract_coefficients(field: &PotentialField) -> Result<ExtractedCoefficients, FieldError> {
    let h = field.grid.spacing_mm();
    let fits = [Axis::X, Axis::Y, Axis::Z].map(|a| extract_coefficient(field, a, default_window_mm(a, h)));
    let [x, y, z] = fits;
    let (x, y, z) = (x?, y?, z?);
    Ok(ExtractedCoefficients {
        alpha: z.coefficient_per_mm2,
        beta: y.coefficient_per_mm2,
        gamma: x.coefficient_per_mm2,
        fits: [x, y, z],
    })
}

/// Electric field `-grad V` at the centre voxel, V/mm, by central differences.
pub fn field_at_center(field: &PotentialField) -> [f64; 3] {
    let c = field.grid.center_voxel();
    let h = field.grid.spacing_mm();
    [0, 1, 2].map(|d| {
        let mut lo = c;
        let mut hi = c;
        lo[d] -= 1;
        hi[d] += 1;
        -(field.at(hi[0], hi[1], hi[2]) - field.at(lo[0], lo[1], lo[2])) / (2.0 * h)
    })
}

/// `(position_mm, potential_V)` along the grid line through the centre.
pub fn axis_profile(field: &PotentialField, axis: Axis) -> Vec<(f64, f64)> {
    field
        .line(axis)
        .into_iter()
        .map(|(p, v)| (p[axis.index()], v))
        .collect()
}
