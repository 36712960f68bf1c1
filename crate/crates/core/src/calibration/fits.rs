//! Model-specific fits built on the shared Levenberg-Marquardt solver.

use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::{CalibrationError, Dataset, FitResult};
use crate::atomphys::ZEEMAN_MHZ_PER_GAUSS;
use crate::constants::PER_MM2;
use crate::trapmodel::IonSpecies;

/// `A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + B`.
pub fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let h = fwhm / 2.0;
    amplitude * h * h / ((x - center) * (x - center) + h * h) + offset
}

fn weighted<F: Fn(f64) -> f64>(data: &Dataset, model: F) -> Vec<f64> {
    (0..data.len()).map(|i| (model(data.x[i]) - data.y[i]) * data.weight(i)).collect()
}

/// Best `a f + b` for fixed basis values `f`, with the resulting cost.
fn linear_amp_offset(f: &[f64], data: &Dataset) -> (f64, f64, f64) {
    let (mut sw, mut sf, mut sff, mut sy, mut sfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &fi) in f.iter().enumerate() {
        let w = data.weight(i).powi(2);
        sw += w;
        sf += w * fi;
        sff += w * fi * fi;
        sy += w * data.y[i];
        sfy += w * fi * data.y[i];
    }
    let det = sw * sff - sf * sf;
    let (a, b) = if det.abs() > 1e-300 {
        ((sw * sfy - sf * sy) / det, (sff * sy - sf * sfy) / det)
    } else {
        (0.0, sy / sw)
    };
    let c = f
        .iter()
        .enumerate()
        .map(|(i, fi)| ((a * fi + b - data.y[i]) * data.weight(i)).powi(2))
        .sum();
    (a, b, c)
}

/// Fits a Lorentzian peak; parameters `center`, `fwhm`, `amplitude`, `offset`.
pub fn fit_lorentzian(data: &Dataset) -> Result<FitResult, CalibrationError> {
    data.validate(4)?;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| data.x[a].total_cmp(&data.x[b]));
    let xs: Vec<f64> = idx.iter().map(|&i| data.x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| data.y[i]).collect();
    let (imax, &ymax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let amp0 = ymax - ymin;
    if !(amp0 > 1e-12 * ymax.abs().max(1.0)) {
        return Err(CalibrationError::FitError {
            iterations: 0,
            best: vec![xs[imax], 0.0, 0.0, ymin],
        });
    }
    let half = ymin + amp0 / 2.0;
    let left = (0..imax).rev().find(|&i| ys[i] < half).map_or(xs[0], |i| xs[i]);
    let right = (imax..ys.len()).find(|&i| ys[i] < half).map_or(xs[xs.len() - 1], |i| xs[i]);
    let span = xs[xs.len() - 1] - xs[0];
    let width0 = if right > left { right - left } else { span / 4.0 };
    let p0 = [xs[imax], width0, amp0, ymin];
    let res = |p: &[f64]| weighted(data, |x| lorentzian(x, p[0], p[1], p[2], p[3]));
    let mut fit = levenberg_marquardt(res, &p0, &["center", "fwhm", "amplitude", "offset"], &LmOptions::default())?;
    fit.params[1] = fit.params[1].abs();
    if fit.params[1] > span {
        return Err(CalibrationError::IllConditioned(format!(
            "data span {span} is narrower than the fitted width {}",
            fit.params[1]
        )));
    }
    Ok(fit)
}

/// Lowest-order radial secular frequency (rad/s) for coefficients in mm^-2.
pub fn radial_frequency(
    v_rf: f64,
    u_dc: f64,
    omega_rf: f64,
    gamma_dc: f64,
    gamma_rf: f64,
    species: &IonSpecies<f64>,
) -> f64 {
    let k = species.q_over_m() * PER_MM2 / (omega_rf * omega_rf);
    let a = 4.0 * k * u_dc * gamma_dc;
    let q = 2.0 * k * v_rf * gamma_rf;
    omega_rf / 2.0 * (a + q * q / 2.0).sqrt()
}

/// Minimum relative spread `(max - min) / max` of the RF amplitudes.
pub const MIN_RADIAL_SPAN: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialFit {
    pub gamma_dc_per_mm2: f64,
    pub gamma_rf_per_mm2: f64,
    pub fit: FitResult,
}

/// Fits `w_x(V_rf)` at fixed endcap voltage for `(gamma_dc, gamma_rf)`.
/// `data.x` is the RF amplitude in V, `data.y` the radial frequency in rad/s.
pub fn fit_radial_curve(
    data: &Dataset,
    u_dc: f64,
    omega_rf: f64,
    species: &IonSpecies<f64>,
) -> Result<RadialFit, CalibrationError> {
    data.validate(2)?;
    let mut distinct = data.x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CalibrationError::InvalidData(format!(
            "need at least 3 distinct RF amplitudes, got {}",
            distinct.len()
        )));
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    if !(hi > 0.0) || (hi - lo) / hi < MIN_RADIAL_SPAN {
        return Err(CalibrationError::IllConditioned(format!(
            "RF amplitude span {lo}..{hi} V is below {:.0}%",
            MIN_RADIAL_SPAN * 100.0
        )));
    }
    if u_dc == 0.0 {
        return Err(CalibrationError::IllConditioned("gamma_dc is unobservable at zero endcap voltage".into()));
    }
    // beta^2 = 4 k u gamma_dc + 2 k^2 gamma_rf^2 V^2 is linear in (1, V^2)
    let k = species.q_over_m() * PER_MM2 / (omega_rf * omega_rf);
    let lin = Dataset {
        x: data.x.clone(),
        y: data.y.iter().map(|w| 4.0 * w * w / (omega_rf * omega_rf)).collect(),
        sigma: None,
    };
    let v2: Vec<f64> = data.x.iter().map(|v| v * v).collect();
    let (c1, c0, _) = linear_amp_offset(&v2, &lin);
    if !(c1 > 0.0) {
        return Err(CalibrationError::InvalidData("frequency does not grow with RF amplitude".into()));
    }
    let p0 = [c0 / (4.0 * k * u_dc), (c1 / (2.0 * k * k)).sqrt()];
    let res = |p: &[f64]| weighted(data, |v| radial_frequency(v, u_dc, omega_rf, p[0], p[1], species));
    let fit = levenberg_marquardt(res, &p0, &["gamma_dc", "gamma_rf"], &LmOptions::default())?;
    Ok(RadialFit {
        gamma_dc_per_mm2: fit.params[0],
        gamma_rf_per_mm2: fit.params[1].abs(),
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxialFit {
    pub alpha_dc_per_mm2: f64,
    pub sigma_per_mm2: f64,
    /// RMS residual of `w_z^2`, (rad/s)^2.
    pub residual_rms: f64,
    pub points: usize,
}

/// Slope of `w_z^2` against endcap voltage through the origin.
/// `data.x` is the endcap voltage in V, `data.y` the axial frequency in rad/s.
pub fn fit_axial_curve(data: &Dataset, species: &IonSpecies<f64>) -> Result<AxialFit, CalibrationError> {
    data.validate(1)?;
    let mut pts: Vec<(f64, f64)> = data.x.iter().zip(&data.y).map(|(&u, &w)| (u, w * w)).collect();
    // summing in a canonical order makes the slope independent of input order
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let suu: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let suw: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    if !(suu > 0.0) {
        return Err(CalibrationError::InvalidData("all endcap voltages are zero".into()));
    }
    let slope = suw / suu;
    if !(slope > 0.0) {
        return Err(CalibrationError::NegativeSlope { slope });
    }
    let ss: f64 = pts.iter().map(|p| (p.1 - slope * p.0).powi(2)).sum();
    let n = pts.len();
    let s2 = ss / (n - 1) as f64;
    let scale = species.q_over_m() * PER_MM2;
    Ok(AxialFit {
        alpha_dc_per_mm2: slope / scale,
        sigma_per_mm2: (s2 / suu).sqrt() / scale,
        residual_rms: (ss / n as f64).sqrt(),
        points: n,
    })
}

/// Magnetic field (G) from the splitting between the central and a shifted MW line.
pub fn b_field_from_zeeman(splitting_mhz: f64) -> Result<f64, CalibrationError> {
    if !(splitting_mhz >= 0.0) || !splitting_mhz.is_finite() {
        return Err(CalibrationError::InvalidData(format!(
            "splitting must be >= 0, got {splitting_mhz}"
        )));
    }
    Ok(splitting_mhz / ZEEMAN_MHZ_PER_GAUSS)
}

fn best_on_grid<F: Fn(f64) -> f64>(data: &Dataset, grid: &[f64], basis: F) -> (f64, f64, f64) {
    let mut best = (grid[0], 0.0, 0.0, f64::INFINITY);
    for &g in grid {
        let f: Vec<f64> = data.x.iter().map(|&x| basis(x / g)).collect();
        let (a, b, c) = linear_amp_offset(&f, data);
        if c < best.3 {
            best = (g, a, b, c);
        }
    }
    (best.0, best.1, best.2)
}

fn time_scales(data: &Dataset, lo_factor: f64, hi_factor: f64, count: usize) -> Result<Vec<f64>, CalibrationError> {
    let mut t = data.x.clone();
    t.sort_by(f64::total_cmp);
    let span = t[t.len() - 1] - t[0];
    let min_dt = t.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(CalibrationError::InvalidData("times must not all be equal".into()));
    }
    let (lo, hi) = (min_dt * lo_factor, span * hi_factor);
    Ok((0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect())
}

/// Fits `offset + amplitude sin^2(pi t / (2 t_pi))`; parameters `t_pi`, `amplitude`, `offset`.
pub fn fit_rabi_oscillation(data: &Dataset) -> Result<FitResult, CalibrationError> {
    data.validate(3)?;
    let grid = time_scales(data, 1.0, 4.0, 2000)?;
    let basis = |u: f64| (std::f64::consts::FRAC_PI_2 * u).sin().powi(2);
    let (t0, a0, b0) = best_on_grid(data, &grid, basis);
    let res = |p: &[f64]| weighted(data, |t| p[2] + p[1] * basis(t / p[0]));
    let mut fit = levenberg_marquardt(res, &[t0, a0, b0], &["t_pi", "amplitude", "offset"], &LmOptions::default())?;
    fit.params[0] = fit.params[0].abs();
    Ok(fit)
}

/// Fits `offset + amplitude exp(-t / tau)`; parameters `tau`, `amplitude`, `offset`.
pub fn fit_exponential_decay(data: &Dataset) -> Result<FitResult, CalibrationError> {
    data.validate(3)?;
    let grid = time_scales(data, 0.5, 10.0, 400)?;
    let basis = |u: f64| (-u).exp();
    let (t0, a0, b0) = best_on_grid(data, &grid, basis);
    let res = |p: &[f64]| weighted(data, |t| p[2] + p[1] * (-t / p[0]).exp());
    levenberg_marquardt(res, &[t0, a0, b0], &["tau", "amplitude", "offset"], &LmOptions::default())
}
