//! Windowed single-frequency Fourier estimates of trajectory samples.

use super::{DynamicsError, Trajectory};
use crate::{Axis, Real};

/// Shortest trajectory accepted by [`micromotion_amplitude`], in RF cycles.
pub const MIN_MICROMOTION_CYCLES: usize = 20;

fn hann(n: usize, len: usize) -> f64 {
    if len < 2 {
        return 1.0;
    }
    0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
}

/// Hann-windowed DFT at an arbitrary frequency, mean removed. Returns the
/// complex value normalized so a pure tone of amplitude A gives |X| = A.
fn windowed_dft(samples: &[f64], dt: f64, f_hz: f64) -> (f64, f64) {
    let len = samples.len();
    let mean = samples.iter().sum::<f64>() / len as f64;
    let dphi = -2.0 * std::f64::consts::PI * f_hz * dt;
    let (step_im, step_re) = dphi.sin_cos();
    let (mut re, mut im) = (1.0f64, 0.0f64);
    let (mut sr, mut si, mut sw) = (0.0, 0.0, 0.0);
    for (n, &x) in samples.iter().enumerate() {
        if n % 1024 == 0 {
            // re-anchor the rotation to bound round-off growth
            let (s, c) = (dphi * n as f64).sin_cos();
            re = c;
            im = s;
        }
        let w = hann(n, len);
        let y = (x - mean) * w;
        sr += y * re;
        si += y * im;
        sw += w;
        let nr = re * step_re - im * step_im;
        im = re * step_im + im * step_re;
        re = nr;
    }
    (2.0 * sr / sw, 2.0 * si / sw)
}

/// Amplitude of the component at `f_hz` in uniformly sampled data.
pub fn fourier_amplitude(samples: &[f64], dt: f64, f_hz: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let (re, im) = windowed_dft(samples, dt, f_hz);
    re.hypot(im)
}

/// Frequency (Hz) of the strongest spectral component within `[f_lo, f_hi]`.
///
/// A grid search at one eighth of the Fourier resolution is refined by a
/// golden-section search on the windowed amplitude.
pub fn spectral_peak(samples: &[f64], dt: f64, f_lo: f64, f_hi: f64) -> Result<f64, DynamicsError> {
    if samples.len() < 16 {
        return Err(DynamicsError::InvalidInput(format!(
            "need at least 16 samples for a spectral peak, got {}",
            samples.len()
        )));
    }
    if !(dt > 0.0) || !(f_lo >= 0.0) || !(f_hi > f_lo) || f_hi > 0.5 / dt {
        return Err(DynamicsError::InvalidInput(format!(
            "invalid peak search band [{f_lo}, {f_hi}] Hz for dt {dt}"
        )));
    }
    let span = samples.len() as f64 * dt;
    let step = 1.0 / (8.0 * span);
    let count = ((f_hi - f_lo) / step).ceil() as usize + 1;
    let amp = |f: f64| fourier_amplitude(samples, dt, f);
    let (mut best_f, mut best_a) = (f_lo, -1.0);
    for i in 0..count {
        let f = (f_lo + i as f64 * step).min(f_hi);
        let a = amp(f);
        if a > best_a {
            best_a = a;
            best_f = f;
        }
    }
    let (mut a, mut b) = ((best_f - step).max(f_lo), (best_f + step).min(f_hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (amp(c), amp(d));
    while b - a > 1e-7 * step {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = amp(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = amp(d);
        }
    }
    Ok((a + b) / 2.0)
}

/// Per-axis amplitude (mm) of the motion component at the RF drive frequency.
pub fn micromotion_amplitude<T: Real>(traj: &Trajectory<T>, omega_rf: T) -> Result<[T; 3], DynamicsError> {
    let omega = omega_rf.as_f64();
    if !(omega > 0.0) {
        return Err(DynamicsError::InvalidInput(format!("omega_rf must be positive, got {omega}")));
    }
    let cycles = traj.duration().as_f64() * omega / (2.0 * std::f64::consts::PI);
    if cycles < MIN_MICROMOTION_CYCLES as f64 {
        return Err(DynamicsError::TooShort {
            cycles,
            required: MIN_MICROMOTION_CYCLES,
        });
    }
    let dt = traj.sample_dt.as_f64();
    let f = omega / (2.0 * std::f64::consts::PI);
    if f > 0.5 / dt {
        return Err(DynamicsError::InvalidInput("trajectory sampling is too coarse for the RF frequency".into()));
    }
    Ok(Axis::ALL.map(|axis| {
        let x: Vec<f64> = traj.axis(axis).into_iter().map(|v| v.as_f64()).collect();
        T::lit(fourier_amplitude(&x, dt, f))
    }))
}
