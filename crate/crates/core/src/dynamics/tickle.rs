//! Resonant excitation scans with a sinusoidal drive on one axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::doppler::doppler_damping_rate;
use super::{check_dt, default_dt, rf_period, DynamicsError, HarmonicDrive, Stepper, StrayField};
use crate::atomphys::{LaserBeam, TransitionLine};
use crate::trapmodel::{IonSpecies, TrapModel};
use crate::Axis;

/// Field at the ion per volt on the tickle electrode, V/mm per V.
pub const DEFAULT_TICKLE_COUPLING_PER_MM: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickleSettings {
    pub coupling_per_mm: f64,
    /// Linear friction rate from laser cooling, 1/s.
    pub damping_per_s: f64,
    /// RF cycles integrated before the amplitude is measured.
    pub settle_cycles: usize,
    /// RF cycles over which the peak excursion is taken.
    pub measure_cycles: usize,
    /// Residual motion before the drive is applied, mm per axis.
    pub initial_offset_mm: f64,
    pub threshold_factor: f64,
}

impl TickleSettings {
    /// Uses the linearized friction of a cooling beam as damping.
    pub fn with_doppler(mut self, beam: &LaserBeam<f64>, line: &TransitionLine<f64>, species: &IonSpecies<f64>) -> Self {
        self.damping_per_s = doppler_damping_rate(beam, line, species.mass_kg());
        self
    }
}

impl Default for TickleSettings {
    fn default() -> Self {
        Self {
            coupling_per_mm: DEFAULT_TICKLE_COUPLING_PER_MM,
            // friction at saturation 1 and half-linewidth red detuning on the 369 nm line
            damping_per_s: 2.3e4,
            settle_cycles: 4000,
            measure_cycles: 500,
            initial_offset_mm: 1e-4,
            threshold_factor: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickleScan {
    pub axis: Axis,
    pub frequencies_hz: Vec<f64>,
    pub amplitudes_mm: Vec<f64>,
    /// Amplitude of the same integration without drive.
    pub baseline_mm: f64,
    pub threshold_mm: f64,
    pub resonances_hz: Vec<f64>,
}

impl TickleScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f_hz,amplitude_mm\n");
        for (f, a) in self.frequencies_hz.iter().zip(&self.amplitudes_mm) {
            out.push_str(&format!("{f},{a:e}\n"));
        }
        out
    }
}

fn steady_amplitude(
    model: &TrapModel<f64>,
    species: &IonSpecies<f64>,
    axis: Axis,
    drive: Option<HarmonicDrive<f64>>,
    settings: &TickleSettings,
) -> f64 {
    let dt = default_dt(model);
    let steps_per_cycle = (rf_period(model) / dt).round() as u64;
    let r0 = [settings.initial_offset_mm; 3];
    let mut s = Stepper::new(model, species, r0, [0.0; 3], dt, &StrayField::zero(), settings.damping_per_s, drive);
    let settle = settings.settle_cycles as u64 * steps_per_cycle;
    let measure = settings.measure_cycles as u64 * steps_per_cycle;
    for _ in 0..settle {
        s.advance();
    }
    let mut peak = 0.0f64;
    for _ in 0..measure {
        s.advance();
        peak = peak.max(s.r_mm()[axis.index()].abs());
    }
    peak
}

/// Sweeps a drive of `drive_amplitude_v` on `axis` from `f_start` to `f_stop`
/// (Hz) in steps of `f_step` and returns the local maxima of the response
/// that exceed the threshold.
pub fn tickle_scan(
    model: &TrapModel<f64>,
    species: &IonSpecies<f64>,
    axis: Axis,
    f_start: f64,
    f_stop: f64,
    f_step: f64,
    drive_amplitude_v: f64,
    settings: &TickleSettings,
) -> Result<TickleScan, DynamicsError> {
    model.drive.validate()?;
    check_dt(model, default_dt(model))?;
    let f_max = model.drive.omega_rf / (4.0 * std::f64::consts::PI);
    if !(f_start > 0.0) || !(f_stop > f_start) || f_stop >= f_max {
        return Err(DynamicsError::InvalidInput(format!(
            "scan range [{f_start}, {f_stop}] Hz must lie within (0, {f_max:.1}) Hz"
        )));
    }
    if !(f_step > 0.0) {
        return Err(DynamicsError::InvalidInput(format!("f_step must be positive, got {f_step}")));
    }
    if !(drive_amplitude_v >= 0.0) || !(settings.damping_per_s >= 0.0) || settings.measure_cycles == 0 {
        return Err(DynamicsError::InvalidInput("drive amplitude, damping and measure window must be valid".into()));
    }
    let count = ((f_stop - f_start) / f_step + 1e-9).floor() as usize + 1;
    let frequencies_hz: Vec<f64> = (0..count).map(|i| f_start + i as f64 * f_step).collect();
    let baseline_mm = steady_amplitude(model, species, axis, None, settings);
    let field = drive_amplitude_v * settings.coupling_per_mm;
    let amplitudes_mm: Vec<f64> = frequencies_hz
        .par_iter()
        .map(|&f| {
            let drive = HarmonicDrive {
                axis,
                amplitude_v_per_mm: field,
                omega: 2.0 * std::f64::consts::PI * f,
            };
            steady_amplitude(model, species, axis, Some(drive), settings)
        })
        .collect();
    let threshold_mm = settings.threshold_factor * baseline_mm + 1e-12;
    let resonances_hz: Vec<f64> = (1..count.saturating_sub(1))
        .filter(|&i| {
            let a = amplitudes_mm[i];
            a > threshold_mm && a > amplitudes_mm[i - 1] && a >= amplitudes_mm[i + 1]
        })
        .map(|i| frequencies_hz[i])
        .collect();
    if resonances_hz.is_empty() {
        return Err(DynamicsError::NoResonance { threshold: threshold_mm });
    }
    Ok(TickleScan {
        axis,
        frequencies_hz,
        amplitudes_mm,
        baseline_mm,
        threshold_mm,
        resonances_hz,
    })
}
