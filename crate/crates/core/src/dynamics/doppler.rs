//! Radiation-pressure force of a single travelling-wave beam.

use crate::atomphys::{saturation, LaserBeam, TransitionLine};
use crate::constants::{HBAR, MM};
use crate::Real;

/// Force (N) along the beam on an ion moving at `v_along` (mm/s) along the
/// propagation direction.
pub fn doppler_force_along<T: Real>(beam: &LaserBeam<T>, line: &TransitionLine<T>, v_along_mm_s: T) -> T {
    let k = line.wavenumber();
    let gamma = line.decay_rate();
    let s = saturation(beam, line);
    let delta = T::lit(2.0) * T::PI() * beam.detuning_mhz * T::lit(1e6);
    let x = T::lit(2.0) * (delta - k * v_along_mm_s * T::lit(MM)) / gamma;
    T::lit(HBAR) * k * gamma / T::lit(2.0) * s / (T::one() + s + x * x)
}

/// Force vector (N) on an ion with velocity `v` (mm/s).
pub fn doppler_force<T: Real>(beam: &LaserBeam<T>, line: &TransitionLine<T>, v_mm_s: [T; 3]) -> [T; 3] {
    let d = beam.direction;
    let v_along = d[0] * v_mm_s[0] + d[1] * v_mm_s[1] + d[2] * v_mm_s[2];
    let f = doppler_force_along(beam, line, v_along);
    d.map(|c| c * f)
}

/// Linearized friction rate `-(dF/dv) / m` at rest along the beam, 1/s.
/// Positive for red detuning.
pub fn doppler_damping_rate<T: Real>(beam: &LaserBeam<T>, line: &TransitionLine<T>, mass_kg: T) -> T {
    let k = line.wavenumber();
    let gamma = line.decay_rate();
    let s = saturation(beam, line);
    let x = T::lit(2.0) * T::lit(2.0) * T::PI() * beam.detuning_mhz * T::lit(1e6) / gamma;
    let den = T::one() + s + x * x;
    -T::lit(2.0) * T::lit(HBAR) * k * k * s * x / (den * den * mass_kg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trapmodel::IonSpecies;

    fn beam_with_s(s: f64, detuning_mhz: f64) -> (LaserBeam<f64>, TransitionLine<f64>) {
        let line = TransitionLine::yb174_cooling();
        let d_um = 100.0;
        let w = d_um * 0.5e-6;
        let p_uw = s * line.saturation_intensity() * std::f64::consts::PI * w * w / 2.0 * 1e6;
        (LaserBeam::new(p_uw, d_um, detuning_mhz).unwrap(), line)
    }

    #[test]
    fn resonant_unit_saturation() {
        let (b, l) = beam_with_s(1.0, 0.0);
        assert!((saturation(&b, &l) - 1.0).abs() < 1e-12);
        let f = doppler_force_along(&b, &l, 0.0);
        let expect = HBAR * l.wavenumber() * l.decay_rate() / 4.0;
        assert!((f / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_about_resonant_velocity() {
        let (b, l) = beam_with_s(0.5, -30.0);
        let v0 = 2.0 * std::f64::consts::PI * -30e6 / l.wavenumber() / MM;
        for dv in [1e3, 5e3, 2e4] {
            let a = doppler_force_along(&b, &l, v0 + dv);
            let c = doppler_force_along(&b, &l, v0 - dv);
            assert!((a / c - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn red_detuning_opposes_motion_toward_beam() {
        let (b, l) = beam_with_s(1.0, -200.0);
        let v_res = 2.0 * std::f64::consts::PI * -200e6 / l.wavenumber() / MM;
        // moving against the beam direction, faster than rest but inside capture range
        for frac in [0.2, 0.5, 1.0, 1.5] {
            let v = frac * v_res;
            let f_moving = doppler_force_along(&b, &l, v);
            let f_rest = doppler_force_along(&b, &l, 0.0);
            assert!(f_moving > f_rest, "v = {v}");
        }
        assert!(doppler_damping_rate(&b, &l, IonSpecies::<f64>::yb174().mass_kg()) > 0.0);
        let (blue, l) = beam_with_s(1.0, 20.0);
        assert!(doppler_damping_rate(&blue, &l, IonSpecies::<f64>::yb174().mass_kg()) < 0.0);
    }

    #[test]
    fn damping_matches_finite_difference() {
        let (b, l) = beam_with_s(2.0, -10.0);
        let m = IonSpecies::<f64>::yb174().mass_kg();
        let h = 1.0;
        let fd = -(doppler_force_along(&b, &l, h) - doppler_force_along(&b, &l, -h)) / (2.0 * h * MM) / m;
        let an = doppler_damping_rate(&b, &l, m);
        assert!((fd / an - 1.0).abs() < 1e-6);
    }
}
