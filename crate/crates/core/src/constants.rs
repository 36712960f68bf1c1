//! CODATA-2018 constants and unit conversions (SI unless noted).

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ELECTRON_MASS_U: f64 = 5.485_799_090_65e-4;

/// Coulomb constant e^2 / (4 pi eps0), J m.
pub const COULOMB_E2: f64 =
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);

pub const MM: f64 = 1e-3;
pub const UM: f64 = 1e-6;
pub const PER_MM2: f64 = 1e6;
pub const MHZ: f64 = 1e6;
pub const KHZ: f64 = 1e3;

/// Converts a frequency in MHz to an angular frequency in rad/s.
pub fn mhz_to_rad_s(f_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_mhz * MHZ
}

/// Converts an angular frequency in rad/s to Hz.
pub fn rad_s_to_hz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}

/// Vacuum frequency (THz) of a wavelength given in nm.
pub fn nm_to_thz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9) / 1e12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_constant() {
        assert!((COULOMB_E2 - 2.307_077_55e-28).abs() < 1e-35);
    }

    #[test]
    fn ionization_wavelength_matches_frequency() {
        // 398.9113 nm is listed alongside 751.526673 THz
        assert!((nm_to_thz(398.9113) - 751.526_673).abs() < 5e-4);
    }
}
