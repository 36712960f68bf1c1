//! Analytic harmonic model of the linear blade trap.
//!
//! The potential near the trap centre is the sum of a static quadrupole set by
//! the endcap voltage and an RF quadrupole oscillating at the drive frequency:
//!
//! ```text
//! Phi(x, y, z, t) = U_dc/2 (a_dc z^2 + b_dc y^2 + g_dc x^2)
//!                 + U_rf/2 cos(w_rf t) (a_rf z^2 + b_rf y^2 + g_rf x^2)
//! ```
//!
//! Coefficients are carried in mm^-2, voltages in volts and the drive as an
//! angular frequency in rad/s. Everything is converted to SI before any
//! physics is evaluated.

mod io;
mod stability;

pub use io::{TrapModelFile, TRAP_MODEL_SCHEMA};
pub use stability::{stability_map, StabilityMap, StabilityPoint, Q_STABILITY_LIMIT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ATOMIC_MASS_UNIT, ELECTRON_MASS_U, ELEMENTARY_CHARGE, MM, PER_MM2};
use crate::{Axis, Real};

/// Default relative tolerance on the Laplace closure of a coefficient triple.
pub const LAPLACE_TOLERANCE: f64 = 1e-6;
/// Looser closure accepted for coefficients extracted from a discretised field.
pub const FITTED_LAPLACE_TOLERANCE: f64 = 0.02;
/// Highest RF amplitude the resonator can safely put on the blades, V.
pub const RF_VOLTAGE_CEILING: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("{which} coefficients violate the Laplace constraint: |sum| = {residual:.3e} exceeds {tolerance:.3e}")]
    LaplaceViolation {
        which: &'static str,
        residual: f64,
        tolerance: f64,
    },
    #[error("invalid drive settings: {0}")]
    InvalidDrive(String),
    #[error("invalid ion species: {0}")]
    InvalidSpecies(String),
    #[error("unstable configuration on axis {axis}: a = {a:.4e}, q = {q:.4e}")]
    UnstableConfiguration { axis: Axis, a: f64, q: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
}

/// Curvatures of the static and RF quadrupoles, mm^-2.
///
/// `alpha` multiplies z^2 (axial), `beta` y^2 and `gamma` x^2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapCoefficients<T> {
    pub alpha_dc: T,
    pub beta_dc: T,
    pub gamma_dc: T,
    pub alpha_rf: T,
    pub beta_rf: T,
    pub gamma_rf: T,
}

impl<T: Real> TrapCoefficients<T> {
    /// Builds a coefficient set and checks both triples at the default tolerance.
    pub fn new(
        alpha_dc: T,
        beta_dc: T,
        gamma_dc: T,
        alpha_rf: T,
        beta_rf: T,
        gamma_rf: T,
    ) -> Result<Self, TrapError> {
        Self::with_tolerance(
            [alpha_dc, beta_dc, gamma_dc],
            [alpha_rf, beta_rf, gamma_rf],
            T::lit(LAPLACE_TOLERANCE),
        )
    }

    /// Builds from `[alpha, beta, gamma]` triples with a relative closure tolerance.
    pub fn with_tolerance(dc: [T; 3], rf: [T; 3], rel_tol: T) -> Result<Self, TrapError> {
        let c = Self {
            alpha_dc: dc[0],
            beta_dc: dc[1],
            gamma_dc: dc[2],
            alpha_rf: rf[0],
            beta_rf: rf[1],
            gamma_rf: rf[2],
        };
        if dc.iter().chain(rf.iter()).any(|v| !v.is_finite()) {
            return Err(TrapError::DomainError("non-finite coefficient".into()));
        }
        c.check_closure(rel_tol)?;
        Ok(c)
    }

    /// Design choice with a symmetric radial DC split: `beta_dc = gamma_dc = -alpha_dc/2`,
    /// `alpha_rf = 0`, `beta_rf = -gamma_rf`.
    pub fn symmetric(alpha_dc: T, gamma_rf: T) -> Self {
        let half = alpha_dc / T::lit(2.0);
        Self {
            alpha_dc,
            beta_dc: -half,
            gamma_dc: -half,
            alpha_rf: T::zero(),
            beta_rf: -gamma_rf,
            gamma_rf,
        }
    }

    /// Coefficients with an explicit radial DC split along x; `beta_dc` closes Laplace.
    pub fn with_radial_split(alpha_dc: T, gamma_dc: T, gamma_rf: T) -> Self {
        Self {
            alpha_dc,
            beta_dc: -alpha_dc - gamma_dc,
            gamma_dc,
            alpha_rf: T::zero(),
            beta_rf: -gamma_rf,
            gamma_rf,
        }
    }

    /// DC curvatures ordered as (x, y, z).
    pub fn dc_xyz(&self) -> [T; 3] {
        [self.gamma_dc, self.beta_dc, self.alpha_dc]
    }

    /// RF curvatures ordered as (x, y, z).
    pub fn rf_xyz(&self) -> [T; 3] {
        [self.gamma_rf, self.beta_rf, self.alpha_rf]
    }

    /// Relative Laplace residuals `|sum| / max|coeff|` of the DC and RF triples.
    pub fn closure(&self) -> (T, T) {
        (relative_sum(self.dc_xyz()), relative_sum(self.rf_xyz()))
    }

    pub fn check_closure(&self, rel_tol: T) -> Result<(), TrapError> {
        for (which, triple) in [("DC", self.dc_xyz()), ("RF", self.rf_xyz())] {
            let scale = max_abs(triple);
            let sum = triple[0] + triple[1] + triple[2];
            let allowed = rel_tol * scale;
            if sum.abs() > allowed {
                return Err(TrapError::LaplaceViolation {
                    which,
                    residual: sum.abs().as_f64(),
                    tolerance: allowed.as_f64(),
                });
            }
        }
        Ok(())
    }
}

fn max_abs<T: Real>(v: [T; 3]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn relative_sum<T: Real>(v: [T; 3]) -> T {
    let scale = max_abs(v);
    if scale == T::zero() {
        T::zero()
    } else {
        (v[0] + v[1] + v[2]).abs() / scale
    }
}

/// Electrical drive of the trap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSettings<T> {
    /// RF angular frequency, rad/s.
    pub omega_rf: T,
    /// RF amplitude (zero to peak), V.
    pub v_rf: T,
    pub v_endcap_left: T,
    pub v_endcap_right: T,
    /// Compensation electrode voltages, V.
    pub v_comp: [T; 5],
}

impl<T: Real> DriveSettings<T> {
    pub fn new(omega_rf: T, v_rf: T, v_endcap_left: T, v_endcap_right: T) -> Result<Self, TrapError> {
        let d = Self {
            omega_rf,
            v_rf,
            v_endcap_left,
            v_endcap_right,
            v_comp: [T::zero(); 5],
        };
        d.validate()?;
        Ok(d)
    }

    /// Symmetric endcaps at `u_dc`.
    pub fn symmetric(omega_rf: T, v_rf: T, u_dc: T) -> Result<Self, TrapError> {
        Self::new(omega_rf, v_rf, u_dc, u_dc)
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        if !(self.omega_rf > T::zero()) || !self.omega_rf.is_finite() {
            return Err(TrapError::InvalidDrive(format!(
                "omega_rf must be positive, got {}",
                self.omega_rf
            )));
        }
        if !(self.v_rf >= T::zero()) {
            return Err(TrapError::InvalidDrive(format!("v_rf must be >= 0, got {}", self.v_rf)));
        }
        if self.v_rf > T::lit(RF_VOLTAGE_CEILING) {
            return Err(TrapError::InvalidDrive(format!(
                "v_rf = {} V exceeds the {RF_VOLTAGE_CEILING} V ceiling",
                self.v_rf
            )));
        }
        let finite = [self.v_endcap_left, self.v_endcap_right]
            .iter()
            .chain(self.v_comp.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(TrapError::InvalidDrive("non-finite DC voltage".into()));
        }
        Ok(())
    }

    /// Effective DC voltage: the mean of the two endcaps.
    pub fn u_dc(&self) -> T {
        (self.v_endcap_left + self.v_endcap_right) / T::lit(2.0)
    }
}

/// Coefficients plus drive: everything needed to evaluate the trap potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapModel<T> {
    pub coefficients: TrapCoefficients<T>,
    pub drive: DriveSettings<T>,
}

impl<T: Real> TrapModel<T> {
    pub fn new(coefficients: TrapCoefficients<T>, drive: DriveSettings<T>) -> Result<Self, TrapError> {
        drive.validate()?;
        Ok(Self { coefficients, drive })
    }

    /// Same coefficients, new RF amplitude and symmetric endcap voltage.
    pub fn with_voltages(&self, v_rf: T, u_dc: T) -> Self {
        let mut m = *self;
        m.drive.v_rf = v_rf;
        m.drive.v_endcap_left = u_dc;
        m.drive.v_endcap_right = u_dc;
        m
    }

    /// Static potential (V) at `r` given in mm.
    pub fn dc_potential(&self, r_mm: [T; 3]) -> T {
        quad_form(self.coefficients.dc_xyz(), r_mm) * self.drive.u_dc() / T::lit(2.0)
    }

    /// RF potential amplitude (V) at `r` given in mm, i.e. the value at cos = 1.
    pub fn rf_amplitude(&self, r_mm: [T; 3]) -> T {
        quad_form(self.coefficients.rf_xyz(), r_mm) * self.drive.v_rf / T::lit(2.0)
    }

    /// Spring constants `dPhi/dx_i / x_i` in SI (V/m^2) at time `t`.
    pub fn curvature_si(&self, t: T) -> [T; 3] {
        let dc = self.coefficients.dc_xyz();
        let rf = self.coefficients.rf_xyz();
        let u = self.drive.u_dc();
        let v = self.drive.v_rf * (self.drive.omega_rf * t).cos();
        let s = T::lit(PER_MM2);
        [
            (u * dc[0] + v * rf[0]) * s,
            (u * dc[1] + v * rf[1]) * s,
            (u * dc[2] + v * rf[2]) * s,
        ]
    }
}

fn quad_form<T: Real>(c: [T; 3], r: [T; 3]) -> T {
    c[0] * r[0] * r[0] + c[1] * r[1] * r[1] + c[2] * r[2] * r[2]
}

/// Trapped ion species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies<T> {
    pub name: String,
    /// Mass in atomic mass units.
    pub mass: T,
    /// Charge in elementary charges.
    pub charge: u32,
}

/// Neutral atomic masses (u) of the two trapped isotopes.
pub const YB174_ATOMIC_MASS: f64 = 173.938_866_4;
pub const YB171_ATOMIC_MASS: f64 = 170.936_330_2;

impl<T: Real> IonSpecies<T> {
    pub fn new(name: impl Into<String>, mass: T, charge: u32) -> Result<Self, TrapError> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(TrapError::InvalidSpecies(format!("mass must be positive, got {mass}")));
        }
        if charge < 1 {
            return Err(TrapError::InvalidSpecies("charge must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            mass,
            charge,
        })
    }

    pub fn yb174() -> Self {
        Self {
            name: "174Yb+".into(),
            mass: T::lit(YB174_ATOMIC_MASS - ELECTRON_MASS_U),
            charge: 1,
        }
    }

    pub fn yb171() -> Self {
        Self {
            name: "171Yb+".into(),
            mass: T::lit(YB171_ATOMIC_MASS - ELECTRON_MASS_U),
            charge: 1,
        }
    }

    /// Looks up a built-in species by a loose label ("174", "yb174", "171Yb+").
    pub fn by_label(label: &str) -> Option<Self> {
        let digits: String = label.chars().filter(|c| c.is_ascii_digit()).collect();
        match digits.as_str() {
            "174" => Some(Self::yb174()),
            "171" => Some(Self::yb171()),
            _ => None,
        }
    }

    pub fn mass_kg(&self) -> T {
        self.mass * T::lit(ATOMIC_MASS_UNIT)
    }

    pub fn charge_c(&self) -> T {
        T::lit(self.charge as f64 * ELEMENTARY_CHARGE)
    }

    /// Charge-to-mass ratio, C/kg.
    pub fn q_over_m(&self) -> T {
        self.charge_c() / self.mass_kg()
    }
}

/// Dimensionless Mathieu parameters per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MathieuParameters<T> {
    pub a_x: T,
    pub a_y: T,
    pub a_z: T,
    pub q_x: T,
    pub q_y: T,
    pub q_z: T,
}

impl<T: Real> MathieuParameters<T> {
    pub fn a(&self) -> [T; 3] {
        [self.a_x, self.a_y, self.a_z]
    }

    pub fn q(&self) -> [T; 3] {
        [self.q_x, self.q_y, self.q_z]
    }

    /// Lowest-order squared secular exponent `a + q^2/2` per axis.
    pub fn beta_squared(&self) -> [T; 3] {
        let a = self.a();
        let q = self.q();
        let two = T::lit(2.0);
        [
            a[0] + q[0] * q[0] / two,
            a[1] + q[1] * q[1] / two,
            a[2] + q[2] * q[2] / two,
        ]
    }
}

/// Instantaneous trap potential (V) at `r` (mm) and time `t` (s).
pub fn potential_at<T: Real>(model: &TrapModel<T>, r_mm: [T; 3], t: T) -> T {
    model.dc_potential(r_mm) + model.rf_amplitude(r_mm) * (model.drive.omega_rf * t).cos()
}

/// Ponderomotive pseudopotential plus static potential energy, in eV.
///
/// The RF field gradient is evaluated analytically from the quadratic form.
pub fn pseudopotential_at<T: Real>(model: &TrapModel<T>, species: &IonSpecies<T>, r_mm: [T; 3]) -> T {
    let rf = model.coefficients.rf_xyz();
    // field amplitude in V/m: U_rf * c_i * x_i with c in m^-2 and x in m
    let mut grad2 = T::zero();
    for i in 0..3 {
        let g = model.drive.v_rf * rf[i] * T::lit(PER_MM2) * r_mm[i] * T::lit(MM);
        grad2 = grad2 + g * g;
    }
    let z = T::lit(species.charge as f64);
    let omega = model.drive.omega_rf;
    // q^2 |E|^2 / (4 m w^2) in J, divided by e for eV
    let ponderomotive =
        z * z * T::lit(ELEMENTARY_CHARGE) * grad2 / (T::lit(4.0) * species.mass_kg() * omega * omega);
    ponderomotive + z * model.dc_potential(r_mm)
}

/// Standard Mathieu mapping of the trap coefficients.
pub fn mathieu_parameters<T: Real>(model: &TrapModel<T>, species: &IonSpecies<T>) -> MathieuParameters<T> {
    let dc = model.coefficients.dc_xyz();
    let rf = model.coefficients.rf_xyz();
    let omega = model.drive.omega_rf;
    let k = species.q_over_m() * T::lit(PER_MM2) / (omega * omega);
    let u = model.drive.u_dc();
    let v = model.drive.v_rf;
    let a = |c: T| T::lit(4.0) * k * u * c;
    let q = |c: T| T::lit(2.0) * k * v * c;
    MathieuParameters {
        a_x: a(dc[0]),
        a_y: a(dc[1]),
        a_z: a(dc[2]),
        q_x: q(rf[0]),
        q_y: q(rf[1]),
        q_z: q(rf[2]),
    }
}

/// Lowest-order secular angular frequencies (x, y, z) in rad/s.
///
/// The axial frequency is `sqrt(e U_dc alpha_dc / m)`, which coincides with the
/// Mathieu form when `alpha_rf = 0`.
pub fn secular_frequencies<T: Real>(model: &TrapModel<T>, species: &IonSpecies<T>) -> Result<[T; 3], TrapError> {
    let p = mathieu_parameters(model, species);
    let b2 = p.beta_squared();
    let q = p.q();
    let a = p.a();
    let limit = T::lit(Q_STABILITY_LIMIT);
    let half_omega = model.drive.omega_rf / T::lit(2.0);
    let mut out = [T::zero(); 3];
    for axis in Axis::ALL {
        let i = axis.index();
        if q[i].abs() >= limit || !(b2[i] > T::zero()) {
            return Err(TrapError::UnstableConfiguration {
                axis,
                a: a[i].as_f64(),
                q: q[i].as_f64(),
            });
        }
        out[i] = half_omega * b2[i].sqrt();
    }
    if model.coefficients.alpha_rf == T::zero() {
        let wz2 = species.q_over_m() * model.drive.u_dc() * model.coefficients.alpha_dc * T::lit(PER_MM2);
        out[2] = wz2.sqrt();
    }
    Ok(out)
}

/// Stability parameter from measured or modelled frequencies:
/// `q = (2 / w_rf) sqrt(2 w_r^2 + w_z^2)`.
pub fn q_from_frequencies<T: Real>(omega_r: T, omega_z: T, omega_rf: T) -> Result<T, TrapError> {
    if !(omega_rf > T::zero()) {
        return Err(TrapError::DomainError(format!("omega_rf must be positive, got {omega_rf}")));
    }
    if !(omega_r >= T::zero()) || !(omega_z >= T::zero()) {
        return Err(TrapError::DomainError(format!(
            "secular frequencies must be non-negative, got {omega_r}, {omega_z}"
        )));
    }
    let two = T::lit(2.0);
    Ok(two / omega_rf * (two * omega_r * omega_r + omega_z * omega_z).sqrt())
}
