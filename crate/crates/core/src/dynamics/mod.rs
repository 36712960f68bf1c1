//! Time-dependent single-ion dynamics in the quadrupole trap potential.

mod compensation;
mod doppler;
mod spectrum;
mod tickle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ELEMENTARY_CHARGE, MM};
use crate::fieldsolver::FieldError;
use crate::trapmodel::{potential_at, IonSpecies, TrapError, TrapModel};
use crate::{Axis, Real};

pub use compensation::{compensate, compensate_with_basis_set, CompensationSolution, COMPENSATION_ELECTRODES};
pub use doppler::{doppler_damping_rate, doppler_force, doppler_force_along};
pub use spectrum::{fourier_amplitude, micromotion_amplitude, spectral_peak, MIN_MICROMOTION_CYCLES};
pub use tickle::{tickle_scan, TickleScan, TickleSettings, DEFAULT_TICKLE_COUPLING_PER_MM};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step {dt:.3e} s exceeds the limit {max:.3e} s (50 steps per RF cycle)")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("trajectory spans {cycles:.1} RF cycles, need at least {required}")]
    TooShort { cycles: f64, required: usize },
    #[error("compensation basis of rank {rank} cannot cancel the stray field (residual {residual:.3e} V/mm)")]
    SingularBasis { rank: usize, residual: f64 },
    #[error("no tickle response above the threshold {threshold:.3e} mm")]
    NoResonance { threshold: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Trap(#[from] TrapError),
}

/// Blade aperture assumed when no geometry is supplied, mm.
pub const DEFAULT_BLADE_APERTURE_MM: f64 = 2.0;
/// Ion is flagged divergent beyond this multiple of the blade aperture.
pub const DIVERGENCE_APERTURE_MULTIPLE: f64 = 10.0;
/// Default number of steps per RF cycle.
pub const DEFAULT_STEPS_PER_CYCLE: usize = 100;
/// Coarsest allowed step, in steps per RF cycle.
pub const MIN_STEPS_PER_CYCLE: usize = 50;

/// Uniform stray field, V/mm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrayField<T> {
    pub e_v_per_mm: [T; 3],
}

impl<T: Real> StrayField<T> {
    pub fn new(e_v_per_mm: [T; 3]) -> Result<Self, DynamicsError> {
        if e_v_per_mm.iter().any(|e| !e.is_finite()) {
            return Err(DynamicsError::InvalidInput("stray field must be finite".into()));
        }
        Ok(Self { e_v_per_mm })
    }

    pub fn zero() -> Self {
        Self {
            e_v_per_mm: [T::zero(); 3],
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            e_v_per_mm: self.e_v_per_mm.map(|e| e * c),
        }
    }

    pub fn norm(&self) -> T {
        self.e_v_per_mm.iter().fold(T::zero(), |s, &e| s + e * e).sqrt()
    }
}

/// Sampled ion trajectory on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    /// Spacing between stored samples, s.
    pub sample_dt: T,
    pub times: Vec<T>,
    pub positions_mm: Vec<[T; 3]>,
    pub velocities_mm_s: Vec<[T; 3]>,
    pub energies_ev: Vec<T>,
    pub divergent: bool,
    /// Time at which the divergence radius was crossed.
    pub divergence_time: Option<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> T {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => T::zero(),
        }
    }

    pub fn axis(&self, axis: Axis) -> Vec<T> {
        self.positions_mm.iter().map(|p| p[axis.index()]).collect()
    }

    pub fn max_radius_mm(&self) -> T {
        self.positions_mm.iter().map(|p| norm3(*p)).fold(T::zero(), T::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,x_mm,y_mm,z_mm,vx_mm_s,vy_mm_s,vz_mm_s,energy_ev\n");
        for i in 0..self.len() {
            let p = self.positions_mm[i];
            let v = self.velocities_mm_s[i];
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                self.times[i].as_f64(),
                p[0].as_f64(),
                p[1].as_f64(),
                p[2].as_f64(),
                v[0].as_f64(),
                v[1].as_f64(),
                v[2].as_f64(),
                self.energies_ev[i].as_f64()
            ));
        }
        out
    }
}

/// Sinusoidal field added along one axis, as applied by a tickle electrode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDrive<T> {
    pub axis: Axis,
    /// Field amplitude at the ion, V/mm.
    pub amplitude_v_per_mm: T,
    pub omega: T,
}

/// Knobs of a single integration beyond the initial conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionOptions<T> {
    pub duration: T,
    /// Defaults to one hundredth of an RF period.
    pub dt: Option<T>,
    pub stray: StrayField<T>,
    /// Linear friction rate, 1/s.
    pub damping: Option<T>,
    pub drive: Option<HarmonicDrive<T>>,
    /// Keep every n-th step.
    pub record_every: usize,
    pub divergence_radius_mm: T,
}

impl<T: Real> MotionOptions<T> {
    pub fn new(duration: T) -> Self {
        Self {
            duration,
            dt: None,
            stray: StrayField::zero(),
            damping: None,
            drive: None,
            record_every: 1,
            divergence_radius_mm: T::lit(DEFAULT_BLADE_APERTURE_MM * DIVERGENCE_APERTURE_MULTIPLE),
        }
    }
}

pub fn default_dt<T: Real>(model: &TrapModel<T>) -> T {
    rf_period(model) / T::lit(DEFAULT_STEPS_PER_CYCLE as f64)
}

pub fn rf_period<T: Real>(model: &TrapModel<T>) -> T {
    T::lit(2.0) * T::PI() / model.drive.omega_rf
}

fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Drift-kick-drift stepper in SI units. The force is evaluated at the
/// half-step time and friction is treated with the implicit midpoint rule, so
/// the step is symplectic when damping is off.
pub(crate) struct Stepper<'a, T> {
    model: &'a TrapModel<T>,
    q_over_m: T,
    stray_si: [T; 3],
    damping: T,
    drive: Option<HarmonicDrive<T>>,
    pub dt: T,
    pub step: u64,
    pub r: [T; 3],
    pub v: [T; 3],
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(
        model: &'a TrapModel<T>,
        species: &IonSpecies<T>,
        r0_mm: [T; 3],
        v0_mm_s: [T; 3],
        dt: T,
        stray: &StrayField<T>,
        damping: T,
        drive: Option<HarmonicDrive<T>>,
    ) -> Self {
        let mm = T::lit(MM);
        Self {
            model,
            q_over_m: species.q_over_m(),
            stray_si: stray.e_v_per_mm.map(|e| e / mm),
            damping,
            drive,
            dt,
            step: 0,
            r: r0_mm.map(|x| x * mm),
            v: v0_mm_s.map(|x| x * mm),
        }
    }

    pub fn time(&self) -> T {
        T::lit(self.step as f64) * self.dt
    }

    fn accel(&self, t: T, r: [T; 3]) -> [T; 3] {
        let k = self.model.curvature_si(t);
        let mut e = self.stray_si;
        if let Some(d) = self.drive {
            e[d.axis.index()] = e[d.axis.index()] + d.amplitude_v_per_mm / T::lit(MM) * (d.omega * t).cos();
        }
        [0, 1, 2].map(|i| self.q_over_m * (e[i] - k[i] * r[i]))
    }

    pub fn advance(&mut self) {
        let h = self.dt / T::lit(2.0);
        let t_mid = self.time() + h;
        let mid = [0, 1, 2].map(|i| self.r[i] + self.v[i] * h);
        let a = self.accel(t_mid, mid);
        let g = self.damping * h;
        for i in 0..3 {
            self.v[i] = (self.v[i] * (T::one() - g) + a[i] * self.dt) / (T::one() + g);
            self.r[i] = mid[i] + self.v[i] * h;
        }
        self.step += 1;
    }

    pub fn r_mm(&self) -> [T; 3] {
        self.r.map(|x| x / T::lit(MM))
    }

    pub fn v_mm_s(&self) -> [T; 3] {
        self.v.map(|x| x / T::lit(MM))
    }
}

fn check_dt<T: Real>(model: &TrapModel<T>, dt: T) -> Result<(), DynamicsError> {
    let max = rf_period(model) / T::lit(MIN_STEPS_PER_CYCLE as f64);
    if !(dt > T::zero()) {
        return Err(DynamicsError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if dt > max * T::lit(1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge {
            dt: dt.as_f64(),
            max: max.as_f64(),
        });
    }
    Ok(())
}

/// Total energy in eV: kinetic plus instantaneous trap and stray potential energy.
pub fn total_energy_ev<T: Real>(
    model: &TrapModel<T>,
    species: &IonSpecies<T>,
    stray: &StrayField<T>,
    r_mm: [T; 3],
    v_mm_s: [T; 3],
    t: T,
) -> T {
    let mm = T::lit(MM);
    let v2 = v_mm_s.iter().fold(T::zero(), |s, &v| s + v * mm * v * mm);
    let kinetic = species.mass_kg() * v2 / (T::lit(2.0) * T::lit(ELEMENTARY_CHARGE));
    let z = T::lit(species.charge as f64);
    let stray_pot = -(0..3).fold(T::zero(), |s, i| s + stray.e_v_per_mm[i] * r_mm[i]);
    kinetic + z * (potential_at(model, r_mm, t) + stray_pot)
}

/// Integrates one ion from `r0` (mm) and `v0` (mm/s) for `duration` seconds.
#[allow(clippy::too_many_arguments)]
pub fn integrate_motion<T: Real>(
    model: &TrapModel<T>,
    species: &IonSpecies<T>,
    r0_mm: [T; 3],
    v0_mm_s: [T; 3],
    duration: T,
    dt: Option<T>,
    stray: &StrayField<T>,
    damping: Option<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    let mut opts = MotionOptions::new(duration);
    opts.dt = dt;
    opts.stray = *stray;
    opts.damping = damping;
    integrate_with(model, species, r0_mm, v0_mm_s, &opts)
}

pub fn integrate_with<T: Real>(
    model: &TrapModel<T>,
    species: &IonSpecies<T>,
    r0_mm: [T; 3],
    v0_mm_s: [T; 3],
    opts: &MotionOptions<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    model.drive.validate()?;
    let dt = opts.dt.unwrap_or_else(|| default_dt(model));
    check_dt(model, dt)?;
    if !(opts.duration > T::zero()) || !opts.duration.is_finite() {
        return Err(DynamicsError::InvalidInput(format!(
            "duration must be positive, got {}",
            opts.duration
        )));
    }
    if opts.record_every == 0 {
        return Err(DynamicsError::InvalidInput("record_every must be at least 1".into()));
    }
    let damping = opts.damping.unwrap_or_else(T::zero);
    if !(damping >= T::zero()) {
        return Err(DynamicsError::InvalidInput(format!("damping must be >= 0, got {damping}")));
    }
    if r0_mm.iter().chain(v0_mm_s.iter()).any(|x| !x.is_finite()) {
        return Err(DynamicsError::InvalidInput("initial state must be finite".into()));
    }
    let steps = (opts.duration / dt).round().to_u64().unwrap_or(0).max(1);
    let mut s = Stepper::new(model, species, r0_mm, v0_mm_s, dt, &opts.stray, damping, opts.drive);
    let cap = (steps as usize) / opts.record_every + 1;
    let mut traj = Trajectory {
        sample_dt: dt * T::lit(opts.record_every as f64),
        times: Vec::with_capacity(cap),
        positions_mm: Vec::with_capacity(cap),
        velocities_mm_s: Vec::with_capacity(cap),
        energies_ev: Vec::with_capacity(cap),
        divergent: false,
        divergence_time: None,
    };
    let record = |s: &Stepper<T>, traj: &mut Trajectory<T>| {
        let (r, v, t) = (s.r_mm(), s.v_mm_s(), s.time());
        traj.times.push(t);
        traj.positions_mm.push(r);
        traj.velocities_mm_s.push(v);
        traj.energies_ev.push(total_energy_ev(model, species, &opts.stray, r, v, t));
    };
    record(&s, &mut traj);
    for k in 1..=steps {
        s.advance();
        let r = s.r_mm();
        if !(norm3(r) <= opts.divergence_radius_mm) {
            traj.divergent = true;
            traj.divergence_time = Some(s.time());
            break;
        }
        if k % opts.record_every as u64 == 0 {
            record(&s, &mut traj);
        }
    }
    Ok(traj)
}
