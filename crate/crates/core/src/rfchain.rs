//! Lumped-element RF drive chain and microwave up-conversion bookkeeping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trapmodel::RF_VOLTAGE_CEILING;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfError {
    #[error("invalid component value: {0}")]
    InvalidComponent(String),
    #[error("output of {requested:.1} V exceeds the {ceiling:.0} V ceiling")]
    CeilingExceeded { requested: f64, ceiling: f64 },
    #[error("invalid mixer plan: {0}")]
    InvalidPlan(String),
    #[error("{} lines fall within the resonance: {lines:?}", lines.len())]
    AmbiguousPlan { lines: Vec<SpectralLine> },
    #[error("no line within {halfwidth_mhz} MHz of {transition_ghz} GHz")]
    NoLine { transition_ghz: f64, halfwidth_mhz: f64 },
}

/// Default stray capacitance of leads and feedthroughs, F.
pub const DEFAULT_PARASITIC_F: f64 = 20e-12;

fn positive<T: Real>(name: &str, v: T) -> Result<T, RfError> {
    if v > T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(RfError::InvalidComponent(format!("{name} must be positive, got {v}")))
    }
}

/// Tank resonator seen by the trap: a coil against the trap and stray capacitance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel<T> {
    pub inductance_h: T,
    pub trap_capacitance_f: T,
    pub parasitic_capacitance_f: T,
    pub q_factor: T,
}

impl<T: Real> ResonatorModel<T> {
    pub fn new(inductance_h: T, trap_capacitance_f: T, parasitic_capacitance_f: T, q_factor: T) -> Result<Self, RfError> {
        Ok(Self {
            inductance_h: positive("inductance", inductance_h)?,
            trap_capacitance_f: positive("trap capacitance", trap_capacitance_f)?,
            parasitic_capacitance_f: positive("parasitic capacitance", parasitic_capacitance_f)?,
            q_factor: positive("Q", q_factor)?,
        })
    }

    pub fn total_capacitance(&self) -> T {
        self.trap_capacitance_f + self.parasitic_capacitance_f
    }
}

/// `1 / (2 pi sqrt(L C))`, Hz.
pub fn resonant_frequency<T: Real>(res: &ResonatorModel<T>) -> T {
    T::one() / (T::lit(2.0) * T::PI() * (res.inductance_h * res.total_capacitance()).sqrt())
}

/// Coil inductance (H) that resonates `c_total` (F) at `f_target` (Hz).
pub fn required_inductance<T: Real>(f_target: T, c_total: T) -> Result<T, RfError> {
    let f = positive("frequency", f_target)?;
    let c = positive("capacitance", c_total)?;
    let w = T::lit(2.0) * T::PI() * f;
    Ok(T::one() / (w * w * c))
}

/// Ideal matched step-up `Q V_drive`; errors above the electrode voltage ceiling.
pub fn stepup_voltage<T: Real>(q_factor: T, drive_amplitude: T) -> Result<T, RfError> {
    let q = positive("Q", q_factor)?;
    let v = positive("drive amplitude", drive_amplitude)?;
    let out = q * v;
    if out > T::lit(RF_VOLTAGE_CEILING) {
        return Err(RfError::CeilingExceeded {
            requested: out.as_f64(),
            ceiling: RF_VOLTAGE_CEILING,
        });
    }
    Ok(out)
}

/// Drive amplitude needed to reach `target` volts on the electrodes.
pub fn required_drive<T: Real>(q_factor: T, target: T) -> Result<T, RfError> {
    let q = positive("Q", q_factor)?;
    let t = positive("target amplitude", target)?;
    if t > T::lit(RF_VOLTAGE_CEILING) {
        return Err(RfError::CeilingExceeded {
            requested: t.as_f64(),
            ceiling: RF_VOLTAGE_CEILING,
        });
    }
    Ok(t / q)
}

/// Pick-off fraction `C1 / (C1 + C2)` of the capacitive monitor divider.
pub fn divider_ratio<T: Real>(c1: T, c2: T) -> Result<T, RfError> {
    let a = positive("C1", c1)?;
    let b = positive("C2", c2)?;
    Ok(a / (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    LowerSideband,
    LoLeakage,
    UpperSideband,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub kind: LineKind,
    pub frequency_ghz: f64,
    /// Level relative to a sideband, dB.
    pub level_db: f64,
}

/// Mixer up-conversion plan: LO in GHz, IF in MHz, LO leakage in dB below the
/// sidebands (`-inf` for an ideal mixer).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixerPlan<T> {
    pub f_lo_ghz: T,
    pub f_if_mhz: T,
    pub lo_leakage_db: T,
}

impl<T: Real> MixerPlan<T> {
    pub fn new(f_lo_ghz: T, f_if_mhz: T, lo_leakage_db: T) -> Result<Self, RfError> {
        let p = Self {
            f_lo_ghz,
            f_if_mhz,
            lo_leakage_db,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RfError> {
        if !(self.f_if_mhz >= T::zero()) || !self.f_if_mhz.is_finite() {
            return Err(RfError::InvalidPlan(format!("f_IF must be >= 0, got {}", self.f_if_mhz)));
        }
        if !(self.f_lo_ghz * T::lit(1e3) > self.f_if_mhz) || !self.f_lo_ghz.is_finite() {
            return Err(RfError::InvalidPlan(format!(
                "f_LO ({} GHz) must exceed f_IF ({} MHz)",
                self.f_lo_ghz, self.f_if_mhz
            )));
        }
        if self.lo_leakage_db.is_nan() || self.lo_leakage_db == T::infinity() {
            return Err(RfError::InvalidPlan("LO leakage must be finite or -inf".into()));
        }
        Ok(())
    }

    /// LO frequency that puts the lower sideband on `target_ghz` for this IF.
    pub fn lo_for_lower_sideband(target_ghz: T, f_if_mhz: T) -> T {
        target_ghz + f_if_mhz / T::lit(1e3)
    }
}

/// Output spectrum of an ideal multiplier plus LO feed-through.
pub fn mixer_output<T: Real>(plan: &MixerPlan<T>) -> Vec<SpectralLine> {
    let lo = plan.f_lo_ghz.as_f64();
    let fi = plan.f_if_mhz.as_f64() / 1e3;
    let mut lines = vec![SpectralLine {
        kind: LineKind::LowerSideband,
        frequency_ghz: lo - fi,
        level_db: 0.0,
    }];
    let leak = plan.lo_leakage_db.as_f64();
    if leak.is_finite() {
        lines.push(SpectralLine {
            kind: LineKind::LoLeakage,
            frequency_ghz: lo,
            level_db: leak,
        });
    }
    lines.push(SpectralLine {
        kind: LineKind::UpperSideband,
        frequency_ghz: lo + fi,
        level_db: 0.0,
    });
    lines
}

/// Number of distinct frequencies among `lines` (coincident lines count once).
pub fn distinct_frequencies(lines: &[SpectralLine]) -> usize {
    let mut f: Vec<f64> = lines.iter().map(|l| l.frequency_ghz).collect();
    f.sort_by(f64::total_cmp);
    f.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    f.len()
}

/// Returns the single line within `halfwidth_mhz` of the transition.
pub fn frequency_plan_check(
    lines: &[SpectralLine],
    transition_ghz: f64,
    halfwidth_mhz: f64,
) -> Result<SpectralLine, RfError> {
    if !(halfwidth_mhz > 0.0) {
        return Err(RfError::InvalidPlan(format!("halfwidth must be > 0, got {halfwidth_mhz}")));
    }
    let mut hits: Vec<SpectralLine> = lines
        .iter()
        .filter(|l| ((l.frequency_ghz - transition_ghz) * 1e3).abs() <= halfwidth_mhz)
        .copied()
        .collect();
    hits.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.frequency_ghz.total_cmp(&b.frequency_ghz)));
    match hits.len() {
        0 => Err(RfError::NoLine {
            transition_ghz,
            halfwidth_mhz,
        }),
        1 => Ok(hits[0]),
        _ => Err(RfError::AmbiguousPlan { lines: hits }),
    }
}

/// One stage of a signal chain with its output level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLevel {
    pub stage: String,
    pub value: f64,
    pub unit: String,
}

/// RF drive chain: generator amplitude, resonator output and monitor pick-off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub resonant_frequency_mhz: f64,
    pub stages: Vec<StageLevel>,
}

pub fn rf_chain_report(
    res: &ResonatorModel<f64>,
    drive_amplitude_v: f64,
    divider: Option<(f64, f64)>,
) -> Result<ChainReport, RfError> {
    let out = stepup_voltage(res.q_factor, drive_amplitude_v)?;
    let mut stages = vec![
        StageLevel {
            stage: "amplifier output".into(),
            value: drive_amplitude_v,
            unit: "V".into(),
        },
        StageLevel {
            stage: "resonator output".into(),
            value: out,
            unit: "V".into(),
        },
    ];
    if let Some((c1, c2)) = divider {
        stages.push(StageLevel {
            stage: "divider monitor".into(),
            value: out * divider_ratio(c1, c2)?,
            unit: "V".into(),
        });
    }
    Ok(ChainReport {
        resonant_frequency_mhz: resonant_frequency(res) / 1e6,
        stages,
    })
}

/// Gain stage of the microwave chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainStage {
    pub name: String,
    pub gain_db: f64,
}

/// Cumulative power levels (dBm) through a list of gain stages.
pub fn mw_chain_levels(input_dbm: f64, stages: &[GainStage]) -> Vec<StageLevel> {
    let mut level = input_dbm;
    let mut out = vec![StageLevel {
        stage: "source".into(),
        value: level,
        unit: "dBm".into(),
    }];
    for s in stages {
        level += s.gain_db;
        out.push(StageLevel {
            stage: s.name.clone(),
            value: level,
            unit: "dBm".into(),
        });
    }
    out
}
