//! Shot-by-shot execution of a timeline against the two-level ion model.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate, Channel, Sequence, SequenceError};
use crate::atomphys::{poisson, DetectionRates};
use crate::calibration::repeat_rng;

/// Simulation parameters of the ion and detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Backend {
    pub rates: DetectionRates,
    /// MW Rabi frequency `Omega / 2 pi`, Hz.
    pub rabi_frequency_hz: f64,
    /// MW detuning added to any pulse level, Hz.
    pub mw_detuning_hz: f64,
    /// Bright fraction left after long optical pumping with MW off.
    pub pump_floor: f64,
    /// Pumping time constant with the UV EOM on, s.
    pub eom_pump_tau_s: f64,
    pub eom_pump_floor: f64,
    /// Counts above which a shot is assigned bright; the midpoint of the
    /// dark and bright means when unset.
    pub threshold_counts: Option<f64>,
}

impl Default for Backend {
    fn default() -> Self {
        Self {
            rates: DetectionRates::default(),
            rabi_frequency_hz: 10e3,
            mw_detuning_hz: 0.0,
            pump_floor: 0.03,
            eom_pump_tau_s: 50e-6,
            eom_pump_floor: 0.005,
            threshold_counts: None,
        }
    }
}

impl Backend {
    /// MW pi time, μs.
    pub fn pi_time_us(&self) -> f64 {
        1e6 / (2.0 * self.rabi_frequency_hz)
    }

    fn validate(&self) -> Result<(), SequenceError> {
        let r = &self.rates;
        let vals = [
            r.bright_hz,
            r.background_hz,
            r.leakage_hz,
            r.pump_tau_s,
            self.rabi_frequency_hz,
            self.eom_pump_tau_s,
        ];
        if vals.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || !self.mw_detuning_hz.is_finite() {
            return Err(SequenceError::InvalidInput("backend rates must be finite and >= 0".into()));
        }
        for f in [self.pump_floor, self.eom_pump_floor] {
            if !(0.0..=1.0).contains(&f) {
                return Err(SequenceError::InvalidInput(format!("pump floor {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    seconds: f64,
    light: bool,
    repump: bool,
    mw: bool,
    mw_detuning_hz: f64,
    eom_uv: bool,
    gate: bool,
}

fn intervals(seq: &Sequence, backend: &Backend) -> Vec<Interval> {
    let mut edges: Vec<i64> = seq.pulses.iter().flat_map(|p| [p.start_ns, p.end_ns()]).collect();
    edges.sort_unstable();
    edges.dedup();
    edges
        .windows(2)
        .map(|w| {
            let active = |c: Channel| seq.pulses.iter().find(|p| p.channel == c && p.start_ns <= w[0] && w[0] < p.end_ns());
            let mw = active(Channel::Mw);
            Interval {
                seconds: (w[1] - w[0]) as f64 * 1e-9,
                light: active(Channel::Laser369Pi).is_some() || active(Channel::Laser369Sigma).is_some(),
                repump: active(Channel::Laser935).is_some(),
                mw: mw.is_some(),
                mw_detuning_hz: backend.mw_detuning_hz
                    + mw.and_then(|p| p.level?.detuning_mhz).unwrap_or(0.0) * 1e6,
                eom_uv: active(Channel::EomUv).is_some(),
                gate: active(Channel::PmtGate).is_some(),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
enum IonState {
    /// Incoherent: bright (F=1) or dark (F=0).
    Classical(bool),
    /// Amplitudes `(dark, bright)` as `(re, im)` pairs.
    Coherent([(f64, f64); 2]),
}

fn rotate(a: [(f64, f64); 2], omega: f64, delta: f64, t: f64) -> [(f64, f64); 2] {
    let w = (omega * omega + delta * delta).sqrt();
    if w == 0.0 {
        return a;
    }
    let (s, c) = (w * t / 2.0).sin_cos();
    let (dr, om) = (delta / w * s, omega / w * s);
    // U = [[c + i dr, -i om], [-i om, c - i dr]]
    let mul = |x: (f64, f64), re: f64, im: f64| (x.0 * re - x.1 * im, x.0 * im + x.1 * re);
    let add = |x: (f64, f64), y: (f64, f64)| (x.0 + y.0, x.1 + y.1);
    [
        add(mul(a[0], c, dr), mul(a[1], 0.0, -om)),
        add(mul(a[0], 0.0, -om), mul(a[1], c, -dr)),
    ]
}

struct ShotTally {
    bright_gate_s: f64,
    dark_gate_s: f64,
    gate_s: f64,
}

fn simulate_shot(iv: &[Interval], backend: &Backend, rng: &mut ChaCha8Rng) -> u64 {
    let mut state = IonState::Classical(true);
    let mut tally = ShotTally {
        bright_gate_s: 0.0,
        dark_gate_s: 0.0,
        gate_s: 0.0,
    };
    let omega = 2.0 * std::f64::consts::PI * backend.rabi_frequency_hz;
    for seg in iv {
        if seg.gate {
            tally.gate_s += seg.seconds;
        }
        if !seg.light {
            state = match (state, seg.mw) {
                (IonState::Classical(b), true) => {
                    let amp = if b { [(0.0, 0.0), (1.0, 0.0)] } else { [(1.0, 0.0), (0.0, 0.0)] };
                    IonState::Coherent(rotate(amp, omega, 2.0 * std::f64::consts::PI * seg.mw_detuning_hz, seg.seconds))
                }
                (IonState::Coherent(a), true) => {
                    IonState::Coherent(rotate(a, omega, 2.0 * std::f64::consts::PI * seg.mw_detuning_hz, seg.seconds))
                }
                (s, false) => s,
            };
            continue;
        }
        // light collapses any superposition
        let mut bright = match state {
            IonState::Classical(b) => b,
            IonState::Coherent(a) => rng.gen::<f64>() < a[1].0 * a[1].0 + a[1].1 * a[1].1,
        };
        let fluoresces = seg.gate && seg.repump;
        if seg.mw {
            bright = true;
            if fluoresces {
                tally.bright_gate_s += seg.seconds;
            } else if seg.gate {
                tally.dark_gate_s += seg.seconds;
            }
        } else {
            let (tau, floor) = if seg.eom_uv {
                (backend.eom_pump_tau_s, backend.eom_pump_floor)
            } else {
                (backend.rates.pump_tau_s, backend.pump_floor)
            };
            let (k_down, k_up) = if tau > 0.0 {
                ((1.0 - floor) / tau, floor / tau)
            } else {
                (0.0, 0.0)
            };
            let mut left = seg.seconds;
            while left > 0.0 {
                let rate = if bright { k_down } else { k_up };
                let dwell = if rate > 0.0 { Exp::new(rate).unwrap().sample(rng) } else { f64::INFINITY };
                let spent = dwell.min(left);
                if fluoresces && bright {
                    tally.bright_gate_s += spent;
                } else if seg.gate {
                    tally.dark_gate_s += spent;
                }
                left -= spent;
                if dwell < f64::INFINITY && spent == dwell {
                    bright = !bright;
                }
            }
        }
        state = IonState::Classical(bright);
    }
    let r = &backend.rates;
    let mean = r.background_hz * tally.gate_s + r.bright_hz * tally.bright_gate_s + r.leakage_hz * tally.dark_gate_s;
    poisson(mean, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub scan_value_us: Option<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Sample standard deviation of the per-shot counts.
    pub std: f64,
    /// Standard deviation of the mean, `std / sqrt(shots)`.
    pub sem: f64,
    pub threshold: f64,
    pub bright_fraction: f64,
}

/// Executes every shot of `seq`. Shot `i` draws from stream `i` of `seed`,
/// so the result does not depend on scheduling.
pub fn run(seq: &Sequence, backend: &Backend, seed: u64) -> Result<RunSummary, SequenceError> {
    let problems = validate(seq);
    if !problems.is_empty() {
        return Err(SequenceError::Invalid(problems));
    }
    backend.validate()?;
    let iv = intervals(seq, backend);
    let counts: Vec<u64> = (0..seq.shots as u64)
        .into_par_iter()
        .map(|i| simulate_shot(&iv, backend, &mut repeat_rng(seed, i)))
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = if counts.len() > 1 {
        counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let gate: f64 = iv.iter().filter(|s| s.gate).map(|s| s.seconds).sum();
    let r = &backend.rates;
    let threshold = backend.threshold_counts.unwrap_or_else(|| {
        let dark = (r.background_hz + r.leakage_hz) * gate;
        let bright_signal = if r.pump_tau_s > 0.0 {
            r.bright_hz * r.pump_tau_s * (1.0 - (-gate / r.pump_tau_s).exp())
        } else {
            0.0
        };
        dark + (r.background_hz * gate + bright_signal - dark) / 2.0
    });
    let bright_fraction = counts.iter().filter(|&&c| c as f64 > threshold).count() as f64 / n;
    Ok(RunSummary {
        name: seq.name.clone(),
        scan_value_us: seq.scan_value_us,
        counts,
        mean,
        std: var.sqrt(),
        sem: (var / n).sqrt(),
        threshold,
        bright_fraction,
    })
}

/// Runs a list of sequences with seeds derived from `seed` by position.
pub fn run_scan(seqs: &[Sequence], backend: &Backend, seed: u64) -> Result<Vec<RunSummary>, SequenceError> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| run(s, backend, seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))))
        .collect()
}

/// `tau_us,mean_counts,std,sem,bright_fraction` with the scan coordinate in
/// the first column.
pub fn scan_to_csv(results: &[RunSummary]) -> String {
    let mut out = String::from("tau_us,mean_counts,std,sem,bright_fraction\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scan_value_us.unwrap_or(f64::NAN),
            r.mean,
            r.std,
            r.sem,
            r.bright_fraction
        ));
    }
    out
}
