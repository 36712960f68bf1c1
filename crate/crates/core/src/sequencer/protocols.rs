//! Builders for the Rabi, state-decay and loading timelines.

use super::{Channel, Level, Pulse, Sequence, SequenceError, Step};
use crate::atomphys::{YB171_FIRST_STEP_THZ, YB174_FIRST_STEP_THZ};

/// Default cooling segment before state preparation, μs.
pub const COOLING_US: f64 = 1000.0;
/// State preparation with MW off and the UV EOM on, μs.
pub const PREP_US: f64 = 500.0;
/// Detection gate, μs.
pub const DETECTION_US: f64 = 100.0;
pub const RABI_SHOTS: u32 = 400;
/// Shots per wait time of the state-decay scan; a 50 μs gate collects few
/// photons, so 400 shots leave a 3% spread on the fitted time constant.
pub const DECAY_SHOTS: u32 = 2000;
/// Detection gate of the state-decay scan, μs.
pub const DECAY_GATE_US: f64 = 50.0;

const P369_171_UW: f64 = 27.0;
const P369_LOADING_UW: f64 = 100.0;
const P399_LOADING_UW: f64 = 100.0;
const P935_UW: f64 = 1200.0;
const P760_UW: f64 = 2000.0;
const OVEN_CURRENT_A: f64 = 3.0;
const LOADING_DETUNING_MHZ: f64 = -200.0;

/// Durations of loading steps 1 to 6, μs. The oven ramp and observation
/// times are operator choices; the exposure is about three seconds.
pub const LOADING_STEP_DURATIONS_US: [f64; 6] = [30e6, 0.5e6, 3e6, 1e6, 0.5e6, 1e6];

fn power(p: f64) -> Level {
    Level {
        power_uw: Some(p),
        ..Level::default()
    }
}

fn laser_369(p: f64, detuning: f64) -> Level {
    Level {
        power_uw: Some(p),
        detuning_mhz: Some(detuning),
        ..Level::default()
    }
}

fn mw_level() -> Level {
    Level {
        detuning_mhz: Some(0.0),
        ..Level::default()
    }
}

fn check_time(name: &str, v: f64) -> Result<(), SequenceError> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(SequenceError::InvalidInput(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Cooling, state preparation, a MW pulse of `tau_mw_us` and detection.
pub fn build_rabi_sequence(tau_mw_us: f64) -> Result<Sequence, SequenceError> {
    check_time("tau_mw", tau_mw_us)?;
    let mut s = Sequence::new(format!("rabi tau={tau_mw_us}us"), RABI_SHOTS);
    s.scan_value_us = Some(tau_mw_us);
    let prep = COOLING_US;
    let expose = prep + PREP_US;
    let detect = expose + tau_mw_us;
    // cooling: every laser, both EOMs and the MW
    s.push(Pulse::new(Channel::Laser369Pi, 0.0, expose).with_level(laser_369(P369_171_UW, 0.0)));
    s.push(Pulse::new(Channel::Laser935, 0.0, expose).with_level(power(P935_UW)));
    s.push(Pulse::new(Channel::Laser760, 0.0, COOLING_US).with_level(power(P760_UW)));
    s.push(Pulse::new(Channel::EomUv, 0.0, expose));
    s.push(Pulse::new(Channel::EomIr, 0.0, expose));
    s.push(Pulse::new(Channel::Mw, 0.0, COOLING_US).with_level(mw_level()));
    if tau_mw_us > 0.0 {
        s.push(Pulse::new(Channel::Mw, expose, tau_mw_us).with_level(mw_level()));
    }
    s.push(Pulse::new(Channel::Laser369Pi, detect, DETECTION_US).with_level(laser_369(P369_171_UW, 0.0)));
    s.push(Pulse::new(Channel::Laser935, detect, DETECTION_US).with_level(power(P935_UW)));
    s.push(Pulse::new(Channel::EomIr, detect, DETECTION_US));
    s.push(Pulse::new(Channel::PmtGate, detect, DETECTION_US));
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVariant {
    EomOff,
    EomOn,
}

/// One sequence per wait: MW and lasers on, MW off at the end of cooling,
/// and a detection gate opened `wait` μs later with the lasers left on.
pub fn build_state_decay_sequence(waits_us: &[f64], variant: DecayVariant) -> Result<Vec<Sequence>, SequenceError> {
    waits_us
        .iter()
        .map(|&w| {
            check_time("wait", w)?;
            let mut s = Sequence::new(format!("decay wait={w}us {variant:?}"), DECAY_SHOTS);
            s.scan_value_us = Some(w);
            let off = COOLING_US;
            let end = off + w + DECAY_GATE_US;
            s.push(Pulse::new(Channel::Laser369Pi, 0.0, end).with_level(laser_369(P369_171_UW, 0.0)));
            s.push(Pulse::new(Channel::Laser935, 0.0, end).with_level(power(P935_UW)));
            s.push(Pulse::new(Channel::EomIr, 0.0, end));
            s.push(Pulse::new(Channel::Mw, 0.0, off).with_level(mw_level()));
            if variant == DecayVariant::EomOn {
                s.push(Pulse::new(Channel::EomUv, off, end - off));
            }
            s.push(Pulse::new(Channel::PmtGate, off + w, DECAY_GATE_US));
            Ok(s)
        })
        .collect()
}

/// Loading timeline for Yb-171 (six steps) or Yb-174 (steps 2 and 4 skipped).
pub fn build_loading_protocol(isotope: u32) -> Result<Sequence, SequenceError> {
    let (first_step_thz, odd) = match isotope {
        171 => (YB171_FIRST_STEP_THZ, true),
        174 => (YB174_FIRST_STEP_THZ, false),
        other => return Err(SequenceError::UnknownIsotope(other)),
    };
    let d = LOADING_STEP_DURATIONS_US;
    let mut starts = [0.0; 6];
    for i in 1..6 {
        let skipped = !odd && (i == 2 || i == 4);
        starts[i] = starts[i - 1] + if skipped { 0.0 } else { d[i - 1] };
    }
    let end = starts[5] + d[5];
    let mut s = Sequence::new(format!("loading Yb-{isotope}"), 1);
    let step = |s: &mut Sequence, n: usize, text: String| {
        s.steps.push(Step {
            number: n as u32,
            start_us: starts[n - 1],
            text,
        })
    };

    s.push(Pulse::new(Channel::Oven, 0.0, end).with_level(Level {
        current_a: Some(OVEN_CURRENT_A),
        ..Level::default()
    }));
    step(&mut s, 1, format!("Oven current ramped slowly up to {OVEN_CURRENT_A:.1} A."));

    if odd {
        s.push(Pulse::new(Channel::Mw, starts[1], end - starts[1]).with_level(mw_level()));
        step(&mut s, 2, "Microwave switched on, tuned to the strongest fluorescence line.".into());
    }

    let t3 = starts[2];
    let expose = d[2];
    s.push(Pulse::new(Channel::Laser399, t3, expose).with_level(Level {
        power_uw: Some(P399_LOADING_UW),
        frequency_thz: Some(first_step_thz),
        ..Level::default()
    }));
    let first_369 = if odd { expose } else { end - t3 };
    s.push(Pulse::new(Channel::Laser369Pi, t3, first_369).with_level(laser_369(P369_LOADING_UW, LOADING_DETUNING_MHZ)));
    s.push(Pulse::new(Channel::Laser935, t3, end - t3).with_level(power(P935_UW)));
    if odd {
        s.push(Pulse::new(Channel::EomIr, t3, end - t3));
    }
    step(
        &mut s,
        3,
        format!(
            "399 nm ({first_step_thz} THz) and 369 nm beams on at {P369_LOADING_UW:.0} uW each, 369 nm at {LOADING_DETUNING_MHZ:.0} MHz; expose for about {:.0} s.",
            expose / 1e6
        ),
    );

    if odd {
        let t4 = starts[3];
        s.push(Pulse::new(Channel::Laser369Pi, t4, end - t4).with_level(laser_369(P369_171_UW, 0.0)));
        step(
            &mut s,
            4,
            format!("369 nm power reduced to {P369_171_UW:.0} uW and 399 nm off; 369 nm brought slowly onto resonance."),
        );
    }
    step(&mut s, 5, "935 nm repump tuned for maximum fluorescence.".into());
    step(&mut s, 6, "Check for a single ion or a chain on the camera.".into());
    Ok(s)
}
