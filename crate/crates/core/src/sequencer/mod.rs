//! Deterministic pulse timelines and their simulated execution.
//!
//! Time is kept internally in integer nanoseconds; the JSON form uses
//! microseconds.

mod engine;
mod protocols;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{run, run_scan, scan_to_csv, Backend, RunSummary};
pub use protocols::{
    build_loading_protocol, build_rabi_sequence, build_state_decay_sequence, DecayVariant, COOLING_US,
    DECAY_GATE_US, DECAY_SHOTS, DETECTION_US, LOADING_STEP_DURATIONS_US, PREP_US, RABI_SHOTS,
};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("unknown channel '{0}'")]
    UnknownChannel(String),
    #[error("unknown isotope {0} (expected 171 or 174)")]
    UnknownIsotope(u32),
    #[error("invalid sequence: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sequence JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    #[serde(rename = "laser_369_pi")]
    Laser369Pi,
    #[serde(rename = "laser_369_sigma")]
    Laser369Sigma,
    #[serde(rename = "laser_399")]
    Laser399,
    #[serde(rename = "laser_935")]
    Laser935,
    #[serde(rename = "laser_760")]
    Laser760,
    EomUv,
    EomIr,
    Mw,
    PmtGate,
    Oven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Digital,
    Leveled,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::Laser369Pi,
        Channel::Laser369Sigma,
        Channel::Laser399,
        Channel::Laser935,
        Channel::Laser760,
        Channel::EomUv,
        Channel::EomIr,
        Channel::Mw,
        Channel::PmtGate,
        Channel::Oven,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Laser369Pi => "laser_369_pi",
            Channel::Laser369Sigma => "laser_369_sigma",
            Channel::Laser399 => "laser_399",
            Channel::Laser935 => "laser_935",
            Channel::Laser760 => "laser_760",
            Channel::EomUv => "eom_uv",
            Channel::EomIr => "eom_ir",
            Channel::Mw => "mw",
            Channel::PmtGate => "pmt_gate",
            Channel::Oven => "oven",
        }
    }

    pub fn kind(self) -> ChannelKind {
        match self {
            Channel::EomUv | Channel::EomIr | Channel::PmtGate => ChannelKind::Digital,
            _ => ChannelKind::Leveled,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| SequenceError::UnknownChannel(s.to_string()))
    }
}

/// Analog settings of a leveled channel; unset fields keep their defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_uw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_thz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_a: Option<f64>,
}

/// Conversion between the microsecond interface and the nanosecond clock.
pub fn us_to_ns(us: f64) -> i64 {
    (us * 1e3).round() as i64
}

pub fn ns_to_us(ns: i64) -> f64 {
    ns as f64 / 1e3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PulseJson", into = "PulseJson")]
pub struct Pulse {
    pub channel: Channel,
    pub start_ns: i64,
    pub duration_ns: i64,
    pub level: Option<Level>,
}

impl Pulse {
    pub fn new(channel: Channel, start_us: f64, duration_us: f64) -> Self {
        Self {
            channel,
            start_ns: us_to_ns(start_us),
            duration_ns: us_to_ns(duration_us),
            level: None,
        }
    }

    pub fn with_level(mut self, level: Level) -> Self {
        self.level = Some(level);
        self
    }

    pub fn end_ns(&self) -> i64 {
        self.start_ns + self.duration_ns
    }

    pub fn overlaps(&self, other: &Pulse) -> bool {
        self.start_ns < other.end_ns() && other.start_ns < self.end_ns()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PulseJson {
    channel: Channel,
    start_us: f64,
    duration_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level: Option<Level>,
}

impl From<PulseJson> for Pulse {
    fn from(p: PulseJson) -> Self {
        Self {
            channel: p.channel,
            start_ns: us_to_ns(p.start_us),
            duration_ns: us_to_ns(p.duration_us),
            level: p.level,
        }
    }
}

impl From<Pulse> for PulseJson {
    fn from(p: Pulse) -> Self {
        Self {
            channel: p.channel,
            start_us: ns_to_us(p.start_ns),
            duration_us: ns_to_us(p.duration_ns),
            level: p.level,
        }
    }
}

/// Numbered operator step attached to a protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub number: u32,
    pub start_us: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sequence {
    #[serde(default)]
    pub name: String,
    pub pulses: Vec<Pulse>,
    pub shots: u32,
    #[serde(default)]
    pub seed: u64,
    /// Scan coordinate this sequence belongs to (e.g. MW time or wait), μs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_value_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<Step>,
}

impl Sequence {
    pub fn new(name: impl Into<String>, shots: u32) -> Self {
        Self {
            name: name.into(),
            pulses: Vec::new(),
            shots,
            seed: 0,
            scan_value_us: None,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, pulse: Pulse) {
        self.pulses.push(pulse);
    }

    /// End of the last pulse, ns.
    pub fn duration_ns(&self) -> i64 {
        self.pulses.iter().map(Pulse::end_ns).max().unwrap_or(0)
    }

    pub fn duration_us(&self) -> f64 {
        ns_to_us(self.duration_ns())
    }

    pub fn on_channel(&self, channel: Channel) -> impl Iterator<Item = &Pulse> {
        self.pulses.iter().filter(move |p| p.channel == channel)
    }

    pub fn from_json(text: &str) -> Result<Self, SequenceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    /// Numbered human-readable steps.
    pub fn render_steps(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}. [t = {:.0} us] {}\n", s.number, s.start_us, s.text))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
    pub pulses: Vec<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Lists every rule the sequence breaks; empty when it is well formed.
pub fn validate(seq: &Sequence) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut v = |code: &str, message: String, pulses: Vec<usize>| {
        out.push(Violation {
            code: code.into(),
            message,
            pulses,
        })
    };
    if seq.shots == 0 {
        v("no_shots", "shot count must be at least 1".into(), vec![]);
    }
    for (i, p) in seq.pulses.iter().enumerate() {
        if p.start_ns < 0 {
            v("negative_time", format!("pulse {i} on {} starts at {} us", p.channel, ns_to_us(p.start_ns)), vec![i]);
        }
        if p.duration_ns <= 0 {
            v(
                "non_positive_duration",
                format!("pulse {i} on {} lasts {} us", p.channel, ns_to_us(p.duration_ns)),
                vec![i],
            );
        }
    }
    for i in 0..seq.pulses.len() {
        for j in i + 1..seq.pulses.len() {
            let (a, b) = (&seq.pulses[i], &seq.pulses[j]);
            if a.channel == b.channel && a.overlaps(b) {
                v("overlap", format!("pulses {i} and {j} overlap on {}", a.channel), vec![i, j]);
            }
            let mw_gate = (a.channel == Channel::Mw && b.channel == Channel::PmtGate)
                || (a.channel == Channel::PmtGate && b.channel == Channel::Mw);
            if mw_gate && a.overlaps(b) {
                v("mw_during_detection", format!("MW is on during the detection gate (pulses {i}, {j})"), vec![i, j]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
        assert!("laser_123".parse::<Channel>().is_err());
    }

    #[test]
    fn json_round_trip_in_microseconds() {
        let mut s = Sequence::new("t", 3);
        s.push(Pulse::new(Channel::Laser399, 1.5, 2.25).with_level(Level {
            power_uw: Some(100.0),
            ..Level::default()
        }));
        let text = s.to_json();
        assert!(text.contains("\"start_us\": 1.5"));
        let back = Sequence::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.pulses[0].duration_ns, 2250);
        assert!(Sequence::from_json(r#"{"pulses":[],"shots":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn violations() {
        let mut s = Sequence::new("bad", 1);
        s.push(Pulse::new(Channel::Laser399, 0.0, 10.0));
        s.push(Pulse::new(Channel::Laser399, 5.0, 10.0));
        s.push(Pulse::new(Channel::Mw, 20.0, 10.0));
        s.push(Pulse::new(Channel::PmtGate, 25.0, 10.0));
        s.push(Pulse::new(Channel::Oven, -1.0, 0.0));
        let codes: Vec<String> = validate(&s).into_iter().map(|v| v.code).collect();
        for c in ["overlap", "mw_during_detection", "negative_time", "non_positive_duration"] {
            assert!(codes.iter().any(|x| x == c), "{c} missing from {codes:?}");
        }
        let mut ok = Sequence::new("ok", 1);
        ok.push(Pulse::new(Channel::Laser399, 0.0, 10.0));
        ok.push(Pulse::new(Channel::Laser399, 10.0, 10.0));
        assert!(validate(&ok).is_empty());
    }
}
