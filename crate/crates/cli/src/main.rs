//! `bladetrap` command-line entry point.

mod commands;
mod error;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use bladetrap::ScanRange;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;
use workspace::{write_run, WorkspaceConfig, DEFAULT_SEED};

#[derive(Debug, Parser, Serialize)]
#[command(name = "bladetrap", version, about = "Blade ion trap modelling toolkit")]
pub struct Cli {
    /// Workspace config JSON with input paths, output directory and seed.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every random draw of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the workspace setting.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrapArgs {
    /// Trap model JSON; falls back to the workspace trap_model.
    #[arg(long)]
    pub trap: Option<PathBuf>,
    /// Ion species label (174 or 171).
    #[arg(long, default_value = "174")]
    pub species: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GeometryArgs {
    /// Geometry JSON; falls back to the workspace geometry, then preset a.
    #[arg(long, conflicts_with = "preset")]
    pub geometry: Option<PathBuf>,
    /// Built-in geometry variant: a, b or c.
    #[arg(long)]
    pub preset: Option<String>,
    /// Override the grid resolution (points per edge).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Directory for cached basis fields.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for bladetrap::Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => bladetrap::Axis::X,
            AxisArg::Y => bladetrap::Axis::Y,
            AxisArg::Z => bladetrap::Axis::Z,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// q over a grid of RF and DC voltages.
    Stability {
        #[command(flatten)]
        trap: TrapArgs,
        /// RF amplitudes start:stop:count, V.
        #[arg(long)]
        vrf: ScanRange,
        /// Endcap voltages start:stop:count, V.
        #[arg(long)]
        vdc: ScanRange,
    },
    /// Solve the field of one electrode and report its curvatures.
    SolveField {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value = "blade_a")]
        electrode: String,
        #[arg(long, default_value_t = 1.0)]
        volts: f64,
    },
    /// Trap model coefficients extracted from solved fields.
    Coeffs {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value_t = 7.262)]
        rf_mhz: f64,
        #[arg(long, default_value_t = 300.0)]
        vrf: f64,
        #[arg(long, default_value_t = 90.0)]
        vdc: f64,
    },
    /// Integrate the motion under a stray field and report micromotion.
    Micromotion {
        #[command(flatten)]
        trap: TrapArgs,
        /// Stray field ex,ey,ez in V/mm.
        #[arg(long, default_value = "0.01,0,0")]
        stray: String,
        /// Integration length in RF periods.
        #[arg(long, default_value_t = 400.0)]
        cycles: f64,
        #[arg(long, default_value_t = 5)]
        record_every: usize,
    },
    /// Compensation voltages that null a stray field.
    Compensate {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Stray field ex,ey,ez in V/mm.
        #[arg(long)]
        stray: String,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Swept-frequency excitation of one motional axis.
    Tickle {
        #[command(flatten)]
        trap: TrapArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Frequencies start:stop:count, Hz.
        #[arg(long)]
        freqs: ScanRange,
        /// Tickle voltage amplitude, V.
        #[arg(long, default_value_t = 0.1)]
        drive_v: f64,
    },
    /// Equilibrium ion chain, or the chain overlay for the three presets.
    Chain {
        #[arg(long, default_value_t = 5)]
        ions: usize,
        /// Axial frequency, kHz; taken from the trap model when absent.
        #[arg(long)]
        omega_z_khz: Option<f64>,
        #[command(flatten)]
        trap: TrapArgs,
        /// Chain length for geometries a, b and c at --vdc.
        #[arg(long)]
        overlay: bool,
        #[arg(long, default_value_t = 90.0)]
        vdc: f64,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Least-squares calibration fits of a CSV data file.
    Fit {
        #[command(subcommand)]
        kind: FitKind,
    },
    /// Model spectra.
    Spectrum {
        #[command(subcommand)]
        kind: SpectrumKind,
    },
    /// Two-level Rabi population against pulse length.
    Rabi {
        #[arg(long, default_value_t = 10.0)]
        rabi_khz: f64,
        #[arg(long, default_value_t = 0.0)]
        detuning_khz: f64,
        /// Pulse lengths start:stop:count, μs.
        #[arg(long, default_value = "0:200:101")]
        times: ScanRange,
    },
    /// Build or simulate experiment timelines.
    Sequence {
        #[command(subcommand)]
        kind: SequenceKind,
    },
    /// RF and microwave chain calculations.
    Rfchain {
        #[command(subcommand)]
        kind: RfKind,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// Line centre and width from (detuning, counts).
    Lorentzian {
        #[arg(long)]
        data: PathBuf,
    },
    /// gamma_dc and gamma_rf from (V_rf, omega_r) at fixed endcap voltage.
    Radial {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        u_dc: f64,
        #[arg(long, default_value_t = 7.262)]
        rf_mhz: f64,
        #[arg(long, default_value = "174")]
        species: String,
    },
    /// alpha_dc from (U_dc, omega_z).
    Axial {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "174")]
        species: String,
    },
    /// Endcap offset from (V_L, V_R) pairs that keep the ion fixed.
    Endcap {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long, default_value_t = bladetrap::calibration::ENDCAP_REFERENCE_V)]
        v_ref: f64,
    },
    /// pi time from (t, population or counts).
    Rabi {
        #[arg(long)]
        data: PathBuf,
    },
    /// Time constant from (t, signal).
    Decay {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// Power-broadened ion cooling line.
    Ion {
        #[arg(long, default_value = "174")]
        isotope: String,
        #[arg(long, default_value_t = 100.0)]
        power_uw: f64,
        #[arg(long, default_value_t = 200.0)]
        diameter_um: f64,
        /// Detunings start:stop:count, MHz.
        #[arg(long, default_value = "-100:100:201")]
        detunings: ScanRange,
    },
    /// Neutral isotope spectrum of the first loading step.
    Neutral {
        #[arg(long, default_value_t = 90.0)]
        theta_deg: f64,
        #[arg(long, default_value_t = 700.0)]
        oven_k: f64,
        /// Laser detunings from the reference isotope, MHz.
        #[arg(long, default_value = "-1000:2500:351")]
        detunings: ScanRange,
    },
    /// Microwave lines of the ground-state hyperfine manifold.
    Zeeman {
        #[arg(long)]
        b_gauss: f64,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    /// Simulated Rabi scan over MW pulse length.
    Rabi {
        /// Pulse lengths start:stop:count, μs.
        #[arg(long, default_value = "0:150:31")]
        taus: ScanRange,
        /// Backend parameters JSON.
        #[arg(long)]
        backend: Option<PathBuf>,
    },
    /// Simulated state decay under detection light.
    Decay {
        /// Wait times start:stop:count, μs.
        #[arg(long, default_value = "0:7500:51")]
        waits: ScanRange,
        /// Keep the UV EOM on during the wait.
        #[arg(long)]
        eom: bool,
        #[arg(long)]
        backend: Option<PathBuf>,
    },
    /// Loading timeline for isotope 171 or 174.
    Loading {
        #[arg(long)]
        isotope: u32,
    },
    /// Validate and run a sequence JSON file.
    Run {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        backend: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RfKind {
    /// Resonator step-up report from flags or a JSON input.
    Resonator {
        /// JSON with inductance_h, trap_capacitance_f, parasitic_capacitance_f,
        /// q_factor, drive_v and optional divider [c1, c2].
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, required_unless_present = "input")]
        inductance_uh: Option<f64>,
        #[arg(long, required_unless_present = "input")]
        trap_pf: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        parasitic_pf: f64,
        #[arg(long, required_unless_present = "input")]
        q: Option<f64>,
        #[arg(long, required_unless_present = "input")]
        drive_v: Option<f64>,
        /// Capacitive divider c1,c2 in pF.
        #[arg(long)]
        divider: Option<String>,
    },
    /// Mixer output lines checked against a transition.
    Mixer {
        #[arg(long)]
        lo_ghz: f64,
        #[arg(long)]
        if_mhz: f64,
        #[arg(long, default_value_t = -30.0)]
        leakage_db: f64,
        /// Transition to hit; the hyperfine splitting when absent.
        #[arg(long)]
        transition_ghz: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        halfwidth_mhz: f64,
    },
    /// Power levels through microwave gain stages.
    Mw {
        #[arg(long)]
        input_dbm: f64,
        /// Stage as name:gain_db; repeatable.
        #[arg(long = "stage")]
        stages: Vec<String>,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ws = match &cli.config {
        Some(p) => WorkspaceConfig::load(p)?,
        None => WorkspaceConfig::default(),
    };
    let seed = cli.seed.or(ws.seed).unwrap_or(DEFAULT_SEED);
    let out = commands::dispatch(&cli.command, &ws, seed)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| ws.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let echo = serde_json::to_value(cli).expect("arguments serialize");
    let written = write_run(&out, &dir, seed, &echo, &ws)?;
    if let Some(summary) = &out.summary {
        println!("{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
