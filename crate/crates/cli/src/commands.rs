use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use bladetrap::atomphys::{
    lorentzian_spectrum, neutral_spectrum, rabi_population, saturation, zeeman_mw_spectrum, broadened_fwhm,
    IsotopeTable, LaserBeam, LevelScheme171, TransitionLine,
};
use bladetrap::calibration::{
    fit_axial_curve, fit_endcap_mismatch, fit_exponential_decay, fit_lorentzian, fit_rabi_oscillation,
    fit_radial_curve, Dataset, EndcapResponse, RESPONSE_OFFSETS_MM,
};
use bladetrap::constants::mhz_to_rad_s;
use bladetrap::crystal::{axial_modes, chain_overlay, equilibrium_positions};
use bladetrap::dynamics::{
    compensate_with_basis_set, integrate_with, micromotion_amplitude, rf_period, tickle_scan, MotionOptions,
    StrayField, TickleSettings,
};
use bladetrap::fieldsolver::{axis_profile, extract_coefficients, field_at_center, BasisSet, SolverSettings, TrapGeometry};
use bladetrap::rfchain::{
    frequency_plan_check, mixer_output, mw_chain_levels, rf_chain_report, GainStage, MixerPlan, ResonatorModel,
    DEFAULT_PARASITIC_F,
};
use bladetrap::sequencer::{
    build_loading_protocol, build_rabi_sequence, build_state_decay_sequence, run, run_scan, scan_to_csv, Backend,
    DecayVariant, Sequence,
};
use bladetrap::trapmodel::{
    mathieu_parameters, secular_frequencies, stability_map, IonSpecies, TrapModel, TrapModelFile,
};
use bladetrap::Axis;
use serde::Deserialize;
use serde_json::json;

use crate::error::{invalid, CliError};
use crate::workspace::{RunOutput, WorkspaceConfig};
use crate::{Command, FitKind, GeometryArgs, RfKind, SequenceKind, SpectrumKind, TrapArgs};

pub fn dispatch(cmd: &Command, ws: &WorkspaceConfig, seed: u64) -> Result<RunOutput, CliError> {
    match cmd {
        Command::Stability { trap, vrf, vdc } => {
            let mut out = RunOutput::new("stability");
            let (model, species) = load_trap(trap, ws, &mut out)?;
            let map = stability_map(&model, &species, vrf, vdc);
            out.csv(map.to_csv());
            Ok(out)
        }
        Command::SolveField {
            geometry,
            electrode,
            volts,
        } => solve_field(geometry, ws, electrode, *volts),
        Command::Coeffs {
            geometry,
            rf_mhz,
            vrf,
            vdc,
        } => coeffs(geometry, ws, *rf_mhz, *vrf, *vdc),
        Command::Micromotion {
            trap,
            stray,
            cycles,
            record_every,
        } => micromotion(trap, ws, stray, *cycles, *record_every),
        Command::Compensate {
            geometry,
            stray,
            tolerance,
        } => {
            let mut out = RunOutput::new("compensate");
            let geom = load_geometry(geometry, ws, &mut out)?;
            let stray = StrayField::new(parse_vec3("--stray", stray)?)?;
            let sol = compensate_with_basis_set(&stray, &basis_set(&geom, geometry)?, *tolerance)?;
            out.json(&sol)?;
            Ok(out)
        }
        Command::Tickle {
            trap,
            axis,
            freqs,
            drive_v,
        } => {
            let mut out = RunOutput::new("tickle");
            let (model, species) = load_trap(trap, ws, &mut out)?;
            if freqs.count < 2 {
                return Err(invalid("--freqs needs at least two points"));
            }
            let scan = tickle_scan(
                &model,
                &species,
                (*axis).into(),
                freqs.start,
                freqs.stop,
                freqs.step(),
                *drive_v,
                &TickleSettings::default(),
            )?;
            out.csv(scan.to_csv());
            out.json(&json!({
                "axis": scan.axis,
                "baseline_mm": scan.baseline_mm,
                "threshold_mm": scan.threshold_mm,
                "resonances_hz": scan.resonances_hz,
            }))?;
            Ok(out)
        }
        Command::Chain {
            ions,
            omega_z_khz,
            trap,
            overlay,
            vdc,
            grid_points,
        } => chain(*ions, *omega_z_khz, trap, *overlay, *vdc, *grid_points, ws),
        Command::Fit { kind } => fit(kind, ws),
        Command::Spectrum { kind } => spectrum(kind, ws),
        Command::Rabi {
            rabi_khz,
            detuning_khz,
            times,
        } => {
            let mut out = RunOutput::new("rabi");
            let (om, de) = (2.0 * std::f64::consts::PI * rabi_khz * 1e3, 2.0 * std::f64::consts::PI * detuning_khz * 1e3);
            let mut csv = String::from("t_us,population\n");
            for t in times.values() {
                csv.push_str(&format!("{t},{}\n", rabi_population(om, de, t * 1e-6)?));
            }
            out.csv(csv);
            Ok(out)
        }
        Command::Sequence { kind } => sequence(kind, seed),
        Command::Rfchain { kind } => rfchain(kind, ws),
    }
}

fn species(label: &str) -> Result<IonSpecies<f64>, CliError> {
    IonSpecies::by_label(label).ok_or_else(|| invalid(format!("--species: unknown species '{label}'")))
}

fn load_trap(args: &TrapArgs, ws: &WorkspaceConfig, out: &mut RunOutput) -> Result<(TrapModel<f64>, IonSpecies<f64>), CliError> {
    let path = args
        .trap
        .as_ref()
        .or(ws.trap_model.as_ref())
        .ok_or_else(|| invalid("no trap model: pass --trap or set trap_model in the workspace config"))?;
    let text = out.read_input(path)?;
    let model = TrapModelFile::from_json(&text)
        .and_then(|f| f.to_model())
        .map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
    Ok((model, species(&args.species)?))
}

fn load_geometry(args: &GeometryArgs, ws: &WorkspaceConfig, out: &mut RunOutput) -> Result<TrapGeometry, CliError> {
    let mut g = if let Some(label) = &args.preset {
        TrapGeometry::preset(label).ok_or_else(|| invalid(format!("--preset: unknown geometry '{label}'")))?
    } else if let Some(path) = args.geometry.as_ref().or(ws.geometry.as_ref()) {
        let text = out.read_input(path)?;
        TrapGeometry::from_json(&text).map_err(|e| CliError::from(e).context(&path.display().to_string()))?
    } else {
        TrapGeometry::variant_a()
    };
    if let Some(n) = args.grid_points {
        g.grid_points = n;
        g.validate().map_err(|e| CliError::from(e).context("--grid-points"))?;
    }
    Ok(g)
}

fn basis_set(geom: &TrapGeometry, args: &GeometryArgs) -> Result<BasisSet, CliError> {
    let set = BasisSet::new(Arc::new(geom.voxelize()?), SolverSettings::default());
    Ok(match &args.cache_dir {
        Some(dir) => set.with_cache_dir(dir),
        None => set,
    })
}

fn parse_vec3(flag: &str, s: &str) -> Result<[f64; 3], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("{flag}: '{s}' is not a comma-separated list of numbers")))?;
    <[f64; 3]>::try_from(v).map_err(|_| invalid(format!("{flag}: expected three components, got '{s}'")))
}

fn solve_field(args: &GeometryArgs, ws: &WorkspaceConfig, electrode: &str, volts: f64) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new("solve-field");
    let geom = load_geometry(args, ws, &mut out)?;
    let set = basis_set(&geom, args)?;
    let unit = set.get(electrode)?;
    let mut csv = String::from("axis,position_mm,potential_v\n");
    for axis in Axis::ALL {
        for (p, v) in axis_profile(&unit, axis) {
            csv.push_str(&format!("{},{p},{}\n", axis.name(), v * volts));
        }
    }
    let c = extract_coefficients(&unit)?;
    out.csv(csv);
    out.json(&json!({
        "electrode": electrode,
        "volts": volts,
        "coefficients_per_volt": c,
        "closure": c.closure(),
        "field_at_center_v_per_mm": field_at_center(&unit).map(|e| e * volts),
        "sweeps": unit.sweeps,
        "residual": unit.residual,
    }))?;
    Ok(out)
}

fn coeffs(args: &GeometryArgs, ws: &WorkspaceConfig, rf_mhz: f64, vrf: f64, vdc: f64) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new("coeffs");
    let geom = load_geometry(args, ws, &mut out)?;
    let set = basis_set(&geom, args)?;
    let rf = extract_coefficients(&*set.get("blade_a")?)?;
    let caps = BTreeMap::from([("endcap_l".to_string(), 1.0), ("endcap_r".to_string(), 1.0)]);
    let dc = extract_coefficients(&set.combine(&caps)?)?;
    let file = TrapModelFile {
        name: Some("extracted".into()),
        alpha_dc_per_mm2: dc.alpha,
        beta_dc_per_mm2: Some(dc.beta),
        gamma_dc_per_mm2: dc.gamma,
        alpha_rf_per_mm2: rf.alpha,
        beta_rf_per_mm2: Some(rf.beta),
        gamma_rf_per_mm2: rf.gamma,
        rf_frequency_mhz: rf_mhz,
        v_rf_volts: vrf,
        v_endcap_left_volts: vdc,
        v_endcap_right_volts: vdc,
        v_comp_volts: [0.0; 5],
        fitted: true,
    };
    // a closure failure here reflects the grid resolution, not user input
    file.to_model().map_err(|e| CliError::Numerical(format!("extracted coefficients: {e}")))?;
    out.json(&file)?;
    Ok(out)
}

fn micromotion(args: &TrapArgs, ws: &WorkspaceConfig, stray: &str, cycles: f64, record_every: usize) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::new("micromotion");
    let (model, sp) = load_trap(args, ws, &mut out)?;
    let e = parse_vec3("--stray", stray)?;
    let w = secular_frequencies(&model, &sp)?;
    let p = mathieu_parameters(&model, &sp);
    // displaced equilibrium in the pseudopotential, mm
    let u0: Vec<f64> = (0..3).map(|i| sp.q_over_m() * e[i] * 1e3 / (w[i] * w[i]) * 1e3).collect();
    let q = p.q();
    let mut opts = MotionOptions::new(cycles * rf_period(&model));
    opts.stray = StrayField::new(e)?;
    opts.record_every = record_every.max(1);
    let r0 = [u0[0] * (1.0 + q[0] / 2.0), u0[1] * (1.0 + q[1] / 2.0), u0[2]];
    let traj = integrate_with(&model, &sp, r0, [0.0; 3], &opts)?;
    let amp = micromotion_amplitude(&traj, model.drive.omega_rf)?;
    out.csv(traj.to_csv());
    out.json(&json!({
        "stray_v_per_mm": e,
        "displacement_mm": u0,
        "micromotion_amplitude_mm": amp,
        "expected_amplitude_mm": [q[0].abs() * u0[0].abs() / 2.0, q[1].abs() * u0[1].abs() / 2.0, 0.0],
        "divergent": traj.divergent,
    }))?;
    Ok(out)
}

fn chain(
    n: usize,
    omega_z_khz: Option<f64>,
    trap: &TrapArgs,
    overlay: bool,
    vdc: f64,
    grid_points: Option<usize>,
    ws: &WorkspaceConfig,
) -> Result<RunOutput, CliError> {
    if overlay {
        let mut out = RunOutput::new("chain-overlay");
        let sp = species(&trap.species)?;
        let geoms: Vec<(String, TrapGeometry)> = ["a", "b", "c"]
            .iter()
            .map(|l| {
                let mut g = TrapGeometry::preset(l).expect("preset exists");
                if let Some(p) = grid_points {
                    g.grid_points = p;
                }
                (l.to_string(), g)
            })
            .collect();
        let rows = chain_overlay(&geoms, vdc, n, &sp, &SolverSettings::default())?;
        let mut csv = String::from("label,alpha_dc_per_mm2,alpha_rf_per_mm2,omega_z_rad_s,chain_length_um\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.label, r.alpha_dc_per_mm2, r.alpha_rf_per_mm2, r.omega_z, r.chain_length_um
            ));
        }
        out.csv(csv);
        return Ok(out);
    }
    let mut out = RunOutput::new("chain");
    let (omega_z, sp) = match omega_z_khz {
        Some(f) => (2.0 * std::f64::consts::PI * f * 1e3, species(&trap.species)?),
        None => {
            let (model, sp) = load_trap(trap, ws, &mut out)?;
            (secular_frequencies(&model, &sp)?[2], sp)
        }
    };
    let c = equilibrium_positions(n, omega_z, &sp)?;
    let modes = axial_modes(&c)?;
    let mut csv = String::from("index,z_um\n");
    for (i, z) in c.positions_um.iter().enumerate() {
        csv.push_str(&format!("{i},{z}\n"));
    }
    out.csv(csv);
    out.json(&json!({
        "ions": n,
        "omega_z_rad_s": omega_z,
        "length_scale_um": c.length_scale_um,
        "positions_um": c.positions_um,
        "axial_mode_frequencies_rad_s": modes.frequencies,
    }))?;
    Ok(out)
}

fn read_dataset(out: &mut RunOutput, path: &Path) -> Result<Dataset, CliError> {
    let text = out.read_input(path)?;
    Dataset::from_csv(&text).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

fn fit(kind: &FitKind, ws: &WorkspaceConfig) -> Result<RunOutput, CliError> {
    match kind {
        FitKind::Lorentzian { data } => {
            let mut out = RunOutput::new("fit-lorentzian");
            let d = read_dataset(&mut out, data)?;
            out.json(&fit_lorentzian(&d)?)?;
            Ok(out)
        }
        FitKind::Radial {
            data,
            u_dc,
            rf_mhz,
            species: s,
        } => {
            let mut out = RunOutput::new("fit-radial");
            let d = read_dataset(&mut out, data)?;
            out.json(&fit_radial_curve(&d, *u_dc, mhz_to_rad_s(*rf_mhz), &species(s)?)?)?;
            Ok(out)
        }
        FitKind::Axial { data, species: s } => {
            let mut out = RunOutput::new("fit-axial");
            let d = read_dataset(&mut out, data)?;
            out.json(&fit_axial_curve(&d, &species(s)?)?)?;
            Ok(out)
        }
        FitKind::Endcap { data, geometry, v_ref } => {
            let mut out = RunOutput::new("fit-endcap");
            let d = read_dataset(&mut out, data)?;
            let geom = load_geometry(geometry, ws, &mut out)?;
            let resp = EndcapResponse::from_geometry(&geom, &RESPONSE_OFFSETS_MM, &SolverSettings::default())?;
            out.json(&fit_endcap_mismatch(&d, &resp, *v_ref)?)?;
            Ok(out)
        }
        FitKind::Rabi { data } => {
            let mut out = RunOutput::new("fit-rabi");
            let d = read_dataset(&mut out, data)?;
            out.json(&fit_rabi_oscillation(&d)?)?;
            Ok(out)
        }
        FitKind::Decay { data } => {
            let mut out = RunOutput::new("fit-decay");
            let d = read_dataset(&mut out, data)?;
            out.json(&fit_exponential_decay(&d)?)?;
            Ok(out)
        }
    }
}

fn level_scheme(ws: &WorkspaceConfig, out: &mut RunOutput) -> Result<LevelScheme171, CliError> {
    match &ws.level_scheme {
        Some(p) => {
            let text = out.read_input(p)?;
            LevelScheme171::from_json(&text).map_err(|e| CliError::from(e).context(&p.display().to_string()))
        }
        None => Ok(LevelScheme171::default()),
    }
}

fn spectrum(kind: &SpectrumKind, ws: &WorkspaceConfig) -> Result<RunOutput, CliError> {
    match kind {
        SpectrumKind::Ion {
            isotope,
            power_uw,
            diameter_um,
            detunings,
        } => {
            let mut out = RunOutput::new("spectrum-ion");
            let line = match isotope.as_str() {
                "174" => TransitionLine::yb174_cooling(),
                "171" => TransitionLine::yb171_cooling(),
                other => return Err(invalid(format!("--isotope: unknown isotope '{other}'"))),
            };
            let beam = LaserBeam::new(*power_uw, *diameter_um, 0.0)?;
            let s = saturation(&beam, &line);
            let d = detunings.values();
            let rate = lorentzian_spectrum(&line, s, &d);
            let mut csv = String::from("detuning_mhz,scattering_rate_mhz\n");
            for (x, y) in d.iter().zip(&rate) {
                csv.push_str(&format!("{x},{y}\n"));
            }
            out.csv(csv);
            out.json(&json!({ "saturation": s, "fwhm_mhz": broadened_fwhm(&line, s) }))?;
            Ok(out)
        }
        SpectrumKind::Neutral {
            theta_deg,
            oven_k,
            detunings,
        } => {
            let mut out = RunOutput::new("spectrum-neutral");
            let table = match &ws.isotope_table {
                Some(p) => {
                    let text = out.read_input(p)?;
                    IsotopeTable::from_json(&text).map_err(|e| CliError::from(e).context(&p.display().to_string()))?
                }
                None => IsotopeTable::default(),
            };
            let d = detunings.values();
            let s = neutral_spectrum(&table, *theta_deg, *oven_k, &d)?;
            let mut csv = String::from("detuning_mhz,signal\n");
            for (x, y) in d.iter().zip(&s) {
                csv.push_str(&format!("{x},{y}\n"));
            }
            out.csv(csv);
            Ok(out)
        }
        SpectrumKind::Zeeman { b_gauss } => {
            let mut out = RunOutput::new("spectrum-zeeman");
            let f0 = level_scheme(ws, &mut out)?.hyperfine_ghz;
            let lines = zeeman_mw_spectrum(*b_gauss, f0)?;
            out.json(&json!({ "b_gauss": b_gauss, "lines_ghz": lines }))?;
            Ok(out)
        }
    }
}

fn load_backend(path: &Option<std::path::PathBuf>, out: &mut RunOutput) -> Result<Backend, CliError> {
    match path {
        Some(p) => {
            let text = out.read_input(p)?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))
        }
        None => Ok(Backend::default()),
    }
}

fn sequence(kind: &SequenceKind, seed: u64) -> Result<RunOutput, CliError> {
    match kind {
        SequenceKind::Rabi { taus, backend } => {
            let mut out = RunOutput::new("sequence-rabi");
            let b = load_backend(backend, &mut out)?;
            let seqs = taus.values().into_iter().map(build_rabi_sequence).collect::<Result<Vec<_>, _>>()?;
            let res = run_scan(&seqs, &b, seed)?;
            out.csv(scan_to_csv(&res));
            out.json(&json!({ "backend": b, "pi_time_us": b.pi_time_us(), "points": res.len() }))?;
            Ok(out)
        }
        SequenceKind::Decay { waits, eom, backend } => {
            let mut out = RunOutput::new("sequence-decay");
            let b = load_backend(backend, &mut out)?;
            let variant = if *eom { DecayVariant::EomOn } else { DecayVariant::EomOff };
            let seqs = build_state_decay_sequence(&waits.values(), variant)?;
            let res = run_scan(&seqs, &b, seed)?;
            out.csv(scan_to_csv(&res));
            out.json(&json!({ "backend": b, "variant": format!("{variant:?}"), "points": res.len() }))?;
            Ok(out)
        }
        SequenceKind::Loading { isotope } => {
            let mut out = RunOutput::new("sequence-loading");
            let seq = build_loading_protocol(*isotope)?;
            print!("{}", seq.render_steps());
            out.json(&seq)?;
            Ok(out)
        }
        SequenceKind::Run { file, backend } => {
            let mut out = RunOutput::new("sequence-run");
            let b = load_backend(backend, &mut out)?;
            let text = out.read_input(file)?;
            let seq = Sequence::from_json(&text).map_err(|e| CliError::from(e).context(&file.display().to_string()))?;
            let r = run(&seq, &b, seed).map_err(|e| CliError::from(e).context(&file.display().to_string()))?;
            out.json(&r)?;
            Ok(out)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonatorInput {
    inductance_h: f64,
    trap_capacitance_f: f64,
    #[serde(default = "default_parasitic")]
    parasitic_capacitance_f: f64,
    q_factor: f64,
    drive_v: f64,
    #[serde(default)]
    divider: Option<(f64, f64)>,
}

fn default_parasitic() -> f64 {
    DEFAULT_PARASITIC_F
}

fn rfchain(kind: &RfKind, ws: &WorkspaceConfig) -> Result<RunOutput, CliError> {
    match kind {
        RfKind::Resonator {
            input,
            inductance_uh,
            trap_pf,
            parasitic_pf,
            q,
            drive_v,
            divider,
        } => {
            let mut out = RunOutput::new("rfchain-resonator");
            let params = match input {
                Some(p) => {
                    let text = out.read_input(p)?;
                    serde_json::from_str::<ResonatorInput>(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?
                }
                None => {
                    let divider = match divider {
                        Some(s) => {
                            let v: Vec<f64> = s
                                .split(',')
                                .map(|x| x.trim().parse::<f64>())
                                .collect::<Result<_, _>>()
                                .map_err(|_| invalid(format!("--divider: '{s}' is not c1,c2")))?;
                            match v.as_slice() {
                                [a, b] => Some((a * 1e-12, b * 1e-12)),
                                _ => return Err(invalid(format!("--divider: expected two values, got '{s}'"))),
                            }
                        }
                        None => None,
                    };
                    ResonatorInput {
                        inductance_h: inductance_uh.expect("required by clap") * 1e-6,
                        trap_capacitance_f: trap_pf.expect("required by clap") * 1e-12,
                        parasitic_capacitance_f: parasitic_pf * 1e-12,
                        q_factor: q.expect("required by clap"),
                        drive_v: drive_v.expect("required by clap"),
                        divider,
                    }
                }
            };
            let res = ResonatorModel::new(
                params.inductance_h,
                params.trap_capacitance_f,
                params.parasitic_capacitance_f,
                params.q_factor,
            )?;
            let report = rf_chain_report(&res, params.drive_v, params.divider)?;
            for s in &report.stages {
                eprintln!("{:<20} {:>12.4} {}", s.stage, s.value, s.unit);
            }
            out.json(&report)?;
            Ok(out)
        }
        RfKind::Mixer {
            lo_ghz,
            if_mhz,
            leakage_db,
            transition_ghz,
            halfwidth_mhz,
        } => {
            let mut out = RunOutput::new("rfchain-mixer");
            let target = match transition_ghz {
                Some(t) => *t,
                None => level_scheme(ws, &mut out)?.hyperfine_ghz,
            };
            let plan = MixerPlan::new(*lo_ghz, *if_mhz, *leakage_db)?;
            let lines = mixer_output(&plan);
            let hit = frequency_plan_check(&lines, target, *halfwidth_mhz)?;
            out.json(&json!({ "plan": plan, "lines": lines, "transition_ghz": target, "resonant": hit }))?;
            Ok(out)
        }
        RfKind::Mw { input_dbm, stages } => {
            let mut out = RunOutput::new("rfchain-mw");
            let parsed = stages
                .iter()
                .map(|s| {
                    let (name, gain) = s
                        .rsplit_once(':')
                        .ok_or_else(|| invalid(format!("--stage: '{s}' is not name:gain_db")))?;
                    let gain_db = gain
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("--stage: bad gain in '{s}'")))?;
                    Ok(GainStage {
                        name: name.to_string(),
                        gain_db,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            out.json(&mw_chain_levels(*input_dbm, &parsed))?;
            Ok(out)
        }
    }
}
