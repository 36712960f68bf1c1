use bladetrap::constants::{mhz_to_rad_s, PER_MM2};
use bladetrap::dynamics::*;
use bladetrap::fieldsolver::{BasisSet, SolverSettings, TrapGeometry};
use bladetrap::trapmodel::{mathieu_parameters, secular_frequencies, DriveSettings, IonSpecies, TrapCoefficients, TrapModel};
use bladetrap::Axis;
use std::f64::consts::PI;
use std::sync::Arc;

fn fitted_trap() -> TrapModel<f64> {
    let c = TrapCoefficients::with_radial_split(0.00709, -0.0032, 1.07);
    TrapModel::new(c, DriveSettings::symmetric(mhz_to_rad_s(7.262), 343.74, 90.0).unwrap()).unwrap()
}

fn yb() -> IonSpecies<f64> {
    IonSpecies::yb174()
}

fn model_at_q(q: f64) -> TrapModel<f64> {
    let omega = mhz_to_rad_s(7.262);
    let v_rf = 300.0;
    let gamma_rf = q * omega * omega / (2.0 * yb().q_over_m() * v_rf * PER_MM2);
    let c = TrapCoefficients::symmetric(0.0, gamma_rf);
    TrapModel::new(c, DriveSettings::symmetric(omega, v_rf, 0.0).unwrap()).unwrap()
}

/// Characteristic exponent of x'' + (a - 2q cos 2t) x = 0 from the monodromy
/// matrix over one period, integrated with classical RK4.
fn floquet_beta(a: f64, q: f64) -> f64 {
    let n = 20000;
    let h = PI / n as f64;
    let rhs = |t: f64, y: [f64; 2]| [y[1], -(a - 2.0 * q * (2.0 * t).cos()) * y[0]];
    let mut cols = [[1.0, 0.0], [0.0, 1.0]];
    for y in cols.iter_mut() {
        for i in 0..n {
            let t = i as f64 * h;
            let k1 = rhs(t, *y);
            let k2 = rhs(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = rhs(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
    }
    let trace = cols[0][0] + cols[1][1];
    (trace / 2.0).acos() / PI
}

fn secular_peak(model: &TrapModel<f64>, axis: Axis, r0: [f64; 3], secular_periods: f64) -> f64 {
    let sp = yb();
    let w = secular_frequencies(model, &sp).unwrap()[axis.index()];
    let mut opts = MotionOptions::new(secular_periods * 2.0 * PI / w);
    opts.record_every = 10;
    let t = integrate_with(model, &sp, r0, [0.0; 3], &opts).unwrap();
    let x: Vec<f64> = t.axis(axis);
    let f = w / (2.0 * PI);
    spectral_peak(&x, t.sample_dt, 0.5 * f, 1.5 * f).unwrap() * 2.0 * PI
}

#[test]
fn radial_peak_matches_mathieu() {
    let m = fitted_trap();
    let sp = yb();
    let p = mathieu_parameters(&m, &sp);
    let w = secular_frequencies(&m, &sp).unwrap();
    let measured = secular_peak(&m, Axis::X, [0.002, 0.0, 0.0], 300.0);
    let exact = floquet_beta(p.a_x, p.q_x) * m.drive.omega_rf / 2.0;
    eprintln!("q_x {:.4} a_x {:.2e}: fft {measured:.6e}, lowest order {:.6e}, floquet {exact:.6e}", p.q_x, p.a_x, w[0]);
    assert!((measured / w[0] - 1.0).abs() < 0.01);
    assert!((measured / exact - 1.0).abs() < 1e-3);
}

#[test]
fn secular_peak_at_q_point_two() {
    let m = model_at_q(0.2).with_voltages(300.0, 50.0);
    let c = TrapCoefficients::with_radial_split(0.00709, -0.0032, m.coefficients.gamma_rf);
    let m = TrapModel::new(c, m.drive).unwrap();
    let sp = yb();
    let p = mathieu_parameters(&m, &sp);
    assert!((p.q_x - 0.2).abs() < 1e-12);
    let w = secular_frequencies(&m, &sp).unwrap();
    let measured = secular_peak(&m, Axis::X, [0.002, 0.0, 0.001], 300.0);
    let exact = floquet_beta(p.a_x, p.q_x) * m.drive.omega_rf / 2.0;
    eprintln!("q 0.2: fft {measured:.6e}, lowest order {:.6e}, floquet {exact:.6e}", w[0]);
    assert!((measured / w[0] - 1.0).abs() < 0.01);
    assert!((measured / exact - 1.0).abs() < 1e-3);
}

fn micromotion_under(model: &TrapModel<f64>, e_x: f64) -> (f64, f64) {
    let sp = yb();
    let p = mathieu_parameters(model, &sp);
    let w = secular_frequencies(model, &sp).unwrap();
    let u0 = sp.q_over_m() * e_x * 1e3 / (w[0] * w[0]) * 1e3;
    let stray = StrayField::new([e_x, 0.0, 0.0]).unwrap();
    let mut opts = MotionOptions::new(400.0 * rf_period(model));
    opts.stray = stray;
    opts.record_every = 5;
    let t = integrate_with(model, &sp, [u0 * (1.0 + p.q_x / 2.0), 0.0, 0.0], [0.0; 3], &opts).unwrap();
    let amp = micromotion_amplitude(&t, model.drive.omega_rf).unwrap();
    (amp[0], p.q_x * u0 / 2.0)
}

#[test]
fn stray_field_micromotion() {
    let m = fitted_trap();
    let (a1, expect1) = micromotion_under(&m, 0.01);
    let (a2, expect2) = micromotion_under(&m, 0.02);
    eprintln!("micromotion {a1:.4e} vs {expect1:.4e}");
    assert!((a1 / expect1 - 1.0).abs() < 0.1);
    assert!((a2 / a1 - 2.0).abs() < 1e-6);
    assert!((expect2 / expect1 - 2.0).abs() < 1e-12);
}

#[test]
fn null_has_no_micromotion() {
    let m = fitted_trap();
    let t = integrate_motion(&m, &yb(), [0.0; 3], [0.0; 3], 50.0 * rf_period(&m), None, &StrayField::zero(), None).unwrap();
    let amp = micromotion_amplitude(&t, m.drive.omega_rf).unwrap();
    assert!(amp.iter().all(|a| *a < 1e-15));
    let short = integrate_motion(&m, &yb(), [0.0; 3], [0.0; 3], 5.0 * rf_period(&m), None, &StrayField::zero(), None).unwrap();
    assert!(matches!(micromotion_amplitude(&short, m.drive.omega_rf), Err(DynamicsError::TooShort { .. })));
}

fn diverges(q: f64) -> bool {
    let m = model_at_q(q);
    integrate_motion(&m, &yb(), [0.01, 0.01, 0.0], [0.0; 3], 3000.0 * rf_period(&m), None, &StrayField::zero(), None)
        .unwrap()
        .divergent
}

#[test]
fn divergence_flips_at_stability_edge() {
    assert!(!diverges(0.89));
    assert!(diverges(0.92));
}

fn comp_basis() -> BasisSet {
    let mut g = TrapGeometry::variant_a();
    g.grid_points = 51;
    let grid = Arc::new(g.voxelize().unwrap());
    BasisSet::new(grid, SolverSettings::default())
}

#[test]
fn compensation_zero_and_pair_symmetry() {
    let basis = comp_basis();
    let zero = compensate_with_basis_set(&StrayField::zero(), &basis, 1e-3).unwrap();
    assert!(zero.voltages.iter().all(|v| v.abs() < 1e-12));
    let s = 0.01 / 2f64.sqrt();
    let stray = StrayField::new([s, s, 0.0]).unwrap();
    let sol = compensate_with_basis_set(&stray, &basis, 1e-3).unwrap();
    eprintln!("u-axis stray voltages {:?}", sol.voltages);
    assert!(sol.reachable);
    assert!(sol.residual_norm < 1e-3 * stray.norm());
    let v = &sol.voltages;
    assert!((v[0] + v[2]).abs() < 1e-3 * v[0].abs(), "{v:?}");
    assert!((v[1] + v[3]).abs() < 1e-3 * v[1].abs(), "{v:?}");
    assert!(v[0] * v[2] < 0.0);
}

#[test]
fn compensation_suppresses_micromotion() {
    let basis = comp_basis();
    let stray = StrayField::new([0.004, -0.003, 0.002]).unwrap();
    let sol = compensate_with_basis_set(&stray, &basis, 1e-3).unwrap();
    let m = fitted_trap();
    let sp = yb();
    let run = |f: &StrayField<f64>| {
        let mut o = MotionOptions::new(200.0 * rf_period(&m));
        o.stray = *f;
        let t = integrate_with(&m, &sp, [0.0; 3], [0.0; 3], &o).unwrap();
        let a = micromotion_amplitude(&t, m.drive.omega_rf).unwrap();
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let before = run(&stray);
    let after = run(&sol.residual_field());
    eprintln!("micromotion before {before:.3e} after {after:.3e}");
    assert!(after * 10.0 <= before);
}

#[test]
fn compensation_rank_deficient_basis() {
    let basis = comp_basis();
    let c1 = basis.get("comp1").unwrap();
    let e = bladetrap::fieldsolver::field_at_center(&c1);
    // a single electrode spans one direction only
    let orth = StrayField::new([e[1], -e[0], 0.0]).unwrap();
    assert!(matches!(compensate(&orth, &[("comp1", c1.as_ref())], 1e-3), Err(DynamicsError::SingularBasis { .. })));
}

fn tickle(axis: Axis, f_center: f64, rel_span: f64, steps: usize, amp: f64) -> Result<TickleScan, DynamicsError> {
    let m = fitted_trap();
    let f_step = 2.0 * rel_span * f_center / steps as f64;
    tickle_scan(&m, &yb(), axis, f_center * (1.0 - rel_span), f_center * (1.0 + rel_span), f_step, amp, &TickleSettings::default())
}

#[test]
fn tickle_finds_axial_mode() {
    let m = fitted_trap();
    let wz = secular_frequencies(&m, &yb()).unwrap()[2] / (2.0 * PI);
    let scan = tickle(Axis::Z, wz, 0.08, 30, 0.01).unwrap();
    let step = scan.frequencies_hz[1] - scan.frequencies_hz[0];
    eprintln!("axial {wz:.1} Hz, resonances {:?}", scan.resonances_hz);
    assert_eq!(scan.resonances_hz.len(), 1);
    assert!((scan.resonances_hz[0] - wz).abs() <= step);
}

#[test]
fn tickle_finds_radial_mode() {
    let m = fitted_trap();
    let wx = secular_frequencies(&m, &yb()).unwrap()[0] / (2.0 * PI);
    let scan = tickle(Axis::X, wx, 0.03, 30, 0.01).unwrap();
    eprintln!("radial {wx:.1} Hz, resonances {:?}", scan.resonances_hz);
    assert_eq!(scan.resonances_hz.len(), 1);
    assert!((scan.resonances_hz[0] / wx - 1.0).abs() < 0.01);
}

#[test]
fn tickle_without_drive_has_no_resonance() {
    let m = fitted_trap();
    let wz = secular_frequencies(&m, &yb()).unwrap()[2] / (2.0 * PI);
    assert!(matches!(tickle(Axis::Z, wz, 0.05, 10, 0.0), Err(DynamicsError::NoResonance { .. })));
    let bad = tickle_scan(&m, &yb(), Axis::Z, 1e3, 5e6, 1e3, 0.01, &TickleSettings::default());
    assert!(matches!(bad, Err(DynamicsError::InvalidInput(_))));
}
