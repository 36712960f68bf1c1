use bladetrap::calibration::*;
use bladetrap::constants::{mhz_to_rad_s, PER_MM2};
use bladetrap::trapmodel::{secular_frequencies, DriveSettings, IonSpecies, TrapCoefficients, TrapModel};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

fn yb() -> IonSpecies<f64> {
    IonSpecies::yb174()
}

fn omega_rf() -> f64 {
    mhz_to_rad_s(7.262)
}

fn lorentz_data(center: f64, fwhm: f64, amp: f64, offset: f64, n: usize) -> Dataset {
    let x: Vec<f64> = (0..n).map(|i| center - 3.0 * fwhm + 6.0 * fwhm * i as f64 / (n - 1) as f64).collect();
    let y = x.iter().map(|&v| lorentzian(v, center, fwhm, amp, offset)).collect();
    Dataset::new(x, y).unwrap()
}

#[test]
fn lorentzian_noiseless_width() {
    let fit = fit_lorentzian(&lorentz_data(-40.0, 27.0, 1500.0, 80.0, 41)).unwrap();
    assert!((fit.value("fwhm") / 27.0 - 1.0).abs() < 1e-3);
    assert!((fit.value("center") + 40.0).abs() < 1e-6);
}

#[test]
fn lorentzian_flat_data() {
    let d = Dataset::new((0..20).map(f64::from).collect(), vec![3.0; 20]).unwrap();
    assert!(matches!(fit_lorentzian(&d), Err(CalibrationError::FitError { .. })));
}

#[test]
fn lorentzian_poisson_repeats() {
    let clean = lorentz_data(0.0, 27.0, 1000.0, 0.0, 61);
    let widths = monte_carlo(2024, 100, |_, rng| {
        let y = clean
            .y
            .iter()
            .map(|&m| Poisson::new(m.max(1e-9)).unwrap().sample(rng))
            .collect();
        fit_lorentzian(&Dataset::new(clean.x.clone(), y).unwrap()).unwrap().value("fwhm")
    });
    let worst = widths.iter().map(|w| (w / 27.0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "worst relative width error {worst}");
}

fn radial_data(gamma_dc: f64, gamma_rf: f64, noise: f64, rng: Option<&mut rand_chacha::ChaCha8Rng>) -> Dataset {
    let v: Vec<f64> = (0..10).map(|i| 200.0 + 20.0 * i as f64).collect();
    let mut w: Vec<f64> = v.iter().map(|&x| radial_frequency(x, 90.0, omega_rf(), gamma_dc, gamma_rf, &yb())).collect();
    if let Some(rng) = rng {
        let n = Normal::new(0.0, noise).unwrap();
        for x in w.iter_mut() {
            *x *= 1.0 + n.sample(rng);
        }
    }
    Dataset::new(v, w).unwrap()
}

#[test]
fn radial_noiseless_round_trip() {
    let fit = fit_radial_curve(&radial_data(-0.0032, 1.07, 0.0, None), 90.0, omega_rf(), &yb()).unwrap();
    assert!((fit.gamma_dc_per_mm2 / -0.0032 - 1.0).abs() < 0.01);
    assert!((fit.gamma_rf_per_mm2 / 1.07 - 1.0).abs() < 0.01);
}

#[test]
fn radial_matches_trapmodel() {
    let c = TrapCoefficients::with_radial_split(0.00709, -0.0032, 1.07);
    let m = TrapModel::new(c, DriveSettings::symmetric(omega_rf(), 250.0, 90.0).unwrap()).unwrap();
    let w = secular_frequencies(&m, &yb()).unwrap()[0];
    let r = radial_frequency(250.0, 90.0, omega_rf(), -0.0032, 1.07, &yb());
    assert!((w / r - 1.0).abs() < 1e-12);
}

#[test]
fn radial_simulated_pair_distinguishable() {
    let hits = monte_carlo(11, 200, |_, rng| {
        let d = radial_data(-0.0028, 0.988, 0.01, Some(rng));
        let f = fit_radial_curve(&d, 90.0, omega_rf(), &yb()).unwrap();
        (f.gamma_rf_per_mm2 - 1.07).abs() > 2.0 * f.fit.sigmas[1]
    });
    assert!(hits.iter().filter(|h| **h).count() >= 190);
}

#[test]
fn radial_refit_is_fixed_point() {
    let a = fit_radial_curve(&radial_data(-0.003, 1.0, 0.0, None), 90.0, omega_rf(), &yb()).unwrap();
    let b = fit_radial_curve(
        &radial_data(a.gamma_dc_per_mm2, a.gamma_rf_per_mm2, 0.0, None),
        90.0,
        omega_rf(),
        &yb(),
    )
    .unwrap();
    assert!((a.gamma_dc_per_mm2 / b.gamma_dc_per_mm2 - 1.0).abs() < 1e-9);
    assert!((a.gamma_rf_per_mm2 / b.gamma_rf_per_mm2 - 1.0).abs() < 1e-9);
}

#[test]
fn radial_narrow_span_rejected() {
    let d = Dataset::new(vec![300.0, 310.0, 320.0], vec![1e6, 1.1e6, 1.2e6]).unwrap();
    assert!(matches!(fit_radial_curve(&d, 90.0, omega_rf(), &yb()), Err(CalibrationError::IllConditioned(_))));
}

fn axial_data(alpha: f64, n: usize, noise: f64, rng: &mut impl Rng) -> Dataset {
    let dist = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let u: Vec<f64> = (0..n).map(|i| 20.0 + 180.0 * i as f64 / (n - 1).max(1) as f64).collect();
    let w = u
        .iter()
        .map(|&x| {
            let w = (yb().q_over_m() * x * alpha * PER_MM2).sqrt();
            if noise > 0.0 {
                w * (1.0 + dist.sample(rng))
            } else {
                w
            }
        })
        .collect();
    Dataset::new(u, w).unwrap()
}

#[test]
fn axial_round_trip_and_proportionality() {
    let mut rng = repeat_rng(0, 0);
    let f = fit_axial_curve(&axial_data(0.00709, 8, 0.0, &mut rng), &yb()).unwrap();
    assert!((f.alpha_dc_per_mm2 / 0.00709 - 1.0).abs() < 5e-3);
    let c = TrapCoefficients::symmetric(0.00709, 1.07);
    let w1 = secular_frequencies(&TrapModel::new(c, DriveSettings::symmetric(omega_rf(), 300.0, 50.0).unwrap()).unwrap(), &yb())
        .unwrap()[2];
    let w2 = secular_frequencies(&TrapModel::new(c, DriveSettings::symmetric(omega_rf(), 300.0, 100.0).unwrap()).unwrap(), &yb())
        .unwrap()[2];
    assert!((w2 * w2 / (w1 * w1) - 2.0).abs() < 1e-12);
    let neg = Dataset::new(vec![-10.0, -20.0], vec![1e5, 2e5]).unwrap();
    assert!(matches!(fit_axial_curve(&neg, &yb()), Err(CalibrationError::NegativeSlope { .. })));
}

fn distinguishes(truth: f64, other: f64, seed: u64) -> usize {
    monte_carlo(seed, 1000, |_, rng| {
        let f = fit_axial_curve(&axial_data(truth, 10, 0.01, rng), &yb()).unwrap();
        let a = f.alpha_dc_per_mm2;
        (a - truth).abs() < (a - other).abs() && (a - other).abs() > 2.0 * f.sigma_per_mm2
    })
    .into_iter()
    .filter(|b| *b)
    .count()
}

#[test]
fn axial_alphas_distinguishable() {
    assert!(distinguishes(0.00709, 0.00679, 1) >= 950);
    assert!(distinguishes(0.00679, 0.00709, 2) >= 950);
}

#[test]
fn axial_sigma_scales_with_sqrt_n() {
    let mean_sigma = |n: usize| {
        let s = monte_carlo(5, 200, |_, rng| fit_axial_curve(&axial_data(0.00709, n, 0.01, rng), &yb()).unwrap().sigma_per_mm2);
        s.iter().sum::<f64>() / s.len() as f64
    };
    let ratio = mean_sigma(10) / mean_sigma(1000);
    assert!(ratio > 10.0 / 1.5 && ratio < 10.0 * 1.5, "{ratio}");
}

#[test]
fn zeeman_field() {
    assert_eq!(b_field_from_zeeman(0.0).unwrap(), 0.0);
    assert!((b_field_from_zeeman(1.4).unwrap() - 1.0).abs() < 1e-12);
    assert!((b_field_from_zeeman(7.76).unwrap() - 5.54).abs() < 0.01);
    assert!(b_field_from_zeeman(-1.0).is_err());
}

#[test]
fn endcap_model_cases() {
    let resp = EndcapResponse::exponential(0.008, 1.2).unwrap();
    assert_eq!(endcap_correction(ENDCAP_REFERENCE_V, 100.0, &resp, ENDCAP_REFERENCE_V), ENDCAP_REFERENCE_V);
    let v_l: Vec<f64> = (0..7).map(|i| 180.0 + 4.0 * i as f64).collect();
    let sym = Dataset::new(v_l.clone(), v_l.clone()).unwrap();
    let fit = fit_endcap_mismatch(&sym, &resp, ENDCAP_REFERENCE_V).unwrap();
    assert_eq!(fit.d_um, 0.0);
    assert!(fit.degenerate);
    let shifted = Dataset::new(
        v_l.clone(),
        v_l.iter().map(|&v| endcap_correction(v, 100.0, &resp, ENDCAP_REFERENCE_V)).collect(),
    )
    .unwrap();
    let fit = fit_endcap_mismatch(&shifted, &resp, ENDCAP_REFERENCE_V).unwrap();
    assert!((fit.d_um - 100.0).abs() < 1e-3, "{}", fit.d_um);
    assert!(!fit.degenerate);
    let short = Dataset::new(vec![190.0, 194.0], vec![190.0, 194.0]).unwrap();
    assert!(fit_endcap_mismatch(&short, &resp, ENDCAP_REFERENCE_V).is_err());
}

#[test]
fn endcap_response_from_samples() {
    let offs = [0.0, 0.2, 0.4];
    let e: Vec<f64> = offs.iter().map(|d: &f64| 0.008 * (-d / 1.2 + 0.1 * d * d).exp()).collect();
    let r = EndcapResponse::from_samples(&offs, &e).unwrap();
    for (o, v) in offs.iter().zip(&e) {
        assert!((r.field(*o) / v - 1.0).abs() < 1e-12);
    }
    assert!(r.ratio(0.1) > 1.0);
    assert!(EndcapResponse::from_samples(&[0.0, 0.1], &[1.0, -1.0]).is_err());
}

#[test]
fn rabi_and_decay_fits() {
    let t: Vec<f64> = (0..40).map(|i| i as f64 * 2.5).collect();
    let p = t.iter().map(|&x| 0.05 + 0.9 * (std::f64::consts::FRAC_PI_2 * x / 31.0).sin().powi(2)).collect();
    let f = fit_rabi_oscillation(&Dataset::new(t.clone(), p).unwrap()).unwrap();
    assert!((f.value("t_pi") / 31.0 - 1.0).abs() < 1e-6);
    let y = t.iter().map(|&x| 3.0 * (-x / 17.0).exp() + 0.2).collect();
    let f = fit_exponential_decay(&Dataset::new(t, y).unwrap()).unwrap();
    assert!((f.value("tau") / 17.0 - 1.0).abs() < 1e-6);
}

#[test]
fn dataset_csv() {
    let d = Dataset::from_csv("v,w\n1,2\n3,4\n").unwrap();
    assert_eq!(d.x, vec![1.0, 3.0]);
    let d = Dataset::from_csv("1,2,0.1\n3,4,0.2\n").unwrap();
    assert_eq!(d.sigma, Some(vec![0.1, 0.2]));
    assert!(Dataset::from_csv("1,2\n3\n").is_err());
    assert!(Dataset::new(vec![1.0], vec![1.0, 2.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lorentzian_round_trip(c in -50.0f64..50.0, w in 5.0f64..60.0, a in 10.0f64..1e4, b in 0.0f64..100.0) {
        let f = fit_lorentzian(&lorentz_data(c, w, a, b, 31)).unwrap();
        prop_assert!((f.value("fwhm") / w - 1.0).abs() < 5e-3);
        prop_assert!((f.value("amplitude") / a - 1.0).abs() < 5e-3);
        prop_assert!((f.value("center") - c).abs() < 5e-3 * w);
    }

    #[test]
    fn radial_round_trip(gdc in -0.006f64..-0.001, grf in 0.6f64..1.4) {
        let f = fit_radial_curve(&radial_data(gdc, grf, 0.0, None), 90.0, omega_rf(), &yb()).unwrap();
        prop_assert!((f.gamma_dc_per_mm2 / gdc - 1.0).abs() < 5e-3);
        prop_assert!((f.gamma_rf_per_mm2 / grf - 1.0).abs() < 5e-3);
    }

    #[test]
    fn axial_round_trip(alpha in 0.001f64..0.02) {
        let mut rng = repeat_rng(0, 0);
        let f = fit_axial_curve(&axial_data(alpha, 6, 0.0, &mut rng), &yb()).unwrap();
        prop_assert!((f.alpha_dc_per_mm2 / alpha - 1.0).abs() < 5e-3);
    }

    #[test]
    fn axial_order_invariant(seed in 0u64..1000, rot in 0usize..10) {
        let mut rng = repeat_rng(seed, 0);
        let d = axial_data(0.007, 10, 0.02, &mut rng);
        let mut pairs: Vec<(f64, f64)> = d.x.iter().copied().zip(d.y.iter().copied()).collect();
        pairs.rotate_left(rot);
        pairs.reverse();
        let e = Dataset::from_pairs(&pairs).unwrap();
        prop_assert_eq!(fit_axial_curve(&d, &yb()).unwrap(), fit_axial_curve(&e, &yb()).unwrap());
    }

    #[test]
    fn rabi_round_trip(tpi in 5.0f64..80.0, amp in 0.5f64..1.0, off in 0.0f64..0.1) {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 4.0).collect();
        let p = t.iter().map(|&x| off + amp * (std::f64::consts::FRAC_PI_2 * x / tpi).sin().powi(2)).collect();
        let f = fit_rabi_oscillation(&Dataset::new(t, p).unwrap()).unwrap();
        prop_assert!((f.value("t_pi") / tpi - 1.0).abs() < 5e-3, "{} vs {}", f.value("t_pi"), tpi);
    }

    #[test]
    fn decay_round_trip(tau in 0.5f64..20.0, amp in 0.1f64..10.0, off in 0.0f64..1.0) {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
        let y = t.iter().map(|&x| off + amp * (-x / tau).exp()).collect();
        let f = fit_exponential_decay(&Dataset::new(t, y).unwrap()).unwrap();
        prop_assert!((f.value("tau") / tau - 1.0).abs() < 5e-3);
    }

    #[test]
    fn endcap_round_trip(d in 20.0f64..300.0, decay in 0.5f64..3.0) {
        let resp = EndcapResponse::exponential(0.008, decay).unwrap();
        let v_l: Vec<f64> = (0..5).map(|i| 184.0 + 4.0 * i as f64).collect();
        let v_r = v_l.iter().map(|&v| endcap_correction(v, d, &resp, ENDCAP_REFERENCE_V)).collect();
        let f = fit_endcap_mismatch(&Dataset::new(v_l, v_r).unwrap(), &resp, ENDCAP_REFERENCE_V).unwrap();
        prop_assert!((f.d_um / d - 1.0).abs() < 5e-3);
    }
}

mod endcap_fieldsolver {
    use super::*;
    use bladetrap::fieldsolver::{field_at_center, solve_laplace, SolverSettings, TrapGeometry};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    /// `(V_L, V_R)` pairs that null the change of the centre field, computed
    /// directly from solved endcap fields of `geometry`.
    fn synthetic_pairs(geometry: &TrapGeometry) -> Dataset {
        let grid = Arc::new(geometry.voxelize().unwrap());
        let e = |name: &str| {
            let f = solve_laplace(&grid, &BTreeMap::from([(name.to_string(), 1.0)]), &SolverSettings::default()).unwrap();
            field_at_center(&f)[2]
        };
        let (e_l, e_r) = (e("endcap_l"), e("endcap_r"));
        let v_l: Vec<f64> = (0..9).map(|i| 176.0 + 4.0 * i as f64).collect();
        let v_r = v_l.iter().map(|&v| ENDCAP_REFERENCE_V - e_l / e_r * (v - ENDCAP_REFERENCE_V)).collect();
        Dataset::new(v_l, v_r).unwrap()
    }

    #[test]
    fn displaced_endcap_recovered() {
        let base = TrapGeometry::variant_a();
        let resp = EndcapResponse::from_geometry(&base, &RESPONSE_OFFSETS_MM, &SolverSettings::default()).unwrap();
        let mut moved = base.clone();
        moved.endcap_r_offset_mm = 0.1;
        let fit = fit_endcap_mismatch(&synthetic_pairs(&moved), &resp, ENDCAP_REFERENCE_V).unwrap();
        eprintln!("recovered d = {:.2} um, response {:?}", fit.d_um, resp.fields_v_per_mm);
        assert!((fit.d_um - 100.0).abs() <= 10.0);
        let sym = fit_endcap_mismatch(&synthetic_pairs(&base), &resp, ENDCAP_REFERENCE_V).unwrap();
        eprintln!("symmetric d = {:.4} um", sym.d_um);
        assert!(sym.d_um.abs() < 1.0);
    }
}
