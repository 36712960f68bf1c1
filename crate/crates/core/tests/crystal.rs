use std::f64::consts::PI;

use bladetrap::crystal::{
    axial_hessian, axial_modes, chain_length, equilibrium_positions, scaled_equilibrium, transverse_hessian,
    zigzag_threshold,
};
use bladetrap::IonSpecies;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimises the chain energy one coordinate at a time; each 1D problem is
/// convex between the neighbours and solved by safeguarded Newton steps.
fn coordinate_descent(mut u: Vec<f64>) -> Vec<f64> {
    let n = u.len();
    for _ in 0..200_000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let lo = if i == 0 { -1e3 } else { u[i - 1] };
            let hi = if i == n - 1 { 1e3 } else { u[i + 1] };
            let mut x = u[i];
            for _ in 0..100 {
                let (mut d1, mut d2) = (x, 1.0);
                for (j, &uj) in u.iter().enumerate() {
                    if j != i {
                        let d = x - uj;
                        d1 -= d.signum() / (d * d);
                        d2 += 2.0 / d.abs().powi(3);
                    }
                }
                let mut next = x - d1 / d2;
                if next <= lo || next >= hi {
                    next = if next <= lo { 0.5 * (x + lo) } else { 0.5 * (x + hi) };
                }
                let step = (next - x).abs();
                x = next;
                if step < 1e-15 {
                    break;
                }
            }
            moved = moved.max((x - u[i]).abs());
            u[i] = x;
        }
        if moved < 1e-13 {
            break;
        }
    }
    u
}

#[test]
fn two_and_three_ion_closed_forms() {
    let u2 = scaled_equilibrium(2).unwrap();
    let a = 2f64.powf(-2.0 / 3.0);
    assert!((u2[0] + a).abs() < 1e-6 && (u2[1] - a).abs() < 1e-6);
    // force balance on the right ion: u = 1/(2u)^2
    assert!((u2[1] - 1.0 / (2.0 * u2[1]).powi(2)).abs() < 1e-12);

    let u3 = scaled_equilibrium(3).unwrap();
    let b = 1.25f64.cbrt();
    assert!((u3[0] + b).abs() < 1e-6 && u3[1].abs() < 1e-6 && (u3[2] - b).abs() < 1e-6);
}

#[test]
fn brute_force_minimiser_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 2..=6 {
        let newton = scaled_equilibrium(n).unwrap();
        for _ in 0..100 {
            let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-(n as f64)..n as f64)).collect();
            start.sort_by(f64::total_cmp);
            start.dedup();
            if start.len() < n {
                continue;
            }
            let cd = coordinate_descent(start);
            for (a, b) in cd.iter().zip(&newton) {
                assert!((a - b).abs() < 1e-6, "n = {n}: {cd:?} vs {newton:?}");
            }
        }
    }
}

#[test]
fn chains_are_symmetric_and_balanced() {
    for n in 1..=50 {
        let u = scaled_equilibrium(n).unwrap();
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        for i in 0..n {
            assert!((u[i] + u[n - 1 - i]).abs() < 1e-9);
            let mut f = u[i];
            for j in 0..n {
                if i != j {
                    let d = u[i] - u[j];
                    f -= d.signum() / (d * d);
                }
            }
            assert!(f.abs() < 1e-10, "n = {n}, ion {i}: force {f}");
        }
    }
}

#[test]
fn axial_mode_structure() {
    let wz = 2.0 * PI * 92.7e3;
    let sp = IonSpecies::yb174();
    for n in 1..=12 {
        let chain = equilibrium_positions(n, wz, &sp).unwrap();
        let modes = axial_modes(&chain).unwrap();
        assert!((modes.frequencies[0] / wz - 1.0).abs() < 1e-9, "COM mode for n = {n}");
        let gram = modes.vectors.transpose() * &modes.vectors;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-10);
            }
        }
        let trace = axial_hessian(&chain.scaled).trace() * wz * wz;
        let sum: f64 = modes.frequencies.iter().map(|w| w * w).sum();
        assert!((sum / trace - 1.0).abs() < 1e-9);
    }
    let two = equilibrium_positions(2, wz, &sp).unwrap();
    let w = axial_modes(&two).unwrap().frequencies;
    // hand Hessian: [[1 + 2/d^3, -2/d^3], [-2/d^3, 1 + 2/d^3]] with d^3 = 1/2
    assert!((w[1] / wz - 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn zigzag_threshold_three_ions() {
    let wz = 1.0;
    let thr = zigzag_threshold(3, wz).unwrap();
    assert!((thr * thr - 12.0 / 5.0).abs() < 1e-9, "{}", thr * thr);
    let u = scaled_equilibrium(3).unwrap();
    let below = SymmetricEigen::new(transverse_hessian(&u, 0.99 * thr)).eigenvalues.min();
    let above = SymmetricEigen::new(transverse_hessian(&u, 1.01 * thr)).eigenvalues.min();
    assert!(below < 0.0 && above > 0.0);
}

#[test]
fn zigzag_threshold_grows_with_ion_number() {
    let wz = 2.0 * PI * 100e3;
    let t: Vec<f64> = (3..=10).map(|n| zigzag_threshold(n, wz).unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
}

proptest! {
    #[test]
    fn chain_shrinks_with_axial_frequency(f1 in 20e3f64..2e6, f2 in 20e3f64..2e6, n in 2usize..12) {
        prop_assume!((f1 - f2).abs() > 1.0);
        let sp = IonSpecies::yb171();
        let l1 = chain_length(&equilibrium_positions(n, 2.0 * PI * f1, &sp).unwrap());
        let l2 = chain_length(&equilibrium_positions(n, 2.0 * PI * f2, &sp).unwrap());
        prop_assert_eq!(f1 < f2, l1 > l2);
    }
}
