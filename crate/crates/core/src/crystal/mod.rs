//! Linear Coulomb crystals in a harmonic axial well.
//!
//! Positions are solved in the dimensionless units `u = z / l` with
//! `l^3 = e^2 / (4 pi eps0 m w_z^2)`, where the potential energy reads
//! `sum u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j|`.

mod overlay;

pub use overlay::{chain_overlay, OverlayError, OverlayRow};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::constants::{COULOMB_E2, UM};
use crate::IonSpecies;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrystalError {
    #[error("equilibrium search did not converge (gradient norm {gradient_norm:.3e})")]
    NoConvergence { gradient_norm: f64 },
    #[error("Hessian is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NonPositiveHessian { min_eigenvalue: f64 },
    #[error("radial confinement {omega_r:.4e} rad/s is below the zigzag threshold {threshold:.4e} rad/s")]
    Zigzag { omega_r: f64, threshold: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Equilibrium of `n` ions along the trap axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IonChain {
    pub n: usize,
    /// Axial positions, μm, ascending.
    pub positions_um: Vec<f64>,
    /// Dimensionless positions `z / l`.
    pub scaled: Vec<f64>,
    pub length_scale_um: f64,
    pub omega_z: f64,
    pub species: IonSpecies,
}

/// Normal modes of the axial motion.
#[derive(Clone, Debug, PartialEq)]
pub struct AxialModes {
    /// Angular frequencies, ascending.
    pub frequencies: Vec<f64>,
    /// Column `k` is the participation vector of mode `k`.
    pub vectors: DMatrix<f64>,
}

/// Crystal length scale `l` in μm.
pub fn length_scale_um(omega_z: f64, species: &IonSpecies) -> f64 {
    let z = species.charge as f64;
    (z * z * COULOMB_E2 / (species.mass_kg() * omega_z * omega_z)).cbrt() / UM
}

fn energy(u: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        e += 0.5 * u[i] * u[i];
        for j in i + 1..u.len() {
            e += 1.0 / (u[j] - u[i]).abs();
        }
    }
    e
}

fn gradient(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g = u.to_vec();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = u[i] - u[j];
                g[i] -= d.signum() / (d * d);
            }
        }
    }
    g
}

/// Axial Hessian of the scaled energy.
pub fn axial_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in 0..n {
            if i != j {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] += c;
                h[(i, j)] = -c;
            }
        }
    }
    h
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Scaled equilibrium positions of `n` ions.
pub fn scaled_equilibrium(n: usize) -> Result<Vec<f64>, CrystalError> {
    if n == 0 {
        return Err(CrystalError::InvalidInput("need at least one ion".into()));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let span = 2.02 * (n as f64).powf(0.56);
    let mut u: Vec<f64> = (0..n)
        .map(|i| -span / 2.0 + span * i as f64 / (n - 1) as f64)
        .collect();
    let mut g = gradient(&u);
    for _ in 0..200 {
        if max_abs(&g) < 1e-13 {
            break;
        }
        let h = axial_hessian(&u);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&nalgebra::DVector::from_vec(g.clone())),
            // fall back to gradient descent away from a minimum
            None => nalgebra::DVector::from_vec(g.clone()) * 0.1,
        };
        let e0 = energy(&u);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - t * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered && energy(&trial) <= e0 + 1e-15 * e0.abs() {
                u = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(CrystalError::NoConvergence {
                    gradient_norm: max_abs(&g),
                });
            }
        }
        g = gradient(&u);
    }
    // remove residual centre-of-mass drift and asymmetry
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (u[i] - u[n - 1 - i])).collect();
    let g = gradient(&sym);
    if max_abs(&g) > 1e-10 {
        return Err(CrystalError::NoConvergence {
            gradient_norm: max_abs(&g),
        });
    }
    Ok(sym)
}

/// Equilibrium chain of `n` ions at axial frequency `omega_z` (rad/s).
pub fn equilibrium_positions(n: usize, omega_z: f64, species: &IonSpecies) -> Result<IonChain, CrystalError> {
    if !(omega_z > 0.0) || !omega_z.is_finite() {
        return Err(CrystalError::InvalidInput(format!("omega_z must be positive, got {omega_z}")));
    }
    let scaled = scaled_equilibrium(n)?;
    let l = length_scale_um(omega_z, species);
    Ok(IonChain {
        n,
        positions_um: scaled.iter().map(|u| u * l).collect(),
        scaled,
        length_scale_um: l,
        omega_z,
        species: species.clone(),
    })
}

/// As [`equilibrium_positions`], but refuses chains that would buckle at the
/// given radial frequency.
pub fn equilibrium_positions_checked(
    n: usize,
    omega_z: f64,
    omega_r: f64,
    species: &IonSpecies,
) -> Result<IonChain, CrystalError> {
    let chain = equilibrium_positions(n, omega_z, species)?;
    if n >= 3 {
        let threshold = zigzag_threshold(n, omega_z)?;
        if omega_r < threshold {
            return Err(CrystalError::Zigzag { omega_r, threshold });
        }
    }
    Ok(chain)
}

/// End-to-end extent of the chain, μm.
pub fn chain_length(chain: &IonChain) -> f64 {
    match (chain.positions_um.first(), chain.positions_um.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }
}

/// Axial normal modes from the Hessian at equilibrium.
pub fn axial_modes(chain: &IonChain) -> Result<AxialModes, CrystalError> {
    let eig = SymmetricEigen::new(axial_hessian(&chain.scaled));
    let mut order: Vec<usize> = (0..chain.n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let min = eig.eigenvalues[order[0]];
    if !(min > 0.0) {
        return Err(CrystalError::NonPositiveHessian { min_eigenvalue: min });
    }
    let mut vectors = DMatrix::zeros(chain.n, chain.n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // fix the sign so the first non-zero component is positive
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vectors.set_column(col, &v);
    }
    Ok(AxialModes {
        frequencies: order.iter().map(|&k| chain.omega_z * eig.eigenvalues[k].sqrt()).collect(),
        vectors,
    })
}

/// Transverse Hessian at anisotropy `b = w_r / w_z`, scaled units.
pub fn transverse_hessian(u: &[f64], b: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::from_diagonal_element(n, n, b * b);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let c = 1.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, i)] -= c;
                h[(i, j)] = c;
            }
        }
    }
    h
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Smallest radial frequency (rad/s) keeping an `n`-ion chain linear.
pub fn zigzag_threshold(n: usize, omega_z: f64) -> Result<f64, CrystalError> {
    if n < 3 {
        return Err(CrystalError::InvalidInput("zigzag threshold needs at least 3 ions".into()));
    }
    if !(omega_z > 0.0) {
        return Err(CrystalError::InvalidInput(format!("omega_z must be positive, got {omega_z}")));
    }
    let u = scaled_equilibrium(n)?;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while min_eigenvalue(transverse_hessian(&u, hi)) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_eigenvalue(transverse_hessian(&u, mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi * omega_z)
}
