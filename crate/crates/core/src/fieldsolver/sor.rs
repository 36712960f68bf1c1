use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ElectrodeGrid, FieldError, PotentialField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Over-relaxation factor, 1 < omega < 2.
    pub omega: f64,
    /// Stop once the estimated distance to the converged solution, judged from
    /// the size and decay of the sweep updates, is below `tolerance * max|V_boundary|`.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Start from the prolonged solution of the half-resolution problem.
    pub coarse_start: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            omega: 1.9,
            tolerance: 1e-6,
            max_sweeps: 50_000,
            coarse_start: true,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<(), FieldError> {
        if !(self.tolerance > 0.0) {
            return Err(FieldError::InvalidSettings(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(FieldError::InvalidSettings(format!("omega must lie in (0, 2), got {}", self.omega)));
        }
        if self.max_sweeps == 0 {
            return Err(FieldError::InvalidSettings("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// Grid with prescribed values on a subset of voxels. Every voxel on the
/// domain boundary must be prescribed.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletProblem {
    pub shape: [usize; 3],
    pub fixed: Vec<bool>,
    /// Boundary data on fixed voxels; initial guess elsewhere.
    pub values: Vec<f64>,
}

impl DirichletProblem {
    /// Box whose six faces carry `f(i, j, k)`; the interior starts at zero.
    pub fn from_faces(shape: [usize; 3], f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let [nx, ny, nz] = shape;
        let mut fixed = vec![false; nx * ny * nz];
        let mut values = vec![0.0; nx * ny * nz];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                        let idx = (k * ny + j) * nx + i;
                        fixed[idx] = true;
                        values[idx] = f(i, j, k);
                    }
                }
            }
        }
        Self { shape, fixed, values }
    }

    fn check(&self) -> Result<(), FieldError> {
        let [nx, ny, nz] = self.shape;
        let n = nx * ny * nz;
        if self.shape.iter().any(|&s| s < 3) || self.fixed.len() != n || self.values.len() != n {
            return Err(FieldError::InvalidGrid("inconsistent problem dimensions".into()));
        }
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1)
                        && !self.fixed[(k * ny + j) * nx + i]
                    {
                        return Err(FieldError::InvalidGrid(format!("boundary voxel ({i}, {j}, {k}) is free")));
                    }
                }
            }
        }
        Ok(())
    }

    fn coarsened(&self) -> Option<DirichletProblem> {
        if self.shape.iter().any(|&n| n < 21 || (n - 1) % 2 != 0) {
            return None;
        }
        let [nx, ny, _] = self.shape;
        let cs = self.shape.map(|n| (n + 1) / 2);
        let mut fixed = Vec::with_capacity(cs[0] * cs[1] * cs[2]);
        let mut values = Vec::with_capacity(fixed.capacity());
        for k in 0..cs[2] {
            for j in 0..cs[1] {
                for i in 0..cs[0] {
                    let f = (2 * k * ny + 2 * j) * nx + 2 * i;
                    fixed.push(self.fixed[f]);
                    values.push(if self.fixed[f] { self.values[f] } else { 0.0 });
                }
            }
        }
        Some(DirichletProblem { shape: cs, fixed, values })
    }

    /// Trilinear prolongation of a coarse solution onto the free voxels.
    fn prolong_from(&mut self, coarse: &[f64], cs: [usize; 3]) {
        let [nx, ny, nz] = self.shape;
        let at = |i: usize, j: usize, k: usize| coarse[(k * cs[1] + j) * cs[0] + i];
        for k in 0..nz {
            let (k0, k1) = (k / 2, (k + 1) / 2);
            for j in 0..ny {
                let (j0, j1) = (j / 2, (j + 1) / 2);
                for i in 0..nx {
                    let idx = (k * ny + j) * nx + i;
                    if self.fixed[idx] {
                        continue;
                    }
                    let (i0, i1) = (i / 2, (i + 1) / 2);
                    let mut s = 0.0;
                    for &kk in &[k0, k1] {
                        for &jj in &[j0, j1] {
                            for &ii in &[i0, i1] {
                                s += at(ii, jj, kk);
                            }
                        }
                    }
                    self.values[idx] = s / 8.0;
                }
            }
        }
    }
}

/// Outcome of relaxing a [`DirichletProblem`].
#[derive(Clone, Debug, PartialEq)]
pub struct Relaxed {
    pub values: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
}

/// Relaxes a prescribed-boundary problem to the requested tolerance.
pub fn solve_prescribed(mut problem: DirichletProblem, settings: &SolverSettings) -> Result<Relaxed, FieldError> {
    settings.validate()?;
    problem.check()?;
    let scale = problem
        .values
        .iter()
        .zip(&problem.fixed)
        .filter(|(_, f)| **f)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    if scale == 0.0 {
        let values = problem
            .values
            .iter()
            .zip(&problem.fixed)
            .map(|(v, f)| if *f { *v } else { 0.0 })
            .collect();
        return Ok(Relaxed {
            values,
            residual: 0.0,
            sweeps: 0,
        });
    }
    if settings.coarse_start {
        if let Some(coarse) = problem.coarsened() {
            let cs = coarse.shape;
            let c = solve_prescribed(coarse, settings)?;
            problem.prolong_from(&c.values, cs);
        }
    }
    let tol_abs = settings.tolerance * scale;
    let mut last = f64::INFINITY;
    let mut history = [f64::INFINITY; RATE_WINDOW + 1];
    for sweep in 1..=settings.max_sweeps {
        last = sweep_red_black(&problem.shape, &problem.fixed, &mut problem.values, settings.omega);
        history.rotate_left(1);
        history[RATE_WINDOW] = last;
        if last == 0.0 || remaining_error(&history) <= tol_abs {
            return Ok(Relaxed {
                values: problem.values,
                residual: last / scale,
                sweeps: sweep,
            });
        }
    }
    Err(FieldError::NonConvergence {
        max_iters: settings.max_sweeps,
        residual: last / scale,
    })
}

const RATE_WINDOW: usize = 5;

/// Geometric-series bound on the distance to the fixed point, `du r / (1 - r)`,
/// with the contraction rate `r` averaged over the last few sweeps.
fn remaining_error(history: &[f64; RATE_WINDOW + 1]) -> f64 {
    let (first, last) = (history[0], history[RATE_WINDOW]);
    if !first.is_finite() || first == 0.0 {
        return f64::INFINITY;
    }
    let r = (last / first).powf(1.0 / RATE_WINDOW as f64);
    if r >= 1.0 {
        f64::INFINITY
    } else {
        last * r / (1.0 - r)
    }
}

/// One red-black SOR sweep; returns the largest absolute update.
fn sweep_red_black(shape: &[usize; 3], fixed: &[bool], v: &mut [f64], omega: f64) -> f64 {
    let [nx, ny, nz] = *shape;
    let sx = 1;
    let sy = nx;
    let sz = nx * ny;
    let mut max_du = 0.0f64;
    for color in 0..2 {
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                let i0 = if (1 + j + k) % 2 == color { 1 } else { 2 };
                let row = (k * ny + j) * nx;
                let mut i = i0;
                while i < nx - 1 {
                    let idx = row + i;
                    if !fixed[idx] {
                        let avg = (v[idx - sx] + v[idx + sx] + v[idx - sy] + v[idx + sy] + v[idx - sz] + v[idx + sz])
                            / 6.0;
                        let du = omega * (avg - v[idx]);
                        v[idx] += du;
                        max_du = max_du.max(du.abs());
                    }
                    i += 2;
                }
            }
        }
    }
    max_du
}

/// Solves the grid with the given electrode voltages; unlisted electrodes are grounded.
pub fn solve_laplace(
    grid: &Arc<ElectrodeGrid>,
    boundary_voltages: &BTreeMap<String, f64>,
    settings: &SolverSettings,
) -> Result<PotentialField, FieldError> {
    let mut by_label = vec![0.0; grid.electrodes().len() + 1];
    for (name, v) in boundary_voltages {
        let l = grid.electrode_label(name)?;
        if !v.is_finite() {
            return Err(FieldError::InvalidSettings(format!("non-finite voltage on '{name}'")));
        }
        by_label[l as usize] = *v;
    }
    let fixed: Vec<bool> = grid.mask().iter().map(|&m| m != 0).collect();
    let values: Vec<f64> = grid.mask().iter().map(|&m| by_label[m as usize]).collect();
    let relaxed = solve_prescribed(
        DirichletProblem {
            shape: grid.shape(),
            fixed,
            values,
        },
        settings,
    )?;
    let drive = boundary_voltages.values().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PotentialField {
        grid: Arc::clone(grid),
        values: relaxed.values,
        residual: relaxed.residual,
        sweeps: relaxed.sweeps,
        boundary_voltages: boundary_voltages.clone(),
        drive_volts: if drive > 0.0 { drive } else { 1.0 },
    })
}
