//! Least-squares nulling of a stray field with the compensation electrodes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DynamicsError, StrayField};
use crate::fieldsolver::{field_at_center, BasisSet, FieldError, PotentialField};

pub const COMPENSATION_ELECTRODES: [&str; 5] = ["comp1", "comp2", "comp3", "comp4", "comp5"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensationSolution {
    pub electrodes: Vec<String>,
    pub voltages: Vec<f64>,
    /// Field left at the trap centre after compensation, V/mm.
    pub residual_v_per_mm: [f64; 3],
    pub residual_norm: f64,
    pub rank: usize,
    /// False when the residual exceeds the requested tolerance.
    pub reachable: bool,
}

impl CompensationSolution {
    pub fn residual_field(&self) -> StrayField<f64> {
        StrayField {
            e_v_per_mm: self.residual_v_per_mm,
        }
    }
}

/// Minimum-norm voltages cancelling `stray` at the trap centre.
///
/// Each basis field is the solution with one electrode at `drive_volts` and
/// all others grounded. `tolerance` is relative to `|stray|`.
pub fn compensate(
    stray: &StrayField<f64>,
    basis: &[(&str, &PotentialField)],
    tolerance: f64,
) -> Result<CompensationSolution, DynamicsError> {
    if basis.is_empty() {
        return Err(DynamicsError::InvalidInput("compensation basis is empty".into()));
    }
    if !(tolerance > 0.0) {
        return Err(DynamicsError::InvalidInput(format!("tolerance must be > 0, got {tolerance}")));
    }
    for (_, f) in &basis[1..] {
        if !f.same_grid(basis[0].1) {
            return Err(FieldError::GridMismatch.into());
        }
    }
    let n = basis.len();
    let mut a = DMatrix::zeros(3, n);
    for (j, (_, f)) in basis.iter().enumerate() {
        let e = field_at_center(f);
        for i in 0..3 {
            a[(i, j)] = e[i] / f.drive_volts;
        }
    }
    let target = DVector::from_iterator(3, stray.e_v_per_mm.iter().map(|e| -e));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = if rank == 0 {
        DVector::zeros(n)
    } else {
        svd.solve(&target, eps).map_err(|e| DynamicsError::InvalidInput(e.to_string()))?
    };
    let r = &a * &x - &target;
    let residual_v_per_mm = [r[0], r[1], r[2]];
    let residual_norm = r.norm();
    let scale = stray.norm();
    let reachable = residual_norm <= tolerance * scale.max(f64::MIN_POSITIVE);
    if !reachable && rank < 3 {
        return Err(DynamicsError::SingularBasis {
            rank,
            residual: residual_norm,
        });
    }
    Ok(CompensationSolution {
        electrodes: basis.iter().map(|(n, _)| n.to_string()).collect(),
        voltages: x.iter().copied().collect(),
        residual_v_per_mm,
        residual_norm,
        rank,
        reachable,
    })
}

/// [`compensate`] with the five compensation electrodes of a solved basis.
pub fn compensate_with_basis_set(
    stray: &StrayField<f64>,
    basis: &BasisSet,
    tolerance: f64,
) -> Result<CompensationSolution, DynamicsError> {
    let fields = COMPENSATION_ELECTRODES
        .iter()
        .map(|&n| basis.get(n).map(|f| (n, f)))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<(&str, &PotentialField)> = fields.iter().map(|(n, f)| (*n, f.as_ref())).collect();
    compensate(stray, &refs, tolerance)
}
