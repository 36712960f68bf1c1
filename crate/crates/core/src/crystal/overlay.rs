use std::sync::Arc;

use serde::Serialize;

use super::{chain_length, equilibrium_positions, CrystalError};
use crate::fieldsolver::{extract_coefficients, BasisSet, FieldError, SolverSettings, TrapGeometry};
use crate::constants::PER_MM2;
use crate::IonSpecies;

/// Chain extent for one geometry at a fixed endcap voltage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlayRow {
    pub label: String,
    pub alpha_dc_per_mm2: f64,
    pub alpha_rf_per_mm2: f64,
    pub omega_z: f64,
    pub chain_length_um: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum OverlayError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error("geometry '{0}' yields no axial confinement")]
    Unconfined(String),
}

/// For each labelled geometry, extracts the axial DC and RF coefficients and
/// the length of an `n_ions` chain held by both endcaps at `v_dc`.
pub fn chain_overlay(
    geometries: &[(String, TrapGeometry)],
    v_dc: f64,
    n_ions: usize,
    species: &IonSpecies,
    settings: &SolverSettings,
) -> Result<Vec<OverlayRow>, OverlayError> {
    let mut rows = Vec::with_capacity(geometries.len());
    for (label, geom) in geometries {
        let set = BasisSet::new(Arc::new(geom.voxelize()?), *settings);
        let l = set.get("endcap_l")?;
        let r = set.get("endcap_r")?;
        let dc = extract_coefficients(&crate::fieldsolver::superpose(&[&l, &r], &[1.0, 1.0])?)?;
        let rf = extract_coefficients(set.get("blade_a")?.as_ref())?;
        if !(dc.alpha > 0.0 && v_dc > 0.0) {
            return Err(OverlayError::Unconfined(label.clone()));
        }
        let omega_z = (species.q_over_m() * v_dc * dc.alpha * PER_MM2).sqrt();
        let chain = equilibrium_positions(n_ions, omega_z, species)?;
        rows.push(OverlayRow {
            label: label.clone(),
            alpha_dc_per_mm2: dc.alpha,
            alpha_rf_per_mm2: rf.alpha,
            omega_z,
            chain_length_um: chain_length(&chain),
        });
    }
    Ok(rows)
}
