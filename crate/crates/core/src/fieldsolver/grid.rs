use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::FieldError;
use crate::Axis;

/// Voxel grid with an electrode label per voxel.
///
/// Voxel `(i, j, k)` sits at `h * ((i, j, k) - c)` with `c` the central index and
/// `i` along x; the flat
/// index is `(k * ny + j) * nx + i`. Label 0 is free space, label `n > 0` is
/// electrode `electrodes[n - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeGrid {
    shape: [usize; 3],
    spacing_mm: f64,
    center_index: [f64; 3],
    mask: Vec<u8>,
    electrodes: Vec<String>,
    fingerprint: String,
}

impl ElectrodeGrid {
    /// Empty grid centred on the origin. Unassigned boundary voxels are labelled
    /// `shell` (created if absent) when [`ElectrodeGrid::finish`] is called.
    pub fn centered(shape: [usize; 3], spacing_mm: f64) -> Result<Self, FieldError> {
        if shape.iter().any(|&n| n < 3) {
            return Err(FieldError::InvalidGrid(format!("shape {shape:?} needs at least 3 points per axis")));
        }
        if !(spacing_mm > 0.0) || !spacing_mm.is_finite() {
            return Err(FieldError::InvalidGrid(format!("spacing must be positive, got {spacing_mm}")));
        }
        let center_index = [0, 1, 2].map(|d| (shape[d] - 1) as f64 / 2.0);
        Ok(Self {
            shape,
            spacing_mm,
            center_index,
            mask: vec![0; shape[0] * shape[1] * shape[2]],
            electrodes: Vec::new(),
            fingerprint: String::new(),
        })
    }

    /// Labels every voxel whose centre satisfies `inside` (coordinates in mm).
    /// Voxels already claimed by another electrode are left alone.
    pub fn paint(&mut self, name: &str, inside: impl Fn([f64; 3]) -> bool) -> usize {
        let label = self.label_for(name);
        let [nx, ny, nz] = self.shape;
        let mut painted = 0;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = (k * ny + j) * nx + i;
                    if self.mask[idx] == 0 && inside(self.position(i, j, k)) {
                        self.mask[idx] = label;
                        painted += 1;
                    }
                }
            }
        }
        painted
    }

    fn label_for(&mut self, name: &str) -> u8 {
        if let Some(p) = self.electrodes.iter().position(|e| e == name) {
            return (p + 1) as u8;
        }
        assert!(self.electrodes.len() < u8::MAX as usize, "too many electrodes");
        self.electrodes.push(name.to_string());
        self.electrodes.len() as u8
    }

    /// Assigns free boundary voxels to `shell_name` and freezes the fingerprint.
    pub fn finish(mut self, shell_name: &str) -> Self {
        let label = self.label_for(shell_name);
        let [nx, ny, nz] = self.shape;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let on_boundary = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
                    let idx = (k * ny + j) * nx + i;
                    if on_boundary && self.mask[idx] == 0 {
                        self.mask[idx] = label;
                    }
                }
            }
        }
        let mut h = Sha256::new();
        for n in self.shape {
            h.update((n as u64).to_le_bytes());
        }
        h.update(self.spacing_mm.to_le_bytes());
        for o in self.center_index {
            h.update(o.to_le_bytes());
        }
        for e in &self.electrodes {
            h.update(e.as_bytes());
            h.update([0]);
        }
        h.update(&self.mask);
        self.fingerprint = hex::encode(h.finalize());
        self
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn electrodes(&self) -> &[String] {
        &self.electrodes
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    /// Hex digest of shape, spacing, labels and mask.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.shape[1] + j) * self.shape[0] + i
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 - self.center_index[0]) * self.spacing_mm,
            (j as f64 - self.center_index[1]) * self.spacing_mm,
            (k as f64 - self.center_index[2]) * self.spacing_mm,
        ]
    }

    /// Index of the voxel nearest the coordinate origin.
    pub fn center_voxel(&self) -> [usize; 3] {
        self.center_index.map(|c| c.round() as usize)
    }

    pub fn electrode_label(&self, name: &str) -> Result<u8, FieldError> {
        self.electrodes
            .iter()
            .position(|e| e == name)
            .map(|p| (p + 1) as u8)
            .ok_or_else(|| FieldError::UnknownElectrode(name.to_string()))
    }

    pub fn voxel_count(&self, name: &str) -> Result<usize, FieldError> {
        let l = self.electrode_label(name)?;
        Ok(self.mask.iter().filter(|&&m| m == l).count())
    }
}

/// Solved potential on an [`ElectrodeGrid`].
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub grid: Arc<ElectrodeGrid>,
    pub values: Vec<f64>,
    /// Largest relative update of the final sweep.
    pub residual: f64,
    pub sweeps: usize,
    pub boundary_voltages: BTreeMap<String, f64>,
    /// Voltage used to normalise extracted coefficients.
    pub drive_volts: f64,
}

impl PotentialField {
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    /// Values along the grid line through the centre voxel parallel to `axis`.
    pub fn line(&self, axis: Axis) -> Vec<([f64; 3], f64)> {
        let c = self.grid.center_voxel();
        let d = axis.index();
        (0..self.grid.shape()[d])
            .map(|n| {
                let mut v = c;
                v[d] = n;
                (self.grid.position(v[0], v[1], v[2]), self.at(v[0], v[1], v[2]))
            })
            .collect()
    }

    pub fn same_grid(&self, other: &PotentialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.fingerprint() == other.grid.fingerprint()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
