use serde::{Deserialize, Serialize};

use super::{ElectrodeGrid, FieldError};

/// Electrode labels produced by [`TrapGeometry::voxelize`], in label order.
pub const ELECTRODE_NAMES: [&str; 10] = [
    "blade_a", "blade_b", "endcap_l", "endcap_r", "comp1", "comp2", "comp3", "comp4", "comp5", "ground",
];

/// Parametric blade trap. z is the trap axis.
///
/// Blade pair A sits on the ±x axis and pair B on ±y. Each blade is a wedge of
/// opening `blade_tip_angle_deg` ending in a cylinder of radius
/// `blade_tip_radius_mm`, with its tip `blade_aperture_mm / 2` from the axis.
/// Endcaps are hollow cylinders starting at `±endcap_separation_mm / 2`.
/// Compensation rods point radially at the centre along the diagonals
/// u = (x + y)/√2 and v = (x − y)/√2: comp1/comp2 on +u at ±z offset,
/// comp3/comp4 on −u, and comp5 (two rods, one at each z offset) on +v.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapGeometry {
    pub blade_length_mm: f64,
    pub blade_aperture_mm: f64,
    pub endcap_separation_mm: f64,
    pub blade_tip_angle_deg: f64,
    pub blade_tip_radius_mm: f64,
    pub endcap_bore_mm: f64,
    pub endcap_outer_diameter_mm: f64,
    /// Extra axial displacement of the right (+z) endcap away from the centre.
    pub endcap_r_offset_mm: f64,
    pub comp_radius_mm: f64,
    pub comp_axial_offset_mm: f64,
    pub comp5_radius_mm: f64,
    pub comp_rod_diameter_mm: f64,
    /// Edge length of the cubic simulation domain.
    pub domain_mm: f64,
    pub grid_points: usize,
}

impl Default for TrapGeometry {
    fn default() -> Self {
        Self::variant_a()
    }
}

impl TrapGeometry {
    pub fn variant_a() -> Self {
        Self {
            blade_length_mm: 6.0,
            blade_aperture_mm: 2.0,
            endcap_separation_mm: 8.0,
            blade_tip_angle_deg: 30.0,
            blade_tip_radius_mm: 0.1,
            endcap_bore_mm: 1.0,
            endcap_outer_diameter_mm: 4.0,
            endcap_r_offset_mm: 0.0,
            comp_radius_mm: 2.5,
            comp_axial_offset_mm: 1.5,
            comp5_radius_mm: 3.5,
            comp_rod_diameter_mm: 0.5,
            domain_mm: 10.0,
            grid_points: 101,
        }
    }

    pub fn variant_b() -> Self {
        Self {
            blade_length_mm: 8.0,
            endcap_separation_mm: 10.0,
            domain_mm: 12.0,
            grid_points: 121,
            ..Self::variant_a()
        }
    }

    pub fn variant_c() -> Self {
        Self {
            blade_aperture_mm: 1.75,
            ..Self::variant_b()
        }
    }

    /// Looks up a named variant ("a", "b" or "c").
    pub fn preset(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "a" => Some(Self::variant_a()),
            "b" => Some(Self::variant_b()),
            "c" => Some(Self::variant_c()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        let g: Self = serde_json::from_str(text).map_err(|e| FieldError::InvalidGrid(format!("geometry JSON: {e}")))?;
        g.validate()?;
        Ok(g)
    }

    pub fn spacing_mm(&self) -> f64 {
        self.domain_mm / (self.grid_points - 1) as f64
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let positive = [
            ("blade_length_mm", self.blade_length_mm),
            ("blade_aperture_mm", self.blade_aperture_mm),
            ("endcap_separation_mm", self.endcap_separation_mm),
            ("blade_tip_angle_deg", self.blade_tip_angle_deg),
            ("blade_tip_radius_mm", self.blade_tip_radius_mm),
            ("endcap_outer_diameter_mm", self.endcap_outer_diameter_mm),
            ("comp_radius_mm", self.comp_radius_mm),
            ("comp5_radius_mm", self.comp5_radius_mm),
            ("comp_rod_diameter_mm", self.comp_rod_diameter_mm),
            ("domain_mm", self.domain_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FieldError::InvalidGrid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grid_points < 5 {
            return Err(FieldError::InvalidGrid("grid_points must be at least 5".into()));
        }
        if !(self.endcap_bore_mm >= 0.0 && self.endcap_bore_mm < self.endcap_outer_diameter_mm) {
            return Err(FieldError::InvalidGrid("endcap bore must be smaller than its outer diameter".into()));
        }
        if self.blade_tip_angle_deg >= 180.0 {
            return Err(FieldError::InvalidGrid("blade tip angle must be below 180 degrees".into()));
        }
        Ok(())
    }

    /// Same geometry with blades of half the length.
    pub fn with_half_blades(&self) -> Self {
        Self {
            blade_length_mm: self.blade_length_mm / 2.0,
            ..self.clone()
        }
    }

    /// Rasterises the geometry onto a centred cubic grid.
    pub fn voxelize(&self) -> Result<ElectrodeGrid, FieldError> {
        self.validate()?;
        let n = self.grid_points;
        let mut grid = ElectrodeGrid::centered([n, n, n], self.spacing_mm())?;
        // slack so that surfaces falling exactly on grid planes are included
        let eps = 1e-6 * self.spacing_mm();
        let half = self.blade_length_mm / 2.0 + eps;
        let r_tip = self.blade_aperture_mm / 2.0;
        let rho = self.blade_tip_radius_mm;
        let phi = (self.blade_tip_angle_deg / 2.0).to_radians();
        // a voxel belongs to a blade if it lies in the rounded wedge pointing at the axis
        let wedge = move |radial: f64, lateral: f64| {
            let cx = r_tip + rho;
            let d = radial - cx;
            if d * d + lateral * lateral <= rho * rho {
                return true;
            }
            d >= 0.0 && lateral.abs() * phi.cos() - d * phi.sin() <= rho
        };
        grid.paint("blade_a", |[x, y, z]| z.abs() <= half && wedge(x.abs(), y));
        grid.paint("blade_b", |[x, y, z]| z.abs() <= half && wedge(y.abs(), x));

        let bore = self.endcap_bore_mm / 2.0 - eps;
        let outer = self.endcap_outer_diameter_mm / 2.0 + eps;
        let z_l = self.endcap_separation_mm / 2.0 - eps;
        let z_r = z_l + self.endcap_r_offset_mm;
        let ring = move |x: f64, y: f64| {
            let r = (x * x + y * y).sqrt();
            r >= bore && r <= outer
        };
        grid.paint("endcap_l", |[x, y, z]| z <= -z_l && ring(x, y));
        grid.paint("endcap_r", |[x, y, z]| z >= z_r && ring(x, y));

        let rod_r = self.comp_rod_diameter_mm / 2.0 + eps;
        let zc = self.comp_axial_offset_mm;
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        // rod along +u/-u (or +v) at axial offset `z0`, starting at radius `r0`
        let rod = move |p: [f64; 3], along_u: bool, sign: f64, z0: f64, r0: f64| {
            let u = (p[0] + p[1]) * s2;
            let v = (p[0] - p[1]) * s2;
            let (a, b) = if along_u { (u, v) } else { (v, u) };
            let dz = p[2] - z0;
            sign * a >= r0 - eps && b * b + dz * dz <= rod_r * rod_r
        };
        let rc = self.comp_radius_mm;
        let r5 = self.comp5_radius_mm;
        grid.paint("comp1", |p| rod(p, true, 1.0, zc, rc));
        grid.paint("comp2", |p| rod(p, true, 1.0, -zc, rc));
        grid.paint("comp3", |p| rod(p, true, -1.0, zc, rc));
        grid.paint("comp4", |p| rod(p, true, -1.0, -zc, rc));
        grid.paint("comp5", |p| rod(p, false, 1.0, zc, r5) || rod(p, false, 1.0, -zc, r5));
        Ok(grid.finish("ground"))
    }

    /// Hex digest identifying the rasterised problem, used as a cache key.
    pub fn cache_key(&self) -> Result<String, FieldError> {
        Ok(self.voxelize()?.fingerprint().to_string())
    }
}
