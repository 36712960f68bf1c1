use serde::{Deserialize, Serialize};

use super::{DriveSettings, TrapCoefficients, TrapError, TrapModel, FITTED_LAPLACE_TOLERANCE, LAPLACE_TOLERANCE};
use crate::constants::mhz_to_rad_s;

/// JSON schema for [`TrapModelFile`], shipped alongside the crate.
pub const TRAP_MODEL_SCHEMA: &str = include_str!("../../../../docs/schemas/trap_model.schema.json");

/// On-disk trap model with unit-suffixed keys.
///
/// `beta_dc_per_mm2` may be omitted, in which case it closes the Laplace sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alpha_dc_per_mm2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_dc_per_mm2: Option<f64>,
    pub gamma_dc_per_mm2: f64,
    #[serde(default)]
    pub alpha_rf_per_mm2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_rf_per_mm2: Option<f64>,
    pub gamma_rf_per_mm2: f64,
    pub rf_frequency_mhz: f64,
    pub v_rf_volts: f64,
    pub v_endcap_left_volts: f64,
    pub v_endcap_right_volts: f64,
    #[serde(default)]
    pub v_comp_volts: [f64; 5],
    /// Accept the looser closure used for coefficients extracted from a field solve.
    #[serde(default)]
    pub fitted: bool,
}

impl TrapModelFile {
    pub fn from_json(text: &str) -> Result<Self, TrapError> {
        serde_json::from_str(text).map_err(|e| TrapError::DomainError(format!("trap model JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trap model serialises")
    }

    pub fn to_model(&self) -> Result<TrapModel<f64>, TrapError> {
        let beta_dc = self
            .beta_dc_per_mm2
            .unwrap_or(-self.alpha_dc_per_mm2 - self.gamma_dc_per_mm2);
        let beta_rf = self
            .beta_rf_per_mm2
            .unwrap_or(-self.alpha_rf_per_mm2 - self.gamma_rf_per_mm2);
        let tol = if self.fitted {
            FITTED_LAPLACE_TOLERANCE
        } else {
            LAPLACE_TOLERANCE
        };
        let coefficients = TrapCoefficients::with_tolerance(
            [self.alpha_dc_per_mm2, beta_dc, self.gamma_dc_per_mm2],
            [self.alpha_rf_per_mm2, beta_rf, self.gamma_rf_per_mm2],
            tol,
        )?;
        let mut drive = DriveSettings::new(
            mhz_to_rad_s(self.rf_frequency_mhz),
            self.v_rf_volts,
            self.v_endcap_left_volts,
            self.v_endcap_right_volts,
        )?;
        drive.v_comp = self.v_comp_volts;
        drive.validate()?;
        TrapModel::new(coefficients, drive)
    }

    pub fn from_model(model: &TrapModel<f64>) -> Self {
        let c = &model.coefficients;
        let d = &model.drive;
        Self {
            name: None,
            alpha_dc_per_mm2: c.alpha_dc,
            beta_dc_per_mm2: Some(c.beta_dc),
            gamma_dc_per_mm2: c.gamma_dc,
            alpha_rf_per_mm2: c.alpha_rf,
            beta_rf_per_mm2: Some(c.beta_rf),
            gamma_rf_per_mm2: c.gamma_rf,
            rf_frequency_mhz: d.omega_rf / (2.0 * std::f64::consts::PI) / 1e6,
            v_rf_volts: d.v_rf,
            v_endcap_left_volts: d.v_endcap_left,
            v_endcap_right_volts: d.v_endcap_right,
            v_comp_volts: d.v_comp,
            fitted: false,
        }
    }
}
