use serde::{Deserialize, Serialize};

use super::AtomError;

const BUILTIN: &str = include_str!("../../../../config/level_scheme_171.json");

/// Frequencies used to drive the 171Yb+ level scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelScheme171 {
    /// Ground-state hyperfine (qubit) splitting, GHz.
    pub hyperfine_ghz: f64,
    /// 369 nm EOM drive reaching 2P1/2 F = 1, GHz.
    pub eom_uv_ghz: f64,
    /// 935 nm EOM drive, GHz.
    pub eom_ir_ghz: f64,
    /// Offset between the two AOM drives, kHz.
    pub aom_offset_khz: f64,
    /// 2D3/2 lifetime, ms.
    pub d_state_lifetime_ms: f64,
}

impl Default for LevelScheme171 {
    fn default() -> Self {
        Self::from_json(BUILTIN).expect("built-in level scheme is valid")
    }
}

impl LevelScheme171 {
    pub fn from_json(text: &str) -> Result<Self, AtomError> {
        let s: Self = serde_json::from_str(text).map_err(|e| AtomError::InvalidTable(format!("level scheme JSON: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AtomError> {
        let all = [
            ("hyperfine_ghz", self.hyperfine_ghz),
            ("eom_uv_ghz", self.eom_uv_ghz),
            ("eom_ir_ghz", self.eom_ir_ghz),
            ("aom_offset_khz", self.aom_offset_khz),
            ("d_state_lifetime_ms", self.d_state_lifetime_ms),
        ];
        for (k, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AtomError::InvalidTable(format!("{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
