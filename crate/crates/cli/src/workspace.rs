use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError};

pub const DEFAULT_SEED: u64 = 1;

/// Paths and defaults shared by every subcommand, read from `--config`.
/// Relative paths resolve against the directory of the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceConfig {
    #[serde(default)]
    pub trap_model: Option<PathBuf>,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default)]
    pub isotope_table: Option<PathBuf>,
    #[serde(default)]
    pub level_scheme: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl WorkspaceConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.trap_model,
            &mut cfg.geometry,
            &mut cfg.isotope_table,
            &mut cfg.level_scheme,
            &mut cfg.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate(path)?;
        Ok(cfg)
    }

    /// Referenced files must exist and parse.
    fn validate(&self, origin: &Path) -> Result<(), CliError> {
        let ctx = |field: &str, p: &Path| format!("{} field {field} ({})", origin.display(), p.display());
        if let Some(p) = &self.trap_model {
            bladetrap::trapmodel::TrapModelFile::from_json(&read_text(p)?)
                .and_then(|f| f.to_model())
                .map_err(|e| CliError::from(e).context(&ctx("trap_model", p)))?;
        }
        if let Some(p) = &self.geometry {
            bladetrap::fieldsolver::TrapGeometry::from_json(&read_text(p)?)
                .map_err(|e| CliError::from(e).context(&ctx("geometry", p)))?;
        }
        if let Some(p) = &self.isotope_table {
            bladetrap::atomphys::IsotopeTable::from_json(&read_text(p)?)
                .map_err(|e| CliError::from(e).context(&ctx("isotope_table", p)))?;
        }
        if let Some(p) = &self.level_scheme {
            bladetrap::atomphys::LevelScheme171::from_json(&read_text(p)?)
                .map_err(|e| CliError::from(e).context(&ctx("level_scheme", p)))?;
        }
        Ok(())
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Files produced by one run, written together with a manifest.
pub struct RunOutput {
    pub subcommand: String,
    pub files: Vec<(String, String)>,
    /// Contents of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub summary: Option<serde_json::Value>,
}

impl RunOutput {
    pub fn new(subcommand: impl Into<String>) -> Self {
        Self {
            subcommand: subcommand.into(),
            files: Vec::new(),
            inputs: BTreeMap::new(),
            summary: None,
        }
    }

    pub fn csv(&mut self, body: String) {
        self.files.push(("csv".into(), body));
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        self.files.push(("json".into(), serde_json::to_string_pretty(&v).expect("value serializes")));
        self.summary = Some(v);
        Ok(())
    }

    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let text = read_text(path)?;
        self.inputs.insert(path.display().to_string(), text.clone());
        Ok(text)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    created: String,
    version: &'static str,
    seed: u64,
    command: &'a serde_json::Value,
    workspace: &'a WorkspaceConfig,
    inputs: &'a BTreeMap<String, String>,
    outputs: Vec<String>,
}

/// Writes `<subcommand>-<timestamp>.<ext>` files and the manifest, returning
/// the written paths with the manifest last.
pub fn write_run(
    out: &RunOutput,
    dir: &Path,
    seed: u64,
    command: &serde_json::Value,
    workspace: &WorkspaceConfig,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| invalid(format!("output directory {}: {e}", dir.display())))?;
    let now = chrono::Utc::now();
    let stamp = now.format("%Y%m%dT%H%M%S%.3fZ");
    let mut written = Vec::new();
    for (ext, body) in &out.files {
        let path = dir.join(format!("{}-{stamp}.{ext}", out.subcommand));
        fs::write(&path, body).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    let manifest = Manifest {
        subcommand: &out.subcommand,
        created: now.to_rfc3339(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        command,
        workspace,
        inputs: &out.inputs,
        outputs: written.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = dir.join(format!("{}-{stamp}.manifest.json", out.subcommand));
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}
