use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::{solve_laplace, ElectrodeGrid, FieldError, PotentialField, SolverSettings};

/// Field with 1 V on `electrode` and every other electrode grounded.
pub fn unit_electrode_basis(
    grid: &Arc<ElectrodeGrid>,
    electrode: &str,
    settings: &SolverSettings,
) -> Result<PotentialField, FieldError> {
    grid.electrode_label(electrode)?;
    let mut bv = BTreeMap::new();
    bv.insert(electrode.to_string(), 1.0);
    solve_laplace(grid, &bv, settings)
}

/// Voxel-wise weighted sum of fields computed on one grid.
pub fn superpose(bases: &[&PotentialField], voltages: &[f64]) -> Result<PotentialField, FieldError> {
    if bases.is_empty() || bases.len() != voltages.len() {
        return Err(FieldError::InvalidSettings(format!(
            "{} bases with {} voltages",
            bases.len(),
            voltages.len()
        )));
    }
    let first = bases[0];
    if bases.iter().any(|b| !b.same_grid(first)) {
        return Err(FieldError::GridMismatch);
    }
    let mut values = vec![0.0; first.values.len()];
    let mut boundary: BTreeMap<String, f64> = BTreeMap::new();
    let mut residual = 0.0f64;
    for (b, &w) in bases.iter().zip(voltages) {
        for (acc, v) in values.iter_mut().zip(&b.values) {
            *acc += w * v;
        }
        for (name, v) in &b.boundary_voltages {
            *boundary.entry(name.clone()).or_insert(0.0) += w * v;
        }
        residual = residual.max(b.residual);
    }
    let drive = boundary.values().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PotentialField {
        grid: Arc::clone(&first.grid),
        values,
        residual,
        sweeps: 0,
        boundary_voltages: boundary,
        drive_volts: if drive > 0.0 { drive } else { 1.0 },
    })
}

/// Lazily solved unit bases for every electrode of a grid.
///
/// Solved fields are kept in memory and, when a cache directory is given,
/// written to disk under a key derived from the grid fingerprint and the solver
/// settings.
#[derive(Debug)]
pub struct BasisSet {
    grid: Arc<ElectrodeGrid>,
    settings: SolverSettings,
    cache_dir: Option<PathBuf>,
    memo: Mutex<HashMap<String, Arc<PotentialField>>>,
}

impl BasisSet {
    pub fn new(grid: Arc<ElectrodeGrid>, settings: SolverSettings) -> Self {
        Self {
            grid,
            settings,
            cache_dir: None,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn grid(&self) -> &Arc<ElectrodeGrid> {
        &self.grid
    }

    /// Basis field of `electrode`, solving it on first use.
    pub fn get(&self, electrode: &str) -> Result<Arc<PotentialField>, FieldError> {
        self.grid.electrode_label(electrode)?;
        if let Some(f) = self.memo.lock().expect("basis cache poisoned").get(electrode) {
            return Ok(Arc::clone(f));
        }
        let field = match self.load(electrode)? {
            Some(f) => f,
            None => {
                let f = unit_electrode_basis(&self.grid, electrode, &self.settings)?;
                self.store(electrode, &f)?;
                f
            }
        };
        let field = Arc::new(field);
        self.memo
            .lock()
            .expect("basis cache poisoned")
            .entry(electrode.to_string())
            .or_insert_with(|| Arc::clone(&field));
        Ok(field)
    }

    /// Superposition of the named bases with the given voltages.
    pub fn combine(&self, voltages: &BTreeMap<String, f64>) -> Result<PotentialField, FieldError> {
        let mut fields = Vec::with_capacity(voltages.len());
        for name in voltages.keys() {
            fields.push(self.get(name)?);
        }
        let refs: Vec<&PotentialField> = fields.iter().map(|f| f.as_ref()).collect();
        let w: Vec<f64> = voltages.values().copied().collect();
        superpose(&refs, &w)
    }

    fn key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.grid.fingerprint().as_bytes());
        h.update(serde_json::to_vec(&self.settings).expect("settings serialise"));
        hex::encode(h.finalize())[..32].to_string()
    }

    fn path(&self, dir: &Path, electrode: &str) -> PathBuf {
        dir.join(format!("{}-{electrode}.basis", self.key()))
    }

    fn load(&self, electrode: &str) -> Result<Option<PotentialField>, FieldError> {
        let Some(dir) = &self.cache_dir else {
            return Ok(None);
        };
        let path = self.path(dir, electrode);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(FieldError::Cache(format!("{}: {e}", path.display()))),
        };
        let n = self.grid.len();
        if bytes.len() != 8 * (n + 2) {
            // stale or truncated entry: recompute
            return Ok(None);
        }
        let word = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
        let residual = word(0);
        let sweeps = word(1) as usize;
        let values = (0..n).map(|i| word(i + 2)).collect();
        let mut bv = BTreeMap::new();
        bv.insert(electrode.to_string(), 1.0);
        Ok(Some(PotentialField {
            grid: Arc::clone(&self.grid),
            values,
            residual,
            sweeps,
            boundary_voltages: bv,
            drive_volts: 1.0,
        }))
    }

    fn store(&self, electrode: &str, field: &PotentialField) -> Result<(), FieldError> {
        let Some(dir) = &self.cache_dir else {
            return Ok(());
        };
        let io = |e: std::io::Error| FieldError::Cache(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let path = self.path(dir, electrode);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut buf = Vec::with_capacity(8 * (field.values.len() + 2));
        buf.extend_from_slice(&field.residual.to_le_bytes());
        buf.extend_from_slice(&(field.sweeps as f64).to_le_bytes());
        for v in &field.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&buf).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(())
    }
}
