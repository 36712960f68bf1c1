use serde::{Deserialize, Serialize};

/// Inclusive linear scan `start:stop:count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl ScanRange {
    pub fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn step(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.stop - self.start) / (self.count - 1) as f64
        }
    }
}

impl std::str::FromStr for ScanRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range '{s}' must look like start:stop:count"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| format!("bad start in '{s}'"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| format!("bad stop in '{s}'"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| format!("bad count in '{s}'"))?;
        if count == 0 {
            return Err(format!("range '{s}' needs a positive count"));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(format!("range '{s}' has non-finite bounds"));
        }
        Ok(Self { start, stop, count })
    }
}
