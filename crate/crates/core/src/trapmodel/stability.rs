use rayon::prelude::*;
use serde::Serialize;

use super::{mathieu_parameters, q_from_frequencies, secular_frequencies, IonSpecies, TrapModel};
use crate::{Real, ScanRange};

/// Upper bound on q for which the lowest stability region is treated as usable.
pub const Q_STABILITY_LIMIT: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub v_rf: f64,
    pub v_dc: f64,
    pub q: f64,
    pub stable: bool,
}

/// Row-major grid of stability points: `points[i_dc * n_rf + i_rf]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityMap {
    pub v_rf: Vec<f64>,
    pub v_dc: Vec<f64>,
    pub points: Vec<StabilityPoint>,
}

impl StabilityMap {
    pub fn get(&self, i_rf: usize, i_dc: usize) -> &StabilityPoint {
        &self.points[i_dc * self.v_rf.len() + i_rf]
    }

    /// CSV with header `v_rf,v_dc,q,stable`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v_rf,v_dc,q,stable\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{:.6},{}\n", p.v_rf, p.v_dc, p.q, p.stable));
        }
        out
    }
}

/// Evaluates q and the stability flag over a grid of RF and DC voltages.
///
/// Where the lowest-order secular frequencies exist, q follows from them; in
/// unstable points the Mathieu |q_x| is reported instead.
pub fn stability_map<T: Real>(
    template: &TrapModel<T>,
    species: &IonSpecies<T>,
    v_rf: &ScanRange,
    v_dc: &ScanRange,
) -> StabilityMap {
    let rf = v_rf.values();
    let dc = v_dc.values();
    let cells: Vec<(f64, f64)> = dc.iter().flat_map(|&d| rf.iter().map(move |&r| (r, d))).collect();
    let points = cells
        .par_iter()
        .map(|&(r, d)| evaluate(template, species, r, d))
        .collect();
    StabilityMap {
        v_rf: rf,
        v_dc: dc,
        points,
    }
}

fn evaluate<T: Real>(template: &TrapModel<T>, species: &IonSpecies<T>, v_rf: f64, v_dc: f64) -> StabilityPoint {
    let model = template.with_voltages(T::lit(v_rf), T::lit(v_dc));
    let p = mathieu_parameters(&model, species);
    let limit = T::lit(Q_STABILITY_LIMIT);
    let all_confined = p.beta_squared().iter().all(|b| *b > T::zero());
    let q = match secular_frequencies(&model, species) {
        Ok(w) => q_from_frequencies(w[0], w[2], model.drive.omega_rf).unwrap_or(p.q_x.abs()),
        Err(_) => p.q_x.abs(),
    };
    let stable = q > T::zero() && q < limit && all_confined && p.q().iter().all(|qi| qi.abs() < limit);
    StabilityPoint {
        v_rf,
        v_dc,
        q: q.as_f64(),
        stable,
    }
}
