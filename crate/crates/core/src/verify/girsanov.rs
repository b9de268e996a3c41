//! Drifted hitting probabilities two ways: directly, and by reweighting
//! drift-free paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::CompactSet;
use crate::error::{invalid, Result};
use crate::fields::{sheet_from_increments, sheet_increments, FieldPath, Grid};
use crate::hitting::{hits, HitProbEstimate, Window};
use crate::rng;
use crate::spde::{girsanov_weight, solve, Coefficients, Drift, WeightDirection};
use crate::stats::MeanEstimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GirsanovReport {
    /// Direct hit fraction of the drifted system.
    pub direct: HitProbEstimate,
    /// Mean of `1{hit} J^{-1}` over drift-free paths.
    pub reweighted: f64,
    pub reweighted_se: f64,
    pub difference: f64,
    pub combined_se: f64,
    /// `difference / combined_se`.
    pub z_score: f64,
    pub weight_mean: f64,
    pub weight_se: f64,
    /// `(weight_mean − 1) / weight_se`.
    pub weight_z: f64,
    pub n_paths: u64,
}

impl GirsanovReport {
    pub fn identity_holds(&self, z: f64) -> bool {
        self.difference.abs() <= z * self.combined_se
    }

    pub fn weight_ok(&self, z: f64) -> bool {
        self.weight_z.abs() <= z
    }
}

/// Same driving noise for the drifted and the drift-free system on every path.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_crosscheck(
    coeffs: &Coefficients,
    grid: &Grid,
    set: &CompactSet,
    window: &Window,
    margin: f64,
    n_paths: u64,
    seed: u64,
) -> Result<GirsanovReport> {
    if n_paths < 2 {
        return invalid("need at least two paths");
    }
    if set.dim() != coeffs.dim {
        return invalid("set and system dimensions differ");
    }
    let free = Coefficients { drift: Drift::Zero, ..coeffs.clone() };
    let ranges = window.node_ranges(grid)?;
    let t = [ranges[0].end - 1, ranges[1].end - 1];
    let d = coeffs.dim;
    let rows: Vec<(bool, f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let inc = sheet_increments(grid, d, &mut rng::path_rng(seed, i));
            let values = sheet_from_increments(grid, d, &inc);
            let noise = FieldPath { grid: grid.clone(), dim: d, values, increments: Some(inc) };
            let y = solve(coeffs, &noise)?;
            let x = solve(&free, &noise)?;
            let hit_y = hits(&y, set, window, margin)?;
            let hit_x = hits(&x, set, window, margin)?;
            let j = girsanov_weight(coeffs, &x, t, WeightDirection::J)?;
            let l = girsanov_weight(coeffs, &y, t, WeightDirection::L)?;
            Ok((hit_y, if hit_x { 1.0 / j } else { 0.0 }, l))
        })
        .collect::<Result<_>>()?;
    let direct_hits = rows.iter().filter(|r| r.0).count() as u64;
    let direct = HitProbEstimate::from_counts(
        direct_hits,
        n_paths,
        margin,
        format!("grid nodes, margin {margin}"),
        grid.describe(),
    );
    let b = MeanEstimate::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let l = MeanEstimate::from_samples(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    let p = direct.p_hat;
    let se_a = (p * (1.0 - p) / (n_paths as f64 - 1.0)).sqrt();
    let combined_se = (se_a * se_a + b.std_err * b.std_err).sqrt();
    let difference = p - b.mean;
    Ok(GirsanovReport {
        direct,
        reweighted: b.mean,
        reweighted_se: b.std_err,
        difference,
        combined_se,
        z_score: if combined_se > 0.0 { difference / combined_se } else { 0.0 },
        weight_mean: l.mean,
        weight_se: l.std_err,
        weight_z: if l.std_err > 0.0 { (l.mean - 1.0) / l.std_err } else { 0.0 },
        n_paths,
    })
}
