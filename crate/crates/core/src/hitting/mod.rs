//! Hitting of compact sets by simulated paths over a parameter window.

mod refine;
mod source;

pub use refine::{min_distance, RefineConfig, SearchStats};
pub use source::{AffineForm, PathSampler, Source};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::CompactSet;
use crate::error::{invalid, Error, Result};
use crate::fields::refine::SheetRefiner;
use crate::fields::{FieldPath, Grid};
use crate::rng;
use crate::stats::{linear_fit, wilson, Z95};

/// The cube `[a, b]^N` of parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub a: f64,
    pub b: f64,
}

impl Window {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < b && b.is_finite()) {
            return invalid(format!("window [{a}, {b}] must satisfy 0 < a < b"));
        }
        Ok(Window { a, b })
    }

    /// Node ranges of the window on every axis; errors if it leaves the grid.
    pub fn node_ranges(&self, grid: &Grid) -> Result<Vec<std::ops::Range<usize>>> {
        let mut out = Vec::new();
        for k in 0..grid.n_params() {
            let ax = grid.axis(k);
            if self.b > ax[ax.len() - 1] * (1.0 + 1e-12) {
                return Err(Error::InvalidGrid(format!(
                    "window [{}, {}] extends past axis {k}, which ends at {}",
                    self.a,
                    self.b,
                    ax[ax.len() - 1]
                )));
            }
            let r = grid.nodes_in(k, self.a, self.b);
            if r.is_empty() {
                return Err(Error::InvalidGrid(format!("no grid nodes inside the window on axis {k}")));
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Largest diameter of a grid cell inside the window.
    pub fn max_cell_diameter(&self, grid: &Grid) -> Result<f64> {
        let ranges = self.node_ranges(grid)?;
        let mut sq = 0.0;
        for (k, r) in ranges.iter().enumerate() {
            let ax = grid.axis(k);
            let widest = (r.start..r.end.saturating_sub(1)).map(|i| ax[i + 1] - ax[i]).fold(0.0, f64::max);
            sq += widest * widest;
        }
        Ok(f64::sqrt(sq))
    }
}

fn for_window_nodes(path: &FieldPath, ranges: &[std::ops::Range<usize>], mut f: impl FnMut(&[f64])) {
    let n = ranges.len();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
    loop {
        f(path.value_at(&idx));
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < ranges[k].end {
                break;
            }
            idx[k] = ranges[k].start;
        }
    }
}

/// Smallest distance from the window's node values to the set.
pub fn grid_distance(path: &FieldPath, set: &CompactSet, window: &Window) -> Result<f64> {
    let ranges = window.node_ranges(&path.grid)?;
    if set.dim() != path.dim {
        return invalid("set and path dimensions differ");
    }
    let mut best = f64::INFINITY;
    for_window_nodes(path, &ranges, |x| best = best.min(set.distance(x)));
    Ok(best)
}

/// Whether some window node lies within `margin` of the set.
pub fn hits(path: &FieldPath, set: &CompactSet, window: &Window, margin: f64) -> Result<bool> {
    if !(margin >= 0.0) {
        return invalid("margin must be nonnegative");
    }
    Ok(grid_distance(path, set, window)? <= margin)
}

/// How a path is judged to hit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HitRule {
    /// Some window node within `margin` of the set.
    Grid { margin: f64 },
    /// Continuous-parameter search between nodes; needs a source affine in the sheet.
    Refined(RefineConfig),
}

impl HitRule {
    pub fn describe(&self) -> String {
        match self {
            HitRule::Grid { margin } => format!("grid nodes, margin {margin}"),
            HitRule::Refined(c) => format!(
                "refined, z={}, rel_tol={}, abs_tol={}, max_depth={}",
                c.z, c.rel_tol, c.abs_tol, c.max_depth
            ),
        }
    }

    fn margin(&self) -> f64 {
        match self {
            HitRule::Grid { margin } => *margin,
            HitRule::Refined(c) => c.abs_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitProbEstimate {
    pub p_hat: f64,
    pub n_paths: u64,
    pub hits: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub margin: f64,
    pub rule: String,
    pub grid: String,
}

impl HitProbEstimate {
    pub fn from_counts(hits: u64, n_paths: u64, margin: f64, rule: String, grid: String) -> Self {
        let (ci_low, ci_high) = wilson(hits, n_paths, Z95);
        HitProbEstimate { p_hat: hits as f64 / n_paths as f64, n_paths, hits, ci_low, ci_high, margin, rule, grid }
    }
}

/// Per-path refinement key.
fn path_key(seed: u64, index: u64) -> u64 {
    rng::hash_words(seed, &[0x5eed, index])
}

/// Distances of path `index` to each target under `rule`.
///
/// Refinement stops once a distance drops to `stop_below` and does not
/// resolve values above `ignore_above`.
#[allow(clippy::too_many_arguments)]
fn path_distances(
    sampler: &PathSampler,
    form: Option<&AffineForm>,
    window: &Window,
    rule: &HitRule,
    targets: &[CompactSet],
    stop_below: f64,
    ignore_above: f64,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    match rule {
        HitRule::Grid { .. } => {
            let path = sampler.sample(seed, index)?;
            let ranges = window.node_ranges(&path.grid)?;
            let mut best = vec![f64::INFINITY; targets.len()];
            for_window_nodes(&path, &ranges, |x| {
                for (b, t) in best.iter_mut().zip(targets) {
                    *b = b.min(t.distance(x));
                }
            });
            Ok(best)
        }
        HitRule::Refined(cfg) => {
            let form = form.expect("checked by caller");
            let sheet = sampler.sample_sheet(seed, index);
            let mut refiner = SheetRefiner::new(sampler.grid(), sampler.dim(), &sheet, path_key(seed, index));
            Ok(targets
                .iter()
                .map(|target| {
                    min_distance(
                        &mut refiner,
                        sampler.grid(),
                        &sheet,
                        form,
                        (window.a, window.b),
                        target,
                        stop_below,
                        ignore_above,
                        cfg,
                    )
                    .0
                })
                .collect())
        }
    }
}

fn check_rule(sampler: &PathSampler, window: &Window, rule: &HitRule) -> Result<Option<AffineForm>> {
    window.node_ranges(sampler.grid())?;
    match rule {
        HitRule::Grid { margin } if !(*margin >= 0.0) => invalid("margin must be nonnegative"),
        HitRule::Grid { .. } => Ok(None),
        HitRule::Refined(_) => match sampler.affine_form() {
            Some(f) => Ok(Some(f)),
            None => invalid(
                "refined hitting needs a Brownian sheet or an SPDE with constant diffusion and constant drift on a 2-parameter grid",
            ),
        },
    }
}

/// Fraction of `n_paths` paths that hit `set` inside the window.
pub fn estimate_hit_prob(
    sampler: &PathSampler,
    set: &CompactSet,
    window: &Window,
    n_paths: u64,
    rule: &HitRule,
    seed: u64,
) -> Result<HitProbEstimate> {
    Ok(estimate_hit_probs(sampler, std::slice::from_ref(set), window, n_paths, rule, seed)?.remove(0))
}

/// Hit fractions of several sets, all from the same paths.
pub fn estimate_hit_probs(
    sampler: &PathSampler,
    sets: &[CompactSet],
    window: &Window,
    n_paths: u64,
    rule: &HitRule,
    seed: u64,
) -> Result<Vec<HitProbEstimate>> {
    if n_paths == 0 {
        return invalid("n_paths must be positive");
    }
    if sets.iter().any(|s| s.dim() != sampler.dim()) {
        return invalid("set and source dimensions differ");
    }
    let form = check_rule(sampler, window, rule)?;
    let threshold = rule.margin();
    let counts = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            path_distances(sampler, form.as_ref(), window, rule, sets, threshold, threshold, seed, i)
                .map(|ds| ds.iter().map(|&dd| u64::from(dd <= threshold)).collect::<Vec<u64>>())
        })
        .try_reduce(
            || vec![0; sets.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts
        .into_iter()
        .map(|hits| HitProbEstimate::from_counts(hits, n_paths, threshold, rule.describe(), sampler.grid().describe()))
        .collect())
}

/// Margin used when a grid rule stands in for continuous hitting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginPolicy {
    Fixed { margin: f64 },
    /// `κ · (cell diameter)^{1/2 − η}`.
    Modulus { kappa: f64, eta: f64 },
    /// No margin; paths are refined between nodes.
    Refined(RefineConfig),
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy::Modulus { kappa: 3.0, eta: 0.1 }
    }
}

impl MarginPolicy {
    pub fn rule(&self, grid: &Grid, window: &Window) -> Result<HitRule> {
        Ok(match self {
            MarginPolicy::Fixed { margin } => HitRule::Grid { margin: *margin },
            MarginPolicy::Modulus { kappa, eta } => {
                HitRule::Grid { margin: kappa * window.max_cell_diameter(grid)?.powf(0.5 - eta) }
            }
            MarginPolicy::Refined(cfg) => HitRule::Refined(*cfg),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub estimates: Vec<HitProbEstimate>,
    pub retained: Vec<bool>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// Fewer than three radii were retained.
    pub insufficient: bool,
    pub rule: String,
    pub n_paths: u64,
}

/// Hit probabilities of balls `B(center, r)` over `radii`, all from the same
/// paths, and the log-log slope over radii with `20/n ≤ p ≤ 1 − 20/n`.
pub fn scaling_experiment(
    sampler: &PathSampler,
    center: &[f64],
    radii: &[f64],
    window: &Window,
    n_paths: u64,
    policy: &MarginPolicy,
    seed: u64,
) -> Result<ScalingReport> {
    if n_paths == 0 {
        return invalid("n_paths must be positive");
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("radii must be positive and increasing");
    }
    if center.len() != sampler.dim() {
        return invalid("center has the wrong dimension");
    }
    let rule = policy.rule(sampler.grid(), window)?;
    let form = check_rule(sampler, window, &rule)?;
    let margin = rule.margin();
    let (r_min, r_max) = (radii[0], radii[radii.len() - 1]);
    let target = CompactSet::point(center.to_vec())?;
    let (stop, ignore) = match rule {
        HitRule::Grid { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        HitRule::Refined(_) => (r_min, r_max),
    };
    let targets = [target];
    let dists: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| path_distances(sampler, form.as_ref(), window, &rule, &targets, stop, ignore, seed, i).map(|v| v[0]))
        .collect::<Result<_>>()?;
    let slack = match rule {
        HitRule::Grid { margin } => margin,
        HitRule::Refined(_) => 0.0,
    };
    let n = n_paths as f64;
    let mut estimates = Vec::new();
    let mut retained = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &r in radii {
        let hits = dists.iter().filter(|&&dd| dd <= r + slack).count() as u64;
        let e = HitProbEstimate::from_counts(hits, n_paths, margin, rule.describe(), sampler.grid().describe());
        let keep = e.p_hat >= 20.0 / n && e.p_hat <= 1.0 - 20.0 / n;
        if keep {
            xs.push(r.ln());
            ys.push(e.p_hat.ln());
        }
        retained.push(keep);
        estimates.push(e);
    }
    let fit = if xs.len() >= 2 { linear_fit(&xs, &ys) } else { None };
    Ok(ScalingReport {
        center: center.to_vec(),
        radii: radii.to_vec(),
        estimates,
        retained,
        slope: fit.map_or(f64::NAN, |f| f.slope),
        slope_stderr: fit.map_or(f64::NAN, |f| f.slope_std_err),
        intercept: fit.map_or(f64::NAN, |f| f.intercept),
        insufficient: xs.len() < 3,
        rule: rule.describe(),
        n_paths,
    })
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp()).collect()
}
