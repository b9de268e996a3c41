use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernels::RieszKernel;

/// Symmetric matrix accessed by entries and columns.
pub trait EnergyOperator {
    fn len(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
    fn column(&self, j: usize, out: &mut [f64]);
}

/// Dense symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n || n == 0 {
            return Err(Error::InvalidArgument(format!("{} entries do not form a {n}x{n} matrix", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricMatrix { n, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(rows.len(), rows.iter().flat_map(|r| r.iter().copied()).collect())
    }
}

impl EnergyOperator for SymmetricMatrix {
    fn len(&self) -> usize {
        self.n
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = self.data[i * self.n + j];
        }
    }
}

/// Kernel matrix of a point cloud with a fixed diagonal, computed on demand.
pub struct KernelMatrix<'a> {
    kernel: RieszKernel,
    dim: usize,
    points: &'a [f64],
    diagonal: f64,
}

impl<'a> KernelMatrix<'a> {
    pub fn new(kernel: RieszKernel, points: &'a [f64], diagonal: f64) -> Result<Self> {
        let dim = kernel.dim();
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidArgument("points do not match the kernel dimension".into()));
        }
        if !diagonal.is_finite() {
            return Err(Error::InvalidArgument("diagonal must be finite".into()));
        }
        Ok(KernelMatrix { kernel, dim, points, diagonal })
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

impl EnergyOperator for KernelMatrix<'_> {
    fn len(&self) -> usize {
        self.points.len() / self.dim
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal;
        }
        let r2: f64 = self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        self.kernel.eval_sq(r2)
    }
    fn column(&self, j: usize, out: &mut [f64]) {
        let pj = self.point(j);
        for (i, (o, pi)) in out.iter_mut().zip(self.points.chunks_exact(self.dim)).enumerate() {
            *o = if i == j {
                self.diagonal
            } else {
                let r2: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
                self.kernel.eval_sq(r2)
            };
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolverOptions {
    /// Stop when the duality gap is at most `tol * energy`.
    pub tol: f64,
    pub max_iter: usize,
    /// Memory budget for cached kernel columns, in bytes.
    pub cache_bytes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, max_iter: 5_000_000, cache_bytes: 1 << 30 }
    }
}

/// Minimizer of `wᵀKw` over the probability simplex.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnergyMinimum {
    pub energy: f64,
    pub weights: Vec<f64>,
    /// `wᵀKw − min_i (Kw)_i`, recomputed exactly at the returned iterate.
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct ColumnCache {
    n: usize,
    max_cols: usize,
    cols: HashMap<usize, Vec<f64>>,
    scratch: Vec<f64>,
}

impl ColumnCache {
    fn new(n: usize, bytes: usize) -> Self {
        ColumnCache { n, max_cols: bytes / (8 * n).max(1), cols: HashMap::new(), scratch: vec![0.0; n] }
    }

    // Calls `f` with column j; cached when there is room.
    fn with<K: EnergyOperator + ?Sized, R>(&mut self, k: &K, j: usize, f: impl FnOnce(&[f64]) -> R) -> R {
        if let Some(c) = self.cols.get(&j) {
            return f(c);
        }
        if self.cols.len() < self.max_cols {
            let mut c = vec![0.0; self.n];
            k.column(j, &mut c);
            let r = f(&c);
            self.cols.insert(j, c);
            r
        } else {
            k.column(j, &mut self.scratch);
            f(&self.scratch)
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Pairwise Frank–Wolfe with exact line search.
///
/// The gradient `Kw` is updated incrementally with two columns per step and
/// recomputed from scratch whenever the incremental gap claims convergence,
/// so the returned gap is exact up to rounding.
pub fn minimize_energy<K: EnergyOperator + ?Sized>(k: &K, opts: &SolverOptions) -> Result<EnergyMinimum> {
    let n = k.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let diag: Vec<f64> = (0..n).map(|i| k.entry(i, i)).collect();
    let start = argmin(&diag);
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let mut active = vec![start];
    let mut cache = ColumnCache::new(n, opts.cache_bytes);
    let mut g = vec![0.0; n];
    k.column(start, &mut g);
    let mut energy = diag[start];
    let mut iterations = 0;

    let recompute = |w: &[f64], active: &[usize], cache: &mut ColumnCache, g: &mut Vec<f64>| -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        for &i in active {
            let wi = w[i];
            cache.with(k, i, |c| {
                for (gv, cv) in g.iter_mut().zip(c) {
                    *gv += wi * cv;
                }
            });
        }
        active.iter().map(|&i| w[i] * g[i]).sum()
    };

    let mut converged = false;
    while iterations < opts.max_iter {
        let s = argmin(&g);
        let gap = energy - g[s];
        if gap <= opts.tol * energy.abs() {
            energy = recompute(&w, &active, &mut cache, &mut g);
            let s = argmin(&g);
            if energy - g[s] <= opts.tol * energy.abs() {
                converged = true;
                break;
            }
            continue;
        }
        let mut a = active[0];
        for &i in &active {
            if g[i] > g[a] {
                a = i;
            }
        }
        let slope = g[s] - g[a];
        let curv = diag[s] + diag[a] - 2.0 * k.entry(s, a);
        let gmax = w[a];
        let gamma = if curv > 0.0 { (-slope / curv).min(gmax) } else { gmax };
        if gamma <= 0.0 {
            // no progress possible along this pair; only rounding can cause this
            energy = recompute(&w, &active, &mut cache, &mut g);
            iterations += 1;
            continue;
        }
        cache.with(k, s, |c| {
            for (gv, cv) in g.iter_mut().zip(c) {
                *gv += gamma * cv;
            }
        });
        cache.with(k, a, |c| {
            for (gv, cv) in g.iter_mut().zip(c) {
                *gv -= gamma * cv;
            }
        });
        if w[s] == 0.0 {
            active.push(s);
        }
        w[s] += gamma;
        if gamma >= gmax {
            w[a] = 0.0;
            active.retain(|&i| i != a);
        } else {
            w[a] -= gamma;
        }
        energy += 2.0 * gamma * slope + gamma * gamma * curv;
        iterations += 1;
        if iterations % 4096 == 0 {
            energy = recompute(&w, &active, &mut cache, &mut g);
        }
    }

    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let energy = recompute(&w, &active, &mut cache, &mut g);
    let duality_gap = (energy - g[argmin(&g)]).max(0.0);
    if energy.is_nan() {
        return Err(Error::NaN("energy minimization".into()));
    }
    Ok(EnergyMinimum { energy, weights: w, duality_gap, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(rows: &[&[f64]]) -> EnergyMinimum {
        let m = SymmetricMatrix::from_rows(rows).unwrap();
        minimize_energy(&m, &SolverOptions { tol: 1e-12, ..Default::default() }).unwrap()
    }

    #[test]
    fn two_by_two_examples() {
        let r = solve(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((r.energy - 1.5).abs() < 1e-10);
        assert!((r.weights[0] - 0.5).abs() < 1e-6);
        let r = solve(&[&[1.0, 0.0], &[0.0, 3.0]]);
        assert!((r.energy - 0.75).abs() < 1e-10);
        assert!((r.weights[0] - 0.75).abs() < 1e-6);
        let r = solve(&[&[1.0, 5.0], &[5.0, 1.0]]);
        assert!((r.energy - 1.0).abs() < 1e-12);
        assert!(r.weights.contains(&1.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SymmetricMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).is_err());
        assert!(SymmetricMatrix::from_rows(&[&[f64::INFINITY]]).is_err());
    }

    #[test]
    fn flags_iteration_limit() {
        let m = SymmetricMatrix::from_rows(&[&[2.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 4.0]]).unwrap();
        let r = minimize_energy(&m, &SolverOptions { tol: 1e-14, max_iter: 1, ..Default::default() }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }
}
