//! Capacity of compact sets by energy minimization over atomic measures.

mod set;
mod solver;

pub use set::{discretize, CompactSet, Primitive};
pub use solver::{minimize_energy, EnergyMinimum, EnergyOperator, KernelMatrix, SolverOptions, SymmetricMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DiscreteMeasure, RieszKernel};

/// Outcome at one resolution.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolutionValue {
    pub resolution: usize,
    pub points: usize,
    pub cell_size: f64,
    pub value: f64,
    pub energy: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CapacityResult {
    pub value: f64,
    pub energy: f64,
    /// `None` when no minimization was needed (β < 0, or a single point).
    pub equilibrium: Option<DiscreteMeasure>,
    pub duality_gap: f64,
    pub resolution: usize,
    pub iterations: usize,
    pub converged: bool,
    pub per_resolution: Vec<ResolutionValue>,
}

/// Capacity of `set` at each resolution; the result describes the finest one.
pub fn capacity_of(set: &CompactSet, kernel: &RieszKernel, resolutions: &[usize], tol: f64) -> Result<CapacityResult> {
    capacity_with(set, kernel, resolutions, &SolverOptions { tol, ..Default::default() })
}

pub fn capacity_with(
    set: &CompactSet,
    kernel: &RieszKernel,
    resolutions: &[usize],
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    if resolutions.is_empty() {
        return Err(Error::InvalidArgument("no resolutions given".into()));
    }
    if resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("resolutions must be increasing".into()));
    }
    if set.dim() != kernel.dim() {
        return Err(Error::InvalidArgument(format!(
            "set lives in dimension {} but the kernel in {}",
            set.dim(),
            kernel.dim()
        )));
    }
    let beta = kernel.beta();
    let finest = *resolutions.last().unwrap();
    let trivial = |value: f64, energy: f64| CapacityResult {
        value,
        energy,
        equilibrium: None,
        duality_gap: 0.0,
        resolution: finest,
        iterations: 0,
        converged: true,
        per_resolution: Vec::new(),
    };
    if beta < 0.0 {
        return Ok(trivial(1.0, 1.0));
    }
    if beta == 0.0 && set.max_norm() > kernel.log_scale() {
        return Err(Error::InvalidSet(format!(
            "log-kernel capacity needs the set inside the ball of radius M = {}; it reaches {}",
            kernel.log_scale(),
            set.max_norm()
        )));
    }
    let (lo, hi) = set.bounding_box();
    if lo == hi {
        return Ok(trivial(0.0, f64::INFINITY));
    }

    let mut per_resolution = Vec::with_capacity(resolutions.len());
    let mut last = None;
    for &res in resolutions {
        let (points, h) = discretize(set, res)?;
        let diag = kernel.self_energy(h);
        let op = KernelMatrix::new(*kernel, &points, diag)?;
        let m = minimize_energy(&op, opts)?;
        per_resolution.push(ResolutionValue {
            resolution: res,
            points: op.len(),
            cell_size: h,
            value: 1.0 / m.energy,
            energy: m.energy,
            duality_gap: m.duality_gap,
            iterations: m.iterations,
            converged: m.converged,
        });
        last = Some((points, h, m));
    }
    let (points, h, m) = last.unwrap();
    let equilibrium = DiscreteMeasure::new(set.dim(), points, m.weights, h)?;
    Ok(CapacityResult {
        value: 1.0 / m.energy,
        energy: m.energy,
        equilibrium: Some(equilibrium),
        duality_gap: m.duality_gap,
        resolution: finest,
        iterations: m.iterations,
        converged: m.converged,
        per_resolution,
    })
}
