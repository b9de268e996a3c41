use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product partition of a rectangle `[0, b_1] × … × [0, b_N]`.
///
/// Nodes are stored row-major with the last axis fastest; cells likewise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("need at least one axis".into()));
        }
        for (k, ax) in axes.iter().enumerate() {
            if ax.len() < 2 {
                return Err(Error::InvalidGrid(format!("axis {k} has fewer than two nodes")));
            }
            if ax[0] != 0.0 {
                return Err(Error::InvalidGrid(format!("axis {k} must start at 0, starts at {}", ax[0])));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {k} is not strictly increasing")));
            }
        }
        Ok(Grid { axes })
    }

    /// `cells` equal cells of `[0, extent]` on each of `n_params` axes.
    pub fn uniform(n_params: usize, extent: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(extent > 0.0) {
            return Err(Error::InvalidGrid("uniform grid needs cells > 0 and extent > 0".into()));
        }
        let ax: Vec<f64> = (0..=cells).map(|i| extent * i as f64 / cells as f64).collect();
        Self::new(vec![ax; n_params])
    }

    /// Axes with `lead` equal cells on `[0, a]` followed by `cells` equal
    /// cells on the window `[a, b]`.
    pub fn windowed(n_params: usize, a: f64, b: f64, cells: usize, lead: usize) -> Result<Self> {
        if !(0.0 < a && a < b) || cells == 0 || lead == 0 {
            return Err(Error::InvalidGrid(format!("bad windowed grid a={a}, b={b}, cells={cells}, lead={lead}")));
        }
        let mut ax: Vec<f64> = (0..lead).map(|i| a * i as f64 / lead as f64).collect();
        ax.extend((0..=cells).map(|i| a + (b - a) * i as f64 / cells as f64));
        Self::new(vec![ax; n_params])
    }

    pub fn n_params(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn cell_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len() - 1).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.len() - 1).product()
    }

    /// Flat index of a node multi-index.
    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[k].len() + i;
        }
        flat
    }

    /// Flat index of a cell multi-index.
    pub fn cell_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            flat = flat * (self.axes[k].len() - 1) + i;
        }
        flat
    }

    /// Multi-index of a flat index in an array of the given shape.
    pub fn unflatten(shape: &[usize], mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    }

    pub fn node_coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(k, &i)| self.axes[k][i]).collect()
    }

    pub fn cell_volume(&self, idx: &[usize]) -> f64 {
        idx.iter().enumerate().map(|(k, &i)| self.axes[k][i + 1] - self.axes[k][i]).product()
    }

    /// Position of `t` on axis `k`, if it is a node (within 1e-12 relative).
    pub fn locate(&self, k: usize, t: f64) -> Option<usize> {
        let ax = &self.axes[k];
        let tol = 1e-12 * ax[ax.len() - 1];
        ax.iter().position(|&v| (v - t).abs() <= tol)
    }

    /// Node indices on axis `k` lying in `[a, b]`.
    pub fn nodes_in(&self, k: usize, a: f64, b: f64) -> std::ops::Range<usize> {
        let ax = &self.axes[k];
        let tol = 1e-12 * ax[ax.len() - 1];
        let lo = ax.iter().position(|&v| v >= a - tol).unwrap_or(ax.len());
        let hi = ax.iter().rposition(|&v| v <= b + tol).map_or(0, |i| i + 1);
        lo..hi.max(lo)
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|a| format!("{} nodes on [0,{}]", a.len(), a[a.len() - 1]))
            .collect();
        parts.join(" x ")
    }
}

/// Sample of a d-dimensional field on the nodes of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPath {
    pub grid: Grid,
    pub dim: usize,
    /// `dim` values per node.
    pub values: Vec<f64>,
    /// `dim` noise increments per cell, when the path was driven by a sheet.
    pub increments: Option<Vec<f64>>,
}

impl FieldPath {
    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn value_at(&self, idx: &[usize]) -> &[f64] {
        self.value(self.grid.node_index(idx))
    }

    pub fn increment(&self, cell: usize) -> Option<&[f64]> {
        self.increments.as_ref().map(|inc| &inc[cell * self.dim..(cell + 1) * self.dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Grid::new(vec![vec![0.0, 1.0, 1.0]]).is_err());
        assert!(Grid::new(vec![vec![0.1, 1.0]]).is_err());
        assert!(Grid::new(vec![vec![0.0]]).is_err());
        assert!(Grid::new(vec![]).is_err());
    }

    #[test]
    fn indexing_roundtrip() {
        let g = Grid::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 1.0, 1.5]]).unwrap();
        assert_eq!(g.n_nodes(), 12);
        assert_eq!(g.n_cells(), 6);
        for f in 0..12 {
            let idx = Grid::unflatten(&g.shape(), f);
            assert_eq!(g.node_index(&idx), f);
        }
        assert_eq!(g.cell_volume(&[1, 2]), 0.5);
        assert_eq!(g.nodes_in(1, 0.5, 1.0), 1..3);
        assert_eq!(g.locate(1, 1.5), Some(3));
        assert_eq!(g.locate(1, 1.25), None);
    }

    #[test]
    fn windowed_layout() {
        let g = Grid::windowed(2, 1.0, 2.0, 4, 2).unwrap();
        assert_eq!(g.axis(0), &[0.0, 0.5, 1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(g.nodes_in(0, 1.0, 2.0), 2..7);
    }
}
