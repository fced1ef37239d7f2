//! Uniform 1-D mesh on `[0, L]` with trapezoid quadrature and a Neumann
//! Laplacian.
//!
//! Nodes sit on cell edges, `x_i = i h` for `i = 0..=n`. The Laplacian uses
//! the reflected ghost node `u_{-1} = u_1` (and `u_{n+1} = u_{n-1}`), which
//! makes `W L` symmetric for the trapezoid weight matrix `W`. Consequently
//! `<L u, 1>_w = 0` holds exactly, and the mass of conserved models is
//! preserved to round-off by any scheme built on these two pieces.

use crate::error::{Error, Result};

/// Minimum number of cells accepted by [`Grid::new`].
pub const MIN_CELLS: usize = 4;

/// Identity of a grid, carried by every [`Field`] so mismatched data is
/// caught before it reaches a solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    pub n_cells: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: GridShape,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::validation(format!(
                "grid needs at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::validation(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        let h = length / n_cells as f64;
        let nodes: Vec<f64> = (0..=n_cells)
            .map(|i| {
                if i == n_cells {
                    length
                } else {
                    i as f64 * h
                }
            })
            .collect();
        let mut weights = vec![h; n_cells + 1];
        weights[0] = 0.5 * h;
        weights[n_cells] = 0.5 * h;
        Ok(Grid {
            shape: GridShape { n_cells, length },
            h,
            nodes,
            weights,
        })
    }

    /// Unit interval with `n_cells` cells.
    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(n_cells, 1.0)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn n_cells(&self) -> usize {
        self.shape.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.shape.n_cells + 1
    }

    pub fn length(&self) -> f64 {
        self.shape.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        Field::new(self, values)
    }

    pub fn constant(&self, c: f64) -> Field {
        Field {
            shape: self.shape,
            values: vec![c; self.n_nodes()],
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            shape: self.shape,
            values: self.nodes.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.shape != self.shape {
            return Err(Error::validation(format!(
                "field bound to grid {:?} used with grid {:?}",
                f.shape, self.shape
            )));
        }
        Ok(())
    }

    /// Trapezoid rule; exact for affine nodal data.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_slice(&f.values))
    }

    pub(crate) fn integrate_slice(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.weights.len());
        v.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Weighted inner product `<u, v>_w`.
    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.inner_slice(&u.values, &v.values))
    }

    pub(crate) fn inner_slice(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn laplacian(&self) -> NeumannLaplacian {
        NeumannLaplacian {
            shape: self.shape,
            inv_h2: 1.0 / (self.h * self.h),
        }
    }

    /// Measure of the node set where `pred` holds, via the quadrature weights.
    pub fn measure_where(&self, f: &Field, pred: impl Fn(f64) -> bool) -> f64 {
        f.values
            .iter()
            .zip(&self.weights)
            .filter(|(v, _)| pred(**v))
            .map(|(_, w)| w)
            .sum()
    }
}

/// Nodal samples of a function bound to a specific grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: GridShape,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::validation(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite field value {} at node {i}",
                values[i]
            )));
        }
        Ok(Field {
            shape: grid.shape(),
            values,
        })
    }

    pub(crate) fn from_raw(shape: GridShape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.n_cells + 1);
        Field { shape, values }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.shape != other.shape {
            return Err(Error::validation("pointwise operation on fields from different grids"));
        }
        Ok(Field {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `max |self - other|`.
    pub fn dist_inf(&self, other: &Field) -> Result<f64> {
        Ok(self.zip_map(other, |a, b| a - b)?.norm_inf())
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Second-order Neumann Laplacian on a [`Grid`] (ghost-node reflection).
#[derive(Debug, Clone, Copy)]
pub struct NeumannLaplacian {
    shape: GridShape,
    inv_h2: f64,
}

impl NeumannLaplacian {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Coefficients `(lower, diag, upper)` of row `i`: `(Lu)_i = lower u_{i-1}
    /// + diag u_i + upper u_{i+1}`. Out-of-range neighbours have coefficient 0.
    pub fn row(&self, i: usize) -> (f64, f64, f64) {
        let n = self.shape.n_cells;
        let c = self.inv_h2;
        if i == 0 {
            (0.0, -2.0 * c, 2.0 * c)
        } else if i == n {
            (2.0 * c, -2.0 * c, 0.0)
        } else {
            (c, -2.0 * c, c)
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        if u.shape != self.shape {
            return Err(Error::validation("Laplacian applied to a field from another grid"));
        }
        let mut out = vec![0.0; u.len()];
        self.apply_slice(&u.values, &mut out);
        Ok(Field::from_raw(self.shape, out))
    }

    pub(crate) fn apply_slice(&self, u: &[f64], out: &mut [f64]) {
        let n = self.shape.n_cells;
        let c = self.inv_h2;
        out[0] = 2.0 * c * (u[1] - u[0]);
        for i in 1..n {
            out[i] = c * ((u[i - 1] - u[i]) + (u[i + 1] - u[i]));
        }
        out[n] = 2.0 * c * (u[n - 1] - u[n]);
    }

    /// Symmetric stiffness matrix `K = -W L` as `(diag, off)`, where
    /// `off[i]` couples nodes `i` and `i + 1`.
    pub fn stiffness(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let n = self.shape.n_cells;
        let w = grid.weights();
        let diag = (0..=n).map(|i| -w[i] * self.row(i).1).collect();
        let off = (0..n).map(|i| -w[i] * self.row(i).2).collect();
        (diag, off)
    }
}
