//! Periodic cell-centered and edge-centered grid functions on a square domain.
//!
//! Storage is row-major with the x index outermost: the value at cell `(i, j)`
//! lives at `i * n + j`. Edge fields store `(i + 1/2, j)` (x-edges) and
//! `(i, j + 1/2)` (y-edges) at index `(i, j)`.

mod ops;
mod spectral;

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub use ops::{
    cell_average_of_edges, div, edge_average, edge_inner, grad, grad_norm_sq, inner, laplacian,
    norm, weighted_div_grad, NormKind,
};
pub use spectral::{hminus1_norm, inv_neg_laplacian, Spectral};

use crate::error::{Error, Result};

/// Square periodic domain `(0, L)^2` split into `N x N` cells of side `h = L / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_cells: usize,
    length: f64,
    spacing: f64,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 4;

    pub fn new(n_cells: usize, length: f64) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "n_cells = {n_cells} is below the minimum of {}",
                Self::MIN_CELLS
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length = {length} must be positive")));
        }
        Ok(GridSpec {
            n_cells,
            length,
            spacing: length / n_cells as f64,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Mesh size `h`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `|Omega| = L^2`.
    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Weight `h^2` of the cell inner product.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Number of cells, `N^2`.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n_cells * self.n_cells
    }

    /// Coordinate of the center of cell `i` along either axis.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing
    }

    /// Grid with twice as many cells on the same domain.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n_cells: 2 * self.n_cells,
            length: self.length,
            spacing: self.length / (2 * self.n_cells) as f64,
        }
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.n_cells,
                left_len: self.length,
                right: other.n_cells,
                right_len: other.length,
            })
        }
    }

    /// Periodic neighbor tables `(i + 1) mod N` and `(i - 1) mod N`.
    pub(crate) fn neighbors(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.n_cells;
        let plus = (0..n).map(|i| (i + 1) % n).collect();
        let minus = (0..n).map(|i| (i + n - 1) % n).collect();
        (plus, minus)
    }
}

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Cell-centered periodic grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        CellField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at the cell centers.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            let x = grid.center(i);
            for j in 0..n {
                values.push(f(x, grid.center(j)));
            }
        }
        CellField { grid, values }
    }

    /// Builds a field from `(i, j)` index values.
    pub fn from_index_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        CellField { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.n(),
                grid.n(),
                values.len()
            )));
        }
        Ok(CellField { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a possibly out-of-range index, wrapped periodically.
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n();
        self.values[wrap(i, n) * n + wrap(j, n)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Grid average `h^2 / |Omega| * sum`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> CellField {
        assert_eq!(self.grid, other.grid, "zip_map on fields of different grids");
        CellField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &CellField) {
        assert_eq!(self.grid, x.grid, "axpy on fields of different grids");
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> CellField {
        self.map(|v| a * v)
    }

    /// Copy with the grid mean subtracted.
    pub fn mean_free(&self) -> CellField {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
    }

    /// First non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        let n = self.grid.n();
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite { i: k / n, j: k % n }),
            None => Ok(()),
        }
    }

    /// Swaps the roles of x and y.
    pub fn transposed(&self) -> CellField {
        let n = self.grid.n();
        CellField::from_index_fn(self.grid, |i, j| self.values[j * n + i])
    }
}

impl Index<(usize, usize)> for CellField {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.grid.n() + j]
    }
}

impl IndexMut<(usize, usize)> for CellField {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        let n = self.grid.n();
        &mut self.values[i * n + j]
    }
}

impl Add<&CellField> for &CellField {
    type Output = CellField;

    fn add(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&CellField> for &CellField {
    type Output = CellField;

    fn sub(self, rhs: &CellField) -> CellField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &CellField {
    type Output = CellField;

    fn mul(self, a: f64) -> CellField {
        self.scaled(a)
    }
}

impl Neg for &CellField {
    type Output = CellField;

    fn neg(self) -> CellField {
        self.map(|v| -v)
    }
}

/// Pair of x-edge and y-edge periodic grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFieldPair {
    grid: GridSpec,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl EdgeFieldPair {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        EdgeFieldPair {
            grid,
            x: vec![c; grid.len()],
            y: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() || y.len() != grid.len() {
            return Err(Error::SizeMismatch(format!(
                "edge components must hold {} values (got {} and {})",
                grid.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(EdgeFieldPair { grid, x, y })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Values at `(i + 1/2, j)` stored at `(i, j)`.
    #[inline]
    pub fn x_values(&self) -> &[f64] {
        &self.x
    }

    /// Values at `(i, j + 1/2)` stored at `(i, j)`.
    #[inline]
    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn x_values_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_values_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    /// x-edge value at `(i + 1/2, j)` with periodic wrap.
    pub fn x_at(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n();
        self.x[wrap(i, n) * n + wrap(j, n)]
    }

    /// y-edge value at `(i, j + 1/2)` with periodic wrap.
    pub fn y_at(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n();
        self.y[wrap(i, n) * n + wrap(j, n)]
    }

    /// Edge-wise product.
    pub fn product(&self, other: &EdgeFieldPair) -> EdgeFieldPair {
        assert_eq!(self.grid, other.grid, "edge product on different grids");
        EdgeFieldPair {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(&other.y).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> EdgeFieldPair {
        EdgeFieldPair {
            grid: self.grid,
            x: self.x.iter().map(|&v| f(v)).collect(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let n = self.grid.n();
        match self
            .x
            .iter()
            .chain(&self.y)
            .position(|v| !v.is_finite())
            .map(|k| k % self.grid.len())
        {
            Some(k) => Err(Error::NonFinite { i: k / n, j: k % n }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_matches_length() {
        let g = GridSpec::new(32, 8.0).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert!((g.spacing() * g.n() as f64 - g.length()).abs() < 1e-15);
        let g = GridSpec::new(7, 2.0 * std::f64::consts::PI).unwrap();
        assert!((g.spacing() * 7.0 - g.length()).abs() < 1e-14);
    }

    #[test]
    fn grid_rejects_small_or_degenerate() {
        assert!(GridSpec::new(3, 1.0).is_err());
        assert!(GridSpec::new(4, 0.0).is_err());
        assert!(GridSpec::new(4, f64::NAN).is_err());
        assert!(GridSpec::new(4, 1.0).is_ok());
    }

    #[test]
    fn periodic_indexing_wraps() {
        let g = GridSpec::new(4, 1.0).unwrap();
        let f = CellField::from_index_fn(g, |i, j| (10 * i + j) as f64);
        assert_eq!(f.at(4, 0), f.at(0, 0));
        assert_eq!(f.at(-1, 2), f[(3, 2)]);
        assert_eq!(f.at(1, 6), f[(1, 2)]);
    }

    #[test]
    fn from_values_checks_length() {
        let g = GridSpec::new(4, 1.0).unwrap();
        assert!(CellField::from_values(g, vec![0.0; 15]).is_err());
        assert!(EdgeFieldPair::from_values(g, vec![0.0; 16], vec![0.0; 3]).is_err());
    }

    #[test]
    fn finite_check_reports_cell() {
        let g = GridSpec::new(4, 1.0).unwrap();
        let mut f = CellField::zeros(g);
        f[(2, 3)] = f64::NAN;
        match f.check_finite() {
            Err(Error::NonFinite { i, j }) => assert_eq!((i, j), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
