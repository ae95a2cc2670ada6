//! Fourier diagonalization of constant-coefficient periodic operators.
//!
//! Every discrete Fourier mode `(k, l)` is an eigenvector of `-Delta_h` with
//! eigenvalue `(4/h^2)(sin^2(pi k/N) + sin^2(pi l/N))`, so any polynomial or
//! rational function of the Laplacian is applied exactly by scaling modes.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::ops::inner_unchecked;
use super::{CellField, GridSpec};
use crate::error::{Error, Result};

/// Relative tolerance on the mean of a right-hand side handed to the
/// mean-zero inverse Laplacian.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Eigenvalue of `-Delta_h` per stored mode; symmetric in (k, l).
    eigen: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let h2 = grid.cell_area();
        let one_d: Vec<f64> = (0..n)
            .map(|k| 4.0 / h2 * (PI * k as f64 / n as f64).sin().powi(2))
            .collect();
        let mut eigen = Vec::with_capacity(grid.len());
        for a in 0..n {
            for b in 0..n {
                eigen.push(one_d[a] + one_d[b]);
            }
        }
        Spectral {
            grid,
            forward,
            inverse,
            eigen,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Eigenvalue of `-Delta_h` for mode `(k, l)`.
    pub fn neg_laplacian_eigenvalue(&self, k: usize, l: usize) -> f64 {
        self.eigen[(k % self.grid.n()) * self.grid.n() + l % self.grid.n()]
    }

    /// Applies the operator whose symbol is `symbol(lambda)`, `lambda` the
    /// eigenvalue of `-Delta_h`. The zero mode is passed `lambda = 0`.
    pub fn apply_symbol(&self, v: &CellField, symbol: impl Fn(f64) -> f64) -> CellField {
        assert_eq!(v.grid(), &self.grid, "spectral operator applied on a foreign grid");
        let n = self.grid.n();
        let mut buf: Vec<Complex<f64>> = v.values().iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.forward.process(&mut buf);
        transpose(&mut buf, n);
        self.forward.process(&mut buf);
        // buf is now indexed (l, k); the symbol is symmetric so that is harmless
        for (c, &lam) in buf.iter_mut().zip(&self.eigen) {
            *c *= symbol(lam);
        }
        self.inverse.process(&mut buf);
        transpose(&mut buf, n);
        self.inverse.process(&mut buf);
        let scale = 1.0 / (n * n) as f64;
        let values = buf.into_iter().map(|c| c.re * scale).collect();
        CellField::from_values(self.grid, values).expect("spectral output has grid size")
    }

    /// Mean-zero `psi` with `-Delta_h psi = v`; `v` must already have zero mean.
    pub fn inv_neg_laplacian(&self, v: &CellField) -> Result<CellField> {
        check_mean_zero(v)?;
        Ok(self.solve_mean_free(v))
    }

    /// `(-Delta_h)^{-1}` applied to `v - mean(v)`.
    pub fn inv_neg_laplacian_projected(&self, v: &CellField) -> CellField {
        self.solve_mean_free(v)
    }

    fn solve_mean_free(&self, v: &CellField) -> CellField {
        let mut psi = self.apply_symbol(v, |lam| if lam > 0.0 { 1.0 / lam } else { 0.0 });
        psi.subtract_mean();
        psi
    }

    /// `||v||_{-1,h}`; `v` must have zero mean.
    pub fn hminus1_norm(&self, v: &CellField) -> Result<f64> {
        let psi = self.inv_neg_laplacian(v)?;
        Ok(inner_unchecked(v, &psi).max(0.0).sqrt())
    }

    /// `||v - mean(v)||_{-1,h}^2`.
    pub fn hminus1_norm_sq_projected(&self, v: &CellField) -> f64 {
        let centered = v.mean_free();
        let psi = self.solve_mean_free(&centered);
        inner_unchecked(&centered, &psi).max(0.0)
    }
}

fn check_mean_zero(v: &CellField) -> Result<()> {
    let mean = v.mean();
    let tol = MEAN_ZERO_TOL * inner_unchecked(v, v).sqrt();
    if mean.abs() > tol {
        Err(Error::NonZeroMean { mean, tol })
    } else {
        Ok(())
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for a in 0..n {
        for b in (a + 1)..n {
            buf.swap(a * n + b, b * n + a);
        }
    }
}

/// Unique mean-zero solution of `-Delta_h psi = v`.
pub fn inv_neg_laplacian(v: &CellField) -> Result<CellField> {
    Spectral::new(*v.grid()).inv_neg_laplacian(v)
}

pub fn hminus1_norm(v: &CellField) -> Result<f64> {
    Spectral::new(*v.grid()).hminus1_norm(v)
}
