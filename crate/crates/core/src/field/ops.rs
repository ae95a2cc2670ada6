//! Difference, average and divergence stencils, grid inner products and norms.

use super::{CellField, EdgeFieldPair};
use crate::error::{Error, Result};

/// Discrete gradient: forward differences onto the x- and y-edges.
pub fn grad(v: &CellField) -> EdgeFieldPair {
    let g = *v.grid();
    let n = g.n();
    let inv_h = 1.0 / g.spacing();
    let (plus, _) = g.neighbors();
    let vals = v.values();
    let mut x = vec![0.0; g.len()];
    let mut y = vec![0.0; g.len()];
    for i in 0..n {
        let row = i * n;
        let row_p = plus[i] * n;
        for j in 0..n {
            let c = vals[row + j];
            x[row + j] = (vals[row_p + j] - c) * inv_h;
            y[row + j] = (vals[row + plus[j]] - c) * inv_h;
        }
    }
    EdgeFieldPair { grid: g, x, y }
}

/// Discrete divergence of an edge pair back to cell centers.
pub fn div(f: &EdgeFieldPair) -> CellField {
    let g = *f.grid();
    let n = g.n();
    let inv_h = 1.0 / g.spacing();
    let (_, minus) = g.neighbors();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        let row = i * n;
        let row_m = minus[i] * n;
        for j in 0..n {
            out[row + j] =
                (f.x[row + j] - f.x[row_m + j]) * inv_h + (f.y[row + j] - f.y[row + minus[j]]) * inv_h;
        }
    }
    CellField {
        grid: g,
        values: out,
    }
}

/// Five-point periodic Laplacian.
pub fn laplacian(v: &CellField) -> CellField {
    let g = *v.grid();
    let n = g.n();
    let inv_h2 = 1.0 / g.cell_area();
    let (plus, minus) = g.neighbors();
    let vals = v.values();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        let row = i * n;
        let row_p = plus[i] * n;
        let row_m = minus[i] * n;
        for j in 0..n {
            let c = vals[row + j];
            out[row + j] = (vals[row_p + j] + vals[row_m + j] + vals[row + plus[j]]
                + vals[row + minus[j]]
                - 4.0 * c)
                * inv_h2;
        }
    }
    CellField {
        grid: g,
        values: out,
    }
}

/// Two-point average of a cell quantity onto the edges (`A_x`, `A_y`).
pub fn edge_average(q: &CellField) -> EdgeFieldPair {
    let g = *q.grid();
    let n = g.n();
    let (plus, _) = g.neighbors();
    let vals = q.values();
    let mut x = vec![0.0; g.len()];
    let mut y = vec![0.0; g.len()];
    for i in 0..n {
        let row = i * n;
        let row_p = plus[i] * n;
        for j in 0..n {
            let c = vals[row + j];
            x[row + j] = 0.5 * (vals[row_p + j] + c);
            y[row + j] = 0.5 * (vals[row + plus[j]] + c);
        }
    }
    EdgeFieldPair { grid: g, x, y }
}

/// `a_x f^x + a_y f^y`: each cell receives the mean of its two x-edges plus
/// the mean of its two y-edges.
pub fn cell_average_of_edges(f: &EdgeFieldPair) -> CellField {
    let g = *f.grid();
    let n = g.n();
    let (_, minus) = g.neighbors();
    let mut out = vec![0.0; g.len()];
    for i in 0..n {
        let row = i * n;
        let row_m = minus[i] * n;
        for j in 0..n {
            out[row + j] =
                0.5 * (f.x[row + j] + f.x[row_m + j]) + 0.5 * (f.y[row + j] + f.y[row + minus[j]]);
        }
    }
    CellField {
        grid: g,
        values: out,
    }
}

/// `div(D grad v)` with the scalar weight `D` sampled on the edges.
pub fn weighted_div_grad(d: &EdgeFieldPair, v: &CellField) -> CellField {
    assert_eq!(d.grid(), v.grid(), "weighted_div_grad on different grids");
    div(&d.product(&grad(v)))
}

/// `<a, b>_Omega = h^2 sum a b`.
pub fn inner(a: &CellField, b: &CellField) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    Ok(inner_unchecked(a, b))
}

#[inline]
pub(crate) fn inner_unchecked(a: &CellField, b: &CellField) -> f64 {
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    a.grid().cell_area() * s
}

/// `[f, g]_Omega = <a_x(f^x g^x), 1> + <a_y(f^y g^y), 1>`.
pub fn edge_inner(f: &EdgeFieldPair, g: &EdgeFieldPair) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    let averaged = cell_average_of_edges(&f.product(g));
    Ok(f.grid().cell_area() * averaged.sum())
}

/// `||grad_h v||_2^2`.
pub fn grad_norm_sq(v: &CellField) -> f64 {
    let gv = grad(v);
    edge_inner(&gv, &gv).expect("gradient shares the grid of its argument")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    /// `||v||_p` for `1 <= p < inf`.
    Lp(f64),
    LInf,
    /// `(||v||_2^2 + ||grad_h v||_2^2)^(1/2)`
    H1,
    /// `(||v||_{H1}^2 + ||Delta_h v||_2^2)^(1/2)`
    H2,
}

pub fn norm(v: &CellField, kind: NormKind) -> Result<f64> {
    let l2sq = || inner_unchecked(v, v);
    Ok(match kind {
        NormKind::L2 => l2sq().sqrt(),
        NormKind::Lp(p) => {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::InvalidExponent(p));
            }
            let s: f64 = v.values().iter().map(|x| x.abs().powf(p)).sum();
            (v.grid().cell_area() * s).powf(1.0 / p)
        }
        NormKind::LInf => v.max_abs(),
        NormKind::H1 => (l2sq() + grad_norm_sq(v)).sqrt(),
        NormKind::H2 => {
            let lap = laplacian(v);
            (l2sq() + grad_norm_sq(v) + inner_unchecked(&lap, &lap)).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::GridSpec;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    fn pseudo_random(g: GridSpec, seed: u64) -> CellField {
        // xorshift; only needs to be deterministic and irregular
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        CellField::from_index_fn(g, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn grad_of_constant_vanishes() {
        let g = grid(8, 3.0);
        let e = grad(&CellField::constant(g, 2.7));
        assert!(e.x_values().iter().chain(e.y_values()).all(|&v| v == 0.0));
    }

    #[test]
    fn grad_single_spike() {
        let g = grid(4, 4.0);
        let mut v = CellField::zeros(g);
        v[(1, 1)] = 1.0;
        let e = grad(&v);
        assert_eq!(e.x_at(1, 1), -1.0);
        assert_eq!(e.x_at(0, 1), 1.0);
        assert_eq!(e.y_at(1, 1), -1.0);
        assert_eq!(e.y_at(1, 0), 1.0);
        let nonzero_x = e.x_values().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero_x, 2);
    }

    #[test]
    fn grad_of_cosine_closed_form() {
        let g = grid(32, 8.0);
        let (l, h) = (g.length(), g.spacing());
        let v = CellField::from_fn(g, |x, _| (2.0 * PI * x / l).cos());
        let e = grad(&v);
        for i in 0..32 {
            let x = g.center(i);
            let want = -(2.0 / h) * (PI * h / l).sin() * (2.0 * PI * (x + h / 2.0) / l).sin();
            for j in 0..32 {
                assert!((e.x_at(i as isize, j as isize) - want).abs() < 1e-13);
                assert!(e.y_at(i as isize, j as isize).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn div_of_zero_and_mean_free() {
        let g = grid(8, 2.0);
        assert!(div(&EdgeFieldPair::zeros(g)).values().iter().all(|&v| v == 0.0));
        let f = EdgeFieldPair::from_values(
            g,
            pseudo_random(g, 1).into_values(),
            pseudo_random(g, 2).into_values(),
        )
        .unwrap();
        assert!(div(&f).mean().abs() < 1e-14);
    }

    #[test]
    fn laplacian_spike_stencil() {
        let g = grid(4, 4.0);
        let mut v = CellField::zeros(g);
        v[(2, 2)] = 1.0;
        let lap = laplacian(&v);
        for i in 0..4 {
            for j in 0..4 {
                let want = match (i, j) {
                    (2, 2) => -4.0,
                    (1, 2) | (3, 2) | (2, 1) | (2, 3) => 1.0,
                    _ => 0.0,
                };
                assert_eq!(lap[(i, j)], want, "({i},{j})");
            }
        }
    }

    #[test]
    fn laplacian_cosine_eigenmode() {
        let g = grid(32, 8.0);
        let (l, h) = (g.length(), g.spacing());
        for k in [1.0, 3.0, 7.0] {
            let v = CellField::from_fn(g, |x, _| (2.0 * PI * k * x / l).cos());
            let lam = -(4.0 / (h * h)) * (PI * k * h / l).sin().powi(2);
            let lap = laplacian(&v);
            for (a, b) in lap.values().iter().zip(v.values()) {
                assert!((a - lam * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn div_grad_is_laplacian() {
        let g = grid(8, 1.5);
        let v = pseudo_random(g, 9);
        let a = div(&grad(&v));
        let b = laplacian(&v);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn weighted_reduces_to_laplacian() {
        let g = grid(8, 2.0);
        let v = pseudo_random(g, 4);
        let lap = laplacian(&v);
        let one = weighted_div_grad(&EdgeFieldPair::constant(g, 1.0), &v);
        let two = weighted_div_grad(&EdgeFieldPair::constant(g, 2.0), &v);
        for k in 0..g.len() {
            assert!((one.values()[k] - lap.values()[k]).abs() < 1e-12);
            assert!((two.values()[k] - 2.0 * lap.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_of_ones_is_area() {
        let g = grid(16, 8.0);
        let one = CellField::constant(g, 1.0);
        assert!((inner(&one, &one).unwrap() - 64.0).abs() < 1e-12);
        assert!((norm(&one, NormKind::L2).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(norm(&one, NormKind::LInf).unwrap(), 1.0);
    }

    #[test]
    fn inner_rejects_grid_mismatch() {
        let a = CellField::zeros(grid(8, 1.0));
        let b = CellField::zeros(grid(8, 2.0));
        assert!(matches!(inner(&a, &b), Err(Error::GridMismatch { .. })));
        let (ea, eb) = (grad(&a), grad(&CellField::zeros(grid(16, 1.0))));
        assert!(edge_inner(&ea, &eb).is_err());
    }

    #[test]
    fn lp_rejects_bad_exponent() {
        let a = CellField::zeros(grid(4, 1.0));
        assert!(matches!(norm(&a, NormKind::Lp(0.5)), Err(Error::InvalidExponent(_))));
        assert!(norm(&a, NormKind::Lp(f64::INFINITY)).is_err());
        assert!(norm(&a, NormKind::Lp(1.0)).is_ok());
    }

    #[test]
    fn lp_of_two_matches_l2() {
        let g = grid(8, 3.0);
        let v = pseudo_random(g, 5);
        let a = norm(&v, NormKind::Lp(2.0)).unwrap();
        let b = norm(&v, NormKind::L2).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn gradient_norm_zero_only_for_constants() {
        let g = grid(8, 1.0);
        assert_eq!(grad_norm_sq(&CellField::constant(g, 3.0)), 0.0);
        assert!(grad_norm_sq(&pseudo_random(g, 11)) > 0.0);
    }

    #[test]
    fn sobolev_norms_nest() {
        let g = grid(8, 2.0);
        let v = pseudo_random(g, 6);
        let h1 = norm(&v, NormKind::H1).unwrap();
        let h2 = norm(&v, NormKind::H2).unwrap();
        let lap = laplacian(&v);
        let lap2 = inner(&lap, &lap).unwrap();
        assert!((h2 * h2 - (h1 * h1 + lap2)).abs() < 1e-10 * h2 * h2);
        let l2 = norm(&v, NormKind::L2).unwrap();
        assert!((h1 * h1 - l2 * l2 - grad_norm_sq(&v)).abs() < 1e-12 * h1 * h1);
    }
}
