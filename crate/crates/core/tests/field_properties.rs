//! Randomized properties of the staggered-grid operators and the Fourier
//! inverse Laplacian.

use std::f64::consts::PI;

use proptest::prelude::*;
use surfactant_pf::field::{
    cell_average_of_edges, div, edge_average, edge_inner, grad, grad_norm_sq, hminus1_norm, inner,
    inv_neg_laplacian, laplacian, norm, weighted_div_grad, CellField, EdgeFieldPair, GridSpec,
    NormKind, Spectral,
};

fn field(n: usize, values: &[f64], len: f64) -> CellField {
    CellField::from_values(GridSpec::new(n, len).unwrap(), values[..n * n].to_vec()).unwrap()
}

fn sizes() -> impl Strategy<Value = (usize, f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (4usize..20, 0.5f64..10.0).prop_flat_map(|(n, len)| {
        let v = || prop::collection::vec(-1.0f64..1.0, n * n);
        (Just(n), Just(len), v(), v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts((n, len, a, bx, by) in sizes()) {
        let f = field(n, &a, len);
        let g = EdgeFieldPair::from_values(*f.grid(), bx, by).unwrap();
        let lhs = edge_inner(&grad(&f), &g).unwrap();
        let rhs = -inner(&f, &div(&g)).unwrap();
        let scale = edge_inner(&g, &g).unwrap().sqrt() * grad_norm_sq(&f).sqrt() + 1e-300;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn laplacian_is_symmetric_and_negative((n, len, a, b, _c) in sizes()) {
        let (u, v) = (field(n, &a, len), field(n, &b, len));
        let uv = inner(&u, &laplacian(&v)).unwrap();
        let vu = inner(&v, &laplacian(&u)).unwrap();
        let scale = norm(&u, NormKind::L2).unwrap() * norm(&laplacian(&v), NormKind::L2).unwrap() + 1e-300;
        prop_assert!((uv - vu).abs() <= 1e-12 * scale);
        let uu = inner(&u, &laplacian(&u)).unwrap();
        prop_assert!((uu + grad_norm_sq(&u)).abs() <= 1e-12 * (1.0 + uu.abs()));
        prop_assert!(uu <= 1e-12);
    }

    #[test]
    fn fourier_modes_are_eigenvectors(n in 4usize..40, len in 0.5f64..10.0, k in 0usize..40, l in 0usize..40) {
        let g = GridSpec::new(n, len).unwrap();
        let w = 2.0 * PI / len;
        let v = CellField::from_fn(g, |x, y| (k as f64 * w * x + 0.3).cos() * (l as f64 * w * y).cos());
        let h = g.spacing();
        // direct closed form of the 5-point stencil on a product of cosines
        let lam = 4.0 / (h * h)
            * ((PI * k as f64 / n as f64).sin().powi(2) + (PI * l as f64 / n as f64).sin().powi(2));
        let lap = laplacian(&v);
        let err = lap.zip_map(&v, |a, b| a + lam * b).max_abs();
        prop_assert!(err <= 1e-12 * (lam + 1.0) * (1.0 + 1.0 / (h * h)));
        let spectral = Spectral::new(g);
        let table = spectral.neg_laplacian_eigenvalue(k, l);
        prop_assert!((table - lam).abs() <= 1e-12 * (1.0 + lam));
    }

    #[test]
    fn inverse_laplacian_round_trip((n, len, a, _b, _c) in sizes()) {
        let v = field(n, &a, len).mean_free();
        let psi = inv_neg_laplacian(&v).unwrap();
        prop_assert!(psi.mean().abs() <= 1e-13 * (1.0 + psi.max_abs()));
        let back = laplacian(&psi).scaled(-1.0);
        let err = norm(&(&back - &v), NormKind::L2).unwrap();
        prop_assert!(err <= 1e-12 * norm(&v, NormKind::L2).unwrap().max(1e-300));
    }

    #[test]
    fn hminus1_norm_is_dual_to_gradient((n, len, a, _b, _c) in sizes()) {
        // ||v||_{-1}^2 = ||grad psi||^2 with -Delta psi = v
        let v = field(n, &a, len).mean_free();
        let psi = inv_neg_laplacian(&v).unwrap();
        let h = hminus1_norm(&v).unwrap();
        let via_grad = grad_norm_sq(&psi).sqrt();
        prop_assert!((h - via_grad).abs() <= 1e-10 * (h + 1e-300));
        // Cauchy-Schwarz between the -1 and 1 seminorms
        let l2sq = inner(&v, &v).unwrap();
        prop_assert!(l2sq <= h * grad_norm_sq(&v).sqrt() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn averages_preserve_constants_and_means((n, len, a, bx, by) in sizes(), c in -3.0f64..3.0) {
        let g = GridSpec::new(n, len).unwrap();
        let q = field(n, &a, len);
        let avg = edge_average(&q);
        let sx: f64 = avg.x_values().iter().sum();
        let sy: f64 = avg.y_values().iter().sum();
        prop_assert!((sx - q.sum()).abs() <= 1e-12 * (1.0 + q.values().len() as f64));
        prop_assert!((sy - q.sum()).abs() <= 1e-12 * (1.0 + q.values().len() as f64));
        // x and y contributions add, as in |grad phi|^2
        let back = cell_average_of_edges(&EdgeFieldPair::constant(g, c));
        prop_assert!(back.values().iter().all(|&v| (v - 2.0 * c).abs() <= 1e-14 * (1.0 + c.abs())));
        let e = EdgeFieldPair::from_values(g, bx, by).unwrap();
        let cell = cell_average_of_edges(&e);
        let total: f64 = e.x_values().iter().chain(e.y_values()).sum();
        prop_assert!((cell.sum() - total).abs() <= 1e-11 * (1.0 + total.abs()));
    }

    #[test]
    fn weighted_operator_is_symmetric((n, len, a, b, c) in sizes()) {
        let (u, v) = (field(n, &a, len), field(n, &b, len));
        let w = field(n, &c, len).map(|x| 1.5 + x);
        let d = edge_average(&w);
        let uv = inner(&u, &weighted_div_grad(&d, &v)).unwrap();
        let vu = inner(&v, &weighted_div_grad(&d, &u)).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-11 * (1.0 + uv.abs()));
        prop_assert!(inner(&u, &weighted_div_grad(&d, &u)).unwrap() <= 1e-12);
    }

    #[test]
    fn norms_are_ordered_and_homogeneous((n, len, a, _b, _c) in sizes(), s in -4.0f64..4.0) {
        let v = field(n, &a, len);
        let l2 = norm(&v, NormKind::L2).unwrap();
        let h1 = norm(&v, NormKind::H1).unwrap();
        let h2 = norm(&v, NormKind::H2).unwrap();
        prop_assert!(l2 <= h1 * (1.0 + 1e-14) && h1 <= h2 * (1.0 + 1e-14));
        let area = v.grid().area();
        let linf = norm(&v, NormKind::LInf).unwrap();
        prop_assert!(l2 <= area.sqrt() * linf * (1.0 + 1e-14));
        for kind in [NormKind::L2, NormKind::Lp(3.0), NormKind::LInf, NormKind::H1] {
            let scaled = norm(&v.scaled(s), kind).unwrap();
            let base = norm(&v, kind).unwrap();
            prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + scaled));
        }
    }
}
