//! Runtime self-checks of the discrete calculus, the energy and one solve,
//! run by `surfactant-pf verify` and by the `property-suite` mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    concave_energy, concave_gradient, convex_energy, convex_gradient, energy_of, scheme_residual,
    ModelParams, State,
};
use crate::field::{
    div, edge_inner, grad, inner, inv_neg_laplacian, laplacian, norm, CellField, EdgeFieldPair,
    GridSpec, NormKind,
};
use crate::stepper::{residual_norm, SolverConfig, Stepper};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} (limit {limit:.1e})"),
    }
}

fn noise(grid: GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> CellField {
    CellField::from_index_fn(grid, |_, _| amp * rng.random_range(-1.0..1.0))
}

fn admissible(grid: GridSpec, rng: &mut ChaCha8Rng) -> (CellField, CellField) {
    let phi = noise(grid, rng, 0.4).map(|v| v + 0.5);
    let rho = noise(grid, rng, 0.4).map(|v| v + 0.5);
    (phi, rho)
}

/// Runs every check on an `n x n` grid of side `2 pi` with parameters `p`.
pub fn run_suite(p: &ModelParams, n: usize, seed: u64) -> Vec<Check> {
    let grid = match GridSpec::new(n, 2.0 * std::f64::consts::PI) {
        Ok(g) => g,
        Err(e) => {
            return vec![Check {
                name: "grid",
                passed: false,
                detail: e.to_string(),
            }]
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // summation by parts
    let f = noise(grid, &mut rng, 1.0);
    let g = EdgeFieldPair::from_values(
        grid,
        noise(grid, &mut rng, 1.0).into_values(),
        noise(grid, &mut rng, 1.0).into_values(),
    )
    .expect("edge sizes match");
    let lhs = edge_inner(&grad(&f), &g).expect("same grid");
    let rhs = -inner(&f, &div(&g)).expect("same grid");
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    out.push(check("summation by parts", (lhs - rhs).abs() / scale, 1e-12));

    // eigenmode
    let (k, l) = (2usize, 3usize);
    let len = grid.length();
    let w = 2.0 * std::f64::consts::PI / len;
    let mode = CellField::from_fn(grid, |x, y| (k as f64 * w * x).cos() * (l as f64 * w * y).sin());
    let h = grid.spacing();
    let lam = 4.0 / (h * h)
        * ((std::f64::consts::PI * k as f64 / n as f64).sin().powi(2)
            + (std::f64::consts::PI * l as f64 / n as f64).sin().powi(2));
    let lap = laplacian(&mode);
    let err = lap
        .values()
        .iter()
        .zip(mode.values())
        .map(|(a, b)| (a + lam * b).abs())
        .fold(0.0, f64::max);
    out.push(check("laplacian eigenmode", err / lam, 1e-12));

    // inverse Laplacian round trip
    let v = noise(grid, &mut rng, 1.0).mean_free();
    let round = match inv_neg_laplacian(&v) {
        Ok(psi) => {
            let back = &laplacian(&psi) * -1.0;
            norm(&(&back - &v), NormKind::L2).unwrap_or(f64::NAN) / norm(&v, NormKind::L2).unwrap_or(1.0)
        }
        Err(_) => f64::INFINITY,
    };
    out.push(check("inverse laplacian round trip", round, 1e-12));

    // energy split identity and gradient consistency
    let mut split = 0.0f64;
    let mut grad_err = 0.0f64;
    let mut cvx_violation = 0.0f64;
    for _ in 0..5 {
        let (phi, rho) = admissible(grid, &mut rng);
        match energy_of(&phi, &rho, p) {
            Ok(e) => split = split.max((e.total - (e.convex - e.concave)).abs() / (1.0 + e.total.abs())),
            Err(_) => split = f64::INFINITY,
        }
        let u = noise(grid, &mut rng, 1.0);
        let dv = noise(grid, &mut rng, 1.0);
        let s = 1e-5;
        let shift = |a: &CellField, d: &CellField, t: f64| a.zip_map(d, |x, y| x + t * y);
        let fd_c = (convex_energy(&shift(&phi, &u, s), &shift(&rho, &dv, s), p).unwrap_or(f64::NAN)
            - convex_energy(&shift(&phi, &u, -s), &shift(&rho, &dv, -s), p).unwrap_or(f64::NAN))
            / (2.0 * s);
        let fd_e = (concave_energy(&shift(&phi, &u, s), &shift(&rho, &dv, s), p)
            - concave_energy(&shift(&phi, &u, -s), &shift(&rho, &dv, -s), p))
            / (2.0 * s);
        if let Ok((gp, gr)) = convex_gradient(&phi, &rho, p) {
            let an = inner(&gp, &u).unwrap_or(f64::NAN) + inner(&gr, &dv).unwrap_or(f64::NAN);
            grad_err = grad_err.max((an - fd_c).abs() / an.abs().max(1e-8));
        }
        let (ep, er) = concave_gradient(&phi, &rho, p);
        let an = inner(&ep, &u).unwrap_or(f64::NAN) + inner(&er, &dv).unwrap_or(f64::NAN);
        grad_err = grad_err.max((an - fd_e).abs() / an.abs().max(1e-8));

        // midpoint convexity of both parts
        let (phi2, rho2) = admissible(grid, &mut rng);
        let mid_phi = phi.zip_map(&phi2, |a, b| 0.5 * (a + b));
        let mid_rho = rho.zip_map(&rho2, |a, b| 0.5 * (a + b));
        let ec = |a: &CellField, b: &CellField| convex_energy(a, b, p).unwrap_or(f64::NAN);
        let ee = |a: &CellField, b: &CellField| concave_energy(a, b, p);
        for part in [&ec as &dyn Fn(&CellField, &CellField) -> f64, &ee] {
            let (a, b, m) = (part(&phi, &rho), part(&phi2, &rho2), part(&mid_phi, &mid_rho));
            let gap = m - 0.5 * (a + b);
            cvx_violation = cvx_violation.max(gap / (1.0 + a.abs() + b.abs()));
        }
    }
    out.push(check("energy split identity", split, 1e-10));
    out.push(check("chemical potential vs finite differences", grad_err, 1e-5));
    out.push(check("midpoint convexity of split parts", cvx_violation.max(0.0), 1e-10));

    // constant state is a fixed point
    let c = State::new(CellField::constant(grid, 0.3), CellField::constant(grid, 0.6))
        .expect("constant state is admissible");
    let fixed = scheme_residual(&c, &c, p)
        .map(|r| residual_norm(&r))
        .unwrap_or(f64::INFINITY);
    out.push(check("constant state residual", fixed, 0.0));

    // one solve
    let (phi, rho) = admissible(grid, &mut rng);
    let mut phi = phi;
    let mut rho = rho.map(|r| 0.5 + 0.5 * (r - 0.5));
    phi.subtract_mean();
    phi = phi.map(|v| v + 0.5);
    rho.subtract_mean();
    rho = rho.map(|v| v + 0.5);
    let old = State::new(phi, rho).expect("admissible start");
    let cfg = SolverConfig::default();
    let solve = Stepper::new(grid, *p, cfg).and_then(|s| s.advance(&old));
    match solve {
        Ok((new, diag)) => {
            let tol = cfg.tolerance(&grid);
            let drift = (new.phi.mean() - old.phi.mean())
                .abs()
                .max((new.rho.mean() - old.rho.mean()).abs());
            out.push(check("newton residual / tolerance", diag.final_residual / tol, 1.0));
            out.push(check("mass drift over one step", drift, 1e-12));
            let e0 = energy_of(&old.phi, &old.rho, p).map(|e| e.total).unwrap_or(f64::NAN);
            out.push(check(
                "energy increase over one step",
                (diag.energy.total - e0).max(0.0),
                1e-9 * (1.0 + e0.abs()),
            ));
            out.push(Check {
                name: "rho stays in (0, 1)",
                passed: diag.iterate_rho_min > 0.0 && diag.iterate_rho_max < 1.0,
                detail: format!("[{}, {}]", diag.iterate_rho_min, diag.iterate_rho_max),
            });
        }
        Err(e) => out.push(Check {
            name: "one time step",
            passed: false,
            detail: e.to_string(),
        }),
    }
    out
}
