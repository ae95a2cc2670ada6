//! Test oracles shared by the integration tests and the acceptance run.
//!
//! `minimize_merit` finds the per-step minimizer by preconditioned projected
//! gradient descent. It never touches the Newton code: the merit value and
//! gradient are rebuilt here from the energy, the concave gradient and the
//! inverse Laplacian.

#![allow(dead_code)]

use surfactant_pf::energy::{concave_gradient, convex_energy, convex_gradient, ModelParams, State};
use surfactant_pf::field::{inner, inv_neg_laplacian, CellField, GridSpec, Spectral};

/// Deterministic uniform noise in `[-amp, amp]` (64-bit LCG).
pub fn lcg_field(g: GridSpec, seed: u64, amp: f64) -> CellField {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    CellField::from_index_fn(g, |_, _| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        amp * (2.0 * ((s >> 11) as f64 / (1u64 << 53) as f64) - 1.0)
    })
}

/// Independent evaluation of the per-step merit functional.
pub struct MeritOracle {
    pub old: State,
    pub p: ModelParams,
    lin_phi: CellField,
    lin_rho: CellField,
}

impl MeritOracle {
    pub fn new(old: &State, p: &ModelParams) -> Self {
        let (e_phi, e_rho) = concave_gradient(&old.phi, &old.rho, p);
        MeritOracle {
            old: old.clone(),
            p: *p,
            lin_phi: e_phi.scaled(-1.0),
            lin_rho: e_rho.scaled(-1.0),
        }
    }

    fn dist_sq(&self, new: &CellField, old: &CellField) -> f64 {
        let d = (new - old).mean_free();
        let psi = inv_neg_laplacian(&d).unwrap();
        inner(&d, &psi).unwrap()
    }

    pub fn value(&self, phi: &CellField, rho: &CellField) -> f64 {
        let mdt = self.p.mobility * self.p.dt;
        (self.dist_sq(phi, &self.old.phi) + self.dist_sq(rho, &self.old.rho)) / (2.0 * mdt)
            + convex_energy(phi, rho, &self.p).unwrap()
            + inner(phi, &self.lin_phi).unwrap()
            + inner(rho, &self.lin_rho).unwrap()
    }

    /// `l2` gradient projected onto mean-zero fields.
    pub fn gradient(&self, phi: &CellField, rho: &CellField) -> (CellField, CellField) {
        let mdt = self.p.mobility * self.p.dt;
        let (cp, cr) = convex_gradient(phi, rho, &self.p).unwrap();
        let part = |c: CellField, lin: &CellField, new: &CellField, old: &CellField| {
            let psi = inv_neg_laplacian(&(new - old).mean_free()).unwrap();
            let mut g = &c + lin;
            g.axpy(1.0 / mdt, &psi);
            g.mean_free()
        };
        (
            part(cp, &self.lin_phi, phi, &self.old.phi),
            part(cr, &self.lin_rho, rho, &self.old.rho),
        )
    }
}

pub struct OracleResult {
    pub phi: CellField,
    pub rho: CellField,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn pair_inner(a: &(CellField, CellField), b: &(CellField, CellField)) -> f64 {
    inner(&a.0, &b.0).unwrap() + inner(&a.1, &b.1).unwrap()
}

/// Largest `t` keeping `rho + t d` inside `(0, 1)`, by direct cell scan.
fn boundary_distance(rho: &CellField, d: &CellField) -> f64 {
    let mut t = f64::INFINITY;
    for (&r, &v) in rho.values().iter().zip(d.values()) {
        if v > 0.0 {
            t = t.min((1.0 - r) / v);
        }
        if v < 0.0 {
            t = t.min(-r / v);
        }
    }
    t
}

/// Minimizes the merit functional of step `old -> new` starting from `old`.
///
/// Search directions are gradients scaled by a fixed Fourier multiplier;
/// step lengths come from Barzilai-Borwein, are capped at 90% of the way
/// to `rho = 0` or `rho = 1`, and are backtracked until an Armijo test with
/// a round-off slack holds. Stops once the scaled gradient norm is below
/// `gtol` or `max_iter` is reached.
pub fn minimize_merit(old: &State, p: &ModelParams, gtol: f64, max_iter: usize) -> OracleResult {
    let oracle = MeritOracle::new(old, p);
    let grid = *old.grid();
    let spectral = Spectral::new(grid);
    let mdt = p.mobility * p.dt;
    let (b_phi, c_phi) = (p.eps + p.alpha / p.delta, p.eta * p.eta);
    let (a_rho, b_rho) = (4.0 * p.beta + std::f64::consts::SQRT_2 * p.alpha, p.xi);
    let precondition = |g: &(CellField, CellField)| {
        (
            spectral.apply_symbol(&g.0, |l| mdt * l / (1.0 + mdt * l * l * (b_phi + c_phi * l))),
            spectral.apply_symbol(&g.1, |l| mdt * l / (1.0 + mdt * l * (a_rho + b_rho * l))),
        )
    };

    let mut x = (old.phi.clone(), old.rho.clone());
    let mut j = oracle.value(&x.0, &x.1);
    let mut g = oracle.gradient(&x.0, &x.1);
    let mut pg = precondition(&g);
    let mut step = 1.0f64;
    let mut grad_norm = pair_inner(&g, &pg).max(0.0).sqrt();
    let mut iterations = 0;
    while grad_norm > gtol && iterations < max_iter {
        iterations += 1;
        let d = (pg.0.scaled(-1.0).mean_free(), pg.1.scaled(-1.0).mean_free());
        let slope = pair_inner(&g, &d);
        let mut t = step.min(0.9 * boundary_distance(&x.1, &d.1));
        let accepted = loop {
            let mut phi = x.0.clone();
            phi.axpy(t, &d.0);
            let mut rho = x.1.clone();
            rho.axpy(t, &d.1);
            if rho.min() > 0.0 && rho.max() < 1.0 {
                let jt = oracle.value(&phi, &rho);
                if jt <= j + 1e-4 * t * slope + 1e-13 * j.abs() {
                    break Some((phi, rho, jt));
                }
            }
            t *= 0.5;
            if t < 1e-20 {
                break None;
            }
        };
        let Some((phi, rho, jt)) = accepted else { break };
        let x_new = (phi, rho);
        let g_new = oracle.gradient(&x_new.0, &x_new.1);
        let s = (&x_new.0 - &x.0, &x_new.1 - &x.1);
        let y = (&g_new.0 - &g.0, &g_new.1 - &g.1);
        let py = precondition(&y);
        let sy = pair_inner(&s, &y);
        let ypy = pair_inner(&y, &py);
        step = if sy > 0.0 && ypy > 0.0 { sy / ypy } else { 1.0 };
        x = x_new;
        j = jt;
        g = g_new;
        pg = precondition(&g);
        grad_norm = pair_inner(&g, &pg).max(0.0).sqrt();
    }
    OracleResult {
        phi: x.0,
        rho: x.1,
        iterations,
        grad_norm,
    }
}

/// Maximum absolute difference over both fields.
pub fn max_diff(a: (&CellField, &CellField), b: (&CellField, &CellField)) -> f64 {
    (a.0 - b.0).max_abs().max((a.1 - b.1).max_abs())
}
