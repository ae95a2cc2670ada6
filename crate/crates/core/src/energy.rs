//! Free energy of the fluid-surfactant model, its convex-concave split, the
//! discrete chemical potentials and the per-step merit functional.
//!
//! The discrete energy is
//!
//! ```text
//! E = h^2 sum [ f(phi)/eps + (eta^2/2)|Delta_h phi|^2 + (alpha/2)(rho - N)^2 + beta H(rho) ]
//!     + (eps/2)||grad_h phi||^2 + (xi/2)||grad_h rho||^2
//! ```
//!
//! with `f(phi) = phi^2 (1-phi)^2 / 4`, `H(rho) = rho ln rho + (1-rho) ln(1-rho)`
//! and `N = A|grad_h^delta phi|` the edge-averaged regularized gradient
//! magnitude. `E = E_c - E_e` where
//!
//! ```text
//! E_e = h^2 sum [ (phi - 1/2)^2 / (8 eps) + (alpha/2)(sqrt2 - 1) rho^2 ] + alpha/(2 delta) ||grad_h phi||^2
//! ```
//!
//! Both parts are convex for `0 < rho < 1`. The chemical potentials are the
//! exact variational derivatives (gradients divided by `h^2`) of `E_c` at the
//! new level minus those of `E_e` at the old level.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::field::{
    cell_average_of_edges, div, edge_average, grad, grad_norm_sq, laplacian, CellField,
    EdgeFieldPair, GridSpec, Spectral,
};

/// Physical constants of the model and the time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Interface width `eps`.
    pub eps: f64,
    /// Coupling strength `alpha`.
    pub alpha: f64,
    /// Entropy weight `beta`.
    pub beta: f64,
    /// Bending coefficient `eta`.
    pub eta: f64,
    /// Surfactant diffusion `xi`.
    pub xi: f64,
    /// Gradient regularization `delta`.
    pub delta: f64,
    /// Mobility shared by both equations.
    pub mobility: f64,
    pub dt: f64,
}

impl ModelParams {
    /// Parameters of the smooth-data accuracy test on `(0, 8)^2`.
    pub fn accuracy_test(dt: f64) -> Self {
        ModelParams {
            eps: 0.05,
            alpha: 0.001,
            beta: 0.02,
            eta: 0.05,
            xi: 0.05,
            delta: 0.001,
            mobility: 0.01,
            dt,
        }
    }

    /// Parameters of the spinodal-decomposition run on `(0, 2 pi)^2`.
    pub fn spinodal(dt: f64) -> Self {
        ModelParams {
            eps: 0.02,
            alpha: 0.02,
            beta: 0.02,
            eta: 0.02,
            xi: 0.02,
            delta: 0.01,
            mobility: 0.01,
            dt,
        }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        ModelParams { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps", self.eps),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("xi", self.xi),
            ("delta", self.delta),
            ("mobility", self.mobility),
            ("dt", self.dt),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }
}

/// Phase field, surfactant concentration and time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: CellField,
    pub rho: CellField,
    pub time: f64,
    pub step: usize,
}

impl State {
    pub fn new(phi: CellField, rho: CellField) -> Result<Self> {
        let state = State {
            phi,
            rho,
            time: 0.0,
            step: 0,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.grid().ensure_same(self.rho.grid())?;
        self.phi.check_finite()?;
        check_rho_domain(&self.rho)
    }
}

/// Fails on the first cell with `rho` outside the open interval `(0, 1)`.
pub fn check_rho_domain(rho: &CellField) -> Result<()> {
    let n = rho.grid().n();
    match rho.values().iter().position(|&r| !(r > 0.0 && r < 1.0)) {
        Some(k) => Err(Error::RhoDomain {
            i: k / n,
            j: k % n,
            value: rho.values()[k],
        }),
        None => Ok(()),
    }
}

/// Individual density terms of the total energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub double_well: f64,
    pub dirichlet: f64,
    pub bending: f64,
    pub surfactant_dirichlet: f64,
    pub coupling: f64,
    pub entropy: f64,
}

impl EnergyParts {
    pub fn sum(&self) -> f64 {
        self.double_well
            + self.dirichlet
            + self.bending
            + self.surfactant_dirichlet
            + self.coupling
            + self.entropy
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub convex: f64,
    pub concave: f64,
    pub parts: EnergyParts,
}

#[inline]
fn entropy_density(r: f64) -> f64 {
    r * r.ln() + (1.0 - r) * (-r).ln_1p()
}

#[inline]
fn double_well(phi: f64) -> f64 {
    0.25 * phi * phi * (1.0 - phi) * (1.0 - phi)
}

/// `A|grad_h^delta phi|`: square root of the mean of the four squared edge
/// differences around each cell (times two, halved) plus `delta^2`.
pub fn avg_grad_mag(phi: &CellField, delta: f64) -> CellField {
    let g = grad(phi);
    let sq = cell_average_of_edges(&g.product(&g));
    let d2 = delta * delta;
    sq.map(|s| (s + d2).sqrt())
}

fn sum_h2(field: &CellField, f: impl Fn(f64) -> f64) -> f64 {
    field.grid().cell_area() * field.values().iter().map(|&v| f(v)).sum::<f64>()
}

fn sum2_h2(a: &CellField, b: &CellField, f: impl Fn(f64, f64) -> f64) -> f64 {
    a.grid().cell_area()
        * a.values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| f(x, y))
            .sum::<f64>()
}

/// Total energy, evaluated term by term, together with the convex and
/// concave parts.
pub fn energy(state: &State, p: &ModelParams) -> Result<EnergyBreakdown> {
    energy_of(&state.phi, &state.rho, p)
}

pub fn energy_of(phi: &CellField, rho: &CellField, p: &ModelParams) -> Result<EnergyBreakdown> {
    phi.grid().ensure_same(rho.grid())?;
    check_rho_domain(rho)?;
    let nmag = avg_grad_mag(phi, p.delta);
    let lap = laplacian(phi);
    let grad_phi_sq = grad_norm_sq(phi);
    let parts = EnergyParts {
        double_well: sum_h2(phi, |v| double_well(v) / p.eps),
        dirichlet: 0.5 * p.eps * grad_phi_sq,
        bending: 0.5 * p.eta * p.eta * sum_h2(&lap, |v| v * v),
        surfactant_dirichlet: 0.5 * p.xi * grad_norm_sq(rho),
        coupling: 0.5 * p.alpha * sum2_h2(rho, &nmag, |r, m| (r - m) * (r - m)),
        entropy: p.beta * sum_h2(rho, entropy_density),
    };
    Ok(EnergyBreakdown {
        total: parts.sum(),
        convex: convex_energy(phi, rho, p)?,
        concave: concave_energy(phi, rho, p),
        parts,
    })
}

/// `E_c`.
pub fn convex_energy(phi: &CellField, rho: &CellField, p: &ModelParams) -> Result<f64> {
    phi.grid().ensure_same(rho.grid())?;
    check_rho_domain(rho)?;
    let area = phi.grid().area();
    Ok(convex_energy_unchecked(phi, rho, p) + area / (64.0 * p.eps))
}

/// `E_c` without the constant `|Omega| / (64 eps)`; assumes admissible input.
fn convex_energy_unchecked(phi: &CellField, rho: &CellField, p: &ModelParams) -> f64 {
    let nmag = avg_grad_mag(phi, p.delta);
    let lap = laplacian(phi);
    let quartic = sum_h2(phi, |v| (v - 0.5).powi(4)) / (4.0 * p.eps);
    let bending = 0.5 * p.eta * p.eta * sum_h2(&lap, |v| v * v);
    let gradients =
        (0.5 * p.eps + 0.5 * p.alpha / p.delta) * grad_norm_sq(phi) + 0.5 * p.xi * grad_norm_sq(rho);
    let entropy = p.beta * sum_h2(rho, entropy_density);
    let coupling = 0.5
        * p.alpha
        * sum2_h2(rho, &nmag, |r, m| (r - m) * (r - m) + (SQRT_2 - 1.0) * r * r);
    quartic + bending + gradients + entropy + coupling
}

/// `E_e`.
pub fn concave_energy(phi: &CellField, rho: &CellField, p: &ModelParams) -> f64 {
    let quad = sum_h2(phi, |v| (v - 0.5) * (v - 0.5)) / (8.0 * p.eps);
    let rho_sq = 0.5 * p.alpha * (SQRT_2 - 1.0) * sum_h2(rho, |r| r * r);
    quad + rho_sq + 0.5 * p.alpha / p.delta * grad_norm_sq(phi)
}

/// Variational derivatives `(delta_phi E_c, delta_rho E_c)`.
pub fn convex_gradient(
    phi: &CellField,
    rho: &CellField,
    p: &ModelParams,
) -> Result<(CellField, CellField)> {
    phi.grid().ensure_same(rho.grid())?;
    check_rho_domain(rho)?;
    Ok((convex_gradient_phi(phi, rho, p), convex_gradient_rho(phi, rho, p)))
}

/// Variational derivatives `(delta_phi E_e, delta_rho E_e)`.
pub fn concave_gradient(phi: &CellField, rho: &CellField, p: &ModelParams) -> (CellField, CellField) {
    (concave_gradient_phi(phi, p), concave_gradient_rho(rho, p))
}

fn convex_gradient_phi(phi: &CellField, rho: &CellField, p: &ModelParams) -> CellField {
    let nmag = avg_grad_mag(phi, p.delta);
    let lap = laplacian(phi);
    let bilap = laplacian(&lap);
    // coupling: -alpha div( A(1 - rho/N) grad phi )
    let weight = edge_average(&rho.zip_map(&nmag, |r, m| 1.0 - r / m));
    let coupling = div(&weight.product(&grad(phi)));
    let stiff = p.eps + p.alpha / p.delta;
    let eta2 = p.eta * p.eta;
    let mut out = phi.map(|v| (v - 0.5).powi(3) / p.eps);
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        *o += -stiff * lap.values()[k] + eta2 * bilap.values()[k] - p.alpha * coupling.values()[k];
    }
    out
}

fn convex_gradient_rho(phi: &CellField, rho: &CellField, p: &ModelParams) -> CellField {
    let nmag = avg_grad_mag(phi, p.delta);
    let lap = laplacian(rho);
    let mut out = rho.map(|r| p.beta * (r.ln() - (-r).ln_1p()) + SQRT_2 * p.alpha * r);
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        *o += -p.xi * lap.values()[k] - p.alpha * nmag.values()[k];
    }
    out
}

fn concave_gradient_phi(phi: &CellField, p: &ModelParams) -> CellField {
    let lap = laplacian(phi);
    let scale = p.alpha / p.delta;
    phi.zip_map(&lap, |v, l| (v - 0.5) / (4.0 * p.eps) - scale * l)
}

fn concave_gradient_rho(rho: &CellField, p: &ModelParams) -> CellField {
    rho.map(|r| (SQRT_2 - 1.0) * p.alpha * r)
}

/// `mu_phi^{n+1} = delta_phi E_c(phi^{n+1}, rho^{n+1}) - delta_phi E_e(phi^n)`.
pub fn mu_phi(
    phi_new: &CellField,
    rho_new: &CellField,
    phi_old: &CellField,
    p: &ModelParams,
) -> CellField {
    let convex = convex_gradient_phi(phi_new, rho_new, p);
    &convex - &concave_gradient_phi(phi_old, p)
}

/// `mu_rho^{n+1} = delta_rho E_c(phi^{n+1}, rho^{n+1}) - delta_rho E_e(rho^n)`.
pub fn mu_rho(
    phi_new: &CellField,
    rho_new: &CellField,
    rho_old: &CellField,
    p: &ModelParams,
) -> Result<CellField> {
    check_rho_domain(rho_new)?;
    let convex = convex_gradient_rho(phi_new, rho_new, p);
    Ok(&convex - &concave_gradient_rho(rho_old, p))
}

/// Residual of the fully discrete scheme:
/// `F = (u^{n+1} - u^n)/dt - M Delta_h mu^{n+1}` for both unknowns.
pub fn scheme_residual(
    new: &State,
    old: &State,
    p: &ModelParams,
) -> Result<(CellField, CellField)> {
    new.grid().ensure_same(old.grid())?;
    new.grid().ensure_same(new.rho.grid())?;
    let mphi = mu_phi(&new.phi, &new.rho, &old.phi, p);
    let mrho = mu_rho(&new.phi, &new.rho, &old.rho, p)?;
    Ok((
        residual_component(&new.phi, &old.phi, &mphi, p),
        residual_component(&new.rho, &old.rho, &mrho, p),
    ))
}

fn residual_component(new: &CellField, old: &CellField, mu: &CellField, p: &ModelParams) -> CellField {
    let lap = laplacian(mu);
    let inv_dt = 1.0 / p.dt;
    let mut out = new - old;
    for (o, l) in out.values_mut().iter_mut().zip(lap.values()) {
        *o = *o * inv_dt - p.mobility * l;
    }
    out
}

/// Absolute tolerance on the mean shift allowed by [`merit`].
pub const MERIT_MEAN_TOL: f64 = 1e-10;

/// Per-step merit functional `J^n(phi, rho)` whose unique minimizer over
/// the mean-preserving admissible set is the scheme solution.
pub fn merit(phi: &CellField, rho: &CellField, old: &State, p: &ModelParams) -> Result<f64> {
    phi.grid().ensure_same(old.grid())?;
    rho.grid().ensure_same(old.grid())?;
    for (name, new, prev) in [("phi", phi, &old.phi), ("rho", rho, &old.rho)] {
        let (a, b) = (new.mean(), prev.mean());
        if (a - b).abs() > MERIT_MEAN_TOL * (1.0 + b.abs()) {
            return Err(Error::MeanMismatch {
                field: name,
                expected: b,
                actual: a,
            });
        }
    }
    check_rho_domain(rho)?;
    Ok(Merit::new(old, p).value(phi, rho))
}

/// `J^n` with the explicit data of step `n` precomputed.
#[derive(Debug, Clone)]
pub struct Merit {
    params: ModelParams,
    spectral: Spectral,
    phi_old: CellField,
    rho_old: CellField,
    f_phi: CellField,
    f_rho: CellField,
}

impl Merit {
    pub fn new(old: &State, p: &ModelParams) -> Self {
        Self::with_spectral(old, p, Spectral::new(*old.grid()))
    }

    pub fn with_spectral(old: &State, p: &ModelParams, spectral: Spectral) -> Self {
        let (e_phi, e_rho) = concave_gradient(&old.phi, &old.rho, p);
        Merit {
            params: *p,
            spectral,
            phi_old: old.phi.clone(),
            rho_old: old.rho.clone(),
            f_phi: -&e_phi,
            f_rho: -&e_rho,
        }
    }

    /// `f_phi^n = -(phi^n - 1/2)/(4 eps) - (alpha/delta) Delta_h phi^n`
    pub fn f_phi(&self) -> &CellField {
        &self.f_phi
    }

    /// `f_rho^n = -(sqrt2 - 1) alpha rho^n`
    pub fn f_rho(&self) -> &CellField {
        &self.f_rho
    }

    /// Evaluates `J^n`; the caller guarantees matching means and `0 < rho < 1`.
    pub fn value(&self, phi: &CellField, rho: &CellField) -> f64 {
        let p = &self.params;
        let dphi = phi - &self.phi_old;
        let drho = rho - &self.rho_old;
        let dist = (self.spectral.hminus1_norm_sq_projected(&dphi)
            + self.spectral.hminus1_norm_sq_projected(&drho))
            / (2.0 * p.mobility * p.dt);
        let linear = sum2_h2(phi, &self.f_phi, |a, b| a * b) + sum2_h2(rho, &self.f_rho, |a, b| a * b);
        dist + convex_energy_unchecked(phi, rho, p) + linear
    }

    /// Gradient of `J^n` restricted to mean-zero perturbations.
    pub fn gradient(&self, phi: &CellField, rho: &CellField) -> (CellField, CellField) {
        let p = &self.params;
        let scale = 1.0 / (p.mobility * p.dt);
        let mut g_phi = convex_gradient_phi(phi, rho, p);
        g_phi.axpy(1.0, &self.f_phi);
        g_phi.axpy(scale, &self.spectral.inv_neg_laplacian_projected(&(phi - &self.phi_old)));
        g_phi.subtract_mean();
        let mut g_rho = convex_gradient_rho(phi, rho, p);
        g_rho.axpy(1.0, &self.f_rho);
        g_rho.axpy(scale, &self.spectral.inv_neg_laplacian_projected(&(rho - &self.rho_old)));
        g_rho.subtract_mean();
        (g_phi, g_rho)
    }
}

/// Linearization of `(delta_phi E_c, delta_rho E_c)` about a fixed state:
/// the Hessian of `E_c` divided by `h^2`, applied matrix-free.
#[derive(Debug, Clone)]
pub struct ConvexHessian {
    params: ModelParams,
    phi: CellField,
    rho: CellField,
    nmag: CellField,
    grad_phi: EdgeFieldPair,
    weight: EdgeFieldPair,
    quartic_curv: CellField,
    entropy_curv: CellField,
}

impl ConvexHessian {
    pub fn new(phi: &CellField, rho: &CellField, p: &ModelParams) -> Result<Self> {
        phi.grid().ensure_same(rho.grid())?;
        check_rho_domain(rho)?;
        let nmag = avg_grad_mag(phi, p.delta);
        let weight = edge_average(&rho.zip_map(&nmag, |r, m| 1.0 - r / m));
        Ok(ConvexHessian {
            params: *p,
            phi: phi.clone(),
            rho: rho.clone(),
            grad_phi: grad(phi),
            weight,
            quartic_curv: phi.map(|v| 3.0 * (v - 0.5) * (v - 0.5) / p.eps),
            entropy_curv: rho.map(|r| p.beta / (r * (1.0 - r))),
            nmag,
        })
    }

    pub fn rho(&self) -> &CellField {
        &self.rho
    }

    pub fn phi(&self) -> &CellField {
        &self.phi
    }

    /// Spatial means of the state-dependent coefficients that a
    /// constant-coefficient approximation can freeze:
    /// `(3/eps)(phi-1/2)^2`, the edge weight `1 - rho/N`, and `beta/(rho(1-rho))`.
    pub fn frozen_coefficients(&self) -> (f64, f64, f64) {
        let w = &self.weight;
        let n = w.x_values().len() as f64;
        let w_mean = (w.x_values().iter().sum::<f64>() + w.y_values().iter().sum::<f64>()) / (2.0 * n);
        (self.quartic_curv.mean(), w_mean, self.entropy_curv.mean())
    }

    /// Directional derivative of the convex gradient along `(u, v)`.
    pub fn apply(&self, u: &CellField, v: &CellField) -> (CellField, CellField) {
        let p = &self.params;
        let grad_u = grad(u);
        // dN = a(grad phi . grad u) / N
        let d_nmag = cell_average_of_edges(&self.grad_phi.product(&grad_u))
            .zip_map(&self.nmag, |s, m| s / m);
        // d(1 - rho/N) = -v/N + rho dN / N^2
        let mut d_w = v.zip_map(&self.nmag, |dv, m| -dv / m);
        for k in 0..d_w.values().len() {
            let m = self.nmag.values()[k];
            d_w.values_mut()[k] += self.rho.values()[k] * d_nmag.values()[k] / (m * m);
        }
        let coupling =
            div(&self.weight.product(&grad_u)).zip_map(
                &div(&edge_average(&d_w).product(&self.grad_phi)),
                |a, b| a + b,
            );
        let lap_u = laplacian(u);
        let bilap_u = laplacian(&lap_u);
        let stiff = p.eps + p.alpha / p.delta;
        let eta2 = p.eta * p.eta;
        let mut out_phi = u.zip_map(&self.quartic_curv, |a, c| a * c);
        for k in 0..out_phi.values().len() {
            out_phi.values_mut()[k] += -stiff * lap_u.values()[k] + eta2 * bilap_u.values()[k]
                - p.alpha * coupling.values()[k];
        }

        let lap_v = laplacian(v);
        let mut out_rho = v.zip_map(&self.entropy_curv, |a, c| a * c + SQRT_2 * p.alpha * a);
        for k in 0..out_rho.values().len() {
            out_rho.values_mut()[k] += -p.xi * lap_v.values()[k] - p.alpha * d_nmag.values()[k];
        }
        (out_phi, out_rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> GridSpec {
        GridSpec::new(n, l).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::spinodal(0.01).validate().is_ok());
        let mut p = ModelParams::accuracy_test(1e-3);
        p.xi = 0.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "xi", .. })));
        p.xi = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn avg_grad_mag_of_constant_is_delta() {
        let g = grid(8, 2.0);
        let m = avg_grad_mag(&CellField::constant(g, 0.3), 0.01);
        assert!(m.values().iter().all(|&v| v == 0.01));
    }

    #[test]
    fn avg_grad_mag_additive_in_delta_squared() {
        let g = grid(8, 2.0);
        let phi = CellField::from_fn(g, |x, y| (3.0 * x).sin() * (2.0 * y).cos());
        let a = avg_grad_mag(&phi, 0.01);
        let b = avg_grad_mag(&phi, 0.2);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(y > x);
            assert!(((y * y - x * x) - (0.04 - 0.0001)).abs() < 1e-14);
            assert!(*x >= 0.01);
        }
    }

    #[test]
    fn constant_state_energy() {
        let g = grid(16, 8.0);
        let p = ModelParams::accuracy_test(1e-3);
        let s = State::new(CellField::constant(g, 0.5), CellField::constant(g, 0.5)).unwrap();
        let e = energy(&s, &p).unwrap();
        let density = 1.0 / (64.0 * 0.05) + 0.0005 * 0.499f64.powi(2) + 0.02 * 0.5f64.ln();
        assert!((density - 0.2987616).abs() < 1e-6);
        assert!((e.total - 64.0 * density).abs() < 1e-12);
        assert!((e.total - 19.1207).abs() < 1e-4);
        assert!((e.total - (e.convex - e.concave)).abs() < 1e-12);
    }

    #[test]
    fn well_minima_have_no_double_well_energy() {
        let g = grid(8, 8.0);
        let p = ModelParams::accuracy_test(1e-3);
        for c in [0.0, 1.0] {
            let s = State::new(CellField::constant(g, c), CellField::constant(g, 0.5)).unwrap();
            assert_eq!(energy(&s, &p).unwrap().parts.double_well, 0.0);
        }
    }

    #[test]
    fn energy_rejects_rho_outside_unit_interval() {
        let g = grid(8, 1.0);
        let p = ModelParams::spinodal(0.01);
        let mut rho = CellField::constant(g, 0.5);
        rho[(3, 4)] = 1.0;
        let s = State {
            phi: CellField::zeros(g),
            rho,
            time: 0.0,
            step: 0,
        };
        assert!(matches!(energy(&s, &p), Err(Error::RhoDomain { i: 3, j: 4, .. })));
        assert!(State::new(s.phi.clone(), s.rho.clone()).is_err());
    }

    #[test]
    fn mu_phi_constant_states() {
        let g = grid(8, 8.0);
        let p = ModelParams::accuracy_test(1e-3);
        let half = CellField::constant(g, 0.5);
        let rho = CellField::constant(g, 0.3);
        assert!(mu_phi(&half, &rho, &half, &p).values().iter().all(|&v| v.abs() < 1e-15));
        let c = CellField::constant(g, 0.8);
        let mu = mu_phi(&c, &rho, &c, &p);
        assert!(mu.values().iter().all(|&v| (v + 0.96).abs() < 1e-12));
        let one = CellField::constant(g, 1.0);
        assert!(mu_phi(&one, &rho, &one, &p).values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn mu_rho_constant_states() {
        let g = grid(8, 8.0);
        let mut p = ModelParams::spinodal(0.01);
        p.alpha = 0.02;
        p.delta = 0.01;
        let phi = CellField::constant(g, 0.3);
        let half = CellField::constant(g, 0.5);
        let mu = mu_rho(&phi, &half, &half, &p).unwrap();
        assert!(mu.values().iter().all(|&v| (v - 0.0098).abs() < 1e-15));

        p.alpha = 1e-300;
        let mu = mu_rho(&phi, &half, &half, &p).unwrap();
        assert!(mu.values().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn mu_rho_domain_error() {
        let g = grid(4, 1.0);
        let p = ModelParams::spinodal(0.01);
        let mut rho = CellField::constant(g, 0.5);
        rho[(0, 0)] = 0.0;
        assert!(matches!(
            mu_rho(&CellField::zeros(g), &rho, &rho, &p),
            Err(Error::RhoDomain { .. })
        ));
    }

    #[test]
    fn constant_states_are_discrete_steady_states() {
        let g = grid(8, 2.0);
        let p = ModelParams::spinodal(0.1);
        for (c1, c2) in [(0.5, 0.5), (0.13, 0.92), (-0.4, 0.01)] {
            let s = State::new(CellField::constant(g, c1), CellField::constant(g, c2)).unwrap();
            let (fp, fr) = scheme_residual(&s, &s, &p).unwrap();
            assert!(fp.values().iter().chain(fr.values()).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn merit_rejects_mass_change() {
        let g = grid(8, 2.0);
        let p = ModelParams::spinodal(0.1);
        let old = State::new(CellField::constant(g, 0.4), CellField::constant(g, 0.4)).unwrap();
        let shifted = CellField::constant(g, 0.41);
        assert!(matches!(
            merit(&shifted, &old.rho, &old, &p),
            Err(Error::MeanMismatch { field: "phi", .. })
        ));
        assert!(merit(&old.phi, &old.rho, &old, &p).is_ok());
    }
}
