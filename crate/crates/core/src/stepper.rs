//! Damped Newton solver for one step of the convex-splitting scheme.
//!
//! The scheme residual factors as `F = M (-Delta_h) g` where `g` is the
//! mean-free gradient of the merit functional `J^n`. Newton corrections are
//! therefore computed from the symmetric positive definite system
//!
//! ```text
//! [ (-Delta_h)^{-1} / (M dt) + P0 D^2 E_c ] d = -g      on mean-zero fields,
//! ```
//!
//! which has the same solution as `J_F d = -F`. It is solved by conjugate
//! gradients, preconditioned by a Fourier-diagonal constant-coefficient
//! approximation. Steps are shortened by a fraction-to-boundary rule that
//! keeps `0 < rho < 1` and then backtracked on `J^n`.

use crate::energy::{
    check_rho_domain, energy, scheme_residual, ConvexHessian, EnergyBreakdown, Merit, ModelParams,
    State,
};
use crate::error::{Error, IterateRecord, Result};
use crate::field::{laplacian, CellField, GridSpec, Spectral};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Target for the combined grid `l2` norm of `(F_phi, F_rho)`.
    /// `None` means `1e-10 * |Omega|^(1/2)`.
    pub newton_tol: Option<f64>,
    pub newton_max_iter: usize,
    /// Relative residual for the inner linear solve; tightened to
    /// `0.1 * ||F||` near convergence.
    pub linear_tol: f64,
    pub boundary_fraction: f64,
    pub damping_min: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: None,
            newton_max_iter: 50,
            linear_tol: 1e-4,
            boundary_fraction: 0.9,
            damping_min: 1e-4,
            linear_max_iter: 500,
        }
    }
}

impl SolverConfig {
    pub fn tolerance(&self, grid: &GridSpec) -> f64 {
        self.newton_tol.unwrap_or(1e-10 * grid.area().sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, reason| Err(Error::InvalidParameter { name, value, reason });
        if let Some(t) = self.newton_tol {
            if !(t.is_finite() && t > 0.0) {
                return bad("newton_tol", t, "must be finite and positive");
            }
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter", 0.0, "must be at least 1");
        }
        if self.linear_max_iter == 0 {
            return bad("linear_max_iter", 0.0, "must be at least 1");
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad("linear_tol", self.linear_tol, "must lie in (0, 1)");
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return bad("boundary_fraction", self.boundary_fraction, "must lie in (0, 1)");
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return bad("damping_min", self.damping_min, "must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub energy: EnergyBreakdown,
    /// `h^2 sum phi`
    pub mass_phi: f64,
    pub mass_rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub phi_max_abs: f64,
    pub newton_iters: usize,
    pub final_residual: f64,
    /// Smallest step length accepted during the solve (1 if undamped).
    pub damping_used: f64,
    /// Extremes of `rho` over every Newton iterate, accepted state included.
    pub iterate_rho_min: f64,
    pub iterate_rho_max: f64,
}

impl StepDiagnostics {
    /// Diagnostics of a state that was not produced by a solve.
    pub fn of_state(state: &State, p: &ModelParams) -> Result<Self> {
        let e = energy(state, p)?;
        Ok(StepDiagnostics {
            energy: e,
            mass_phi: state.phi.sum() * state.grid().cell_area(),
            mass_rho: state.rho.sum() * state.grid().cell_area(),
            rho_min: state.rho.min(),
            rho_max: state.rho.max(),
            phi_max_abs: state.phi.max_abs(),
            newton_iters: 0,
            final_residual: 0.0,
            damping_used: 1.0,
            iterate_rho_min: state.rho.min(),
            iterate_rho_max: state.rho.max(),
        })
    }
}

/// Outcome of a converged Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub state: State,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
    pub history: Vec<IterateRecord>,
}

/// Largest admissible step `min(1, tau * theta_max)`, where `theta_max` is
/// the distance along `d_rho` to the boundary of `(0, 1)`.
pub fn safeguard_fraction(rho: &CellField, d_rho: &CellField, tau: f64) -> f64 {
    let theta_max = rho
        .values()
        .iter()
        .zip(d_rho.values())
        .map(|(&r, &d)| {
            if d > 0.0 {
                (1.0 - r) / d
            } else if d < 0.0 {
                r / -d
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    (tau * theta_max).min(1.0)
}

/// Directional derivative of the scheme residual at `base` along `(u, v)`.
pub fn jacobian_apply(
    base: &State,
    _old: &State,
    p: &ModelParams,
    direction: (&CellField, &CellField),
) -> Result<(CellField, CellField)> {
    let hess = ConvexHessian::new(&base.phi, &base.rho, p)?;
    let (u, v) = direction;
    let (hu, hv) = hess.apply(u, v);
    let lin = |d: &CellField, h: &CellField| {
        let lap = laplacian(h);
        d.zip_map(&lap, |a, l| a / p.dt - p.mobility * l)
    };
    Ok((lin(u, &hu), lin(v, &hv)))
}

/// Combined grid `l2` norm of a residual pair.
pub fn residual_norm(f: &(CellField, CellField)) -> f64 {
    let h2 = f.0.grid().cell_area();
    let s: f64 = f.0.values().iter().chain(f.1.values()).map(|v| v * v).sum();
    (h2 * s).sqrt()
}

type Pair = (CellField, CellField);

fn dot(a: &Pair, b: &Pair) -> f64 {
    let s = |x: &CellField, y: &CellField| -> f64 {
        x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum()
    };
    s(&a.0, &b.0) + s(&a.1, &b.1)
}

fn axpy(y: &mut Pair, a: f64, x: &Pair) {
    y.0.axpy(a, &x.0);
    y.1.axpy(a, &x.1);
}

const ARMIJO: f64 = 1e-4;
/// Relative size below which a merit change is indistinguishable from
/// round-off in its evaluation.
const MERIT_FLOOR: f64 = 1e-12;

/// Per-simulation solver: owns the FFT plans for one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    cfg: SolverConfig,
    spectral: Spectral,
}

impl Stepper {
    pub fn new(grid: GridSpec, params: ModelParams, cfg: SolverConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        Ok(Stepper {
            params,
            cfg,
            spectral: Spectral::new(grid),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        self.spectral.grid()
    }

    /// One time step from `old`, with invariant checks on the result.
    pub fn advance(&self, old: &State) -> Result<(State, StepDiagnostics)> {
        old.grid().ensure_same(self.grid())?;
        old.validate()?;
        let before = energy(old, &self.params)?;
        let report = self.newton_solve(old, old)?;
        let mut state = report.state;
        state.time = old.time + self.params.dt;
        state.step = old.step + 1;

        let mut diag = StepDiagnostics::of_state(&state, &self.params)?;
        diag.newton_iters = report.iterations;
        diag.final_residual = report.residual;
        diag.damping_used = report.damping;
        for rec in &report.history {
            diag.iterate_rho_min = diag.iterate_rho_min.min(rec.rho_min);
            diag.iterate_rho_max = diag.iterate_rho_max.max(rec.rho_max);
        }

        let step = state.step;
        let e = diag.energy.total;
        if e > before.total + 1e-9 * (1.0 + e.abs()) {
            return Err(Error::Invariant {
                step,
                what: format!("energy increased from {:e} to {e:e}", before.total),
            });
        }
        for (name, new, prev) in [("phi", &state.phi, &old.phi), ("rho", &state.rho, &old.rho)] {
            let drift = (new.mean() - prev.mean()).abs();
            if drift > 1e-12 * self.grid().area() {
                return Err(Error::Invariant {
                    step,
                    what: format!("mean of {name} drifted by {drift:e}"),
                });
            }
        }
        if !(diag.rho_min > 0.0 && diag.rho_max < 1.0) {
            return Err(Error::Invariant {
                step,
                what: format!("rho range [{}, {}] left (0, 1)", diag.rho_min, diag.rho_max),
            });
        }
        Ok((state, diag))
    }

    /// Solves the scheme for the new level starting from `guess`.
    pub fn newton_solve(&self, guess: &State, old: &State) -> Result<NewtonReport> {
        let p = &self.params;
        let cfg = &self.cfg;
        guess.grid().ensure_same(self.grid())?;
        old.grid().ensure_same(self.grid())?;
        check_rho_domain(&guess.rho)?;
        let tol = cfg.tolerance(self.grid());
        let h2 = self.grid().cell_area();
        let merit = Merit::with_spectral(old, p, self.spectral.clone());

        let mut cur = State {
            phi: guess.phi.clone(),
            rho: guess.rho.clone(),
            time: guess.time,
            step: guess.step,
        };
        let mut res = residual_norm(&scheme_residual(&cur, old, p)?);
        let mut history = vec![IterateRecord {
            iteration: 0,
            residual: res,
            damping: 1.0,
            rho_min: cur.rho.min(),
            rho_max: cur.rho.max(),
        }];
        let mut damping = 1.0f64;
        let mut iterations = 0;

        while res > tol {
            if iterations == cfg.newton_max_iter {
                return Err(Error::NewtonDivergence {
                    tol,
                    iterations,
                    last: res,
                    history,
                });
            }
            iterations += 1;

            let hess = ConvexHessian::new(&cur.phi, &cur.rho, p)?;
            let g = merit.gradient(&cur.phi, &cur.rho);
            let rhs = (-&g.0, -&g.1);
            let rtol = cfg.linear_tol.min(0.1 * res);
            let mut d = self.solve_linear(&hess, &rhs, rtol);
            d.0.subtract_mean();
            d.1.subtract_mean();

            let slope = h2 * dot(&g, &d);
            let j0 = merit.value(&cur.phi, &cur.rho);
            let mut theta = safeguard_fraction(&cur.rho, &d.1, cfg.boundary_fraction);
            let (next, next_res) = loop {
                if theta < cfg.damping_min {
                    return Err(Error::StepDamped {
                        min: cfg.damping_min,
                        iteration: iterations,
                        history,
                    });
                }
                let mut phi = cur.phi.clone();
                phi.axpy(theta, &d.0);
                let mut rho = cur.rho.clone();
                rho.axpy(theta, &d.1);
                if check_rho_domain(&rho).is_ok() {
                    let j1 = merit.value(&phi, &rho);
                    let trial = State { phi, rho, ..cur.clone() };
                    let r1 = residual_norm(&scheme_residual(&trial, old, p)?);
                    let armijo = j1 <= j0 + ARMIJO * theta * slope;
                    let flat = (j1 - j0).abs() <= MERIT_FLOOR * (1.0 + j0.abs()) && r1 < res;
                    if j1.is_finite() && (armijo || flat) {
                        break (trial, r1);
                    }
                }
                theta *= 0.5;
            };
            damping = damping.min(theta);
            cur = next;
            res = next_res;
            history.push(IterateRecord {
                iteration: iterations,
                residual: res,
                damping: theta,
                rho_min: cur.rho.min(),
                rho_max: cur.rho.max(),
            });
        }
        Ok(NewtonReport {
            state: cur,
            iterations,
            residual: res,
            damping,
            history,
        })
    }

    /// Applies the symmetrized Newton operator to a mean-zero pair.
    fn apply_operator(&self, hess: &ConvexHessian, x: &Pair) -> Pair {
        let p = &self.params;
        let scale = 1.0 / (p.mobility * p.dt);
        let (mut a, mut b) = hess.apply(&x.0, &x.1);
        a.axpy(scale, &self.spectral.inv_neg_laplacian_projected(&x.0));
        b.axpy(scale, &self.spectral.inv_neg_laplacian_projected(&x.1));
        a.subtract_mean();
        b.subtract_mean();
        (a, b)
    }

    /// Inverse of the constant-coefficient model of the Newton operator,
    /// with state-dependent coefficients frozen at their spatial means.
    fn preconditioner(&self, hess: &ConvexHessian) -> impl Fn(&Pair) -> Pair + '_ {
        let p = self.params;
        let (quartic, w_mean, entropy) = hess.frozen_coefficients();
        let mdt = p.mobility * p.dt;
        let phi_c0 = quartic;
        let phi_c1 = (p.eps + p.alpha / p.delta + p.alpha * w_mean).max(p.eps);
        let phi_c2 = p.eta * p.eta;
        let rho_c0 = std::f64::consts::SQRT_2 * p.alpha + entropy;
        let rho_c1 = p.xi;
        move |r: &Pair| {
            // 1 / (1/(M dt lam) + c(lam)) written to vanish on the zero mode
            let phi = self.spectral.apply_symbol(&r.0, |lam| {
                mdt * lam / (1.0 + mdt * lam * (phi_c0 + lam * (phi_c1 + lam * phi_c2)))
            });
            let rho = self
                .spectral
                .apply_symbol(&r.1, |lam| mdt * lam / (1.0 + mdt * lam * (rho_c0 + lam * rho_c1)));
            (phi, rho)
        }
    }

    /// Preconditioned conjugate gradients on the mean-zero subspace.
    ///
    /// The recursive residual bottoms out at a round-off floor set by
    /// cancellation in the stiff operator; iteration stops there and the
    /// best iterate seen is returned.
    fn solve_linear(&self, hess: &ConvexHessian, b: &Pair, rtol: f64) -> Pair {
        let grid = *self.grid();
        let mut x = (CellField::zeros(grid), CellField::zeros(grid));
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return x;
        }
        let precond = self.preconditioner(hess);
        let mut r = b.clone();
        r.0.subtract_mean();
        r.1.subtract_mean();
        let mut z = precond(&r);
        let mut rz = dot(&r, &z);
        let mut dir = z.clone();
        let mut best = (b_norm, x.clone());
        let mut stalled = 0;
        for _ in 0..self.cfg.linear_max_iter {
            let q = self.apply_operator(hess, &dir);
            let curv = dot(&dir, &q);
            if !(curv > 0.0 && rz > 0.0) {
                break;
            }
            let a = rz / curv;
            axpy(&mut x, a, &dir);
            axpy(&mut r, -a, &q);
            r.0.subtract_mean();
            r.1.subtract_mean();
            let r_norm = dot(&r, &r).sqrt();
            if r_norm < best.0 {
                stalled = if r_norm < 0.5 * best.0 { 0 } else { stalled + 1 };
                best = (r_norm, x.clone());
            } else {
                stalled += 1;
            }
            if r_norm <= rtol * b_norm || stalled >= 5 {
                break;
            }
            z = precond(&r);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            dir.0 = z.0.zip_map(&dir.0, |zi, di| zi + beta * di);
            dir.1 = z.1.zip_map(&dir.1, |zi, di| zi + beta * di);
        }
        best.1
    }
}

/// One step with a freshly planned [`Stepper`].
pub fn advance(old: &State, p: &ModelParams, cfg: &SolverConfig) -> Result<(State, StepDiagnostics)> {
    Stepper::new(*old.grid(), *p, *cfg)?.advance(old)
}

pub fn newton_solve(
    guess: &State,
    old: &State,
    p: &ModelParams,
    cfg: &SolverConfig,
) -> Result<State> {
    Ok(Stepper::new(*old.grid(), *p, *cfg)?.newton_solve(guess, old)?.state)
}
