//! Initial data, grid transfer, the refinement study and the long-run
//! driver used by the command line.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{ModelParams, State};
use crate::error::{Error, Result};
use crate::field::{norm, CellField, GridSpec, NormKind};
use crate::stepper::{SolverConfig, StepDiagnostics, Stepper};

/// Smooth test data on `(0, 8)^2`:
/// `phi = 0.5 + 0.2 cos(pi x/2) cos(pi y/2)`, `rho = 0.5 + 0.2 sin(pi x/2) sin(pi y/2)`.
pub fn init_trig(grid: GridSpec) -> Result<State> {
    if grid.length() != 8.0 {
        return Err(Error::InvalidParameter {
            name: "length",
            value: grid.length(),
            reason: "the trigonometric test data is defined on (0, 8)^2",
        });
    }
    let k = std::f64::consts::PI / 2.0;
    let phi = CellField::from_fn(grid, |x, y| 0.5 + 0.2 * (k * x).cos() * (k * y).cos());
    let rho = CellField::from_fn(grid, |x, y| 0.5 + 0.2 * (k * x).sin() * (k * y).sin());
    State::new(phi, rho)
}

/// Defaults of the spinodal initial data, `base + amp * rand`.
pub const RANDOM_BASE: f64 = 0.4;
pub const RANDOM_AMP: f64 = 0.1;

/// Near-uniform random data `base + amp * r` with `r` uniform on `[-1, 1]`
/// shifted to zero mean.
///
/// Both fields come from ChaCha8 seeded with `seed`: stream 0 for `phi`,
/// stream 1 for `rho`, filled in row-major order.
pub fn init_random(grid: GridSpec, seed: u64, base: f64, amp: f64) -> Result<State> {
    if !(amp >= 0.0 && base - amp > 0.0 && base + amp < 1.0) {
        return Err(Error::InvalidParameter {
            name: "amp",
            value: amp,
            reason: "base - amp and base + amp must lie in (0, 1)",
        });
    }
    let field = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut r = CellField::from_index_fn(grid, |_, _| rng.random_range(-1.0..=1.0));
        r.subtract_mean();
        r.map(|v| base + amp * v)
    };
    State::new(field(0), field(1))
}

/// Cell-centered bilinear interpolation onto the grid with twice as many
/// cells per side. Each fine cell takes 9/16, 3/16, 3/16, 1/16 from its four
/// nearest coarse centers.
pub fn prolong_bilinear(coarse: &CellField, fine: &GridSpec) -> Result<CellField> {
    let want = coarse.grid().refined();
    if *fine != want {
        return Err(Error::SizeMismatch(format!(
            "prolongation from {} cells needs a target of {} cells, got {}",
            coarse.grid().n(),
            want.n(),
            fine.n()
        )));
    }
    // (near coarse index offset, far coarse index offset) for fine index parity
    let taps = |fi: usize| -> (isize, isize) {
        let c = (fi / 2) as isize;
        if fi.is_multiple_of(2) {
            (c, c - 1)
        } else {
            (c, c + 1)
        }
    };
    Ok(CellField::from_index_fn(*fine, |fi, fj| {
        let (i0, i1) = taps(fi);
        let (j0, j1) = taps(fj);
        (9.0 * coarse.at(i0, j0) + 3.0 * coarse.at(i1, j0) + 3.0 * coarse.at(i0, j1) + coarse.at(i1, j1))
            / 16.0
    }))
}

/// `(||phi_f - I phi_c||, ||rho_f - I rho_c||)` in the discrete `l2` norm of
/// the fine grid.
pub fn cauchy_error(fine: &State, coarse: &State) -> Result<(f64, f64)> {
    if (fine.time - coarse.time).abs() > 1e-12 * fine.time.abs().max(1.0) {
        return Err(Error::TimeMismatch {
            fine: fine.time,
            coarse: coarse.time,
        });
    }
    let g = fine.grid();
    let d_phi = &fine.phi - &prolong_bilinear(&coarse.phi, g)?;
    let d_rho = &fine.rho - &prolong_bilinear(&coarse.rho, g)?;
    Ok((norm(&d_phi, NormKind::L2)?, norm(&d_rho, NormKind::L2)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub grid_n: usize,
    pub error_phi: f64,
    /// `log2` of the previous row's error over this one; `None` on the first row.
    pub rate_phi: Option<f64>,
    pub error_rho: f64,
    pub rate_rho: Option<f64>,
}

/// Runs `state` forward `steps` steps.
pub fn run_steps(stepper: &Stepper, mut state: State, steps: usize) -> Result<State> {
    for _ in 0..steps {
        state = stepper.advance(&state)?.0;
    }
    Ok(state)
}

/// Number of steps of size `dt` covering `t_final`, rejecting ratios that
/// are not within round-off of an integer.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    let ratio = t_final / dt;
    let steps = ratio.round();
    if !(steps >= 0.0 && (ratio - steps).abs() <= 1e-6 * steps.max(1.0)) {
        return Err(Error::InvalidParameter {
            name: "t_final",
            value: t_final,
            reason: "must be an integer multiple of the time step",
        });
    }
    Ok(steps as usize)
}

/// Solves the smooth test problem on each level with `dt = c_refine h^2`
/// and compares consecutive levels. Each row is labelled by the finer grid
/// of its pair; levels run concurrently.
pub fn convergence_study(
    levels: &[usize],
    c_refine: f64,
    t_final: f64,
    p: &ModelParams,
    cfg: &SolverConfig,
) -> Result<Vec<ConvergenceRow>> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParameter {
            name: "levels",
            value: levels.len() as f64,
            reason: "need at least two strictly doubling grid sizes",
        });
    }
    let finals: Vec<Result<State>> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .iter()
            .map(|&n| {
                scope.spawn(move || -> Result<State> {
                    let grid = GridSpec::new(n, 8.0)?;
                    let h = grid.spacing();
                    let dt = c_refine * h * h;
                    let steps = step_count(t_final, dt)?;
                    let stepper = Stepper::new(grid, p.with_dt(dt), *cfg)?;
                    run_steps(&stepper, init_trig(grid)?, steps)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence level panicked"))
            .collect()
    });
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len() - 1);
    for (k, pair) in finals.windows(2).enumerate() {
        // step counts differ per level, so compare at the nominal time
        let (mut fine, mut coarse) = (pair[1].clone(), pair[0].clone());
        fine.time = t_final;
        coarse.time = t_final;
        let (ep, er) = cauchy_error(&fine, &coarse)?;
        let prev = rows.last();
        rows.push(ConvergenceRow {
            grid_n: levels[k + 1],
            error_phi: ep,
            rate_phi: prev.map(|r| (r.error_phi / ep).log2()),
            error_rho: er,
            rate_rho: prev.map(|r| (r.error_rho / er).log2()),
        });
    }
    Ok(rows)
}

/// Everything that determines a long run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub base: f64,
    pub amp: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Spinodal-decomposition setup on `(0, 2 pi)^2`.
    pub fn spinodal(n: usize, dt: f64, t_final: f64, seed: u64) -> Result<Self> {
        Ok(RunConfig {
            grid: GridSpec::new(n, 2.0 * std::f64::consts::PI)?,
            params: ModelParams::spinodal(dt),
            solver: SolverConfig::default(),
            t_final,
            snapshot_times: Vec::new(),
            seed,
            base: RANDOM_BASE,
            amp: RANDOM_AMP,
            output_dir: PathBuf::from("out"),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        step_count(self.t_final, self.params.dt)?;
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::InvalidParameter {
                    name: "snapshot_times",
                    value: t,
                    reason: "snapshot times must lie in [0, t_final]",
                });
            }
        }
        Ok(())
    }

    /// `(step, requested time)` of each snapshot, sorted by step.
    pub fn snapshot_steps(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .snapshot_times
            .iter()
            .map(|&t| ((t / self.params.dt).round() as usize, t))
            .collect();
        out.sort_by_key(|s| s.0);
        out.dedup_by_key(|s| s.0);
        out
    }
}

/// Callback payloads of [`continue_run`].
#[derive(Debug)]
pub enum RunEvent<'a> {
    Step {
        state: &'a State,
        diag: &'a StepDiagnostics,
    },
    Snapshot {
        requested_time: f64,
        state: &'a State,
    },
}

/// Starts a run from [`init_random`]; emits the step-0 diagnostics and any
/// snapshots at time 0 before stepping.
pub fn spinodal_run(
    cfg: &RunConfig,
    mut observer: impl FnMut(RunEvent<'_>) -> Result<()>,
) -> Result<State> {
    cfg.validate()?;
    let start = init_random(cfg.grid, cfg.seed, cfg.base, cfg.amp)?;
    let diag = StepDiagnostics::of_state(&start, &cfg.params)?;
    observer(RunEvent::Step {
        state: &start,
        diag: &diag,
    })?;
    for &(step, t) in &cfg.snapshot_steps() {
        if step == 0 {
            observer(RunEvent::Snapshot {
                requested_time: t,
                state: &start,
            })?;
        }
    }
    continue_run(cfg, start, observer)
}

/// Advances `state` until `t_final`, reporting every step and every
/// snapshot after `state.step`.
pub fn continue_run(
    cfg: &RunConfig,
    mut state: State,
    mut observer: impl FnMut(RunEvent<'_>) -> Result<()>,
) -> Result<State> {
    cfg.validate()?;
    let total = step_count(cfg.t_final, cfg.params.dt)?;
    let snaps = cfg.snapshot_steps();
    let stepper = Stepper::new(cfg.grid, cfg.params, cfg.solver)?;
    while state.step < total {
        let (next, diag) = stepper.advance(&state)?;
        state = next;
        observer(RunEvent::Step {
            state: &state,
            diag: &diag,
        })?;
        for &(step, t) in &snaps {
            if step == state.step {
                observer(RunEvent::Snapshot {
                    requested_time: t,
                    state: &state,
                })?;
            }
        }
    }
    Ok(state)
}
