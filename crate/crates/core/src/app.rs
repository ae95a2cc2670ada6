//! Run orchestration behind the command line: writes the manifest, drives
//! the selected experiment and streams its outputs to disk.

use std::path::Path;

use crate::energy::State;
use crate::error::{Error, Result};
use crate::experiments::{
    continue_run, convergence_study, init_random, init_trig, spinodal_run, RunEvent, RANDOM_AMP,
    RANDOM_BASE,
};
use crate::io::config::{parse_config_named, Mode, RunManifest};
use crate::io::files::{
    checkpoint_path, snapshot_path, write_checkpoint, write_convergence, write_snapshot, Checkpoint,
    EnergyLog,
};
use crate::io::read_checkpoint;
use crate::stepper::{StepDiagnostics, Stepper};
use crate::verify::run_suite;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const ENERGY_FILE: &str = "energy.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const VERIFY_FILE: &str = "verify.txt";

/// Coarsest level of the refinement study.
pub const CONVERGENCE_BASE: usize = 16;

/// Human-readable summary and overall verdict of a run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub success: bool,
}

fn prepare(manifest: &RunManifest) -> Result<()> {
    let dir = &manifest.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))
}

/// Writes `manifest.txt` and runs the mode it selects.
pub fn execute(manifest: &RunManifest) -> Result<Outcome> {
    prepare(manifest)?;
    match manifest.mode {
        Mode::Spinodal => run_long(manifest, None),
        Mode::Convergence => run_convergence(manifest),
        Mode::SingleStep => run_single_step(manifest),
        Mode::PropertySuite => {
            let checks = run_suite(&manifest.params, manifest.grid.n(), manifest.seed);
            let path = manifest.output_dir.join(VERIFY_FILE);
            let lines: Vec<String> = checks.iter().map(|c| c.to_string()).collect();
            std::fs::write(&path, lines.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
            Ok(Outcome {
                success: checks.iter().all(|c| c.passed),
                lines,
            })
        }
    }
}

/// Continues a long run from a checkpoint written into its output directory.
pub fn resume(checkpoint: &Path) -> Result<Outcome> {
    let ck = read_checkpoint(checkpoint)?;
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut manifest = parse_config_named(&text, &manifest_path.display().to_string())?;
    manifest.output_dir = dir.to_path_buf();
    if manifest.hash() != ck.manifest_hash {
        return Err(Error::ManifestMismatch {
            expected: manifest.hash(),
            found: ck.manifest_hash,
        });
    }
    if manifest.mode != Mode::Spinodal {
        return Err(Error::Range {
            key: "mode".into(),
            msg: format!("only spinodal runs can be resumed, not {}", manifest.mode.as_str()),
        });
    }
    run_long(&manifest, Some(ck.state))
}

fn save_snapshot(dir: &Path, hash: &str, t: f64, state: &State) -> Result<()> {
    write_snapshot(&snapshot_path(dir, "phi", t), &state.phi, state.time)?;
    write_snapshot(&snapshot_path(dir, "rho", t), &state.rho, state.time)?;
    write_checkpoint(
        &checkpoint_path(dir, Some(t)),
        &Checkpoint {
            manifest_hash: hash.to_string(),
            state: state.clone(),
        },
    )
}

fn run_long(manifest: &RunManifest, start: Option<State>) -> Result<Outcome> {
    let dir = manifest.output_dir.clone();
    let hash = manifest.hash();
    let cfg = manifest.run_config();
    let energy_path = dir.join(ENERGY_FILE);
    let mut log = match &start {
        Some(s) => EnergyLog::resume(&energy_path, s.step)?,
        None => EnergyLog::create(&energy_path)?,
    };
    let mut worst_rho = (f64::INFINITY, f64::NEG_INFINITY);
    let mut max_iters = 0;
    let observer = |ev: RunEvent<'_>| -> Result<()> {
        match ev {
            RunEvent::Step { state, diag } => {
                worst_rho.0 = worst_rho.0.min(diag.iterate_rho_min);
                worst_rho.1 = worst_rho.1.max(diag.iterate_rho_max);
                max_iters = max_iters.max(diag.newton_iters);
                log.push(state.step, state.time, diag)
            }
            RunEvent::Snapshot {
                requested_time,
                state,
            } => {
                eprintln!("t = {requested_time}: snapshot at step {}", state.step);
                save_snapshot(&dir, &hash, requested_time, state)
            }
        }
    };
    let final_state = match start {
        Some(s) => continue_run(&cfg, s, observer)?,
        None => spinodal_run(&cfg, observer)?,
    };
    write_checkpoint(
        &checkpoint_path(&dir, None),
        &Checkpoint {
            manifest_hash: hash,
            state: final_state.clone(),
        },
    )?;
    let last = StepDiagnostics::of_state(&final_state, &manifest.params)?;
    Ok(Outcome {
        lines: vec![
            format!("finished step {} at t = {}", final_state.step, final_state.time),
            format!("final energy {:e}", last.energy.total),
            format!("rho range over all iterates [{}, {}]", worst_rho.0, worst_rho.1),
            format!("most Newton iterations in one step: {max_iters}"),
            format!("outputs in {}", dir.display()),
        ],
        success: true,
    })
}

fn run_convergence(manifest: &RunManifest) -> Result<Outcome> {
    let n_max = manifest.grid.n();
    let mut levels = vec![CONVERGENCE_BASE];
    while *levels.last().unwrap() < n_max {
        levels.push(2 * levels.last().unwrap());
    }
    if levels.len() < 2 || *levels.last().unwrap() != n_max {
        return Err(Error::Range {
            key: "n_cells".into(),
            msg: format!("convergence mode needs n_cells = {CONVERGENCE_BASE} * 2^k with k >= 1"),
        });
    }
    let h0 = manifest.grid.length() / CONVERGENCE_BASE as f64;
    let c_refine = manifest.params.dt / (h0 * h0);
    let rows = convergence_study(
        &levels,
        c_refine,
        manifest.t_final,
        &manifest.params,
        &manifest.solver,
    )?;
    write_convergence(&manifest.output_dir.join(CONVERGENCE_FILE), &rows)?;
    let rate = |r: Option<f64>| r.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    let mut lines = vec![format!("{:>6} {:>12} {:>6} {:>12} {:>6}", "N", "err(phi)", "rate", "err(rho)", "rate")];
    for r in &rows {
        lines.push(format!(
            "{:>6} {:>12.3e} {:>6} {:>12.3e} {:>6}",
            r.grid_n,
            r.error_phi,
            rate(r.rate_phi),
            r.error_rho,
            rate(r.rate_rho)
        ));
    }
    Ok(Outcome {
        lines,
        success: true,
    })
}

fn run_single_step(manifest: &RunManifest) -> Result<Outcome> {
    let dir = &manifest.output_dir;
    let start = if manifest.grid.length() == 8.0 {
        init_trig(manifest.grid)?
    } else {
        init_random(manifest.grid, manifest.seed, RANDOM_BASE, RANDOM_AMP)?
    };
    let stepper = Stepper::new(manifest.grid, manifest.params, manifest.solver)?;
    let mut log = EnergyLog::create(&dir.join(ENERGY_FILE))?;
    log.push(0, 0.0, &StepDiagnostics::of_state(&start, &manifest.params)?)?;
    let (next, diag) = stepper.advance(&start)?;
    log.push(next.step, next.time, &diag)?;
    let hash = manifest.hash();
    save_snapshot(dir, &hash, 0.0, &start)?;
    save_snapshot(dir, &hash, next.time, &next)?;
    Ok(Outcome {
        lines: vec![
            format!(
                "energy {:e} -> {:e}",
                StepDiagnostics::of_state(&start, &manifest.params)?.energy.total,
                diag.energy.total
            ),
            format!(
                "{} Newton iterations, residual {:e}, damping {}",
                diag.newton_iters, diag.final_residual, diag.damping_used
            ),
        ],
        success: true,
    })
}
