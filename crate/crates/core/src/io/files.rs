//! Text formats for fields, checkpoints and time series. Reals are written
//! in shortest round-trip form so every file reads back bit-exactly.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::energy::State;
use crate::error::{Error, Result};
use crate::experiments::ConvergenceRow;
use crate::field::{CellField, GridSpec};
use crate::stepper::StepDiagnostics;

pub const ENERGY_HEADER: &str =
    "step,time,E_total,E_convex,E_concave,mass_phi,mass_rho,rho_min,rho_max,newton_iters,residual";
pub const CONVERGENCE_HEADER: &str = "grid_n,error_phi,rate_phi,error_rho,rate_rho";

/// File-name form of a time: `0.5 -> "0.5"`, `40 -> "40"`.
pub fn time_label(t: f64) -> String {
    format!("{t}")
}

pub fn snapshot_path(dir: &Path, field: &str, t: f64) -> PathBuf {
    dir.join(format!("{field}_t{}.dat", time_label(t)))
}

pub fn checkpoint_path(dir: &Path, t: Option<f64>) -> PathBuf {
    match t {
        Some(t) => dir.join(format!("checkpoint_t{}.chk", time_label(t))),
        None => dir.join("checkpoint.chk"),
    }
}

fn write_rows(out: &mut impl Write, field: &CellField) -> std::io::Result<()> {
    let n = field.grid().n();
    for row in field.values().chunks(n) {
        let mut line = String::with_capacity(row.len() * 24);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Header `N L time`, then `N` lines of `N` values; line `i` holds the
/// cells with x index `i`.
pub fn write_snapshot(path: &Path, field: &CellField, time: f64) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let g = field.grid();
    writeln!(out, "{} {:e} {:e}", g.n(), g.length(), time).map_err(io)?;
    write_rows(&mut out, field).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_snapshot(path: &Path) -> Result<(CellField, f64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = numbered_lines(path, BufReader::new(file));
    let (line, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty snapshot"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(path, line, "header must be `N L time`"));
    }
    let n: usize = parse_num(path, line, parts[0])?;
    let length: f64 = parse_num(path, line, parts[1])?;
    let time: f64 = parse_num(path, line, parts[2])?;
    let grid = GridSpec::new(n, length)?;
    let field = read_rows(path, &mut lines, grid)?;
    Ok((field, time))
}

type Lines<'a> = Box<dyn Iterator<Item = Result<(usize, String)>> + 'a>;

fn numbered_lines<'a>(path: &'a Path, reader: impl BufRead + 'a) -> Lines<'a> {
    Box::new(
        reader
            .lines()
            .enumerate()
            .map(move |(i, l)| l.map(|s| (i + 1, s)).map_err(|e| Error::io(path, e))),
    )
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| parse_err(path, line, &format!("bad number `{s}`: {e}")))
}

fn read_rows(path: &Path, lines: &mut Lines<'_>, grid: GridSpec) -> Result<CellField> {
    let n = grid.n();
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..n {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, "unexpected end of file in field data"))??;
        let before = values.len();
        for tok in text.split_whitespace() {
            values.push(parse_num::<f64>(path, line, tok)?);
        }
        if values.len() - before != n {
            return Err(parse_err(path, line, &format!("expected {n} values")));
        }
    }
    CellField::from_values(grid, values)
}

/// Full state plus the hash of the manifest that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest_hash: String,
    pub state: State,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let s = &ck.state;
    let g = s.grid();
    writeln!(out, "# surfactant-pf checkpoint").map_err(io)?;
    writeln!(out, "manifest_sha256 = {}", ck.manifest_hash).map_err(io)?;
    writeln!(out, "step = {}", s.step).map_err(io)?;
    writeln!(out, "time = {:e}", s.time).map_err(io)?;
    writeln!(out, "n_cells = {}", g.n()).map_err(io)?;
    writeln!(out, "length = {:e}", g.length()).map_err(io)?;
    writeln!(out, "phi").map_err(io)?;
    write_rows(&mut out, &s.phi).map_err(io)?;
    writeln!(out, "rho").map_err(io)?;
    write_rows(&mut out, &s.rho).map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = numbered_lines(path, BufReader::new(file));
    let mut header = std::collections::HashMap::new();
    let mut last_line = 0;
    loop {
        let (line, text) = lines
            .next()
            .ok_or_else(|| parse_err(path, last_line, "missing field data"))??;
        last_line = line;
        let t = text.trim();
        if t.starts_with('#') || t.is_empty() {
            continue;
        }
        if t == "phi" {
            break;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| parse_err(path, line, "expected `key = value`"))?;
        header.insert(k.trim().to_string(), (line, v.trim().to_string()));
    }
    let get = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| parse_err(path, last_line, &format!("missing `{key}`")))
    };
    let (_, hash) = get("manifest_sha256")?;
    let (l, step) = get("step")?;
    let step: usize = parse_num(path, *l, step)?;
    let (l, time) = get("time")?;
    let time: f64 = parse_num(path, *l, time)?;
    let (l, n) = get("n_cells")?;
    let n: usize = parse_num(path, *l, n)?;
    let (l, length) = get("length")?;
    let length: f64 = parse_num(path, *l, length)?;
    let grid = GridSpec::new(n, length)?;
    let phi = read_rows(path, &mut lines, grid)?;
    match lines.next() {
        Some(Ok((_, t))) if t.trim() == "rho" => {}
        Some(Ok((line, _))) => return Err(parse_err(path, line, "expected `rho`")),
        Some(Err(e)) => return Err(e),
        None => return Err(parse_err(path, last_line, "missing rho block")),
    }
    let rho = read_rows(path, &mut lines, grid)?;
    let mut state = State::new(phi, rho)?;
    state.step = step;
    state.time = time;
    Ok(Checkpoint {
        manifest_hash: hash.clone(),
        state,
    })
}

pub fn energy_row(step: usize, time: f64, d: &StepDiagnostics) -> String {
    format!(
        "{step},{time:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
        d.energy.total,
        d.energy.convex,
        d.energy.concave,
        d.mass_phi,
        d.mass_rho,
        d.rho_min,
        d.rho_max,
        d.newton_iters,
        d.final_residual
    )
}

/// Appends rows to `energy.csv`, flushing after each one.
pub struct EnergyLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EnergyLog {
    pub fn create(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(out, "{ENERGY_HEADER}").map_err(io)?;
        Ok(EnergyLog {
            path: path.to_path_buf(),
            out,
        })
    }

    /// Keeps the header and rows with `step <= last_step`, then reopens for
    /// appending.
    pub fn resume(path: &Path, last_step: usize) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let text = std::fs::read_to_string(path).map_err(io)?;
        let mut kept = String::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != ENERGY_HEADER {
                    return Err(parse_err(path, 1, "unexpected energy.csv header"));
                }
            } else {
                let step: usize = parse_num(path, i + 1, line.split(',').next().unwrap_or(""))?;
                if step > last_step {
                    break;
                }
            }
            kept.push_str(line);
            kept.push('\n');
        }
        std::fs::write(path, kept).map_err(io)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok(EnergyLog {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn push(&mut self, step: usize, time: f64, d: &StepDiagnostics) -> Result<()> {
        let row = energy_row(step, time, d);
        writeln!(self.out, "{row}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let rate = |r: Option<f64>| r.map(|v| format!("{v:e}")).unwrap_or_default();
    let mut text = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        text.push_str(&format!(
            "{},{:e},{},{:e},{}\n",
            r.grid_n,
            r.error_phi,
            rate(r.rate_phi),
            r.error_rho,
            rate(r.rate_rho)
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
