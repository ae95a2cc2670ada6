//! Flat `key = value` run configuration and the resolved run manifest.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::experiments::{RunConfig, RANDOM_AMP, RANDOM_BASE};
use crate::field::GridSpec;
use crate::stepper::SolverConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convergence,
    Spinodal,
    SingleStep,
    PropertySuite,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Convergence => "convergence",
            Mode::Spinodal => "spinodal",
            Mode::SingleStep => "single-step",
            Mode::PropertySuite => "property-suite",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "convergence" => Ok(Mode::Convergence),
            "spinodal" => Ok(Mode::Spinodal),
            "single-step" => Ok(Mode::SingleStep),
            "property-suite" => Ok(Mode::PropertySuite),
            other => Err(format!(
                "unknown mode `{other}`; expected convergence, spinodal, single-step or property-suite"
            )),
        }
    }
}

/// Every key accepted in a config file, in manifest order.
pub const KEYS: [&str; 19] = [
    "mode",
    "n_cells",
    "length",
    "eps",
    "alpha",
    "beta",
    "eta",
    "xi",
    "delta",
    "mobility",
    "dt",
    "t_final",
    "seed",
    "newton_tol",
    "newton_max_iter",
    "linear_tol",
    "boundary_fraction",
    "snapshot_times",
    "output_dir",
];

/// Keys without a default; the first missing one is reported.
const REQUIRED: [&str; 12] = [
    "mode", "n_cells", "length", "eps", "alpha", "beta", "eta", "xi", "delta", "mobility", "dt",
    "t_final",
];

pub const DEFAULT_OUTPUT_DIR: &str = "output";

/// Fully resolved description of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub mode: Mode,
    pub config_path: Option<PathBuf>,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub seed: u64,
    pub t_final: f64,
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub version: String,
}

struct Entry {
    line: usize,
    value: String,
}

struct Parsed<'a> {
    path: &'a str,
    entries: HashMap<&'static str, Entry>,
}

impl Parsed<'_> {
    fn parse_err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            msg,
        }
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.parse_err(e.line, format!("bad value for `{key}`: {err}"))),
        }
    }

    fn required<T: FromStr>(&self, key: &'static str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or(Error::MissingKey(key))
    }

    fn positive(&self, key: &'static str) -> Result<f64> {
        let v: f64 = self.required(key)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(range(key, format!("must be finite and positive, got {v}")));
        }
        Ok(v)
    }
}

fn range(key: &str, msg: String) -> Error {
    Error::Range {
        key: key.to_string(),
        msg,
    }
}

/// Parses config text; errors name `<config>` as the source.
pub fn parse_config(text: &str) -> Result<RunManifest> {
    parse_config_named(text, "<config>")
}

pub fn load_config(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = parse_config_named(&text, &path.display().to_string())?;
    m.config_path = Some(path.to_path_buf());
    Ok(m)
}

pub fn parse_config_named(text: &str, path: &str) -> Result<RunManifest> {
    let mut parsed = Parsed {
        path,
        entries: HashMap::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parsed.parse_err(line, format!("expected `key = value`, got `{content}`")));
        };
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(parsed.parse_err(line, format!("unknown key `{key}`")));
        };
        let entry = Entry {
            line,
            value: value.trim().to_string(),
        };
        if let Some(prev) = parsed.entries.insert(known, entry) {
            return Err(parsed.parse_err(
                line,
                format!("duplicate key `{key}` (first set on line {})", prev.line),
            ));
        }
    }
    for key in REQUIRED {
        if !parsed.entries.contains_key(key) {
            return Err(Error::MissingKey(key));
        }
    }

    let mode_entry = &parsed.entries["mode"];
    let mode: Mode = mode_entry
        .value
        .parse()
        .map_err(|msg| parsed.parse_err(mode_entry.line, msg))?;
    let n_cells: usize = parsed.required("n_cells")?;
    let length = parsed.positive("length")?;
    let grid = GridSpec::new(n_cells, length).map_err(|e| range("n_cells", e.to_string()))?;
    let params = ModelParams {
        eps: parsed.positive("eps")?,
        alpha: parsed.positive("alpha")?,
        beta: parsed.positive("beta")?,
        eta: parsed.positive("eta")?,
        xi: parsed.positive("xi")?,
        delta: parsed.positive("delta")?,
        mobility: parsed.positive("mobility")?,
        dt: parsed.positive("dt")?,
    };
    let t_final: f64 = parsed.required("t_final")?;
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(range("t_final", format!("must be finite and non-negative, got {t_final}")));
    }

    let defaults = SolverConfig::default();
    let newton_tol: Option<f64> = parsed.get("newton_tol")?;
    if let Some(t) = newton_tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(range("newton_tol", format!("must be finite and positive, got {t}")));
        }
    }
    let newton_max_iter = parsed.get("newton_max_iter")?.unwrap_or(defaults.newton_max_iter);
    if newton_max_iter == 0 {
        return Err(range("newton_max_iter", "must be at least 1".into()));
    }
    let linear_tol = parsed.get("linear_tol")?.unwrap_or(defaults.linear_tol);
    if !(linear_tol > 0.0 && linear_tol < 1.0) {
        return Err(range("linear_tol", format!("must lie in (0, 1), got {linear_tol}")));
    }
    let boundary_fraction = parsed.get("boundary_fraction")?.unwrap_or(defaults.boundary_fraction);
    if !(boundary_fraction > 0.0 && boundary_fraction < 1.0) {
        return Err(range(
            "boundary_fraction",
            format!("must lie in (0, 1), got {boundary_fraction}"),
        ));
    }
    let solver = SolverConfig {
        newton_tol: Some(newton_tol.unwrap_or_else(|| defaults.tolerance(&grid))),
        newton_max_iter,
        linear_tol,
        boundary_fraction,
        ..defaults
    };

    let snapshot_times = match parsed.entries.get("snapshot_times") {
        None => Vec::new(),
        Some(e) => parse_list(&e.value).map_err(|msg| parsed.parse_err(e.line, msg))?,
    };
    if let Some(&t) = snapshot_times.iter().find(|&&t| !(0.0..=t_final).contains(&t)) {
        return Err(range("snapshot_times", format!("{t} is outside [0, t_final]")));
    }

    Ok(RunManifest {
        mode,
        config_path: None,
        grid,
        params,
        solver,
        seed: parsed.get("seed")?.unwrap_or(0),
        t_final,
        snapshot_times,
        output_dir: parsed
            .get::<String>("output_dir")?
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        version: VERSION.to_string(),
    })
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| format!("bad value `{s}` in snapshot_times: {e}"))
        })
        .collect()
}

impl RunManifest {
    /// Manifest text in config syntax; reparses to the same manifest.
    pub fn to_text(&self) -> String {
        self.render(true)
    }

    /// SHA-256 of every result-relevant line of the manifest.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.render(false).as_bytes()))
    }

    fn render(&self, with_location: bool) -> String {
        let p = &self.params;
        let s = &self.solver;
        let mut out = String::new();
        let _ = writeln!(out, "# surfactant-pf {} run manifest", self.version);
        if with_location {
            if let Some(path) = &self.config_path {
                let _ = writeln!(out, "# config: {}", path.display());
            }
        }
        let _ = writeln!(out, "mode = {}", self.mode.as_str());
        let _ = writeln!(out, "n_cells = {}", self.grid.n());
        let _ = writeln!(out, "length = {}", self.grid.length());
        for (k, v) in [
            ("eps", p.eps),
            ("alpha", p.alpha),
            ("beta", p.beta),
            ("eta", p.eta),
            ("xi", p.xi),
            ("delta", p.delta),
            ("mobility", p.mobility),
            ("dt", p.dt),
            ("t_final", self.t_final),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "newton_tol = {}", s.tolerance(&self.grid));
        let _ = writeln!(out, "newton_max_iter = {}", s.newton_max_iter);
        let _ = writeln!(out, "linear_tol = {}", s.linear_tol);
        let _ = writeln!(out, "boundary_fraction = {}", s.boundary_fraction);
        let times: Vec<String> = self.snapshot_times.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "snapshot_times = {}", times.join(", "));
        if with_location {
            let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        }
        let _ = writeln!(out, "# fixed: damping_min = {}", s.damping_min);
        let _ = writeln!(out, "# fixed: linear_max_iter = {}", s.linear_max_iter);
        let _ = writeln!(out, "# fixed: random data base = {RANDOM_BASE}, amp = {RANDOM_AMP}");
        out
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            grid: self.grid,
            params: self.params,
            solver: self.solver,
            t_final: self.t_final,
            snapshot_times: self.snapshot_times.clone(),
            seed: self.seed,
            base: RANDOM_BASE,
            amp: RANDOM_AMP,
            output_dir: self.output_dir.clone(),
        }
    }
}
