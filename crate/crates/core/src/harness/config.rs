//! Flat `key = value` study configuration.
//!
//! ```text
//! # 1-D manufactured-solution ladder
//! mode = mms-1d
//! dt = 5.0D-3, 2.5D-3, 1.25D-3
//! nx = 200, 400, 800
//! alpha = 0.01
//! ```
//!
//! `dt` and `nx` take comma-separated lists. Ladder modes pair them up
//! (a single value is repeated), stability modes take every combination.
//! Numbers accept `D` exponents and simple fractions such as `1/32`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linear_system::{SolverConfig, SolverMethod};
use crate::scheme::{ForcingTime, StartHistory};
use crate::Grid;

/// Keys accepted in configuration files and as `--key` flags.
pub const KEYS: &[&str] = &[
    "mode",
    "dim",
    "nx",
    "ny",
    "nz",
    "dt",
    "t_final",
    "alpha",
    "solver",
    "solver_tol",
    "solver_max_iter",
    "out_table",
    "out_field",
    "h_app_x",
    "h_app_y",
    "h_app_z",
    "reference",
    "ref_dt",
    "ref_nx",
    "forcing_time",
    "start_history",
    "problem",
    "quick",
];

/// Smallest time step kept in 3-D ladders under `quick`.
pub const QUICK_MIN_STEP: f64 = 1.0 / 128.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mms1d,
    Mms3d,
    Reference1d,
    Stability1d,
    Stability3d,
    SingleRun,
}

impl Mode {
    pub fn dim(self) -> Option<usize> {
        match self {
            Mode::Mms1d | Mode::Reference1d | Mode::Stability1d => Some(1),
            Mode::Mms3d | Mode::Stability3d => Some(3),
            Mode::SingleRun => None,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "mms-1d" => Mode::Mms1d,
            "mms-3d" => Mode::Mms3d,
            "reference-1d" => Mode::Reference1d,
            "stability-1d" => Mode::Stability1d,
            "stability-3d" => Mode::Stability3d,
            "single-run" | "run" => Mode::SingleRun,
            other => return Err(Error::Parse(format!("unknown mode `{other}`"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mms1d => "mms-1d",
            Mode::Mms3d => "mms-3d",
            Mode::Reference1d => "reference-1d",
            Mode::Stability1d => "stability-1d",
            Mode::Stability3d => "stability-3d",
            Mode::SingleRun => "single-run",
        })
    }
}

/// Which discretization parameter a reference study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Temporal,
    Spatial,
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "temporal" | "time" => Ok(Self::Temporal),
            "spatial" | "space" => Ok(Self::Spatial),
            other => Err(Error::Parse(format!("unknown reference study `{other}`"))),
        }
    }
}

/// Problem solved by a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// Forced run against the manufactured solution.
    Mms,
    /// Unforced relaxation from `(cos φ, sin φ, 0)`.
    Relax,
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mms" => Ok(Self::Mms),
            "relax" => Ok(Self::Relax),
            other => Err(Error::Parse(format!("unknown problem `{other}`"))),
        }
    }
}

/// One run of a study: a time step on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderEntry {
    pub step: f64,
    pub grid: Grid,
}

impl LadderEntry {
    pub fn new(step: f64, grid: Grid) -> Self {
        Self { step, grid }
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()[0]
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub mode: Mode,
    pub ladder: Vec<LadderEntry>,
    pub alpha: f64,
    pub t_final: f64,
    pub reference: Option<LadderEntry>,
    pub problem: Problem,
    /// `None` picks the direct solver in 1-D and the iterative one in 3-D.
    pub solver: Option<SolverMethod>,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    pub forcing_time: ForcingTime,
    pub start_history: StartHistory,
    pub applied_field: Option<[f64; 3]>,
    pub out_table: Option<PathBuf>,
    pub out_field: Option<PathBuf>,
    pub threads: usize,
}

impl StudyConfig {
    /// Standard ladder and parameters for `mode`.
    pub fn preset(mode: Mode) -> Self {
        let mut cfg = Self {
            mode,
            ladder: Vec::new(),
            alpha: 0.01,
            t_final: 1.0,
            reference: None,
            problem: Problem::Mms,
            solver: None,
            solver_tolerance: SolverConfig::default().tolerance,
            solver_max_iterations: SolverConfig::default().max_iterations,
            forcing_time: ForcingTime::default(),
            start_history: StartHistory::default(),
            applied_field: None,
            out_table: None,
            out_field: None,
            threads: 1,
        };
        let line = |n: usize| Grid::line(n).expect("positive cell count");
        let cube = |n: usize| Grid::cube(n).expect("positive cell count");
        cfg.ladder = match mode {
            Mode::Mms1d => (0..5)
                .map(|r| {
                    let n = 200 << r;
                    LadderEntry::new(1.0 / n as f64, line(n))
                })
                .collect(),
            Mode::Mms3d => (4..=8)
                .map(|p| LadderEntry::new(1.0 / (1u32 << p) as f64, cube(32)))
                .collect(),
            Mode::Reference1d => return cfg.with_reference_kind(ReferenceKind::Temporal),
            Mode::Stability1d => product(
                &[2e-1, 1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3],
                &[10, 20, 40, 80],
                line,
            ),
            Mode::Stability3d => product(
                &[0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
                &[4, 8, 16, 32],
                cube,
            ),
            Mode::SingleRun => vec![LadderEntry::new(5e-3, line(200))],
        };
        cfg
    }

    /// Replaces ladder and reference with the defaults of a 1-D reference
    /// study: `h = 1e-4` with `k` halving from `5e-3` against `k = 1e-4`,
    /// or `k = 1e-4` with `h = 3^-2 ... 3^-6` against `h = 3^-8`.
    pub fn with_reference_kind(mut self, kind: ReferenceKind) -> Self {
        let line = |n: usize| Grid::line(n).expect("positive cell count");
        match kind {
            ReferenceKind::Temporal => {
                self.problem = Problem::Relax;
                self.ladder = (0..5)
                    .map(|r| LadderEntry::new(5e-3 / (1u32 << r) as f64, line(10_000)))
                    .collect();
                self.reference = Some(LadderEntry::new(1e-4, line(10_000)));
            }
            ReferenceKind::Spatial => {
                self.problem = Problem::Relax;
                self.ladder = (2..=6)
                    .map(|p| LadderEntry::new(1e-4, line(3usize.pow(p))))
                    .collect();
                self.reference = Some(LadderEntry::new(1e-4, line(3usize.pow(8))));
            }
        }
        self
    }

    /// Drops 3-D ladder rows with `k < 1/128`.
    pub fn quick(mut self) -> Self {
        if self.ladder.iter().any(|e| e.grid.dim() == 3) {
            self.ladder
                .retain(|e| e.step >= QUICK_MIN_STEP * (1.0 - 1e-12));
        }
        self
    }

    pub fn solver_for(&self, grid: &Grid) -> SolverConfig {
        let method = self.solver.unwrap_or(if grid.dim() == 1 {
            SolverMethod::Direct
        } else {
            SolverMethod::Iterative
        });
        SolverConfig {
            method,
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
            ..SolverConfig::default()
        }
    }

    /// Builds a configuration from parsed keys. `mode` in the map wins over
    /// `default_mode`; unspecified keys keep the preset of the mode.
    pub fn from_map(map: &ConfigMap, default_mode: Mode) -> Result<Self> {
        let mode = match map.get("mode") {
            Some(m) => m.parse()?,
            None => default_mode,
        };
        let mut cfg = Self::preset(mode);
        if let Some(kind) = map.get("reference") {
            cfg = cfg.with_reference_kind(kind.parse()?);
        }
        if let Some(v) = map.get("alpha") {
            cfg.alpha = parse_number(v)?;
        }
        if let Some(v) = map.get("t_final") {
            cfg.t_final = parse_number(v)?;
        }
        if let Some(v) = map.get("problem") {
            cfg.problem = v.parse()?;
        }
        if let Some(v) = map.get("solver") {
            cfg.solver = match v.trim() {
                "auto" => None,
                s => Some(s.parse()?),
            };
        }
        if let Some(v) = map.get("solver_tol") {
            cfg.solver_tolerance = parse_number(v)?;
        }
        if let Some(v) = map.get("solver_max_iter") {
            cfg.solver_max_iterations = parse_count(v)?;
        }
        if let Some(v) = map.get("forcing_time") {
            cfg.forcing_time = v.parse()?;
        }
        if let Some(v) = map.get("start_history") {
            cfg.start_history = v.parse()?;
        }
        cfg.out_table = map.get("out_table").map(PathBuf::from);
        cfg.out_field = map.get("out_field").map(PathBuf::from);

        let h_app: Vec<Option<f64>> = ["h_app_x", "h_app_y", "h_app_z"]
            .iter()
            .map(|k| map.get(k).map(parse_number).transpose())
            .collect::<Result<_>>()?;
        if h_app.iter().any(Option::is_some) {
            cfg.applied_field = Some([
                h_app[0].unwrap_or(0.0),
                h_app[1].unwrap_or(0.0),
                h_app[2].unwrap_or(0.0),
            ]);
        }

        let dim = match map.get("dim") {
            Some(v) => parse_count(v)?,
            None => mode
                .dim()
                .unwrap_or_else(|| cfg.ladder.first().map_or(1, |e| e.grid.dim())),
        };
        if let Some(d) = mode.dim() {
            if d != dim {
                return Err(Error::InvalidParameter(format!(
                    "mode {mode} runs in {d}-D, not {dim}-D"
                )));
            }
        }
        let steps = map.get("dt").map(parse_list).transpose()?;
        let cells = map.get("nx").map(parse_counts).transpose()?;
        let ny = map.get("ny").map(parse_count).transpose()?;
        let nz = map.get("nz").map(parse_count).transpose()?;
        let make_grid = |n: usize| -> Result<Grid> {
            if dim == 1 {
                Grid::new(1, [n, 1, 1], [1.0; 3])
            } else {
                Grid::new(3, [n, ny.unwrap_or(n), nz.unwrap_or(n)], [1.0; 3])
            }
        };
        let dim_changed = cfg.ladder.first().is_none_or(|e| e.grid.dim() != dim);
        if steps.is_some() || cells.is_some() || ny.is_some() || nz.is_some() || dim_changed {
            let steps = steps.unwrap_or_else(|| cfg.ladder.iter().map(|e| e.step).collect());
            let cells = match cells {
                Some(c) => c,
                None if dim_changed => vec![if dim == 1 { 200 } else { 16 }],
                None => cfg.ladder.iter().map(|e| e.grid.cells()[0]).collect(),
            };
            let grid_table = matches!(mode, Mode::Stability1d | Mode::Stability3d);
            let (steps, cells) = if grid_table {
                (dedup(steps), dedup(cells))
            } else {
                (steps, cells)
            };
            let grids = cells
                .into_iter()
                .map(make_grid)
                .collect::<Result<Vec<_>>>()?;
            cfg.ladder = if grid_table {
                steps
                    .iter()
                    .flat_map(|&k| grids.iter().map(move |g| LadderEntry::new(k, *g)))
                    .collect()
            } else {
                pair_up(&steps, &grids)?
            };
        }
        if map.contains_key("ref_dt") || map.contains_key("ref_nx") {
            let base = cfg.reference.or_else(|| cfg.ladder.first().copied());
            let step = match map.get("ref_dt") {
                Some(v) => parse_number(v)?,
                None => base.map_or(1e-4, |e| e.step),
            };
            let grid = match map.get("ref_nx") {
                Some(v) => make_grid(parse_count(v)?)?,
                None => base
                    .map(|e| e.grid)
                    .ok_or_else(|| Error::Parse("ref_dt needs ref_nx".into()))?,
            };
            cfg.reference = Some(LadderEntry::new(step, grid));
        }
        if map
            .get("quick")
            .map(parse_bool)
            .transpose()?
            .unwrap_or(false)
        {
            cfg = cfg.quick();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::InvalidParameter("study ladder is empty".into()));
        }
        if !(self.alpha > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha and t_final must be positive".into(),
            ));
        }
        for e in &self.ladder {
            if !(e.step > 0.0) || e.step > self.t_final * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "time step {} is outside (0, t_final]",
                    e.step
                )));
            }
        }
        if self.mode == Mode::Reference1d {
            let r = self.reference.ok_or_else(|| {
                Error::InvalidParameter("reference study needs a reference run".into())
            })?;
            for e in &self.ladder {
                if !e.grid.same_shape(&r.grid) && !factor3_chain(&r.grid, &e.grid) {
                    return Err(Error::IncompatibleGrids(format!(
                        "{} cells cannot be reached from the {} reference cells by factor-3 restriction",
                        e.grid.cells()[0],
                        r.grid.cells()[0]
                    )));
                }
            }
        }
        self.solver_for(&self.ladder[0].grid).validate()
    }
}

/// Whether `coarse` is `fine` coarsened by a power of 3 on every active axis.
pub fn factor3_chain(fine: &Grid, coarse: &Grid) -> bool {
    fine.dim() == coarse.dim()
        && coarse.active_axes().all(|a| {
            let (mut nf, nc) = (fine.cells()[a], coarse.cells()[a]);
            while nf > nc && nf % 3 == 0 {
                nf /= 3;
            }
            nf == nc
        })
}

fn product(steps: &[f64], cells: &[usize], grid: impl Fn(usize) -> Grid) -> Vec<LadderEntry> {
    steps
        .iter()
        .flat_map(|&k| cells.iter().map(move |&n| (k, n)))
        .map(|(k, n)| LadderEntry::new(k, grid(n)))
        .collect()
}

fn pair_up(steps: &[f64], grids: &[Grid]) -> Result<Vec<LadderEntry>> {
    let n = steps.len().max(grids.len());
    let pick = |len: usize, i: usize| if len == 1 { 0 } else { i };
    if (steps.len() != 1 && steps.len() != n) || (grids.len() != 1 && grids.len() != n) {
        return Err(Error::Parse(format!(
            "dt has {} entries and nx has {}; lists must match or be single values",
            steps.len(),
            grids.len()
        )));
    }
    Ok((0..n)
        .map(|i| LadderEntry::new(steps[pick(steps.len(), i)], grids[pick(grids.len(), i)]))
        .collect())
}

fn dedup<T: PartialEq + Copy>(mut v: Vec<T>) -> Vec<T> {
    let mut seen = Vec::with_capacity(v.len());
    v.retain(|x| {
        let fresh = !seen.contains(x);
        seen.push(*x);
        fresh
    });
    v
}

/// Parsed `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    /// Sets a key, overriding any earlier value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", no + 1)))?;
            let key = key.trim();
            check_key(key).map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
            if map
                .0
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse(format!(
                    "line {}: duplicate key `{key}`",
                    no + 1
                )));
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Parse(format!("unknown key `{key}`")))
    }
}

/// Parses a real number, accepting `D` exponents (`5.0D-3`) and fractions
/// (`1/32`).
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid number `{s}`"));
    let v = if let Some((num, den)) = s.split_once('/') {
        parse_number(num)? / parse_number(den)?
    } else {
        s.replace(['D', 'd'], "e")
            .parse::<f64>()
            .map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(parse_number).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Parse("empty list".into()));
    }
    Ok(v)
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid count `{}`", s.trim())))
}

fn parse_counts(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(parse_count).collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::Parse(format!("invalid flag value `{other}`"))),
    }
}
