use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{LadderEntry, Mode, Problem, StudyConfig};
use super::table::{ConvergenceTable, ErrorRow, StabilityTable};
use crate::error::{Error, Result};
use crate::mesh::restrict_factor3;
use crate::mms::ManufacturedSolution;
use crate::{ops, scheme, vec3, Field, Grid, Params, State};

/// Environment variable holding the number of worker threads for ladder rows.
pub const THREADS_ENV: &str = "LLPROJ_THREADS";

/// Worker count from [`THREADS_ENV`], 1 when unset or invalid.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or(1)
}

/// Runs `f(0..n)` on up to `threads` workers; results keep input order.
fn par_map<R: Send>(n: usize, threads: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.unwrap())
        .collect()
}

/// `(cos φ, sin φ, 0)` with `φ = x²(1 - x)²`, the unforced initial data of
/// the reference studies.
pub fn relax_profile(grid: Grid) -> Result<Field> {
    Field::from_fn(grid, |p| {
        let s = p[0] * (1.0 - p[0]);
        let phi = s * s;
        [phi.cos(), phi.sin(), 0.0]
    })
}

fn base_params(cfg: &StudyConfig, entry: &LadderEntry) -> Params {
    let mut p = Params::new(cfg.alpha, entry.step, cfg.t_final)
        .with_solver(cfg.solver_for(&entry.grid))
        .with_forcing_time(cfg.forcing_time)
        .with_start_history(cfg.start_history);
    if let Some(h) = cfg.applied_field {
        p = p.with_applied_field(h);
    }
    p
}

fn manufactured(grid: &Grid) -> Result<ManufacturedSolution> {
    ManufacturedSolution::for_dim(grid.dim())
        .ok_or_else(|| Error::InvalidGrid(format!("no manufactured solution in {}-D", grid.dim())))
}

/// Initial data and parameters of one run.
pub fn setup(cfg: &StudyConfig, entry: &LadderEntry, problem: Problem) -> Result<(Field, Params)> {
    let params = base_params(cfg, entry);
    if !params.step_count().1 {
        return Err(Error::InvalidParameter(format!(
            "final time {} is not a multiple of the step {}",
            cfg.t_final, entry.step
        )));
    }
    match problem {
        Problem::Mms => {
            let sol = manufactured(&entry.grid)?;
            let alpha = cfg.alpha;
            let m0 = Field::from_fn(entry.grid, |x| sol.value(x, 0.0))?;
            Ok((
                m0,
                params.with_forcing(move |x, t| sol.forcing(x, t, alpha)),
            ))
        }
        Problem::Relax => Ok((relax_profile(entry.grid)?, params)),
    }
}

/// Runs one ladder entry to the final time.
pub fn run_entry(cfg: &StudyConfig, entry: &LadderEntry, problem: Problem) -> Result<State> {
    let (m0, params) = setup(cfg, entry, problem)?;
    let start = std::time::Instant::now();
    let state = scheme::run(&m0, &params, &mut [])?;
    state.current().check_finite()?;
    log::info!(
        "k = {:e}, h = {:e}: {} steps in {:.1} s",
        entry.step,
        entry.spacing(),
        state.step(),
        start.elapsed().as_secs_f64()
    );
    Ok(state)
}

fn in_row<T>(entry: &LadderEntry, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Row {
        step: entry.step,
        spacing: entry.spacing(),
        source: Box::new(e),
    })
}

/// Errors of `numerical` against `exact` on the same grid.
pub fn error_row(entry: &LadderEntry, numerical: &Field, exact: &Field) -> Result<ErrorRow> {
    let e = numerical.zip_interior(exact, vec3::sub)?;
    Ok(ErrorRow {
        k: entry.step,
        h: entry.spacing(),
        err_inf: ops::norm_inf(&e),
        err_l2: ops::norm_l2(&e),
        err_h1: ops::norm_h1(&e),
    })
}

/// Final-time errors of the forced problem against the manufactured solution.
pub fn mms_errors(cfg: &StudyConfig, entry: &LadderEntry) -> Result<ErrorRow> {
    in_row(
        entry,
        (|| {
            let state = run_entry(cfg, entry, Problem::Mms)?;
            let sol = manufactured(&entry.grid)?;
            let t = state.time();
            let exact = Field::from_fn(entry.grid, |x| sol.value(x, t))?;
            error_row(entry, state.current(), &exact)
        })(),
    )
}

/// Error rows of the forced problem over the ladder.
pub fn converge_mms(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if !matches!(cfg.mode, Mode::Mms1d | Mode::Mms3d) {
        return Err(Error::InvalidParameter(format!(
            "mode {} is not an mms study",
            cfg.mode
        )));
    }
    cfg.validate()?;
    let rows = par_map(cfg.ladder.len(), cfg.threads, |i| {
        mms_errors(cfg, &cfg.ladder[i])
    });
    ConvergenceTable::new(rows.into_iter().collect::<Result<_>>()?)
}

/// Restricts by factor 3 until `coarse` is reached.
pub fn restrict_to(fine: &Field, coarse: &Grid) -> Result<Field> {
    let mut f = fine.clone();
    while !f.grid().same_shape(coarse) {
        let mut cells = f.grid().cells();
        for a in coarse.active_axes() {
            if cells[a] > coarse.cells()[a] {
                if !cells[a].is_multiple_of(3) {
                    return Err(Error::IncompatibleGrids(format!(
                        "{} cells do not coarsen by 3",
                        cells[a]
                    )));
                }
                cells[a] /= 3;
            }
        }
        if cells == f.grid().cells() {
            return Err(Error::IncompatibleGrids(
                "grids are not nested by factors of 3".into(),
            ));
        }
        let next = Grid::new(coarse.dim(), cells, coarse.extent())?;
        f = restrict_factor3(&f, &next)?;
    }
    Ok(f)
}

/// Self-convergence against one fine reference run of the unforced problem.
/// Rows on the reference grid are compared directly, coarser rows through
/// factor-3 restriction.
pub fn converge_reference(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if cfg.mode != Mode::Reference1d {
        return Err(Error::InvalidParameter(format!(
            "mode {} is not a reference study",
            cfg.mode
        )));
    }
    cfg.validate()?;
    let reference = cfg.reference.expect("validated");
    let jobs = cfg.ladder.len() + 1;
    let mut states = par_map(jobs, cfg.threads, |i| {
        let entry = if i == 0 {
            &reference
        } else {
            &cfg.ladder[i - 1]
        };
        in_row(entry, run_entry(cfg, entry, cfg.problem))
    })
    .into_iter();
    let fine = states.next().unwrap()?;
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for (entry, state) in cfg.ladder.iter().zip(states) {
        let state = state?;
        let target = in_row(entry, restrict_to(fine.current(), &entry.grid))?;
        rows.push(error_row(entry, state.current(), &target)?);
    }
    ConvergenceTable::new(rows)
}

/// `err_inf` of the forced problem over every `(k, h)` pair of the ladder.
pub fn stability_table(cfg: &StudyConfig) -> Result<StabilityTable> {
    if !matches!(cfg.mode, Mode::Stability1d | Mode::Stability3d) {
        return Err(Error::InvalidParameter(format!(
            "mode {} is not a stability study",
            cfg.mode
        )));
    }
    cfg.validate()?;
    let runs = par_map(cfg.ladder.len(), cfg.threads, |i| {
        let e = &cfg.ladder[i];
        mms_errors(cfg, e).map(|r| (e.step, e.spacing(), r.err_inf))
    });
    Ok(StabilityTable::from_runs(
        &runs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// Result of a single run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub state: State,
    /// Errors against the manufactured solution, for forced runs.
    pub errors: Option<ErrorRow>,
}

/// Runs the first ladder entry.
pub fn single_run(cfg: &StudyConfig) -> Result<RunReport> {
    cfg.validate()?;
    let entry = cfg.ladder[0];
    in_row(
        &entry,
        (|| {
            let state = run_entry(cfg, &entry, cfg.problem)?;
            let errors = match cfg.problem {
                Problem::Mms => {
                    let sol = manufactured(&entry.grid)?;
                    let t = state.time();
                    let exact = Field::from_fn(entry.grid, |x| sol.value(x, t))?;
                    Some(error_row(&entry, state.current(), &exact)?)
                }
                Problem::Relax => None,
            };
            Ok(RunReport { state, errors })
        })(),
    )
}
