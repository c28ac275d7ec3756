//! Semi-implicit BDF2 time stepping with a separate projection step.
//!
//! One step from levels `n`, `n + 1` to `n + 2`:
//!
//! 1. extrapolate `m^ = 2 m^{n+1} - m^n` from the projected history;
//! 2. solve the linear system
//!    `(3/2 m~ - 2 m~^{n+1} + 1/2 m~^n)/k = -m^ × Δh m~ - α m^ × (m^ × Δh m~) + f`
//!    for the unprojected `m~ = m~^{n+2}`;
//! 3. project, `m^{n+2} = m~ / |m~|`.
//!
//! The first level is produced by the analogous BDF1 step with `m^ = m^0`.
//!
//! The forcing `f` is sampled according to [`ForcingTime`]. The default,
//! [`ForcingTime::Extrapolated`], uses `2 f(t^{n+1}) - f(t^n)` in the BDF2
//! steps and `f(t^0)` in the start-up step; [`ForcingTime::Implicit`] uses
//! `f(t^{n+2})` and `f(t^1)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linear_system::{self, BdfOrder, SolverConfig, StencilPattern};
use crate::mesh::VectorField;
use crate::ops;
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Forcing term `f(x, t)` sampled at cell centers.
pub type Forcing<T> = Arc<dyn Fn(Vec3<T>, T) -> Vec3<T> + Send + Sync>;

/// Initial data farther than this from unit length is rejected.
pub const INITIAL_UNIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingTime {
    /// Second-order extrapolation from the two known levels.
    #[default]
    Extrapolated,
    /// Sampled at the new time level.
    Implicit,
}

impl std::str::FromStr for ForcingTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "extrapolated" => Ok(Self::Extrapolated),
            "implicit" => Ok(Self::Implicit),
            other => Err(Error::Parse(format!("unknown forcing time `{other}`"))),
        }
    }
}

/// What the start-up step leaves in the unprojected history slot `m~^1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartHistory {
    /// `m~^1 = m^1`, mirroring `m~^0 = m^0`.
    #[default]
    Projected,
    /// The raw BDF1 solution.
    Unprojected,
}

impl std::str::FromStr for StartHistory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "projected" => Ok(Self::Projected),
            "unprojected" => Ok(Self::Unprojected),
            other => Err(Error::Parse(format!("unknown start history `{other}`"))),
        }
    }
}

#[derive(Clone)]
pub struct SchemeParams<T> {
    pub alpha: T,
    pub step: T,
    pub t_final: T,
    pub forcing: Option<Forcing<T>>,
    /// Constant applied field, treated explicitly through `m^`.
    pub applied_field: Option<Vec3<T>>,
    pub forcing_time: ForcingTime,
    pub start_history: StartHistory,
    pub solver: SolverConfig,
}

impl<T: Real> fmt::Debug for SchemeParams<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeParams")
            .field("alpha", &self.alpha)
            .field("step", &self.step)
            .field("t_final", &self.t_final)
            .field("forcing", &self.forcing.as_ref().map(|_| "<fn>"))
            .field("applied_field", &self.applied_field)
            .field("forcing_time", &self.forcing_time)
            .field("start_history", &self.start_history)
            .field("solver", &self.solver)
            .finish()
    }
}

impl<T: Real> SchemeParams<T> {
    pub fn new(alpha: T, step: T, t_final: T) -> Self {
        Self {
            alpha,
            step,
            t_final,
            forcing: None,
            applied_field: None,
            forcing_time: ForcingTime::default(),
            start_history: StartHistory::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn with_forcing(
        mut self,
        f: impl Fn(Vec3<T>, T) -> Vec3<T> + Send + Sync + 'static,
    ) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn with_applied_field(mut self, h: Vec3<T>) -> Self {
        self.applied_field = Some(h);
        self
    }

    pub fn with_forcing_time(mut self, when: ForcingTime) -> Self {
        self.forcing_time = when;
        self
    }

    pub fn with_start_history(mut self, history: StartHistory) -> Self {
        self.start_history = history;
        self
    }

    /// Forcing used in the step that produces level `level` at `x`.
    pub fn forcing_for_level(&self, x: Vec3<T>, level: usize) -> Option<Vec3<T>> {
        let f = self.forcing.as_ref()?;
        let t = |n: usize| T::from_usize(n).unwrap() * self.step;
        Some(match (self.forcing_time, level) {
            (ForcingTime::Implicit, n) => f(x, t(n)),
            (ForcingTime::Extrapolated, 0 | 1) => f(x, T::zero()),
            (ForcingTime::Extrapolated, n) => vec3::axpy(
                vec3::scale(T::lit(2.0), f(x, t(n - 1))),
                -T::one(),
                f(x, t(n - 2)),
            ),
        })
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "damping {} must be positive",
                self.alpha
            )));
        }
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step {} must be positive",
                self.step
            )));
        }
        if !(self.step <= self.t_final * (T::one() + T::lit(1e-12))) {
            return Err(Error::InvalidParameter(format!(
                "time step {} exceeds final time {}",
                self.step, self.t_final
            )));
        }
        if let Some(h) = self.applied_field {
            if !vec3::is_finite(h) {
                return Err(Error::InvalidParameter(
                    "applied field is not finite".into(),
                ));
            }
        }
        self.solver.validate()
    }

    /// Number of time steps, `floor(t_final / k)` up to rounding, and
    /// whether `t_final` is an integer multiple of `k`.
    pub fn step_count(&self) -> (usize, bool) {
        let ratio = (self.t_final / self.step).to_f64_lossy();
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            (nearest as usize, true)
        } else {
            (ratio.floor() as usize, false)
        }
    }
}

/// Two-level history of projected and unprojected fields.
#[derive(Debug, Clone)]
pub struct SchemeState<T> {
    step: usize,
    time_step: T,
    m_prev: VectorField<T>,
    m_curr: VectorField<T>,
    mt_prev: VectorField<T>,
    mt_curr: VectorField<T>,
    pattern: Arc<StencilPattern<T>>,
    last_residual: f64,
    last_iterations: usize,
}

impl<T: Real> SchemeState<T> {
    /// Index of the newest level.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> T {
        T::from_usize(self.step).unwrap() * self.time_step
    }

    /// Newest projected field.
    pub fn current(&self) -> &VectorField<T> {
        &self.m_curr
    }

    pub fn previous(&self) -> &VectorField<T> {
        &self.m_prev
    }

    /// Newest unprojected field.
    pub fn current_unprojected(&self) -> &VectorField<T> {
        &self.mt_curr
    }

    pub fn previous_unprojected(&self) -> &VectorField<T> {
        &self.mt_prev
    }

    /// Relative residual of the last linear solve.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn into_current(self) -> VectorField<T> {
        self.m_curr
    }
}

/// Explicit applied-field contribution `-m^ × h - α m^ × (m^ × h)` per cell.
pub fn apply_field_terms<T: Real>(
    hat_m: &VectorField<T>,
    h_app: Vec3<T>,
    alpha: T,
) -> Vec<Vec3<T>> {
    hat_m
        .interior_values()
        .into_iter()
        .map(|m| {
            let c = vec3::cross(m, h_app);
            vec3::sub(
                vec3::scale(-T::one(), c),
                vec3::scale(alpha, vec3::cross(m, c)),
            )
        })
        .collect()
}

fn add_sources<T: Real>(
    rhs: &mut [Vec3<T>],
    hat_m: &VectorField<T>,
    params: &SchemeParams<T>,
    level: usize,
) {
    let grid = hat_m.grid();
    if params.forcing.is_some() {
        for (c, (i, j, k)) in grid.interior().enumerate() {
            if let Some(f) = params.forcing_for_level(grid.center(i, j, k), level) {
                rhs[c] = vec3::add(rhs[c], f);
            }
        }
    }
    if let Some(h) = params.applied_field {
        for (r, s) in rhs
            .iter_mut()
            .zip(apply_field_terms(hat_m, h, params.alpha))
        {
            *r = vec3::add(*r, s);
        }
    }
}

fn check_unit<T: Real>(m0: &VectorField<T>) -> Result<VectorField<T>> {
    let tol = T::lit(INITIAL_UNIT_TOLERANCE);
    for (i, j, k) in m0.grid().interior() {
        let len = vec3::norm(m0.get(i, j, k));
        if !((len - T::one()).abs() <= tol) {
            return Err(Error::InvalidParameter(format!(
                "initial magnetization has length {len} at cell ({i}, {j}, {k})"
            )));
        }
    }
    ops::project(m0)
}

/// Sets `m~^0 = m^0` and takes one BDF1 step to fill the second level.
/// The unprojected slot `m~^1` is filled per [`StartHistory`].
pub fn init<T: Real>(m0: &VectorField<T>, params: &SchemeParams<T>) -> Result<SchemeState<T>> {
    params.validate()?;
    let m0 = check_unit(m0)?;
    let grid = *m0.grid();
    let pattern = Arc::new(StencilPattern::new(grid));
    let k = params.step;

    let mut rhs: Vec<_> = m0
        .interior_values()
        .into_iter()
        .map(|v| vec3::scale(T::one() / k, v))
        .collect();
    add_sources(&mut rhs, &m0, params, 1);
    let system = linear_system::assemble_with(&pattern, &m0, rhs, k, params.alpha, BdfOrder::One)
        .map_err(|e| e.at_step(1))?;
    let guess = m0.interior_values();
    let sol =
        linear_system::solve(&system, &params.solver, Some(&guess)).map_err(|e| e.at_step(1))?;
    let mt1 = VectorField::from_interior(grid, &sol.x).map_err(|e| e.at_step(1))?;
    let m1 = ops::project(&mt1).map_err(|e| e.at_step(1))?;
    let mt1 = match params.start_history {
        StartHistory::Projected => m1.clone(),
        StartHistory::Unprojected => mt1,
    };

    Ok(SchemeState {
        step: 1,
        time_step: k,
        m_prev: m0.clone(),
        m_curr: m1,
        mt_prev: m0,
        mt_curr: mt1,
        pattern,
        last_residual: sol.residual,
        last_iterations: sol.iterations,
    })
}

/// Starts from two given levels, taking `m~^0 = m^0` and `m~^1 = m^1`.
pub fn init_with_levels<T: Real>(
    m0: &VectorField<T>,
    m1: &VectorField<T>,
    params: &SchemeParams<T>,
) -> Result<SchemeState<T>> {
    params.validate()?;
    let m0 = check_unit(m0)?;
    let m1 = check_unit(m1)?;
    if !m0.grid().same_shape(m1.grid()) {
        return Err(Error::ShapeMismatch(
            "start levels live on different grids".into(),
        ));
    }
    Ok(SchemeState {
        step: 1,
        time_step: params.step,
        pattern: Arc::new(StencilPattern::new(*m0.grid())),
        m_prev: m0.clone(),
        m_curr: m1.clone(),
        mt_prev: m0,
        mt_curr: m1,
        last_residual: 0.0,
        last_iterations: 0,
    })
}

/// Advances the state by one BDF2 step.
pub fn bdf2_step<T: Real>(
    state: SchemeState<T>,
    params: &SchemeParams<T>,
) -> Result<SchemeState<T>> {
    let next = state.step + 1;
    bdf2_step_inner(state, params).map_err(|e| e.at_step(next))
}

fn bdf2_step_inner<T: Real>(
    state: SchemeState<T>,
    params: &SchemeParams<T>,
) -> Result<SchemeState<T>> {
    let grid = *state.m_curr.grid();
    let k = params.step;
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let hat = state.m_curr.zip_interior(&state.m_prev, |a, b| {
        vec3::axpy(vec3::scale(two, a), -T::one(), b)
    })?;

    let inv_k = T::one() / k;
    let mut rhs: Vec<_> = (0..grid.n_cells())
        .map(|c| {
            let h = vec3::axpy(
                vec3::scale(two, state.mt_curr.cell(c)),
                -half,
                state.mt_prev.cell(c),
            );
            vec3::scale(inv_k, h)
        })
        .collect();
    add_sources(&mut rhs, &hat, params, state.step + 1);

    let system =
        linear_system::assemble_with(&state.pattern, &hat, rhs, k, params.alpha, BdfOrder::Two)?;
    let guess: Vec<_> = (0..grid.n_cells())
        .map(|c| {
            vec3::axpy(
                vec3::scale(two, state.mt_curr.cell(c)),
                -T::one(),
                state.mt_prev.cell(c),
            )
        })
        .collect();
    let sol = linear_system::solve(&system, &params.solver, Some(&guess))?;
    let mt_new = VectorField::from_interior(grid, &sol.x)?;
    let m_new = ops::project(&mt_new)?;

    Ok(SchemeState {
        step: state.step + 1,
        time_step: k,
        m_prev: state.m_curr,
        m_curr: m_new,
        mt_prev: state.mt_curr,
        mt_curr: mt_new,
        pattern: state.pattern,
        last_residual: sol.residual,
        last_iterations: sol.iterations,
    })
}

/// Largest componentwise residual of the unprojected update equation at the
/// newest level of `after`, given the state `before` it was computed from.
/// Evaluated pointwise through the stencil, independent of the matrix.
pub fn step_equation_residual<T: Real>(
    before: &SchemeState<T>,
    after: &SchemeState<T>,
    params: &SchemeParams<T>,
) -> Result<T> {
    let grid = *after.mt_curr.grid();
    let k = params.step;
    let two = T::lit(2.0);
    let lap = ops::laplacian(&after.mt_curr)?;
    let mut worst = T::zero();
    for (c, (i, j, kk)) in grid.interior().enumerate() {
        let hat = vec3::axpy(
            vec3::scale(two, before.m_curr.cell(c)),
            -T::one(),
            before.m_prev.cell(c),
        );
        let bdf = vec3::scale(
            T::one() / k,
            vec3::add(
                vec3::axpy(
                    vec3::scale(T::lit(1.5), after.mt_curr.cell(c)),
                    -two,
                    before.mt_curr.cell(c),
                ),
                vec3::scale(T::lit(0.5), before.mt_prev.cell(c)),
            ),
        );
        let l = lap.get(i, j, kk);
        let mut rhs = vec3::axpy(
            vec3::scale(-T::one(), vec3::cross(hat, l)),
            -params.alpha,
            vec3::triple(hat, l),
        );
        if let Some(f) = params.forcing_for_level(grid.center(i, j, kk), after.step) {
            rhs = vec3::add(rhs, f);
        }
        if let Some(h) = params.applied_field {
            let ch = vec3::cross(hat, h);
            rhs = vec3::sub(rhs, vec3::axpy(ch, params.alpha, vec3::cross(hat, ch)));
        }
        worst = worst.max(vec3::max_abs(vec3::sub(bdf, rhs)));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Callback invoked after each completed step with `(step, time, state)`.
pub type Observer<'a, T> = dyn FnMut(usize, T, &SchemeState<T>) -> Control + 'a;

/// Runs start-up plus BDF2 steps up to `floor(t_final / k)` steps, or until
/// an observer asks to stop.
pub fn run<T: Real>(
    m0: &VectorField<T>,
    params: &SchemeParams<T>,
    observers: &mut [&mut Observer<'_, T>],
) -> Result<SchemeState<T>> {
    params.validate()?;
    let (steps, exact) = params.step_count();
    if !exact {
        log::warn!(
            "final time {} is not a multiple of the step {}; stopping after {} steps",
            params.t_final,
            params.step,
            steps
        );
    }
    let mut state = init(m0, params)?;
    if notify(observers, &state) == Control::Stop {
        return Ok(state);
    }
    while state.step < steps {
        state = bdf2_step(state, params)?;
        if notify(observers, &state) == Control::Stop {
            break;
        }
    }
    Ok(state)
}

fn notify<T: Real>(observers: &mut [&mut Observer<'_, T>], state: &SchemeState<T>) -> Control {
    let mut out = Control::Continue;
    for obs in observers.iter_mut() {
        if obs(state.step, state.time(), state) == Control::Stop {
            out = Control::Stop;
        }
    }
    out
}

/// Stops a run once the relative change of the exchange energy between
/// consecutive steps drops below `tolerance`.
#[derive(Debug, Clone)]
pub struct EnergyCriterion<T> {
    pub tolerance: T,
    last: Option<T>,
    history: Vec<T>,
}

impl<T: Real> EnergyCriterion<T> {
    pub fn new(tolerance: T) -> Self {
        Self {
            tolerance,
            last: None,
            history: Vec::new(),
        }
    }

    /// Energies recorded so far, one per observed step.
    pub fn history(&self) -> &[T] {
        &self.history
    }

    pub fn observe(&mut self, state: &SchemeState<T>) -> Control {
        let e = ops::exchange_energy(state.current());
        self.history.push(e);
        let prev = self.last.replace(e);
        match prev {
            Some(p) if p != T::zero() && ((e - p) / p).abs() < self.tolerance => Control::Stop,
            Some(p) if p == T::zero() && e == T::zero() => Control::Stop,
            _ => Control::Continue,
        }
    }
}
