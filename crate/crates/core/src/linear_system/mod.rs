//! Per-step block-sparse system for the unprojected magnetization.
//!
//! Each time step solves
//!
//! ```text
//! (c/k) m~ + m^ × Δh m~ + α m^ × (m^ × Δh m~) = rhs
//! ```
//!
//! with `c = 3/2` for BDF2 and `c = 1` for the BDF1 start-up step. Writing
//! `B(v) = [v]× + α [v]×²`, the block coupling cell `I` to cell `J` is
//! `B(m^_I) w_IJ`, where `w_IJ` are the Neumann-folded Laplacian weights,
//! and `(c/k) Id` is added on the diagonal. Unknowns are ordered cell-major
//! with the three components interleaved.

mod banded;
mod gmres;

pub use banded::BandedLu;
pub use gmres::{gmres, GmresOutcome};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, VectorField};
use crate::scalar::Real;
use crate::vec3::{self, Mat3, Vec3};

/// Which backward differentiation formula sets the diagonal shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdfOrder {
    One,
    Two,
}

impl BdfOrder {
    /// Coefficient of the new time level, multiplied by `1/k`.
    pub fn leading<T: Real>(self) -> T {
        match self {
            BdfOrder::One => T::one(),
            BdfOrder::Two => T::lit(1.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Banded LU with partial pivoting.
    Direct,
    /// Restarted GMRES, block-Jacobi preconditioned.
    Iterative,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" | "lu" => Ok(Self::Direct),
            "iterative" | "gmres" => Ok(Self::Iterative),
            other => Err(Error::Parse(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Accepted relative residual `||A x - b|| / ||b||`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Krylov dimension between GMRES restarts.
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            tolerance: 1e-10,
            max_iterations: 5000,
            restart: 60,
        }
    }
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self::default()
    }

    pub fn iterative() -> Self {
        Self {
            method: SolverMethod::Iterative,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance {} is not in (0, 1)",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 || self.restart == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and restart must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Neighbor structure of the Neumann-folded Laplacian on one grid. Reused
/// across time steps; only the block values change.
#[derive(Debug, Clone)]
pub struct StencilPattern<T> {
    grid: GridSpec<T>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<T>,
    max_offset: usize,
}

impl<T: Real> StencilPattern<T> {
    pub fn new(grid: GridSpec<T>) -> Self {
        let n = grid.cells();
        let h = grid.spacing();
        let strides = [1, n[0], n[0] * n[1]];
        let mut row_ptr = Vec::with_capacity(grid.n_cells() + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        let mut max_offset = 0;
        row_ptr.push(0);
        for (c, (i, j, k)) in grid.interior().enumerate() {
            let idx = [i, j, k];
            let mut row: Vec<(usize, T)> = Vec::with_capacity(2 * grid.dim() + 1);
            let mut diag = T::zero();
            for a in grid.active_axes() {
                let w = T::one() / (h[a] * h[a]);
                if idx[a] > 1 {
                    row.push((c - strides[a], w));
                    diag = diag - w;
                    max_offset = max_offset.max(strides[a]);
                }
                if idx[a] < n[a] {
                    row.push((c + strides[a], w));
                    diag = diag - w;
                    max_offset = max_offset.max(strides[a]);
                }
            }
            row.push((c, diag));
            row.sort_by_key(|e| e.0);
            for (col, w) in row {
                cols.push(col);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }
        Self {
            grid,
            row_ptr,
            cols,
            weights,
            max_offset,
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Largest cell distance between coupled cells.
    pub fn max_offset(&self) -> usize {
        self.max_offset
    }

    pub fn row(&self, cell: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[cell]..self.row_ptr[cell + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }
}

/// Assembled system `A x = b` with 3×3 blocks.
#[derive(Debug, Clone)]
pub struct BlockSparseSystem<T> {
    pattern: Arc<StencilPattern<T>>,
    blocks: Vec<Mat3<T>>,
    rhs: Vec<Vec3<T>>,
}

/// Builds the system on a fresh pattern. See [`assemble_with`] to reuse one.
pub fn assemble<T: Real>(
    hat_m: &VectorField<T>,
    rhs: Vec<Vec3<T>>,
    step: T,
    alpha: T,
    order: BdfOrder,
) -> Result<BlockSparseSystem<T>> {
    let pattern = Arc::new(StencilPattern::new(*hat_m.grid()));
    assemble_with(&pattern, hat_m, rhs, step, alpha, order)
}

pub fn assemble_with<T: Real>(
    pattern: &Arc<StencilPattern<T>>,
    hat_m: &VectorField<T>,
    rhs: Vec<Vec3<T>>,
    step: T,
    alpha: T,
    order: BdfOrder,
) -> Result<BlockSparseSystem<T>> {
    let grid = pattern.grid();
    if !grid.same_shape(hat_m.grid()) {
        return Err(Error::ShapeMismatch(
            "extrapolated field is on another grid".into(),
        ));
    }
    if rhs.len() != grid.n_cells() {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} cells, grid has {}",
            rhs.len(),
            grid.n_cells()
        )));
    }
    if !(step > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "time step {step} must be positive"
        )));
    }
    if !(alpha >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "damping {alpha} must be non-negative"
        )));
    }
    hat_m.check_finite()?;

    let shift = order.leading::<T>() / step;
    let mut blocks = Vec::with_capacity(pattern.cols.len());
    for (c, (i, j, k)) in grid.interior().enumerate() {
        let m = hat_m.get(i, j, k);
        let s = vec3::skew(m);
        let mut b = s;
        vec3::mat_add_scaled(&mut b, alpha, &vec3::mat_mul(&s, &s));
        for (col, w) in pattern.row(c) {
            let mut blk = [[T::zero(); 3]; 3];
            vec3::mat_add_scaled(&mut blk, w, &b);
            if col == c {
                vec3::mat_add_scaled(&mut blk, T::one(), &vec3::mat_identity(shift));
            }
            blocks.push(blk);
        }
    }
    Ok(BlockSparseSystem {
        pattern: Arc::clone(pattern),
        blocks,
        rhs,
    })
}

impl<T: Real> BlockSparseSystem<T> {
    pub fn n_cells(&self) -> usize {
        self.rhs.len()
    }

    pub fn pattern(&self) -> &StencilPattern<T> {
        &self.pattern
    }

    pub fn rhs(&self) -> &[Vec3<T>] {
        &self.rhs
    }

    /// Blocks of one cell row as `(column cell, block)`.
    pub fn block_row(&self, cell: usize) -> impl Iterator<Item = (usize, &Mat3<T>)> + '_ {
        let r = self.pattern.row_ptr[cell]..self.pattern.row_ptr[cell + 1];
        self.pattern.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.blocks[r].iter())
    }

    pub fn diagonal_block(&self, cell: usize) -> Mat3<T> {
        *self
            .block_row(cell)
            .find(|(c, _)| *c == cell)
            .map(|(_, b)| b)
            .expect("every row stores its diagonal block")
    }

    pub fn apply(&self, x: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let mut y = vec![vec3::zero(); self.n_cells()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[Vec3<T>], y: &mut [Vec3<T>]) {
        for (c, out) in y.iter_mut().enumerate() {
            let mut acc = vec3::zero();
            for (col, b) in self.block_row(c) {
                acc = vec3::add(acc, vec3::mat_vec(b, x[col]));
            }
            *out = acc;
        }
    }

    /// `b - A x` with every row accumulated in error-free arithmetic and
    /// rounded once. With `1/k` much smaller than `1/h²` the residual is a
    /// large cancellation, and plain summation would bury it in rounding.
    pub fn residual_into(&self, x: &[Vec3<T>], r: &mut [Vec3<T>]) {
        for (c, out) in r.iter_mut().enumerate() {
            let b = self.rhs[c];
            for q in 0..3 {
                let (mut s, mut err) = (b[q], T::zero());
                for (col, blk) in self.block_row(c) {
                    for (a, v) in blk[q].iter().zip(x[col]) {
                        let (p, ep) = two_prod(-*a, v);
                        let (t, es) = two_sum(s, p);
                        s = t;
                        err = err + (ep + es);
                    }
                }
                out[q] = s + err;
            }
        }
    }

    /// `||A x - b||_2 / ||b||_2`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[Vec3<T>]) -> f64 {
        let mut r = vec![vec3::zero(); self.n_cells()];
        self.residual_into(x, &mut r);
        let mut r2 = 0.0f64;
        let mut b2 = 0.0f64;
        for (d, b) in r.iter().zip(&self.rhs) {
            for q in 0..3 {
                let d = d[q].to_f64_lossy();
                r2 += d * d;
                let bb = b[q].to_f64_lossy();
                b2 += bb * bb;
            }
        }
        if b2 > 0.0 {
            (r2 / b2).sqrt()
        } else {
            r2.sqrt()
        }
    }
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Veltkamp split into two halves with at most half the mantissa each.
#[inline]
fn split<T: Real>(a: T) -> (T, T) {
    let factor = if T::epsilon() < T::lit(1e-10) {
        134_217_729.0
    } else {
        4097.0
    };
    let c = T::lit(factor) * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Dekker's product: `a b = p + e` exactly.
#[inline]
fn two_prod<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Solution of one linear solve with its verified residual.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub x: Vec<Vec3<T>>,
    pub residual: f64,
    pub iterations: usize,
}

/// Iterative refinement against the accurate residual, used only when the
/// plain solve misses the tolerance (large `k`, where `b` is tiny against
/// the exchange blocks).
fn refine<T: Real>(
    system: &BlockSparseSystem<T>,
    lu: &BandedLu<T>,
    mut x: Vec<Vec3<T>>,
    tol: f64,
) -> Vec<Vec3<T>> {
    let mut best = system.relative_residual(&x);
    let mut r = vec![vec3::zero(); system.n_cells()];
    for _ in 0..4 {
        if best <= tol {
            break;
        }
        system.residual_into(&x, &mut r);
        let dx = lu.solve(&r);
        let candidate: Vec<_> = x.iter().zip(&dx).map(|(a, d)| vec3::add(*a, *d)).collect();
        let res = system.relative_residual(&candidate);
        if !(res < best) {
            break;
        }
        best = res;
        x = candidate;
    }
    x
}

/// Solves the system, optionally from an initial guess (used only by the
/// iterative path). The residual is always recomputed from the returned
/// solution.
pub fn solve<T: Real>(
    system: &BlockSparseSystem<T>,
    config: &SolverConfig,
    guess: Option<&[Vec3<T>]>,
) -> Result<Solution<T>> {
    config.validate()?;
    let (x, iterations) = match config.method {
        SolverMethod::Direct => {
            let lu = BandedLu::factor(system)?;
            (
                refine(system, &lu, lu.solve(system.rhs()), config.tolerance),
                1,
            )
        }
        SolverMethod::Iterative => {
            let out = gmres(system, guess, config)?;
            (out.x, out.iterations)
        }
    };
    let residual = system.relative_residual(&x);
    if !(residual <= config.tolerance) {
        return Err(match config.method {
            SolverMethod::Iterative => Error::SolverBreakdown {
                iterations,
                residual,
            },
            SolverMethod::Direct => Error::ResidualTooLarge {
                residual,
                tolerance: config.tolerance,
            },
        });
    }
    Ok(Solution {
        x,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n = vec3::norm(v);
            if n > 0.1 {
                return vec3::scale(1.0 / n, v);
            }
        }
    }

    fn random_system(
        grid: GridSpec<f64>,
        step: f64,
        seed: u64,
    ) -> (VectorField<f64>, BlockSparseSystem<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<_> = (0..grid.n_cells()).map(|_| random_unit(&mut rng)).collect();
        let hat = VectorField::from_interior(grid, &m).unwrap();
        let rhs: Vec<_> = (0..grid.n_cells())
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let sys = assemble(&hat, rhs, step, 0.01, BdfOrder::Two).unwrap();
        (hat, sys)
    }

    #[test]
    fn single_cell_is_diagonal() {
        let g = GridSpec::<f64>::line(1).unwrap();
        let hat = VectorField::constant(g, [0.0, 0.6, 0.8]);
        let k = 0.1;
        let sys = assemble(&hat, vec![[1.0, 2.0, 3.0]], k, 0.5, BdfOrder::Two).unwrap();
        let sol = solve(&sys, &SolverConfig::direct(), None).unwrap();
        let s = 2.0 * k / 3.0;
        for q in 0..3 {
            assert!((sol.x[0][q] - s * (q + 1) as f64).abs() < 1e-15);
        }
        assert!(sol.residual < 1e-15);
    }

    #[test]
    fn zero_extrapolation_gives_diagonal_system() {
        let g = GridSpec::<f64>::line(5).unwrap();
        let hat = VectorField::zeros(g);
        let rhs: Vec<_> = (0..5).map(|c| [c as f64, 1.0, -2.0]).collect();
        let k = 0.02;
        let sys = assemble(&hat, rhs.clone(), k, 0.1, BdfOrder::Two).unwrap();
        for method in [SolverConfig::direct(), SolverConfig::iterative()] {
            let sol = solve(&sys, &method, None).unwrap();
            for (x, b) in sol.x.iter().zip(&rhs) {
                for q in 0..3 {
                    assert!((x[q] - 2.0 * k / 3.0 * b[q]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn block_rows_are_sparse() {
        for g in [
            GridSpec::<f64>::line(6).unwrap(),
            GridSpec::cube(4).unwrap(),
        ] {
            let p = StencilPattern::new(g);
            for c in 0..g.n_cells() {
                assert!(p.row(c).count() <= 2 * g.dim() + 1);
                // Neumann folding keeps row sums zero.
                let s: f64 = p.row(c).map(|(_, w)| w).sum();
                assert!(s.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rhs_enters_linearly() {
        let g = GridSpec::<f64>::line(4).unwrap();
        let hat = VectorField::constant(g, [1.0, 0.0, 0.0]);
        let r1 = [[0.1, 0.2, 0.3]; 4];
        let r2 = vec![[1.0, -1.0, 0.5]; 4];
        let sum: Vec<_> = r1.iter().zip(&r2).map(|(a, b)| vec3::add(*a, *b)).collect();
        let sys = assemble(&hat, sum.clone(), 0.1, 0.1, BdfOrder::Two).unwrap();
        assert_eq!(sys.rhs(), &sum[..]);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let g = GridSpec::<f64>::cube(5).unwrap();
        let (_, sys) = random_system(g, 1e-3, 7);
        let a = solve(&sys, &SolverConfig::direct(), None).unwrap();
        let b = solve(&sys, &SolverConfig::iterative(), None).unwrap();
        let diff: f64 =
            a.x.iter()
                .zip(&b.x)
                .map(|(u, v)| vec3::dot(vec3::sub(*u, *v), vec3::sub(*u, *v)))
                .sum::<f64>()
                .sqrt()
                * g.cell_volume().sqrt();
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn solved_update_satisfies_the_step_equation() {
        use crate::ops::laplacian;
        let g = GridSpec::<f64>::line(8).unwrap();
        let (hat, sys) = random_system(g, 0.05, 11);
        let sol = solve(&sys, &SolverConfig::direct(), None).unwrap();
        let mt = VectorField::from_interior(g, &sol.x).unwrap();
        let lap = laplacian(&mt).unwrap();
        for c in 0..g.n_cells() {
            let m = hat.cell(c);
            let l = lap.cell(c);
            let lhs = vec3::add(
                vec3::add(vec3::scale(1.5 / 0.05, mt.cell(c)), vec3::cross(m, l)),
                vec3::scale(0.01, vec3::triple(m, l)),
            );
            let r = vec3::sub(lhs, sys.rhs()[c]);
            assert!(vec3::max_abs(r) <= 1e-12, "{r:?}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = GridSpec::<f64>::line(2).unwrap();
        let hat = VectorField::zeros(g);
        assert!(assemble(&hat, vec![[0.0; 3]; 2], 0.0, 0.1, BdfOrder::Two).is_err());
        assert!(assemble(&hat, vec![[0.0; 3]; 2], 0.1, -1.0, BdfOrder::Two).is_err());
        assert!(assemble(&hat, vec![[0.0; 3]; 3], 0.1, 0.1, BdfOrder::Two).is_err());
        let bad = SolverConfig {
            tolerance: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
