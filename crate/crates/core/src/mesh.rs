//! Cell-centered grids with one ghost layer per active side.
//!
//! Interior cells use 1-based indices `1..=n` on every axis; the ghost cells
//! sit at `0` and `n + 1`. Axes that are inactive (y and z of a 1-D grid)
//! hold a single cell at index 1 and carry no ghosts.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    dim: usize,
    n: [usize; 3],
    extent: [T; 3],
    h: [T; 3],
}

impl<T: Real> GridSpec<T> {
    /// Builds a grid from per-axis cell counts and extents. For `dim == 1`
    /// only the first entry of each array is used.
    pub fn new(dim: usize, cells: [usize; 3], extent: [T; 3]) -> Result<Self> {
        let active = match dim {
            1 => 1,
            3 => 3,
            2 => return Err(Error::InvalidGrid("2-D grids are not supported".into())),
            d => return Err(Error::InvalidGrid(format!("dimension {d} is not 1 or 3"))),
        };
        let mut n = [1usize; 3];
        let mut l = [T::one(); 3];
        for a in 0..active {
            if cells[a] == 0 {
                return Err(Error::InvalidGrid(format!("axis {a} has zero cells")));
            }
            if !(extent[a] > T::zero()) || !extent[a].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has non-positive extent {}",
                    extent[a]
                )));
            }
            n[a] = cells[a];
            l[a] = extent[a];
        }
        let h = [
            l[0] / T::from_usize(n[0]).unwrap(),
            l[1] / T::from_usize(n[1]).unwrap(),
            l[2] / T::from_usize(n[2]).unwrap(),
        ];
        Ok(Self {
            dim,
            n,
            extent: l,
            h,
        })
    }

    /// Unit interval split into `n` cells.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, [n, 1, 1], [T::one(); 3])
    }

    /// Unit cube with `n` cells per axis.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(3, [n; 3], [T::one(); 3])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> [usize; 3] {
        self.n
    }

    pub fn extent(&self) -> [T; 3] {
        self.extent
    }

    pub fn spacing(&self) -> [T; 3] {
        self.h
    }

    pub fn is_active(&self, axis: usize) -> bool {
        axis < self.dim
    }

    pub fn active_axes(&self) -> std::ops::Range<usize> {
        0..self.dim
    }

    /// Number of interior cells.
    pub fn n_cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Quadrature weight of one cell, `h_x` in 1-D and `h_x h_y h_z` in 3-D.
    pub fn cell_volume(&self) -> T {
        self.active_axes().fold(T::one(), |v, a| v * self.h[a])
    }

    /// Cell-center coordinate `(i - 1/2) h` along `axis`. Valid for ghost
    /// indices as well.
    pub fn center_coord(&self, axis: usize, i: usize) -> T {
        (T::from_usize(i).unwrap() - T::lit(0.5)) * self.h[axis]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        [
            self.center_coord(0, i),
            self.center_coord(1, j),
            self.center_coord(2, k),
        ]
    }

    /// Zero-based cell-major index of interior cell `(i, j, k)`, x fastest.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        ((k - 1) * self.n[1] + (j - 1)) * self.n[0] + (i - 1)
    }

    /// Inverse of [`cell_index`](Self::cell_index).
    #[inline]
    pub fn cell_ijk(&self, c: usize) -> (usize, usize, usize) {
        let i = c % self.n[0];
        let r = c / self.n[0];
        (i + 1, r % self.n[1] + 1, r / self.n[1] + 1)
    }

    /// Interior cells in cell-major order.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_cells()).map(move |c| self.cell_ijk(c))
    }

    fn lo(&self, axis: usize) -> usize {
        if self.is_active(axis) {
            0
        } else {
            1
        }
    }

    fn stored(&self, axis: usize) -> usize {
        if self.is_active(axis) {
            self.n[axis] + 2
        } else {
            1
        }
    }

    fn storage_len(&self) -> usize {
        self.stored(0) * self.stored(1) * self.stored(2)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (sx, sy) = (self.stored(0), self.stored(1));
        ((k - self.lo(2)) * sy + (j - self.lo(1))) * sx + (i - self.lo(0))
    }

    /// Same geometry, ignoring rounding in the spacings.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// Three-component samples on every cell of a grid, ghosts included.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: GridSpec<T>,
    data: Vec<Vec3<T>>,
    ghosts_fresh: bool,
}

impl<T: Real> VectorField<T> {
    /// Zero field; ghosts are trivially consistent.
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            data: vec![vec3::zero(); grid.storage_len()],
            grid,
            ghosts_fresh: true,
        }
    }

    pub fn constant(grid: GridSpec<T>, v: Vec3<T>) -> Self {
        Self {
            data: vec![v; grid.storage_len()],
            grid,
            ghosts_fresh: true,
        }
    }

    /// Samples `f` at every interior cell center and fills the ghosts.
    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(Vec3<T>) -> Vec3<T>) -> Result<Self> {
        let mut field = Self::zeros(grid);
        for (i, j, k) in grid.interior() {
            let o = grid.offset(i, j, k);
            field.data[o] = f(grid.center(i, j, k));
        }
        field.fill_ghosts()?;
        Ok(field)
    }

    /// Builds a field from cell-major interior values and fills the ghosts.
    pub fn from_interior(grid: GridSpec<T>, values: &[Vec3<T>]) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        let mut field = Self::zeros(grid);
        for (c, v) in values.iter().enumerate() {
            let (i, j, k) = grid.cell_ijk(c);
            let o = grid.offset(i, j, k);
            field.data[o] = *v;
        }
        field.fill_ghosts()?;
        Ok(field)
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn ghosts_fresh(&self) -> bool {
        self.ghosts_fresh
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        self.data[self.grid.offset(i, j, k)]
    }

    /// Writes one cell and marks the ghost layer stale.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: Vec3<T>) {
        let o = self.grid.offset(i, j, k);
        self.data[o] = v;
        self.ghosts_fresh = false;
    }

    /// Value at zero-based cell-major index `c`.
    #[inline]
    pub fn cell(&self, c: usize) -> Vec3<T> {
        let (i, j, k) = self.grid.cell_ijk(c);
        self.get(i, j, k)
    }

    /// Interior values in cell-major order.
    pub fn interior_values(&self) -> Vec<Vec3<T>> {
        self.grid
            .interior()
            .map(|(i, j, k)| self.get(i, j, k))
            .collect()
    }

    /// Applies `f` to every interior value, then refreshes the ghosts.
    pub fn map_interior(&self, mut f: impl FnMut(Vec3<T>) -> Vec3<T>) -> Result<Self> {
        let values: Vec<_> = self.interior_values().into_iter().map(&mut f).collect();
        Self::from_interior(self.grid, &values)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_interior(
        &self,
        other: &Self,
        mut f: impl FnMut(Vec3<T>, Vec3<T>) -> Vec3<T>,
    ) -> Result<Self> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::ShapeMismatch(
                "fields live on different grids".into(),
            ));
        }
        let values: Vec<_> = self
            .grid
            .interior()
            .map(|(i, j, k)| f(self.get(i, j, k), other.get(i, j, k)))
            .collect();
        Self::from_interior(self.grid, &values)
    }

    /// Fails on the first non-finite interior value.
    pub fn check_finite(&self) -> Result<()> {
        for (i, j, k) in self.grid.interior() {
            if !vec3::is_finite(self.get(i, j, k)) {
                return Err(Error::NonFinite { i, j, k });
            }
        }
        Ok(())
    }

    /// Copies each boundary cell into its adjacent ghost on every active
    /// face, which realizes the homogeneous Neumann condition. Axes are
    /// processed in order so that edge and corner ghosts are also set.
    pub fn fill_ghosts(&mut self) -> Result<()> {
        self.check_finite()?;
        let g = self.grid;
        let n = g.n;
        let (ilo, ihi) = if g.is_active(0) {
            (0, n[0] + 1)
        } else {
            (1, 1)
        };
        let (jlo, jhi) = if g.is_active(1) {
            (0, n[1] + 1)
        } else {
            (1, 1)
        };
        if g.is_active(0) {
            for k in 1..=n[2] {
                for j in 1..=n[1] {
                    self.copy_cell((1, j, k), (0, j, k));
                    self.copy_cell((n[0], j, k), (n[0] + 1, j, k));
                }
            }
        }
        if g.is_active(1) {
            for k in 1..=n[2] {
                for i in ilo..=ihi {
                    self.copy_cell((i, 1, k), (i, 0, k));
                    self.copy_cell((i, n[1], k), (i, n[1] + 1, k));
                }
            }
        }
        if g.is_active(2) {
            for j in jlo..=jhi {
                for i in ilo..=ihi {
                    self.copy_cell((i, j, 1), (i, j, 0));
                    self.copy_cell((i, j, n[2]), (i, j, n[2] + 1));
                }
            }
        }
        self.ghosts_fresh = true;
        Ok(())
    }

    /// Consuming variant of [`fill_ghosts`](Self::fill_ghosts).
    pub fn with_ghosts_filled(mut self) -> Result<Self> {
        self.fill_ghosts()?;
        Ok(self)
    }

    #[inline]
    fn copy_cell(&mut self, from: (usize, usize, usize), to: (usize, usize, usize)) {
        let v = self.data[self.grid.offset(from.0, from.1, from.2)];
        let o = self.grid.offset(to.0, to.1, to.2);
        self.data[o] = v;
    }
}

/// Samples a fine field at the coarse cell centers. Requires every active
/// axis of the fine grid to have exactly three times the coarse cell count
/// over the same extent, in which case coarse cell `i` coincides with fine
/// cell `3i - 1`.
pub fn restrict_factor3<T: Real>(
    fine: &VectorField<T>,
    coarse: &GridSpec<T>,
) -> Result<VectorField<T>> {
    let fg = fine.grid();
    if fg.dim() != coarse.dim() {
        return Err(Error::IncompatibleGrids(format!(
            "dimension {} vs {}",
            fg.dim(),
            coarse.dim()
        )));
    }
    for a in coarse.active_axes() {
        let (nf, nc) = (fg.cells()[a], coarse.cells()[a]);
        if nf != 3 * nc {
            return Err(Error::IncompatibleGrids(format!(
                "axis {a}: {nf} fine cells is not 3 x {nc} coarse cells"
            )));
        }
        let (lf, lc) = (fg.extent()[a], coarse.extent()[a]);
        if (lf - lc).abs() > T::lit(1e-12) * lc.abs() {
            return Err(Error::IncompatibleGrids(format!(
                "axis {a}: extents {lf} and {lc} differ"
            )));
        }
    }
    let fine_index = |a: usize, i: usize| if coarse.is_active(a) { 3 * i - 1 } else { 1 };
    let values: Vec<_> = coarse
        .interior()
        .map(|(i, j, k)| fine.get(fine_index(0, i), fine_index(1, j), fine_index(2, k)))
        .collect();
    VectorField::from_interior(*coarse, &values)
}
