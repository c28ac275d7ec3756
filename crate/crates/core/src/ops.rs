//! Discrete operators, inner products and norms on cell-centered fields.

use crate::error::{Error, Result};
use crate::mesh::{GridSpec, VectorField};
use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// Projection refuses to normalize cells shorter than this.
pub const PROJECTION_FLOOR: f64 = 1e-8;

/// Seven-point (three-point in 1-D) Laplacian at one interior cell. Reads
/// ghost values, so the caller must keep them fresh.
#[inline]
pub fn laplacian_at<T: Real>(f: &VectorField<T>, i: usize, j: usize, k: usize) -> Vec3<T> {
    let g = f.grid();
    let h = g.spacing();
    let c = f.get(i, j, k);
    let two = T::lit(2.0);
    let mut out = vec3::zero();
    for a in g.active_axes() {
        let (lo, hi) = match a {
            0 => (f.get(i - 1, j, k), f.get(i + 1, j, k)),
            1 => (f.get(i, j - 1, k), f.get(i, j + 1, k)),
            _ => (f.get(i, j, k - 1), f.get(i, j, k + 1)),
        };
        let w = T::one() / (h[a] * h[a]);
        for q in 0..3 {
            out[q] = out[q] + w * (hi[q] - two * c[q] + lo[q]);
        }
    }
    out
}

/// Discrete Laplacian on all interior cells.
pub fn laplacian<T: Real>(f: &VectorField<T>) -> Result<VectorField<T>> {
    if !f.ghosts_fresh() {
        return Err(Error::StaleGhosts);
    }
    let g = *f.grid();
    let values: Vec<_> = g
        .interior()
        .map(|(i, j, k)| laplacian_at(f, i, j, k))
        .collect();
    VectorField::from_interior(g, &values)
}

/// Forward differences on the interior faces of each active axis.
///
/// Along axis `a` the face between cells `i` and `i + 1` exists for
/// `1 <= i < n_a`; boundary faces carry zero flux under the ghost-copy rule
/// and are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField<T> {
    grid: GridSpec<T>,
    faces: [Vec<Vec3<T>>; 3],
}

impl<T: Real> FaceField<T> {
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Face values normal to `axis`, ordered like cells with the face
    /// index running over `1..n_a` on that axis.
    pub fn axis(&self, axis: usize) -> &[Vec3<T>] {
        &self.faces[axis]
    }

    pub fn face_count(&self) -> usize {
        self.faces.iter().map(Vec::len).sum()
    }

    /// Face value between cell `(i, j, k)` and its `+axis` neighbor.
    pub fn at(&self, axis: usize, i: usize, j: usize, k: usize) -> Vec3<T> {
        let n = self.grid.cells();
        let mut m = n;
        m[axis] -= 1;
        self.faces[axis][((k - 1) * m[1] + (j - 1)) * m[0] + (i - 1)]
    }

    fn values(&self) -> impl Iterator<Item = &Vec3<T>> {
        self.faces.iter().flatten()
    }
}

pub fn gradient<T: Real>(f: &VectorField<T>) -> FaceField<T> {
    let g = *f.grid();
    let n = g.cells();
    let h = g.spacing();
    let mut faces: [Vec<Vec3<T>>; 3] = Default::default();
    for a in g.active_axes() {
        let mut m = n;
        m[a] -= 1;
        let inv_h = T::one() / h[a];
        let mut out = Vec::with_capacity(m[0] * m[1] * m[2]);
        for k in 1..=m[2] {
            for j in 1..=m[1] {
                for i in 1..=m[0] {
                    let next = match a {
                        0 => f.get(i + 1, j, k),
                        1 => f.get(i, j + 1, k),
                        _ => f.get(i, j, k + 1),
                    };
                    out.push(vec3::scale(inv_h, vec3::sub(next, f.get(i, j, k))));
                }
            }
        }
        faces[a] = out;
    }
    FaceField { grid: g, faces }
}

/// Weighted discrete inner product: cell volume times the sum of pointwise
/// dot products. Ghost cells never contribute.
pub trait GridInner<T: Real> {
    fn inner(&self, other: &Self) -> Result<T>;
}

impl<T: Real> GridInner<T> for VectorField<T> {
    fn inner(&self, other: &Self) -> Result<T> {
        if !self.grid().same_shape(other.grid()) {
            return Err(Error::ShapeMismatch(
                "fields live on different grids".into(),
            ));
        }
        let g = self.grid();
        let s: T = g
            .interior()
            .map(|(i, j, k)| vec3::dot(self.get(i, j, k), other.get(i, j, k)))
            .sum();
        Ok(g.cell_volume() * s)
    }
}

impl<T: Real> GridInner<T> for FaceField<T> {
    fn inner(&self, other: &Self) -> Result<T> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::ShapeMismatch(
                "face arrays live on different grids".into(),
            ));
        }
        let s: T = self
            .values()
            .zip(other.values())
            .map(|(a, b)| vec3::dot(*a, *b))
            .sum();
        Ok(self.grid.cell_volume() * s)
    }
}

pub fn inner<T: Real, F: GridInner<T>>(a: &F, b: &F) -> Result<T> {
    a.inner(b)
}

pub fn norm_l2<T: Real>(f: &VectorField<T>) -> T {
    let g = f.grid();
    let s: T = g
        .interior()
        .map(|(i, j, k)| {
            let v = f.get(i, j, k);
            vec3::dot(v, v)
        })
        .sum();
    (g.cell_volume() * s).sqrt()
}

/// Largest componentwise magnitude over interior cells.
pub fn norm_inf<T: Real>(f: &VectorField<T>) -> T {
    f.grid()
        .interior()
        .map(|(i, j, k)| vec3::max_abs(f.get(i, j, k)))
        .fold(T::zero(), T::max)
}

/// Squared discrete gradient norm, `|| grad_h f ||_2^2`.
pub fn gradient_norm_sq<T: Real>(f: &VectorField<T>) -> T {
    let grad = gradient(f);
    let s: T = grad.values().map(|v| vec3::dot(*v, *v)).sum();
    f.grid().cell_volume() * s
}

pub fn norm_h1<T: Real>(f: &VectorField<T>) -> T {
    let l2 = norm_l2(f);
    (l2 * l2 + gradient_norm_sq(f)).sqrt()
}

/// Pointwise `a × b`.
pub fn cross_fields<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> Result<VectorField<T>> {
    a.zip_interior(b, vec3::cross)
}

/// Pointwise `a × (a × b)`.
pub fn triple_fields<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> Result<VectorField<T>> {
    a.zip_interior(b, vec3::triple)
}

/// Normalizes every interior cell to unit length.
pub fn project<T: Real>(f: &VectorField<T>) -> Result<VectorField<T>> {
    let g = *f.grid();
    let floor = T::lit(PROJECTION_FLOOR);
    let mut values = Vec::with_capacity(g.n_cells());
    for (i, j, k) in g.interior() {
        let v = f.get(i, j, k);
        let len = vec3::norm(v);
        if !(len >= floor) {
            return Err(Error::DegenerateMagnitude {
                i,
                j,
                k,
                magnitude: len.to_f64_lossy(),
            });
        }
        values.push(vec3::scale(T::one() / len, v));
    }
    VectorField::from_interior(g, &values)
}

/// Exchange energy `(1/2) || grad_h m ||_2^2`.
pub fn exchange_energy<T: Real>(f: &VectorField<T>) -> T {
    T::lit(0.5) * gradient_norm_sq(f)
}
