//! Manufactured exact solutions and the forcing that makes them solve the
//! forced Landau-Lifshitz equation
//! `m_t = -m × Δm - α m × (m × Δm) + f`.
//!
//! Both solutions have the shape `(cos ψ sin t, sin ψ sin t, cos t)` with
//! `ψ = X` in 1-D and `ψ = X Y Z` in 3-D, where `X = x²(1 - x)²`. Since
//! `X'(0) = X'(1) = 0` they satisfy the homogeneous Neumann condition.

use crate::scalar::Real;
use crate::vec3::{self, Vec3};

/// `s²(1 - s)²` and its first two derivatives.
#[inline]
fn bump<T: Real>(s: T) -> (T, T, T) {
    let one = T::one();
    let two = T::lit(2.0);
    let u = s * (one - s);
    let d1 = two * s - T::lit(6.0) * s * s + T::lit(4.0) * s * s * s;
    let d2 = two - T::lit(12.0) * s + T::lit(12.0) * s * s;
    (u * u, d1, d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedSolution {
    /// `ψ = x²(1-x)²`
    Line,
    /// `ψ = X Y Z`
    Cube,
}

impl ManufacturedSolution {
    pub fn for_dim(dim: usize) -> Option<Self> {
        match dim {
            1 => Some(Self::Line),
            3 => Some(Self::Cube),
            _ => None,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Self::Line => 1,
            Self::Cube => 3,
        }
    }

    /// Phase `ψ`, its squared gradient and its Laplacian.
    fn phase<T: Real>(self, p: Vec3<T>) -> (T, T, T) {
        match self {
            Self::Line => {
                let (x, dx, ddx) = bump(p[0]);
                (x, dx * dx, ddx)
            }
            Self::Cube => {
                let (x, dx, ddx) = bump(p[0]);
                let (y, dy, ddy) = bump(p[1]);
                let (z, dz, ddz) = bump(p[2]);
                let gx = dx * y * z;
                let gy = x * dy * z;
                let gz = x * y * dz;
                (
                    x * y * z,
                    gx * gx + gy * gy + gz * gz,
                    ddx * y * z + x * ddy * z + x * y * ddz,
                )
            }
        }
    }

    pub fn value<T: Real>(self, p: Vec3<T>, t: T) -> Vec3<T> {
        let (psi, _, _) = self.phase(p);
        let st = t.sin();
        [psi.cos() * st, psi.sin() * st, t.cos()]
    }

    pub fn time_derivative<T: Real>(self, p: Vec3<T>, t: T) -> Vec3<T> {
        let (psi, _, _) = self.phase(p);
        let ct = t.cos();
        [psi.cos() * ct, psi.sin() * ct, -t.sin()]
    }

    /// `Δ cos ψ = -sin ψ Δψ - cos ψ |∇ψ|²`, `Δ sin ψ = cos ψ Δψ - sin ψ |∇ψ|²`.
    pub fn laplacian<T: Real>(self, p: Vec3<T>, t: T) -> Vec3<T> {
        let (psi, grad_sq, lap) = self.phase(p);
        let (s, c) = psi.sin_cos();
        let st = t.sin();
        [
            (-s * lap - c * grad_sq) * st,
            (c * lap - s * grad_sq) * st,
            T::zero(),
        ]
    }

    /// `f = m_t + m × Δm + α m × (m × Δm)` evaluated from the closed forms.
    pub fn forcing<T: Real>(self, p: Vec3<T>, t: T, alpha: T) -> Vec3<T> {
        let m = self.value(p, t);
        let lap = self.laplacian(p, t);
        let mt = self.time_derivative(p, t);
        vec3::axpy(
            vec3::add(mt, vec3::cross(m, lap)),
            alpha,
            vec3::triple(m, lap),
        )
    }
}

/// 1-D exact solution.
pub fn exact_1d<T: Real>(x: T, t: T) -> Vec3<T> {
    ManufacturedSolution::Line.value([x, T::zero(), T::zero()], t)
}

/// 3-D exact solution.
pub fn exact_3d<T: Real>(x: T, y: T, z: T, t: T) -> Vec3<T> {
    ManufacturedSolution::Cube.value([x, y, z], t)
}
