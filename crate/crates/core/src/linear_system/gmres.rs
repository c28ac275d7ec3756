use super::{BlockSparseSystem, SolverConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::{self, Mat3, Vec3};

#[derive(Debug, Clone)]
pub struct GmresOutcome<T> {
    pub x: Vec<Vec3<T>>,
    pub iterations: usize,
    /// Relative residual of the final iterate, recomputed from scratch.
    pub residual: f64,
}

fn dot<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
    a.iter().zip(b).map(|(u, v)| vec3::dot(*u, *v)).sum()
}

fn norm<T: Real>(a: &[Vec3<T>]) -> T {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right block-Jacobi preconditioning. Convergence is
/// declared on the true residual `||b - A x|| / ||b||` at the end of a cycle.
pub fn gmres<T: Real>(
    system: &BlockSparseSystem<T>,
    guess: Option<&[Vec3<T>]>,
    config: &SolverConfig,
) -> Result<GmresOutcome<T>> {
    let n = system.n_cells();
    let b = system.rhs();
    let tol = T::lit(config.tolerance);
    let m = config.restart.min(3 * n).max(1);

    let precond: Vec<Mat3<T>> = (0..n)
        .map(|c| {
            vec3::mat_inverse(&system.diagonal_block(c)).ok_or(Error::SingularFactor { row: 3 * c })
        })
        .collect::<Result<_>>()?;
    let apply_precond = |v: &[Vec3<T>], out: &mut [Vec3<T>]| {
        for ((o, p), x) in out.iter_mut().zip(&precond).zip(v) {
            *o = vec3::mat_vec(p, *x);
        }
    };

    let mut x: Vec<Vec3<T>> = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![vec3::zero(); n],
    };
    let b_norm = norm(b);
    if b_norm == T::zero() {
        return Ok(GmresOutcome {
            x: vec![vec3::zero(); n],
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut r = vec![vec3::zero(); n];
    let mut w = vec![vec3::zero(); n];
    let mut z = vec![vec3::zero(); n];
    let residual_into = |x: &[Vec3<T>], r: &mut [Vec3<T>]| system.residual_into(x, r);

    let mut basis: Vec<Vec<Vec3<T>>> = vec![vec![vec3::zero(); n]; m + 1];
    let mut hess = vec![vec![T::zero(); m]; m + 1];
    let mut cs = vec![T::zero(); m];
    let mut sn = vec![T::zero(); m];
    let mut g = vec![T::zero(); m + 1];

    residual_into(&x, &mut r);
    let mut beta = norm(&r);
    let mut iterations = 0;
    let mut previous_cycle = beta;

    loop {
        if beta <= tol * b_norm {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::SolverBreakdown {
                iterations,
                residual: (beta / b_norm).to_f64_lossy(),
            });
        }
        let inv_beta = T::one() / beta;
        for (v, ri) in basis[0].iter_mut().zip(&r) {
            *v = vec3::scale(inv_beta, *ri);
        }
        g.iter_mut().for_each(|e| *e = T::zero());
        g[0] = beta;

        let mut used = 0;
        for j in 0..m {
            apply_precond(&basis[j], &mut z);
            system.apply_into(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                hess[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk = vec3::axpy(*wk, -hij, *vk);
                }
            }
            let h_next = norm(&w);
            hess[j + 1][j] = h_next;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (a, bb) = (hess[j][j], hess[j + 1][j]);
            let rho = a.hypot(bb);
            if rho == T::zero() {
                cs[j] = T::one();
                sn[j] = T::zero();
            } else {
                cs[j] = a / rho;
                sn[j] = bb / rho;
            }
            hess[j][j] = rho;
            hess[j + 1][j] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            iterations += 1;
            used = j + 1;
            let lucky = h_next <= T::epsilon() * beta;
            if !lucky {
                let inv = T::one() / h_next;
                for (v, wk) in basis[j + 1].iter_mut().zip(&w) {
                    *v = vec3::scale(inv, *wk);
                }
            }
            if lucky || g[j + 1].abs() <= tol * b_norm || iterations >= config.max_iterations {
                break;
            }
        }

        // back substitution for the Krylov coefficients
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for t in i + 1..used {
                s = s - hess[i][t] * y[t];
            }
            y[i] = if hess[i][i] == T::zero() {
                T::zero()
            } else {
                s / hess[i][i]
            };
        }
        for e in w.iter_mut() {
            *e = vec3::zero();
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk = vec3::axpy(*wk, *yi, *vk);
            }
        }
        apply_precond(&w, &mut z);
        for (xk, zk) in x.iter_mut().zip(&z) {
            *xk = vec3::add(*xk, *zk);
        }

        residual_into(&x, &mut r);
        beta = norm(&r);
        if !beta.is_finite() {
            return Err(Error::SolverBreakdown {
                iterations,
                residual: f64::INFINITY,
            });
        }
        // A full cycle with no progress will not recover.
        if beta > tol * b_norm && beta >= previous_cycle * T::lit(0.999_999) && used == m {
            return Err(Error::SolverBreakdown {
                iterations,
                residual: (beta / b_norm).to_f64_lossy(),
            });
        }
        previous_cycle = beta;
    }

    Ok(GmresOutcome {
        residual: (beta / b_norm).to_f64_lossy(),
        x,
        iterations,
    })
}
