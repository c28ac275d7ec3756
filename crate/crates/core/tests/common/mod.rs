#![allow(dead_code, clippy::needless_range_loop)]

use llproj::vec3::{self, Vec3};
use llproj::{Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ]
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = random_vec(rng);
        let n = vec3::norm(v);
        if n > 0.1 {
            return vec3::scale(1.0 / n, v);
        }
    }
}

/// Ghost-filled field with independent uniform entries.
pub fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let v: Vec<_> = (0..grid.n_cells()).map(|_| random_vec(rng)).collect();
    Field::from_interior(grid, &v).unwrap()
}

pub fn random_unit_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let v: Vec<_> = (0..grid.n_cells()).map(|_| random_unit(rng)).collect();
    Field::from_interior(grid, &v).unwrap()
}

/// Smooth unit field `(cos a sin b, sin a sin b, cos b)` with random phases.
pub fn smooth_unit_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
    Field::from_fn(grid, |x| {
        let a = c[0] * x[0] + c[1] * x[1] * x[1] + c[2] * x[2];
        let b = 0.6 + 0.3 * (c[3] * x[0] + c[4] * x[1] + c[5] * x[2]).sin();
        [a.cos() * b.sin(), a.sin() * b.sin(), b.cos()]
    })
    .unwrap()
}

/// Random 1-D or 3-D grid with small cell counts and extents in [0.5, 2].
pub fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    if rng.gen_bool(0.5) {
        Grid::new(
            1,
            [rng.gen_range(1..30), 1, 1],
            [rng.gen_range(0.5..2.0), 1.0, 1.0],
        )
        .unwrap()
    } else {
        let n = [
            rng.gen_range(1..6),
            rng.gen_range(1..6),
            rng.gen_range(1..6),
        ];
        let l = [
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..2.0),
        ];
        Grid::new(3, n, l).unwrap()
    }
}

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for j in 0..n {
        let p = (j..n)
            .max_by(|&r, &s| a[r][j].abs().total_cmp(&a[s][j].abs()))
            .unwrap();
        a.swap(j, p);
        b.swap(j, p);
        for r in j + 1..n {
            let l = a[r][j] / a[j][j];
            for c in j..n {
                a[r][c] -= l * a[j][c];
            }
            b[r] -= l * b[j];
        }
    }
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let s: f64 = (j + 1..n).map(|c| a[j][c] * x[c]).sum();
        x[j] = (b[j] - s) / a[j][j];
    }
    x
}
