use super::BlockSparseSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Refuse band storage beyond this many entries.
const MAX_BAND_ENTRIES: usize = 1 << 28;

/// LU factorization with partial pivoting in band storage.
///
/// With the cell-major ordering the scalar bandwidth is `3 * max_offset + 2`
/// on each side, i.e. 5 for 1-D grids and `3 n_x n_y + 2` for 3-D ones.
/// Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` columns
/// hold fill from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn factor(system: &BlockSparseSystem<T>) -> Result<Self> {
        let cells = system.n_cells();
        let n = 3 * cells;
        let kl = 3 * system.pattern().max_offset() + 2;
        let ku = kl;
        let width = 2 * kl + ku + 1;
        let entries = n.saturating_mul(width);
        if entries > MAX_BAND_ENTRIES {
            return Err(Error::InvalidParameter(format!(
                "band storage of {entries} entries is too large for the direct solver; \
                 use the iterative solver"
            )));
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![T::zero(); entries],
            pivots: vec![0; n],
        };
        for c in 0..cells {
            for (col, blk) in system.block_row(c) {
                for p in 0..3 {
                    for q in 0..3 {
                        let v = blk[p][q];
                        if v != T::zero() {
                            *lu.at_mut(3 * c + p, 3 * col + q) = v;
                        }
                    }
                }
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline(always)]
    fn pos(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    #[inline(always)]
    fn at(&self, r: usize, c: usize) -> T {
        self.band[self.pos(r, c)]
    }

    #[inline(always)]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        let p = self.pos(r, c);
        &mut self.band[p]
    }

    fn eliminate(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        for j in 0..n {
            let last_row = (j + self.kl).min(n - 1);
            let last_col = (j + reach).min(n - 1);
            let mut p = j;
            let mut best = self.at(j, j).abs();
            for r in j + 1..=last_row {
                let v = self.at(r, j).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::SingularFactor { row: j });
            }
            self.pivots[j] = p;
            if p != j {
                for c in j..=last_col {
                    let (a, b) = (self.pos(j, c), self.pos(p, c));
                    self.band.swap(a, b);
                }
            }
            let inv = T::one() / self.at(j, j);
            for r in j + 1..=last_row {
                let l = self.at(r, j) * inv;
                if l == T::zero() {
                    continue;
                }
                *self.at_mut(r, j) = l;
                let (src, dst) = (self.pos(j, j), self.pos(r, j));
                let len = last_col - j;
                for t in 1..=len {
                    let u = self.band[src + t];
                    self.band[dst + t] = self.band[dst + t] - l * u;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let n = self.n;
        let mut b: Vec<T> = rhs.iter().flatten().copied().collect();
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != T::zero() {
                for r in j + 1..=(j + self.kl).min(n - 1) {
                    b[r] = b[r] - self.at(r, j) * bj;
                }
            }
        }
        let reach = self.kl + self.ku;
        for j in (0..n).rev() {
            let mut s = b[j];
            for c in j + 1..=(j + reach).min(n - 1) {
                s = s - self.at(j, c) * b[c];
            }
            b[j] = s / self.at(j, j);
        }
        b.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }
}
