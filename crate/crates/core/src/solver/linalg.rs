//! Banded LU with partial pivoting for the Newton systems.
//!
//! Unknowns are renumbered ring by ring with a folded angular order
//! (0, n-1, 1, n-2, ...) so that periodic and across-pole couplings stay
//! within a half-bandwidth of about `n_theta + 2`.

use crate::error::{Error, Result};
use crate::hchart::Grid;

/// Node-to-position map that keeps the 9-point polar stencil narrow.
pub fn folded_ordering(grid: &Grid) -> Vec<usize> {
    let nt = grid.n_theta();
    let half = nt / 2;
    (0..grid.len())
        .map(|node| {
            let (i, j) = grid.coords(node);
            let fold = if j < half { 2 * j } else { 2 * (nt - 1 - j) + 1 };
            i * nt + fold
        })
        .collect()
}

/// Square band matrix with room for pivoting fill above the diagonal.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// Builds from `(row, col, value)` triplets; bandwidths are taken from the pattern.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let (mut kl, mut ku) = (0, 0);
        for &(r, c, _) in triplets {
            if r > c {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, upper) = (self.kl, self.kl + self.ku);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let a = self.data[self.idx(r, k)].abs();
                if a > best {
                    best = a;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let m = self.data[ir] / diag;
                self.data[ir] = m;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        let kc = self.data[self.idx(k, c)];
                        let rc = self.idx(r, c);
                        self.data[rc] -= m * kc;
                    }
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let upper = m.kl + m.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + m.kl).min(n - 1) {
                    b[r] -= m.data[m.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + upper).min(n - 1) {
                s -= m.data[m.idx(k, c)] * b[c];
            }
            b[k] = s / m.data[m.idx(k, k)];
        }
    }
}

/// Solves `A x = b` for a sparse `A` given in node numbering.
pub fn solve_sparse(grid: &Grid, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let perm = folded_ordering(grid);
    let n = rhs.len();
    let permuted: Vec<(usize, usize, f64)> = triplets
        .iter()
        .map(|&(r, c, v)| (perm[r], perm[c], v))
        .collect();
    let lu = BandMatrix::from_triplets(n, &permuted).factor()?;
    let mut b = vec![0.0; n];
    for (node, &v) in rhs.iter().enumerate() {
        b[perm[node]] = v;
    }
    lu.solve(&mut b);
    Ok((0..n).map(|node| b[perm[node]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hchart::PolarChart;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let (kl, ku) = (3, 5);
        let mut trip = Vec::new();
        let mut dense = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // weak diagonal forces pivoting
                let v = if r == c { 0.01 } else { rng.gen_range(-1.0..1.0) };
                trip.push((r, c, v));
                dense[(r, c)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lu = BandMatrix::from_triplets(n, &trip).factor().unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        let xd = dense.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-9 * (1.0 + xd[i].abs()), "{i}: {} vs {}", x[i], xd[i]);
        }
    }

    #[test]
    fn singular_detected() {
        let trip = vec![(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)];
        assert!(matches!(BandMatrix::from_triplets(2, &trip).factor(), Err(Error::Singular(_))));
    }

    #[test]
    fn folded_ordering_is_narrow_permutation() {
        let grid = Grid::new(PolarChart::new(2, 0.8).unwrap(), 6, 16).unwrap();
        let perm = folded_ordering(&grid);
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..grid.len()).collect::<Vec<_>>());
        let mut bw = 0;
        for node in 0..grid.len() {
            for other in grid.stencil(node) {
                bw = bw.max(perm[node].abs_diff(perm[other]));
            }
        }
        // boundary rows reach three rings inward
        assert!(bw <= 3 * 16 + 2, "bandwidth {bw}");
        let interior_bw = grid
            .interior_nodes()
            .flat_map(|n| grid.stencil(n).into_iter().map(move |o| (n, o)))
            .map(|(a, b)| perm[a].abs_diff(perm[b]))
            .max()
            .unwrap();
        assert!(interior_bw <= 16 + 2, "interior bandwidth {interior_bw}");
    }
}
