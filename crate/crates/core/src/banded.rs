//! Banded LU factorisation with partial pivoting (column-major band storage,
//! same layout and elimination order as LAPACK's gbtf2/gbtrs).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandedError {
    #[error("zero pivot in column {0}")]
    Singular(usize),
    #[error("entry ({row}, {col}) lies outside the declared band")]
    OutsideBand { row: usize, col: usize },
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factorises the n×n matrix given by `entries` with kl sub- and ku super-diagonals.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, BandedError> {
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for (i, j, v) in entries {
            if i > j + kl || j > i + ku {
                return Err(BandedError::OutsideBand { row: i, col: j });
            }
            ab[kv + i - j + j * ldab] += v;
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ldab
    }

    fn eliminate(&mut self) -> Result<(), BandedError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let ldab = self.ldab;
        let kv = kl + ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = self.ab[col + kv].abs();
            for p in 1..=km {
                let a = self.ab[col + kv + p].abs();
                if a > best {
                    best = a;
                    jp = p;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(BandedError::Singular(j));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.at(j + jp, c);
                    let b = self.at(j, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[col + kv];
                for p in 1..=km {
                    self.ab[col + kv + p] *= inv;
                }
                for c in (j + 1)..=ju {
                    let ujc = self.ab[self.at(j, c)];
                    if ujc == 0.0 {
                        continue;
                    }
                    let base_c = self.at(j, c);
                    for p in 1..=km {
                        let l = self.ab[col + kv + p];
                        self.ab[base_c + p] -= l * ujc;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let lm = self.kl.min(n - 1 - j);
                let col = j * self.ldab + kv;
                for p in 1..=lm {
                    b[j + p] -= self.ab[col + p] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ldab;
            b[j] /= self.ab[col + kv];
            let bj = b[j];
            if bj != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= self.ab[col + kv + i - j] * bj;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_residual(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in a.iter().enumerate() {
            let s: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
            worst = worst.max((s - b[i]).abs());
        }
        worst
    }

    #[test]
    fn solves_random_banded_systems_needing_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (40, 3, 5), (60, 7, 2)] {
            let mut dense = vec![vec![0.0; n]; n];
            let mut entries = Vec::new();
            for (i, row) in dense.iter_mut().enumerate() {
                for (j, slot) in row.iter_mut().enumerate() {
                    if i <= j + kl && j <= i + ku {
                        // small diagonal forces row exchanges
                        let v = if i == j { 1e-3 * rng.random::<f64>() } else { rng.random::<f64>() - 0.5 };
                        *slot = v;
                        entries.push((i, j, v));
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let lu = BandedLu::factor(n, kl, ku, entries).unwrap();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            assert!(dense_residual(&dense, &x, &b) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        let e = BandedLu::factor(3, 1, 1, vec![(0, 0, 0.0)]);
        assert_eq!(e.unwrap_err(), BandedError::Singular(0));
    }

    #[test]
    fn rejects_entries_outside_band() {
        let e = BandedLu::factor(4, 1, 1, vec![(3, 0, 1.0)]);
        assert!(matches!(e, Err(BandedError::OutsideBand { .. })));
    }
}
