//! Solves (Id − s·A) x = b by eliminating the positions:
//! (M + s²K + sG) p = M b_p − sK b_q,   q = b_q + s p.

use crate::banded::BandedLu;
use crate::dynamics::system::FirstOrderSystem;
use crate::dynamics::DynamicsError;
use crate::sparse::Triplets;

/// Residual tolerance of the full 10N system after refinement.
pub const SOLVE_TOLERANCE: f64 = 1e-12;
const REFINE_TARGET: f64 = 1e-15;
const MAX_REFINE: usize = 4;

pub struct ImplicitSolver<'a> {
    sys: &'a FirstOrderSystem,
    s: f64,
    lu: BandedLu,
    /// field-major 5N index → banded index
    perm: Vec<usize>,
}

impl<'a> ImplicitSolver<'a> {
    pub fn new(sys: &'a FirstOrderSystem, s: f64) -> Result<Self, DynamicsError> {
        let g = sys.grid;
        let n = g.len();
        // node-interleaved ordering with the shorter grid axis running fastest
        let mut node_rank = vec![0usize; n];
        for j in 0..g.ny {
            for i in 0..g.nx {
                node_rank[g.index(i, j)] = if g.nx <= g.ny { j * g.nx + i } else { i * g.ny + j };
            }
        }
        let mut perm = vec![0usize; 5 * n];
        for a in 0..5 {
            for k in 0..n {
                perm[a * n + k] = 5 * node_rank[k] + a;
            }
        }
        let mut t = Triplets::new(5 * n, 5 * n);
        t.add_block(0, 0, &sys.mass.to_csr(n), 1.0);
        t.add_block(0, 0, &sys.stiffness, s * s);
        t.add_block(0, 0, &sys.coupling, s);
        let m = t.into_csr();
        let (mut kl, mut ku) = (0usize, 0usize);
        let entries: Vec<(usize, usize, f64)> = m
            .triplets()
            .map(|(r, c, v)| {
                let (pr, pc) = (perm[r], perm[c]);
                if pr > pc {
                    kl = kl.max(pr - pc);
                } else {
                    ku = ku.max(pc - pr);
                }
                (pr, pc, v)
            })
            .collect();
        let lu = BandedLu::factor(5 * n, kl, ku, entries)
            .map_err(|e| DynamicsError::SolverFailure(e.to_string()))?;
        Ok(ImplicitSolver { sys, s, lu, perm })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    fn reduced_solve(&self, b: &[f64]) -> Vec<f64> {
        let sys = self.sys;
        let n = sys.n();
        let (bq, bp) = sys.split(b);
        let mut rhs = vec![0.0; 5 * n];
        sys.mass.apply(n, &bp, &mut rhs, false);
        let kq = sys.stiffness.mul_vec(&bq);
        for (r, k) in rhs.iter_mut().zip(&kq) {
            *r -= self.s * k;
        }
        let mut work = vec![0.0; 5 * n];
        for (idx, &v) in rhs.iter().enumerate() {
            work[self.perm[idx]] = v;
        }
        self.lu.solve_in_place(&mut work);
        let p: Vec<f64> = (0..5 * n).map(|idx| work[self.perm[idx]]).collect();
        let q: Vec<f64> = bq.iter().zip(&p).map(|(a, b)| a + self.s * b).collect();
        let mut x = vec![0.0; 10 * n];
        sys.join(&q, &p, &mut x);
        x
    }

    /// ‖b − (x − sAx)‖ / ‖b‖ and the residual vector.
    fn residual(&self, x: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
        let ax = self.sys.generator.mul_vec(x);
        let r: Vec<f64> = b
            .iter()
            .zip(x)
            .zip(&ax)
            .map(|((bi, xi), ai)| bi - (xi - self.s * ai))
            .collect();
        let nb = norm(b);
        let nr = norm(&r);
        (if nb == 0.0 { nr } else { nr / nb }, r)
    }

    /// Solves with iterative refinement; fails if the relative residual stays above 1e−12.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let mut x = self.reduced_solve(b);
        let (mut rel, mut r) = self.residual(&x, b);
        let mut it = 0;
        while rel > REFINE_TARGET && it < MAX_REFINE && rel.is_finite() {
            let dx = self.reduced_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
            let next = self.residual(&x, b);
            rel = next.0;
            r = next.1;
            it += 1;
        }
        if !(rel <= SOLVE_TOLERANCE) {
            return Err(DynamicsError::SolverFailure(format!(
                "relative residual {rel:e} after {it} refinement steps"
            )));
        }
        Ok(x)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
