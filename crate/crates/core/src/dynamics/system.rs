//! Second-order-in-time structure  M ṗ = −K q − G p + F,  q̇ = p.
//!
//! q = (v1, v2, w, τ, ℘) and p = (z1, z2, y, θ, P), each stored field-major
//! with `n` nodes per field. K is symmetric positive definite, M is block
//! diagonal and positive definite, and G = C + R with C skew (the mechanical /
//! thermal coupling) and R symmetric positive semidefinite (rate conduction).

use crate::grid::{
    cell_x_matrix, cell_y_matrix, central_x_matrix, central_y_matrix, laplacian_matrix, Grid,
};
use crate::material::MaterialParams;
use crate::sparse::{CsrMatrix, Triplets};
use crate::state::StateField;

/// Pointwise mass: ρI for each rotation rate, 2hρ for the deflection rate and
/// I·[[c, κ], [κ, r]] for (θ, P).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mass {
    pub rotation: f64,
    pub deflection: f64,
    pub thermal: [[f64; 2]; 2],
    pub thermal_inv: [[f64; 2]; 2],
}

impl Mass {
    pub fn new(p: &MaterialParams) -> Self {
        let i = p.inertia();
        let s = 1.0 / (i * p.delta());
        Mass {
            rotation: p.rho * i,
            deflection: 2.0 * p.half_thickness * p.rho,
            thermal: [[i * p.c, i * p.kappa], [i * p.kappa, i * p.r]],
            thermal_inv: [[s * p.r, -s * p.kappa], [-s * p.kappa, s * p.c]],
        }
    }

    /// Applies M (or M⁻¹ if `inverse`) to a field-major 5-block vector.
    pub fn apply(&self, n: usize, x: &[f64], out: &mut [f64], inverse: bool) {
        let (a, b, t) = if inverse {
            (1.0 / self.rotation, 1.0 / self.deflection, self.thermal_inv)
        } else {
            (self.rotation, self.deflection, self.thermal)
        };
        for k in 0..n {
            out[k] = a * x[k];
            out[n + k] = a * x[n + k];
            out[2 * n + k] = b * x[2 * n + k];
            let th = x[3 * n + k];
            let pp = x[4 * n + k];
            out[3 * n + k] = t[0][0] * th + t[0][1] * pp;
            out[4 * n + k] = t[1][0] * th + t[1][1] * pp;
        }
    }

    /// Entry (a, b) of the 5×5 pointwise block.
    pub fn entry(&self, a: usize, b: usize, inverse: bool) -> f64 {
        let (r, d, t) = if inverse {
            (1.0 / self.rotation, 1.0 / self.deflection, self.thermal_inv)
        } else {
            (self.rotation, self.deflection, self.thermal)
        };
        match (a, b) {
            (0, 0) | (1, 1) => r,
            (2, 2) => d,
            (3..=4, 3..=4) => t[a - 3][b - 3],
            _ => 0.0,
        }
    }

    pub fn to_csr(&self, n: usize) -> CsrMatrix {
        let mut t = Triplets::new(5 * n, 5 * n);
        for a in 0..5 {
            for b in 0..5 {
                let v = self.entry(a, b, false);
                if v != 0.0 {
                    for k in 0..n {
                        t.push(a * n + k, b * n + k, v);
                    }
                }
            }
        }
        t.into_csr()
    }
}

#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    pub grid: Grid,
    pub stiffness: CsrMatrix,
    pub coupling: CsrMatrix,
    pub mass: Mass,
    /// The full 10N generator in state storage order.
    pub generator: CsrMatrix,
}

/// The discrete operators shared by K, C and R.
pub(crate) struct Stencils {
    pub neg_lap: CsrMatrix,
    pub dx: CsrMatrix,
    pub dy: CsrMatrix,
    pub cxx: CsrMatrix,
    pub cxy: CsrMatrix,
    pub cyy: CsrMatrix,
    pub id: CsrMatrix,
}

impl Stencils {
    pub fn new(g: &Grid) -> Self {
        let cx = cell_x_matrix(g);
        let cy = cell_y_matrix(g);
        let cxt = cx.transpose();
        let cyt = cy.transpose();
        Stencils {
            neg_lap: laplacian_matrix(g).scaled(-1.0),
            dx: central_x_matrix(g),
            dy: central_y_matrix(g),
            cxx: cxt.matmul(&cx),
            cxy: cxt.matmul(&cy),
            cyy: cyt.matmul(&cy),
            id: CsrMatrix::identity(g.len()),
        }
    }
}

/// K on (v1, v2, w, τ, ℘), per unit area.
pub(crate) fn stiffness(p: &MaterialParams, g: &Grid, st: &Stencils) -> CsrMatrix {
    let n = g.len();
    let i = p.inertia();
    let h2 = 2.0 * p.half_thickness;
    let lm = i * (p.lambda + p.mu);
    let mut t = Triplets::new(5 * n, 5 * n);
    // rotations
    t.add_block(0, 0, &st.neg_lap, i * p.mu);
    t.add_block(0, 0, &st.cxx, lm);
    t.add_block(0, 0, &st.id, h2 * p.mu);
    t.add_block(n, n, &st.neg_lap, i * p.mu);
    t.add_block(n, n, &st.cyy, lm);
    t.add_block(n, n, &st.id, h2 * p.mu);
    t.add_block(0, n, &st.cxy, lm);
    t.add_block(n, 0, &st.cxy.transpose(), lm);
    // shear coupling with deflection
    t.add_block(0, 2 * n, &st.dx, h2 * p.mu);
    t.add_block(n, 2 * n, &st.dy, h2 * p.mu);
    t.add_block(2 * n, 0, &st.dx, -h2 * p.mu);
    t.add_block(2 * n, n, &st.dy, -h2 * p.mu);
    t.add_block(2 * n, 2 * n, &st.neg_lap, h2 * p.mu);
    // thermal and diffusive displacements
    add_thermal(&mut t, 3 * n, n, p.k1, p.hbar1, p.h1, i, h2, st);
    t.into_csr()
}

/// [[a, b], [b, c]] ⊗ (I·(−L) + 2h·Id) placed at (off, off).
#[allow(clippy::too_many_arguments)]
fn add_thermal(
    t: &mut Triplets,
    off: usize,
    n: usize,
    a: f64,
    b: f64,
    c: f64,
    inertia: f64,
    h2: f64,
    st: &Stencils,
) {
    for (r, cc, coef) in [(0, 0, a), (0, 1, b), (1, 0, b), (1, 1, c)] {
        if coef != 0.0 {
            t.add_block(off + r * n, off + cc * n, &st.neg_lap, inertia * coef);
            t.add_block(off + r * n, off + cc * n, &st.id, h2 * coef);
        }
    }
}

/// R on (z1, z2, y, θ, P), per unit area. Zero for TypeII materials.
pub(crate) fn dissipation(p: &MaterialParams, g: &Grid, st: &Stencils) -> CsrMatrix {
    let n = g.len();
    let mut t = Triplets::new(5 * n, 5 * n);
    add_thermal(
        &mut t,
        3 * n,
        n,
        p.k2,
        p.hbar2,
        p.h2,
        p.inertia(),
        2.0 * p.half_thickness,
        st,
    );
    t.into_csr()
}

/// C on (z1, z2, y, θ, P), per unit area: skew-symmetric.
pub(crate) fn skew_coupling(p: &MaterialParams, g: &Grid, st: &Stencils) -> CsrMatrix {
    let n = g.len();
    let i = p.inertia();
    let mut t = Triplets::new(5 * n, 5 * n);
    for (alpha, d) in [(0usize, &st.dx), (1usize, &st.dy)] {
        t.add_block(alpha * n, 3 * n, d, i * p.d1);
        t.add_block(alpha * n, 4 * n, d, i * p.d2);
        t.add_block(3 * n, alpha * n, d, i * p.d1);
        t.add_block(4 * n, alpha * n, d, i * p.d2);
    }
    t.into_csr()
}

impl FirstOrderSystem {
    pub(crate) fn new(grid: Grid, stiffness: CsrMatrix, coupling: CsrMatrix, mass: Mass) -> Self {
        let generator = build_generator(&grid, &stiffness, &coupling, &mass);
        FirstOrderSystem {
            grid,
            stiffness,
            coupling,
            mass,
            generator,
        }
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// Gathers q (positions) and p (rates) from a state-ordered vector.
    pub fn split(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut q = vec![0.0; 5 * n];
        let mut p = vec![0.0; 5 * n];
        for a in 0..5 {
            let qs = StateField::POSITIONS[a].slot() * n;
            let ps = StateField::RATES[a].slot() * n;
            q[a * n..(a + 1) * n].copy_from_slice(&u[qs..qs + n]);
            p[a * n..(a + 1) * n].copy_from_slice(&u[ps..ps + n]);
        }
        (q, p)
    }

    pub fn join(&self, q: &[f64], p: &[f64], u: &mut [f64]) {
        let n = self.n();
        for a in 0..5 {
            let qs = StateField::POSITIONS[a].slot() * n;
            let ps = StateField::RATES[a].slot() * n;
            u[qs..qs + n].copy_from_slice(&q[a * n..(a + 1) * n]);
            u[ps..ps + n].copy_from_slice(&p[a * n..(a + 1) * n]);
        }
    }
}

fn build_generator(g: &Grid, k: &CsrMatrix, gm: &CsrMatrix, mass: &Mass) -> CsrMatrix {
    let n = g.len();
    let mut t = Triplets::new(10 * n, 10 * n);
    let qslot = |a: usize| StateField::POSITIONS[a].slot() * n;
    let pslot = |a: usize| StateField::RATES[a].slot() * n;
    for a in 0..5 {
        for node in 0..n {
            t.push(qslot(a) + node, pslot(a) + node, 1.0);
        }
    }
    // −M⁻¹K and −M⁻¹G
    for (mat, col_slot) in [(k, &qslot as &dyn Fn(usize) -> usize), (gm, &pslot)] {
        for (r, c, v) in mat.triplets() {
            let (a, node) = (r / n, r % n);
            let (b, cnode) = (c / n, c % n);
            for ar in 0..5 {
                let minv = mass.entry(ar, a, true);
                if minv != 0.0 {
                    t.push(pslot(ar) + node, col_slot(b) + cnode, -minv * v);
                }
            }
        }
    }
    t.into_csr()
}

/// Places per-area 5N matrices into a 10N state-ordered form, scaled by `scale`.
pub(crate) fn embed(
    g: &Grid,
    on_positions: Option<&CsrMatrix>,
    on_rates: Option<&CsrMatrix>,
    scale: f64,
) -> CsrMatrix {
    let n = g.len();
    let mut t = Triplets::new(10 * n, 10 * n);
    for (mat, fields) in [(on_positions, &StateField::POSITIONS), (on_rates, &StateField::RATES)] {
        if let Some(m) = mat {
            for (r, c, v) in m.triplets() {
                let rr = fields[r / n].slot() * n + r % n;
                let cc = fields[c / n].slot() * n + c % n;
                t.push(rr, cc, scale * v);
            }
        }
    }
    t.into_csr()
}
