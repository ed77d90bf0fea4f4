//! Uniform rectangular grid of interior nodes with homogeneous Dirichlet ghosts.
//!
//! Node (i, j), 0 ≤ i < nx, 0 ≤ j < ny, sits at ((i+1)hx, (j+1)hy) with
//! hx = Lx/(nx+1), hy = Ly/(ny+1). Storage is row-major in j: k = j·nx + i.
//! Cells are the (nx+1)(ny+1) rectangles between neighbouring node lines,
//! including the ones that touch the boundary.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3x3 interior nodes, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error("domain lengths must be positive and finite, got {lx} x {ly}")]
    InvalidLength { lx: f64, ly: f64 },
    #[error("fields live on different grids")]
    Mismatch,
    #[error("row index {index} out of range (ny = {ny})")]
    IndexOutOfRange { index: usize, ny: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx < 3 || ny < 3 {
            return Err(GridError::TooSmall { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::InvalidLength { lx, ly });
        }
        Ok(Grid {
            lx,
            ly,
            nx,
            ny,
            hx: lx / (nx + 1) as f64,
            hy: ly / (ny + 1) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.hy
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn n_cells(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Cell (ci, cj) spans nodes (ci-1..=ci) × (cj-1..=cj); 0 ≤ ci ≤ nx, 0 ≤ cj ≤ ny.
    #[inline]
    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        cj * (self.nx + 1) + ci
    }

    fn same(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Nodal values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), GridError> {
        write_field_csv(&self.grid, &self.values, path)
    }
}

// ---- slice kernels -------------------------------------------------------

#[inline]
fn val(g: &Grid, f: &[f64], i: isize, j: isize) -> f64 {
    if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
        0.0
    } else {
        f[g.index(i as usize, j as usize)]
    }
}

pub(crate) fn dx_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let s = 0.5 / g.hx;
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            out[g.index(i as usize, j as usize)] = s * (val(g, f, i + 1, j) - val(g, f, i - 1, j));
        }
    }
}

pub(crate) fn dy_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let s = 0.5 / g.hy;
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            out[g.index(i as usize, j as usize)] = s * (val(g, f, i, j + 1) - val(g, f, i, j - 1));
        }
    }
}

pub(crate) fn laplacian_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let ax = 1.0 / (g.hx * g.hx);
    let ay = 1.0 / (g.hy * g.hy);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let c = val(g, f, i, j);
            out[g.index(i as usize, j as usize)] = ax
                * (val(g, f, i + 1, j) - 2.0 * c + val(g, f, i - 1, j))
                + ay * (val(g, f, i, j + 1) - 2.0 * c + val(g, f, i, j - 1));
        }
    }
}

// ---- field-level operators ----------------------------------------------

/// Central-difference gradient with zero ghost values.
pub fn grad(f: &Field) -> (Field, Field) {
    let g = f.grid;
    let mut a = Field::zeros(g);
    let mut b = Field::zeros(g);
    dx_into(&g, &f.values, &mut a.values);
    dy_into(&g, &f.values, &mut b.values);
    (a, b)
}

/// Central-difference divergence; the negative adjoint of [`grad`] under [`inner`].
pub fn div(g1: &Field, g2: &Field) -> Result<Field, GridError> {
    if !g1.grid.same(&g2.grid) {
        return Err(GridError::Mismatch);
    }
    let g = g1.grid;
    let mut a = vec![0.0; g.len()];
    let mut b = vec![0.0; g.len()];
    dx_into(&g, &g1.values, &mut a);
    dy_into(&g, &g2.values, &mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    Ok(Field { grid: g, values: a })
}

/// Five-point Laplacian with zero ghost values.
pub fn laplacian(f: &Field) -> Field {
    let g = f.grid;
    let mut out = Field::zeros(g);
    laplacian_into(&g, &f.values, &mut out.values);
    out
}

/// Discrete L² inner product hx·hy·Σ f g.
pub fn inner(f: &Field, g: &Field) -> Result<f64, GridError> {
    if !f.grid.same(&g.grid) {
        return Err(GridError::Mismatch);
    }
    Ok(inner_slices(&f.grid, &f.values, &g.values))
}

pub(crate) fn inner_slices(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    g.cell_area() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// hx·Σ_i f(i, j) along node row j.
pub fn cross_section_sum(f: &Field, j: usize) -> Result<f64, GridError> {
    let g = f.grid;
    if j >= g.ny {
        return Err(GridError::IndexOutOfRange { index: j, ny: g.ny });
    }
    Ok(g.hx * f.values[g.index(0, j)..g.index(0, j) + g.nx].iter().sum::<f64>())
}

// ---- assembled operators ------------------------------------------------

pub fn central_x_matrix(g: &Grid) -> CsrMatrix {
    let mut t = Triplets::new(g.len(), g.len());
    let s = 0.5 / g.hx;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if i + 1 < g.nx {
                t.push(k, g.index(i + 1, j), s);
            }
            if i > 0 {
                t.push(k, g.index(i - 1, j), -s);
            }
        }
    }
    t.into_csr()
}

pub fn central_y_matrix(g: &Grid) -> CsrMatrix {
    let mut t = Triplets::new(g.len(), g.len());
    let s = 0.5 / g.hy;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if j + 1 < g.ny {
                t.push(k, g.index(i, j + 1), s);
            }
            if j > 0 {
                t.push(k, g.index(i, j - 1), -s);
            }
        }
    }
    t.into_csr()
}

pub fn laplacian_matrix(g: &Grid) -> CsrMatrix {
    let mut t = Triplets::new(g.len(), g.len());
    let ax = 1.0 / (g.hx * g.hx);
    let ay = 1.0 / (g.hy * g.hy);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            t.push(k, k, -2.0 * (ax + ay));
            if i + 1 < g.nx {
                t.push(k, g.index(i + 1, j), ax);
            }
            if i > 0 {
                t.push(k, g.index(i - 1, j), ax);
            }
            if j + 1 < g.ny {
                t.push(k, g.index(i, j + 1), ay);
            }
            if j > 0 {
                t.push(k, g.index(i, j - 1), ay);
            }
        }
    }
    t.into_csr()
}

/// Corner nodes of cell (ci, cj) that are interior, with their (x-weight, y-weight)
/// in the cell-centred differences (times 2hx and 2hy respectively).
pub(crate) fn cell_corners(g: &Grid, ci: usize, cj: usize) -> impl Iterator<Item = (usize, f64, f64)> {
    let g = *g;
    let corners = [
        (ci as isize - 1, cj as isize - 1, -1.0, -1.0),
        (ci as isize, cj as isize - 1, 1.0, -1.0),
        (ci as isize - 1, cj as isize, -1.0, 1.0),
        (ci as isize, cj as isize, 1.0, 1.0),
    ];
    corners.into_iter().filter_map(move |(i, j, sx, sy)| {
        if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
            None
        } else {
            Some((g.index(i as usize, j as usize), sx, sy))
        }
    })
}

/// Cell-centred x-difference: cells × nodes.
pub fn cell_x_matrix(g: &Grid) -> CsrMatrix {
    let mut t = Triplets::new(g.n_cells(), g.len());
    let s = 0.5 / g.hx;
    for cj in 0..=g.ny {
        for ci in 0..=g.nx {
            for (k, sx, _) in cell_corners(g, ci, cj) {
                t.push(g.cell_index(ci, cj), k, s * sx);
            }
        }
    }
    t.into_csr()
}

/// Cell-centred y-difference: cells × nodes.
pub fn cell_y_matrix(g: &Grid) -> CsrMatrix {
    let mut t = Triplets::new(g.n_cells(), g.len());
    let s = 0.5 / g.hy;
    for cj in 0..=g.ny {
        for ci in 0..=g.nx {
            for (k, _, sy) in cell_corners(g, ci, cj) {
                t.push(g.cell_index(ci, cj), k, s * sy);
            }
        }
    }
    t.into_csr()
}

pub(crate) fn write_field_csv(g: &Grid, values: &[f64], path: &Path) -> Result<(), GridError> {
    let io = |e: std::io::Error| GridError::Io(e.to_string());
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "i,j,x1,x2,value").map_err(io)?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            writeln!(
                w,
                "{},{},{:?},{:?},{:?}",
                i,
                j,
                g.x(i),
                g.y(j),
                values[g.index(i, j)]
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
