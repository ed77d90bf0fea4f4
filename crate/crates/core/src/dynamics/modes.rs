//! Checks that no low mechanical mode is divergence-free. Such a mode would
//! stay decoupled from the thermal fields and never decay.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::grid::{dx_into, dy_into, Grid};
use crate::material::{MaterialError, MaterialParams, ModelType};

use super::system::{stiffness, Stencils};

/// Largest mechanical block (3·nx·ny) handed to the dense eigensolver.
pub const MAX_DENSE_MODES: usize = 3000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("coupling vanishes (d1 = d2 = 0); the check does not apply")]
    NotApplicable,
    #[error("mode check needs a TypeIII material")]
    TypeMismatch,
    #[error("mechanical block of size {0} is too large for the dense eigensolver")]
    TooLarge(usize),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeReport {
    /// Squared angular frequency ω².
    pub eigenvalue: f64,
    /// ‖div v‖ / ‖(v1, v2, w)‖ in the discrete L² norm.
    pub div_ratio: f64,
}

/// Lowest `n_modes` modes of K_mech x = ω² M_mech x on (v1, v2, w).
pub fn overdetermined_mode_check(
    params: &MaterialParams,
    grid: &Grid,
    n_modes: usize,
) -> Result<Vec<ModeReport>, ModeError> {
    if params.model_type != ModelType::TypeIII {
        return Err(ModeError::TypeMismatch);
    }
    params.require_admissible()?;
    let j_coef = params.r * params.d1 - params.kappa * params.d2;
    let l_coef = params.c * params.d2 - params.kappa * params.d1;
    if j_coef == 0.0 && l_coef == 0.0 {
        return Err(ModeError::NotApplicable);
    }
    let n = grid.len();
    let dim = 3 * n;
    if dim > MAX_DENSE_MODES {
        return Err(ModeError::TooLarge(dim));
    }
    let k = stiffness(params, grid, &Stencils::new(grid));
    let i = params.inertia();
    let mass_diag: Vec<f64> = (0..dim)
        .map(|r| if r < 2 * n { params.rho * i } else { 2.0 * params.half_thickness * params.rho })
        .collect();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for (r, c, v) in k.triplets() {
        if r < dim && c < dim {
            a[(r, c)] = v / (mass_diag[r] * mass_diag[c]).sqrt();
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut out = Vec::with_capacity(n_modes.min(dim));
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for &col in order.iter().take(n_modes) {
        let x: Vec<f64> = (0..dim)
            .map(|r| eig.eigenvectors[(r, col)] / mass_diag[r].sqrt())
            .collect();
        dx_into(grid, &x[0..n], &mut d1);
        dy_into(grid, &x[n..2 * n], &mut d2);
        let div2: f64 = d1.iter().zip(&d2).map(|(a, b)| (a + b) * (a + b)).sum();
        let all2: f64 = x.iter().map(|v| v * v).sum();
        out.push(ModeReport {
            eigenvalue: eig.eigenvalues[col],
            div_ratio: (div2 / all2).sqrt(),
        });
    }
    Ok(out)
}
