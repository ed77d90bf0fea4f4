//! Strains and thickness-integrated resultants, collocated at the nodes.

use std::path::Path;

use crate::grid::{grad, Field, GridError};
use crate::material::MaterialParams;
use crate::state::{State, StateField};

#[derive(Debug, Clone, PartialEq)]
pub struct Strain {
    pub eps11: Field,
    pub eps12: Field,
    pub eps22: Field,
    pub gamma1: Field,
    pub gamma2: Field,
}

/// ε_αβ = ½(v_α,β + v_β,α) and γ_α = v_α + w,α with central differences.
pub fn strain(state: &State) -> Strain {
    let g = *state.grid();
    let (v1x, v1y) = grad(&state.to_field(StateField::V1));
    let (v2x, v2y) = grad(&state.to_field(StateField::V2));
    let (wx, wy) = grad(&state.to_field(StateField::W));
    let v1 = state.field(StateField::V1);
    let v2 = state.field(StateField::V2);
    let zip = |a: &[f64], b: &[f64], f: &dyn Fn(f64, f64) -> f64| {
        Field::from_values(g, a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()).expect("finite")
    };
    Strain {
        eps11: v1x,
        eps12: zip(v1y.values(), v2x.values(), &|a, b| 0.5 * (a + b)),
        eps22: v2y,
        gamma1: zip(v1, wx.values(), &|a, b| a + b),
        gamma2: zip(v2, wy.values(), &|a, b| a + b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resultants {
    pub m11: Field,
    pub m12: Field,
    pub m22: Field,
    pub n1: Field,
    pub n2: Field,
    pub rho_sigma: Field,
    pub psi1: Field,
    pub psi2: Field,
    pub r: Field,
    pub chi: Field,
    pub omega1: Field,
    pub omega2: Field,
    pub mdiff: Field,
}

pub fn resultants(state: &State, p: &MaterialParams) -> Resultants {
    let g = *state.grid();
    let n = g.len();
    let s = strain(state);
    let i = p.inertia();
    let th = state.field(StateField::Theta);
    let pp = state.field(StateField::P);
    let tau = state.field(StateField::Tau);
    let wp = state.field(StateField::Wp);
    let mk = |f: &dyn Fn(usize) -> f64| Field::from_values(g, (0..n).map(f).collect()).expect("finite");
    let e11 = s.eps11.values();
    let e12 = s.eps12.values();
    let e22 = s.eps22.values();
    let entropy_pot = mk(&|k| p.k1 * tau[k] + p.hbar1 * wp[k] + p.k2 * th[k] + p.hbar2 * pp[k]);
    let mass_pot = mk(&|k| p.h1 * wp[k] + p.hbar1 * tau[k] + p.hbar2 * th[k] + p.h2 * pp[k]);
    let (ex, ey) = grad(&entropy_pot);
    let (mx, my) = grad(&mass_pot);
    let scale = |f: &Field, a: f64| mk(&|k| a * f.values()[k]);
    let diag = |e: &[f64], k: usize| {
        i * (p.lambda * (e11[k] + e22[k]) + 2.0 * p.mu * e[k] - p.d1 * th[k] - p.d2 * pp[k])
    };
    Resultants {
        m11: mk(&|k| diag(e11, k)),
        m12: mk(&|k| 2.0 * i * p.mu * e12[k]),
        m22: mk(&|k| diag(e22, k)),
        n1: scale(&s.gamma1, p.mu),
        n2: scale(&s.gamma2, p.mu),
        rho_sigma: mk(&|k| i * (p.d1 * (e11[k] + e22[k]) + p.c * th[k] + p.kappa * pp[k])),
        psi1: scale(&ex, -i),
        psi2: scale(&ey, -i),
        r: scale(&entropy_pot, -1.0),
        chi: mk(&|k| i * (p.d2 * (e11[k] + e22[k]) + p.kappa * th[k] + p.r * pp[k])),
        omega1: scale(&mx, -i),
        omega2: scale(&my, -i),
        mdiff: scale(&mass_pot, -1.0),
    }
}

impl Resultants {
    pub fn components(&self) -> [(&'static str, &Field); 13] {
        [
            ("M11", &self.m11),
            ("M12", &self.m12),
            ("M22", &self.m22),
            ("N1", &self.n1),
            ("N2", &self.n2),
            ("rho_sigma", &self.rho_sigma),
            ("Psi1", &self.psi1),
            ("Psi2", &self.psi2),
            ("R", &self.r),
            ("chi", &self.chi),
            ("Omega1", &self.omega1),
            ("Omega2", &self.omega2),
            ("Mdiff", &self.mdiff),
        ]
    }

    /// One field CSV per component, named `<component><suffix>.csv`.
    pub fn write_csv(&self, dir: &Path, suffix: &str) -> Result<(), GridError> {
        for (name, f) in self.components() {
            f.write_csv(&dir.join(format!("{name}{suffix}.csv")))?;
        }
        Ok(())
    }
}
