//! Material constants and the pointwise quadratic forms derived from them.

use nalgebra::{DMatrix, Matrix2, Matrix3};
use thiserror::Error;

/// Constitutive variant. `TypeII` has no rate-dependent conduction and conserves energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelType {
    TypeII,
    TypeIII,
}

impl ModelType {
    pub fn name(self) -> &'static str {
        match self {
            ModelType::TypeII => "TypeII",
            ModelType::TypeIII => "TypeIII",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "TypeII" | "typeII" | "type2" | "II" => Some(ModelType::TypeII),
            "TypeIII" | "typeIII" | "type3" | "III" => Some(ModelType::TypeIII),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("half-thickness must be positive, got {0}")]
    InvalidThickness(f64),
    #[error("internal energy is not coercive (smallest eigenvalue {0:e})")]
    NotCoercive(f64),
    #[error("operation requires a TypeIII material")]
    TypeMismatch,
    #[error("material fails admissibility: {0}")]
    Inadmissible(String),
}

/// Elastic, thermal and diffusive constants of the plate.
///
/// `t0` (reference temperature) is carried for completeness; the linear
/// equations do not use it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub d1: f64,
    pub d2: f64,
    pub c: f64,
    pub kappa: f64,
    pub r: f64,
    pub k1: f64,
    pub h1: f64,
    pub hbar1: f64,
    pub k2: f64,
    pub h2: f64,
    pub hbar2: f64,
    pub rho: f64,
    pub t0: f64,
    pub half_thickness: f64,
    pub model_type: ModelType,
}

impl MaterialParams {
    /// Unit-scale TypeIII material used throughout the tests and sample configs.
    pub fn reference() -> Self {
        MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            d1: 0.1,
            d2: 0.1,
            c: 1.0,
            kappa: 0.2,
            r: 1.0,
            k1: 1.0,
            h1: 1.0,
            hbar1: 0.2,
            k2: 0.5,
            h2: 0.5,
            hbar2: 0.1,
            rho: 1.0,
            t0: 1.0,
            half_thickness: 0.5,
            model_type: ModelType::TypeIII,
        }
    }

    /// Same material with the rate constants removed.
    pub fn into_type_ii(mut self) -> Self {
        self.k2 = 0.0;
        self.h2 = 0.0;
        self.hbar2 = 0.0;
        self.model_type = ModelType::TypeII;
        self
    }

    /// Moment of inertia I = 2h³/3.
    pub fn inertia(&self) -> f64 {
        2.0 * self.half_thickness.powi(3) / 3.0
    }

    /// δ = c r − κ².
    pub fn delta(&self) -> f64 {
        self.c * self.r - self.kappa * self.kappa
    }

    pub fn capacity(&self) -> Matrix2<f64> {
        Matrix2::new(self.c, self.kappa, self.kappa, self.r)
    }

    pub fn conductivity(&self) -> Matrix2<f64> {
        Matrix2::new(self.k1, self.hbar1, self.hbar1, self.h1)
    }

    pub fn rate_conductivity(&self) -> Matrix2<f64> {
        Matrix2::new(self.k2, self.hbar2, self.hbar2, self.h2)
    }

    fn named_values(&self) -> [(&'static str, f64); 16] {
        [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("d1", self.d1),
            ("d2", self.d2),
            ("c", self.c),
            ("kappa", self.kappa),
            ("r", self.r),
            ("k1", self.k1),
            ("h1", self.h1),
            ("hbar1", self.hbar1),
            ("k2", self.k2),
            ("h2", self.h2),
            ("hbar2", self.hbar2),
            ("rho", self.rho),
            ("T0", self.t0),
            ("half_thickness", self.half_thickness),
        ]
    }

    /// Checks every admissibility condition and reports each one with its margin.
    ///
    /// Errors only on malformed input (non-finite values, non-positive thickness);
    /// failed physical conditions are reported, not raised.
    pub fn validate(&self) -> Result<ValidationReport, MaterialError> {
        for (name, v) in self.named_values() {
            if !v.is_finite() {
                return Err(MaterialError::NonFinite(name));
            }
        }
        if self.half_thickness <= 0.0 {
            return Err(MaterialError::InvalidThickness(self.half_thickness));
        }
        let mut conditions = vec![
            Condition::positive("mass_density", self.rho),
            Condition::positive("capacity_determinant", self.delta()),
            Condition::positive("capacity_trace", self.c + self.r),
            Condition::positive("shear_modulus", self.mu),
            Condition::positive("bulk_modulus", self.lambda + self.mu),
            Condition::positive(
                "conductivity_determinant",
                self.k1 * self.h1 - self.hbar1 * self.hbar1,
            ),
            Condition::positive("conductivity_trace", self.k1 + self.h1),
        ];
        match self.model_type {
            ModelType::TypeIII => {
                conditions.push(Condition::positive(
                    "rate_determinant",
                    self.k2 * self.h2 - self.hbar2 * self.hbar2,
                ));
                conditions.push(Condition::positive("rate_k2", self.k2));
                conditions.push(Condition::positive("rate_h2", self.h2));
            }
            ModelType::TypeII => {
                let worst = self.k2.abs().max(self.h2.abs()).max(self.hbar2.abs());
                conditions.push(Condition {
                    name: "type2_rates_zero",
                    margin: -worst,
                    passed: worst == 0.0,
                });
            }
        }
        Ok(ValidationReport { conditions })
    }

    /// Like [`validate`](Self::validate) but turns any failed condition into an error.
    pub fn require_admissible(&self) -> Result<(), MaterialError> {
        let report = self.validate()?;
        if report.passed() {
            Ok(())
        } else {
            Err(MaterialError::Inadmissible(report.failed_names().join(", ")))
        }
    }

    /// Smallest eigenvalue of the internal-energy coefficient matrix relative to
    /// |ε|² + |γ|² + |∇τ|² + |∇℘|² + τ² + ℘².
    pub fn internal_energy_coercivity(&self) -> Result<f64, MaterialError> {
        self.validate()?;
        let i = self.inertia();
        let h = self.half_thickness;
        let mut c0 = f64::INFINITY;
        for ev in strain_block(self).symmetric_eigenvalues().iter() {
            c0 = c0.min(*ev);
        }
        c0 = c0.min(2.0 * h * self.mu);
        c0 = c0.min(i * min_eig2(&self.conductivity()));
        c0 = c0.min(2.0 * h * min_eig2(&self.conductivity()));
        if c0 > 0.0 {
            Ok(c0)
        } else {
            Err(MaterialError::NotCoercive(c0))
        }
    }

    /// ζ = max(k2, h2) / λ_min([[c, κ], [κ, r]]).
    pub fn zeta(&self) -> Result<f64, MaterialError> {
        if self.model_type != ModelType::TypeIII {
            return Err(MaterialError::TypeMismatch);
        }
        let lmin = min_eig2(&self.capacity());
        if lmin <= 0.0 {
            return Err(MaterialError::Inadmissible("capacity_determinant".into()));
        }
        Ok(self.k2.max(self.h2) / lmin)
    }

    /// Smallest ξ with |flux density| ≤ ξ · (kinetic + thermal + stored energy density)
    /// pointwise, for the flux through a line x₂ = const.
    pub fn xi_estimate(&self) -> Result<f64, MaterialError> {
        self.require_admissible()?;
        let (b, a) = flux_energy_pencil(self);
        max_pencil_ratio(&b, &a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub margin: f64,
    pub passed: bool,
}

impl Condition {
    fn positive(name: &'static str, margin: f64) -> Self {
        Condition {
            name,
            margin,
            passed: margin > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub conditions: Vec<Condition>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub(crate) fn min_eig2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let diff = m[(0, 0)] - m[(1, 1)];
    let off = m[(0, 1)];
    0.5 * (tr - (diff * diff + 4.0 * off * off).sqrt())
}

// Strain energy in (ε11, √2 ε12, ε22) so that the reference form is the identity.
fn strain_block(p: &MaterialParams) -> Matrix3<f64> {
    let i = p.inertia();
    let a = i * (p.lambda + 2.0 * p.mu);
    let b = i * p.lambda;
    Matrix3::new(a, 0.0, b, 0.0, 2.0 * i * p.mu, 0.0, b, 0.0, a)
}

/// Variable order of the flux/energy pencil.
pub const PENCIL_VARS: [&str; 16] = [
    "z1", "z2", "y", "theta", "P", "eps11", "eps12", "eps22", "gamma1", "gamma2", "tau_1",
    "tau_2", "wp_1", "wp_2", "tau", "wp",
];

/// Symmetric matrices (B, A) with flux = xᵀBx and energy density = xᵀAx.
///
/// The ħ2 part of the section flux is a total x₂-derivative of ħ2·θP and is
/// carried by the boundary term, so it does not enter B.
pub fn flux_energy_pencil(p: &MaterialParams) -> (DMatrix<f64>, DMatrix<f64>) {
    const Z1: usize = 0;
    const Z2: usize = 1;
    const Y: usize = 2;
    const TH: usize = 3;
    const PP: usize = 4;
    const E11: usize = 5;
    const E12: usize = 6;
    const E22: usize = 7;
    const G1: usize = 8;
    const G2: usize = 9;
    const T1: usize = 10;
    const T2: usize = 11;
    const W1: usize = 12;
    const W2: usize = 13;
    const T: usize = 14;
    const W: usize = 15;
    let n = PENCIL_VARS.len();
    let i = p.inertia();
    let h = p.half_thickness;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    let sym = |m: &mut DMatrix<f64>, r: usize, c: usize, v: f64| {
        if r == c {
            m[(r, r)] += v;
        } else {
            m[(r, c)] += 0.5 * v;
            m[(c, r)] += 0.5 * v;
        }
    };
    // kinetic and thermal capacity
    sym(&mut a, Z1, Z1, 0.5 * p.rho * i);
    sym(&mut a, Z2, Z2, 0.5 * p.rho * i);
    sym(&mut a, Y, Y, p.rho * h);
    sym(&mut a, TH, TH, 0.5 * i * p.c);
    sym(&mut a, TH, PP, i * p.kappa);
    sym(&mut a, PP, PP, 0.5 * i * p.r);
    // stored energy
    sym(&mut a, E11, E11, 0.5 * i * (p.lambda + 2.0 * p.mu));
    sym(&mut a, E22, E22, 0.5 * i * (p.lambda + 2.0 * p.mu));
    sym(&mut a, E11, E22, i * p.lambda);
    sym(&mut a, E12, E12, 2.0 * i * p.mu);
    sym(&mut a, G1, G1, h * p.mu);
    sym(&mut a, G2, G2, h * p.mu);
    for (t, w) in [(T1, W1), (T2, W2)] {
        sym(&mut a, t, t, 0.5 * i * p.k1);
        sym(&mut a, w, w, 0.5 * i * p.h1);
        sym(&mut a, t, w, i * p.hbar1);
    }
    sym(&mut a, T, T, h * p.k1);
    sym(&mut a, W, W, h * p.h1);
    sym(&mut a, T, W, 2.0 * h * p.hbar1);

    // flux through x₂ = const
    sym(&mut b, E12, Z1, 2.0 * i * p.mu);
    sym(&mut b, E11, Z2, i * p.lambda);
    sym(&mut b, E22, Z2, i * (p.lambda + 2.0 * p.mu));
    sym(&mut b, TH, Z2, -i * p.d1);
    sym(&mut b, PP, Z2, -i * p.d2);
    sym(&mut b, G2, Y, 2.0 * h * p.mu);
    sym(&mut b, T2, TH, i * p.k1);
    sym(&mut b, W2, TH, i * p.hbar1);
    sym(&mut b, W2, PP, i * p.h1);
    sym(&mut b, T2, PP, i * p.hbar1);
    (b, a)
}

/// max |xᵀBx| / xᵀAx over x ≠ 0, for symmetric B and symmetric positive definite A.
pub fn max_pencil_ratio(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64, MaterialError> {
    let chol = a.clone().cholesky().ok_or_else(|| {
        let ev = a.clone().symmetric_eigenvalues().min();
        MaterialError::NotCoercive(ev)
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(MaterialError::NotCoercive(0.0))?;
    let mut c = &linv * b * linv.transpose();
    let ct = c.transpose();
    c = (c + ct) * 0.5;
    let ev = c.symmetric_eigenvalues();
    Ok(ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}
