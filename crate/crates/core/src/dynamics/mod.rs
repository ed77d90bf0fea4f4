//! Assembly of the semi-discrete operator, the energy and dissipation forms,
//! and implicit-midpoint time stepping with an exact discrete energy balance.

pub mod mms;
pub mod modes;
pub mod solver;
pub mod system;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::Grid;
use crate::material::{MaterialError, MaterialParams};
use crate::sparse::CsrMatrix;
use crate::state::State;

pub use solver::{ImplicitSolver, SOLVE_TOLERANCE};
pub use system::{FirstOrderSystem, Mass};

/// Relative tolerance of the assembly self-check.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
const SELF_CHECK_VECTORS: usize = 100;
const SELF_CHECK_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("assembled operators violate the energy identity (relative residual {0:e})")]
    AssemblyInconsistent(f64),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("time step {dt} does not divide t_end {t_end}")]
    InvalidTimeStep { dt: f64, t_end: f64 },
    #[error("state grid does not match the operator grid")]
    GridMismatch,
    #[error("non-finite value in state")]
    NonFinite,
}

/// Body loads and supplies: f_α (moments), f (transverse force), W (heat), V (mass).
#[derive(Debug, Clone, PartialEq)]
pub struct Loads {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f: Vec<f64>,
    pub heat: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Loads {
    pub fn zeros(n: usize) -> Self {
        Loads {
            f1: vec![0.0; n],
            f2: vec![0.0; n],
            f: vec![0.0; n],
            heat: vec![0.0; n],
            mass: vec![0.0; n],
        }
    }

    /// Right-hand side on the rate equations: (f1, f2, 2h·f, W, V), field-major.
    fn rate_forcing(&self, half_thickness: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(5 * self.f1.len());
        out.extend_from_slice(&self.f1);
        out.extend_from_slice(&self.f2);
        out.extend(self.f.iter().map(|v| 2.0 * half_thickness * v));
        out.extend_from_slice(&self.heat);
        out.extend_from_slice(&self.mass);
        out
    }
}

pub trait Sources {
    /// Loads at time t, or None when they vanish.
    fn loads(&self, grid: &Grid, t: f64) -> Option<Loads>;
}

pub struct NoSources;

impl Sources for NoSources {
    fn loads(&self, _grid: &Grid, _t: f64) -> Option<Loads> {
        None
    }
}

/// Everything needed to integrate and to measure energy.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
    pub params: MaterialParams,
    pub system: FirstOrderSystem,
    /// ½ Uᵀ E U is the energy.
    pub energy_form: CsrMatrix,
    /// Uᵀ D U is the dissipation rate.
    pub dissipation_form: CsrMatrix,
    /// Symmetric part of the rate coupling (per unit area).
    pub rate_dissipation: CsrMatrix,
    /// Skew part of the rate coupling (per unit area).
    pub skew_coupling: CsrMatrix,
}

impl OperatorMatrices {
    pub fn grid(&self) -> &Grid {
        &self.system.grid
    }

    pub fn generator(&self) -> &CsrMatrix {
        &self.system.generator
    }

    /// |Uᵀ E (A U) + Uᵀ D U| / (Uᵀ E U).
    pub fn identity_residual(&self, u: &[f64]) -> f64 {
        let au = self.system.generator.mul_vec(u);
        let lhs = self.energy_form.bilinear(u, &au);
        let d = self.dissipation_form.quad_form(u);
        let norm = self.energy_form.quad_form(u);
        if norm == 0.0 {
            (lhs + d).abs()
        } else {
            (lhs + d).abs() / norm
        }
    }
}

/// Builds A_op, E_form and D_form and checks the energy identity on random vectors.
pub fn assemble(params: &MaterialParams, grid: &Grid) -> Result<OperatorMatrices, DynamicsError> {
    params.require_admissible()?;
    let st = system::Stencils::new(grid);
    let k = system::stiffness(params, grid, &st);
    let r = system::dissipation(params, grid, &st);
    let c = system::skew_coupling(params, grid, &st);
    let g = c.add_scaled(&r, 1.0);
    let mass = Mass::new(params);
    let area = grid.cell_area();
    let energy_form = system::embed(grid, Some(&k), Some(&mass.to_csr(grid.len())), area);
    let dissipation_form = system::embed(grid, None, Some(&r), area);
    let m = OperatorMatrices {
        params: *params,
        system: FirstOrderSystem::new(*grid, k, g, mass),
        energy_form,
        dissipation_form,
        rate_dissipation: r,
        skew_coupling: c,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SELF_CHECK_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..SELF_CHECK_VECTORS {
        let u: Vec<f64> = (0..10 * grid.len())
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        worst = worst.max(m.identity_residual(&u));
    }
    if !(worst <= IDENTITY_TOLERANCE) {
        return Err(DynamicsError::AssemblyInconsistent(worst));
    }
    Ok(m)
}

/// Energy ½UᵀEU and dissipation UᵀDU.
pub fn energy(u: &State, m: &OperatorMatrices) -> Result<(f64, f64), DynamicsError> {
    if u.grid() != m.grid() {
        return Err(DynamicsError::GridMismatch);
    }
    Ok((
        0.5 * m.energy_form.quad_form(u.data()),
        m.dissipation_form.quad_form(u.data()),
    ))
}

/// Applies the resolvent: solves (Id − A) U = F.
pub fn resolvent_apply(f: &State, m: &OperatorMatrices) -> Result<State, DynamicsError> {
    if f.grid() != m.grid() {
        return Err(DynamicsError::GridMismatch);
    }
    let solver = ImplicitSolver::new(&m.system, 1.0)?;
    let x = solver.solve(f.data())?;
    Ok(State::from_vec(*m.grid(), f.time(), x).expect("length preserved"))
}

/// One implicit-midpoint integrator for a fixed step size.
pub struct Stepper<'a> {
    sys: &'a FirstOrderSystem,
    half_thickness: f64,
    dt: f64,
    solver: ImplicitSolver<'a>,
}

/// Result of one step with the midpoint quantities the balance needs.
pub struct StepOutcome {
    pub state: State,
    /// Rate forcing on the rate equations at the midpoint (None when zero).
    pub forcing: Option<Vec<f64>>,
    /// ½(Uₙ + Uₙ₊₁).
    pub midpoint: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a FirstOrderSystem, params: &MaterialParams, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidTimeStep { dt, t_end: f64::NAN });
        }
        Ok(Stepper {
            sys,
            half_thickness: params.half_thickness,
            dt,
            solver: ImplicitSolver::new(sys, 0.5 * dt)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, u: &State, sources: &dyn Sources) -> Result<StepOutcome, DynamicsError> {
        let g = &self.sys.grid;
        if u.grid() != g {
            return Err(DynamicsError::GridMismatch);
        }
        let n = g.len();
        let s = 0.5 * self.dt;
        let au = self.sys.generator.mul_vec(u.data());
        let mut rhs: Vec<f64> = u.data().iter().zip(&au).map(|(a, b)| a + s * b).collect();
        let forcing = sources
            .loads(g, u.time() + s)
            .map(|l| l.rate_forcing(self.half_thickness));
        if let Some(fp) = &forcing {
            let mut minv_f = vec![0.0; 5 * n];
            self.sys.mass.apply(n, fp, &mut minv_f, true);
            let mut full = vec![0.0; 10 * n];
            self.sys.join(&vec![0.0; 5 * n], &minv_f, &mut full);
            rhs.iter_mut().zip(&full).for_each(|(r, f)| *r += self.dt * f);
        }
        let x = self.solver.solve(&rhs)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFinite);
        }
        let midpoint: Vec<f64> = u.data().iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
        let state = State::from_vec(*g, u.time() + self.dt, x).expect("length preserved");
        Ok(StepOutcome {
            state,
            forcing,
            midpoint,
        })
    }
}

/// Single step; builds a fresh factorisation (use [`Stepper`] for repeated steps).
pub fn step(
    u: &State,
    m: &OperatorMatrices,
    sources: &dyn Sources,
    dt: f64,
) -> Result<State, DynamicsError> {
    Ok(Stepper::new(&m.system, &m.params, dt)?.step(u, sources)?.state)
}

/// Per-step energy bookkeeping. Entry 0 describes the initial state; entry n the
/// step that ends at `times[n]`, with D and the source power taken at its midpoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub e0: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub balance_residual: Vec<f64>,
    pub src_power: Vec<f64>,
}

impl EnergyReport {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// max |E0(t) − E0(0)| / E0(0).
    pub fn relative_drift(&self) -> f64 {
        let e = self.e0[0];
        let worst = self.e0.iter().fold(0.0_f64, |m, v| m.max((v - e).abs()));
        if e == 0.0 {
            worst
        } else {
            worst / e
        }
    }

    /// max over steps of balance residual / max(E0 before, E0 after).
    pub fn max_relative_balance(&self) -> f64 {
        (1..self.len())
            .map(|k| {
                let scale = self.e0[k - 1].max(self.e0[k]);
                if scale == 0.0 {
                    self.balance_residual[k]
                } else {
                    self.balance_residual[k] / scale
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "E0", "D", "balance_residual", "src_power"])?;
        for k in 0..self.len() {
            w.write_record([
                format!("{:?}", self.times[k]),
                format!("{:?}", self.e0[k]),
                format!("{:?}", self.dissipation[k]),
                format!("{:?}", self.balance_residual[k]),
                format!("{:?}", self.src_power[k]),
            ])?;
        }
        w.flush()
    }
}

/// Number of steps of size dt that reach t_end.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize, DynamicsError> {
    if t_end == 0.0 {
        return Ok(0);
    }
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(DynamicsError::InvalidTimeStep { dt, t_end });
    }
    let n = (t_end / dt).round();
    if n < 1.0 || ((n * dt - t_end).abs() > 1e-9 * t_end) {
        return Err(DynamicsError::InvalidTimeStep { dt, t_end });
    }
    Ok(n as usize)
}

/// Integrates from `u0` to `t_end`; `observer` sees every state including the first.
pub fn run_with(
    u0: &State,
    m: &OperatorMatrices,
    sources: &dyn Sources,
    dt: f64,
    t_end: f64,
    observer: &mut dyn FnMut(usize, &State),
) -> Result<(State, EnergyReport), DynamicsError> {
    if u0.grid() != m.grid() {
        return Err(DynamicsError::GridMismatch);
    }
    if !u0.is_finite() {
        return Err(DynamicsError::NonFinite);
    }
    let n_steps = step_count(dt, t_end)?;
    let area = m.grid().cell_area();
    let mut rep = EnergyReport::default();
    let (e, d) = energy(u0, m)?;
    let p0 = match sources.loads(m.grid(), u0.time()) {
        Some(l) => {
            let (_, p) = m.system.split(u0.data());
            area * dot(&p, &l.rate_forcing(m.params.half_thickness))
        }
        None => 0.0,
    };
    rep.times.push(u0.time());
    rep.e0.push(e);
    rep.dissipation.push(d);
    rep.balance_residual.push(0.0);
    rep.src_power.push(p0);
    observer(0, u0);
    if n_steps == 0 {
        return Ok((u0.clone(), rep));
    }
    let stepper = Stepper::new(&m.system, &m.params, dt)?;
    let mut u = u0.clone();
    let t0 = u0.time();
    for k in 1..=n_steps {
        let out = stepper.step(&u, sources)?;
        let mut next = out.state;
        next.set_time(t0 + k as f64 * dt);
        let e_next = 0.5 * m.energy_form.quad_form(next.data());
        let d_mid = m.dissipation_form.quad_form(&out.midpoint);
        let p_mid = match &out.forcing {
            Some(fp) => {
                let (_, p) = m.system.split(&out.midpoint);
                area * dot(&p, fp)
            }
            None => 0.0,
        };
        let e_prev = *rep.e0.last().unwrap();
        rep.times.push(next.time());
        rep.e0.push(e_next);
        rep.dissipation.push(d_mid);
        rep.balance_residual
            .push((e_next - e_prev + dt * d_mid - dt * p_mid).abs());
        rep.src_power.push(p_mid);
        observer(k, &next);
        u = next;
    }
    Ok((u, rep))
}

pub fn run(
    u0: &State,
    m: &OperatorMatrices,
    sources: &dyn Sources,
    dt: f64,
    t_end: f64,
) -> Result<(State, EnergyReport), DynamicsError> {
    run_with(u0, m, sources, dt, t_end, &mut |_, _| {})
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
