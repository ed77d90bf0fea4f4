//! Backward-in-time problem: the same system with the coupling and rate
//! conduction reversed in sign, its three energy-like functionals, and the
//! diagnostics built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::system::{dissipation, embed, skew_coupling, stiffness, Stencils};
use crate::dynamics::{
    step_count, DynamicsError, EnergyReport, FirstOrderSystem, Mass, NoSources, OperatorMatrices,
    Stepper,
};
use crate::grid::Grid;
use crate::material::{MaterialParams, ModelType};
use crate::sparse::{CsrMatrix, Triplets};
use crate::state::{State, StateField};

/// Relative tolerance for A_back = −S·A·S.
pub const REVERSAL_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackwardError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("backward operator is not the time reversal of the forward one (mismatch {0:e})")]
    AssemblyInconsistent(f64),
    #[error("check does not apply: {0}")]
    NotApplicable(&'static str),
}

#[derive(Debug, Clone)]
pub struct BackwardMatrices {
    pub params: MaterialParams,
    pub system: FirstOrderSystem,
    /// E1 = ½ UᵀF1U (the forward energy).
    pub e1_form: CsrMatrix,
    /// E2 = ½ UᵀF2U (mechanical minus thermal-diffusive energy).
    pub e2_form: CsrMatrix,
    /// E3 = ½ UᵀF3U (cross functional pairing positions with rates).
    pub e3_form: CsrMatrix,
    /// Forward dissipation form, so that dE1/dt = UᵀDU along backward runs.
    pub dissipation_form: CsrMatrix,
}

/// Diagonal ±1 that flips every rate field.
fn reflection(g: &Grid) -> CsrMatrix {
    let n = g.len();
    let mut t = Triplets::new(10 * n, 10 * n);
    for f in StateField::ALL {
        let s = if f.is_rate() { -1.0 } else { 1.0 };
        for k in 0..n {
            t.push(f.slot() * n + k, f.slot() * n + k, s);
        }
    }
    t.into_csr()
}

pub fn assemble_backward(params: &MaterialParams, grid: &Grid) -> Result<BackwardMatrices, BackwardError> {
    params
        .require_admissible()
        .map_err(DynamicsError::from)?;
    let n = grid.len();
    let st = Stencils::new(grid);
    let k = stiffness(params, grid, &st);
    let r = dissipation(params, grid, &st);
    let c = skew_coupling(params, grid, &st);
    let g_back = c.add_scaled(&r, 1.0).scaled(-1.0);
    let g_fwd = c.add_scaled(&r, 1.0);
    let mass = Mass::new(params);
    let area = grid.cell_area();

    let fwd = FirstOrderSystem::new(*grid, k.clone(), g_fwd, mass);
    let sys = FirstOrderSystem::new(*grid, k.clone(), g_back, mass);
    let s = reflection(grid);
    let reflected = s.matmul(&fwd.generator).matmul(&s).scaled(-1.0);
    let mismatch = sys.generator.max_abs_diff(&reflected) / fwd.generator.max_abs().max(1.0);
    if !(mismatch <= REVERSAL_TOLERANCE) {
        return Err(BackwardError::AssemblyInconsistent(mismatch));
    }

    // sign split: +1 on the mechanical block, −1 on (τ, ℘) / (θ, P)
    let mut sign = Triplets::new(5 * n, 5 * n);
    for a in 0..5 {
        let v = if a < 3 { 1.0 } else { -1.0 };
        sign.add_diagonal(a * n, n, v);
    }
    let sign = sign.into_csr();
    let m = mass.to_csr(n);
    let e1_form = embed(grid, Some(&k), Some(&m), area);
    let e2_form = embed(grid, Some(&sign.matmul(&k)), Some(&sign.matmul(&m)), area);
    // E3 = q·(S M p) + ½ q_th·R q_th
    let sm = sign.matmul(&m);
    let mut t = Triplets::new(10 * n, 10 * n);
    let qslot = |a: usize| StateField::POSITIONS[a].slot() * n;
    let pslot = |a: usize| StateField::RATES[a].slot() * n;
    for (row, col, v) in sm.triplets() {
        let (a, i) = (row / n, row % n);
        let (b, j) = (col / n, col % n);
        t.push(qslot(a) + i, pslot(b) + j, area * v);
        t.push(pslot(b) + j, qslot(a) + i, area * v);
    }
    for (row, col, v) in r.triplets() {
        let (a, i) = (row / n, row % n);
        let (b, j) = (col / n, col % n);
        t.push(qslot(a) + i, qslot(b) + j, area * v);
    }
    let e3_form = t.into_csr();
    let dissipation_form = embed(grid, None, Some(&r), area);
    Ok(BackwardMatrices {
        params: *params,
        system: sys,
        e1_form,
        e2_form,
        e3_form,
        dissipation_form,
    })
}

impl BackwardMatrices {
    pub fn grid(&self) -> &Grid {
        &self.system.grid
    }

    /// Time derivatives of (E1, E2, E3) along the backward flow at U.
    pub fn functional_rates(&self, u: &State) -> (f64, f64, f64) {
        let au = self.system.generator.mul_vec(u.data());
        (
            self.e1_form.bilinear(u.data(), &au),
            self.e2_form.bilinear(u.data(), &au),
            self.e3_form.bilinear(u.data(), &au),
        )
    }
}

/// (E1, E2, E3) at U.
pub fn functionals(u: &State, bm: &BackwardMatrices) -> (f64, f64, f64) {
    let d = u.data();
    (
        0.5 * bm.e1_form.quad_form(d),
        0.5 * bm.e2_form.quad_form(d),
        0.5 * bm.e3_form.quad_form(d),
    )
}

/// √(2·E1): the energy norm.
pub fn energy_norm(u: &State, bm: &BackwardMatrices) -> f64 {
    bm.e1_form.quad_form(u.data()).max(0.0).sqrt()
}

/// One row of backward.csv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardSample {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub energy_norm: f64,
}

/// Integrates the backward system; `t` in the samples is backward time.
pub fn run_backward(
    u0: &State,
    bm: &BackwardMatrices,
    dt: f64,
    t_end: f64,
) -> Result<(State, Vec<BackwardSample>), BackwardError> {
    let n_steps = step_count(dt, t_end)?;
    let sample = |u: &State| {
        let (e1, e2, e3) = functionals(u, bm);
        BackwardSample {
            t: u.time(),
            e1,
            e2,
            e3,
            energy_norm: energy_norm(u, bm),
        }
    };
    let mut out = vec![sample(u0)];
    let mut u = u0.clone();
    if n_steps == 0 {
        return Ok((u, out));
    }
    let stepper = Stepper::new(&bm.system, &bm.params, dt)?;
    let t0 = u0.time();
    for k in 1..=n_steps {
        let mut next = stepper.step(&u, &NoSources)?.state;
        next.set_time(t0 + k as f64 * dt);
        out.push(sample(&next));
        u = next;
    }
    Ok((u, out))
}

pub fn write_backward_csv(path: &std::path::Path, rows: &[BackwardSample]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "E1", "E2", "E3", "energy_norm"])?;
    for r in rows {
        w.write_record([
            format!("{:?}", r.t),
            format!("{:?}", r.e1),
            format!("{:?}", r.e2),
            format!("{:?}", r.e3),
            format!("{:?}", r.energy_norm),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// Largest energy norm along the zero-data backward run.
    pub zero_data_max_norm: f64,
    /// Smallest c with ‖U(t)‖ ≤ ‖U(0)‖·e^{ct} along the perturbed run.
    pub growth_rate: f64,
    /// E1 never decreased along the perturbed run.
    pub e1_monotone: bool,
    pub perturbed: Vec<BackwardSample>,
}

/// Runs the backward system from zero data and from a tiny random perturbation.
pub fn backward_uniqueness_check(
    params: &MaterialParams,
    grid: &Grid,
    dt: f64,
    t_end: f64,
    seed: u64,
) -> Result<UniquenessReport, BackwardError> {
    let bm = assemble_backward(params, grid)?;
    let (_, zero) = run_backward(&State::zeros(*grid), &bm, dt, t_end)?;
    let zero_data_max_norm = zero.iter().map(|s| s.energy_norm).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..10 * grid.len())
        .map(|_| 1e-8 * (rng.random::<f64>() * 2.0 - 1.0))
        .collect();
    let u0 = State::from_vec(*grid, 0.0, data).expect("length");
    let (_, perturbed) = run_backward(&u0, &bm, dt, t_end)?;
    let n0 = perturbed[0].energy_norm;
    let growth_rate = perturbed
        .iter()
        .skip(1)
        .map(|s| (s.energy_norm / n0).ln() / s.t)
        .fold(f64::NEG_INFINITY, f64::max);
    let e1_monotone = perturbed.windows(2).all(|w| w[1].e1 >= w[0].e1);
    Ok(UniquenessReport {
        zero_data_max_norm,
        growth_rate,
        e1_monotone,
        perturbed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    /// ‖recovered − U0‖_E / ‖U0‖_E (absolute when U0 = 0).
    pub relative_error: f64,
    pub forward: EnergyReport,
    pub backward: Vec<BackwardSample>,
}

/// Runs forward for t_end, reverses the rates, runs the backward system for
/// t_end and compares the reversed end state with U0.
pub fn forward_backward_roundtrip(
    u0: &State,
    m: &OperatorMatrices,
    dt: f64,
    t_end: f64,
) -> Result<RoundTrip, BackwardError> {
    let bm = assemble_backward(&m.params, m.grid())?;
    let (mut u, forward) = crate::dynamics::run(u0, m, &NoSources, dt, t_end)?;
    u.reflect_rates();
    u.set_time(0.0);
    let (mut back, backward) = run_backward(&u, &bm, dt, t_end)?;
    back.reflect_rates();
    let diff: Vec<f64> = back.data().iter().zip(u0.data()).map(|(a, b)| a - b).collect();
    let num = m.energy_form.quad_form(&diff).max(0.0).sqrt();
    let den = m.energy_form.quad_form(u0.data()).max(0.0).sqrt();
    Ok(RoundTrip {
        relative_error: if den == 0.0 { num } else { num / den },
        forward,
        backward,
    })
}

/// Largest |fitted curvature| / |fitted slope| of ln E0 allowed for a log-affine tail.
pub const LOG_CURVATURE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub min_e0: f64,
    pub all_positive: bool,
    /// Slope of the quadratic fit of ln E0 at the centre of the window.
    pub slope: f64,
    /// Second derivative of the quadratic fit of ln E0.
    pub curvature: f64,
    pub relative_curvature: f64,
    pub passed: bool,
}

/// E0 must stay positive and ln E0 must be affine over the last half of the run.
pub fn localization_impossibility_check(report: &EnergyReport) -> Result<LocalizationReport, BackwardError> {
    if report.len() < 4 {
        return Err(BackwardError::NotApplicable("too few steps"));
    }
    if report.e0[0] == 0.0 {
        return Err(BackwardError::NotApplicable("zero initial energy"));
    }
    let min_e0 = report.e0.iter().copied().fold(f64::INFINITY, f64::min);
    let all_positive = report.e0.iter().all(|&e| e > 0.0);
    let t_end = *report.times.last().unwrap();
    let t_mid = 0.5 * (report.times[0] + t_end);
    let window: Vec<(f64, f64)> = report
        .times
        .iter()
        .zip(&report.e0)
        .filter(|(t, _)| **t >= t_mid)
        .map(|(t, e)| (*t, *e))
        .collect();
    if !all_positive || window.len() < 3 {
        return Ok(LocalizationReport {
            min_e0,
            all_positive,
            slope: f64::NAN,
            curvature: f64::NAN,
            relative_curvature: f64::INFINITY,
            passed: false,
        });
    }
    let centre = 0.5 * (window[0].0 + window.last().unwrap().0);
    let xs: Vec<f64> = window.iter().map(|(t, _)| t - centre).collect();
    let ys: Vec<f64> = window.iter().map(|(_, e)| e.ln()).collect();
    let (_, b, c) = quadratic_fit(&xs, &ys);
    let curvature = 2.0 * c;
    let relative_curvature = curvature.abs() / b.abs();
    Ok(LocalizationReport {
        min_e0,
        all_positive,
        slope: b,
        curvature,
        relative_curvature,
        passed: all_positive && relative_curvature <= LOG_CURVATURE_TOLERANCE,
    })
}

/// Least-squares a + b x + c x².
fn quadratic_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, xi, xi * xi);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let sol = ata.lu().solve(&aty).unwrap_or_else(nalgebra::Vector3::zeros);
    (sol[0], sol[1], sol[2])
}

/// True when the material has rate conduction; the localization test needs it.
pub fn is_dissipative(p: &MaterialParams) -> bool {
    p.model_type == ModelType::TypeIII
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_fit_recovers_coefficients() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.1 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.25 * v * v).collect();
        let (a, b, c) = quadratic_fit(&x, &y);
        assert!((a - 1.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12 && (c - 0.25).abs() < 1e-12);
    }
}
