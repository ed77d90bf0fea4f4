//! Manufactured solutions for convergence studies.
//!
//! Every displacement-like field is a single separable mode
//! a·sin(kx x)·sin(ky y)·cos(ωt + φ), so it satisfies the clamped/insulated
//! boundary conditions. Two kinds of forcing are available: the loads of the
//! continuous equations (error = space + time discretisation) and the loads
//! of the semi-discrete system (the nodal samples solve it exactly, so the
//! error is pure time discretisation).

use std::f64::consts::PI;

use thiserror::Error;

use super::{assemble, run, DynamicsError, Loads, OperatorMatrices, Sources};
use crate::grid::{Grid, GridError};
use crate::material::MaterialParams;
use crate::state::{State, StateField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub m: u32,
    pub n: u32,
    pub omega: f64,
    pub phase: f64,
}

/// Pointwise value and derivatives of one mode.
#[derive(Debug, Clone, Copy, Default)]
struct Jet {
    v: f64,
    t: f64,
    tt: f64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
    xt: f64,
    yt: f64,
    lap_t: f64,
}

impl Jet {
    fn lap(&self) -> f64 {
        self.xx + self.yy
    }
}

impl Mode {
    fn jet(&self, lx: f64, ly: f64, x: f64, y: f64, t: f64) -> Jet {
        let kx = self.m as f64 * PI / lx;
        let ky = self.n as f64 * PI / ly;
        let (sx, cx) = (kx * x).sin_cos();
        let (sy, cy) = (ky * y).sin_cos();
        let arg = self.omega * t + self.phase;
        let (st, ct) = arg.sin_cos();
        let a = self.amplitude;
        let w = self.omega;
        Jet {
            v: a * sx * sy * ct,
            t: -a * w * sx * sy * st,
            tt: -a * w * w * sx * sy * ct,
            x: a * kx * cx * sy * ct,
            y: a * ky * sx * cy * ct,
            xx: -a * kx * kx * sx * sy * ct,
            yy: -a * ky * ky * sx * sy * ct,
            xy: a * kx * ky * cx * cy * ct,
            xt: -a * w * kx * cx * sy * st,
            yt: -a * w * ky * sx * cy * st,
            lap_t: a * w * (kx * kx + ky * ky) * sx * sy * st,
        }
    }
}

/// One mode per displacement-like field, in the order (v1, v2, w, τ, ℘).
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSolution {
    pub modes: [Mode; 5],
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        let m = |amplitude, m, n, omega, phase| Mode {
            amplitude,
            m,
            n,
            omega,
            phase,
        };
        ManufacturedSolution {
            modes: [
                m(1.0, 1, 1, 1.0, 0.3),
                m(0.5, 1, 2, 1.3, 1.1),
                m(1.0, 2, 1, 0.7, 0.0),
                m(0.5, 1, 1, 1.1, 0.5),
                m(0.3, 2, 2, 0.9, 2.0),
            ],
        }
    }
}

impl ManufacturedSolution {
    /// Identically zero solution.
    pub fn zero() -> Self {
        let z = Mode {
            amplitude: 0.0,
            m: 1,
            n: 1,
            omega: 0.0,
            phase: 0.0,
        };
        ManufacturedSolution { modes: [z; 5] }
    }

    fn jets(&self, g: &Grid, x: f64, y: f64, t: f64) -> [Jet; 5] {
        self.modes.map(|m| m.jet(g.lx, g.ly, x, y, t))
    }

    /// Nodal samples of the solution and its rates at time t.
    pub fn exact_state(&self, g: &Grid, t: f64) -> State {
        let mut s = State::zeros(*g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let jets = self.jets(g, g.x(i), g.y(j), t);
                for (a, jet) in jets.iter().enumerate() {
                    s.field_mut(StateField::POSITIONS[a])[k] = jet.v;
                    s.field_mut(StateField::RATES[a])[k] = jet.t;
                }
            }
        }
        s.set_time(t);
        s
    }

    /// Loads that make this field an exact solution of the continuous equations.
    pub fn continuous_loads(&self, p: &MaterialParams, g: &Grid, t: f64) -> Loads {
        let n = g.len();
        let mut l = Loads::zeros(n);
        let i_ = p.inertia();
        let h = p.half_thickness;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                let [v1, v2, w, tau, wp] = self.jets(g, g.x(i), g.y(j), t);
                let theta_x = tau.xt;
                let theta_y = tau.yt;
                let pp_x = wp.xt;
                let pp_y = wp.yt;
                l.f1[k] = p.rho * i_ * v1.tt
                    - i_ * (p.mu * v1.lap() + (p.lambda + p.mu) * (v1.xx + v2.xy)
                        - p.d1 * theta_x
                        - p.d2 * pp_x)
                    + 2.0 * h * p.mu * (v1.v + w.x);
                l.f2[k] = p.rho * i_ * v2.tt
                    - i_ * (p.mu * v2.lap() + (p.lambda + p.mu) * (v1.xy + v2.yy)
                        - p.d1 * theta_y
                        - p.d2 * pp_y)
                    + 2.0 * h * p.mu * (v2.v + w.y);
                l.f[k] = p.rho * w.tt - p.mu * (w.lap() + v1.x + v2.y);
                let div_rate = v1.xt + v2.yt;
                l.heat[k] = i_ * (p.c * tau.tt + p.kappa * wp.tt)
                    - i_ * (p.k1 * tau.lap() + p.hbar1 * wp.lap() + p.k2 * tau.lap_t + p.hbar2 * wp.lap_t)
                    + i_ * p.d1 * div_rate
                    + 2.0 * h * (p.k1 * tau.v + p.hbar1 * wp.v + p.k2 * tau.t + p.hbar2 * wp.t);
                l.mass[k] = i_ * (p.kappa * tau.tt + p.r * wp.tt)
                    - i_ * (p.h1 * wp.lap() + p.hbar1 * tau.lap() + p.hbar2 * tau.lap_t + p.h2 * wp.lap_t)
                    + i_ * p.d2 * div_rate
                    + 2.0 * h * (p.h1 * wp.v + p.hbar1 * tau.v + p.hbar2 * tau.t + p.h2 * wp.t);
            }
        }
        l
    }

    /// Loads that make the nodal samples an exact solution of the semi-discrete system.
    pub fn discrete_loads(&self, m: &OperatorMatrices, t: f64) -> Loads {
        let g = *m.grid();
        let n = g.len();
        let exact = self.exact_state(&g, t);
        let (q, p) = m.system.split(exact.data());
        // ṗ sampled analytically
        let mut pdot = vec![0.0; 5 * n];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.index(i, j);
                for (a, jet) in self.jets(&g, g.x(i), g.y(j), t).iter().enumerate() {
                    pdot[a * n + k] = jet.tt;
                }
            }
        }
        let mut fp = vec![0.0; 5 * n];
        m.system.mass.apply(n, &pdot, &mut fp, false);
        let kq = m.system.stiffness.mul_vec(&q);
        let gp = m.system.coupling.mul_vec(&p);
        for k in 0..5 * n {
            fp[k] += kq[k] + gp[k];
        }
        let h2 = 2.0 * m.params.half_thickness;
        Loads {
            f1: fp[0..n].to_vec(),
            f2: fp[n..2 * n].to_vec(),
            f: fp[2 * n..3 * n].iter().map(|v| v / h2).collect(),
            heat: fp[3 * n..4 * n].to_vec(),
            mass: fp[4 * n..5 * n].to_vec(),
        }
    }
}

pub struct ContinuousForcing<'a> {
    pub solution: &'a ManufacturedSolution,
    pub params: MaterialParams,
}

impl Sources for ContinuousForcing<'_> {
    fn loads(&self, grid: &Grid, t: f64) -> Option<Loads> {
        Some(self.solution.continuous_loads(&self.params, grid, t))
    }
}

pub struct DiscreteForcing<'a> {
    pub solution: &'a ManufacturedSolution,
    pub matrices: &'a OperatorMatrices,
}

impl Sources for DiscreteForcing<'_> {
    fn loads(&self, _grid: &Grid, t: f64) -> Option<Loads> {
        Some(self.solution.discrete_loads(self.matrices, t))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmsError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("a convergence ladder needs at least two levels")]
    ShortLadder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsReport {
    /// (h, error) for each grid, coarse to fine; h = max(hx, hy).
    pub space: Vec<(f64, f64)>,
    /// (dt, error) for each step size, coarse to fine.
    pub time: Vec<(f64, f64)>,
    /// log(e_k/e_{k+1}) / log(h_k/h_{k+1}) for consecutive levels.
    pub space_orders: Vec<f64>,
    pub time_orders: Vec<f64>,
}

/// Settings for a two-ladder convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsSetup {
    pub lx: f64,
    pub ly: f64,
    /// Square grids n×n for the spatial ladder.
    pub grid_sizes: Vec<usize>,
    pub space_dt: f64,
    pub space_t_end: f64,
    /// Grid (nx, ny) for the temporal ladder.
    pub time_grid: (usize, usize),
    pub dts: Vec<f64>,
    pub time_t_end: f64,
}

/// Discrete L² error over all ten fields.
pub fn state_error(a: &State, b: &State) -> f64 {
    let g = a.grid();
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    (g.cell_area() * s).sqrt()
}

fn orders(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

pub fn mms_verify(
    params: &MaterialParams,
    solution: &ManufacturedSolution,
    setup: &MmsSetup,
) -> Result<MmsReport, MmsError> {
    if setup.grid_sizes.len() < 2 || setup.dts.len() < 2 {
        return Err(MmsError::ShortLadder);
    }
    let mut space = Vec::new();
    for &nn in &setup.grid_sizes {
        let g = Grid::new(setup.lx, setup.ly, nn, nn)?;
        let m = assemble(params, &g)?;
        let u0 = solution.exact_state(&g, 0.0);
        let forcing = ContinuousForcing {
            solution,
            params: *params,
        };
        let (u, _) = run(&u0, &m, &forcing, setup.space_dt, setup.space_t_end)?;
        let exact = solution.exact_state(&g, u.time());
        space.push((g.hx.max(g.hy), state_error(&u, &exact)));
    }
    let g = Grid::new(setup.lx, setup.ly, setup.time_grid.0, setup.time_grid.1)?;
    let m = assemble(params, &g)?;
    let mut time = Vec::new();
    for &dt in &setup.dts {
        let u0 = solution.exact_state(&g, 0.0);
        let forcing = DiscreteForcing {
            solution,
            matrices: &m,
        };
        let (u, _) = run(&u0, &m, &forcing, dt, setup.time_t_end)?;
        let exact = solution.exact_state(&g, u.time());
        time.push((dt, state_error(&u, &exact)));
    }
    Ok(MmsReport {
        space_orders: orders(&space),
        time_orders: orders(&time),
        space,
        time,
    })
}
