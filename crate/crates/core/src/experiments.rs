//! End-to-end experiments driven by a [`Config`], each writing its CSVs and a
//! `summary.csv` of `criterion,value,threshold,pass` rows.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backward::{self, BackwardError};
use crate::config::{Config, ExperimentKind};
use crate::decay::{self, DecayError, DecayProfile, FluxAccumulator};
use crate::dynamics::mms::{mms_verify, ManufacturedSolution, MmsError, MmsSetup};
use crate::dynamics::modes::{overdetermined_mode_check, ModeError};
use crate::dynamics::{self, assemble, DynamicsError, EnergyReport, NoSources, OperatorMatrices};
use crate::grid::GridError;
use crate::material::{MaterialError, ModelType};
use crate::state::{InitialError, State, StateField};

/// Random vectors drawn for the identity and resolvent rows.
const RANDOM_VECTORS: usize = 100;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no experiment named in [experiment]")]
    NoExperiment,
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Initial(#[from] InitialError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error(transparent)]
    Backward(#[from] BackwardError),
    #[error(transparent)]
    Mms(#[from] MmsError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub criterion: String,
    pub value: String,
    pub threshold: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    fn push(&mut self, criterion: &str, value: f64, threshold: &str, pass: bool) {
        self.rows.push(SummaryRow {
            criterion: criterion.to_string(),
            value: format!("{value:?}"),
            threshold: threshold.to_string(),
            pass,
        });
    }

    fn at_most(&mut self, criterion: &str, value: f64, threshold: f64) {
        self.push(criterion, value, &format!("{threshold:?}"), value <= threshold);
    }

    fn at_least(&mut self, criterion: &str, value: f64, threshold: f64) {
        self.push(criterion, value, &format!("{threshold:?}"), value >= threshold);
    }

    fn error(&mut self, err: &dyn std::fmt::Display) {
        self.rows.push(SummaryRow {
            criterion: "error".into(),
            value: err.to_string(),
            threshold: String::new(),
            pass: false,
        });
    }

    pub fn get(&self, criterion: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.criterion == criterion)
    }

    /// True when there is at least one row and every row passed.
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["criterion", "value", "threshold", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.criterion.as_str(),
                r.value.as_str(),
                r.threshold.as_str(),
                if r.pass { "pass" } else { "fail" },
            ])?;
        }
        w.flush()
    }
}

/// Runs the configured experiment into `out_dir`. `summary.csv` is written
/// even when the experiment aborts; the abort becomes an `error` row.
pub fn run_experiment(cfg: &Config, out_dir: &Path) -> io::Result<Summary> {
    fs::create_dir_all(out_dir)?;
    let mut summary = Summary::default();
    if let Err(e) = dispatch(cfg, out_dir, &mut summary) {
        summary.error(&e);
    }
    summary.write_csv(&out_dir.join("summary.csv"))?;
    Ok(summary)
}

fn dispatch(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    match cfg.experiment.kind.ok_or(ExperimentError::NoExperiment)? {
        ExperimentKind::Type2Conservation => type2_conservation(cfg, out, s),
        ExperimentKind::Type3Decay => type3_decay(cfg, out, s),
        ExperimentKind::SpatialDecay => spatial_decay(cfg, out, s),
        ExperimentKind::BackwardUniqueness => backward_uniqueness(cfg, out, s),
        ExperimentKind::ForwardBackwardRoundtrip => roundtrip(cfg, out, s),
        ExperimentKind::MmsConvergence => mms_convergence(cfg, out, s),
        ExperimentKind::ResolventCheck => resolvent_check(cfg, s),
    }
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

/// Worst |Uᵀ E A U + Uᵀ D U| / ‖U‖²_E over seeded random states.
pub fn identity_residual(m: &OperatorMatrices, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = 10 * m.grid().len();
    (0..RANDOM_VECTORS)
        .map(|_| m.identity_residual(&random_vector(&mut rng, len)))
        .fold(0.0, f64::max)
}

/// Worst ‖U − R(U − AU)‖_E / ‖U‖_E over seeded random states, R the resolvent solve.
pub fn resolvent_roundtrip(m: &OperatorMatrices, seed: u64, count: usize) -> Result<f64, DynamicsError> {
    let g = *m.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let u = random_vector(&mut rng, 10 * g.len());
        let au = m.generator().mul_vec(&u);
        let rhs: Vec<f64> = u.iter().zip(&au).map(|(a, b)| a - b).collect();
        let back = dynamics::resolvent_apply(&State::from_vec(g, 0.0, rhs).expect("length"), m)?;
        let diff: Vec<f64> = back.data().iter().zip(&u).map(|(a, b)| a - b).collect();
        worst = worst.max((m.energy_form.quad_form(&diff) / m.energy_form.quad_form(&u)).sqrt());
    }
    Ok(worst)
}

/// Energy norm of the thermal-diffusive part (τ, θ, ℘, P) of a state.
pub fn thermal_norm(u: &State, m: &OperatorMatrices) -> f64 {
    let mut v = u.clone();
    for f in [
        StateField::V1,
        StateField::V2,
        StateField::Z1,
        StateField::Z2,
        StateField::W,
        StateField::Y,
    ] {
        v.field_mut(f).fill(0.0);
    }
    (0.5 * m.energy_form.quad_form(v.data())).max(0.0).sqrt()
}

/// Writes one CSV per field for snapshot steps.
struct Snapshots<'a> {
    dir: &'a Path,
    every: usize,
    enabled: bool,
    failure: Option<io::Error>,
}

impl<'a> Snapshots<'a> {
    fn new(cfg: &Config, dir: &'a Path) -> Self {
        Snapshots {
            dir,
            every: cfg.time.snapshot_every,
            enabled: cfg.output.snapshots && cfg.time.snapshot_every > 0,
            failure: None,
        }
    }

    fn observe(&mut self, k: usize, u: &State) {
        if !self.enabled || !k.is_multiple_of(self.every) || self.failure.is_some() {
            return;
        }
        for f in StateField::ALL {
            if let Err(e) = u.write_field_csv(f, &self.dir.join(format!("{}_{k}.csv", f.name()))) {
                self.failure = Some(io::Error::other(e.to_string()));
                return;
            }
        }
    }

    fn finish(self) -> io::Result<()> {
        self.failure.map_or(Ok(()), Err)
    }
}

/// Assembles, builds the initial state and runs forward with snapshots and energy.csv.
fn forward(
    cfg: &Config,
    out: &Path,
    extra: &mut dyn FnMut(usize, &State, &OperatorMatrices),
) -> Result<(OperatorMatrices, EnergyReport), ExperimentError> {
    let grid = cfg.grid.build()?;
    let m = assemble(&cfg.material, &grid)?;
    let u0 = cfg.ic.build(&grid)?;
    let mut snaps = Snapshots::new(cfg, out);
    let (_, rep) = dynamics::run_with(&u0, &m, &NoSources, cfg.time.dt, cfg.time.t_end, &mut |k, u| {
        snaps.observe(k, u);
        extra(k, u, &m);
    })?;
    snaps.finish()?;
    rep.write_csv(&out.join("energy.csv"))?;
    Ok((m, rep))
}

fn type2_conservation(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let (m, rep) = forward(cfg, out, &mut |_, _, _| {})?;
    s.at_most("identity_residual", identity_residual(&m, cfg.experiment.seed), dynamics::IDENTITY_TOLERANCE);
    s.at_most("energy_drift", rep.relative_drift(), 1e-9);
    Ok(())
}

/// Largest relative step-to-step increase of E0; ≤ 0 means nonincreasing.
fn max_energy_increase(rep: &EnergyReport) -> f64 {
    let e0 = rep.e0[0];
    rep.e0
        .windows(2)
        .map(|w| if e0 > 0.0 { (w[1] - w[0]) / e0 } else { w[1] - w[0] })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn type3_decay(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let mut thermal = Vec::new();
    let asymptotic = cfg.experiment.asymptotic;
    let (m, rep) = forward(cfg, out, &mut |_, u, m| {
        if asymptotic {
            thermal.push(thermal_norm(u, m));
        }
    })?;
    s.at_most("identity_residual", identity_residual(&m, cfg.experiment.seed), dynamics::IDENTITY_TOLERANCE);
    s.at_most("balance_residual", rep.max_relative_balance(), 1e-10);
    if rep.len() > 1 {
        s.at_most("energy_increase", max_energy_increase(&rep), 0.0);
    }
    if !asymptotic {
        return Ok(());
    }
    let peak = thermal.iter().copied().fold(0.0, f64::max);
    let last = *thermal.last().unwrap();
    let factor = if last > 0.0 { peak / last } else { f64::INFINITY };
    s.at_least("thermal_decay_factor", factor, 10.0);

    let e = &cfg.experiment;
    let mode_grid = crate::grid::Grid::new(cfg.grid.lx, cfg.grid.ly, e.mode_nx, e.mode_ny)?;
    match overdetermined_mode_check(&cfg.material, &mode_grid, e.mode_count) {
        Ok(modes) => {
            let worst = modes.iter().map(|r| r.div_ratio).fold(f64::INFINITY, f64::min);
            s.push("mode_min_div_ratio", worst, "0.0", worst > 0.0);
        }
        Err(err) => s.error(&err),
    }

    let loc = backward::localization_impossibility_check(&rep)?;
    s.push("min_e0", loc.min_e0, "0.0", loc.all_positive);
    s.at_most("log_curvature", loc.relative_curvature, backward::LOG_CURVATURE_TOLERANCE);
    Ok(())
}

/// Interface taken as z = 0 for decay runs: at least 10% along the strip and
/// with both neighbouring rows free of initial data (the section quantities at
/// interface k average rows k−1 and k).
pub fn auto_origin(u0: &State) -> usize {
    let g = *u0.grid();
    let support = (0..g.ny)
        .filter(|&j| StateField::ALL.iter().any(|&f| (0..g.nx).any(|i| u0.field(f)[g.index(i, j)] != 0.0)))
        .max();
    let tenth = (0.1 * g.ny as f64).ceil() as usize;
    support.map_or(tenth, |j| (j + 2).max(tenth)).min(g.ny - 1)
}

/// Interface nearest to the line x2 (interface k lies at (k + ½) hy).
pub fn interface_at(grid: &crate::grid::Grid, x2: f64) -> usize {
    ((x2 / grid.hy - 0.5).round().max(0.0) as usize).clamp(1, grid.ny - 1)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn spatial_decay(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let p = &cfg.material;
    let zeta = p.zeta()?;
    let xi = p.xi_estimate()? * cfg.experiment.xi_scale;
    let grid = cfg.grid.build()?;
    let u0 = cfg.ic.build(&grid)?;
    let origin = cfg.experiment.origin_row.unwrap_or_else(|| auto_origin(&u0));
    let dt = cfg.time.dt;

    let mut points = cfg.experiment.flux_points.clone();
    if points.is_empty() {
        // halfway between the origin and the ξ front at five evenly spaced times
        let z0 = (origin as f64 + 0.5) * grid.hy;
        points = (1..=5)
            .map(|i| {
                let t = cfg.time.t_end * i as f64 / 5.0;
                (z0 + 0.5 * xi * t, t)
            })
            .collect();
    }
    let targets: Vec<(usize, usize)> = points
        .iter()
        .map(|&(x2, t)| ((t / dt).round() as usize, interface_at(&grid, x2)))
        .collect();

    let every = cfg.time.snapshot_every.max(1);
    let mut acc = FluxAccumulator::new(p, &grid);
    let mut profile = DecayProfile::new(grid, origin);
    let mut gaps = Vec::new();
    let mut failure = None;
    let mut observe = |k: usize, u: &State, _: &OperatorMatrices| {
        if failure.is_some() {
            return;
        }
        if let Err(e) = acc.observe(u) {
            failure = Some(e);
            return;
        }
        if k.is_multiple_of(every) {
            profile.record(&acc);
        }
        let volume = if targets.iter().any(|t| t.0 == k) { acc.volume_j() } else { Vec::new() };
        for &(step, row) in &targets {
            if step == k {
                gaps.push(relative_gap(acc.flux_integral[row], volume[row]));
            }
        }
    };
    forward(cfg, out, &mut observe)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    decay::write_decay_csv(&out.join("decay.csv"), &profile, zeta, xi)?;

    if gaps.len() == points.len() {
        s.at_most("flux_identity_gap", gaps.iter().copied().fold(0.0, f64::max), 1e-4);
    } else {
        s.push("flux_identity_gap", f64::NAN, "1e-4", false);
    }
    if cfg.experiment.check_far_field {
        let j = acc.flux_j();
        let far = if j[origin] == 0.0 { 0.0 } else { (j[grid.ny - 1] / j[origin]).abs() };
        s.at_most("far_field_ratio", far, 1e-8);
    }

    let lemma = decay::check_lemma(&profile, p)?;
    s.push(
        "lemma_margin",
        lemma.min_margin,
        &format!("{:?}", -decay::LEMMA_RELATIVE_TOLERANCE * lemma.scale),
        lemma.passed,
    );
    match decay::envelope_check(&profile, xi, zeta) {
        Ok(env) => s.push("envelope_ratio", env.worst_ratio, "1.0", env.passed),
        Err(e) => s.error(&e),
    }
    Ok(())
}

fn backward_uniqueness(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let grid = cfg.grid.build()?;
    let rep = backward::backward_uniqueness_check(&cfg.material, &grid, cfg.time.dt, cfg.time.t_end, cfg.experiment.seed)?;
    backward::write_backward_csv(&out.join("backward.csv"), &rep.perturbed)?;
    s.at_most("zero_data_norm", rep.zero_data_max_norm, 1e-12);
    s.push("growth_rate", rep.growth_rate, "finite", rep.growth_rate.is_finite());
    if cfg.material.model_type == ModelType::TypeIII {
        let e1 = &rep.perturbed;
        let worst = e1
            .windows(2)
            .map(|w| (w[1].e1 - w[0].e1) / e1[0].e1)
            .fold(f64::INFINITY, f64::min);
        s.at_least("e1_min_increment", worst, 0.0);
    }
    Ok(())
}

fn roundtrip(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let grid = cfg.grid.build()?;
    let m = assemble(&cfg.material, &grid)?;
    let u0 = cfg.ic.build(&grid)?;
    let rt = backward::forward_backward_roundtrip(&u0, &m, cfg.time.dt, cfg.time.t_end)?;
    rt.forward.write_csv(&out.join("energy.csv"))?;
    backward::write_backward_csv(&out.join("backward.csv"), &rt.backward)?;
    s.at_most("roundtrip_error", rt.relative_error, 1e-6);
    Ok(())
}

fn write_mms_csv(path: &Path, rep: &crate::dynamics::mms::MmsReport) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ladder", "step", "error", "order"])?;
    for (name, pairs, orders) in [("space", &rep.space, &rep.space_orders), ("time", &rep.time, &rep.time_orders)] {
        for (i, (h, err)) in pairs.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:?}", orders[i - 1]) };
            w.write_record([name.to_string(), format!("{h:?}"), format!("{err:?}"), order])?;
        }
    }
    w.flush()
}

fn mms_convergence(cfg: &Config, out: &Path, s: &mut Summary) -> Result<(), ExperimentError> {
    let e = &cfg.experiment;
    let setup = MmsSetup {
        lx: cfg.grid.lx,
        ly: cfg.grid.ly,
        grid_sizes: e.mms_grids.clone(),
        space_dt: cfg.time.dt,
        space_t_end: cfg.time.t_end,
        time_grid: (cfg.grid.nx, cfg.grid.ny),
        dts: e.mms_dts.clone(),
        time_t_end: cfg.time.t_end,
    };
    let rep = mms_verify(&cfg.material, &ManufacturedSolution::default(), &setup)?;
    write_mms_csv(&out.join("mms.csv"), &rep)?;
    for (name, orders) in [("space", &rep.space_orders), ("time", &rep.time_orders)] {
        for (i, o) in orders.iter().enumerate() {
            s.push(&format!("{name}_order_{}", i + 1), *o, "[1.8,2.2]", (1.8..=2.2).contains(o));
        }
    }
    Ok(())
}

fn resolvent_check(cfg: &Config, s: &mut Summary) -> Result<(), ExperimentError> {
    let grid = cfg.grid.build()?;
    let m = assemble(&cfg.material, &grid)?;
    s.at_most("identity_residual", identity_residual(&m, cfg.experiment.seed), dynamics::IDENTITY_TOLERANCE);
    let zero = dynamics::resolvent_apply(&State::zeros(grid), &m)?;
    let zmax = zero.data().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    s.at_most("resolvent_zero", zmax, 0.0);
    s.at_most("resolvent_roundtrip", resolvent_roundtrip(&m, cfg.experiment.seed, 10)?, 1e-10);
    Ok(())
}
