mod common;

use common::{any_material, random_vec, rel};
use gn_plate::dynamics::mms::{mms_verify, state_error, ManufacturedSolution, MmsSetup};
use gn_plate::dynamics::modes::{overdetermined_mode_check, ModeError};
use gn_plate::dynamics::{self, assemble, energy, resolvent_apply, step, step_count, DynamicsError, NoSources};
use gn_plate::grid::Grid;
use gn_plate::material::MaterialParams;
use gn_plate::state::{InitialCondition, State, StateField};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

const MECH: [StateField; 6] = [
    StateField::V1,
    StateField::V2,
    StateField::Z1,
    StateField::Z2,
    StateField::W,
    StateField::Y,
];
const THERMAL: [StateField; 4] = [StateField::Tau, StateField::Theta, StateField::Wp, StateField::P];

fn grid(n: usize) -> Grid {
    Grid::new(1.0, 1.0, n, n).unwrap()
}

fn random_state(g: Grid, seed: u64) -> State {
    State::from_vec(g, 0.0, random_vec(seed, 10 * g.len())).unwrap()
}

fn dense(m: &gn_plate::sparse::CsrMatrix) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(rows.len(), rows.len(), |r, c| rows[r][c])
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_holds_for_random_materials(p in any_material(), n in 3usize..7, seed in any::<u64>()) {
        let m = assemble(&p, &grid(n)).unwrap();
        let u = random_vec(seed, 10 * n * n);
        prop_assert!(m.identity_residual(&u) <= 1e-12);
    }

    #[test]
    fn step_is_linear(p in any_material(), seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = grid(5);
        let m = assemble(&p, &g).unwrap();
        let u = random_state(g, seed);
        let v = random_state(g, seed ^ 0x9e37);
        let mut mix = u.clone();
        mix.data_mut().iter_mut().zip(v.data()).for_each(|(x, y)| *x = a * *x + b * y);
        let lhs = step(&mix, &m, &NoSources, 0.01).unwrap();
        let su = step(&u, &m, &NoSources, 0.01).unwrap();
        let sv = step(&v, &m, &NoSources, 0.01).unwrap();
        let scale = max_abs(lhs.data()).max(1.0);
        for ((l, x), y) in lhs.data().iter().zip(su.data()).zip(sv.data()) {
            prop_assert!((l - (a * x + b * y)).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn energy_never_increases(p in any_material(), seed in any::<u64>()) {
        let g = grid(5);
        let m = assemble(&p, &g).unwrap();
        let (_, rep) = dynamics::run(&random_state(g, seed), &m, &NoSources, 0.02, 0.4).unwrap();
        for w in rep.e0.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(rep.max_relative_balance() <= 1e-10);
    }
}

#[test]
fn energy_form_is_symmetric_positive_definite() {
    for p in [MaterialParams::reference(), MaterialParams::reference().into_type_ii()] {
        let m = assemble(&p, &grid(4)).unwrap();
        let e = &m.energy_form;
        assert!(e.max_abs_diff(&e.transpose()) <= 1e-14 * e.max_abs());
        let eig = SymmetricEigen::new(dense(e));
        assert!(eig.eigenvalues.min() > 0.0, "min eigenvalue {}", eig.eigenvalues.min());

        let d = &m.dissipation_form;
        assert!(d.max_abs_diff(&d.transpose()) <= 1e-14 * d.max_abs().max(1.0));
        let eig = SymmetricEigen::new(dense(d));
        assert!(eig.eigenvalues.min() >= -1e-12 * d.max_abs().max(1.0));
    }
}

#[test]
fn type_ii_has_no_dissipation() {
    let m = assemble(&MaterialParams::reference().into_type_ii(), &grid(6)).unwrap();
    assert_eq!(m.dissipation_form.max_abs(), 0.0);
    assert_eq!(m.rate_dissipation.max_abs(), 0.0);
}

#[test]
fn kinetic_energy_of_uniform_deflection_rate() {
    let p = MaterialParams::reference();
    let g = Grid::new(2.0, 1.0, 7, 5).unwrap();
    let m = assemble(&p, &g).unwrap();
    let mut u = State::zeros(g);
    u.field_mut(StateField::Y).fill(1.0);
    let (e, d) = energy(&u, &m).unwrap();
    // ½ · 2hρ · y² per unit area
    let expect = p.half_thickness * p.rho * g.len() as f64 * g.cell_area();
    assert!(rel(e, expect) <= 1e-14, "{e} vs {expect}");
    assert_eq!(d, 0.0);
}

#[test]
fn zero_state_stays_zero() {
    let g = grid(8);
    let m = assemble(&MaterialParams::reference(), &g).unwrap();
    let (u, rep) = dynamics::run(&State::zeros(g), &m, &NoSources, 0.01, 0.1).unwrap();
    assert!(u.data().iter().all(|v| *v == 0.0));
    assert!(rep.e0.iter().all(|e| *e == 0.0));
}

#[test]
fn type_ii_conserves_and_type_iii_balances() {
    let g = grid(12);
    let ic = InitialCondition::GaussianBump {
        field: StateField::W,
        amplitude: 1.0,
        center: (0.5, 0.5),
        width: 0.15,
        cutoff: None,
    };
    let u0 = ic.build(&g).unwrap();
    let m2 = assemble(&MaterialParams::reference().into_type_ii(), &g).unwrap();
    let (_, rep) = dynamics::run(&u0, &m2, &NoSources, 0.005, 0.5).unwrap();
    assert!(rep.relative_drift() <= 1e-12, "{}", rep.relative_drift());

    let m3 = assemble(&MaterialParams::reference(), &g).unwrap();
    let (_, rep) = dynamics::run(&u0, &m3, &NoSources, 0.005, 0.5).unwrap();
    assert!(rep.max_relative_balance() <= 1e-12);
    assert!(rep.e0.last().unwrap() < &rep.e0[0]);
}

#[test]
fn uncoupled_material_keeps_fields_apart() {
    let mut p = MaterialParams::reference();
    p.d1 = 0.0;
    p.d2 = 0.0;
    let g = grid(6);
    let m = assemble(&p, &g).unwrap();
    let full = random_state(g, 11);

    let mut mech = full.clone();
    THERMAL.iter().for_each(|&f| mech.field_mut(f).fill(0.0));
    let (out, _) = dynamics::run(&mech, &m, &NoSources, 0.01, 0.2).unwrap();
    for f in THERMAL {
        assert_eq!(max_abs(out.field(f)), 0.0, "{} picked up data", f.name());
    }

    let mut thermal = full;
    MECH.iter().for_each(|&f| thermal.field_mut(f).fill(0.0));
    let (out, _) = dynamics::run(&thermal, &m, &NoSources, 0.01, 0.2).unwrap();
    for f in MECH {
        assert_eq!(max_abs(out.field(f)), 0.0, "{} picked up data", f.name());
    }
}

#[test]
fn resolvent_of_zero_and_round_trip() {
    let g = grid(10);
    for p in [MaterialParams::reference(), MaterialParams::reference().into_type_ii()] {
        let m = assemble(&p, &g).unwrap();
        let z = resolvent_apply(&State::zeros(g), &m).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));

        let u = random_state(g, 5);
        let au = m.generator().mul_vec(u.data());
        let f: Vec<f64> = u.data().iter().zip(&au).map(|(a, b)| a - b).collect();
        let x = resolvent_apply(&State::from_vec(g, 0.0, f).unwrap(), &m).unwrap();
        let err = x.data().iter().zip(u.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-11 * max_abs(u.data()), "{err}");
    }
}

#[test]
fn grid_mismatch_is_reported() {
    let m = assemble(&MaterialParams::reference(), &grid(6)).unwrap();
    let other = State::zeros(grid(7));
    assert!(matches!(energy(&other, &m), Err(DynamicsError::GridMismatch)));
    assert!(matches!(step(&other, &m, &NoSources, 0.1), Err(DynamicsError::GridMismatch)));
    assert!(matches!(resolvent_apply(&other, &m), Err(DynamicsError::GridMismatch)));
}

#[test]
fn step_count_requires_exact_division() {
    assert_eq!(step_count(1e-3, 1.0).unwrap(), 1000);
    assert_eq!(step_count(0.1, 0.0).unwrap(), 0);
    assert!(matches!(step_count(0.3, 1.0), Err(DynamicsError::InvalidTimeStep { .. })));
    assert!(matches!(step_count(-0.1, 1.0), Err(DynamicsError::InvalidTimeStep { .. })));
    assert!(matches!(step_count(f64::NAN, 1.0), Err(DynamicsError::InvalidTimeStep { .. })));
}

#[test]
fn inadmissible_material_is_rejected() {
    let mut p = MaterialParams::reference();
    p.kappa = 10.0;
    assert!(matches!(assemble(&p, &grid(4)), Err(DynamicsError::Material(_))));
}

#[test]
fn modes_need_coupling_and_type_iii() {
    let mut p = MaterialParams::reference();
    p.d1 = 0.0;
    p.d2 = 0.0;
    assert_eq!(overdetermined_mode_check(&p, &grid(6), 5), Err(ModeError::NotApplicable));
    let p2 = MaterialParams::reference().into_type_ii();
    assert_eq!(overdetermined_mode_check(&p2, &grid(6), 5), Err(ModeError::TypeMismatch));
    assert_eq!(
        overdetermined_mode_check(&MaterialParams::reference(), &grid(32), 5),
        Err(ModeError::TooLarge(3 * 32 * 32))
    );
}

#[test]
fn low_modes_are_not_divergence_free() {
    let p = MaterialParams::reference();
    let modes = overdetermined_mode_check(&p, &grid(16), 20).unwrap();
    assert_eq!(modes.len(), 20);
    assert!(modes.iter().all(|r| r.div_ratio > 0.0 && r.eigenvalue > 0.0));
    assert!(modes.windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
}

#[test]
fn mode_shapes_ignore_density() {
    let p = MaterialParams::reference();
    let mut heavy = p;
    heavy.rho *= 4.0;
    let a = overdetermined_mode_check(&p, &grid(8), 10).unwrap();
    let b = overdetermined_mode_check(&heavy, &grid(8), 10).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(rel(x.eigenvalue, 4.0 * y.eigenvalue) <= 1e-9);
        assert!(rel(x.div_ratio, y.div_ratio) <= 1e-6);
    }
}

#[test]
fn zero_manufactured_solution_has_zero_error() {
    let setup = MmsSetup {
        lx: 1.0,
        ly: 1.0,
        grid_sizes: vec![4, 8],
        space_dt: 0.05,
        space_t_end: 0.1,
        time_grid: (4, 4),
        dts: vec![0.05, 0.025],
        time_t_end: 0.1,
    };
    let p = MaterialParams::reference();
    let zero = ManufacturedSolution::zero();
    let g = grid(4);
    assert_eq!(state_error(&zero.exact_state(&g, 0.3), &State::zeros(g)), 0.0);
    let rep = mms_verify(&p, &zero, &setup).unwrap();
    assert!(rep.space.iter().chain(&rep.time).all(|(_, e)| *e == 0.0));
}
