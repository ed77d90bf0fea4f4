mod common;

use common::{any_material, random_vec};
use gn_plate::resultants::{resultants, strain};
use gn_plate::state::{State, StateField};
use gn_plate::Grid;
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(1.0, 1.2, 6, 5).unwrap()
}

fn random_state(seed: u64) -> State {
    let g = grid();
    State::from_vec(g, 0.0, random_vec(seed, 10 * g.len())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transverse_resultants_follow_the_conductivity_blocks(p in any_material(), seed in any::<u64>()) {
        let u = random_state(seed);
        let r = resultants(&u, &p);
        let (tau, wp) = (u.field(StateField::Tau), u.field(StateField::Wp));
        let (th, pp) = (u.field(StateField::Theta), u.field(StateField::P));
        for k in 0..grid().len() {
            let nr = p.k1 * tau[k] + p.hbar1 * wp[k] + p.k2 * th[k] + p.hbar2 * pp[k];
            let nm = p.hbar1 * tau[k] + p.h1 * wp[k] + p.hbar2 * th[k] + p.h2 * pp[k];
            prop_assert!((-r.r.values()[k] - nr).abs() <= 1e-14 * (1.0 + nr.abs()));
            prop_assert!((-r.mdiff.values()[k] - nm).abs() <= 1e-14 * (1.0 + nm.abs()));
        }
    }

    #[test]
    fn resultants_are_linear(p in any_material(), seed in any::<u64>(), a in -3.0..3.0f64) {
        let u = random_state(seed);
        let v = random_state(seed ^ 77);
        let mut mix = u.clone();
        mix.data_mut().iter_mut().zip(v.data()).for_each(|(x, y)| *x = a * *x + y);
        let (ru, rv, rm) = (resultants(&u, &p), resultants(&v, &p), resultants(&mix, &p));
        for ((cu, cv), cm) in ru.components().iter().zip(rv.components()).zip(rm.components()) {
            for ((x, y), m) in cu.1.values().iter().zip(cv.1.values()).zip(cm.1.values()) {
                prop_assert!((m - (a * x + y)).abs() <= 1e-11 * (1.0 + m.abs()), "{}", cu.0);
            }
        }
    }
}

#[test]
fn zero_state_has_zero_strain_and_resultants() {
    let u = State::zeros(grid());
    let s = strain(&u);
    for f in [&s.eps11, &s.eps12, &s.eps22, &s.gamma1, &s.gamma2] {
        assert!(f.values().iter().all(|v| *v == 0.0));
    }
    let r = resultants(&u, &gn_plate::MaterialParams::reference());
    for (name, f) in r.components() {
        assert!(f.values().iter().all(|v| *v == 0.0), "{name}");
    }
}

#[test]
fn components_dump_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let r = resultants(&random_state(1), &gn_plate::MaterialParams::reference());
    r.write_csv(dir.path(), "7").unwrap();
    let count = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(count, 13);
}
