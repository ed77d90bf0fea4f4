mod common;

use common::{any_material, rel, type3_material};
use gn_plate::material::{flux_energy_pencil, max_pencil_ratio, PENCIL_VARS};
use gn_plate::{MaterialError, MaterialParams, ModelType};
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat_a() -> MaterialParams {
    MaterialParams::reference()
}

#[test]
fn reference_material_passes_with_stated_margins() {
    let r = mat_a().validate().unwrap();
    assert!(r.passed());
    assert!((r.get("capacity_determinant").unwrap().margin - 0.96).abs() < 1e-15);
    assert!((r.get("conductivity_determinant").unwrap().margin - 0.96).abs() < 1e-15);
    assert!((r.get("rate_determinant").unwrap().margin - 0.24).abs() < 1e-15);
    assert_eq!(mat_a().inertia(), 2.0 / 3.0 * 0.125);
}

#[test]
fn large_kappa_fails_capacity() {
    let p = MaterialParams { kappa: 1.5, ..mat_a() };
    let r = p.validate().unwrap();
    assert!(!r.passed());
    assert_eq!(r.failed_names(), vec!["capacity_determinant"]);
    assert_eq!(r.get("capacity_determinant").unwrap().margin, -1.25);
    assert!(matches!(p.require_admissible(), Err(MaterialError::Inadmissible(_))));
}

#[test]
fn type_two_requires_exact_zero_rates() {
    assert!(mat_a().into_type_ii().validate().unwrap().passed());
    let p = MaterialParams {
        model_type: ModelType::TypeII,
        ..mat_a()
    };
    assert_eq!(p.validate().unwrap().failed_names(), vec!["type2_rates_zero"]);
    let tiny = MaterialParams { hbar2: 1e-300, ..mat_a().into_type_ii() };
    assert!(!tiny.validate().unwrap().passed());
}

#[test]
fn non_finite_is_an_error() {
    let p = MaterialParams { mu: f64::NAN, ..mat_a() };
    assert_eq!(p.validate(), Err(MaterialError::NonFinite("mu")));
    let p = MaterialParams { t0: f64::INFINITY, ..mat_a() };
    assert!(matches!(p.validate(), Err(MaterialError::NonFinite(_))));
}

#[test]
fn each_condition_can_fail() {
    let cases: [(MaterialParams, &str); 7] = [
        (MaterialParams { rho: 0.0, ..mat_a() }, "mass_density"),
        (MaterialParams { mu: -0.1, lambda: 2.0, ..mat_a() }, "shear_modulus"),
        (MaterialParams { lambda: -1.5, ..mat_a() }, "bulk_modulus"),
        (MaterialParams { hbar1: 1.0, ..mat_a() }, "conductivity_determinant"),
        (MaterialParams { hbar2: 0.5, ..mat_a() }, "rate_determinant"),
        (MaterialParams { k2: -0.5, hbar2: 0.0, h2: -0.5, ..mat_a() }, "rate_k2"),
        (MaterialParams { k2: -0.5, hbar2: 0.0, h2: -0.5, ..mat_a() }, "rate_h2"),
    ];
    for (p, name) in cases {
        let r = p.validate().unwrap();
        assert!(r.failed_names().contains(&name), "{name}: {:?}", r.failed_names());
    }
}

/// The internal-energy density and the reference form, written out term by term.
/// x = (ε11, ε12, ε22, γ1, γ2, τ,1, τ,2, ℘,1, ℘,2, τ, ℘)
fn internal_energy(p: &MaterialParams, x: &[f64; 11]) -> (f64, f64) {
    let i = p.inertia();
    let h = p.half_thickness;
    let [e11, e12, e22, g1, g2, t1, t2, w1, w2, t, w] = *x;
    let tr = e11 + e22;
    let ee = e11 * e11 + 2.0 * e12 * e12 + e22 * e22;
    let lhs = i * (p.lambda * tr * tr + 2.0 * p.mu * ee)
        + 2.0 * h * p.mu * (g1 * g1 + g2 * g2)
        + i * (p.k1 * (t1 * t1 + t2 * t2) + 2.0 * p.hbar1 * (t1 * w1 + t2 * w2) + p.h1 * (w1 * w1 + w2 * w2))
        + 2.0 * h * (p.k1 * t * t + 2.0 * p.hbar1 * t * w + p.h1 * w * w);
    let rhs = ee + g1 * g1 + g2 * g2 + t1 * t1 + t2 * t2 + w1 * w1 + w2 * w2 + t * t + w * w;
    (lhs, rhs)
}

/// Dense coefficient matrix of `internal_energy` in the orthonormal
/// coordinates (ε11, √2 ε12, ε22, ...), obtained by polarization.
fn coercivity_oracle(p: &MaterialParams) -> f64 {
    let scale = |k: usize| if k == 1 { 1.0 / 2f64.sqrt() } else { 1.0 };
    let eval = |v: &[f64; 11]| internal_energy(p, v).0;
    let mut m = DMatrix::<f64>::zeros(11, 11);
    for a in 0..11 {
        for b in 0..11 {
            let mut x = [0.0; 11];
            x[a] += scale(a);
            x[b] += scale(b);
            let mut xa = [0.0; 11];
            xa[a] = scale(a);
            let mut xb = [0.0; 11];
            xb[b] = scale(b);
            m[(a, b)] = if a == b { eval(&xa) } else { 0.5 * (eval(&x) - eval(&xa) - eval(&xb)) };
        }
    }
    m.symmetric_eigenvalues().min()
}

#[test]
fn coercivity_matches_dense_oracle() {
    let c0 = mat_a().internal_energy_coercivity().unwrap();
    assert!(c0 > 0.0);
    assert!(rel(c0, coercivity_oracle(&mat_a())) < 1e-12, "{c0} vs {}", coercivity_oracle(&mat_a()));
}

#[test]
fn coercivity_pure_shear_bound() {
    for mu in [0.3, 1.0, 4.0] {
        let p = MaterialParams { lambda: 0.0, mu, ..mat_a() };
        let c0 = p.internal_energy_coercivity().unwrap();
        assert!(c0 <= 2.0 * p.half_thickness * mu + 1e-15);
    }
}

#[test]
fn coercivity_degenerates_with_hbar1() {
    let close = MaterialParams { hbar1: 1.0 - 1e-6, ..mat_a() };
    let c0 = close.internal_energy_coercivity().unwrap();
    assert!(c0 > 0.0 && c0 < 1e-5);
    let equal = MaterialParams { hbar1: 1.0, ..mat_a() };
    assert!(equal.internal_energy_coercivity().is_err());
}

#[test]
fn zeta_examples() {
    let p = MaterialParams { c: 2.0, kappa: 0.0, r: 1.0, k2: 2.0, h2: 1.0, hbar2: 0.0, ..mat_a() };
    assert_eq!(p.zeta().unwrap(), 2.0);
    assert!((mat_a().zeta().unwrap() - 0.625).abs() < 1e-15);
    let mut last = 0.0;
    for kappa in [0.9, 0.99, 0.999, 0.9999] {
        let z = MaterialParams { c: 1.0, r: 1.0, kappa, ..mat_a() }.zeta().unwrap();
        assert!(z > last);
        last = z;
    }
    assert!(last > 1e3);
    assert_eq!(mat_a().into_type_ii().zeta(), Err(MaterialError::TypeMismatch));
}

/// Section flux density and energy density written out from the constitutive
/// relations, in the variable order of `PENCIL_VARS`.
fn flux_and_energy(p: &MaterialParams, x: &[f64]) -> (f64, f64) {
    let i = p.inertia();
    let h = p.half_thickness;
    let (z1, z2, y, th, pp) = (x[0], x[1], x[2], x[3], x[4]);
    let (e11, e12, e22, g1, g2) = (x[5], x[6], x[7], x[8], x[9]);
    let (t1, t2, w1, w2, t, w) = (x[10], x[11], x[12], x[13], x[14], x[15]);
    let m21 = 2.0 * i * p.mu * e12;
    let m22 = i * (p.lambda * (e11 + e22) + 2.0 * p.mu * e22 - p.d1 * th - p.d2 * pp);
    let n2 = p.mu * g2;
    let flux = m21 * z1
        + m22 * z2
        + 2.0 * h * n2 * y
        + i * (p.k1 * t2 + p.hbar1 * w2) * th
        + i * (p.h1 * w2 + p.hbar1 * t2) * pp;
    let kinetic = 0.5 * (p.rho * i * (z1 * z1 + z2 * z2) + 2.0 * h * p.rho * y * y);
    let capacity = 0.5 * i * (p.c * th * th + 2.0 * p.kappa * th * pp + p.r * pp * pp);
    let tr = e11 + e22;
    let stored = 0.5
        * (i * (p.lambda * tr * tr + 2.0 * p.mu * (e11 * e11 + 2.0 * e12 * e12 + e22 * e22))
            + 2.0 * h * p.mu * (g1 * g1 + g2 * g2)
            + i * (p.k1 * (t1 * t1 + t2 * t2) + 2.0 * p.hbar1 * (t1 * w1 + t2 * w2) + p.h1 * (w1 * w1 + w2 * w2))
            + 2.0 * h * (p.k1 * t * t + 2.0 * p.hbar1 * t * w + p.h1 * w * w));
    (flux, kinetic + capacity + stored)
}

fn polarize(f: impl Fn(&[f64]) -> f64, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    let unit = |a: usize, b: usize| {
        let mut v = vec![0.0; n];
        v[a] += 1.0;
        v[b] += 1.0;
        v
    };
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = if a == b {
                f(&unit(a, a)) / 4.0
            } else {
                0.5 * (f(&unit(a, b)) - f(&unit(a, a)) / 4.0 - f(&unit(b, b)) / 4.0)
            };
        }
    }
    m
}

/// Smallest s with sA ± B positive semidefinite, by bisection on Cholesky success.
fn xi_by_bisection(b: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let ok = |s: f64| (a * s - b).cholesky().is_some() && (a * s + b).cholesky().is_some();
    let (mut lo, mut hi) = (0.0, 1.0);
    while !ok(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn pencil_matches_constitutive_densities() {
    let p = mat_a();
    let (b, a) = flux_energy_pencil(&p);
    let n = PENCIL_VARS.len();
    let bo = polarize(|x| flux_and_energy(&p, x).0, n);
    let ao = polarize(|x| flux_and_energy(&p, x).1, n);
    assert!((&b - &bo).abs().max() < 1e-14);
    assert!((&a - &ao).abs().max() < 1e-14);
}

#[test]
fn xi_reference_value_and_oracles() {
    let p = mat_a();
    let xi = p.xi_estimate().unwrap();
    let n = PENCIL_VARS.len();
    let bo = polarize(|x| flux_and_energy(&p, x).0, n);
    let ao = polarize(|x| flux_and_energy(&p, x).1, n);
    let bisect = xi_by_bisection(&bo, &ao);
    assert!(rel(xi, bisect) < 1e-9, "{xi} vs {bisect}");
    assert!((xi - 1.7392).abs() < 1e-4, "{xi}");
    // no sampled state beats the bound
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut best: f64 = 0.0;
    for _ in 0..20000 {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let (f, e) = flux_and_energy(&p, &x);
        best = best.max(f.abs() / e);
    }
    assert!(best <= xi * (1.0 + 1e-12) && best > 0.3 * xi, "{best} vs {xi}");
}

#[test]
fn xi_decoupled_wave_speeds() {
    // no couplings: the pencil splits into independent one-dimensional waves
    let p = MaterialParams {
        lambda: 0.0,
        mu: 1.7,
        d1: 0.0,
        d2: 0.0,
        c: 0.8,
        kappa: 0.0,
        r: 1.9,
        k1: 1.3,
        h1: 0.6,
        hbar1: 0.0,
        rho: 1.1,
        ..mat_a()
    };
    let expected = [(2.0 * p.mu / p.rho).sqrt(), (p.k1 / p.c).sqrt(), (p.h1 / p.r).sqrt()]
        .into_iter()
        .fold(0.0, f64::max);
    assert!(rel(p.xi_estimate().unwrap(), expected) < 1e-12);
}

#[test]
fn xi_scalar_toy_is_shear_speed() {
    // flux 2hμ γ2 ẏ against ½(2hρ ẏ² + 2hμ γ2²)
    let (h, mu, rho) = (0.5, 1.3, 0.7);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, h * mu, h * mu, 0.0]);
    let a = DMatrix::from_row_slice(2, 2, &[h * rho, 0.0, 0.0, h * mu]);
    assert!(rel(max_pencil_ratio(&b, &a).unwrap(), (mu / rho).sqrt()) < 1e-14);
    assert!(matches!(
        max_pencil_ratio(&b, &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])),
        Err(MaterialError::NotCoercive(_))
    ));
}

fn swapped(p: &MaterialParams) -> MaterialParams {
    MaterialParams {
        d1: p.d2,
        d2: p.d1,
        c: p.r,
        r: p.c,
        k1: p.h1,
        h1: p.k1,
        k2: p.h2,
        h2: p.k2,
        ..*p
    }
}

fn eig2_pd(m: Matrix2<f64>) -> bool {
    m[(0, 0)] > 0.0 && m.determinant() > 0.0 && m.trace() > 0.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admissible_blocks_are_positive_definite(p in any_material()) {
        prop_assert!(p.validate().unwrap().passed());
        prop_assert!(eig2_pd(p.capacity()));
        prop_assert!(eig2_pd(p.conductivity()));
        if p.model_type == ModelType::TypeIII {
            prop_assert!(eig2_pd(p.rate_conductivity()));
        }
    }

    #[test]
    fn zeta_and_xi_are_swap_symmetric(p in type3_material()) {
        let q = swapped(&p);
        prop_assert!(rel(p.zeta().unwrap(), q.zeta().unwrap()) < 1e-12);
        prop_assert!(rel(p.xi_estimate().unwrap(), q.xi_estimate().unwrap()) < 1e-9);
    }

    #[test]
    fn xi_scales_inversely_with_energy(p in type3_material(), s in 0.1..10.0f64) {
        let (b, a) = flux_energy_pencil(&p);
        let base = max_pencil_ratio(&b, &a).unwrap();
        let scaled = max_pencil_ratio(&b, &(a * s)).unwrap();
        prop_assert!(rel(scaled, base / s) < 1e-10);
    }

    #[test]
    fn coercivity_dominates_on_random_states(p in any_material(), seed in any::<u64>()) {
        let c0 = p.internal_energy_coercivity().unwrap();
        prop_assert!(c0 > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let mut x = [0.0; 11];
            for v in x.iter_mut() {
                *v = rng.random::<f64>() * 2.0 - 1.0;
            }
            let (lhs, rhs) = internal_energy(&p, &x);
            prop_assert!(lhs >= c0 * rhs * (1.0 - 1e-12), "{} < {}", lhs, c0 * rhs);
        }
    }
}
