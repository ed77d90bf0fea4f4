#![allow(dead_code)]

use gn_plate::{MaterialParams, ModelType};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Admissible TypeIII materials: every 2×2 block is built with a correlation
/// strictly inside (−1, 1), so the determinants are positive by construction.
pub fn type3_material() -> impl Strategy<Value = MaterialParams> {
    (
        (0.0..2.0f64, 0.3..2.0f64, -0.3..0.3f64, -0.3..0.3f64),
        (0.5..2.0f64, 0.5..2.0f64, -0.8..0.8f64),
        (0.5..2.0f64, 0.5..2.0f64, -0.8..0.8f64),
        (0.2..1.0f64, 0.2..1.0f64, -0.8..0.8f64),
        (0.5..2.0f64, 0.2..0.8f64),
    )
        .prop_map(|((lambda, mu, d1, d2), (c, r, rc), (k1, h1, rk), (k2, h2, rr), (rho, h))| MaterialParams {
            lambda,
            mu,
            d1,
            d2,
            c,
            kappa: rc * (c * r).sqrt(),
            r,
            k1,
            h1,
            hbar1: rk * (k1 * h1).sqrt(),
            k2,
            h2,
            hbar2: rr * (k2 * h2).sqrt(),
            rho,
            t0: 1.0,
            half_thickness: h,
            model_type: ModelType::TypeIII,
        })
}

pub fn any_material() -> impl Strategy<Value = MaterialParams> {
    (type3_material(), any::<bool>()).prop_map(|(p, two)| if two { p.into_type_ii() } else { p })
}

pub fn random_vec(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
