#![allow(dead_code)]

use std::collections::BTreeMap;

use agm::agmap::{Generator, MappingInstance};
use agm::space::ConnectionField;
use agm::tensor::{Dense, TensorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coef(rng: &mut ChaCha8Rng) -> String {
    format!("({:.4})", rng.random_range(-1.0..1.0))
}

/// Random smooth scalar in `x1..xn`: a polynomial term and a transcendental
/// term with random coefficients.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut i = || rng.random_range(1..=n);
    let (a, b, c, d) = (i(), i(), i(), i());
    let pick = rng.random_range(0..4);
    let (k1, k2, k3) = (coef(rng), coef(rng), coef(rng));
    let tail = match pick {
        0 => format!("sin({k3}*x{d})"),
        1 => format!("cos(x{c} + {k3}*x{d})"),
        2 => format!("exp({k3}*x{c})"),
        _ => format!("x{c}^2*x{d}"),
    };
    format!("{k1} + {k2}*x{a}*x{b} + {tail}")
}

pub fn random_covector(rng: &mut ChaCha8Rng, n: usize) -> TensorField<f64> {
    let texts: Vec<String> = (0..n).map(|_| random_expr(rng, n)).collect();
    TensorField::parse(n, 0, 1, &texts).unwrap()
}

/// Connection with about half of its components nonzero and no symmetry.
pub fn random_connection(rng: &mut ChaCha8Rng, n: usize) -> ConnectionField<f64> {
    let mut map = BTreeMap::new();
    for i in 1..=n {
        for j in 1..=n {
            for k in 1..=n {
                if rng.random_bool(0.5) {
                    map.insert(format!("{i},{j},{k}"), random_expr(rng, n));
                }
            }
        }
    }
    ConnectionField::from_sparse(n, &map).unwrap()
}

/// 2x2 block `[[a, b], [c, -a]]` with square `e·I`.
fn block(rng: &mut ChaCha8Rng, e: i8) -> [[f64; 2]; 2] {
    let a: f64 = rng.random_range(-0.8..0.8);
    let b: f64 = rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let c = (e as f64 - a * a) / b;
    [[a, b], [c, -a]]
}

/// Constant affinor with `F0·F0 = eI`, built from 2x2 blocks and, for odd
/// `n`, one trailing diagonal entry.
pub fn random_affinor(rng: &mut ChaCha8Rng, n: usize, e: i8) -> Dense<f64> {
    assert!(!(e == -1 && n % 2 == 1), "e = -1 needs even n");
    let mut f = Dense::zeros(n, 2);
    for b in 0..n / 2 {
        let m = block(rng, e);
        for r in 0..2 {
            for c in 0..2 {
                f.set(&[2 * b + r, 2 * b + c], m[r][c]);
            }
        }
    }
    if n % 2 == 1 {
        let last = match e {
            0 => 0.0,
            _ if rng.random_bool(0.5) => 1.0,
            _ => -1.0,
        };
        f.set(&[n - 1, n - 1], last);
    }
    f
}

pub fn random_generator(rng: &mut ChaCha8Rng, n: usize, e: i8) -> Generator<f64> {
    Generator {
        e,
        f0: random_affinor(rng, n, e),
        p: random_covector(rng, n),
        q: random_covector(rng, n),
        sigma: random_covector(rng, n),
        psi: random_covector(rng, n),
    }
}

pub fn generated(seed: u64, n: usize, e: i8) -> (ConnectionField<f64>, MappingInstance<f64>) {
    random_generator(&mut rng(seed), n, e).build().unwrap()
}

/// Every `(n, e)` pair the generator family supports for `n` in 2..=4.
pub fn families() -> Vec<(usize, i8)> {
    let mut v = Vec::new();
    for n in 2..=4 {
        for e in [0, 1, -1] {
            if !(e == -1 && n % 2 == 1) {
                v.push((n, e));
            }
        }
    }
    v
}

pub fn scenario_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}
