//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mlmf::model::{build_gallery, load_instance, GameInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gallery(name: &str, kv: &[(&str, &str)]) -> GameInstance<f64> {
    let p: BTreeMap<String, String> = kv
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    build_gallery(name, &p).unwrap()
}

pub fn fixture(name: &str) -> GameInstance<f64> {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    load_instance(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: f64) -> String {
    format!("({v:?})")
}

/// Seeded two-leader quasi-potential game with scalar decisions on
/// `[0, 1]²`, a strongly monotone affine follower on a box that never binds,
/// and a quadratic shared coupling:
///
/// * `π = ½q11·x1² + q12·x1·x2 + ½q22·x2² + c1·x1 + c2·x2`,
/// * `φ_i` = the `x_i` terms of `π` plus an arbitrary term in the other
///   leader's decision,
/// * `G = m·w + e1·x1 + e2·x2 + f` on `K = [−5, 5]`,
/// * `h = α·w² + β·w + κ·(x1 + x2)·w`.
pub fn quadratic_instance(seed: u64) -> GameInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q11 = rng.gen_range(0.5..2.0);
    let q22 = rng.gen_range(0.5..2.0);
    let q12 = rng.gen_range(-0.25..0.25);
    let c1 = rng.gen_range(-1.0..1.0);
    let c2 = rng.gen_range(-1.0..1.0);
    let r1 = rng.gen_range(-1.0..1.0);
    let r2 = rng.gen_range(-1.0..1.0);
    let m = rng.gen_range(1.0..2.0);
    let e1 = rng.gen_range(-1.0..1.0);
    let e2 = rng.gen_range(-1.0..1.0);
    let f = rng.gen_range(-1.0..1.0);
    let alpha = rng.gen_range(0.1..1.0);
    let beta = rng.gen_range(-1.0..1.0);
    let kappa = rng.gen_range(-0.05..0.05);

    let half11 = 0.5 * q11;
    let half22 = 0.5 * q22;
    let pi = format!(
        "{}*x1^2 + {}*x1*x2 + {}*x2^2 + {}*x1 + {}*x2",
        num(half11),
        num(q12),
        num(half22),
        num(c1),
        num(c2)
    );
    let phi1 = format!(
        "{}*x1^2 + {}*x1*x2 + {}*x1 + {}*x2^2",
        num(half11),
        num(q12),
        num(c1),
        num(r1)
    );
    let phi2 = format!(
        "{}*x2^2 + {}*x1*x2 + {}*x2 + {}*x1^2",
        num(half22),
        num(q12),
        num(c2),
        num(r2)
    );
    let g = format!(
        "{}*w + {}*x1 + {}*x2 + {}",
        num(m),
        num(e1),
        num(e2),
        num(f)
    );
    let h = format!(
        "{}*w^2 + {}*w + {}*(x1 + x2)*w",
        num(alpha),
        num(beta),
        num(kappa)
    );
    let text = format!(
        r#"{{
  "name": "quadratic-{seed}",
  "leaders": [
    {{"id": 1, "dim": 1, "lower": [0], "upper": [1], "phi": "{phi1}"}},
    {{"id": 2, "dim": 1, "lower": [0], "upper": [1], "phi": "{phi2}"}}
  ],
  "h": "{h}",
  "pi": "{pi}",
  "follower": {{
    "dim": 1,
    "G": ["{g}"],
    "K": {{"kind": "box", "lower": [-5], "upper": [5]}},
    "search_lower": [-5], "search_upper": [5]
  }}
}}"#
    );
    load_instance(&text).unwrap()
}

pub fn quadratic_family(count: usize) -> Vec<GameInstance<f64>> {
    (0..count as u64)
        .map(|s| quadratic_instance(1000 + s))
        .collect()
}
