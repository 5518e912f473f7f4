use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::expr::Expr;
use crate::model::build_gallery;

fn gallery(name: &str, kv: &[(&str, &str)]) -> GameInstance<f64> {
    let p: BTreeMap<String, String> = kv
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    build_gallery(name, &p).unwrap()
}

fn pf() -> GameInstance<f64> {
    gallery("pang_fukushima", &[])
}

fn congestion() -> GameInstance<f64> {
    gallery(
        "congestion_control",
        &[("N", "2"), ("a", "1,1"), ("c", "1"), ("gamma", "1")],
    )
}

fn constant_box(lower: Vec<Option<f64>>, upper: Vec<Option<f64>>) -> FeasibleSetSpec<f64> {
    let dim = lower.len();
    let side = |v: Vec<Option<f64>>| v.into_iter().map(|b| b.map(Expr::Const)).collect();
    FeasibleSetSpec::new(
        FeasibleSetDef::Box {
            lower: side(lower),
            upper: side(upper),
        },
        dim,
        &[],
    )
    .unwrap()
}

fn budget(dim: usize, b: f64) -> FeasibleSetSpec<f64> {
    FeasibleSetSpec::new(FeasibleSetDef::Budget { b: Expr::Const(b) }, dim, &[]).unwrap()
}

#[test]
fn projection_examples() {
    let half_line = constant_box(vec![Some(0.0)], vec![None]);
    assert_eq!(project(&half_line, &[], &[-1.0]).unwrap(), vec![0.0]);
    assert_eq!(
        project(&budget(2, 1.0), &[], &[2.0, 2.0]).unwrap(),
        vec![0.5, 0.5]
    );
    let unit = constant_box(vec![Some(0.0)], vec![Some(1.0)]);
    assert_eq!(project(&unit, &[], &[0.3]).unwrap(), vec![0.3]);
    // inside the budget set: clamp only
    assert_eq!(
        project(&budget(3, 1.0), &[], &[-1.0, 0.2, 0.3]).unwrap(),
        vec![0.0, 0.2, 0.3]
    );
    // one coordinate dominates
    assert_eq!(
        project(&budget(2, 1.0), &[], &[3.0, -1.0]).unwrap(),
        vec![1.0, 0.0]
    );
}

#[test]
fn empty_sets_are_errors() {
    let bad = constant_box(vec![Some(1.0)], vec![Some(0.0)]);
    assert!(matches!(
        project(&bad, &[], &[0.5]),
        Err(ViError::EmptySet(_))
    ));
    assert!(matches!(
        project(&budget(2, -1.0), &[], &[0.5, 0.5]),
        Err(ViError::EmptySet(_))
    ));
}

#[test]
fn natural_map_examples() {
    let g = pf();
    assert_eq!(natural_map_residual(&g, &[0.0, 0.0], &[1.0]).unwrap(), 0.0);
    assert_eq!(natural_map_residual(&g, &[0.0, 0.0], &[0.0]).unwrap(), 1.0);
    let demo = gallery("multivalued_vi_demo", &[]);
    assert_eq!(natural_map_residual(&demo, &[0.3], &[0.5]).unwrap(), 0.0);
}

#[test]
fn membership_examples() {
    let g = pf();
    assert!(membership(&g, &[0.0, 0.0], &[1.0], 1e-8));
    // residual |0.99 - max(0, 0.99 + 0.01)| = 0.01 by hand
    assert!((natural_map_residual(&g, &[0.0, 0.0], &[0.99]).unwrap() - 0.01).abs() < 1e-12);
    assert!(!membership(&g, &[0.0, 0.0], &[0.99], 1e-8));
    assert!(membership(&g, &[0.0, 0.0], &[123.0], f64::INFINITY));
}

#[test]
fn solve_from_examples() {
    let cfg = ViConfig::default();
    let g = pf();
    for start in [0.0, 0.3, 1.7, 2.0] {
        let w = solve_vi_from(&g, &[0.2, 0.3], &[start], &cfg).unwrap();
        assert!((w[0] - 0.5).abs() <= 1e-8);
    }
    let c = congestion();
    let w = solve_vi_from(&c, &[0.3, 0.3], &[0.0, 0.9], &cfg).unwrap();
    assert!(
        (w[0] - 0.3).abs() <= 1e-8 && (w[1] - 0.3).abs() <= 1e-8,
        "{w:?}"
    );

    let demo = gallery("multivalued_vi_demo", &[]);
    let w = solve_vi_from(&demo, &[0.5], &[0.9], &cfg).unwrap();
    assert!(
        [0.0, 0.5, 1.0].iter().any(|s| (w[0] - s).abs() <= 1e-8),
        "{w:?}"
    );
}

#[test]
fn extragradient_rescues_steep_map() {
    // G(w) = 10 w - 5: plain projection with step 0.5 diverges.
    let mut g = gallery("multivalued_vi_demo", &[]).to_parts();
    g.follower.g = vec!["10*w - 5".parse().unwrap()];
    g.follower.k = FeasibleSetDef::Box {
        lower: vec![None],
        upper: vec![None],
    };
    g.follower.search = Some((vec![-1.0], vec![1.0]));
    let g = GameInstance::from_parts(g).unwrap();
    let w = solve_vi_from(&g, &[0.0], &[0.9], &ViConfig::default()).unwrap();
    assert!((w[0] - 0.5).abs() <= 1e-8, "{w:?}");
}

#[test]
fn not_converged_carries_best_residual() {
    let cfg = ViConfig {
        max_iters: 1,
        ..ViConfig::default()
    };
    let err = solve_vi_from(&pf(), &[0.2, 0.3], &[2.0], &cfg).unwrap_err();
    assert!(matches!(err, ViError::NotConverged { best_residual } if best_residual > 0.0));
}

#[test]
fn enumerate_examples() {
    let cfg = ViConfig::default();
    let s = enumerate_solutions(&pf(), &[0.2, 0.3], &cfg).unwrap();
    assert_eq!(s.len(), 1);
    assert!((s.solutions[0][0] - 0.5).abs() <= 1e-8);
    assert!(s.exhaustive);

    let demo = gallery("multivalued_vi_demo", &[]);
    for x in [0.0, 0.4, 1.0] {
        let s = enumerate_solutions(&demo, &[x], &cfg).unwrap();
        let got: Vec<f64> = s.solutions.iter().map(|w| w[0]).collect();
        assert_eq!(got.len(), 3, "{got:?}");
        for (a, b) in got.iter().zip([0.0, 0.5, 1.0]) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    let s = enumerate_solutions(&congestion(), &[0.8, 0.8], &cfg).unwrap();
    assert_eq!(s.len(), 1);
    assert!((s.solutions[0][0] - 0.5).abs() <= 1e-8 && (s.solutions[0][1] - 0.5).abs() <= 1e-8);
}

#[test]
fn multivalued_demo_matches_zero_scan() {
    // Oracle: scan the natural map of G(w) = 1 - 2w on [0, 1] at step 1e-3.
    let zeros: Vec<f64> = (0..=1000)
        .map(|k| k as f64 / 1000.0)
        .filter(|&w| (w - (w - (1.0 - 2.0 * w)).clamp(0.0, 1.0)).abs() < 1e-12)
        .collect();
    assert_eq!(zeros, vec![0.0, 0.5, 1.0]);
    let s = enumerate_solutions(
        &gallery("multivalued_vi_demo", &[]),
        &[0.7],
        &ViConfig::default(),
    )
    .unwrap();
    assert_eq!(
        s.solutions,
        zeros.iter().map(|&z| vec![z]).collect::<Vec<_>>()
    );
}

#[test]
fn empty_solution_set_when_search_box_misses() {
    let mut parts = pf().to_parts();
    parts.follower.search = Some((vec![5.0], vec![6.0]));
    let g = GameInstance::from_parts(parts).unwrap();
    let cfg = ViConfig {
        max_iters: 3,
        ..ViConfig::default()
    };
    assert!(matches!(
        enumerate_solutions(&g, &[0.2, 0.3], &cfg),
        Err(ViError::EmptySolutionSet { .. })
    ));
}

#[test]
fn closedness_along_convergent_sequences() {
    // (x_k, w_k) -> (x*, w*) with each w_k in S(x_k); the limit stays in S.
    let g = pf();
    let cfg = ViConfig::default();
    for target in [[0.2, 0.3], [0.5, 0.5], [0.9, 0.4]] {
        for k in 1..=30 {
            let t = 1.0 / k as f64;
            let x = [target[0] * (1.0 - t) + 0.5 * t, target[1] * (1.0 - t)];
            let s = enumerate_solutions(&g, &x, &cfg).unwrap();
            assert!(s.residuals[0] <= cfg.residual_tol);
            // residual of the sequence point at the limit is o(1): here O(t)
            let at_limit = natural_map_residual(&g, &target, &s.solutions[0]).unwrap();
            assert!(at_limit <= cfg.residual_tol + 2.0 * t, "k={k}: {at_limit}");
        }
        let exact =
            natural_map_residual(&g, &target, &[(1.0 - target[0] - target[1]).max(0.0)]).unwrap();
        assert!(exact <= cfg.residual_tol);
    }
}

fn lcg(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn pang_fukushima_closed_form_on_random_points() {
    let g = pf();
    let cfg = ViConfig::default();
    let mut seed = 7;
    for _ in 0..100 {
        let x = [lcg(&mut seed), lcg(&mut seed)];
        let s = enumerate_solutions(&g, &x, &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.solutions[0][0] - (1.0 - x[0] - x[1]).max(0.0)).abs() <= 1e-6);
    }
}

proptest! {
    #[test]
    fn budget_projection_idempotent_and_optimal(
        p in prop::collection::vec(-3.0..3.0f64, 3),
        q in prop::collection::vec(0.0..1.0f64, 3),
        b in 0.1..2.0f64,
    ) {
        let k = budget(3, b);
        let once = project(&k, &[], &p).unwrap();
        let twice = project(&k, &[], &once).unwrap();
        prop_assert!(inf_norm_diff(&once, &twice) <= 1e-12);
        // scale q into the set
        let total: f64 = q.iter().sum();
        let q: Vec<f64> = if total > b { q.iter().map(|v| v * b / total).collect() } else { q };
        let dist = |a: &[f64]| a.iter().zip(&p).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dist(&once) <= dist(&q) + 1e-10);
    }

    #[test]
    fn box_projection_idempotent(p in prop::collection::vec(-3.0..3.0f64, 2)) {
        let k = constant_box(vec![Some(-1.0), None], vec![Some(1.0), Some(0.5)]);
        let once = project(&k, &[], &p).unwrap();
        prop_assert_eq!(project(&k, &[], &once).unwrap(), once);
    }
}
