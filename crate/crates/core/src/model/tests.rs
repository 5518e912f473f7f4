use std::collections::BTreeMap;

use super::*;
use crate::vi::ResolvedSet;

fn params(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
    kv.iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn pf(h: &str) -> GameInstance<f64> {
    build_gallery("pf_variant", &params(&[("h", h)])).unwrap()
}

#[test]
fn pang_fukushima_structure() {
    let g: GameInstance<f64> = build_gallery("pang_fukushima", &BTreeMap::new()).unwrap();
    assert_eq!(g.n_leaders(), 2);
    assert!(g.is_raw());
    assert!(g.pi().is_none());
    for l in g.leaders() {
        assert_eq!((l.bounds.lower[0], l.bounds.upper[0]), (0.0, 1.0));
    }
    // G(w; x) = -1 + x1 + x2 + w
    let gmap = &g.follower().g[0];
    assert_eq!(
        gmap.eval(&[0.2, 0.3], &[0.7]).unwrap(),
        -1.0 + 0.2 + 0.3 + 0.7
    );
    assert_eq!(
        g.follower().k.resolve(&[0.0, 0.0]).unwrap(),
        ResolvedSet::Box {
            lower: vec![0.0],
            upper: vec![f64::INFINITY]
        }
    );
    // raw couplings +w and -w
    assert_eq!(g.leader_objective(0, &[0.0, 0.0], &[1.0]).unwrap(), 1.0);
    assert_eq!(g.leader_objective(1, &[0.0, 0.0], &[1.0]).unwrap(), -1.0);
}

#[test]
fn pf_variant_objectives() {
    let g = pf("-w");
    assert_eq!(g.leader_objective(0, &[0.0, 0.0], &[1.0]).unwrap(), -1.0);
    assert_eq!(g.leader_objective(1, &[0.0, 0.0], &[1.0]).unwrap(), -1.0);
    // quasi-potential 0.5*x1 - 0.5*x2 - w
    let q = g.quasi_potential(&[0.4, 0.2], &[0.3]).unwrap().unwrap();
    assert!((q - (0.2 - 0.1 - 0.3)).abs() < 1e-15);
    assert!(matches!(
        g.leader_objective(0, &[0.0], &[1.0]),
        Err(ModelError::DimensionMismatch { what: "x", .. })
    ));
    assert!(matches!(
        g.leader_objective(2, &[0.0, 0.0], &[1.0]),
        Err(ModelError::NoSuchLeader(2))
    ));
}

#[test]
fn zero_coupling_gives_phi() {
    let g = pf("0*w");
    for w in [-3.0, 0.0, 2.5] {
        assert_eq!(g.leader_objective(0, &[0.6, 0.1], &[w]).unwrap(), 0.3);
    }
}

#[test]
fn congestion_construction() {
    let g: GameInstance<f64> = build_gallery(
        "congestion_control",
        &params(&[
            ("N", "2"),
            ("a", "1,1"),
            ("c", "1"),
            ("gamma", "1"),
            ("xbar", "1,1"),
        ]),
    )
    .unwrap();
    assert_eq!(g.w_dim(), 2);
    assert_eq!(g.w_names(), ["w1", "w2"]);
    assert_eq!(g.follower().search.upper, vec![1.0, 1.0]);
    let phi1 = g.leader_objective(0, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
    assert!((phi1 + 2f64.ln()).abs() < 1e-15);
    assert!(matches!(
        build_gallery::<f64>("congestion_control", &params(&[("N", "0")])),
        Err(ModelError::InvalidParams(_))
    ));
    assert!(matches!(
        build_gallery::<f64>("congestion_control", &params(&[("c", "0")])),
        Err(ModelError::InvalidParams(_))
    ));
    assert!(matches!(
        build_gallery::<f64>("nope", &BTreeMap::new()),
        Err(ModelError::UnknownGallery(_))
    ));
    assert!(matches!(
        build_gallery::<f64>("pf_variant", &params(&[("h", "w"), ("bogus", "1")])),
        Err(ModelError::InvalidParams(_))
    ));
}

const PF_JSON: &str = r#"{
  "name": "pf",
  "leaders": [
    {"id": 1, "dim": 1, "lower": [0], "upper": [1], "phi": "0.5*x1"},
    {"id": 2, "dim": 1, "lower": [0], "upper": [1], "phi": "-0.5*x2"}
  ],
  "h": "-w",
  "pi": "0.5*x1 - 0.5*x2",
  "follower": {
    "dim": 1,
    "G": ["-1 + x1 + x2 + w"],
    "K": {"kind": "box", "lower": [0], "upper": ["inf"]},
    "search_lower": [0], "search_upper": [2]
  }
}"#;

#[test]
fn loads_instance_file() {
    let g: GameInstance<f64> = load_instance(PF_JSON).unwrap();
    assert_eq!(g.name(), "pf");
    assert!(!g.is_raw());
    assert_eq!(g.leader_objective(1, &[0.0, 0.0], &[1.0]).unwrap(), -1.0);
}

#[test]
fn missing_h_is_schema_error() {
    let text = PF_JSON.replace("\"h\": \"-w\",", "");
    assert!(matches!(
        load_instance::<f64>(&text),
        Err(ModelError::Schema(_))
    ));
    let text = PF_JSON.replace("\"name\": \"pf\",", "");
    assert!(matches!(
        load_instance::<f64>(&text),
        Err(ModelError::Schema(_))
    ));
}

#[test]
fn phi_mentioning_w_is_rejected() {
    let text = PF_JSON.replace("\"phi\": \"0.5*x1\"", "\"phi\": \"0.5*x1 + w\"");
    assert!(matches!(
        load_instance::<f64>(&text),
        Err(ModelError::Invariant(_))
    ));
    let text = PF_JSON.replace("\"phi\": \"0.5*x1\"", "\"phi\": \"0.5*x3\"");
    assert!(matches!(
        load_instance::<f64>(&text),
        Err(ModelError::Invariant(_))
    ));
}

#[test]
fn other_invariants() {
    let empty = PF_JSON.replace(
        "\"lower\": [0], \"upper\": [1], \"phi\": \"0.5*x1\"",
        "\"lower\": [2], \"upper\": [1], \"phi\": \"0.5*x1\"",
    );
    assert!(matches!(
        load_instance::<f64>(&empty),
        Err(ModelError::Invariant(_))
    ));
    let kinked = PF_JSON.replace("\"pi\": \"0.5*x1 - 0.5*x2\"", "\"pi\": \"max(x1, x2)\"");
    assert!(matches!(
        load_instance::<f64>(&kinked),
        Err(ModelError::Invariant(_))
    ));
    let bad_expr = PF_JSON.replace("\"h\": \"-w\"", "\"h\": \"(w +\"");
    assert!(matches!(
        load_instance::<f64>(&bad_expr),
        Err(ModelError::Parse { .. })
    ));
    let no_search = PF_JSON.replace(",\n    \"search_lower\": [0], \"search_upper\": [2]", "");
    assert!(matches!(
        load_instance::<f64>(&no_search),
        Err(ModelError::Schema(_))
    ));
    let narrow = build_json_with_k(r#"{"kind": "box", "lower": [0], "upper": [3]}"#);
    assert!(matches!(
        load_instance::<f64>(&narrow),
        Err(ModelError::Invariant(_))
    ));
    let both = PF_JSON.replace(
        "\"h\": \"-w\",",
        "\"h\": \"-w\", \"raw_h\": [\"w\", \"w\"],",
    );
    assert!(matches!(
        load_instance::<f64>(&both),
        Err(ModelError::Schema(_))
    ));
}

fn build_json_with_k(k: &str) -> String {
    PF_JSON.replace(r#"{"kind": "box", "lower": [0], "upper": ["inf"]}"#, k)
}

#[test]
fn x_dependent_budget_checked_on_grid() {
    let text = build_json_with_k(r#"{"kind": "budget", "b": "x1 - 0.5"}"#);
    assert!(matches!(
        load_instance::<f64>(&text),
        Err(ModelError::Invariant(_))
    ));
    let text = build_json_with_k(r#"{"kind": "budget", "b": "x1 + 0.5"}"#);
    assert!(load_instance::<f64>(&text).is_ok());
}

#[test]
fn vector_leader_names() {
    assert_eq!(leader_var_names(2, 1), ["x2"]);
    assert_eq!(leader_var_names(1, 3), ["x1_1", "x1_2", "x1_3"]);
    assert_eq!(follower_var_names(1), ["w"]);
}

#[test]
fn serialize_round_trip_for_gallery() {
    let cases: Vec<GameInstance<f64>> = vec![
        build_gallery("pang_fukushima", &BTreeMap::new()).unwrap(),
        pf("-w"),
        build_gallery("multivalued_vi_demo", &BTreeMap::new()).unwrap(),
        build_gallery(
            "congestion_control",
            &params(&[("N", "3"), ("a", "1,2,0.5")]),
        )
        .unwrap(),
    ];
    for g in cases {
        let back: GameInstance<f64> = load_instance(&g.to_json()).unwrap();
        assert_eq!(back.x_dim(), g.x_dim());
        let xbox = g.x_box();
        for x in xbox.grid(4) {
            let w = vec![0.37; g.w_dim()];
            for i in 0..g.n_leaders() {
                let a = g.leader_objective(i, &x, &w).unwrap();
                let b = back.leader_objective(i, &x, &w).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
            for j in 0..g.w_dim() {
                let a = g.follower().g[j].eval(&x, &w).unwrap();
                let b = back.follower().g[j].eval(&x, &w).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn f32_instances_build() {
    let g: GameInstance<f32> = build_gallery("pf_variant", &params(&[("h", "-w")])).unwrap();
    assert_eq!(
        g.leader_objective(0, &[0.0, 0.0], &[1.0]).unwrap(),
        -1.0_f32
    );
}
