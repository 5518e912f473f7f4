use super::*;
use proptest::prelude::*;

fn p(s: &str) -> Expr<f64> {
    parse_expression(s).unwrap()
}

fn c(v: f64) -> Box<Expr<f64>> {
    Box::new(Expr::Const(v))
}

fn v(n: &str) -> Box<Expr<f64>> {
    Box::new(Expr::var(n))
}

#[test]
fn parses_sum_of_product() {
    let want = Expr::Binary(
        BinaryOp::Add,
        Box::new(Expr::Binary(BinaryOp::Mul, c(0.5), v("x1"))),
        v("w"),
    );
    assert_eq!(p("0.5*x1 + w"), want);
}

#[test]
fn parses_max_with_left_assoc_subtraction() {
    let inner = Expr::Binary(
        BinaryOp::Sub,
        Box::new(Expr::Binary(BinaryOp::Sub, c(1.0), v("x1"))),
        v("x2"),
    );
    assert_eq!(
        p("max(0, 1 - x1 - x2)"),
        Expr::Nary(NaryOp::Max, vec![Expr::Const(0.0), inner])
    );
}

#[test]
fn unbalanced_paren_reports_end_offset() {
    let err = parse_expression::<f64>("(x1 +").unwrap_err();
    assert!(
        matches!(err, ParseError::Syntax { offset: 5, .. }),
        "{err:?}"
    );
}

#[test]
fn power_is_right_associative() {
    assert_eq!(
        p("2^3^2"),
        Expr::Binary(
            BinaryOp::Pow,
            c(2.0),
            Box::new(Expr::Binary(BinaryOp::Pow, c(3.0), c(2.0)))
        )
    );
    assert_eq!(p("2^3^2").evaluate(&VarEnv::new()).unwrap(), 512.0);
}

#[test]
fn unknown_function_and_arity() {
    assert_eq!(
        parse_expression::<f64>("1 + sin(x)").unwrap_err(),
        ParseError::UnknownFunction {
            name: "sin".into(),
            offset: 4
        }
    );
    assert!(matches!(
        parse_expression::<f64>("log(x, y)").unwrap_err(),
        ParseError::Arity { found: 2, .. }
    ));
    assert!(matches!(
        parse_expression::<f64>("max()").unwrap_err(),
        ParseError::Arity { found: 0, .. }
    ));
    assert_eq!(p("min(3)").evaluate(&VarEnv::new()).unwrap(), 3.0);
}

#[test]
fn numbers_with_exponent_and_trailing_garbage() {
    assert_eq!(p("1.5e-3").evaluate(&VarEnv::new()).unwrap(), 1.5e-3);
    assert_eq!(p("2E2").evaluate(&VarEnv::new()).unwrap(), 200.0);
    assert!(matches!(
        parse_expression::<f64>("1e+").unwrap_err(),
        ParseError::Syntax { offset: 1, .. }
    ));
    assert!(matches!(
        parse_expression::<f64>("x y").unwrap_err(),
        ParseError::Syntax { offset: 2, .. }
    ));
    assert!(parse_expression::<f64>("").is_err());
}

#[test]
fn evaluates_spec_points() {
    let env = VarEnv::new().with("x1", 0.2).with("x2", 0.3);
    assert!((p("max(0, 1 - x1 - x2)").evaluate(&env).unwrap() - 0.5).abs() < 1e-15);
    let env = VarEnv::new().with("x1", 0.0).with("w", 1.0);
    assert_eq!(p("0.5*x1 + w").evaluate(&env).unwrap(), 1.0);
}

#[test]
fn domain_and_binding_errors() {
    let env = VarEnv::new().with("x1", 0.0);
    assert!(matches!(
        p("log(x1)").evaluate(&env),
        Err(EvalError::Domain(_))
    ));
    assert!(matches!(
        p("1/x1").evaluate(&env),
        Err(EvalError::Domain(_))
    ));
    assert!(matches!(
        p("x1^-1").evaluate(&env),
        Err(EvalError::Domain(_))
    ));
    assert!(matches!(
        p("(0-2)^0.5").evaluate(&env),
        Err(EvalError::Domain(_))
    ));
    assert_eq!(
        p("x1 + y").evaluate(&env),
        Err(EvalError::Unbound("y".into()))
    );
}

#[test]
fn power_semantics() {
    let env = VarEnv::new().with("x", -2.0);
    assert_eq!(p("x^3").evaluate(&env).unwrap(), -8.0);
    assert_eq!(p("x^-2").evaluate(&env).unwrap(), 0.25);
    assert_eq!(p("x^0").evaluate(&env).unwrap(), 1.0);
    let env = VarEnv::new().with("x", 4.0);
    assert!((p("x^0.5").evaluate(&env).unwrap() - 2.0).abs() < 1e-15);
    // prefix minus binds to the atom
    assert_eq!(p("-x^2").evaluate(&env).unwrap(), 16.0);
}

#[test]
fn fd_gradient_linear_and_bilinear() {
    let env = VarEnv::new().with("x1", 0.7);
    let g = fd_gradient(&p("0.5*x1"), &env, &["x1"], 1e-5).unwrap();
    assert!((g[0] - 0.5).abs() <= 1e-9);

    let env = VarEnv::new().with("x1", 2.0).with("x2", 3.0);
    let g = fd_gradient(&p("x1*x2"), &env, &["x1", "x2"], 1e-5).unwrap();
    assert!((g[0] - 3.0).abs() <= 1e-8);
    assert!((g[1] - 2.0).abs() <= 1e-8);
}

#[test]
fn fd_gradient_averages_slopes_at_kink() {
    // Difference quotient at x1 = 0.5, x2 = 0.5 with h = 1e-5:
    // (max(0, -h) - max(0, h)) / 2h = -1/2.
    let env = VarEnv::new().with("x1", 0.5).with("x2", 0.5);
    let g = fd_gradient(&p("max(0, 1-x1-x2)"), &env, &["x1"], 1e-5).unwrap();
    assert!((g[0] + 0.5).abs() <= 1e-9, "{}", g[0]);
}

#[test]
fn compiled_matches_named_evaluation() {
    let e = p("max(0, 1 - x1 - x2) * w + log(1 + x1)");
    let layout: Vec<String> = ["x1", "x2", "w"].iter().map(|s| s.to_string()).collect();
    let cexpr = e.compile(&layout).unwrap();
    let env = VarEnv::new().with("x1", 0.1).with("x2", 0.2).with("w", 3.0);
    let named = e.evaluate(&env).unwrap();
    assert_eq!(cexpr.eval(&[0.1, 0.2, 3.0]).unwrap(), named);
    assert_eq!(cexpr.eval2(&[0.1, 0.2], &[3.0]).unwrap(), named);
    assert!(matches!(
        e.compile(&layout[..2]),
        Err(EvalError::Unbound(ref n)) if n == "w"
    ));
}

#[test]
fn kink_detection_and_variables() {
    assert!(p("max(0, w)").has_kinks());
    assert!(p("abs(x1)").has_kinks());
    assert!(!p("log(1 + x1) * x2^2").has_kinks());
    let vars: Vec<_> = p("x2 + x1*x2 + w").variables().into_iter().collect();
    assert_eq!(vars, vec!["w", "x1", "x2"]);
}

#[test]
fn generic_over_f32() {
    let e: Expr<f32> = parse_expression("0.5*x1 + w").unwrap();
    let env = VarEnv::new().with("x1", 2.0_f32).with("w", 1.0);
    assert_eq!(e.evaluate(&env).unwrap(), 2.0_f32);
}

fn arb_expr() -> impl Strategy<Value = Expr<f64>> {
    let leaf = prop_oneof![
        (-5.0..5.0f64).prop_map(Expr::Const),
        prop::sample::select(vec!["x1", "x2", "w"]).prop_map(Expr::var),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr::Unary(UnaryOp::Exp, Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr::Unary(UnaryOp::Abs, Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr::Unary(UnaryOp::Log, Box::new(a))),
            (
                prop::sample::select(vec![
                    BinaryOp::Add,
                    BinaryOp::Sub,
                    BinaryOp::Mul,
                    BinaryOp::Div,
                    BinaryOp::Pow
                ]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (
                prop::sample::select(vec![NaryOp::Max, NaryOp::Min]),
                prop::collection::vec(inner, 1..4)
            )
                .prop_map(|(op, args)| Expr::Nary(op, args)),
        ]
    })
}

fn same_outcome(a: &Result<f64, EvalError>, b: &Result<f64, EvalError>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-12 * x.abs().max(1.0),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn print_parse_round_trip(e in arb_expr(), envs in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64), 100)) {
        let text = e.to_string();
        let back: Expr<f64> = parse_expression(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        for (a, b, c) in envs {
            let env = VarEnv::new().with("x1", a).with("x2", b).with("w", c);
            let l = e.evaluate(&env);
            let r = back.evaluate(&env);
            prop_assert!(same_outcome(&l, &r), "{} => {:?} vs {:?}", text, l, r);
        }
    }

    #[test]
    fn evaluation_is_pure(e in arb_expr(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let env = VarEnv::new().with("x1", a).with("x2", b).with("w", 0.5);
        let first = e.evaluate(&env);
        let second = e.evaluate(&env);
        match (first, second) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
            (l, r) => prop_assert_eq!(l, r),
        }
    }

    #[test]
    fn fd_gradient_exact_enough_on_quadratics(
        q in prop::array::uniform6(-3.0..3.0f64),
        x in -4.0..4.0f64,
        y in -4.0..4.0f64,
    ) {
        let [a, b, cxy, d, e, f] = q;
        let text = format!("{a}*x^2 + {b}*y^2 + {cxy}*x*y + {d}*x + {e}*y + {f}");
        let expr: Expr<f64> = parse_expression(&text).unwrap();
        let env = VarEnv::new().with("x", x).with("y", y);
        let g = fd_gradient(&expr, &env, &["x", "y"], 1e-5).unwrap();
        let exact = [2.0 * a * x + cxy * y + d, 2.0 * b * y + cxy * x + e];
        for k in 0..2 {
            let rel = (g[k] - exact[k]).abs() / exact[k].abs().max(1.0);
            prop_assert!(rel <= 1e-7, "{} vs {}", g[k], exact[k]);
        }
    }
}
