use fbmhypo::expr::{differentiate, eval, lie_bracket, parse_expr, Expr, Program, VectorFieldSet};
use fbmhypo::rng::stream_rng;
use proptest::prelude::*;
use rand::Rng;

fn field(src: &[&str]) -> Vec<Expr> {
    src.iter().map(|s| parse_expr(s, None).unwrap()).collect()
}

#[test]
fn jacobian_matches_central_differences() {
    let v = field(&["x1*x2", "x2^2"]);
    let j = differentiate(&v, 2);
    let mut rng = stream_rng(1, 0);
    for _ in 0..5 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        for c in 0..2 {
            let h = 1e-6;
            let (mut up, mut dn) = (x, x);
            up[c] += h;
            dn[c] -= h;
            let (fu, fd) = (eval(&v, &up).unwrap(), eval(&v, &dn).unwrap());
            for r in 0..2 {
                let exact = j[r][c].eval(&x).unwrap();
                let fdiff = (fu[r] - fd[r]) / (2.0 * h);
                assert!((fdiff - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{r}{c}: {fdiff} vs {exact}");
            }
        }
    }
    let j = differentiate(&field(&["0", "x1"]), 2);
    let vals: Vec<Vec<f64>> = j.iter().map(|r| r.iter().map(|e| e.eval(&[0.3, 0.4]).unwrap()).collect()).collect();
    assert_eq!(vals, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
}

#[test]
fn bracket_is_antisymmetric() {
    let v = field(&["sin(x1)*x2", "exp(-x2^2)"]);
    let w = field(&["x1^3 - x2", "cos(x1 + x2)"]);
    let vw = lie_bracket(&v, &w).unwrap();
    let wv = lie_bracket(&w, &v).unwrap();
    let mut rng = stream_rng(2, 0);
    for _ in 0..20 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let (a, b) = (eval(&vw, &x).unwrap(), eval(&wv, &x).unwrap());
        for i in 0..2 {
            assert!((a[i] + b[i]).abs() < 1e-12 * (1.0 + a[i].abs()));
        }
    }
    let hyp = VectorFieldSet::parse("V0 = [0, x1]; V1 = [1, 0]", 2, 1).unwrap();
    let b = lie_bracket(hyp.field(1), hyp.field(0)).unwrap();
    assert_eq!(eval(&b, &[5.0, -1.0]).unwrap(), vec![0.0, 1.0]);
}

#[test]
fn field_sets_from_text() {
    let fou = VectorFieldSet::parse("V0 = [-x1]; V1 = [1]", 1, 1).unwrap();
    assert_eq!((fou.n(), fou.d()), (1, 1));
    assert_eq!(fou.eval_field(0, &[2.0]).unwrap(), vec![-2.0]);
    let inferred = VectorFieldSet::parse_infer("V0 = [-x1, x1 - x2]\nV1 = [1, 0]\nV2 = [0, 1] bounded").unwrap();
    assert_eq!((inferred.n(), inferred.d()), (2, 2));
    assert!(inferred.bounded_claimed(2));
    let again = VectorFieldSet::parse_infer(&inferred.to_string()).unwrap();
    assert_eq!(again.to_string(), inferred.to_string());
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (1u32..9).prop_map(|k| k.to_string()),
        Just("x1".to_string()),
        Just("x2".to_string()),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(src in arb_expr(), x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
        let e = parse_expr(&src, None).unwrap();
        let again = parse_expr(&e.to_string(), None).unwrap();
        let x = [x1, x2];
        let (a, b) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let compiled = Program::compile(&e).eval(&x, &mut Vec::new());
        prop_assert!((a - compiled).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn derivative_matches_difference_quotient(src in arb_expr(), x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
        let e = parse_expr(&src, None).unwrap();
        let d = e.diff(0);
        let h = 1e-5;
        let fd = (e.eval(&[x1 + h, x2]).unwrap() - e.eval(&[x1 - h, x2]).unwrap()) / (2.0 * h);
        let exact = d.eval(&[x1, x2]).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-4 * (1.0 + exact.abs()), "{} at ({}, {}): {} vs {}", src, x1, x2, fd, exact);
    }
}
