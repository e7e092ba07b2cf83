use contactsym::expr::{parse_with, Atom, Expr, Frac, Symbols};
use proptest::prelude::*;

fn symbols() -> Symbols {
    Symbols::default().with_function("f", &["x", "y"])
}

fn leaf() -> impl Strategy<Value = Frac> {
    prop_oneof![
        (-4i64..=4).prop_map(Frac::integer),
        (-3i64..=3, 1i64..=3).prop_map(|(n, d)| Frac::rational(n, d)),
        Just(Frac::var("x")),
        Just(Frac::var("y")),
        Just(Frac::var("z")),
        Just(Frac::func("f", &["x", "y"])),
        Just(Frac::exp(&Frac::var("x"))),
    ]
}

fn frac() -> impl Strategy<Value = Frac> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            (inner.clone(), 0i64..3).prop_map(|(a, k)| a.pow(k).unwrap()),
            // Denominators that can never vanish identically.
            (inner.clone(), 1i64..3).prop_map(|(a, k)| a.div(&Frac::var("x").add(&Frac::integer(k))).unwrap()),
            inner.prop_map(|a| Frac::exp(&a.mul(&Frac::var("y")))),
        ]
    })
}

fn same(a: &Frac, b: &Frac) -> bool {
    a.sub(b).is_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn normalize_is_idempotent(a in frac()) {
        let e = a.to_expr();
        let once = e.normalize().unwrap();
        let twice = once.normalize().unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(same(&once.to_frac().unwrap(), &a));
    }

    #[test]
    fn print_parse_round_trip(a in frac()) {
        let text = a.to_string();
        let back = parse_with(&text, &symbols()).unwrap().to_frac().unwrap();
        prop_assert!(same(&back, &a), "{} reparsed as {}", text, back);
    }

    #[test]
    fn diff_is_linear(a in frac(), b in frac(), k in -5i64..=5) {
        let x = Atom::var("x");
        let lhs = a.mul(&Frac::integer(k)).add(&b).diff(&x);
        let rhs = a.diff(&x).mul(&Frac::integer(k)).add(&b.diff(&x));
        prop_assert!(same(&lhs, &rhs));
    }

    #[test]
    fn leibniz(a in frac(), b in frac()) {
        let y = Atom::var("y");
        let lhs = a.mul(&b).diff(&y);
        let rhs = a.diff(&y).mul(&b).add(&a.mul(&b.diff(&y)));
        prop_assert!(same(&lhs, &rhs));
    }

    #[test]
    fn mixed_partials_commute(a in frac()) {
        let xy = a.diff_var("x").diff_var("y");
        let yx = a.diff_var("y").diff_var("x");
        prop_assert!(same(&xy, &yx));
    }

    #[test]
    fn zero_test_agrees_with_subtraction(a in frac(), b in frac()) {
        let s = a.add(&b);
        prop_assert!(s.sub(&a).sub(&b).is_zero());
        prop_assert!(Expr::Sum(vec![s.to_expr(), a.to_expr().neg(), b.to_expr().neg()]).to_frac().unwrap().is_zero());
    }
}

#[test]
fn clairaut_on_unknown_functions() {
    let syms = Symbols::default().with_function("g", &["x", "y", "z"]);
    let g = parse_with("g", &syms).unwrap().to_frac().unwrap();
    let a = g.diff_var("x").diff_var("z").diff_var("x");
    let b = g.diff_var("z").diff_var("x").diff_var("x");
    assert_eq!(a, b);
    let printed = parse_with("g_{,xxz}", &syms).unwrap().to_frac().unwrap();
    assert!(same(&a, &printed));
}

#[test]
fn division_by_zero_is_an_error() {
    let x = Frac::var("x");
    assert!(x.div(&x.sub(&x)).is_err());
}
