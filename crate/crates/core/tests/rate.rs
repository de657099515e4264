use proptest::prelude::*;
use tractoria::rate::RateExpr;
use tractoria::RateError;

fn ev(s: &str, n: f64) -> f64 {
    RateExpr::parse(s).unwrap().eval(n)
}

#[test]
fn grammar_examples() {
    assert_eq!(ev("10 + 2*log(1+n)", 0.0), 10.0);
    assert!((ev("10 + 2*log(1+n)", 4.0) - (10.0 + 2.0 * 5f64.ln())).abs() < 1e-15);
    assert_eq!(ev("sqrt(n)", 16.0), 4.0);
    assert_eq!(ev("2^3^2", 0.0), 512.0);
    assert_eq!(ev("-2^2", 0.0), -4.0);
    assert_eq!(ev("2^-1", 0.0), 0.5);
    assert_eq!(ev("pow(n, 3) - n/2", 2.0), 7.0);
    assert_eq!(ev("1.5e2 + 2E-1", 0.0), 150.2);
    assert_eq!(ev("exp(0) * pi", 0.0), std::f64::consts::PI);
    assert_eq!(ev("e", 0.0), std::f64::consts::E);
    assert_eq!(ev("  ( n ) ", 3.0), 3.0);
}

#[test]
fn parse_errors_carry_position() {
    for (src, pos) in [("1 +", 3), ("sqrt(1, 2)", 10), ("foo(n)", 0), ("n n", 2), ("pow(2)", 6), ("(n", 2)] {
        match RateExpr::parse(src) {
            Err(RateError::Parse { pos: p, .. }) => assert_eq!(p, pos, "{src}"),
            Ok(e) => panic!("{src} parsed as {e:?}"),
        }
    }
}

#[test]
fn serializes_as_source() {
    let e = RateExpr::parse("3 + log(1+n)").unwrap();
    let js = serde_json::to_string(&e).unwrap();
    assert_eq!(js, "\"3 + log(1+n)\"");
    assert_eq!(serde_json::from_str::<RateExpr>(&js).unwrap(), e);
    assert!(serde_json::from_str::<RateExpr>("\"3 +\"").is_err());
}

proptest! {
    #[test]
    fn affine_matches_direct(a in -1e3f64..1e3, b in -1e3f64..1e3, n in 0u32..1000) {
        let src = format!("{a:?} + {b:?}*n");
        let want = a + b * n as f64;
        prop_assert!((ev(&src, n as f64) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn display_reparses_identically(a in 0.1f64..50.0, k in 1u32..5, n in 0u32..100) {
        let src = format!("{a:?}*sqrt(n) + log(1+n)^{k} - n/{k}");
        let e = RateExpr::parse(&src).unwrap();
        let back = RateExpr::parse(&e.to_string()).unwrap();
        prop_assert_eq!(e.eval(n as f64).to_bits(), back.eval(n as f64).to_bits());
    }
}
