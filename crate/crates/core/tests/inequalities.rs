mod common;

use fracpq_core::inequalities::{picone_pointwise, SLACK_TOL};
use fracpq_core::*;
use proptest::prelude::*;

use common::grid;

fn positive() -> impl Strategy<Value = f64> {
    (-2.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn elementary_i(a in -5.0f64..5.0, b in -5.0f64..5.0, gamma in 1.0001f64..6.0) {
        prop_assert!(!elementary_inequality_check(a, b, gamma, ElementaryVariant::I).unwrap().violated);
    }

    #[test]
    fn elementary_ii(a in -5.0f64..5.0, b in -5.0f64..5.0, gamma in 2.0f64..6.0) {
        prop_assert!(!elementary_inequality_check(a, b, gamma, ElementaryVariant::II).unwrap().violated);
    }

    #[test]
    fn elementary_iii(a in -5.0f64..5.0, b in -5.0f64..5.0, gamma in 0.01f64..6.0) {
        prop_assert!(!elementary_inequality_check(a, b, gamma, ElementaryVariant::III).unwrap().violated);
    }

    #[test]
    fn picone_first_two_variants_any_exponents(
        fx in positive(), fy in positive(), gx in positive(), gy in positive(),
        r2 in 1.05f64..4.0, extra in 0.0f64..3.0,
    ) {
        let args = PiconeArgs { r1: r2 + extra, r2, alpha: 1.0, beta: 1.0 };
        for variant in [PiconeVariant::I, PiconeVariant::II] {
            prop_assert!(!picone_pointwise(fx, fy, gx, gy, args, variant).violated);
        }
    }

    #[test]
    fn picone_mixed_variants_at_problem_exponents(
        fx in positive(), fy in positive(), gx in positive(), gy in positive(),
        alpha in 1.0f64..20.0, beta in 1.0f64..20.0,
    ) {
        let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha, beta };
        for variant in [PiconeVariant::III, PiconeVariant::IV] {
            prop_assert!(!picone_pointwise(fx, fy, gx, gy, args, variant).violated);
        }
    }
}

#[test]
fn elementary_worked_examples() {
    let m = elementary_inequality_check(1.0, -1.0, 2.0, ElementaryVariant::I).unwrap();
    assert_eq!((m.lhs, m.rhs), (1.0, 2.0));
    let m = elementary_inequality_check(0.7, 0.7, 3.0, ElementaryVariant::I).unwrap();
    assert_eq!((m.lhs, m.rhs), (0.0, 0.0));
    let m = elementary_inequality_check(2.0, 1.0, 2.0, ElementaryVariant::III).unwrap();
    assert_eq!((m.lhs, m.rhs), (3.0, 6.0));
}

#[test]
fn picone_equality_exactly_for_multiples() {
    let g = GridFunction::from_fn(grid(12), |x| 0.2 + x * (1.0 - x));
    let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
    for c in [1.0, 3.0, 0.25] {
        for variant in [PiconeVariant::I, PiconeVariant::II] {
            let r = picone_check(&g.scaled(c), &g, args, variant).unwrap();
            assert!(r.max_abs_relative_slack < SLACK_TOL, "c={c} {variant:?}");
        }
    }
    let f = GridFunction::from_fn(grid(12), |x| 1.0 + x);
    let r = picone_check(&f, &g, args, PiconeVariant::I).unwrap();
    assert!(r.worst.relative_slack() > SLACK_TOL || r.max_abs_relative_slack > SLACK_TOL);
}

#[test]
fn picone_iii_random_functions() {
    let f = GridFunction::from_fn(grid(20), |x| 0.1 + (3.0 * x).sin().abs());
    let g = GridFunction::from_fn(grid(20), |x| 0.05 + x * x);
    let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
    let r = picone_check(&f, &g, args, PiconeVariant::III).unwrap();
    assert_eq!(r.violations, 0);
    assert_eq!(r.pairs_checked, 20 * 19);
}

/// The mixed inequality does not hold for every exponent pair: at
/// `(r1, r2) = (4, 2)` this point violates it.
#[test]
fn picone_iii_counterexample_at_four_two() {
    let args = PiconeArgs { r1: 4.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
    let m = picone_pointwise(1.0, 0.2, 1.0, 0.5, args, PiconeVariant::III);
    assert!(m.violated, "{m:?}");
}

#[test]
fn picone_rejects_bad_input() {
    let g = GridFunction::from_fn(grid(6), |x| x);
    let mut f = GridFunction::from_fn(grid(6), |x| x);
    f.values_mut()[2] = 0.0;
    let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
    assert!(matches!(picone_check(&f, &g, args, PiconeVariant::I), Err(FracPqError::NonPositive { index: 2, .. })));
    let f = GridFunction::from_fn(grid(6), |x| 1.0 + x);
    let low = PiconeArgs { alpha: 0.5, ..args };
    assert!(picone_check(&f, &g, low, PiconeVariant::III).is_err());
    let swapped = PiconeArgs { r1: 2.0, r2: 3.0, ..args };
    assert!(picone_check(&f, &g, swapped, PiconeVariant::I).is_err());
}
