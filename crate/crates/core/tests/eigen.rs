mod common;

use std::sync::Arc;

use fracpq_core::eigen::{eigen_residual, li_verdict, normalized_distance};
use fracpq_core::energy::lp_norm_pow_raw;
use fracpq_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn matches_dense_oracle_for_r2() {
    for n in [4, 8, 16, 32] {
        for s in [0.25, 0.5, 0.75] {
            let asm = assembly(n, s, 2.0);
            let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
            let (lambda, v) = r2_oracle(n, s);
            let h = 1.0 / n as f64;
            assert!((pair.lambda - lambda).abs() <= 1e-8 * lambda, "n={n} s={s}");
            assert!(l2_distance(&l2_normalized(pair.phi.values(), h), &v, h) < 1e-6);
        }
    }
}

#[test]
fn single_cell_is_closed_form() {
    for (s, r) in [(0.2, 1.5), (0.5, 2.0), (0.8, 3.0)] {
        let asm = assembly(1, s, r);
        let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
        // One cell: h = 1, E(u) = e_1 |u|^r, ||u||_r^r = |u|^r.
        assert!((pair.lambda - asm.exterior_weights()[0]).abs() <= 1e-12 * pair.lambda);
        assert!((pair.phi.values()[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn eigenpairs_are_converged_normalized_and_positive() {
    for (s, r) in [(0.3, 1.5), (0.6, 2.5), (0.8, 3.0)] {
        let asm = assembly(24, s, r);
        let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
        assert!(pair.converged);
        assert!(pair.residual < 1e-8);
        assert!((eigen_residual(&asm, pair.phi.values(), pair.lambda) - pair.residual).abs() < 1e-12);
        assert!((lp_norm_pow_raw(asm.grid().h(), pair.phi.values(), r) - 1.0).abs() < 1e-12);
        assert!(pair.phi.min_value() > 0.0);
    }
}

#[test]
fn seeds_agree() {
    let asm = assembly(16, 0.5, 2.0);
    let a = first_eigenpair(&asm, &SolverOptions { seed: 1, ..Default::default() }).unwrap();
    let b = first_eigenpair(&asm, &SolverOptions { seed: 99, ..Default::default() }).unwrap();
    assert!(normalized_distance(&a.phi, &b.phi).unwrap() < 1e-8);

    let asm = assembly(16, 0.5, 3.0);
    let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
    let report = simplicity_check(&asm, &pair, &SolverOptions::default()).unwrap();
    assert!(report.passed && report.max_distance < 1e-6);
}

#[test]
fn distance_ignores_scale_and_sign() {
    let asm = assembly(10, 0.4, 2.0);
    let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
    assert_eq!(li_distance(&pair, &pair).unwrap(), 0.0);
    assert!(normalized_distance(&pair.phi, &pair.phi.scaled(2.0)).unwrap() < 1e-15);
    assert!(normalized_distance(&pair.phi, &pair.phi.scaled(-1.0)).unwrap() < 1e-15);
}

#[test]
fn quotient_bounds_the_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for r in [1.5, 2.0, 3.0] {
        let asm = assembly(16, 0.5, r);
        let pair = first_eigenpair(&asm, &SolverOptions::default()).unwrap();
        for _ in 0..100 {
            let u =
                GridFunction::new(asm.grid().clone(), (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let q = rayleigh_quotient(&asm, &u).unwrap();
            assert!(q >= pair.lambda - 1e-10);
            let c = rng.random_range(0.1..5.0);
            assert!((rayleigh_quotient(&asm, &u.scaled(-c)).unwrap() - q).abs() <= 1e-12 * q);
        }
    }
    let zero = GridFunction::zeros(assembly(4, 0.5, 2.0).grid().clone());
    assert!(rayleigh_quotient(&assembly(4, 0.5, 2.0), &zero).is_err());
}

#[test]
fn shrinking_the_domain_raises_the_eigenvalue() {
    for r in [1.5, 2.0, 3.0] {
        let mut last = 0.0;
        for len in [2.0, 1.0, 0.5] {
            let grid = Arc::new(build_grid(Interval::new(0.0, len).unwrap(), 16).unwrap());
            let asm = EnergyAssembly::new(grid, FractionalParams::new(0.5, r).unwrap()).unwrap();
            let lambda = first_eigenpair(&asm, &SolverOptions::default()).unwrap().lambda;
            assert!(lambda > last, "r={r} len={len}");
            last = lambda;
        }
    }
}

#[test]
fn li_window() {
    assert!(li_condition(&config(0.8, 3.0, 0.7, 2.0)));
    assert!(!li_condition(&config(0.8, 3.0, 0.5, 2.0)));
    let outside = PQConfig { s2: 0.85, ..config(0.8, 3.0, 0.7, 2.0) };
    assert!(!li_condition(&outside));
    assert_eq!(li_verdict(&config(0.8, 3.0, 0.5, 2.0), 1.0, 1e-3), None);
}

#[test]
fn li_distance_in_window() {
    let opts = SolverOptions::default();
    let p = first_eigenpair(&assembly(64, 0.8, 3.0), &opts).unwrap();
    let q = first_eigenpair(&assembly(64, 0.7, 2.0), &opts).unwrap();
    let d = li_distance(&p, &q).unwrap();
    assert!(d > 1e-3);
    assert_eq!(li_verdict(&config(0.8, 3.0, 0.7, 2.0), d, 1e-3), Some(true));
}
