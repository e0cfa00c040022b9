use super::*;
use crate::numerics::{random_phase, ONE};

fn angle(k: i64, n: u64) -> RationalAngle {
    RationalAngle::new(k, n).unwrap()
}

#[test]
fn harper_examples() {
    let a = RationalAngle::zero();
    let (al, be) = (phase(0.3), phase(-1.1));
    let h = harper_matrix(a, al, be).unwrap();
    assert!((h.get(0, 0).re - 2.0 * (al.re + be.re)).abs() < 1e-15);

    // n = 2, α = β = 1: 2σ_z + 2σ_x.
    let h = harper_matrix(angle(1, 2), ONE, ONE).unwrap();
    let ev = hermitian_eigenvalues(&h).unwrap();
    let r = 2.0 * 2f64.sqrt();
    assert!((ev[0] + r).abs() < 1e-12 && (ev[1] - r).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in 2..7 {
        let h = harper_matrix(angle(1, n), random_phase(&mut rng), random_phase(&mut rng)).unwrap();
        assert!(h.trace().norm() < 1e-12);
        assert!(h.is_hermitian(0.0));
    }
    assert!(harper_matrix(angle(1, 2), C64::new(2.0, 0.0), ONE).is_err());
}

#[test]
fn fundamental_domain_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (k, n) in [(1, 3), (2, 5), (3, 7)] {
        let a = angle(k, n);
        let q = a.q();
        for _ in 0..10 {
            let (al, be) = (random_phase(&mut rng), random_phase(&mut rng));
            let f = |x, y| operator_norm(&harper_matrix(a, x, y).unwrap()).unwrap();
            let base = f(al, be);
            assert!((f(al * q, be) - base).abs() < 1e-10);
            assert!((f(al, be * q) - base).abs() < 1e-10);
            assert!(base <= 4.0 + 1e-12);
        }
    }
}

/// Closed form for n = 2: ‖H(a, b)‖ = 2√(cos²a + cos²b).
#[test]
fn half_angle_closed_form() {
    let a = angle(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (x, y): (f64, f64) = (rand::Rng::random::<f64>(&mut rng) * TAU, rand::Rng::random::<f64>(&mut rng) * TAU);
        let expect = 2.0 * (x.cos().powi(2) + y.cos().powi(2)).sqrt();
        assert!((fiber_norm(a, x, y) - expect).abs() < 1e-12);
    }
    let b = universal_norm(a, 1e-8).unwrap();
    assert!(b.converged);
    assert!((b.norm - 2.0 * 2f64.sqrt()).abs() < 1e-8);
    let c = dilation_constant(a, 1e-8).unwrap();
    assert!((c.constant - 2f64.sqrt()).abs() < 1e-6);
    assert!(c.error_bound <= 1e-8);
}

#[test]
fn zero_angle_is_one() {
    let c = dilation_constant(RationalAngle::zero(), 1e-9).unwrap();
    assert_eq!(c.norm, 4.0);
    assert!((c.constant - 1.0).abs() < 1e-12);
}

#[test]
fn norm_below_four_off_zero() {
    for n in 2..=12u64 {
        let b = universal_norm(angle(1, n), 1e-6).unwrap();
        assert!(b.norm + b.error_bound < 4.0 - 1e-6, "n = {n}: {}", b.norm);
        assert!(b.norm >= 2.0);
    }
}

#[test]
fn bracket_contains_dense_grid() {
    // The grid values never exceed the certified upper end.
    for (k, n) in [(1, 3), (2, 5), (1, 4)] {
        let a = angle(k, n);
        let b = universal_norm(a, 1e-7).unwrap();
        let g = grid_norm(a, 40).unwrap();
        assert!(g <= b.norm + b.error_bound + 1e-12, "{g} > {}", b.norm);
        assert!(b.norm - g < 1e-2);
    }
}

#[test]
fn refinement_is_monotone() {
    let a = angle(2, 7);
    let coarse = universal_norm(a, 1e-4).unwrap();
    let fine = universal_norm(a, 1e-8).unwrap();
    assert!(fine.norm >= coarse.norm);
    assert!(fine.error_bound <= coarse.error_bound);
    assert!(fine.norm <= coarse.norm + coarse.error_bound + 1e-12);
}

#[test]
fn budget_exhaustion_is_reported() {
    let b = universal_norm_with_budget(angle(1, 5), 1e-9, 80).unwrap();
    assert!(!b.converged);
    assert!(b.error_bound > 1e-9);
    assert!(universal_norm(angle(1, 5), 1e-10).is_err());
}

#[test]
fn symmetric_under_reflection() {
    for (k, n) in [(1, 3), (1, 5), (2, 5), (3, 8)] {
        let tol = 1e-7;
        let c1 = dilation_constant(angle(k, n), tol).unwrap();
        let c2 = dilation_constant(angle(n as i64 - k, n), tol).unwrap();
        assert!((c1.constant - c2.constant).abs() < 2.0 * tol);
    }
}

#[test]
fn pair_reduction() {
    let tol = 1e-7;
    let c = dilation_constant_pair(angle(1, 3), angle(1, 3), tol).unwrap();
    assert!((c.constant - 1.0).abs() < 1e-12);
    let c = dilation_constant_pair(angle(1, 2), RationalAngle::zero(), tol).unwrap();
    assert!((c.constant - 2f64.sqrt()).abs() < 1e-6);
    let c = dilation_constant_pair(angle(2, 3), angle(1, 3), tol).unwrap();
    let d = dilation_constant(angle(1, 3), tol).unwrap();
    assert_eq!(c.constant, d.constant);
}

#[test]
fn transpose_check_examples() {
    let r = transpose_isometry_check(angle(1, 2), 3, 50, 1).unwrap();
    assert!(r.max_deviation < 1e-10, "{}", r.max_deviation);
    let r = transpose_isometry_check(angle(1, 3), 4, 0, 1).unwrap();
    assert_eq!(r.max_deviation, 0.0);
    let r32 = transpose_isometry_check(angle(1, 3), 32, 100, 3).unwrap();
    assert!(r32.max_deviation < 1e-3, "{}", r32.max_deviation);
    // The induced phase map sends the grid onto itself, so the deviation
    // is already at round-off on coarse grids.
    for g in [1, 2, 5, 8] {
        let r = transpose_isometry_check(angle(1, 3), g, 30, 3).unwrap();
        assert!(r.max_deviation < 1e-12, "grid {g}: {}", r.max_deviation);
    }
}

#[test]
fn butterfly_small() {
    let rows = butterfly_scan(1, 1e-7).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].k, rows[0].n, rows[0].constant), (0, 1, 1.0));
    let rows = butterfly_scan(2, 1e-7).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[1].constant - 2f64.sqrt()).abs() < 1e-6);
    let rows = butterfly_scan(6, 1e-7).unwrap();
    assert!(butterfly_asymmetry(&rows) < 2e-7);
    for r in &rows {
        assert!(r.constant >= 1.0 && r.constant <= 2.0);
    }
    let csv = butterfly_csv(&rows);
    assert!(csv.starts_with("k,n,theta,norm,constant,error_bound,grid_final\n"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(butterfly_scan(0, 1e-7).is_err());
}
