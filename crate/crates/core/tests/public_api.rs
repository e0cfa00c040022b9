use opsys::spectral::{dilation_constant, grid_norm, universal_norm};
use opsys::tuples::{classify_irreducible_pair, phase_scaled_pair, OperatorTuple, RationalAngle};
use opsys::C64;
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = RationalAngle> {
    (2u64..7)
        .prop_flat_map(|n| (1..n as i64).prop_map(move |k| RationalAngle::reduced(k, n).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pair_json_round_trip_and_classification(a in angle(), s in 0.0..6.28f64, t in 0.0..6.28f64) {
        let alpha = C64::from_polar(1.0, s);
        let beta = C64::from_polar(1.0, t);
        let pair = phase_scaled_pair(a, alpha, beta).unwrap();
        let back = OperatorTuple::from_json(&pair.to_json().unwrap()).unwrap();
        prop_assert!(back.commutation_residual() < 1e-12);
        let n = a.n() as i32;
        let c = classify_irreducible_pair(&back).unwrap();
        prop_assert!((c.xi - alpha.powi(n)).norm() < 1e-9);
        prop_assert!((c.zeta - beta.powi(n)).norm() < 1e-9);
    }

    #[test]
    fn dilation_constant_is_symmetric_under_negation(a in angle()) {
        let c = dilation_constant(a, 1e-7).unwrap();
        let m = dilation_constant(a.negated(), 1e-7).unwrap();
        prop_assert!((c.constant - m.constant).abs() <= c.error_bound + m.error_bound + 1e-12);
    }
}

// Any evaluated grid is a lower bound for the certified maximum.
#[test]
fn certified_norm_dominates_grid_samples() {
    for (k, n) in [(1, 3), (2, 5), (1, 4)] {
        let a = RationalAngle::new(k, n).unwrap();
        let b = universal_norm(a, 1e-8).unwrap();
        for grid in [3, 7, 12] {
            let g = grid_norm(a, grid).unwrap();
            assert!(g <= b.norm + b.error_bound + 1e-12, "{k}/{n} grid {grid}: {g} > {}", b.norm);
        }
    }
}
