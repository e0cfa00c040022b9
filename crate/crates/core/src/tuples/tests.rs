use super::*;
use crate::numerics::{random_unitary, I};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn angle(k: i64, n: u64) -> RationalAngle {
    RationalAngle::new(k, n).unwrap()
}

#[test]
fn angle_parsing_and_reduction() {
    assert_eq!("1/3".parse::<RationalAngle>().unwrap(), angle(1, 3));
    assert_eq!("2/4".parse::<RationalAngle>().unwrap(), angle(1, 2));
    assert_eq!("-1/3".parse::<RationalAngle>().unwrap(), angle(2, 3));
    assert!("0.5".parse::<RationalAngle>().is_err());
    assert!("1/0".parse::<RationalAngle>().is_err());
    assert!(RationalAngle::new(2, 4).is_err());
    assert_eq!(angle(1, 1), RationalAngle::zero());
    assert_eq!(angle(2, 3).minus(&angle(1, 3)), angle(1, 3));
    assert_eq!(angle(1, 2).minus(&angle(1, 2)), RationalAngle::zero());
}

#[test]
fn standard_pair_n2_is_pauli() {
    let t = standard_pair(angle(1, 2));
    let u = t.matrix(0);
    let v = t.matrix(1);
    assert!(u.max_abs_diff(&ComplexMatrix::diag_real(&[1.0, -1.0])) == 0.0);
    assert!(v.max_abs_diff(&ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])) == 0.0);
}

#[test]
fn standard_pair_trivial_angle() {
    let t = standard_pair(angle(1, 1));
    assert_eq!(t.dim(), 1);
    assert_eq!(t.matrix(0).get(0, 0), ONE);
    assert_eq!(t.matrix(1).get(0, 0), ONE);
}

#[test]
fn standard_pair_relations() {
    for n in 1..=9u64 {
        for k in 0..n {
            let Ok(a) = RationalAngle::new(k as i64, n) else { continue };
            let t = standard_pair(a);
            let (u, v) = (t.matrix(0), t.matrix(1));
            // Oracle: direct index formulas.
            let q = phase(2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let uv = &u * &v;
            let vu = (&v * &u).scale(q);
            assert!(uv.max_abs_diff(&vu) < 1e-12);
            let id = ComplexMatrix::identity(n as usize);
            assert!(u.pow(n as usize).max_abs_diff(&id) < 1e-12);
            assert!(v.pow(n as usize).max_abs_diff(&id) < 1e-12);
            // first row of V carries its 1 in the last column
            assert_eq!(v.get(0, n as usize - 1), ONE);
        }
    }
}

#[test]
fn kron_spot_check_n3() {
    let t = standard_pair(angle(1, 3));
    let k = crate::numerics::kron(&t.matrix(0), &t.matrix(1)).unwrap();
    // row (0,1) = 1, column (0,0) = 0: U[0][0]·V[1][0] = 1.
    assert_eq!(k.get(1, 0), ONE);
}

#[test]
fn phase_scaled_pair_checks() {
    let a = angle(1, 2);
    let t = phase_scaled_pair(a, I, ONE).unwrap();
    let sq = t.matrix(0).pow(2);
    assert!(sq.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-15);
    assert!(phase_scaled_pair(a, C64::new(1.1, 0.0), ONE).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let al = crate::numerics::random_phase(&mut rng);
        let be = crate::numerics::random_phase(&mut rng);
        let t = phase_scaled_pair(angle(2, 5), al, be).unwrap();
        assert!(t.commutation_residual() < 1e-12);
    }
}

#[test]
fn lambda_tuple_examples() {
    // d = 2 reduces to the standard pair.
    let l = LambdaMatrix::from_upper(2, &[angle(1, 3)]).unwrap();
    let t = lambda_tuple(&l).unwrap();
    let s = standard_pair(angle(1, 3));
    assert!(t.matrix(0).max_abs_diff(&s.matrix(0)) < 1e-15);
    assert!(t.matrix(1).max_abs_diff(&s.matrix(1)) < 1e-15);

    // d = 3 all −1: dimension 8.
    let l = LambdaMatrix::from_upper(3, &[angle(1, 2); 3]).unwrap();
    let t = lambda_tuple(&l).unwrap();
    assert_eq!(t.dim(), 8);
    let m = t.matrices();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let lhs = &m[i] * &m[j];
                let rhs = (&m[j] * &m[i]).scale_real(-1.0);
                assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }
        }
    }

    // only λ₁₂ nontrivial: dimension 3.
    let l = LambdaMatrix::from_upper(3, &[angle(1, 3), RationalAngle::zero(), RationalAngle::zero()])
        .unwrap();
    let t = lambda_tuple(&l).unwrap();
    assert_eq!(t.dim(), 3);
    assert!(t.commutation_residual() < 1e-12);
    assert!(t.matrix(2).max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
}

#[test]
fn lambda_tuple_size_cap() {
    let l = LambdaMatrix::from_upper(4, &[angle(1, 4); 6]).unwrap();
    assert!(matches!(lambda_tuple(&l), Err(Error::Size { .. })));
    assert!(lambda_tuple_monomial(&l, 1 << 16).is_ok());
}

#[test]
fn monomial_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let l = LambdaMatrix::random(3, 3, &mut rng);
    let lt = lambda_tuple_monomial(&l, 1 << 12).unwrap();
    let a = &lt.generators[0];
    let b = &lt.generators[1];
    let dense = &a.to_dense() * &b.to_dense();
    assert!(a.compose(b).to_dense().max_abs_diff(&dense) < 1e-15);
    let x = crate::numerics::random_hermitian(a.dim(), &mut rng);
    assert!(a.conjugate(&x).max_abs_diff(&x.conjugate_by(&a.to_dense())) < 1e-12);
}

#[test]
fn irreducible_dimensions_small_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // A single q_{1,3} pair is irreducible of dimension 3.
    let l = LambdaMatrix::from_upper(2, &[angle(1, 3)]).unwrap();
    let lt = lambda_tuple_monomial(&l, 1 << 12).unwrap();
    assert_eq!(lt.irreducible_dimensions(&mut rng).unwrap(), vec![3]);
    // Three anticommuting unitaries on C^8: irreducibles are 2-dimensional.
    let l = LambdaMatrix::from_upper(3, &[angle(1, 2); 3]).unwrap();
    let lt = lambda_tuple_monomial(&l, 1 << 12).unwrap();
    let dims = lt.irreducible_dimensions(&mut rng).unwrap();
    assert_eq!(dims.iter().sum::<usize>(), 8);
    assert!(dims.iter().all(|&d| d == 2), "{dims:?}");
    // Cross-check against the commutant dimension of the dense tuple:
    // four copies of the 2-dim irreducible (possibly inequivalent).
    let dense = lambda_tuple(&l).unwrap();
    let c = commutant_dimension(&dense.matrices()).unwrap();
    assert!(c >= 4);
}

#[test]
fn universal_sample_shapes() {
    let t = universal_sample(angle(1, 2), 1).unwrap();
    let s = standard_pair(angle(1, 2));
    assert!(t.matrix(0).max_abs_diff(&s.matrix(0)) == 0.0);
    assert!(t.matrix(1).max_abs_diff(&s.matrix(1)) == 0.0);
    for g in 1..5 {
        assert_eq!(universal_sample(angle(1, 3), g).unwrap().dim(), 3 * g * g);
    }
    assert!(universal_sample(angle(1, 3), 0).is_err());
}

#[test]
fn universal_sample_norm_n2() {
    // Oracle: max over the fundamental-domain grid of 2√(cos²a + cos²b).
    let g = 64;
    let t = universal_sample(angle(1, 2), g).unwrap();
    let h: Vec<ComplexMatrix> = t
        .blocks()
        .iter()
        .map(|b| {
            let u = &b[0];
            let v = &b[1];
            &(&(u + &u.adjoint()) + v) + &v.adjoint()
        })
        .collect();
    let norm = h
        .iter()
        .map(|m| crate::numerics::operator_norm(m).unwrap())
        .fold(0.0, f64::max);
    assert!((norm - 2.0 * 2f64.sqrt()).abs() < 3e-3, "{norm}");
}

#[test]
fn transpose_examples() {
    let t = standard_pair(angle(1, 2));
    let tt = transpose_tuple(&t);
    assert!(tt.matrix(0).max_abs_diff(&t.matrix(0)) == 0.0);
    assert!(tt.matrix(1).max_abs_diff(&t.matrix(1)) == 0.0);

    let t = standard_pair(angle(1, 3));
    let tt = transpose_tuple(&t);
    assert_eq!(tt.commutation(), Some(&Commutation::Q(angle(2, 3))));
    let q = angle(2, 3).q();
    let (u, v) = (tt.matrix(0), tt.matrix(1));
    assert!((&u * &v).max_abs_diff(&(&v * &u).scale(q)) < 1e-12);
    let back = transpose_tuple(&tt);
    assert!(back.matrix(1).max_abs_diff(&t.matrix(1)) == 0.0);
}

#[test]
fn classify_examples() {
    let a = angle(1, 3);
    let alpha = phase(std::f64::consts::PI / 7.0);
    let t = phase_scaled_pair(a, alpha, ONE).unwrap();
    let c = classify_irreducible_pair(&t).unwrap();
    assert!((c.xi - phase(3.0 * std::f64::consts::PI / 7.0)).norm() < 1e-12);
    assert!((c.zeta - ONE).norm() < 1e-12);
    assert!(c.residual < 1e-10);

    let c = classify_irreducible_pair(&standard_pair(a)).unwrap();
    assert!((c.xi - ONE).norm() < 1e-12 && (c.zeta - ONE).norm() < 1e-12);
    // W is a permutation-with-phases matrix.
    assert!(Monomial::from_dense(&c.w).is_some());
}

#[test]
fn classify_rejects() {
    let a = angle(1, 3);
    let u = clock(a);
    let t = OperatorTuple::new(vec![u.clone(), u.clone()], None).unwrap();
    assert!(classify_irreducible_pair(&t).is_err());
    let t = universal_sample(a, 2).unwrap();
    assert!(matches!(classify_irreducible_pair(&t), Err(Error::Precondition(_))));
    // Reducible: commuting diagonal pair labelled q = 1 on C^1 is fine,
    // but a 2-dim commuting pair is reducible and wrong-dimensional.
    let d = ComplexMatrix::diag_real(&[1.0, -1.0]);
    let t = OperatorTuple::new(vec![d.clone(), d], Some(Commutation::Q(RationalAngle::zero()))).unwrap();
    assert!(classify_irreducible_pair(&t).is_err());
}

#[test]
fn commutation_claims_checked() {
    let a = angle(1, 3);
    let res = OperatorTuple::new(vec![clock(a), shift(3)], Some(Commutation::Q(angle(2, 3))));
    assert!(matches!(res, Err(Error::InconsistentCommutation(_))));
}

#[test]
fn json_round_trip() {
    let t = standard_pair(angle(2, 5));
    let back = OperatorTuple::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back.commutation(), t.commutation());
    assert!(back.matrix(1).max_abs_diff(&t.matrix(1)) == 0.0);

    let t = universal_sample(angle(1, 3), 2).unwrap();
    let back = OperatorTuple::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back.block_dims(), t.block_dims());

    let bad = r#"{"format":1,"dim":2,"d":2,"matrices":[[[[1,0]]],[[[1,0]]]]}"#;
    match OperatorTuple::from_json(bad) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "dim"),
        other => panic!("{other:?}"),
    }
    let bad = r#"{"format":1,"dim":1,"d":2,"matrices":[[[[1,0]]]]}"#;
    assert!(matches!(OperatorTuple::from_json(bad), Err(Error::Schema { .. })));
}

#[test]
fn disk_tuple_counts() {
    let s = disk_tuple(10_000);
    assert!(s.points >= 10_000);
    assert_eq!(s.tuple.dim(), s.points);
    assert!(s.resolution < 0.02);
    for b in s.tuple.blocks() {
        let x = b[0].get(0, 0).re;
        let y = b[1].get(0, 0).re;
        assert!(x * x + y * y <= 1.0 + 1e-12);
    }
}

mod props {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn lambda_tuples_commute(seed in 0u64..100_000, d in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = LambdaMatrix::random(d, 4, &mut rng);
            let lt = lambda_tuple_monomial(&l, 1 << 13).unwrap();
            prop_assert!(lt.residual() < 1e-10);
        }

        #[test]
        fn transpose_negates_angle(k in 0i64..40, n in 1u64..10) {
            let a = RationalAngle::reduced(k, n).unwrap();
            let t = transpose_tuple(&standard_pair(a));
            let q = a.negated().q();
            let (u, v) = (t.matrix(0), t.matrix(1));
            prop_assert!((&u * &v).max_abs_diff(&(&v * &u).scale(q)) < 1e-12);
        }

        #[test]
        fn classification_round_trip(seed in 0u64..100_000, n in 2u64..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coprime: Vec<i64> = (1..n as i64).filter(|&k| gcd(k as u64, n) == 1).collect();
            let a = angle(coprime[rng.random_range(0..coprime.len())], n);
            let al = crate::numerics::random_phase(&mut rng);
            let be = crate::numerics::random_phase(&mut rng);
            let g = random_unitary(n as usize, &mut rng);
            let t = phase_scaled_pair(a, al, be).unwrap().conjugate(&g).unwrap();
            let c = classify_irreducible_pair(&t).unwrap();
            let ni = n as i32;
            prop_assert!((c.xi - al.powi(ni)).norm() < 1e-9);
            prop_assert!((c.zeta - be.powi(ni)).norm() < 1e-9);
            prop_assert!(c.residual < 1e-8);
        }
    }
}
