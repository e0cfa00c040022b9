use super::*;
use crate::numerics::{hermitian_eigenvalues, kron, random_density, random_hermitian};
use rand::Rng;

fn max_ent(m: usize) -> ComplexMatrix {
    // Σ E_ij ⊗ E_ij
    let mut c = ComplexMatrix::zeros(m * m);
    for i in 0..m {
        for j in 0..m {
            c.set(i * m + i, j * m + j, ONE);
        }
    }
    c
}

#[test]
fn identity_choi() {
    let phi = identity_map(2);
    assert!(phi.choi().max_abs_diff(&max_ent(2)) < 1e-15);
    let ev = hermitian_eigenvalues(phi.choi()).unwrap();
    let expect = [0.0, 0.0, 0.0, 2.0];
    for (a, b) in ev.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn trace_map_choi_is_identity() {
    let phi = trace_map(2, 2);
    assert!(phi.choi().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-15);
    let y = phi.apply(&ComplexMatrix::diag_real(&[1.0, 2.0])).unwrap();
    assert!(y.max_abs_diff(&ComplexMatrix::identity(2).scale_real(3.0)) < 1e-15);
}

#[test]
fn transpose_choi_is_swap() {
    let phi = transpose_map(2);
    // swap: (i,k),(j,l) entry 1 iff i = l and k = j.
    let swap = ComplexMatrix::from_fn(4, |r, c| {
        let (i, k) = (r / 2, r % 2);
        let (j, l) = (c / 2, c % 2);
        if i == l && k == j {
            ONE
        } else {
            ZERO
        }
    });
    assert!(phi.choi().max_abs_diff(&swap) < 1e-15);
    let v = is_cp(&phi).unwrap();
    assert!((v.min_eigenvalue + 1.0).abs() < 1e-12);
    assert!(!v.completely_positive);
}

#[test]
fn tomiyama_examples() {
    let phi = tomiyama_map(2, 3).unwrap();
    let e11 = ComplexMatrix::unit(3, 0, 0);
    let img = phi.apply(&e11).unwrap();
    let expect = &ComplexMatrix::identity(3).scale_real(2.0) - &e11;
    assert!(img.max_abs_diff(&expect) < 1e-15);

    // Oracle: Choi = nI − N|ω⟩⟨ω|, spectrum {n − N, n}.
    let v = is_cp(&phi).unwrap();
    assert!((v.min_eigenvalue + 1.0).abs() < 1e-9);
    let ev = hermitian_eigenvalues(phi.choi()).unwrap();
    assert!((ev[8] - 2.0).abs() < 1e-12);

    let id_img = phi.apply(&ComplexMatrix::identity(3)).unwrap();
    assert!(id_img.max_abs_diff(&ComplexMatrix::identity(3).scale_real(5.0)) < 1e-14);
    assert!(tomiyama_map_normalized(2, 3).unwrap().unitality_defect() < 1e-14);

    let phi = tomiyama_map(1, 2).unwrap();
    assert!((is_cp(&phi).unwrap().min_eigenvalue + 1.0).abs() < 1e-12);

    assert!(tomiyama_map(3, 3).is_err());
    assert!(tomiyama_map(0, 3).is_err());
}

#[test]
fn identity_is_cp() {
    let v = is_cp(&identity_map(3)).unwrap();
    assert!(v.min_eigenvalue.abs() < 1e-12 && v.completely_positive);
}

#[test]
fn choi_of_general_basis() {
    // Pauli-like Hermitian basis of M_2 with images under the transpose.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let basis: Vec<ComplexMatrix> = (0..4).map(|_| random_hermitian(2, &mut rng)).collect();
    let pairs: Vec<_> = basis.iter().map(|b| (b.clone(), b.transpose())).collect();
    let phi = choi_of(&pairs).unwrap();
    assert!(phi.choi().max_abs_diff(transpose_map(2).choi()) < 1e-12);
    assert!(choi_of(&pairs[..3]).is_err());
}

#[test]
fn apply_adjoint_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = random_hermitian(6, &mut rng);
    let phi = ChoiMap::from_choi(2, 3, c).unwrap();
    let x = random_hermitian(2, &mut rng);
    let y = random_hermitian(3, &mut rng);
    let lhs = (&y.adjoint() * &phi.apply(&x).unwrap()).trace();
    let rhs = (&phi.apply_adjoint(&y).unwrap().adjoint() * &x).trace();
    assert!((lhs - rhs).norm() < 1e-12);
}

#[test]
fn violation_search_tomiyama() {
    let phi = tomiyama_map(2, 3).unwrap();
    let hit = positivity_violation_search(&phi, 3, 20, 1).unwrap();
    let v = hit.violation.expect("witness at level 3");
    assert!((v + 1.0).abs() < 1e-6, "{v}");

    // Oracle: the maximally entangled input gives eigenvalue n − N.
    let omega = max_ent(3);
    let img = phi.apply_ampliated(3, &omega).unwrap();
    assert!((lambda_min(&img).unwrap() + 1.0).abs() < 1e-12);

    let none = positivity_violation_search(&phi, 2, 100, 7).unwrap();
    assert!(none.witness.is_none(), "best {}", none.best);
}

#[test]
fn violation_search_identity() {
    let r = positivity_violation_search(&identity_map(2), 2, 10, 3).unwrap();
    assert!(r.witness.is_none());
}

#[test]
fn json_round_trip() {
    let phi = tomiyama_map(1, 2).unwrap();
    let back = ChoiMap::from_json(&phi.to_json().unwrap()).unwrap();
    assert!(back.choi().max_abs_diff(phi.choi()) == 0.0);
    let bad = r#"{"format":1,"in_dim":2,"out_dim":2,"choi":[[[1,0]]]}"#;
    assert!(matches!(ChoiMap::from_json(bad), Err(Error::Schema { .. })));
}

/// Random CP map with Kraus operators, for property tests.
fn random_cp(m: usize, p: usize, rng: &mut ChaCha8Rng) -> (ChoiMap, Vec<ComplexMatrix>) {
    let kraus: Vec<ComplexMatrix> = (0..2)
        .map(|_| {
            // rectangular p×m embedded in a square of size max(m, p)
            let s = m.max(p);
            let g = random_hermitian(s, rng);
            let h = random_hermitian(s, rng);
            &g + &h.scale(crate::numerics::I)
        })
        .collect();
    let kk = kraus.clone();
    let phi = ChoiMap::from_fn(m, p, move |x| {
        let s = m.max(p);
        let mut xe = ComplexMatrix::zeros(s);
        for i in 0..m {
            for j in 0..m {
                xe.set(i, j, x.get(i, j));
            }
        }
        let mut acc = ComplexMatrix::zeros(s);
        for k in &kk {
            acc = &acc + &(&(k * &xe) * &k.adjoint());
        }
        acc.leading_block(p)
    })
    .unwrap();
    (phi, kraus)
}

#[test]
fn composition_two_routes() {
    // Route 2: link product C_{Φ∘Ψ} = tr_B[(C_Ψ^{T_B} ⊗ I_C)(I_A ⊗ C_Φ)].
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (a, b, c) = (2, 3, 2);
    let psi = ChoiMap::from_choi(a, b, random_hermitian(a * b, &mut rng)).unwrap();
    let phi = ChoiMap::from_choi(b, c, random_hermitian(b * c, &mut rng)).unwrap();
    let route1 = phi.compose(&psi).unwrap();

    let psi_tb = ComplexMatrix::from_fn(a * b, |r, s| {
        let (i, k) = (r / b, r % b);
        let (j, l) = (s / b, s % b);
        psi.choi().get(i * b + l, j * b + k)
    });
    let lhs = kron(&psi_tb, &ComplexMatrix::identity(c)).unwrap();
    let rhs = kron(&ComplexMatrix::identity(a), phi.choi()).unwrap();
    let prod = &lhs * &rhs;
    let route2 = ComplexMatrix::from_fn(a * c, |r, s| {
        let (i, x) = (r / c, r % c);
        let (j, y) = (s / c, s % c);
        let mut acc = ZERO;
        for t in 0..b {
            acc += prod.get((i * b + t) * c + x, (j * b + t) * c + y);
        }
        acc
    });
    assert!(route1.choi().max_abs_diff(&route2) < 1e-10);
}

mod props {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn choi_apply_round_trip(seed in 0u64..100_000, m in 1usize..4, p in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (phi, _) = random_cp(m, p, &mut rng);
            let pairs: Vec<_> = (0..m * m)
                .map(|k| {
                    let e = ComplexMatrix::unit(m, k / m, k % m);
                    let img = phi.apply(&e).unwrap();
                    (e, img)
                })
                .collect();
            let again = choi_of(&pairs).unwrap();
            prop_assert!(again.choi().max_abs_diff(phi.choi()) < 1e-11);
        }

        #[test]
        fn cp_maps_are_positive(seed in 0u64..100_000, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (phi, _) = random_cp(m, m, &mut rng);
            prop_assert!(is_cp(&phi).unwrap().completely_positive);
            for _ in 0..5 {
                let x = random_density(m, &mut rng).scale_real(rng.random_range(0.1..3.0));
                let y = phi.apply(&x).unwrap();
                prop_assert!(lambda_min(&y).unwrap() > -1e-10);
            }
        }
    }
}
