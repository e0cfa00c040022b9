use super::*;
use crate::numerics::{random_phase, random_unitary};
use crate::tuples::{clock, phase_scaled_pair, shift, standard_pair, universal_sample};

const TOL: f64 = 1e-6;

fn angle(k: i64, n: u64) -> RationalAngle {
    RationalAngle::new(k, n).unwrap()
}

#[test]
fn boundary_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (k, n) in [(1, 2), (1, 3), (2, 5), (3, 4)] {
        let a = angle(k, n);
        let pair = phase_scaled_pair(a, random_phase(&mut rng), random_phase(&mut rng)).unwrap();
        assert!(is_boundary_restriction(&pair.matrices(), a).unwrap());
        // Invariant under unitary conjugation.
        let w = random_unitary(n as usize, &mut rng);
        let conj: Vec<ComplexMatrix> = pair.matrices().iter().map(|m| m.conjugate_by(&w)).collect();
        assert!(is_boundary_restriction(&conj, a).unwrap());

        let u = clock(a);
        let c = boundary_check(&[u.clone(), u.clone()], a).unwrap();
        assert!(!c.boundary && c.commutation_residual > 0.1);

        let m = n as usize - 1;
        let comp = [u.leading_block(m), shift(n as usize).leading_block(m)];
        let c = boundary_check(&comp, a).unwrap();
        assert!(!c.boundary && c.unitarity_defect > 0.1);
    }
    // At angle 0 the characters (1, 1) are boundary points.
    let a = angle(0, 1);
    let one = ComplexMatrix::identity(1);
    assert!(is_boundary_restriction(&[one.clone(), one], a).unwrap());
}

#[test]
fn boundary_values_are_maximal() {
    let a = angle(1, 3);
    let s = universal_sample(a, 2).unwrap();
    let r = dilation_coupling_max(&s, &standard_pair(a).matrices(), 16, 0).unwrap();
    assert!(r.coupling < 1e-6, "{}", r.coupling);
    assert!(r.snap < 1e-8);
    // A grid phase pair other than (1, 1).
    let p = phase_scaled_pair(a, crate::tuples::grid_phase(1, 3, 2), crate::tuples::grid_phase(1, 3, 2)).unwrap();
    let r = dilation_coupling_max(&s, &p.matrices(), 16, 3).unwrap();
    assert!(r.coupling < 1e-6, "{}", r.coupling);
}

#[test]
fn vector_state_dilates() {
    // e_1*(·)e_1 on (U, V) at n = 2 takes values (1, 0); (U, V) itself
    // dilates it with off-diagonal entry 1 in V.
    let s = standard_pair(angle(1, 2));
    let vals = [ComplexMatrix::diag_real(&[1.0]), ComplexMatrix::diag_real(&[0.0])];
    let r = dilation_coupling_max(&s, &vals, 16, 0).unwrap();
    assert!(r.lower >= 0.5, "{}", r.lower);
    assert!(r.coupling >= r.lower - 1e-8);
    // The returned dilation keeps φ in its corner.
    let sys = SourceSystem::new(&s).unwrap();
    let psi = r.best_dilation().unwrap().values(&sys).unwrap();
    assert!((psi[0].get(0, 0) - vals[0].get(0, 0)).norm() < 1e-7);
    assert!(psi[1].get(0, 0).norm() < 1e-7);
}

#[test]
fn direct_sum_of_characters_is_maximal() {
    // Commuting sample: every point evaluation is a character.
    let s = universal_sample(RationalAngle::zero(), 3).unwrap();
    let blocks = s.blocks();
    let vals: Vec<ComplexMatrix> = (0..2)
        .map(|i| ComplexMatrix::diag(&[blocks[1][i].get(0, 0), blocks[5][i].get(0, 0)]))
        .collect();
    let r = dilation_coupling_max(&s, &vals, 16, 2).unwrap();
    assert!(r.coupling < 1e-6, "{}", r.coupling);
}

#[test]
fn coupling_monotone_in_directions() {
    let s = standard_pair(angle(1, 3));
    let vals = exposed_state(&s, 4).unwrap();
    let few = dilation_coupling_max(&s, &vals, 4, 9).unwrap();
    let many = dilation_coupling_max(&s, &vals, 12, 9).unwrap();
    assert!(few.coupling <= many.coupling + 1e-9);
    for (a, b) in few.per_direction.iter().zip(&many.per_direction) {
        assert_eq!(a.direction, b.direction);
    }
}

#[test]
fn chains_on_q_commuting_sample() {
    let a = angle(1, 3);
    let s = universal_sample(a, 2).unwrap();
    for seed in 0..3 {
        let start = exposed_state(&s, seed).unwrap();
        let c = extreme_chain_walk(&s, &start, 6, 16, seed, TOL).unwrap();
        assert_eq!(c.stop, ChainStop::NoDilation);
        assert!(c.final_level <= 3, "{:?}", c.steps);
        // The top of the chain is a boundary restriction.
        if c.final_level == 3 {
            let b = boundary_check(&c.final_values, a).unwrap();
            assert!(b.unitarity_defect < 1e-6 && b.commutant_dimension == 1, "{b:?}");
        }
    }
}

#[test]
fn chain_from_boundary_stops_at_once() {
    let a = angle(1, 3);
    let s = universal_sample(a, 2).unwrap();
    let c = extreme_chain_walk(&s, &standard_pair(a).matrices(), 4, 8, 0, TOL).unwrap();
    assert_eq!(c.steps.len(), 1);
    assert_eq!(c.final_level, 3);
}

#[test]
fn chain_on_commuting_pair_stays_at_one() {
    let s = universal_sample(RationalAngle::zero(), 3).unwrap();
    for seed in 0..3 {
        let start = exposed_state(&s, seed).unwrap();
        let c = extreme_chain_walk(&s, &start, 4, 16, seed, TOL).unwrap();
        assert_eq!(c.stop, ChainStop::NoDilation);
        assert_eq!(c.final_level, 1);
    }
}

#[test]
fn non_ucp_values_rejected() {
    let s = standard_pair(angle(1, 3));
    let vals = [ComplexMatrix::diag_real(&[2.0]), ComplexMatrix::diag_real(&[0.0])];
    assert!(dilation_coupling_max(&s, &vals, 4, 0).is_err());
    assert!(dilation_coupling_max(&s, &vals[..1], 4, 0).is_err());
}

#[test]
fn report_json() {
    let a = angle(1, 2);
    let s = standard_pair(a);
    let r = extremal_report(&s, &s.matrices(), Some(a), 8, 0, TOL).unwrap();
    assert_eq!(r.classification, Classification::BoundaryRestriction);
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    assert_eq!(v["format"], 1);
    assert_eq!(v["classification"], "boundary-restriction");
    let vals = [ComplexMatrix::diag_real(&[1.0]), ComplexMatrix::diag_real(&[0.0])];
    let r = extremal_report(&s, &vals, Some(a), 8, 0, TOL).unwrap();
    assert_eq!(r.classification, Classification::Dilatable);
}
