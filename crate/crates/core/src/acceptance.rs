//! The acceptance suite: twelve end-to-end checks, each reported on its
//! own so a broken component shows up as individual failures.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpmaps::{is_cp, positivity_violation_search, tomiyama_map};
use crate::error::Result;
use crate::extremal::{self, boundary_check, exposed_state, extreme_chain_walk_in, ChainStop};
use crate::matrange::{
    level_link_check, numerical_range_boundary, one_order_equivalent, ucp_exists, EquivalenceVerdict,
    Feasibility, SourceSystem,
};
use crate::numerics::{lambda_max, random_hermitian, random_phase, random_unitary, ComplexMatrix};
use crate::sdp::{self, Constraint, SdpProblem, SdpStatus};
use crate::spectral::{butterfly_asymmetry, butterfly_scan, dilation_constant};
use crate::tuples::{
    classify_irreducible_pair, disk_tuple, lambda_tuple_monomial, pauli_pair, phase_scaled_pair,
    standard_pair, universal_sample, LambdaMatrix, RationalAngle,
};

pub const CRITERIA: usize = 12;

#[derive(Clone, Debug, Default)]
pub struct AcceptanceConfig {
    /// Smaller sample sizes; the whole run stays well under a minute.
    pub quick: bool,
    /// Replaces every solver tolerance (fault injection).
    pub sdp_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "dilation constant at 1/2 is sqrt 2",
        2 => "dilation constant at 0 is 1",
        3 => "butterfly symmetry c(k/n) = c((n-k)/n)",
        4 => "W1 of (F1, F2) is the unit disk",
        5 => "q-separation by UCP existence",
        6 => "disk tuple: 1-order but not 2-order equivalent",
        7 => "Tomiyama map: Choi spectrum and witnesses",
        8 => "classification round trip",
        9 => "extreme chains stop by level n",
        10 => "Lambda-commuting tuples",
        11 => "level link check",
        12 => "SDP solver suite",
        _ => "unknown",
    }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionResult> {
    (1..=CRITERIA).map(|id| run(id, cfg)).collect()
}

/// Runs one criterion; errors count as failures.
pub fn run(id: usize, cfg: &AcceptanceConfig) -> CriterionResult {
    let t0 = Instant::now();
    let outcome = match id {
        1 => c1(),
        2 => c2(),
        3 => c3(cfg),
        4 => c4(),
        5 => c5(cfg),
        6 => c6(cfg),
        7 => c7(),
        8 => c8(cfg),
        9 => c9(cfg),
        10 => c10(cfg),
        11 => c11(cfg),
        12 => c12(cfg),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id,
        title: title(id),
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn format_line(r: &CriterionResult) -> String {
    format!(
        "[{}] {:>2} {} ({:.1} s): {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.title,
        r.seconds,
        r.detail
    )
}

type Outcome = Result<(bool, String)>;

fn angle(k: i64, n: u64) -> RationalAngle {
    RationalAngle::new(k, n).expect("literal angles are reduced")
}

fn c1() -> Outcome {
    let t0 = Instant::now();
    let r = dilation_constant(angle(1, 2), 1e-8)?;
    let secs = t0.elapsed().as_secs_f64();
    // max over phases of 2√(cos²a + cos²b) is 2√2.
    let dev = (r.constant - 2f64.sqrt()).abs();
    Ok((
        dev < 1e-6 && secs < 10.0,
        format!("c = {:.9} ± {:.1e}, |c − √2| = {dev:.1e}, {secs:.2} s", r.constant, r.error_bound),
    ))
}

fn c2() -> Outcome {
    let r = dilation_constant(RationalAngle::zero(), 1e-9)?;
    let dev = (r.constant - 1.0).abs();
    Ok((dev < 1e-9, format!("c = {} (norm {})", r.constant, r.norm)))
}

fn c3(cfg: &AcceptanceConfig) -> Outcome {
    let n_max = if cfg.quick { 5 } else { 8 };
    let t0 = Instant::now();
    let rows = butterfly_scan(n_max, 1e-7)?;
    let secs = t0.elapsed().as_secs_f64();
    let asym = butterfly_asymmetry(&rows);
    let all_converged = rows.iter().all(|r| r.converged);
    Ok((
        asym < 2e-6 && secs < 300.0 && all_converged,
        format!("{} rows up to n = {n_max}, max asymmetry {asym:.1e}, {secs:.1} s", rows.len()),
    ))
}

fn c4() -> Outcome {
    let pts = numerical_range_boundary(&pauli_pair(), 360, 0)?;
    let dev = pts.iter().map(|p| (p.support - 1.0).abs()).fold(0.0, f64::max);
    Ok((dev < 1e-9, format!("360 directions, max |h − 1| = {dev:.1e}")))
}

fn c5(cfg: &AcceptanceConfig) -> Outcome {
    let tol = cfg.sdp_tol.unwrap_or(1e-8);
    let s = standard_pair(angle(1, 3));
    let r = standard_pair(angle(2, 3));
    let fwd = ucp_exists(&s, &r.matrices(), tol)?;
    let bwd = ucp_exists(&r, &s.matrices(), tol)?;
    let certified = |o: &crate::matrange::UcpOutcome| {
        o.verdict == Feasibility::Infeasible
            && o.sdp
                .as_ref()
                .and_then(|r| r.certificate.as_ref())
                .is_some_and(|c| c.verified && c.margin > 0.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = random_unitary(3, &mut rng);
    let conj = s.conjugate(&w)?;
    let same = ucp_exists(&s, &conj.matrices(), tol)?;
    let gap = same.sdp.as_ref().map(|r| r.gap).unwrap_or(f64::INFINITY);
    let ok = certified(&fwd) && certified(&bwd) && same.verdict == Feasibility::Feasible && gap < 1e-7;
    Ok((
        ok,
        format!(
            "1/3→2/3 {:?}, 2/3→1/3 {:?}, 1/3→conjugate {:?} (gap {gap:.1e})",
            fwd.verdict, bwd.verdict, same.verdict
        ),
    ))
}

fn c6(cfg: &AcceptanceConfig) -> Outcome {
    let tol = cfg.sdp_tol.unwrap_or(1e-8);
    let disk = disk_tuple(if cfg.quick { 2000 } else { 10_000 });
    let f = pauli_pair();
    let eq = one_order_equivalent(&f, &disk.tuple, 360, 2.0 * disk.resolution, 0)?;
    let lvl2 = ucp_exists(&disk.tuple, &f.matrices(), tol)?;
    let certified = lvl2
        .sdp
        .as_ref()
        .and_then(|r| r.certificate.as_ref())
        .is_some_and(|c| c.verified);
    Ok((
        eq.verdict == EquivalenceVerdict::Equivalent && lvl2.verdict == Feasibility::Infeasible && certified,
        format!(
            "{} points (resolution {:.2e}): level 1 {:?} (max deviation {:.2e}), disk → (F1, F2) {:?}",
            disk.points,
            disk.resolution,
            eq.verdict,
            eq.max_r_over_s.unwrap_or(0.0).max(eq.max_s_over_r.unwrap_or(0.0)),
            lvl2.verdict
        ),
    ))
}

fn c7() -> Outcome {
    let phi = tomiyama_map(2, 3)?;
    let v = is_cp(&phi)?;
    let spec_ok = (v.min_eigenvalue + 1.0).abs() < 1e-9;
    let hit = positivity_violation_search(&phi, 3, 20, 1)?;
    let found = hit.violation.is_some_and(|x| x < -1e-6);
    let none = positivity_violation_search(&phi, 2, 100, 1)?;
    Ok((
        spec_ok && found && none.witness.is_none(),
        format!(
            "min Choi eigenvalue {:.12}, level-3 violation {:?}, level-2 best {:.2e} over 100 restarts (heuristic, not a proof)",
            v.min_eigenvalue, hit.violation, none.best
        ),
    ))
}

fn c8(cfg: &AcceptanceConfig) -> Outcome {
    let cases = if cfg.quick { 20 } else { 100 };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_power, mut worst_form) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let n: u64 = rng.random_range(2..=5);
        let coprime: Vec<i64> = (1..n as i64).filter(|&k| RationalAngle::new(k, n).is_ok()).collect();
        let a = angle(coprime[rng.random_range(0..coprime.len())], n);
        let (al, be) = (random_phase(&mut rng), random_phase(&mut rng));
        let g = random_unitary(n as usize, &mut rng);
        let t = phase_scaled_pair(a, al, be)?.conjugate(&g)?;
        let c = classify_irreducible_pair(&t)?;
        let ni = n as i32;
        worst_power = worst_power.max((c.xi - al.powi(ni)).norm()).max((c.zeta - be.powi(ni)).norm());
        worst_form = worst_form.max(c.residual);
    }
    Ok((
        worst_power < 1e-9 && worst_form < 1e-8,
        format!("{cases} pairs: max |ξ − αⁿ|, |ζ − βⁿ| = {worst_power:.1e}, canonical residual {worst_form:.1e}"),
    ))
}

fn c9(cfg: &AcceptanceConfig) -> Outcome {
    let sdp_tol = cfg.sdp_tol.unwrap_or(extremal::SDP_TOL);
    let runs = if cfg.quick { 5 } else { 20 };
    let a = angle(1, 3);
    let s = universal_sample(a, 2)?;
    let sys = SourceSystem::new(&s)?;
    let mut levels = Vec::with_capacity(runs);
    let mut all_ok = true;
    for seed in 0..runs as u64 {
        let start = exposed_state(&s, seed)?;
        let c = extreme_chain_walk_in(&sys, &start, 6, 16, seed, extremal::DEFAULT_TOL, sdp_tol)?;
        all_ok &= c.stop == ChainStop::NoDilation && c.final_level <= 3;
        levels.push(c.final_level);
    }
    let boundary = standard_pair(a).matrices();
    let check = boundary_check(&boundary, a)?;
    let r = extremal::dilation_coupling_in(&sys, &boundary, 16, 0, sdp_tol)?;
    Ok((
        all_ok && check.boundary && r.coupling < 1e-6,
        format!(
            "{runs} chains on universal_sample(1/3, 2) ended at levels {levels:?}; boundary coupling {:.1e}",
            r.coupling
        ),
    ))
}

fn c10(cfg: &AcceptanceConfig) -> Outcome {
    let cases = if cfg.quick { 10 } else { 50 };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut worst_res, mut worst_ratio) = (0.0f64, 0.0f64);
    let mut largest = 0;
    for _ in 0..cases {
        let d = rng.random_range(2..=4);
        let l = LambdaMatrix::random(d, 4, &mut rng);
        let lt = lambda_tuple_monomial(&l, 1 << 13)?;
        worst_res = worst_res.max(lt.residual());
        let bound = (l.order() as f64).powi(d as i32);
        for dim in lt.irreducible_dimensions(&mut rng)? {
            worst_ratio = worst_ratio.max(dim as f64 / bound);
            largest = largest.max(dim);
        }
    }
    Ok((
        worst_res < 1e-10 && worst_ratio <= 1.0,
        format!(
            "{cases} random Λ: max residual {worst_res:.1e}, largest summand {largest}, max dim/N^d = {worst_ratio:.3}"
        ),
    ))
}

fn c11(cfg: &AcceptanceConfig) -> Outcome {
    let tol = cfg.sdp_tol.unwrap_or(1e-9);
    let dirs = if cfg.quick { 20 } else { 100 };
    let f = level_link_check(&pauli_pair(), 2, dirs, 0, tol)?;
    let s = level_link_check(&standard_pair(angle(1, 3)), 3, dirs / 2, 1, tol)?;
    Ok((
        f.max_deviation < 1e-6 && s.max_deviation < 1e-6,
        format!(
            "(F1, F2) N = 2: {:.1e}; standard(1/3) N = 3: {:.1e}",
            f.max_deviation, s.max_deviation
        ),
    ))
}

/// Random problem with a strictly feasible point and a trace constraint.
pub fn random_feasible_sdp(rng: &mut ChaCha8Rng, blocks: &[usize], m: usize) -> SdpProblem {
    let mut p = SdpProblem::new(blocks.to_vec());
    let x0: Vec<ComplexMatrix> = blocks
        .iter()
        .map(|&n| {
            let g = random_hermitian(n, rng);
            &(&g * &g) + &ComplexMatrix::identity(n)
        })
        .collect();
    for (b, &n) in blocks.iter().enumerate() {
        p.objective[b] = random_hermitian(n, rng);
    }
    let tr = blocks
        .iter()
        .enumerate()
        .map(|(b, &n)| (b, ComplexMatrix::identity(n)))
        .collect();
    p.push(Constraint::new(tr, x0.iter().map(|x| x.trace().re).sum()));
    for _ in 0..m {
        let terms: Vec<(usize, ComplexMatrix)> = blocks
            .iter()
            .enumerate()
            .map(|(b, &n)| (b, random_hermitian(n, rng)))
            .collect();
        let rhs = terms.iter().map(|(b, a)| a.real_inner(&x0[*b])).sum();
        p.push(Constraint::new(terms, rhs));
    }
    p
}

/// Random problem with tr X fixed, Σ y_i A_i = −P (P ≻ 0) and b·y = 1.
pub fn random_infeasible_sdp(rng: &mut ChaCha8Rng, blocks: &[usize], m: usize) -> SdpProblem {
    let m = m.max(1);
    let y: Vec<f64> = (0..m)
        .map(|_| {
            let v: f64 = rng.random_range(0.5..2.0);
            if rng.random::<bool>() { v } else { -v }
        })
        .collect();
    let mut coeffs: Vec<Vec<ComplexMatrix>> = (0..m - 1)
        .map(|_| blocks.iter().map(|&n| random_hermitian(n, rng)).collect())
        .collect();
    let last: Vec<ComplexMatrix> = blocks
        .iter()
        .enumerate()
        .map(|(b, &n)| {
            let g = random_hermitian(n, rng);
            let mut acc = &(&g * &g) + &ComplexMatrix::identity(n);
            acc = acc.scale_real(-1.0);
            for (c, yi) in coeffs.iter().zip(&y) {
                acc = &acc - &c[b].scale_real(*yi);
            }
            acc.scale_real(1.0 / y[m - 1])
        })
        .collect();
    coeffs.push(last);
    let mut rhs: Vec<f64> = (0..m - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
    let partial: f64 = rhs.iter().zip(&y).map(|(b, yi)| b * yi).sum();
    rhs.push((1.0 - partial) / y[m - 1]);
    let mut p = SdpProblem::new(blocks.to_vec());
    // A trace row (zero weight in the ray) bounds the feasible set, as in
    // every unital problem.
    let tr = blocks
        .iter()
        .enumerate()
        .map(|(b, &n)| (b, ComplexMatrix::identity(n)))
        .collect();
    p.push(Constraint::new(tr, rng.random_range(1.0..4.0)));
    for (c, b) in coeffs.into_iter().zip(rhs) {
        p.push(Constraint::new(c.into_iter().enumerate().collect(), b));
    }
    p
}

fn c12(cfg: &AcceptanceConfig) -> Outcome {
    let tol = cfg.sdp_tol.unwrap_or(1e-8);
    let count = if cfg.quick { 40 } else { 200 };
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = Vec::new();
    for i in 0..count {
        // Σn² ≥ 6 leaves room for the trace row plus up to five more.
        let blocks = loop {
            let nb = rng.random_range(1..=3);
            let b: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=3)).collect();
            if b.iter().map(|n| n * n).sum::<usize>() >= 6 {
                break b;
            }
        };
        let m = rng.random_range(1..=4);

        let p = random_feasible_sdp(&mut rng, &blocks, m);
        let r = sdp::solve(&p, tol)?;
        let scale = 1.0 + r.primal_objective.abs();
        let pairing: f64 = r.primal.iter().zip(&r.dual_slack).map(|(x, s)| x.real_inner(s)).sum();
        if r.status != SdpStatus::Optimal
            || r.dual_objective < r.primal_objective - 1e-6 * scale
            || pairing < -1e-6 * scale
        {
            failures.push(format!("#{i} weak duality ({:?})", r.status));
            continue;
        }
        let mut q = p.clone();
        q.constraints = p
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| c.scaled(10f64.powi(k as i32 % 3 - 1)))
            .collect();
        q.objective = p.objective.iter().map(|o| o.scale_real(3.0)).collect();
        let rq = sdp::solve(&q, tol)?;
        if rq.status != SdpStatus::Optimal
            || (rq.primal_objective - 3.0 * r.primal_objective).abs() > 1e-6 * 3.0 * scale
        {
            failures.push(format!("#{i} rescaling"));
        }

        let p = random_infeasible_sdp(&mut rng, &blocks, m + 1);
        let r = sdp::feasibility_with(&p, tol)?;
        let ok = r.status == SdpStatus::Infeasible
            && r.certificate.as_ref().is_some_and(|c| {
                let again = sdp::verify_farkas(&p, &c.y);
                // Independent check of the ray from the data.
                let lam = p
                    .adjoint_apply(&c.y)
                    .iter()
                    .map(|m| lambda_max(m).unwrap_or(f64::INFINITY))
                    .fold(f64::NEG_INFINITY, f64::max);
                again.verified && c.b_dot_y > 0.0 && lam <= 1e-7
            });
        if !ok {
            failures.push(format!(
                "#{i} certificate ({:?}: {}; {:?})",
                r.status,
                r.diagnostics,
                r.certificate.as_ref().map(|c| (c.b_dot_y, c.lambda_max, c.trace_bound, c.margin))
            ));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        failures.is_empty() && secs < 60.0,
        if failures.is_empty() {
            format!("{count} feasible + {count} infeasible instances, {secs:.1} s")
        } else {
            format!("{} failures: {}", failures.len(), failures.join(", "))
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_have_the_advertised_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = random_feasible_sdp(&mut rng, &[2, 3], 3);
            assert_eq!(sdp::feasibility(&p).unwrap().status, SdpStatus::Optimal);
            let q = random_infeasible_sdp(&mut rng, &[2, 3], 3);
            let r = sdp::feasibility(&q).unwrap();
            assert_eq!(r.status, SdpStatus::Infeasible, "{}", r.diagnostics);
        }
    }

    #[test]
    fn injected_tolerance_fails_solver_criteria_only() {
        let cfg = AcceptanceConfig {
            quick: true,
            sdp_tol: Some(1.0),
        };
        for id in [5, 11, 12] {
            let r = run(id, &cfg);
            assert!(!r.passed, "{id}: {}", r.detail);
            assert!(r.detail.starts_with("error:"), "{}", r.detail);
        }
        assert!(run(2, &cfg).passed);
        assert!(run(4, &cfg).passed);
    }

    #[test]
    fn unknown_criterion_fails() {
        let r = run(13, &AcceptanceConfig::default());
        assert!(!r.passed);
        assert_eq!(r.title, "unknown");
    }

    #[test]
    fn line_format() {
        let r = CriterionResult {
            id: 3,
            title: title(3),
            passed: true,
            detail: "ok".into(),
            seconds: 1.25,
        };
        assert_eq!(format_line(&r), "[PASS]  3 butterfly symmetry c(k/n) = c((n-k)/n) (1.2 s): ok");
    }
}
