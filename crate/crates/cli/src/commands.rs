use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use opsys::acceptance::{self, AcceptanceConfig, CRITERIA};
use opsys::extremal::{self, ChainStop, Classification};
use opsys::matrange::{self, EquivalenceVerdict, Feasibility};
use opsys::sdp::SdpStatus;
use opsys::spectral;
use opsys::tuples::{self, Commutation, LambdaMatrix, OperatorTuple, RationalAngle};
use opsys::{Error, Result, C64};

use crate::output::Run;
use crate::{Command, EquivLevel, TupleKind, Verdict};

/// Fixed tolerance of the pair classification residual.
const CLASSIFY_TOL: f64 = 1e-9;

pub fn run(cmd: &Command) -> Result<Verdict> {
    match cmd {
        Command::Construct(a) => construct(a),
        Command::Classify(a) => classify(a),
        Command::Nrange(a) => nrange(a),
        Command::Member(a) => member(a),
        Command::Support(a) => support(a),
        Command::Equiv(a) => equiv(a),
        Command::Extreme(a) => extreme(a),
        Command::Chain(a) => chain(a),
        Command::Dilation(a) => dilation(a),
        Command::Butterfly(a) => butterfly(a),
        Command::TransposeCheck(a) => transpose_check(a),
        Command::Selftest(a) => selftest(a),
    }
}

fn angle(s: &str) -> Result<RationalAngle> {
    RationalAngle::from_str(s)
}

fn read_tuple(path: &Path) -> Result<OperatorTuple> {
    let text = fs::read_to_string(path).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    OperatorTuple::from_json(&text).map_err(|e| match e {
        Error::Schema { path: p, message } => Error::Schema {
            path: format!("{}: {p}", path.display()),
            message,
        },
        Error::Json(j) => Error::Schema {
            path: path.display().to_string(),
            message: j.to_string(),
        },
        other => other,
    })
}

fn check_tol(name: &str, tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Precondition(format!("--{name} must be positive, got {tol}")));
    }
    Ok(())
}

/// Parses "α,β" into unimodular phases; each entry is a complex literal
/// such as `1`, `-1`, `i` or `0.6+0.8i`.
fn phases(s: &str) -> Result<(C64, C64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Precondition(format!("--phases needs two entries, got '{s}'")));
    }
    let parse = |p: &str| -> Result<C64> {
        let z = C64::from_str(p).map_err(|_| Error::Precondition(format!("bad phase '{p}'")))?;
        if (z.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("phase '{p}' is not unimodular")));
        }
        Ok(z)
    };
    Ok((parse(parts[0])?, parse(parts[1])?))
}

fn construct(a: &crate::ConstructArgs) -> Result<Verdict> {
    let run = Run::new("construct", a);
    let t = match a.kind {
        TupleKind::Standard => {
            let (al, be) = phases(&a.phases)?;
            tuples::phase_scaled_pair(angle(&a.q)?, al, be)?
        }
        TupleKind::Universal => tuples::universal_sample(angle(&a.q)?, a.grid)?,
        TupleKind::Pauli => tuples::pauli_pair(),
        TupleKind::Disk => tuples::disk_tuple(a.points).tuple,
        TupleKind::Lambda => {
            let spec = a
                .lambda
                .as_deref()
                .ok_or_else(|| Error::Precondition("--kind lambda needs --lambda".into()))?;
            let upper = spec.split(',').map(angle).collect::<Result<Vec<_>>>()?;
            // m(m−1)/2 entries determine m.
            let d = (1..=16)
                .find(|d| d * (d - 1) / 2 == upper.len())
                .ok_or_else(|| Error::Precondition(format!("{} angles is not a triangle number", upper.len())))?;
            tuples::lambda_tuple(&LambdaMatrix::from_upper(d, &upper)?)?
        }
    };
    run.emit_document(&t.to_json()?, a.out.out.as_deref())?;
    Ok(Verdict::Definitive)
}

#[derive(Serialize)]
struct ClassifyReport {
    angle: RationalAngle,
    /// u^n = ξ·I.
    xi: C64,
    /// v^n = ζ·I.
    zeta: C64,
    lambda: C64,
    eta: C64,
    residual: f64,
    tol: f64,
    /// The isomorphism class is fixed by (ξ, ζ).
    note: &'static str,
}

fn classify(a: &crate::ClassifyArgs) -> Result<Verdict> {
    let run = Run::new("classify", a).tol("residual", CLASSIFY_TOL);
    let t = read_tuple(&a.s)?;
    let c = tuples::classify_irreducible_pair(&t)?;
    let ang = match t.commutation() {
        Some(Commutation::Q(q)) => *q,
        _ => return Err(Error::Precondition("tuple carries no q-commutation".into())),
    };
    let ok = c.residual <= CLASSIFY_TOL;
    run.emit_json(
        &ClassifyReport {
            angle: ang,
            xi: c.xi,
            zeta: c.zeta,
            lambda: c.lambda,
            eta: c.eta,
            residual: c.residual,
            tol: CLASSIFY_TOL,
            note: "pairs are *-isomorphic iff their (xi, zeta) agree",
        },
        a.out.out.as_deref(),
    )?;
    Ok(if ok { Verdict::Definitive } else { Verdict::Inconclusive })
}

fn nrange(a: &crate::NrangeArgs) -> Result<Verdict> {
    let run = Run::new("nrange", a).seed(a.seed);
    let s = read_tuple(&a.s)?;
    let pts = matrange::numerical_range_boundary(&s, a.directions, a.seed)?;
    run.emit_csv(&matrange::boundary_csv(&pts), a.out.out.as_deref())?;
    Ok(Verdict::Definitive)
}

fn feasibility_verdict(f: Feasibility) -> Verdict {
    match f {
        Feasibility::Feasible | Feasibility::Infeasible => Verdict::Definitive,
        Feasibility::Inconclusive => Verdict::Inconclusive,
    }
}

fn member(a: &crate::MemberArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("member", a).tol("sdp", a.tol);
    let s = read_tuple(&a.s)?;
    let targets = read_tuple(&a.a)?.matrices();
    let out = matrange::membership(&s, &targets, a.tol)?;
    run.emit_json(&out.summary(), a.out.out.as_deref())?;
    Ok(feasibility_verdict(out.verdict))
}

#[derive(Serialize)]
struct SupportReport {
    level: usize,
    value: f64,
    lower: f64,
    upper: f64,
    status: SdpStatus,
    tol: f64,
}

fn support(a: &crate::SupportArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("support", a).tol("sdp", a.tol);
    let s = read_tuple(&a.s)?;
    let b = read_tuple(&a.b)?.matrices();
    let n = b.first().map(|m| m.dim()).unwrap_or(0);
    let v = matrange::support(&s, n, &b, a.tol)?;
    run.emit_json(
        &SupportReport {
            level: n,
            value: v.value,
            lower: v.lower,
            upper: v.upper,
            status: v.status,
            tol: a.tol,
        },
        a.out.out.as_deref(),
    )?;
    Ok(if v.status == SdpStatus::Optimal {
        Verdict::Definitive
    } else {
        Verdict::Inconclusive
    })
}

fn equiv(a: &crate::EquivArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let s = read_tuple(&a.s)?;
    let r = read_tuple(&a.r)?;
    let (run, report) = match a.level {
        EquivLevel::One => (
            Run::new("equiv", a).seed(a.seed).tol("support", a.tol),
            matrange::one_order_equivalent(&s, &r, a.directions, a.tol, a.seed)?,
        ),
        EquivLevel::Complete => (
            Run::new("equiv", a).tol("sdp", a.tol),
            matrange::completely_order_equivalent(&s, &r, a.tol)?,
        ),
    };
    run.emit_json(&report, a.out.out.as_deref())?;
    Ok(if report.verdict == EquivalenceVerdict::Inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Definitive
    })
}

fn source_angle(s: &OperatorTuple, flag: Option<&str>) -> Result<Option<RationalAngle>> {
    if let Some(q) = flag {
        return angle(q).map(Some);
    }
    Ok(match s.commutation() {
        Some(Commutation::Q(q)) => Some(*q),
        _ => None,
    })
}

fn extreme(a: &crate::ExtremeArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("extreme", a)
        .seed(a.seed)
        .tol("coupling", a.tol)
        .tol("sdp", extremal::SDP_TOL);
    let s = read_tuple(&a.s)?;
    let values = read_tuple(&a.values)?.matrices();
    let ang = source_angle(&s, a.q.as_deref())?;
    let report = extremal::extremal_report(&s, &values, ang, a.directions, a.seed, a.tol)?;
    run.emit_json(&report, a.out.out.as_deref())?;
    Ok(if report.classification == Classification::Inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Definitive
    })
}

fn chain(a: &crate::ChainArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("chain", a)
        .seed(a.seed)
        .tol("coupling", a.tol)
        .tol("sdp", extremal::SDP_TOL);
    let s = read_tuple(&a.s)?;
    let start = match &a.start {
        Some(p) => read_tuple(p)?.matrices(),
        None => extremal::exposed_state(&s, a.seed)?,
    };
    let report = extremal::extreme_chain_walk(&s, &start, a.max_steps, a.directions, a.seed, a.tol)?;
    run.emit_json(&report, a.out.out.as_deref())?;
    Ok(match report.stop {
        ChainStop::NoDilation => Verdict::Definitive,
        ChainStop::MaxSteps | ChainStop::Inconclusive => Verdict::Inconclusive,
    })
}

fn dilation(a: &crate::DilationArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("dilation", a).tol("norm", a.tol);
    let theta = angle(&a.q)?;
    let r = match &a.q2 {
        Some(q2) => spectral::dilation_constant_pair(theta, angle(q2)?, a.tol)?,
        None => spectral::dilation_constant(theta, a.tol)?,
    };
    if a.out.out.is_none() {
        eprintln!("c = {:.6} ± {:.1e}", r.constant, r.error_bound.max(f64::MIN_POSITIVE));
    }
    run.emit_json(&r, a.out.out.as_deref())?;
    Ok(if r.converged { Verdict::Definitive } else { Verdict::Inconclusive })
}

fn butterfly(a: &crate::ButterflyArgs) -> Result<Verdict> {
    check_tol("tol", a.tol)?;
    let run = Run::new("butterfly", a).tol("norm", a.tol);
    let rows = spectral::butterfly_scan(a.n_max, a.tol)?;
    run.emit_csv(&spectral::butterfly_csv(&rows), a.out.out.as_deref())?;
    Ok(if rows.iter().all(|r| r.converged) {
        Verdict::Definitive
    } else {
        Verdict::Inconclusive
    })
}

fn transpose_check(a: &crate::TransposeArgs) -> Result<Verdict> {
    let run = Run::new("transpose-check", a).seed(a.seed);
    let r = spectral::transpose_isometry_check(angle(&a.q)?, a.grid, a.samples, a.seed)?;
    run.emit_json(&r, a.out.out.as_deref())?;
    Ok(Verdict::Definitive)
}

#[derive(Serialize)]
struct SelftestReport {
    quick: bool,
    injected_sdp_tol: Option<f64>,
    passed: usize,
    total: usize,
    criteria: Vec<acceptance::CriterionResult>,
}

fn selftest(a: &crate::SelftestArgs) -> Result<Verdict> {
    let mut run = Run::new("selftest", a);
    if let Some(t) = a.inject_sdp_tol {
        run = run.tol("sdp", t);
    }
    let cfg = AcceptanceConfig {
        quick: a.quick,
        sdp_tol: a.inject_sdp_tol,
    };
    let ids: Vec<usize> = if a.only.is_empty() {
        (1..=CRITERIA).collect()
    } else {
        a.only.clone()
    };
    let mut results = Vec::with_capacity(ids.len());
    for id in ids {
        let r = acceptance::run(id, &cfg);
        eprintln!("{}", acceptance::format_line(&r));
        results.push(r);
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let total = results.len();
    eprintln!("{passed}/{total} criteria passed");
    if a.out.out.is_some() {
        run.emit_json(
            &SelftestReport {
                quick: a.quick,
                injected_sdp_tol: a.inject_sdp_tol,
                passed,
                total,
                criteria: results,
            },
            a.out.out.as_deref(),
        )?;
    }
    Ok(if passed == total { Verdict::Definitive } else { Verdict::Failed })
}
