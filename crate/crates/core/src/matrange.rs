//! Matrix ranges, UCP-map existence and order-equivalence tests.
//!
//! A source tuple is first split along its joint block structure, so that
//! the generated C*-algebra sits inside ⊕_b M_{m_b}. UCP maps on the
//! operator system extend to this block algebra (the targets are matrix
//! algebras), so every level-n question becomes a semidefinite program
//! over one Choi matrix per block, with Σ_b Φ_b(I_b) = I.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cpmaps::ChoiMap;
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigen, kron, lambda_max, ComplexMatrix, C64};
use crate::sdp::{self, Constraint, SdpProblem, SdpResult, SdpStatus, SdpSummary};
use crate::tuples::OperatorTuple;

/// Relative cutoff for linear dependencies among generators.
const DEPENDENCY_CUTOFF: f64 = 1e-10;

/// Source operator system: refined block structure plus an orthonormal
/// Hermitian basis of span{I, Re s_i, Im s_i}.
#[derive(Clone, Debug)]
pub struct SourceSystem {
    tuple: OperatorTuple,
    /// Orthonormal basis K_r = Σ_k coeffs[r][k] H_k, per block, where
    /// H_0 = I, H_{2i+1} = Re s_i, H_{2i+2} = Im s_i.
    pub(crate) basis: Vec<Vec<ComplexMatrix>>,
    coeffs: Vec<Vec<f64>>,
    /// Real combinations of the generators that vanish.
    null: Vec<Vec<f64>>,
}

impl SourceSystem {
    pub fn new(s: &OperatorTuple) -> Result<Self> {
        let tuple = s.refine_blocks(1e-14);
        let d = tuple.d();
        let blocks = tuple.blocks();
        let g = 2 * d + 1;
        let mut generators: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(g);
        generators.push(blocks.iter().map(|b| ComplexMatrix::identity(b[0].dim())).collect());
        for i in 0..d {
            generators.push(blocks.iter().map(|b| b[i].hermitian_part()).collect());
            generators.push(blocks.iter().map(|b| b[i].skew_part()).collect());
        }
        let mut gram = ComplexMatrix::zeros(g);
        for k in 0..g {
            for l in k..g {
                let v: f64 = generators[k]
                    .iter()
                    .zip(&generators[l])
                    .map(|(a, b)| a.real_inner(b))
                    .sum();
                gram.set(k, l, C64::new(v, 0.0));
                gram.set(l, k, C64::new(v, 0.0));
            }
        }
        let (vals, vecs) = hermitian_eigen(&gram)?;
        let top = vals.last().copied().unwrap_or(0.0).max(1e-300);
        let mut coeffs = Vec::new();
        let mut null = Vec::new();
        for (r, &lam) in vals.iter().enumerate() {
            let v: Vec<f64> = (0..g).map(|k| vecs.get(k, r).re).collect();
            if lam > DEPENDENCY_CUTOFF * top {
                coeffs.push(v.iter().map(|x| x / lam.sqrt()).collect());
            } else {
                null.push(v);
            }
        }
        let basis = coeffs
            .iter()
            .map(|c: &Vec<f64>| {
                (0..blocks.len())
                    .map(|b| {
                        let mut acc = ComplexMatrix::zeros(blocks[b][0].dim());
                        for (k, &ck) in c.iter().enumerate() {
                            if ck != 0.0 {
                                acc = &acc + &generators[k][b].scale_real(ck);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(SourceSystem {
            tuple,
            basis,
            coeffs,
            null,
        })
    }

    pub fn tuple(&self) -> &OperatorTuple {
        &self.tuple
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.tuple.block_dims()
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Generator images I, Re T_i, Im T_i of a target tuple.
    fn target_generators(&self, targets: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let n = targets[0].dim();
        let mut out = vec![ComplexMatrix::identity(n)];
        for t in targets {
            out.push(t.hermitian_part());
            out.push(t.skew_part());
        }
        out
    }

    fn combine(weights: &[f64], mats: &[ComplexMatrix]) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(mats[0].dim());
        for (w, m) in weights.iter().zip(mats) {
            if *w != 0.0 {
                acc = &acc + &m.scale_real(*w);
            }
        }
        acc
    }

    /// Largest violation of a linear relation among the generators by
    /// the targets.
    fn linear_inconsistency(&self, targets: &[ComplexMatrix]) -> f64 {
        let tg = self.target_generators(targets);
        self.null
            .iter()
            .map(|v| Self::combine(v, &tg).max_abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn basis_targets(&self, targets: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let tg = self.target_generators(targets);
        self.coeffs.iter().map(|c| Self::combine(c, &tg)).collect()
    }
}

/// UCP map from the block algebra ⊕ M_{m_b} into M_n.
#[derive(Clone, Debug)]
pub struct BlockUcpMap {
    pub out_dim: usize,
    pub chois: Vec<ChoiMap>,
}

impl BlockUcpMap {
    pub fn apply(&self, blocks: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::zeros(self.out_dim);
        for (phi, x) in self.chois.iter().zip(blocks) {
            acc = &acc + &phi.apply(x)?;
        }
        Ok(acc)
    }

    /// (φ(s_1), …, φ(s_d)) for the system's own tuple.
    pub fn values(&self, sys: &SourceSystem) -> Result<Vec<ComplexMatrix>> {
        let t = sys.tuple();
        (0..t.d())
            .map(|i| {
                let parts: Vec<ComplexMatrix> = t.blocks().iter().map(|b| b[i].clone()).collect();
                self.apply(&parts)
            })
            .collect()
    }

    /// Nearest exactly UCP map in the obvious sense: clips negative Choi
    /// eigenvalues, then conjugates by Φ(1)^{-1/2}. Used to stop solver
    /// residuals from pushing values out of the range.
    pub fn unitalized(&self) -> Result<Self> {
        let n = self.out_dim;
        let mut clipped = Vec::with_capacity(self.chois.len());
        for phi in &self.chois {
            let (vals, vecs) = hermitian_eigen(&phi.choi().hermitian_part())?;
            let dim = vals.len();
            let c = ComplexMatrix::from_fn(dim, |i, j| {
                (0..dim)
                    .filter(|&e| vals[e] > 0.0)
                    .map(|e| vecs.get(i, e) * vecs.get(j, e).conj() * vals[e])
                    .sum()
            });
            clipped.push(ChoiMap::from_choi(phi.in_dim(), n, c)?);
        }
        let ids: Vec<ComplexMatrix> = clipped.iter().map(|p| ComplexMatrix::identity(p.in_dim())).collect();
        let unit = BlockUcpMap { out_dim: n, chois: clipped.clone() }.apply(&ids)?;
        let (vals, vecs) = hermitian_eigen(&unit.hermitian_part())?;
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(Error::NumericalFailure("map is far from unital".into()));
        }
        let root = ComplexMatrix::from_fn(n, |i, j| {
            (0..n).map(|e| vecs.get(i, e) * vecs.get(j, e).conj() / vals[e].sqrt()).sum()
        });
        let chois = clipped
            .iter()
            .map(|phi| {
                let w = kron(&ComplexMatrix::identity(phi.in_dim()), &root)?;
                ChoiMap::from_choi(phi.in_dim(), n, phi.choi().conjugate_by(&w).hermitian_part())
            })
            .collect::<Result<_>>()?;
        Ok(BlockUcpMap { out_dim: n, chois })
    }

    pub(crate) fn from_sdp(sys: &SourceSystem, n: usize, primal: &[ComplexMatrix]) -> Result<Self> {
        let chois = sys
            .block_dims()
            .iter()
            .zip(primal)
            .map(|(&m, c)| ChoiMap::from_choi(m, n, c.clone()))
            .collect::<Result<_>>()?;
        Ok(BlockUcpMap { out_dim: n, chois })
    }
}

/// Coefficients a, b with Re Φ_b(X)_{kl} = <a, C_b>, Im Φ_b(X)_{kl} = <b, C_b>.
fn entry_functionals(x: &ComplexMatrix, n: usize, k: usize, l: usize) -> (ComplexMatrix, ComplexMatrix) {
    let m = kron(&x.transpose(), &ComplexMatrix::unit(n, l, k)).expect("small sizes");
    (m.hermitian_part(), m.skew_part())
}

/// Which output entries a family of constraints pins down.
#[derive(Clone, Copy)]
pub(crate) enum Entries {
    All,
    /// Only the leading `k × k` corner.
    Corner(usize),
    /// Everything outside the leading `k × k` corner.
    Border(usize),
}

impl Entries {
    fn covers(self, k: usize, l: usize) -> bool {
        match self {
            Entries::All => true,
            Entries::Corner(c) => k < c && l < c,
            Entries::Border(c) => k >= c || l >= c,
        }
    }
}

/// Empty level-n problem: one Choi block per source block, unital.
pub(crate) fn level_problem(sys: &SourceSystem, n: usize) -> SdpProblem {
    let dims = sys.block_dims();
    let mut p = SdpProblem::new(dims.iter().map(|m| m * n).collect());
    let id: Vec<ComplexMatrix> = dims.iter().map(|&m| ComplexMatrix::identity(m)).collect();
    push_value_constraints(&mut p, &id, &ComplexMatrix::identity(n), n, Entries::All);
    p
}

pub(crate) fn push_value_constraints(
    p: &mut SdpProblem,
    x_blocks: &[ComplexMatrix],
    target: &ComplexMatrix,
    n: usize,
    entries: Entries,
) {
    for k in 0..n {
        for l in k..n {
            if !entries.covers(k, l) {
                continue;
            }
            let mut re_terms = Vec::new();
            let mut im_terms = Vec::new();
            for (b, x) in x_blocks.iter().enumerate() {
                if x.max_abs() == 0.0 {
                    continue;
                }
                let (a, c) = entry_functionals(x, n, k, l);
                re_terms.push((b, a));
                if k != l {
                    im_terms.push((b, c));
                }
            }
            let t = target.get(k, l);
            p.push(Constraint::new(re_terms, t.re));
            if k != l {
                p.push(Constraint::new(im_terms, t.im));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Inconclusive,
}

/// Result of a UCP-existence test.
#[derive(Clone, Debug)]
pub struct UcpOutcome {
    pub verdict: Feasibility,
    pub level: usize,
    pub block_dims: Vec<usize>,
    /// Violation of a linear relation of the source by the targets; a
    /// positive value beyond tolerance decides infeasibility directly.
    pub linear_inconsistency: f64,
    pub sdp: Option<SdpResult>,
    pub map: Option<BlockUcpMap>,
    pub tol: f64,
}

impl UcpOutcome {
    pub fn summary(&self) -> UcpSummary {
        UcpSummary {
            verdict: self.verdict,
            level: self.level,
            blocks: self.block_dims.len(),
            linear_inconsistency: self.linear_inconsistency,
            sdp: self.sdp.as_ref().map(|r| r.summary(self.tol)),
            tol: self.tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UcpSummary {
    pub verdict: Feasibility,
    pub level: usize,
    pub blocks: usize,
    pub linear_inconsistency: f64,
    pub sdp: Option<SdpSummary>,
    pub tol: f64,
}

/// Is there a UCP map on S(s) with s_i ↦ targets_i?
pub fn ucp_exists(s: &OperatorTuple, targets: &[ComplexMatrix], tol: f64) -> Result<UcpOutcome> {
    let sys = SourceSystem::new(s)?;
    ucp_exists_in(&sys, targets, tol)
}

pub fn ucp_exists_in(sys: &SourceSystem, targets: &[ComplexMatrix], tol: f64) -> Result<UcpOutcome> {
    if targets.len() != sys.tuple().d() {
        return Err(Error::dimension(format!(
            "{} targets for a {}-tuple",
            targets.len(),
            sys.tuple().d()
        )));
    }
    let n = targets[0].dim();
    if n == 0 || targets.iter().any(|t| t.dim() != n) {
        return Err(Error::dimension("targets must share one positive size"));
    }
    let scale = targets.iter().map(|t| t.max_abs()).fold(1.0, f64::max);
    let lin = sys.linear_inconsistency(targets);
    let block_dims = sys.block_dims();
    if lin > 1e-9 * scale {
        return Ok(UcpOutcome {
            verdict: Feasibility::Infeasible,
            level: n,
            block_dims,
            linear_inconsistency: lin,
            sdp: None,
            map: None,
            tol,
        });
    }
    let mut p = SdpProblem::new(block_dims.iter().map(|m| m * n).collect());
    for (k, t) in sys.basis.iter().zip(sys.basis_targets(targets)) {
        push_value_constraints(&mut p, k, &t, n, Entries::All);
    }
    let r = sdp::feasibility_with(&p, tol)?;
    let (verdict, map) = match r.status {
        SdpStatus::Optimal => (
            Feasibility::Feasible,
            Some(BlockUcpMap::from_sdp(sys, n, &r.primal)?),
        ),
        SdpStatus::Infeasible => (Feasibility::Infeasible, None),
        _ => (Feasibility::Inconclusive, None),
    };
    Ok(UcpOutcome {
        verdict,
        level: n,
        block_dims,
        linear_inconsistency: lin,
        sdp: Some(r),
        map,
        tol,
    })
}

/// A ∈ W_n(s)?
pub fn membership(s: &OperatorTuple, a: &[ComplexMatrix], tol: f64) -> Result<UcpOutcome> {
    ucp_exists(s, a, tol)
}

/// Support value with its certified bracket.
#[derive(Clone, Debug)]
pub struct SupportValue {
    pub value: f64,
    /// Primal objective of a feasible UCP map.
    pub lower: f64,
    /// Dual objective (upper bound).
    pub upper: f64,
    pub status: SdpStatus,
    pub map: Option<BlockUcpMap>,
    pub sdp: SdpResult,
}

/// max over UCP φ: S(s) → M_n of Re Σ_i tr(B_i* φ(s_i)).
pub fn support(s: &OperatorTuple, n: usize, b: &[ComplexMatrix], tol: f64) -> Result<SupportValue> {
    let sys = SourceSystem::new(s)?;
    support_in(&sys, n, b, tol)
}

pub fn support_in(sys: &SourceSystem, n: usize, b: &[ComplexMatrix], tol: f64) -> Result<SupportValue> {
    let t = sys.tuple();
    if b.len() != t.d() || b.iter().any(|m| m.dim() != n) {
        return Err(Error::dimension("direction tuple must hold d matrices of size n"));
    }
    let mut p = level_problem(sys, n);
    p.objective = linear_objective(sys, n, b)?;
    let r = sdp::solve(&p, tol)?;
    let map = if r.status == SdpStatus::Optimal {
        Some(BlockUcpMap::from_sdp(sys, n, &r.primal)?)
    } else {
        None
    };
    Ok(SupportValue {
        value: 0.5 * (r.primal_objective + r.dual_objective),
        lower: r.primal_objective,
        upper: r.dual_objective,
        status: r.status,
        map,
        sdp: r,
    })
}

/// Block objectives for Re Σ_i tr(B_i* Φ(s_i)).
pub(crate) fn linear_objective(sys: &SourceSystem, n: usize, b: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    sys.tuple()
        .blocks()
        .iter()
        .map(|block| {
            let m = block[0].dim();
            let mut acc = ComplexMatrix::zeros(m * n);
            for (si, bi) in block.iter().zip(b) {
                if bi.max_abs() == 0.0 {
                    continue;
                }
                acc = &acc + &kron(&si.transpose(), &bi.adjoint())?;
            }
            Ok(acc.hermitian_part())
        })
        .collect()
}

/// Level-1 support h(c) = λ_max(Re Σ c̄_i s_i), blockwise.
pub fn level_one_support(s: &OperatorTuple, c: &[C64]) -> Result<f64> {
    let conj: Vec<C64> = c.iter().map(|z| z.conj()).collect();
    let mut best = f64::NEG_INFINITY;
    for m in s.combination(&conj) {
        best = best.max(lambda_max(&m.hermitian_part())?);
    }
    Ok(best)
}

/// First primes, for Halton bases.
const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Unit directions c ∈ C^d. Self-adjoint pairs get an exact uniform fan
/// on the circle; otherwise a Cranley–Patterson-shifted Halton sequence
/// is pushed through the normal quantile and normalized (uniform on the
/// sphere of R^d for self-adjoint tuples, of R^{2d} otherwise).
pub fn direction_fan(d: usize, count: usize, self_adjoint: bool, seed: u64) -> Vec<Vec<C64>> {
    use rand::Rng;
    if self_adjoint && d == 2 {
        return (0..count)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
                vec![C64::new(a.cos(), 0.0), C64::new(a.sin(), 0.0)]
            })
            .collect();
    }
    if self_adjoint && d == 1 {
        return (0..count)
            .map(|j| vec![C64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)])
            .collect();
    }
    let real_dim = if self_adjoint { d } else { 2 * d };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..real_dim).map(|_| rng.random::<f64>()).collect();
    let normal = Normal::new(0.0, 1.0).expect("valid parameters");
    (0..count)
        .map(|j| {
            let x: Vec<f64> = (0..real_dim)
                .map(|k| {
                    let u = (radical_inverse(j as u64 + 1, PRIMES[k % PRIMES.len()]) + shift[k]).fract();
                    normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
                })
                .collect();
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            (0..d)
                .map(|i| {
                    if self_adjoint {
                        C64::new(x[i] / nrm, 0.0)
                    } else {
                        C64::new(x[2 * i] / nrm, x[2 * i + 1] / nrm)
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryPoint {
    pub direction: Vec<C64>,
    pub support: f64,
}

/// Level-1 support values on a direction fan (eigenvalues only).
pub fn numerical_range_boundary(
    s: &OperatorTuple,
    directions: usize,
    seed: u64,
) -> Result<Vec<BoundaryPoint>> {
    if directions < 3 {
        return Err(Error::precondition("need at least 3 directions"));
    }
    let fan = direction_fan(s.d(), directions, s.is_self_adjoint(1e-12), seed);
    fan.into_par_iter()
        .map(|c| {
            let support = level_one_support(s, &c)?;
            Ok(BoundaryPoint {
                direction: c,
                support,
            })
        })
        .collect()
}

/// CSV rows `index, c1_re, c1_im, …, support`.
pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    let d = points.first().map(|p| p.direction.len()).unwrap_or(0);
    let mut out = String::from("index");
    for i in 1..=d {
        out.push_str(&format!(",c{i}_re,c{i}_im"));
    }
    out.push_str(",support\n");
    for (j, p) in points.iter().enumerate() {
        out.push_str(&j.to_string());
        for z in &p.direction {
            out.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
        }
        out.push_str(&format!(",{:.17e}\n", p.support));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivalenceVerdict {
    Equivalent,
    SToROnly,
    RToSOnly,
    Neither,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub verdict: EquivalenceVerdict,
    /// "level-1, up to direction-fan resolution" or "complete".
    pub qualifier: String,
    /// Set for complete tests of unitary tuples.
    pub star_isomorphic: Option<bool>,
    /// max_c h_r(c) − h_s(c) (positive means W_1(r) ⊄ W_1(s)).
    pub max_r_over_s: Option<f64>,
    pub max_s_over_r: Option<f64>,
    pub directions: Option<usize>,
    pub seed: Option<u64>,
    pub tol: f64,
    pub s_to_r: Option<UcpSummary>,
    pub r_to_s: Option<UcpSummary>,
}

fn combine_verdict(s_to_r: Option<bool>, r_to_s: Option<bool>) -> EquivalenceVerdict {
    match (s_to_r, r_to_s) {
        (Some(true), Some(true)) => EquivalenceVerdict::Equivalent,
        (Some(true), Some(false)) => EquivalenceVerdict::SToROnly,
        (Some(false), Some(true)) => EquivalenceVerdict::RToSOnly,
        (Some(false), Some(false)) => EquivalenceVerdict::Neither,
        _ => EquivalenceVerdict::Inconclusive,
    }
}

/// Compares level-1 support functions on a shared direction fan.
/// A UCP map s → r exists at level 1 iff h_r ≤ h_s everywhere.
pub fn one_order_equivalent(
    s: &OperatorTuple,
    r: &OperatorTuple,
    directions: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivalenceReport> {
    if s.d() != r.d() {
        return Err(Error::dimension("tuples must have the same length"));
    }
    let sa = s.is_self_adjoint(1e-12) && r.is_self_adjoint(1e-12);
    let fan = direction_fan(s.d(), directions, sa, seed);
    let diffs: Vec<(f64, f64)> = fan
        .par_iter()
        .map(|c| Ok((level_one_support(s, c)?, level_one_support(r, c)?)))
        .collect::<Result<_>>()?;
    let r_over_s = diffs.iter().map(|(hs, hr)| hr - hs).fold(f64::NEG_INFINITY, f64::max);
    let s_over_r = diffs.iter().map(|(hs, hr)| hs - hr).fold(f64::NEG_INFINITY, f64::max);
    Ok(EquivalenceReport {
        verdict: combine_verdict(Some(r_over_s <= tol), Some(s_over_r <= tol)),
        qualifier: "level-1, up to direction-fan resolution".into(),
        star_isomorphic: None,
        max_r_over_s: Some(r_over_s),
        max_s_over_r: Some(s_over_r),
        directions: Some(directions),
        seed: Some(seed),
        tol,
        s_to_r: None,
        r_to_s: None,
    })
}

/// Two-way UCP existence on the generators.
pub fn completely_order_equivalent(
    s: &OperatorTuple,
    r: &OperatorTuple,
    tol: f64,
) -> Result<EquivalenceReport> {
    if s.d() != r.d() {
        return Err(Error::dimension("tuples must have the same length"));
    }
    let (fwd, bwd) = rayon::join(
        || ucp_exists(s, &r.matrices(), tol),
        || ucp_exists(r, &s.matrices(), tol),
    );
    let (fwd, bwd) = (fwd?, bwd?);
    let to_bool = |v: Feasibility| match v {
        Feasibility::Feasible => Some(true),
        Feasibility::Infeasible => Some(false),
        Feasibility::Inconclusive => None,
    };
    let verdict = combine_verdict(to_bool(fwd.verdict), to_bool(bwd.verdict));
    let unitary = s.unitarity_defect() < 1e-9 && r.unitarity_defect() < 1e-9;
    let star_isomorphic = (verdict == EquivalenceVerdict::Equivalent && unitary).then_some(true);
    Ok(EquivalenceReport {
        verdict,
        qualifier: "complete".into(),
        star_isomorphic,
        max_r_over_s: None,
        max_s_over_r: None,
        directions: None,
        seed: None,
        tol,
        s_to_r: Some(fwd.summary()),
        r_to_s: Some(bwd.summary()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelLinkReport {
    pub level: usize,
    pub directions: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_deviation: f64,
    /// (level-1 value, level-N value) per direction.
    pub values: Vec<(f64, f64)>,
}

/// max_c |h_{W_1}(c) − h_{W_N}(c·e_1e_1*)|.
pub fn level_link_check(
    s: &OperatorTuple,
    level: usize,
    directions: usize,
    seed: u64,
    tol: f64,
) -> Result<LevelLinkReport> {
    if level == 0 {
        return Err(Error::precondition("level must be at least 1"));
    }
    let fan = direction_fan(s.d(), directions, s.is_self_adjoint(1e-12), seed);
    let sys = SourceSystem::new(s)?;
    let values: Vec<(f64, f64)> = fan
        .par_iter()
        .map(|c| {
            let h1 = level_one_support(s, c)?;
            if level == 1 {
                return Ok((h1, h1));
            }
            let b: Vec<ComplexMatrix> = c
                .iter()
                .map(|&ci| ComplexMatrix::unit(level, 0, 0).scale(ci))
                .collect();
            let v = support_in(&sys, level, &b, tol)?;
            if v.status != SdpStatus::Optimal {
                return Err(Error::NumericalFailure(format!(
                    "level-{level} support solve ended {:?}: {}",
                    v.status, v.sdp.diagnostics
                )));
            }
            Ok((h1, v.value))
        })
        .collect::<Result<_>>()?;
    let max_deviation = values.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(LevelLinkReport {
        level,
        directions,
        seed,
        tol,
        max_deviation,
        values,
    })
}

/// Random unit vector in C^n.
pub(crate) fn random_unit_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<C64> {
    use rand_distr::{Distribution, StandardNormal};
    let v = DVector::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
    });
    let nrm = v.norm();
    v / C64::new(nrm, 0.0)
}
