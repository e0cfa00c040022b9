//! Boundary-representation recognition and one-step dilation searches.
//!
//! A UCP map φ into M_k is maximal when every UCP Ψ into M_{k+1} whose
//! top-left corner is φ splits as φ ⊕ (something). The coupling of a
//! direction B is the largest value of Re Σ_i tr(B_i* Ψ(s_i)) over such Ψ,
//! where B only touches the new row and column. Zero for every B is the
//! maximality condition; a positive value exhibits a nontrivial dilation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrange::{
    linear_objective, push_value_constraints, random_unit_vector, BlockUcpMap,
    Entries, SourceSystem,
};
use crate::numerics::{commutant_dimension, hermitian_eigen, ComplexMatrix, C64, ZERO};
use crate::sdp::{self, Face, SdpProblem, SdpResult, SdpStatus};
use crate::tuples::{OperatorTuple, RationalAngle};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_DIRECTIONS: usize = 64;
/// Solver tolerance used for the coupling programs.
pub const SDP_TOL: f64 = 1e-9;

/// Outcome of the three checks behind `is_boundary_restriction`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryCheck {
    /// Must equal the denominator of the angle.
    pub level: usize,
    pub unitarity_defect: f64,
    pub commutation_residual: f64,
    pub commutant_dimension: usize,
    pub boundary: bool,
}

/// Unitary pair at level n, uv = q vu, irreducible. Pairs of any other
/// size are reported as not boundary.
pub fn boundary_check(values: &[ComplexMatrix], angle: RationalAngle) -> Result<BoundaryCheck> {
    if values.len() != 2 {
        return Err(Error::precondition("boundary check needs a pair"));
    }
    let n = angle.n() as usize;
    let (u, v) = (&values[0], &values[1]);
    if u.dim() != v.dim() {
        return Err(Error::dimension("pair entries differ in size"));
    }
    let unitarity_defect = u.unitarity_defect().max(v.unitarity_defect());
    let uv = u * v;
    let vu = v * u;
    let commutation_residual = uv.max_abs_diff(&vu.scale(angle.q()));
    let commutant_dimension = commutant_dimension(values)?;
    Ok(BoundaryCheck {
        unitarity_defect,
        commutation_residual,
        commutant_dimension,
        level: u.dim(),
        boundary: u.dim() == n
            && unitarity_defect < 1e-9
            && commutation_residual < 1e-9
            && commutant_dimension == 1,
    })
}

pub fn is_boundary_restriction(values: &[ComplexMatrix], angle: RationalAngle) -> Result<bool> {
    Ok(boundary_check(values, angle)?.boundary)
}

/// One direction's coupling program.
#[derive(Clone, Debug)]
pub struct DirectionCoupling {
    /// Per generator: the (k+1)×(k+1) direction, zero on the k×k corner
    /// and at (k, k).
    pub direction: Vec<ComplexMatrix>,
    /// Primal value: attained by `dilation`.
    pub lower: f64,
    /// Dual value: no dilation does better.
    pub upper: f64,
    pub status: SdpStatus,
    pub dilation: Option<BlockUcpMap>,
    pub diagnostics: String,
}

#[derive(Clone, Debug)]
pub struct CouplingResult {
    pub level: usize,
    pub directions: usize,
    pub seed: u64,
    /// max over directions of the certified upper bound.
    pub coupling: f64,
    /// max over directions of the attained value.
    pub lower: f64,
    /// Distance between the given values and their projection onto the
    /// minimal face, on the operator-system basis.
    pub snap: f64,
    /// Index of the direction attaining `lower`.
    pub best: usize,
    pub per_direction: Vec<DirectionCoupling>,
}

impl CouplingResult {
    pub fn best_dilation(&self) -> Option<&BlockUcpMap> {
        self.per_direction[self.best].dilation.as_ref()
    }
}

/// Random unit-Frobenius directions on the new row and column.
fn border_directions(d: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<ComplexMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = random_unit_vector(2 * d * k, &mut rng);
            (0..d)
                .map(|i| {
                    let mut b = ComplexMatrix::zeros(k + 1);
                    for r in 0..k {
                        b.set(r, k, v[2 * i * k + r]);
                        b.set(k, r, v[(2 * i + 1) * k + r]);
                    }
                    b
                })
                .collect()
        })
        .collect()
}

/// Fixed part of the coupling program: unital Ψ into M_{k+1} whose corner
/// takes the given values on the orthonormal basis of the operator system.
fn fiber_problem(sys: &SourceSystem, k: usize, corner_targets: &[ComplexMatrix]) -> SdpProblem {
    let mut p = SdpProblem::new(sys.block_dims().iter().map(|m| m * (k + 1)).collect());
    let id: Vec<ComplexMatrix> = sys.block_dims().iter().map(|&m| ComplexMatrix::identity(m)).collect();
    push_value_constraints(&mut p, &id, &ComplexMatrix::identity(k + 1), k + 1, Entries::Border(k));
    for (basis, target) in sys.basis.iter().zip(corner_targets) {
        let mut padded = ComplexMatrix::zeros(k + 1);
        for r in 0..k {
            for c in 0..k {
                padded.set(r, c, target.get(r, c));
            }
        }
        push_value_constraints(&mut p, basis, &padded, k + 1, Entries::Corner(k));
    }
    p
}

/// Relative eigenvalue cutoff for the range of the corner fiber.
const FACE_CUTOFF: f64 = 1e-6;

/// Relative singular-value cutoff for dependent coupling constraints.
const ROW_CUTOFF: f64 = 1e-9;

/// Accepted residual of a stalled fiber solve.
const FIBER_SLACK: f64 = 1e-7;

/// A stalled solve whose last iterate is optimal to within FIBER_SLACK
/// on every measure.
fn near_optimal(r: &SdpResult) -> bool {
    r.status == SdpStatus::NumericalFailure
        && r.primal_residual <= FIBER_SLACK
        && r.dual_residual <= FIBER_SLACK
        && r.gap <= FIBER_SLACK
        && r.min_primal_eigenvalue >= -FIBER_SLACK
}

/// Every dilation's Choi blocks live on range(Â_b) ⊕ (new output row),
/// where Â is a relative-interior point of the level-k fiber over φ. The
/// interior-point solver returns such a point for a zero objective.
/// Restricting to that face restores strict feasibility, without which
/// the coupling programs stall with τ → 0.
///
/// Also returns the fiber point projected onto the face. On the face the
/// corner equations are overdetermined, so they must be posed with values
/// the face can reproduce exactly.
fn corner_face(sys: &SourceSystem, values: &[ComplexMatrix], sdp_tol: f64) -> Result<(Face, BlockUcpMap)> {
    let k = values[0].dim();
    let dims = sys.block_dims();
    let mut p = SdpProblem::new(dims.iter().map(|m| m * k).collect());
    for (basis, target) in sys.basis.iter().zip(sys.basis_targets(values)) {
        push_value_constraints(&mut p, basis, &target, k, Entries::All);
    }
    let r = sdp::solve(&p, sdp_tol)?;
    // Fibers over boundary values have empty interior and the solver can
    // stall near a good point; any near-feasible iterate will do, the snap
    // check downstream catches bad ones.
    let usable = r.status == SdpStatus::Optimal
        || (r.status == SdpStatus::NumericalFailure
            && r.primal_residual <= FIBER_SLACK
            && r.min_primal_eigenvalue >= -FIBER_SLACK);
    if !usable {
        return Err(Error::NumericalFailure(format!(
            "values are not a UCP image at level {k}: {:?} ({})",
            r.status, r.diagnostics
        )));
    }
    let eigs = r.primal.iter().map(hermitian_eigen).collect::<Result<Vec<_>>>()?;
    let top = eigs
        .iter()
        .flat_map(|(v, _)| v.iter().copied())
        .fold(0.0, f64::max);
    let mut bases = Vec::with_capacity(dims.len());
    let mut face_dims = Vec::with_capacity(dims.len());
    let mut snapped = Vec::with_capacity(dims.len());
    for (&m, (vals, vecs)) in dims.iter().zip(&eigs) {
        let big = m * (k + 1);
        // Eigenvectors largest first; corner index i·k + o sits at i·(k+1) + o.
        let order: Vec<usize> = (0..m * k).rev().collect();
        let kept = order.iter().filter(|&&c| vals[c] > FACE_CUTOFF * top).count();
        let mut proj = ComplexMatrix::zeros(m * k);
        for &c in &order[..kept] {
            proj = &proj + &ComplexMatrix::from_fn(m * k, |i, j| vecs.get(i, c) * vecs.get(j, c).conj() * vals[c]);
        }
        snapped.push(proj);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(big);
        let pad = |c: usize| -> Vec<C64> {
            let mut v = vec![ZERO; big];
            for i in 0..m {
                for o in 0..k {
                    v[i * (k + 1) + o] = vecs.get(i * k + o, c);
                }
            }
            v
        };
        for &c in &order[..kept] {
            cols.push(pad(c));
        }
        for i in 0..m {
            let mut v = vec![ZERO; big];
            v[i * (k + 1) + k] = C64::new(1.0, 0.0);
            cols.push(v);
        }
        for &c in &order[kept..] {
            cols.push(pad(c));
        }
        bases.push(ComplexMatrix::from_fn(big, |i, j| cols[j][i]));
        face_dims.push(kept + m);
    }
    Ok((
        Face {
            bases,
            dims: face_dims,
        },
        BlockUcpMap::from_sdp(sys, k, &snapped)?,
    ))
}

pub fn dilation_coupling_max(
    s: &OperatorTuple,
    values: &[ComplexMatrix],
    directions: usize,
    seed: u64,
) -> Result<CouplingResult> {
    let sys = SourceSystem::new(s)?;
    dilation_coupling_in(&sys, values, directions, seed, SDP_TOL)
}

pub fn dilation_coupling_in(
    sys: &SourceSystem,
    values: &[ComplexMatrix],
    directions: usize,
    seed: u64,
    sdp_tol: f64,
) -> Result<CouplingResult> {
    let d = sys.tuple().d();
    if values.len() != d {
        return Err(Error::dimension(format!("{} values for a {d}-tuple", values.len())));
    }
    let k = values[0].dim();
    if k == 0 || values.iter().any(|v| v.dim() != k) {
        return Err(Error::dimension("values must share one positive size"));
    }
    if directions == 0 {
        return Err(Error::precondition("at least one direction"));
    }
    let (face, snapped) = corner_face(sys, values, sdp_tol)?;
    let corner_targets: Vec<ComplexMatrix> = sys
        .basis
        .iter()
        .map(|kb| snapped.apply(kb))
        .collect::<Result<_>>()?;
    let snap = corner_targets
        .iter()
        .zip(sys.basis_targets(values))
        .map(|(a, b)| a.max_abs_diff(&b))
        .fold(0.0, f64::max);
    if snap > 1e-6 {
        return Err(Error::NumericalFailure(format!(
            "values sit {snap:.2e} away from the computed face"
        )));
    }
    let (base, dropped) = fiber_problem(sys, k, &corner_targets).restrict_to_face(&face)?;
    if dropped > 1e-7 {
        return Err(Error::NumericalFailure(format!(
            "corner face drops a constraint with rhs {dropped:.2e}"
        )));
    }
    let (base, inconsistency) = base.orthonormalize_rows(ROW_CUTOFF)?;
    if inconsistency > 1e-7 {
        return Err(Error::NumericalFailure(format!(
            "corner equations inconsistent on the face by {inconsistency:.2e}"
        )));
    }
    let fan = border_directions(d, k, directions, seed);
    let per_direction: Vec<DirectionCoupling> = fan
        .into_par_iter()
        .map(|b| {
            let mut p = base.clone();
            p.objective = linear_objective(sys, k + 1, &b)?
                .iter()
                .zip(&face.bases)
                .zip(&face.dims)
                .map(|((o, w), &r)| o.conjugate_by(w).principal(&(0..r).collect::<Vec<_>>()).hermitian_part())
                .collect();
            let mut r = sdp::solve(&p, sdp_tol)?;
            if near_optimal(&r) {
                r.status = SdpStatus::Optimal;
            }
            let dilation = if r.status == SdpStatus::Optimal {
                Some(BlockUcpMap::from_sdp(sys, k + 1, &face.lift(&r.primal))?)
            } else {
                None
            };
            Ok(DirectionCoupling {
                direction: b,
                lower: r.primal_objective,
                upper: r.dual_objective,
                status: r.status,
                dilation,
                diagnostics: r.diagnostics.clone(),
            })
        })
        .collect::<Result<_>>()?;
    if let Some(bad) = per_direction.iter().find(|c| c.status != SdpStatus::Optimal) {
        return Err(Error::NumericalFailure(format!(
            "coupling program at level {} ended {:?}: {}",
            k + 1,
            bad.status,
            bad.diagnostics
        )));
    }
    let coupling = per_direction.iter().map(|c| c.upper).fold(f64::NEG_INFINITY, f64::max);
    let mut best = 0;
    for (i, c) in per_direction.iter().enumerate() {
        if c.lower > per_direction[best].lower {
            best = i;
        }
    }
    Ok(CouplingResult {
        level: k,
        directions,
        seed,
        coupling,
        lower: per_direction[best].lower,
        snap,
        best,
        per_direction,
    })
}

/// Vector state exposed by a seeded random direction: the top eigenvector
/// of Re Σ c̄_i s_i on the block where it is largest. Returns 1×1 values.
pub fn exposed_state(s: &OperatorTuple, seed: u64) -> Result<Vec<ComplexMatrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_unit_vector(s.d(), &mut rng);
    let conj: Vec<C64> = c.iter().map(|z| z.conj()).collect();
    let mut best: Option<(f64, usize, Vec<C64>)> = None;
    for (b, m) in s.combination(&conj).iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(&m.hermitian_part())?;
        let top = vals.len() - 1;
        if best.as_ref().is_none_or(|(v, _, _)| vals[top] > *v) {
            best = Some((vals[top], b, (0..m.dim()).map(|i| vecs.get(i, top)).collect()));
        }
    }
    let (_, b, h) = best.ok_or_else(|| Error::precondition("empty tuple"))?;
    Ok(s.blocks()[b]
        .iter()
        .map(|si| {
            let mut acc = ZERO;
            for (r, hr) in h.iter().enumerate() {
                for (c, hc) in h.iter().enumerate() {
                    acc += hr.conj() * si.get(r, c) * hc;
                }
            }
            ComplexMatrix::diag(&[acc])
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainStop {
    /// No dilation found above tolerance at the last level.
    NoDilation,
    MaxSteps,
    /// Coupling bracket straddles the tolerance.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub level: usize,
    pub coupling: f64,
    pub lower: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub start_level: usize,
    pub final_level: usize,
    pub stop: ChainStop,
    pub steps: Vec<ChainStep>,
    pub directions: usize,
    pub seed: u64,
    pub tol: f64,
    /// Values at the final level.
    pub final_values: Vec<ComplexMatrix>,
    /// Solver diagnostics when a step failed (stop is Inconclusive).
    pub failure: Option<String>,
}

/// Climb by one-step dilations while the attained coupling exceeds tol.
pub fn extreme_chain_walk(
    s: &OperatorTuple,
    start: &[ComplexMatrix],
    max_steps: usize,
    directions: usize,
    seed: u64,
    tol: f64,
) -> Result<ChainReport> {
    let sys = SourceSystem::new(s)?;
    extreme_chain_walk_in(&sys, start, max_steps, directions, seed, tol, SDP_TOL)
}

pub fn extreme_chain_walk_in(
    sys: &SourceSystem,
    start: &[ComplexMatrix],
    max_steps: usize,
    directions: usize,
    seed: u64,
    tol: f64,
    sdp_tol: f64,
) -> Result<ChainReport> {
    if start.is_empty() {
        return Err(Error::precondition("empty start values"));
    }
    let mut values = start.to_vec();
    let mut steps = Vec::new();
    let mut stop = ChainStop::MaxSteps;
    let mut failure = None;
    for step in 0..=max_steps {
        let level = values[0].dim();
        let r = match dilation_coupling_in(sys, &values, directions, seed.wrapping_add(step as u64), sdp_tol) {
            Ok(r) => r,
            Err(Error::NumericalFailure(msg)) => {
                stop = ChainStop::Inconclusive;
                failure = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        steps.push(ChainStep {
            level,
            coupling: r.coupling,
            lower: r.lower,
        });
        if r.coupling <= tol {
            stop = ChainStop::NoDilation;
            break;
        }
        if r.lower <= tol {
            stop = ChainStop::Inconclusive;
            break;
        }
        if step == max_steps {
            break;
        }
        let psi = r.best_dilation().expect("optimal directions carry a dilation");
        values = psi.unitalized()?.values(sys)?;
    }
    Ok(ChainReport {
        start_level: start[0].dim(),
        final_level: values[0].dim(),
        stop,
        steps,
        directions,
        seed,
        tol,
        final_values: values,
        failure,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BoundaryRestriction,
    Dilatable,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalReport {
    pub format: u32,
    pub level: usize,
    pub classification: Classification,
    pub boundary: Option<BoundaryCheck>,
    /// Certified upper bound on the one-step coupling.
    pub coupling: f64,
    /// Attained coupling.
    pub coupling_lower: f64,
    pub directions: usize,
    pub seed: u64,
    pub tol: f64,
    pub note: String,
}

/// Boundary check (when an angle is known) plus a coupling search.
pub fn extremal_report(
    s: &OperatorTuple,
    values: &[ComplexMatrix],
    angle: Option<RationalAngle>,
    directions: usize,
    seed: u64,
    tol: f64,
) -> Result<ExtremalReport> {
    let boundary = match angle {
        Some(a) if values.len() == 2 => Some(boundary_check(values, a)?),
        _ => None,
    };
    let r = dilation_coupling_max(s, values, directions, seed)?;
    let is_boundary = boundary.as_ref().is_some_and(|b| b.boundary);
    let (classification, note) = if is_boundary {
        (
            Classification::BoundaryRestriction,
            "unitary, q-commuting and irreducible".to_string(),
        )
    } else if r.lower > tol {
        (Classification::Dilatable, "nontrivial one-step dilation found".to_string())
    } else if r.coupling <= tol {
        (
            Classification::Inconclusive,
            "no dilation over the sampled directions; consistent with maximal".to_string(),
        )
    } else {
        (Classification::Inconclusive, "coupling bracket straddles tol".to_string())
    };
    Ok(ExtremalReport {
        format: 1,
        level: values[0].dim(),
        classification,
        boundary,
        coupling: r.coupling,
        coupling_lower: r.lower,
        directions,
        seed,
        tol,
        note,
    })
}

#[cfg(test)]
mod tests;
