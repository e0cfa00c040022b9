//! Dense semidefinite programming over complex Hermitian blocks.
//!
//! Problems are stated in primal standard form,
//!
//! ```text
//! maximize   Σ_b <O_b, X_b> + f·x
//! subject to Σ_b <A_ib, X_b> + a_i·x = b_i,   X_b ⪰ 0,   x free
//! ```
//!
//! with `<A, X> = Re tr(A X)`. Each complex block of size `n` is embedded
//! as the real symmetric block `[[Re, -Im], [Im, Re]]` of size `2n` and the
//! coefficient matrices carry a factor `1/2`, so that real and complex
//! pairings agree exactly. The real problem is solved by the homogeneous
//! self-dual method in [`ipm`].

mod ipm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lambda_max, lambda_min, ComplexMatrix, C64, ZERO};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 200;
const MIN_TOL: f64 = 1e-10;
const MAX_TOL: f64 = 1e-4;

/// One affine equality constraint.
#[derive(Clone, Debug)]
pub struct Constraint {
    /// `(block, Hermitian coefficient)`; absent blocks have coefficient 0.
    pub terms: Vec<(usize, ComplexMatrix)>,
    /// Coefficients of the free scalar variables (empty means all zero).
    pub free: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, ComplexMatrix)>, rhs: f64) -> Self {
        Constraint {
            terms,
            free: Vec::new(),
            rhs,
        }
    }

    fn free_coeff(&self, k: usize) -> f64 {
        self.free.get(k).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Constraint {
            terms: self
                .terms
                .iter()
                .map(|(b, m)| (*b, m.scale_real(factor)))
                .collect(),
            free: self.free.iter().map(|v| v * factor).collect(),
            rhs: self.rhs * factor,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    /// Hermitian objective coefficient per block (maximized).
    pub objective: Vec<ComplexMatrix>,
    pub constraints: Vec<Constraint>,
    /// Objective coefficients of the free scalar variables.
    pub free_objective: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Farkas-type infeasibility witness: `Σ y_i A_i ⪯ 0`, `Σ y_i a_i = 0`
/// on free columns and `<b, y> > 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
    pub b_dot_y: f64,
    /// Largest eigenvalue of `Σ y_i A_i` over all blocks.
    pub lambda_max: f64,
    /// Max absolute residual on the free-variable columns.
    pub free_residual: f64,
    /// Trace of every feasible point, when the identity lies in the
    /// constraint span.
    pub trace_bound: Option<f64>,
    /// `<b,y> - max(λ_max, 0)·trace_bound`; positive means certified.
    pub margin: f64,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub struct SdpResult {
    pub status: SdpStatus,
    pub primal: Vec<ComplexMatrix>,
    pub free: Vec<f64>,
    /// Dual multipliers: `Σ y_i A_i - O ⪰ 0` at optimality.
    pub dual: Vec<f64>,
    pub dual_slack: Vec<ComplexMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// `max |A(X) - b|`, recomputed from the complex data.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub min_primal_eigenvalue: f64,
    pub iterations: usize,
    /// Phase-one slack `t` (only set by [`feasibility`]).
    pub slack: Option<f64>,
    pub certificate: Option<FarkasCertificate>,
    pub diagnostics: String,
}

/// Serializable digest of an [`SdpResult`] for reports.
#[derive(Clone, Debug, Serialize)]
pub struct SdpSummary {
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub min_primal_eigenvalue: f64,
    pub slack: Option<f64>,
    pub iterations: usize,
    pub tol: f64,
    pub certificate: Option<FarkasCertificate>,
    pub diagnostics: String,
}

impl SdpResult {
    pub fn summary(&self, tol: f64) -> SdpSummary {
        SdpSummary {
            status: self.status,
            primal_objective: self.primal_objective,
            dual_objective: self.dual_objective,
            gap: self.gap,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            min_primal_eigenvalue: self.min_primal_eigenvalue,
            slack: self.slack,
            iterations: self.iterations,
            tol,
            certificate: self.certificate.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn is_infeasible(&self) -> bool {
        self.status == SdpStatus::Infeasible
    }
}

/// Face of a product of PSD cones: X_b = W_b (Z_b ⊕ 0) W_b* with W_b
/// unitary and Z_b of size `dims[b]`.
#[derive(Clone, Debug)]
pub struct Face {
    pub bases: Vec<ComplexMatrix>,
    pub dims: Vec<usize>,
}

impl Face {
    /// Full-size blocks from face variables.
    pub fn lift(&self, z: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        self.bases
            .iter()
            .zip(z)
            .map(|(w, zb)| {
                let n = w.dim();
                let padded = ComplexMatrix::from_fn(n, |i, j| {
                    if i < zb.dim() && j < zb.dim() {
                        zb.get(i, j)
                    } else {
                        ZERO
                    }
                });
                &(w * &padded) * &w.adjoint()
            })
            .collect()
    }

    fn compress(&self, b: usize, m: &ComplexMatrix) -> ComplexMatrix {
        let idx: Vec<usize> = (0..self.dims[b]).collect();
        m.conjugate_by(&self.bases[b]).principal(&idx)
    }
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        let objective = blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect();
        SdpProblem {
            blocks,
            objective,
            constraints: Vec::new(),
            free_objective: Vec::new(),
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_objective.len()
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// Checks block sizes and Hermiticity of every coefficient.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.blocks.len() {
            return Err(Error::dimension("objective block count mismatch"));
        }
        for (b, (o, &n)) in self.objective.iter().zip(&self.blocks).enumerate() {
            if o.dim() != n {
                return Err(Error::dimension(format!("objective block {b} has wrong size")));
            }
            if !o.is_hermitian(1e-12 * o.max_abs().max(1.0)) {
                return Err(Error::precondition(format!("objective block {b} not Hermitian")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.free.len() > self.n_free() {
                return Err(Error::dimension(format!("constraint {i} has too many free coefficients")));
            }
            for (b, m) in &c.terms {
                let n = *self
                    .blocks
                    .get(*b)
                    .ok_or_else(|| Error::dimension(format!("constraint {i} names block {b}")))?;
                if m.dim() != n {
                    return Err(Error::dimension(format!("constraint {i} block {b} has wrong size")));
                }
                if !m.is_hermitian(1e-12 * m.max_abs().max(1.0)) {
                    return Err(Error::precondition(format!(
                        "constraint {i} block {b} not Hermitian"
                    )));
                }
            }
        }
        let total: usize = self.blocks.iter().map(|n| n * n).sum::<usize>() + self.n_free();
        if self.constraints.len() > total * total {
            return Err(Error::precondition("more constraints than variable entries squared"));
        }
        Ok(())
    }

    /// The same problem restricted to a face. Rows that vanish on the face
    /// (relative norm below 1e-9) are dropped; the largest |rhs| among them
    /// is returned so callers can see whether the face was consistent.
    pub fn restrict_to_face(&self, face: &Face) -> Result<(SdpProblem, f64)> {
        if face.bases.len() != self.blocks.len()
            || face.bases.iter().zip(&self.blocks).any(|(w, &n)| w.dim() != n)
            || face.dims.iter().zip(&self.blocks).any(|(&r, &n)| r > n)
        {
            return Err(Error::dimension("face does not match the block structure"));
        }
        let mut out = SdpProblem::new(face.dims.clone());
        out.objective = self
            .objective
            .iter()
            .enumerate()
            .map(|(b, o)| face.compress(b, o).hermitian_part())
            .collect();
        out.free_objective = self.free_objective.clone();
        let mut dropped = 0.0f64;
        for c in &self.constraints {
            let before: f64 = c.terms.iter().map(|(_, m)| m.frobenius_norm().powi(2)).sum::<f64>()
                + c.free.iter().map(|v| v * v).sum::<f64>();
            let terms: Vec<(usize, ComplexMatrix)> = c
                .terms
                .iter()
                .map(|(b, m)| (*b, face.compress(*b, m).hermitian_part()))
                .collect();
            let after: f64 = terms.iter().map(|(_, m)| m.frobenius_norm().powi(2)).sum::<f64>()
                + c.free.iter().map(|v| v * v).sum::<f64>();
            if after.sqrt() <= 1e-9 * before.sqrt() {
                dropped = dropped.max(c.rhs.abs());
                continue;
            }
            out.push(Constraint {
                terms,
                free: c.free.clone(),
                rhs: c.rhs,
            });
        }
        Ok((out, dropped))
    }

    /// Constraint rows in orthonormal real coordinates: per block the
    /// diagonal, then √2·Re and √2·Im above it; free columns last.
    pub(crate) fn realified_rows(&self) -> DMatrix<f64> {
        let m = self.constraints.len();
        let nf = self.n_free();
        let width: usize = self.blocks.iter().map(|n| n * n).sum::<usize>() + nf;
        let offsets: Vec<usize> = self
            .blocks
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n * n;
                Some(o)
            })
            .collect();
        let mut rows = DMatrix::<f64>::zeros(m, width);
        let r2 = std::f64::consts::SQRT_2;
        for (i, c) in self.constraints.iter().enumerate() {
            for (b, a) in &c.terms {
                let n = self.blocks[*b];
                let mut col = offsets[*b];
                for p in 0..n {
                    rows[(i, col)] += a.get(p, p).re;
                    col += 1;
                    for q in p + 1..n {
                        rows[(i, col)] += r2 * a.get(p, q).re;
                        rows[(i, col + 1)] += r2 * a.get(p, q).im;
                        col += 2;
                    }
                }
            }
            for k in 0..nf {
                rows[(i, width - nf + k)] = c.free_coeff(k);
            }
        }
        rows
    }

    /// Replaces the rows by an orthonormal basis of their span, dropping
    /// directions with singular value below `rel_cutoff · σ_max`. Returns
    /// the part of the right-hand side outside the kept span (zero for a
    /// consistent system). Dual multipliers of the result are in the new
    /// coordinates; objective values are unchanged.
    pub fn orthonormalize_rows(&self, rel_cutoff: f64) -> Result<(SdpProblem, f64)> {
        let m = self.constraints.len();
        let nf = self.n_free();
        if m == 0 {
            return Ok((self.clone(), 0.0));
        }
        let rows = self.realified_rows();
        let svd = rows.svd(true, false);
        let u = svd.u.as_ref().expect("requested U");
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let b = DVector::from_iterator(m, self.constraints.iter().map(|c| c.rhs));
        let mut out = SdpProblem::new(self.blocks.clone());
        out.objective = self.objective.clone();
        out.free_objective = self.free_objective.clone();
        let mut kept_b = DVector::<f64>::zeros(m);
        for (j, &sv) in svd.singular_values.iter().enumerate() {
            if sv <= rel_cutoff * top || sv == 0.0 {
                continue;
            }
            let w: Vec<f64> = (0..m).map(|i| u[(i, j)] / sv).collect();
            let mut terms: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect();
            let mut free = vec![0.0; nf];
            let mut rhs = 0.0;
            for (c, &wi) in self.constraints.iter().zip(&w) {
                for (bk, a) in &c.terms {
                    terms[*bk] = &terms[*bk] + &a.scale_real(wi);
                }
                for (k, f) in free.iter_mut().enumerate() {
                    *f += c.free_coeff(k) * wi;
                }
                rhs += c.rhs * wi;
            }
            let uj = u.column(j);
            kept_b += &uj * uj.dot(&b);
            out.push(Constraint {
                terms: terms.into_iter().enumerate().filter(|(_, t)| t.dim() > 0).collect(),
                free,
                rhs,
            });
        }
        Ok((out, (&b - &kept_b).amax()))
    }

    /// `A(X) + a·x` for complex blocks.
    pub fn constraint_values(&self, x: &[ComplexMatrix], free: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                let mut v: f64 = c.terms.iter().map(|(b, m)| m.real_inner(&x[*b])).sum();
                for (k, f) in free.iter().enumerate() {
                    v += c.free_coeff(k) * f;
                }
                v
            })
            .collect()
    }

    /// `Σ y_i A_i` per block.
    pub fn adjoint_apply(&self, y: &[f64]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect();
        for (c, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (b, m) in &c.terms {
                out[*b] = &out[*b] + &m.scale_real(yi);
            }
        }
        out
    }

    pub fn objective_value(&self, x: &[ComplexMatrix], free: &[f64]) -> f64 {
        let mut v: f64 = self.objective.iter().zip(x).map(|(o, x)| o.real_inner(x)).sum();
        for (f, xv) in self.free_objective.iter().zip(free) {
            v += f * xv;
        }
        v
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ProblemJson {
            format: 1,
            blocks: self.blocks.clone(),
            objective: self.objective.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| {
                    let mut coefficients = vec![None; self.blocks.len()];
                    for (b, m) in &c.terms {
                        coefficients[*b] = Some(m.clone());
                    }
                    ConstraintJson {
                        coefficients,
                        rhs: c.rhs,
                        free: c.free.clone(),
                    }
                })
                .collect(),
            free_objective: self.free_objective.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemJson = serde_json::from_str(text)?;
        if doc.format != 1 {
            return Err(Error::schema("format", format!("unsupported format {}", doc.format)));
        }
        let mut p = SdpProblem {
            blocks: doc.blocks,
            objective: doc.objective,
            constraints: Vec::new(),
            free_objective: doc.free_objective,
        };
        for (i, c) in doc.constraints.into_iter().enumerate() {
            if c.coefficients.len() != p.blocks.len() {
                return Err(Error::schema(
                    format!("constraints[{i}].coefficients"),
                    "one entry (or null) per block required",
                ));
            }
            let terms = c
                .coefficients
                .into_iter()
                .enumerate()
                .filter_map(|(b, m)| m.map(|m| (b, m)))
                .collect();
            p.constraints.push(Constraint {
                terms,
                free: c.free,
                rhs: c.rhs,
            });
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    format: u32,
    blocks: Vec<usize>,
    objective: Vec<ComplexMatrix>,
    constraints: Vec<ConstraintJson>,
    #[serde(default)]
    free_objective: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintJson {
    coefficients: Vec<Option<ComplexMatrix>>,
    rhs: f64,
    #[serde(default)]
    free: Vec<f64>,
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn realify(h: &ComplexMatrix) -> DMatrix<f64> {
    let n = h.dim();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h.get(i % n, j % n);
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`realify`] after projecting onto the structured subspace.
pub fn complexify(y: &DMatrix<f64>) -> ComplexMatrix {
    let n = y.nrows() / 2;
    ComplexMatrix::from_fn(n, |i, j| {
        C64::new(
            0.5 * (y[(i, j)] + y[(i + n, j + n)]),
            0.5 * (y[(i + n, j)] - y[(i, j + n)]),
        )
    })
}

/// Real embedding with row normalization and data scaling recorded.
struct Embedded {
    real: ipm::RealProblem,
    /// Original index of each kept row and its normalization factor.
    rows: Vec<(usize, f64)>,
    b_scale: f64,
    c_scale: f64,
}

fn embed(p: &SdpProblem) -> std::result::Result<Embedded, FarkasCertificate> {
    let nf = p.n_free();
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    for (i, c) in p.constraints.iter().enumerate() {
        let mut nrm2: f64 = c.terms.iter().map(|(_, m)| m.frobenius_norm().powi(2)).sum();
        nrm2 += c.free.iter().map(|v| v * v).sum::<f64>();
        let nrm = nrm2.sqrt();
        if nrm == 0.0 {
            if c.rhs != 0.0 {
                // 0 = b_i with b_i ≠ 0.
                let mut y = vec![0.0; p.constraints.len()];
                y[i] = c.rhs.signum();
                return Err(verify_farkas(p, &y));
            }
            continue;
        }
        rows.push((i, nrm));
        norms.push(nrm);
    }
    let m = rows.len();
    let b_raw = DVector::from_iterator(m, rows.iter().map(|&(i, s)| p.constraints[i].rhs / s));
    let b_scale = b_raw.amax().max(1.0);
    let c_frob = p
        .objective
        .iter()
        .map(|o| o.frobenius_norm().powi(2))
        .sum::<f64>()
        + p.free_objective.iter().map(|v| v * v).sum::<f64>();
    let c_scale = c_frob.sqrt().max(1.0);

    let mut a: Vec<Vec<ipm::Term>> = vec![Vec::new(); p.blocks.len()];
    let mut af = DMatrix::zeros(m, nf);
    for (r, &(i, s)) in rows.iter().enumerate() {
        let c = &p.constraints[i];
        for (b, mat) in &c.terms {
            a[*b].push(ipm::Term {
                row: r,
                mat: realify(mat) * (0.5 / s),
            });
        }
        for k in 0..nf {
            af[(r, k)] = c.free_coeff(k) / s;
        }
    }
    for terms in &mut a {
        terms.sort_by_key(|t| t.row);
    }
    let c = p
        .objective
        .iter()
        .map(|o| realify(o) * (-0.5 / c_scale))
        .collect();
    let cf = DVector::from_iterator(nf, p.free_objective.iter().map(|v| -v / c_scale));
    Ok(Embedded {
        real: ipm::RealProblem {
            dims: p.blocks.iter().map(|n| 2 * n).collect(),
            c,
            a,
            b: b_raw / b_scale,
            af,
            cf,
        },
        rows,
        b_scale,
        c_scale,
    })
}

fn empty_result(p: &SdpProblem, status: SdpStatus, diagnostics: String) -> SdpResult {
    SdpResult {
        status,
        primal: p.blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect(),
        free: vec![0.0; p.n_free()],
        dual: vec![0.0; p.constraints.len()],
        dual_slack: p.blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect(),
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        min_primal_eigenvalue: f64::NAN,
        iterations: 0,
        slack: None,
        certificate: None,
        diagnostics,
    }
}

/// Solves with the default tolerance.
pub fn solve_default(p: &SdpProblem) -> Result<SdpResult> {
    solve(p, DEFAULT_TOL)
}

/// Solves the problem to relative tolerance `tol ∈ [1e-10, 1e-4]`.
pub fn solve(p: &SdpProblem, tol: f64) -> Result<SdpResult> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::precondition(format!(
            "tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
        )));
    }
    p.validate()?;
    let emb = match embed(p) {
        Ok(e) => e,
        Err(cert) => {
            let mut r = empty_result(
                p,
                if cert.verified {
                    SdpStatus::Infeasible
                } else {
                    SdpStatus::NumericalFailure
                },
                "constraint with zero coefficients and nonzero right-hand side".into(),
            );
            r.certificate = Some(cert);
            return Ok(r);
        }
    };
    let report = ipm::solve(
        &emb.real,
        ipm::IpmSettings {
            tol,
            max_iter: DEFAULT_MAX_ITER,
        },
    );
    let it = &report.iterate;
    let ncons = p.constraints.len();
    let diag = format!(
        "{:?} after {} iterations (rel. primal residual {:.2e}, dual residual {:.2e}, gap {:.2e}, tau {:.2e}, kappa {:.2e})",
        report.outcome,
        report.iterations,
        report.primal_residual,
        report.dual_residual,
        report.rel_gap,
        it.tau,
        it.kappa
    );

    match report.outcome {
        ipm::Outcome::Optimal => {
            let mut res = recover(p, &emb, it)?;
            res.iterations = report.iterations;
            res.diagnostics = diag;
            Ok(res)
        }
        ipm::Outcome::PrimalInfeasible => {
            let mut y = vec![0.0; ncons];
            for (r, &(i, s)) in emb.rows.iter().enumerate() {
                y[i] = it.y[r] / s;
            }
            let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                y.iter_mut().for_each(|v| *v /= nrm);
            }
            let cert = verify_farkas(p, &y);
            let status = if cert.verified {
                SdpStatus::Infeasible
            } else {
                SdpStatus::NumericalFailure
            };
            let mut r = empty_result(p, status, diag);
            r.iterations = report.iterations;
            r.certificate = Some(cert);
            Ok(r)
        }
        ipm::Outcome::DualInfeasible => {
            let mut r = empty_result(p, SdpStatus::Unbounded, diag);
            r.primal = it.x.iter().map(complexify).collect();
            r.free = it.xf.iter().copied().collect();
            r.iterations = report.iterations;
            r.primal_objective = f64::INFINITY;
            r.dual_objective = f64::INFINITY;
            Ok(r)
        }
        ipm::Outcome::Stalled | ipm::Outcome::IterationLimit => {
            // Keep the last iterate with its true residuals so callers
            // can judge it themselves.
            let mut r = if it.tau > 0.0 && it.tau.is_finite() {
                recover(p, &emb, it)?
            } else {
                empty_result(p, SdpStatus::NumericalFailure, String::new())
            };
            r.status = SdpStatus::NumericalFailure;
            r.iterations = report.iterations;
            r.diagnostics = diag;
            Ok(r)
        }
    }
}

/// Undoes the embedding scalings at a homogeneous iterate.
fn recover(p: &SdpProblem, emb: &Embedded, it: &ipm::Iterate) -> Result<SdpResult> {
    let ncons = p.constraints.len();
    let tau = it.tau;
    let primal: Vec<ComplexMatrix> = it
        .x
        .iter()
        .map(|x| complexify(x).scale_real(emb.b_scale / tau))
        .collect();
    let free: Vec<f64> = it.xf.iter().map(|v| v * emb.b_scale / tau).collect();
    let mut dual = vec![0.0; ncons];
    for (r, &(i, s)) in emb.rows.iter().enumerate() {
        dual[i] = -it.y[r] * emb.c_scale / (tau * s);
    }
    let dual_slack: Vec<ComplexMatrix> = it
        .s
        .iter()
        .map(|s| complexify(s).scale_real(2.0 * emb.c_scale / tau))
        .collect();
    finish_optimal(p, primal, free, dual, dual_slack)
}

fn finish_optimal(
    p: &SdpProblem,
    primal: Vec<ComplexMatrix>,
    free: Vec<f64>,
    dual: Vec<f64>,
    dual_slack: Vec<ComplexMatrix>,
) -> Result<SdpResult> {
    let vals = p.constraint_values(&primal, &free);
    let primal_residual = vals
        .iter()
        .zip(&p.constraints)
        .map(|(v, c)| (v - c.rhs).abs())
        .fold(0.0, f64::max);
    let aty = p.adjoint_apply(&dual);
    let mut dual_residual = 0.0f64;
    for ((a, o), s) in aty.iter().zip(&p.objective).zip(&dual_slack) {
        dual_residual = dual_residual.max((&(a - o) - s).max_abs());
    }
    for (k, f) in p.free_objective.iter().enumerate() {
        let col: f64 = p
            .constraints
            .iter()
            .zip(&dual)
            .map(|(c, y)| c.free_coeff(k) * y)
            .sum();
        dual_residual = dual_residual.max((col - f).abs());
    }
    let mut min_eig = f64::INFINITY;
    for x in &primal {
        if x.dim() > 0 {
            min_eig = min_eig.min(lambda_min(x)?);
        }
    }
    let primal_objective = p.objective_value(&primal, &free);
    let dual_objective: f64 = p
        .constraints
        .iter()
        .zip(&dual)
        .map(|(c, y)| c.rhs * y)
        .sum();
    let gap = (dual_objective - primal_objective).abs()
        / (1.0 + primal_objective.abs() + dual_objective.abs());
    Ok(SdpResult {
        status: SdpStatus::Optimal,
        primal,
        free,
        dual,
        dual_slack,
        primal_objective,
        dual_objective,
        gap,
        primal_residual,
        dual_residual,
        min_primal_eigenvalue: min_eig,
        iterations: 0,
        slack: None,
        certificate: None,
        diagnostics: String::new(),
    })
}

/// Vector `t` with `Σ t_i A_i = I` on every block and zero free columns,
/// when one exists; `<b, t>` is then the trace of every feasible point.
fn trace_witness(p: &SdpProblem) -> Option<Vec<f64>> {
    let m = p.constraints.len();
    if m == 0 {
        return None;
    }
    // Least squares Σ t_i A_i ≈ I on the rows themselves (not the Gram
    // matrix, which squares the conditioning).
    let rows = p.realified_rows();
    let mut target = DVector::<f64>::zeros(rows.ncols());
    let mut col = 0;
    for &n in &p.blocks {
        for q in 0..n {
            target[col] = 1.0;
            col += 1 + 2 * (n - q - 1);
        }
    }
    let svd = rows.transpose().svd(true, true);
    let cutoff = 1e-13 * svd.singular_values.amax().max(1e-300);
    let t = svd.solve(&target, cutoff).ok()?;
    let t: Vec<f64> = t.iter().copied().collect();
    // Residual of the identity fit.
    let fit = p.adjoint_apply(&t);
    let mut err2 = 0.0;
    let mut total = 0.0;
    for (f, &n) in fit.iter().zip(&p.blocks) {
        err2 += (f - &ComplexMatrix::identity(n)).frobenius_norm().powi(2);
        total += n as f64;
    }
    for k in 0..p.n_free() {
        let col: f64 = p
            .constraints
            .iter()
            .zip(&t)
            .map(|(c, ti)| c.free_coeff(k) * ti)
            .sum();
        err2 += col * col;
    }
    (err2.sqrt() <= 1e-8 * total.sqrt().max(1.0)).then_some(t)
}

/// Re-verifies a Farkas ray from the problem data alone.
pub fn verify_farkas(p: &SdpProblem, y: &[f64]) -> FarkasCertificate {
    let b_dot_y: f64 = p.constraints.iter().zip(y).map(|(c, v)| c.rhs * v).sum();
    let aty = p.adjoint_apply(y);
    let mut lmax = f64::NEG_INFINITY;
    let mut scale = 0.0f64;
    for m in &aty {
        if m.dim() == 0 {
            continue;
        }
        scale = scale.max(m.max_abs());
        lmax = lmax.max(lambda_max(m).unwrap_or(f64::INFINITY));
    }
    if lmax == f64::NEG_INFINITY {
        lmax = 0.0;
    }
    let mut free_residual = 0.0f64;
    for k in 0..p.n_free() {
        let col: f64 = p
            .constraints
            .iter()
            .zip(y)
            .map(|(c, v)| c.free_coeff(k) * v)
            .sum();
        free_residual = free_residual.max(col.abs());
    }
    let witness = trace_witness(p);
    let trace_bound = witness
        .as_ref()
        .map(|t| p.constraints.iter().zip(t).map(|(c, v)| c.rhs * v).sum::<f64>());
    let margin = if lmax <= 0.0 {
        b_dot_y
    } else if let Some(tb) = trace_bound {
        b_dot_y - lmax * tb.max(0.0)
    } else if lmax <= 1e-13 * scale.max(1.0) {
        b_dot_y
    } else {
        f64::NEG_INFINITY
    };
    let ynorm = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let verified = margin > 1e-12 * ynorm && free_residual <= 1e-10 * ynorm.max(b_dot_y.abs());
    FarkasCertificate {
        y: y.to_vec(),
        b_dot_y,
        lambda_max: lmax,
        free_residual,
        trace_bound,
        margin,
        verified,
    }
}

/// Phase-one feasibility test with the default tolerance.
pub fn feasibility(p: &SdpProblem) -> Result<SdpResult> {
    feasibility_with(p, DEFAULT_TOL)
}

/// Maximizes `t` over `X = Z + t·I`, `Z ⪰ 0`, subject to the constraints;
/// the problem is feasible iff the optimal `t ≥ -tol`. Infeasible verdicts
/// carry a re-verified Farkas certificate built from the phase-one dual.
pub fn feasibility_with(p: &SdpProblem, tol: f64) -> Result<SdpResult> {
    p.validate()?;
    let nf = p.n_free();
    let mut phase1 = SdpProblem::new(p.blocks.clone());
    phase1.free_objective = vec![0.0; nf];
    phase1.free_objective.push(1.0);
    for c in &p.constraints {
        let tr: f64 = c.terms.iter().map(|(_, m)| m.trace().re).sum();
        let mut free: Vec<f64> = (0..nf).map(|k| c.free_coeff(k)).collect();
        free.push(tr);
        phase1.push(Constraint {
            terms: c.terms.clone(),
            free,
            rhs: c.rhs,
        });
    }
    let mut r = solve(&phase1, tol)?;
    match r.status {
        SdpStatus::Optimal => {
            let t = r.free[nf];
            let primal: Vec<ComplexMatrix> = r
                .primal
                .iter()
                .map(|z| z + &ComplexMatrix::identity(z.dim()).scale_real(t))
                .collect();
            let free = r.free[..nf].to_vec();
            if t >= -tol {
                let mut out = finish_optimal(p, primal, free, r.dual.clone(), r.dual_slack.clone())?;
                out.primal_objective = t;
                out.dual_objective = r.dual_objective;
                out.gap = r.gap;
                out.iterations = r.iterations;
                out.slack = Some(t);
                out.diagnostics = format!("phase-one slack t = {t:.3e}; {}", r.diagnostics);
                Ok(out)
            } else {
                // Phase-one dual: Σ y A ⪰ 0, Σ y tr A = 1, <b,y> = t < 0.
                let mut y: Vec<f64> = r.dual.iter().map(|v| -v).collect();
                let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nrm > 0.0 {
                    y.iter_mut().for_each(|v| *v /= nrm);
                }
                let cert = verify_farkas(p, &y);
                let mut out = empty_result(
                    p,
                    if cert.verified {
                        SdpStatus::Infeasible
                    } else {
                        SdpStatus::NumericalFailure
                    },
                    format!("phase-one slack t = {t:.3e}; {}", r.diagnostics),
                );
                out.primal = primal;
                out.free = free;
                out.gap = r.gap;
                out.iterations = r.iterations;
                out.slack = Some(t);
                out.certificate = Some(cert);
                Ok(out)
            }
        }
        SdpStatus::Unbounded => {
            // t can grow without bound: strictly feasible.
            r.slack = Some(f64::INFINITY);
            r.status = SdpStatus::Optimal;
            r.diagnostics = format!("phase-one unbounded (strictly feasible); {}", r.diagnostics);
            Ok(r)
        }
        SdpStatus::Infeasible => {
            // The affine system itself is inconsistent; re-verify against p.
            let y = r.certificate.as_ref().map(|c| c.y.clone()).unwrap_or_default();
            let cert = verify_farkas(p, &y);
            r.status = if cert.verified {
                SdpStatus::Infeasible
            } else {
                SdpStatus::NumericalFailure
            };
            r.certificate = Some(cert);
            r.primal = p.blocks.iter().map(|&n| ComplexMatrix::zeros(n)).collect();
            r.free = vec![0.0; nf];
            Ok(r)
        }
        SdpStatus::NumericalFailure => Ok(r),
    }
}
