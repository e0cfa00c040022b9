//! Homogeneous self-dual interior point method for real block SDPs.
//!
//! Standard form:
//!
//! ```text
//! min  <C, X> + c_f·x_f   s.t.  A(X) + A_f x_f = b,  X ⪰ 0 (block diagonal)
//! max  b·y                s.t.  C - A*(y) = S ⪰ 0,   A_fᵀ y = c_f
//! ```
//!
//! The embedding carries `(X, y, x_f, S, τ, κ)`; `τ → 0 < κ` signals
//! infeasibility and the rays are returned unnormalized. Directions use
//! Nesterov–Todd scaling with a Mehrotra predictor–corrector and the
//! reduced system is solved densely.

use nalgebra::{DMatrix, DVector};

/// Coefficient of constraint `row` on one block.
#[derive(Clone, Debug)]
pub(crate) struct Term {
    pub row: usize,
    pub mat: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct RealProblem {
    pub dims: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    /// Terms grouped by block.
    pub a: Vec<Vec<Term>>,
    pub b: DVector<f64>,
    /// `m × n_free`.
    pub af: DMatrix<f64>,
    pub cf: DVector<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    Stalled,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub(crate) struct Iterate {
    pub x: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub xf: DVector<f64>,
    pub tau: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmReport {
    pub outcome: Outcome,
    pub iterate: Iterate,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct IpmSettings {
    pub tol: f64,
    pub max_iter: usize,
}

const STEP_FRACTION: f64 = 0.98;

impl RealProblem {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn nfree(&self) -> usize {
        self.cf.len()
    }

    fn apply_a(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (blk, terms) in self.a.iter().enumerate() {
            for t in terms {
                out[t.row] += t.mat.dot(&x[blk]);
            }
        }
        out
    }

    fn apply_a_adj(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.dims
            .iter()
            .zip(&self.a)
            .map(|(&n, terms)| {
                let mut out = DMatrix::zeros(n, n);
                for t in terms {
                    if y[t.row] != 0.0 {
                        out += &t.mat * y[t.row];
                    }
                }
                out
            })
            .collect()
    }

    fn barrier_degree(&self) -> f64 {
        self.dims.iter().sum::<usize>() as f64
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// NT scaling of one block: `W = G Gᵀ`, `Gᵀ S G = G⁻¹ X G⁻ᵀ = diag(λ)`.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn psd_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.l());
    }
    // Symmetric square root as a fallback for nearly singular iterates.
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lx = psd_factor(x)?;
    let ls = psd_factor(s)?;
    let prod = ls.transpose() * &lx;
    let svd = prod.try_svd(true, true, f64::EPSILON, 1000)?;
    let vt = svd.v_t?;
    let u = svd.u?;
    let d = svd.singular_values;
    if d.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let v = vt.transpose();
    let dinv_sqrt = DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
    let g = &lx * &v * &dinv_sqrt;
    // G⁻¹ = D^{-1/2} Uᵀ L_Sᵀ, using L_Sᵀ L_X = U D Vᵀ.
    let g_inv = &dinv_sqrt * u.transpose() * ls.transpose();
    Some(Scaling { g, g_inv, lambda: d })
}

/// Solves `λ∘Z = R` for symmetric `Z`, with `λ∘Z = (ΛZ + ZΛ)/2`.
fn jordan_solve(lambda: &DVector<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (lambda[i] + lambda[j]))
}

/// Largest `α ≤ cap` keeping `diag(λ) + α·d ⪰ 0`.
fn max_step_scaled(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| {
        let v = 0.5 * (d[(i, j)] + d[(j, i)]);
        v / (lambda[i] * lambda[j]).sqrt()
    });
    let min = scaled
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rf: DVector<f64>,
    rg: f64,
}

fn residuals(p: &RealProblem, it: &Iterate) -> Residuals {
    let ax = p.apply_a(&it.x);
    let rp = ax + &p.af * &it.xf - &p.b * it.tau;
    let aty = p.apply_a_adj(&it.y);
    let rd: Vec<DMatrix<f64>> = aty
        .into_iter()
        .zip(it.s.iter().zip(&p.c))
        .map(|(a, (s, c))| a + s - c * it.tau)
        .collect();
    let rf = p.af.transpose() * &it.y - &p.cf * it.tau;
    let rg = p.b.dot(&it.y) - inner(&p.c, &it.x) - p.cf.dot(&it.xf) - it.kappa;
    Residuals { rp, rd, rf, rg }
}

pub(crate) fn solve(p: &RealProblem, settings: IpmSettings) -> IpmReport {
    let m = p.m();
    let nf = p.nfree();
    let nblocks = p.dims.len();
    let nu = p.barrier_degree();
    let bnorm = p.b.norm();
    let cnorm = (fro(&p.c).powi(2) + p.cf.norm_squared()).sqrt();

    let mut it = Iterate {
        x: p.dims.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        s: p.dims.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        y: DVector::zeros(m),
        xf: DVector::zeros(nf),
        tau: 1.0,
        kappa: 1.0,
    };

    let report = |outcome, it: Iterate, iterations, pr, dr, gap| IpmReport {
        outcome,
        iterate: it,
        iterations,
        primal_residual: pr,
        dual_residual: dr,
        rel_gap: gap,
    };

    let mut stalls = 0usize;
    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for iter in 0..settings.max_iter {
        let r = residuals(p, &it);
        let mu = (inner(&it.x, &it.s) + it.tau * it.kappa) / (nu + 1.0);

        // Termination tests on the de-homogenized point.
        let pres = r.rp.norm() / it.tau / (1.0 + bnorm);
        let dres = (fro(&r.rd).powi(2) + r.rf.norm_squared()).sqrt() / it.tau / (1.0 + cnorm);
        let pobj = (inner(&p.c, &it.x) + p.cf.dot(&it.xf)) / it.tau;
        let dobj = p.b.dot(&it.y) / it.tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        last = (pres, dres, gap);
        if pres <= settings.tol && dres <= settings.tol && gap <= settings.tol {
            return report(Outcome::Optimal, it, iter, pres, dres, gap);
        }
        let by = p.b.dot(&it.y);
        if by > 0.0 {
            let aty = p.apply_a_adj(&it.y);
            let ray: Vec<DMatrix<f64>> = aty.iter().zip(&it.s).map(|(a, s)| a + s).collect();
            let res = (fro(&ray).powi(2) + (p.af.transpose() * &it.y).norm_squared()).sqrt();
            if res / by <= settings.tol && it.tau < it.kappa * 1e-2 {
                return report(Outcome::PrimalInfeasible, it, iter, pres, dres, gap);
            }
        }
        let cx = inner(&p.c, &it.x) + p.cf.dot(&it.xf);
        if cx < 0.0 {
            let ax = p.apply_a(&it.x) + &p.af * &it.xf;
            if ax.norm() / -cx <= settings.tol && it.tau < it.kappa * 1e-2 {
                return report(Outcome::DualInfeasible, it, iter, pres, dres, gap);
            }
        }

        // Scaling.
        let mut scal = Vec::with_capacity(nblocks);
        for b in 0..nblocks {
            match nt_scaling(&it.x[b], &it.s[b]) {
                Some(sc) => scal.push(sc),
                None => return report(Outcome::Stalled, it, iter, pres, dres, gap),
            }
        }
        // Scaled data.
        let a_tilde: Vec<Vec<(usize, DMatrix<f64>)>> = p
            .a
            .iter()
            .zip(&scal)
            .map(|(terms, sc)| {
                terms
                    .iter()
                    .map(|t| (t.row, sym(sc.g.transpose() * &t.mat * &sc.g)))
                    .collect()
            })
            .collect();
        let c_tilde: Vec<DMatrix<f64>> = p
            .c
            .iter()
            .zip(&scal)
            .map(|(c, sc)| sym(sc.g.transpose() * c * &sc.g))
            .collect();
        let rd_tilde: Vec<DMatrix<f64>> = r
            .rd
            .iter()
            .zip(&scal)
            .map(|(rd, sc)| sym(sc.g.transpose() * rd * &sc.g))
            .collect();

        let mut schur = DMatrix::<f64>::zeros(m, m);
        let mut a_c = DVector::<f64>::zeros(m);
        for (b, terms) in a_tilde.iter().enumerate() {
            for (ii, (ri, ai)) in terms.iter().enumerate() {
                a_c[*ri] += ai.dot(&c_tilde[b]);
                for (rj, aj) in terms.iter().skip(ii) {
                    let v = ai.dot(aj);
                    schur[(*ri, *rj)] += v;
                    if ri != rj {
                        schur[(*rj, *ri)] += v;
                    }
                }
            }
        }
        let c_wc: f64 = c_tilde.iter().map(|c| c.norm_squared()).sum();

        let n = m + nf + 1;
        let mut kkt = DMatrix::<f64>::zeros(n, n);
        kkt.view_mut((0, 0), (m, m)).copy_from(&schur);
        if nf > 0 {
            kkt.view_mut((0, m), (m, nf)).copy_from(&p.af);
            kkt.view_mut((m, 0), (nf, m)).copy_from(&p.af.transpose());
            for k in 0..nf {
                kkt[(m + k, n - 1)] = -p.cf[k];
                kkt[(n - 1, m + k)] = -p.cf[k];
            }
        }
        for i in 0..m {
            kkt[(i, n - 1)] = -(a_c[i] + p.b[i]);
            kkt[(n - 1, i)] = p.b[i] - a_c[i];
        }
        kkt[(n - 1, n - 1)] = c_wc + it.kappa / it.tau;
        // Tiny diagonal shift on the Schur block guards against dependent rows.
        let shift = 1e-14 * (1.0 + schur.diagonal().amax());
        for i in 0..m {
            kkt[(i, i)] += shift;
        }
        let lu = kkt.clone().full_piv_lu();

        let solve_dir = |eta: f64, rs: &[DMatrix<f64>], rtk: f64| -> Option<Direction> {
            let mut rhs = DVector::<f64>::zeros(n);
            for i in 0..m {
                rhs[i] = -eta * r.rp[i];
            }
            for (b, terms) in a_tilde.iter().enumerate() {
                for (ri, ai) in terms {
                    rhs[*ri] -= ai.dot(&rs[b]) + eta * ai.dot(&rd_tilde[b]);
                }
            }
            for k in 0..nf {
                rhs[m + k] = -eta * r.rf[k];
            }
            let mut last = -eta * r.rg + rtk / it.tau;
            for b in 0..nblocks {
                last += c_tilde[b].dot(&rs[b]) + eta * c_tilde[b].dot(&rd_tilde[b]);
            }
            rhs[n - 1] = last;
            let mut sol = lu.solve(&rhs)?;
            // One step of iterative refinement.
            let resid = &rhs - &kkt * &sol;
            if let Some(corr) = lu.solve(&resid) {
                sol += corr;
            }
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dy = sol.rows(0, m).into_owned();
            let dxf = sol.rows(m, nf).into_owned();
            let dtau = sol[n - 1];
            let mut ds_scaled = Vec::with_capacity(nblocks);
            let mut dx_scaled = Vec::with_capacity(nblocks);
            for b in 0..nblocks {
                let mut ds = &c_tilde[b] * dtau - &rd_tilde[b] * eta;
                for (ri, ai) in &a_tilde[b] {
                    ds -= ai * dy[*ri];
                }
                let dx = &rs[b] - &ds;
                ds_scaled.push(ds);
                dx_scaled.push(dx);
            }
            let dkappa = (rtk - it.kappa * dtau) / it.tau;
            Some(Direction {
                dx_scaled,
                ds_scaled,
                dy,
                dxf,
                dtau,
                dkappa,
            })
        };

        let step_len = |d: &Direction| -> f64 {
            let mut amax = f64::INFINITY;
            for b in 0..nblocks {
                amax = amax.min(max_step_scaled(&scal[b].lambda, &d.dx_scaled[b]));
                amax = amax.min(max_step_scaled(&scal[b].lambda, &d.ds_scaled[b]));
            }
            if d.dtau < 0.0 {
                amax = amax.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                amax = amax.min(-it.kappa / d.dkappa);
            }
            amax
        };

        // Predictor.
        let rs_aff: Vec<DMatrix<f64>> = scal
            .iter()
            .map(|sc| DMatrix::from_diagonal(&(-&sc.lambda)))
            .collect();
        let Some(aff) = solve_dir(1.0, &rs_aff, -it.tau * it.kappa) else {
            return report(Outcome::Stalled, it, iter, pres, dres, gap);
        };
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let rs_cor: Vec<DMatrix<f64>> = scal
            .iter()
            .enumerate()
            .map(|(b, sc)| {
                let nb = sc.lambda.len();
                let mut rc = DMatrix::<f64>::identity(nb, nb) * (sigma * mu);
                for i in 0..nb {
                    rc[(i, i)] -= sc.lambda[i] * sc.lambda[i];
                }
                let dxds = &aff.dx_scaled[b] * &aff.ds_scaled[b];
                rc -= (&dxds + dxds.transpose()) * 0.5;
                jordan_solve(&sc.lambda, &rc)
            })
            .collect();
        let rtk = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let Some(dir) = solve_dir(1.0 - sigma, &rs_cor, rtk) else {
            return report(Outcome::Stalled, it, iter, pres, dres, gap);
        };
        let alpha = (STEP_FRACTION * step_len(&dir)).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                return report(Outcome::Stalled, it, iter, pres, dres, gap);
            }
        }

        for b in 0..nblocks {
            let dxb = &scal[b].g * &dir.dx_scaled[b] * scal[b].g.transpose();
            let dsb = scal[b].g_inv.transpose() * &dir.ds_scaled[b] * &scal[b].g_inv;
            it.x[b] = sym(&it.x[b] + dxb * alpha);
            it.s[b] = sym(&it.s[b] + dsb * alpha);
        }
        it.y += &dir.dy * alpha;
        it.xf += &dir.dxf * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;

        // Keep the homogeneous scale bounded.
        let scale = it.tau + it.kappa;
        if !(scale.is_finite()) || scale <= 0.0 {
            return report(Outcome::Stalled, it, iter, pres, dres, gap);
        }
        if scale > 1e8 || scale < 1e-8 {
            let f = 1.0 / scale;
            for b in 0..nblocks {
                it.x[b] *= f;
                it.s[b] *= f;
            }
            it.y *= f;
            it.xf *= f;
            it.tau *= f;
            it.kappa *= f;
        }
    }
    let (pr, dr, gap) = last;
    report(Outcome::IterationLimit, it, settings.max_iter, pr, dr, gap)
}

struct Direction {
    dx_scaled: Vec<DMatrix<f64>>,
    ds_scaled: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dxf: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}
