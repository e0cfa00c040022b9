//! Linear maps M_m → M_m' stored as Choi matrices
//! C = Σ_ij E_ij ⊗ Φ(E_ij) (input slot first).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigen, lambda_min, ComplexMatrix, C64, ONE, ZERO};

/// Choi eigenvalues above this (negated) count as nonnegative.
pub const CP_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ChoiMap {
    in_dim: usize,
    out_dim: usize,
    choi: ComplexMatrix,
}

impl ChoiMap {
    pub fn from_choi(in_dim: usize, out_dim: usize, choi: ComplexMatrix) -> Result<Self> {
        if choi.dim() != in_dim * out_dim {
            return Err(Error::dimension(format!(
                "Choi matrix of size {} does not match {in_dim}·{out_dim}",
                choi.dim()
            )));
        }
        Ok(ChoiMap {
            in_dim,
            out_dim,
            choi,
        })
    }

    /// Choi matrix of `f`, evaluated on the matrix units.
    pub fn from_fn(in_dim: usize, out_dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        let mut choi = ComplexMatrix::zeros(in_dim * out_dim);
        for i in 0..in_dim {
            for j in 0..in_dim {
                let img = f(&ComplexMatrix::unit(in_dim, i, j));
                if img.dim() != out_dim {
                    return Err(Error::dimension("image has wrong size"));
                }
                write_block(&mut choi, out_dim, i, j, &img);
            }
        }
        Ok(ChoiMap {
            in_dim,
            out_dim,
            choi,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    /// Φ(E_ij), the (i, j) block of the Choi matrix.
    pub fn block(&self, i: usize, j: usize) -> ComplexMatrix {
        let p = self.out_dim;
        ComplexMatrix::from_fn(p, |k, l| self.choi.get(i * p + k, j * p + l))
    }

    /// Φ(X) = Σ_ij X_ij Φ(E_ij).
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.dim() != self.in_dim {
            return Err(Error::dimension(format!(
                "input of size {} for a map on M_{}",
                x.dim(),
                self.in_dim
            )));
        }
        let p = self.out_dim;
        let mut out = ComplexMatrix::zeros(p);
        for i in 0..self.in_dim {
            for j in 0..self.in_dim {
                let c = x.get(i, j);
                if c == ZERO {
                    continue;
                }
                for k in 0..p {
                    for l in 0..p {
                        let v = out.get(k, l) + c * self.choi.get(i * p + k, j * p + l);
                        out.set(k, l, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Hilbert–Schmidt adjoint: Φ*(Y)_ij = tr(Φ(E_ij)* Y).
    pub fn apply_adjoint(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        if y.dim() != self.out_dim {
            return Err(Error::dimension("adjoint input has wrong size"));
        }
        let p = self.out_dim;
        Ok(ComplexMatrix::from_fn(self.in_dim, |i, j| {
            let mut s = ZERO;
            for k in 0..p {
                for l in 0..p {
                    s += self.choi.get(i * p + k, j * p + l).conj() * y.get(k, l);
                }
            }
            s
        }))
    }

    /// (id_k ⊗ Φ)(X) for X ∈ M_k ⊗ M_m.
    pub fn apply_ampliated(&self, k: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        ampliate(k, self.in_dim, self.out_dim, x, |b| self.apply(b))
    }

    /// (id_k ⊗ Φ*)(Y) for Y ∈ M_k ⊗ M_m'.
    pub fn apply_adjoint_ampliated(&self, k: usize, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        ampliate(k, self.out_dim, self.in_dim, y, |b| self.apply_adjoint(b))
    }

    pub fn is_hermitian_preserving(&self) -> bool {
        self.choi.is_hermitian(1e-12 * self.choi.max_abs().max(1.0))
    }

    /// max |Φ(I) − I|.
    pub fn unitality_defect(&self) -> f64 {
        let img = self.apply(&ComplexMatrix::identity(self.in_dim)).expect("sizes match");
        img.max_abs_diff(&ComplexMatrix::identity(self.out_dim))
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.unitality_defect() < tol
    }

    /// Φ ∘ Ψ where `self` is Φ.
    pub fn compose(&self, psi: &ChoiMap) -> Result<ChoiMap> {
        if psi.out_dim != self.in_dim {
            return Err(Error::dimension("composition dimensions do not chain"));
        }
        let mut choi = ComplexMatrix::zeros(psi.in_dim * self.out_dim);
        for i in 0..psi.in_dim {
            for j in 0..psi.in_dim {
                let img = self.apply(&psi.block(i, j))?;
                write_block(&mut choi, self.out_dim, i, j, &img);
            }
        }
        ChoiMap::from_choi(psi.in_dim, self.out_dim, choi)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChoiJson {
            format: 1,
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            choi: self.choi.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChoiJson = serde_json::from_str(text)?;
        if doc.format != 1 {
            return Err(Error::schema("format", format!("unsupported format {}", doc.format)));
        }
        ChoiMap::from_choi(doc.in_dim, doc.out_dim, doc.choi)
            .map_err(|e| Error::schema("choi", e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct ChoiJson {
    format: u32,
    in_dim: usize,
    out_dim: usize,
    choi: ComplexMatrix,
}

fn write_block(c: &mut ComplexMatrix, p: usize, i: usize, j: usize, img: &ComplexMatrix) {
    for k in 0..p {
        for l in 0..p {
            c.set(i * p + k, j * p + l, img.get(k, l));
        }
    }
}

fn ampliate(
    k: usize,
    m: usize,
    p: usize,
    x: &ComplexMatrix,
    f: impl Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
) -> Result<ComplexMatrix> {
    if x.dim() != k * m {
        return Err(Error::dimension("ampliated input has wrong size"));
    }
    let mut out = ComplexMatrix::zeros(k * p);
    for a in 0..k {
        for b in 0..k {
            let blk = ComplexMatrix::from_fn(m, |r, s| x.get(a * m + r, b * m + s));
            let img = f(&blk)?;
            write_block(&mut out, p, a, b, &img);
        }
    }
    Ok(out)
}

/// Choi matrix from images of an arbitrary basis of M_m.
pub fn choi_of(pairs: &[(ComplexMatrix, ComplexMatrix)]) -> Result<ChoiMap> {
    let Some((b0, i0)) = pairs.first() else {
        return Err(Error::dimension("no basis elements given"));
    };
    let m = b0.dim();
    let p = i0.dim();
    if pairs.len() != m * m {
        return Err(Error::dimension(format!(
            "{} basis elements given, M_{m} needs {}",
            pairs.len(),
            m * m
        )));
    }
    if pairs.iter().any(|(b, img)| b.dim() != m || img.dim() != p) {
        return Err(Error::dimension("inconsistent basis or image sizes"));
    }
    let basis = DMatrix::<C64>::from_fn(m * m, m * m, |r, c| pairs[c].0.get(r / m, r % m));
    let lu = basis.lu();
    let mut choi = ComplexMatrix::zeros(m * p);
    for i in 0..m {
        for j in 0..m {
            let mut e = DVector::<C64>::zeros(m * m);
            e[i * m + j] = ONE;
            let coeffs = lu
                .solve(&e)
                .ok_or_else(|| Error::precondition("given matrices are not a basis"))?;
            let mut img = ComplexMatrix::zeros(p);
            for (k, c) in coeffs.iter().enumerate() {
                if *c != ZERO {
                    img = &img + &pairs[k].1.scale(*c);
                }
            }
            write_block(&mut choi, p, i, j, &img);
        }
    }
    ChoiMap::from_choi(m, p, choi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpVerdict {
    pub min_eigenvalue: f64,
    pub completely_positive: bool,
}

/// Choi's criterion.
pub fn is_cp(phi: &ChoiMap) -> Result<CpVerdict> {
    if !phi.is_hermitian_preserving() {
        return Err(Error::precondition("Choi matrix is not Hermitian"));
    }
    let min_eigenvalue = lambda_min(&phi.choi.hermitian_part())?;
    Ok(CpVerdict {
        min_eigenvalue,
        completely_positive: min_eigenvalue >= -CP_TOL,
    })
}

pub fn identity_map(m: usize) -> ChoiMap {
    ChoiMap::from_fn(m, m, |x| x.clone()).expect("sizes match")
}

pub fn transpose_map(m: usize) -> ChoiMap {
    ChoiMap::from_fn(m, m, |x| x.transpose()).expect("sizes match")
}

/// A ↦ tr(A)·I.
pub fn trace_map(m: usize, out: usize) -> ChoiMap {
    ChoiMap::from_fn(m, out, |x| ComplexMatrix::identity(out).scale(x.trace())).expect("sizes match")
}

/// A ↦ n·tr(A)·I_N − A on M_N: n-positive, not completely positive.
pub fn tomiyama_map(n: usize, big_n: usize) -> Result<ChoiMap> {
    if n == 0 || big_n <= n {
        return Err(Error::precondition(format!(
            "need N > n ≥ 1, got n = {n}, N = {big_n}"
        )));
    }
    let nf = n as f64;
    ChoiMap::from_fn(big_n, big_n, |a| {
        &ComplexMatrix::identity(big_n).scale(a.trace() * nf) - a
    })
}

/// Unital rescaling of [`tomiyama_map`]: divided by nN − 1.
pub fn tomiyama_map_normalized(n: usize, big_n: usize) -> Result<ChoiMap> {
    let phi = tomiyama_map(n, big_n)?;
    let s = 1.0 / (n * big_n - 1) as f64;
    ChoiMap::from_choi(big_n, big_n, phi.choi.scale_real(s))
}

/// Outcome of the heuristic search for k-positivity violations.
#[derive(Clone, Debug, Serialize)]
pub struct ViolationSearch {
    pub level: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Unit vector x ∈ C^k ⊗ C^m; the witness input is k·xx*.
    pub witness: Option<Vec<C64>>,
    /// λ_min((id_k ⊗ Φ)(k·xx*)), recomputed from scratch.
    pub violation: Option<f64>,
    /// Smallest value seen over all restarts.
    pub best: f64,
    /// Always set: absence of a witness does not prove k-positivity.
    pub note: &'static str,
}

/// Alternating search: for a unit ξ minimize over pure inputs x the value
/// ξ*(id⊗Φ)(xx*)ξ (an eigenvector of (id⊗Φ*)(ξξ*)), then update ξ to the
/// bottom eigenvector of (id⊗Φ)(xx*).
pub fn positivity_violation_search(
    phi: &ChoiMap,
    level: usize,
    restarts: usize,
    seed: u64,
) -> Result<ViolationSearch> {
    if level == 0 {
        return Err(Error::precondition("level must be at least 1"));
    }
    if !phi.is_hermitian_preserving() {
        return Err(Error::precondition("map must be Hermitian-preserving"));
    }
    let k = level;
    let out_dim = k * phi.out_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut best_x: Option<Vec<C64>> = None;
    let eval = |x: &[C64]| -> Result<(f64, Vec<C64>)> {
        let xx = outer(x).scale_real(k as f64);
        let img = phi.apply_ampliated(k, &xx)?.hermitian_part();
        let (vals, vecs) = hermitian_eigen(&img)?;
        Ok((vals[0], column(&vecs, 0)))
    };
    for _ in 0..restarts {
        let mut xi = random_unit(out_dim, &mut rng);
        let mut last = f64::INFINITY;
        let mut x = Vec::new();
        for _ in 0..60 {
            let y = phi.apply_adjoint_ampliated(k, &outer(&xi))?.hermitian_part();
            let (_, vecs) = hermitian_eigen(&y)?;
            x = column(&vecs, 0);
            let (val, next) = eval(&x)?;
            xi = next;
            if (last - val).abs() < 1e-14 {
                last = val;
                break;
            }
            last = val;
        }
        if last < best {
            best = last;
            best_x = Some(x);
        }
    }
    let note = "heuristic search; no witness found is not a proof of k-positivity";
    if best < -CP_TOL {
        let x = best_x.expect("set with best");
        let (verified, _) = eval(&x)?;
        if verified < -CP_TOL {
            return Ok(ViolationSearch {
                level,
                restarts,
                seed,
                witness: Some(x),
                violation: Some(verified),
                best,
                note,
            });
        }
    }
    Ok(ViolationSearch {
        level,
        restarts,
        seed,
        witness: None,
        violation: None,
        best,
        note,
    })
}

fn outer(x: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(x.len(), |i, j| x[i] * x[j].conj())
}

fn column(m: &ComplexMatrix, j: usize) -> Vec<C64> {
    (0..m.dim()).map(|i| m.get(i, j)).collect()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    use rand_distr::{Distribution, StandardNormal};
    let v: Vec<C64> = (0..n)
        .map(|_| {
            C64::new(
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        })
        .collect();
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / nrm).collect()
}

#[cfg(test)]
mod tests;
