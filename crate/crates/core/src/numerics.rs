//! Dense complex linear algebra.
//!
//! [`ComplexMatrix`] is the carrier for every concrete operator in the crate:
//! clock/shift unitaries, Choi matrices and Hermitian combinations. The
//! heavy lifting (Hermitian eigensolver, SVD, QR) is delegated to `nalgebra`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest matrix dimension any constructor will allocate.
pub const DEFAULT_DIM_CAP: usize = 8192;

/// Relative singular-value cutoff used for nullspace computations.
pub const DEFAULT_NULLSPACE_CUTOFF: f64 = 1e-8;

/// Tolerance for the Hermitian precondition of the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, |i, j| f(i, j)))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
    }

    /// Matrix unit `E_ij`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.0[(i, j)] = ONE;
        m
    }

    pub fn from_inner(inner: DMatrix<C64>) -> Self {
        assert_eq!(inner.nrows(), inner.ncols(), "ComplexMatrix must be square");
        ComplexMatrix(inner)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    /// Row-major copy of the entries.
    pub fn row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `(M + M*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `(M - M*) / 2i`, so that `M = re + i·im` with both parts Hermitian.
    pub fn skew_part(&self) -> Self {
        ComplexMatrix((&self.0 - self.0.adjoint()) * C64::new(0.0, -0.5))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `max |M*M - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = &self.adjoint() * self;
        prod.max_abs_diff(&Self::identity(self.dim()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Real Hilbert–Schmidt pairing `Re tr(A* B)`.
    pub fn real_inner(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// Compression `P* M P` onto the first `k` coordinates.
    pub fn leading_block(&self, k: usize) -> Self {
        ComplexMatrix(self.0.view((0, 0), (k, k)).into_owned())
    }

    /// Principal submatrix on the given index set.
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self.0[(idx[i], idx[j])])
    }

    /// Conjugation `W* M W`.
    pub fn conjugate_by(&self, w: &Self) -> Self {
        &(&w.adjoint() * self) * w
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim(), self.dim())?;
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| {
                    let z = self.0[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

// Serialized as an array of rows, each row an array of [re, im] pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut rows = serializer.serialize_seq(Some(n))?;
        for i in 0..n {
            let row: Vec<[f64; 2]> = (0..n)
                .map(|j| {
                    let z = self.0[(i, j)];
                    [z.re, z.im]
                })
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(de::Error::custom(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|p| C64::new(p[0], p[1])));
        }
        ComplexMatrix::from_row_major(n, &entries).map_err(de::Error::custom)
    }
}

/// Unit-modulus complex number `e^{iθ}`.
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and a
/// unitary whose columns are the matching eigenvectors.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_hermitian(m)?;
    let n = m.dim();
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0)));
    }
    let sym = m.hermitian_part();
    let eig = sym
        .0
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, ComplexMatrix(q)))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    if m.dim() == 0 {
        return Ok(Vec::new());
    }
    let sym = m.hermitian_part();
    let eig = sym
        .0
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn lambda_max(m: &ComplexMatrix) -> Result<f64> {
    hermitian_eigenvalues(m).map(|v| *v.last().unwrap_or(&0.0))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(m: &ComplexMatrix) -> Result<f64> {
    hermitian_eigenvalues(m).map(|v| *v.first().unwrap_or(&0.0))
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::precondition(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Largest singular value. Hermitian inputs use the eigenvalue route.
pub fn operator_norm(m: &ComplexMatrix) -> Result<f64> {
    if m.dim() == 0 {
        return Ok(0.0);
    }
    if m.hermiticity_defect() <= 1e-14 * m.max_abs().max(1.0) {
        let v = hermitian_eigenvalues(m)?;
        return Ok(v[0].abs().max(v[v.len() - 1].abs()));
    }
    Ok(singular_values(m)?.into_iter().fold(0.0, f64::max))
}

pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let svd = m
        .0
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_capped(a, b, DEFAULT_DIM_CAP)
}

/// `(A ⊗ B)[(i,j),(k,l)] = A[i][k]·B[j][l]`, row index `i·dim(B) + j`.
pub fn kron_capped(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let requested = a
        .dim()
        .checked_mul(b.dim())
        .ok_or(Error::Size { requested: usize::MAX, cap })?;
    if requested > cap {
        return Err(Error::Size { requested, cap });
    }
    Ok(ComplexMatrix(a.0.kronecker(&b.0)))
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let total: usize = blocks.iter().map(|b| b.dim()).sum();
    let mut out = ComplexMatrix::zeros(total);
    let mut off = 0;
    for b in blocks {
        let n = b.dim();
        out.0.view_mut((off, off), (n, n)).copy_from(&b.0);
        off += n;
    }
    out
}

/// Dimension of the commutant of `{t_i, t_i*}` with the default cutoff.
pub fn commutant_dimension(mats: &[ComplexMatrix]) -> Result<usize> {
    commutant_dimension_with(mats, DEFAULT_NULLSPACE_CUTOFF)
}

/// Nullspace dimension of the stacked Sylvester operators
/// `X ↦ X t - t X` over `t ∈ {t_i, t_i*}`. Singular values below
/// `rel_cutoff · σ_max` count as zero.
pub fn commutant_dimension_with(mats: &[ComplexMatrix], rel_cutoff: f64) -> Result<usize> {
    let m = match mats.first() {
        Some(t) => t.dim(),
        None => return Err(Error::precondition("empty tuple")),
    };
    if mats.iter().any(|t| t.dim() != m) {
        return Err(Error::dimension("tuple entries have different sizes"));
    }
    let unknowns = m * m;
    let mut gens: Vec<ComplexMatrix> = Vec::with_capacity(2 * mats.len());
    for t in mats {
        gens.push(t.clone());
        gens.push(t.adjoint());
    }
    // vec(X) column-major: vec(X t) = (tᵀ ⊗ I) vec X, vec(t X) = (I ⊗ t) vec X.
    let mut k = DMatrix::<C64>::zeros(gens.len() * unknowns, unknowns);
    let id = DMatrix::<C64>::identity(m, m);
    for (g, t) in gens.iter().enumerate() {
        let op = t.0.transpose().kronecker(&id) - id.kronecker(&t.0);
        k.view_mut((g * unknowns, 0), (unknowns, unknowns)).copy_from(&op);
    }
    let svd = k
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(unknowns);
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rel_cutoff * smax)
        .count();
    Ok((unknowns - rank).max(1))
}

/// Connected components of the joint sparsity pattern of the matrices:
/// the finest coordinate block decomposition they all respect.
pub fn block_components(mats: &[ComplexMatrix], zero_tol: f64) -> Vec<Vec<usize>> {
    let m = mats.first().map(|t| t.dim()).unwrap_or(0);
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for t in mats {
        for i in 0..m {
            for j in 0..m {
                if i != j && t.0[(i, j)].norm() > zero_tol {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut index_of_root = vec![usize::MAX; m];
    for i in 0..m {
        let r = find(&mut parent, i);
        if index_of_root[r] == usize::MAX {
            index_of_root[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[index_of_root[r]].push(i);
    }
    comps
}

/// Haar-random unitary (QR of a complex Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    ComplexMatrix(q)
}

/// Random Hermitian matrix with Gaussian entries (GUE scaling).
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng))
    });
    g.hermitian_part()
}

/// Random positive semidefinite matrix `G G*` with unit trace.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng))
    });
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

/// Uniformly random unimodular scalar.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    phase(rng.random::<f64>() * std::f64::consts::TAU)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
