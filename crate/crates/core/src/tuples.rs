//! Concrete operator tuples: standard q-commuting pairs, phase families,
//! Λ-commuting tuples, finite samples of universal pairs and transposes.
//!
//! Tuples are stored as direct sums of blocks, so large block-diagonal
//! samples never materialize as dense matrices.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    block_components, commutant_dimension, direct_sum, hermitian_eigen, phase, ComplexMatrix, C64,
    ONE, ZERO,
};

/// Tolerance for claimed commutation data and unitarity.
pub const COMMUTATION_TOL: f64 = 1e-10;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// θ = k/n with `gcd(k, n) = 1` and `0 ≤ k < n`; q = e^{2πik/n}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalAngle {
    k: u64,
    n: u64,
}

impl RationalAngle {
    /// Requires coprime input after reducing `k` modulo `n`.
    pub fn new(k: i64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::precondition("angle denominator must be positive"));
        }
        let k = k.rem_euclid(n as i64) as u64;
        if gcd(k, n) != 1 {
            return Err(Error::precondition(format!(
                "angle {k}/{n} is not in lowest terms"
            )));
        }
        Ok(RationalAngle { k, n })
    }

    /// Reduces k/n modulo 1 and to lowest terms.
    pub fn reduced(k: i64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::precondition("angle denominator must be positive"));
        }
        let k = k.rem_euclid(n as i64) as u64;
        let g = gcd(k, n);
        Ok(RationalAngle { k: k / g, n: n / g })
    }

    pub fn zero() -> Self {
        RationalAngle { k: 0, n: 1 }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn value(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// q^j evaluated from the reduced exponent, exact on the unit circle.
    pub fn q_pow(&self, j: i64) -> C64 {
        let e = (self.k as i64 * j).rem_euclid(self.n as i64);
        root_of_unity(e as u64, self.n)
    }

    pub fn q(&self) -> C64 {
        self.q_pow(1)
    }

    /// −θ mod 1.
    pub fn negated(&self) -> Self {
        RationalAngle {
            k: (self.n - self.k) % self.n,
            n: self.n,
        }
    }

    /// θ − θ' mod 1, reduced.
    pub fn minus(&self, other: &Self) -> Self {
        let n = lcm(self.n, other.n);
        let k = (self.k * (n / self.n)) as i64 - (other.k * (n / other.n)) as i64;
        RationalAngle::reduced(k, n).expect("positive denominator")
    }
}

/// e^{2πi e/n} with the symmetric quarter-turns exact.
fn root_of_unity(e: u64, n: u64) -> C64 {
    let e = e % n;
    if e == 0 {
        return ONE;
    }
    if 2 * e == n {
        return C64::new(-1.0, 0.0);
    }
    if 4 * e == n {
        return C64::new(0.0, 1.0);
    }
    if 4 * e == 3 * n {
        return C64::new(0.0, -1.0);
    }
    phase(2.0 * std::f64::consts::PI * e as f64 / n as f64)
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.k, self.n)
    }
}

impl FromStr for RationalAngle {
    type Err = Error;

    /// Accepts only `k/n` with integers; floats are rejected.
    fn from_str(s: &str) -> Result<Self> {
        let (k, n) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| Error::precondition(format!("angle '{s}' must be written k/n")))?;
        let k: i64 = k
            .trim()
            .parse()
            .map_err(|_| Error::precondition(format!("bad numerator in angle '{s}'")))?;
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| Error::precondition(format!("bad denominator in angle '{s}'")))?;
        RationalAngle::reduced(k, n)
    }
}

impl Serialize for RationalAngle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.k, self.n].serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalAngle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [k, n] = <[i64; 2]>::deserialize(d)?;
        if n <= 0 {
            return Err(serde::de::Error::custom("angle denominator must be positive"));
        }
        RationalAngle::new(k, n as u64).map_err(serde::de::Error::custom)
    }
}

/// Self-adjoint matrix of unimodular commutation constants given by
/// rational angles; `angles[i][j] = −angles[j][i]`, diagonal zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaMatrix {
    angles: Vec<Vec<RationalAngle>>,
}

impl LambdaMatrix {
    /// Builds Λ from its strict upper triangle, listed row by row.
    pub fn from_upper(d: usize, upper: &[RationalAngle]) -> Result<Self> {
        if upper.len() != d * d.saturating_sub(1) / 2 {
            return Err(Error::dimension(format!(
                "need {} upper-triangular angles for d = {d}",
                d * d.saturating_sub(1) / 2
            )));
        }
        let mut angles = vec![vec![RationalAngle::zero(); d]; d];
        let mut it = upper.iter();
        for i in 0..d {
            for j in i + 1..d {
                let a = *it.next().expect("length checked");
                angles[i][j] = a;
                angles[j][i] = a.negated();
            }
        }
        Ok(LambdaMatrix { angles })
    }

    pub fn from_angles(angles: Vec<Vec<RationalAngle>>) -> Result<Self> {
        let d = angles.len();
        for (i, row) in angles.iter().enumerate() {
            if row.len() != d {
                return Err(Error::dimension("Λ must be square"));
            }
            if row[i] != RationalAngle::zero() {
                return Err(Error::precondition("Λ must have unit diagonal"));
            }
            for j in 0..d {
                if angles[j][i] != row[j].negated() {
                    return Err(Error::precondition("Λ must be self-adjoint"));
                }
            }
        }
        Ok(LambdaMatrix { angles })
    }

    /// Random Λ with pair denominators drawn from `1..=max_n`.
    pub fn random<R: Rng + ?Sized>(d: usize, max_n: u64, rng: &mut R) -> Self {
        let mut upper = Vec::new();
        for _ in 0..d * d.saturating_sub(1) / 2 {
            let n = rng.random_range(1..=max_n);
            let coprime: Vec<u64> = (0..n).filter(|&k| gcd(k, n) == 1).collect();
            let k = coprime[rng.random_range(0..coprime.len())];
            upper.push(RationalAngle { k, n });
        }
        LambdaMatrix::from_upper(d, &upper).expect("length matches")
    }

    pub fn d(&self) -> usize {
        self.angles.len()
    }

    pub fn angle(&self, i: usize, j: usize) -> RationalAngle {
        self.angles[i][j]
    }

    pub fn lambda(&self, i: usize, j: usize) -> C64 {
        self.angles[i][j].q()
    }

    pub fn angles(&self) -> &[Vec<RationalAngle>] {
        &self.angles
    }

    /// N = lcm of all denominators.
    pub fn order(&self) -> u64 {
        self.angles
            .iter()
            .flatten()
            .fold(1, |acc, a| lcm(acc, a.n()))
    }

    pub fn negated(&self) -> Self {
        LambdaMatrix {
            angles: self
                .angles
                .iter()
                .map(|row| row.iter().map(|a| a.negated()).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Commutation {
    Q(RationalAngle),
    Lambda(LambdaMatrix),
}

impl Commutation {
    fn lambda(&self, i: usize, j: usize) -> C64 {
        match self {
            Commutation::Q(a) => match (i, j) {
                (0, 1) => a.q(),
                (1, 0) => a.q().conj(),
                _ => ONE,
            },
            Commutation::Lambda(l) => l.lambda(i, j),
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Commutation::Q(_) => Some(2),
            Commutation::Lambda(l) => Some(l.d()),
        }
    }

    pub fn transposed(&self) -> Self {
        match self {
            Commutation::Q(a) => Commutation::Q(a.negated()),
            Commutation::Lambda(l) => Commutation::Lambda(l.negated()),
        }
    }
}

/// A d-tuple of operators on C^m, held as a direct sum of blocks.
#[derive(Clone, Debug)]
pub struct OperatorTuple {
    d: usize,
    /// `blocks[b][i]` is the i-th operator restricted to block b.
    blocks: Vec<Vec<ComplexMatrix>>,
    commutation: Option<Commutation>,
}

impl OperatorTuple {
    pub fn new(matrices: Vec<ComplexMatrix>, commutation: Option<Commutation>) -> Result<Self> {
        Self::from_blocks(vec![matrices], commutation)
    }

    pub fn from_blocks(
        blocks: Vec<Vec<ComplexMatrix>>,
        commutation: Option<Commutation>,
    ) -> Result<Self> {
        let d = blocks.first().map(|b| b.len()).unwrap_or(0);
        if d == 0 || blocks.is_empty() {
            return Err(Error::dimension("tuple needs at least one operator and one block"));
        }
        for (b, block) in blocks.iter().enumerate() {
            if block.len() != d {
                return Err(Error::dimension(format!("block {b} has {} operators, expected {d}", block.len())));
            }
            let m = block[0].dim();
            if m == 0 || block.iter().any(|t| t.dim() != m) {
                return Err(Error::dimension(format!("block {b} operators differ in size")));
            }
        }
        let t = OperatorTuple {
            d,
            blocks,
            commutation,
        };
        if let Some(c) = &t.commutation {
            if let Some(a) = c.arity() {
                if a != d {
                    return Err(Error::InconsistentCommutation(format!(
                        "commutation data for {a} operators, tuple has {d}"
                    )));
                }
            }
            let (res, unit) = (t.commutation_residual(), t.unitarity_defect());
            if res >= COMMUTATION_TOL || unit >= COMMUTATION_TOL {
                return Err(Error::InconsistentCommutation(format!(
                    "commutation residual {res:.2e}, unitarity defect {unit:.2e}"
                )));
            }
        }
        Ok(t)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b[0].dim()).sum()
    }

    pub fn blocks(&self) -> &[Vec<ComplexMatrix>] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b[0].dim()).collect()
    }

    pub fn commutation(&self) -> Option<&Commutation> {
        self.commutation.as_ref()
    }

    pub fn without_commutation(mut self) -> Self {
        self.commutation = None;
        self
    }

    /// Dense i-th operator (direct sum of its blocks).
    pub fn matrix(&self, i: usize) -> ComplexMatrix {
        if self.blocks.len() == 1 {
            return self.blocks[0][i].clone();
        }
        let parts: Vec<ComplexMatrix> = self.blocks.iter().map(|b| b[i].clone()).collect();
        direct_sum(&parts)
    }

    pub fn matrices(&self) -> Vec<ComplexMatrix> {
        (0..self.d).map(|i| self.matrix(i)).collect()
    }

    /// Σ_i c_i t_i blockwise.
    pub fn combination(&self, coeffs: &[C64]) -> Vec<ComplexMatrix> {
        self.blocks
            .iter()
            .map(|block| {
                let mut acc = ComplexMatrix::zeros(block[0].dim());
                for (t, c) in block.iter().zip(coeffs) {
                    if *c != ZERO {
                        acc = &acc + &t.scale(*c);
                    }
                }
                acc
            })
            .collect()
    }

    /// max ‖t_i t_j − λ_ij t_j t_i‖ (entrywise) against the claimed data;
    /// zero when no data is attached.
    pub fn commutation_residual(&self) -> f64 {
        let Some(c) = &self.commutation else {
            return 0.0;
        };
        let mut worst = 0.0f64;
        for block in &self.blocks {
            for i in 0..self.d {
                for j in i + 1..self.d {
                    let lhs = &block[i] * &block[j];
                    let rhs = (&block[j] * &block[i]).scale(c.lambda(i, j));
                    worst = worst.max(lhs.max_abs_diff(&rhs));
                }
            }
        }
        worst
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|t| t.unitarity_defect())
            .fold(0.0, f64::max)
    }

    /// Splits every block further along its joint sparsity pattern.
    pub fn refine_blocks(&self, zero_tol: f64) -> Self {
        let mut out = Vec::new();
        for block in &self.blocks {
            let comps = block_components(block, zero_tol);
            if comps.len() == 1 {
                out.push(block.clone());
                continue;
            }
            for idx in comps {
                out.push(block.iter().map(|t| t.principal(&idx)).collect());
            }
        }
        OperatorTuple {
            d: self.d,
            blocks: out,
            commutation: self.commutation.clone(),
        }
    }

    /// W* t_i W for a unitary W on the full space (densifies).
    pub fn conjugate(&self, w: &ComplexMatrix) -> Result<Self> {
        if w.dim() != self.dim() {
            return Err(Error::dimension("conjugating unitary has wrong size"));
        }
        let mats = self.matrices().iter().map(|t| t.conjugate_by(w)).collect();
        Ok(OperatorTuple {
            d: self.d,
            blocks: vec![mats],
            commutation: self.commutation.clone(),
        })
    }

    /// Treats the operators as self-adjoint generators (drops adjoints in
    /// downstream constraint sets when they coincide).
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.blocks.iter().flatten().all(|t| t.is_hermitian(tol))
    }

    pub fn to_json(&self) -> Result<String> {
        let commutation = self.commutation.as_ref().map(|c| match c {
            Commutation::Q(a) => CommutationJson::Q { k: a.k as i64, n: a.n },
            Commutation::Lambda(l) => CommutationJson::Lambda {
                angles: l.angles.clone(),
            },
        });
        let doc = if self.blocks.len() == 1 {
            TupleJson {
                format: 1,
                dim: self.dim(),
                d: self.d,
                matrices: Some(self.blocks[0].clone()),
                blocks: None,
                commutation,
            }
        } else {
            TupleJson {
                format: 1,
                dim: self.dim(),
                d: self.d,
                matrices: None,
                blocks: Some(self.blocks.clone()),
                commutation,
            }
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TupleJson = serde_json::from_str(text)?;
        if doc.format != 1 {
            return Err(Error::schema("format", format!("unsupported format {}", doc.format)));
        }
        let blocks = match (doc.matrices, doc.blocks) {
            (Some(m), None) => vec![m],
            (None, Some(b)) => b,
            _ => {
                return Err(Error::schema(
                    "matrices",
                    "exactly one of 'matrices' or 'blocks' required",
                ))
            }
        };
        for (b, block) in blocks.iter().enumerate() {
            if block.len() != doc.d {
                return Err(Error::schema(
                    format!("blocks[{b}]"),
                    format!("expected {} matrices", doc.d),
                ));
            }
        }
        let commutation = match doc.commutation {
            None => None,
            Some(CommutationJson::Q { k, n }) => Some(Commutation::Q(
                RationalAngle::new(k, n).map_err(|e| Error::schema("commutation", e.to_string()))?,
            )),
            Some(CommutationJson::Lambda { angles }) => Some(Commutation::Lambda(
                LambdaMatrix::from_angles(angles)
                    .map_err(|e| Error::schema("commutation.angles", e.to_string()))?,
            )),
        };
        let t = OperatorTuple::from_blocks(blocks, commutation).map_err(|e| match e {
            Error::Dimension(m) => Error::schema("matrices", m),
            other => other,
        })?;
        if t.dim() != doc.dim {
            return Err(Error::schema("dim", format!("declared {}, found {}", doc.dim, t.dim())));
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct TupleJson {
    format: u32,
    dim: usize,
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<Vec<ComplexMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<Vec<ComplexMatrix>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    commutation: Option<CommutationJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CommutationJson {
    Q { k: i64, n: u64 },
    Lambda { angles: Vec<Vec<RationalAngle>> },
}

/// Clock matrix diag(1, q, …, q^{n−1}).
pub fn clock(angle: RationalAngle) -> ComplexMatrix {
    let n = angle.n() as usize;
    let d: Vec<C64> = (0..n as i64).map(|j| angle.q_pow(j)).collect();
    ComplexMatrix::diag(&d)
}

/// Cyclic shift with V e_j = e_{j+1 mod n}.
pub fn shift(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |i, j| if i == (j + 1) % n { ONE } else { ZERO })
}

/// The standard q-commuting pair (U, V) with UV = qVU.
pub fn standard_pair(angle: RationalAngle) -> OperatorTuple {
    OperatorTuple {
        d: 2,
        blocks: vec![vec![clock(angle), shift(angle.n() as usize)]],
        commutation: Some(Commutation::Q(angle)),
    }
}

fn check_unimodular(z: C64, name: &str) -> Result<()> {
    if (z.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::precondition(format!("{name} = {z} is not unimodular")));
    }
    Ok(())
}

/// (αU, βV).
pub fn phase_scaled_pair(angle: RationalAngle, alpha: C64, beta: C64) -> Result<OperatorTuple> {
    check_unimodular(alpha, "alpha")?;
    check_unimodular(beta, "beta")?;
    Ok(OperatorTuple {
        d: 2,
        blocks: vec![vec![
            clock(angle).scale(alpha),
            shift(angle.n() as usize).scale(beta),
        ]],
        commutation: Some(Commutation::Q(angle)),
    })
}

/// Direct sum of (αU, βV) over a `grid × grid` uniform grid of phases
/// e^{2πi a/(n·grid)} covering the fundamental domain [0, 2π/n)².
pub fn universal_sample(angle: RationalAngle, grid: usize) -> Result<OperatorTuple> {
    universal_sample_capped(angle, grid, crate::numerics::DEFAULT_DIM_CAP * 64)
}

pub fn universal_sample_capped(angle: RationalAngle, grid: usize, cap: usize) -> Result<OperatorTuple> {
    if grid == 0 {
        return Err(Error::precondition("grid must be at least 1"));
    }
    let n = angle.n() as usize;
    let dim = n * grid * grid;
    if dim > cap {
        return Err(Error::Size {
            requested: dim,
            cap,
        });
    }
    let u = clock(angle);
    let v = shift(n);
    let mut blocks = Vec::with_capacity(grid * grid);
    for a in 0..grid {
        for b in 0..grid {
            let alpha = grid_phase(a, n, grid);
            let beta = grid_phase(b, n, grid);
            blocks.push(vec![u.scale(alpha), v.scale(beta)]);
        }
    }
    Ok(OperatorTuple {
        d: 2,
        blocks,
        commutation: Some(Commutation::Q(angle)),
    })
}

/// e^{2πi a/(n·grid)}.
pub fn grid_phase(a: usize, n: usize, grid: usize) -> C64 {
    root_of_unity(a as u64, (n * grid) as u64)
}

/// Entrywise transpose of every operator; q-commuting becomes q̄-commuting.
pub fn transpose_tuple(t: &OperatorTuple) -> OperatorTuple {
    OperatorTuple {
        d: t.d,
        blocks: t
            .blocks
            .iter()
            .map(|b| b.iter().map(|m| m.transpose()).collect())
            .collect(),
        commutation: t.commutation.as_ref().map(|c| c.transposed()),
    }
}

/// Pair with only the second operator transposed, blockwise.
pub fn transpose_second(t: &OperatorTuple) -> OperatorTuple {
    OperatorTuple {
        d: t.d,
        blocks: t
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .enumerate()
                    .map(|(i, m)| if i == 1 { m.transpose() } else { m.clone() })
                    .collect()
            })
            .collect(),
        commutation: None,
    }
}

/// Self-adjoint anti-commuting pair (σ_z, σ_x), i.e. the n = 2 standard pair.
pub fn pauli_pair() -> OperatorTuple {
    standard_pair(RationalAngle { k: 1, n: 2 })
}

/// Jointly diagonal self-adjoint pair whose diagonal value pairs sample the
/// closed unit disk: concentric rings r_j = j/R carrying ⌈2πj⌉ points.
#[derive(Clone, Debug)]
pub struct DiskSample {
    pub tuple: OperatorTuple,
    pub rings: usize,
    pub points: usize,
    /// Ring spacing 1/R, the mesh resolution.
    pub resolution: f64,
}

pub fn disk_points(rings: usize) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, 0.0)];
    for j in 1..=rings {
        let r = j as f64 / rings as f64;
        let count = (2.0 * std::f64::consts::PI * j as f64).ceil() as usize;
        for t in 0..count {
            let a = 2.0 * std::f64::consts::PI * t as f64 / count as f64;
            pts.push((r * a.cos(), r * a.sin()));
        }
    }
    pts
}

/// Smallest ring count giving at least `min_points` samples.
pub fn disk_tuple(min_points: usize) -> DiskSample {
    let mut rings = 1;
    while disk_points(rings).len() < min_points {
        rings += 1;
    }
    let pts = disk_points(rings);
    let blocks = pts
        .iter()
        .map(|&(x, y)| {
            vec![
                ComplexMatrix::diag_real(&[x]),
                ComplexMatrix::diag_real(&[y]),
            ]
        })
        .collect();
    DiskSample {
        tuple: OperatorTuple {
            d: 2,
            blocks,
            commutation: None,
        },
        rings,
        points: pts.len(),
        resolution: 1.0 / rings as f64,
    }
}

/// Canonical form of an irreducible q-commuting pair.
#[derive(Clone, Debug)]
pub struct PairClassification {
    /// u^n = ξ·I.
    pub xi: C64,
    /// v^n = ζ·I.
    pub zeta: C64,
    /// W*uW = λU.
    pub lambda: C64,
    /// W*vW = ηV.
    pub eta: C64,
    pub w: ComplexMatrix,
    /// max(‖W*uW − λU‖, ‖W*vW − ηV‖) entrywise.
    pub residual: f64,
}

/// Principal argument in [0, 2π).
fn arg_2pi(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

pub fn classify_irreducible_pair(t: &OperatorTuple) -> Result<PairClassification> {
    let angle = match t.commutation() {
        Some(Commutation::Q(a)) => *a,
        _ => return Err(Error::precondition("pair must carry a rational q")),
    };
    if t.d() != 2 {
        return Err(Error::precondition("classification needs a pair"));
    }
    let n = angle.n() as usize;
    if t.dim() != n {
        return Err(Error::precondition(format!(
            "pair acts on dimension {}, expected {n}",
            t.dim()
        )));
    }
    let u = t.matrix(0);
    let v = t.matrix(1);
    if commutant_dimension(&[u.clone(), v.clone()])? != 1 {
        return Err(Error::Classification("pair is reducible".into()));
    }
    let scalar = |m: &ComplexMatrix| -> Result<C64> {
        let p = m.pow(n);
        let s = p.trace() / n as f64;
        let dev = p.max_abs_diff(&ComplexMatrix::identity(n).scale(s));
        if dev > 1e-9 {
            return Err(Error::InconsistentCommutation(format!(
                "n-th power deviates from a scalar by {dev:.2e}"
            )));
        }
        Ok(s / s.norm())
    };
    let xi = scalar(&u)?;
    let zeta = scalar(&v)?;

    // The eigenvalue of u with argument in [0, 2π/n).
    let lambda = phase(arg_2pi(xi) / n as f64);
    let shifted = &u - &ComplexMatrix::identity(n).scale(lambda);
    let (_, vecs) = hermitian_eigen(&(&shifted.adjoint() * &shifted))?;
    let h: Vec<C64> = (0..n).map(|i| vecs.get(i, 0)).collect();

    // η₀ principal n-th root of ζ⁻¹; basis η₀^i v^i h.
    let eta0 = phase(zeta.conj().arg() / n as f64);
    let mut w = ComplexMatrix::zeros(n);
    let mut col = h;
    let mut coef = ONE;
    for i in 0..n {
        for (r, c) in col.iter().enumerate() {
            w.set(r, i, coef * c);
        }
        col = (0..n)
            .map(|r| (0..n).map(|c| v.get(r, c) * col[c]).sum())
            .collect();
        coef *= eta0;
    }
    let eta = eta0.conj();
    let ru = u.conjugate_by(&w).max_abs_diff(&clock(angle).scale(lambda));
    let rv = v.conjugate_by(&w).max_abs_diff(&shift(n).scale(eta));
    Ok(PairClassification {
        xi,
        zeta,
        lambda,
        eta,
        w,
        residual: ru.max(rv),
    })
}

/// Unitary with exactly one nonzero entry per column:
/// `M e_j = phase[j] · e_{perm[j]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub perm: Vec<usize>,
    pub phases: Vec<C64>,
}

impl Monomial {
    pub fn identity(n: usize) -> Self {
        Monomial {
            perm: (0..n).collect(),
            phases: vec![ONE; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// self ∘ other.
    pub fn compose(&self, other: &Monomial) -> Monomial {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut phases = vec![ONE; n];
        for j in 0..n {
            let k = other.perm[j];
            perm[j] = self.perm[k];
            phases[j] = self.phases[k] * other.phases[j];
        }
        Monomial { perm, phases }
    }

    pub fn kron(&self, other: &Monomial) -> Monomial {
        let (n, m) = (self.dim(), other.dim());
        let mut perm = vec![0; n * m];
        let mut phases = vec![ONE; n * m];
        for a in 0..n {
            for b in 0..m {
                perm[a * m + b] = self.perm[a] * m + other.perm[b];
                phases[a * m + b] = self.phases[a] * other.phases[b];
            }
        }
        Monomial { perm, phases }
    }

    pub fn scale(&self, c: C64) -> Monomial {
        Monomial {
            perm: self.perm.clone(),
            phases: self.phases.iter().map(|p| p * c).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Monomial) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            if self.perm[j] == other.perm[j] {
                worst = worst.max((self.phases[j] - other.phases[j]).norm());
            } else {
                worst = worst.max(self.phases[j].norm()).max(other.phases[j].norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim());
        for j in 0..self.dim() {
            m.set(self.perm[j], j, self.phases[j]);
        }
        m
    }

    /// Restriction to an invariant index set (listed in the order given).
    pub fn restrict(&self, idx: &[usize]) -> ComplexMatrix {
        let mut pos = vec![usize::MAX; self.dim()];
        for (p, &i) in idx.iter().enumerate() {
            pos[i] = p;
        }
        let mut m = ComplexMatrix::zeros(idx.len());
        for (c, &j) in idx.iter().enumerate() {
            m.set(pos[self.perm[j]], c, self.phases[j]);
        }
        m
    }

    /// Smallest k ≥ 1 with M^k = I, bounded by `limit`.
    pub fn order(&self, limit: usize) -> Option<usize> {
        let id = Monomial::identity(self.dim());
        let mut p = self.clone();
        for k in 1..=limit {
            if p.max_abs_diff(&id) < 1e-9 {
                return Some(k);
            }
            p = p.compose(self);
        }
        None
    }
}

fn clock_monomial(angle: RationalAngle) -> Monomial {
    let n = angle.n() as usize;
    Monomial {
        perm: (0..n).collect(),
        phases: (0..n as i64).map(|j| angle.q_pow(j)).collect(),
    }
}

fn shift_monomial(n: usize) -> Monomial {
    Monomial {
        perm: (0..n).map(|j| (j + 1) % n).collect(),
        phases: vec![ONE; n],
    }
}

/// Λ-commuting tuple in monomial form: one factor C^{n_p} per pair
/// p = {i < j}; u_i is the clock on factor {i, j} (j > i), the shift on
/// factor {j, i} (j < i) and the identity elsewhere.
#[derive(Clone, Debug)]
pub struct LambdaTuple {
    pub lambda: LambdaMatrix,
    pub generators: Vec<Monomial>,
    /// Pair factors (i, j, n_p) in tensor order.
    pub factors: Vec<(usize, usize, u64)>,
}

pub fn lambda_tuple_monomial(lambda: &LambdaMatrix, cap: usize) -> Result<LambdaTuple> {
    let d = lambda.d();
    let mut factors = Vec::new();
    let mut dim: usize = 1;
    for i in 0..d {
        for j in i + 1..d {
            let a = lambda.angle(i, j);
            dim = dim.saturating_mul(a.n() as usize);
            factors.push((i, j, a.n()));
        }
    }
    if dim > cap {
        return Err(Error::Size {
            requested: dim,
            cap,
        });
    }
    let mut generators = Vec::with_capacity(d);
    for g in 0..d {
        let mut m = Monomial::identity(1);
        for &(i, j, n) in &factors {
            let f = if g == i {
                clock_monomial(lambda.angle(i, j))
            } else if g == j {
                shift_monomial(n as usize)
            } else {
                Monomial::identity(n as usize)
            };
            m = m.kron(&f);
        }
        generators.push(m);
    }
    Ok(LambdaTuple {
        lambda: lambda.clone(),
        generators,
        factors,
    })
}

/// Dense Λ-commuting tuple; size-capped.
pub fn lambda_tuple(lambda: &LambdaMatrix) -> Result<OperatorTuple> {
    lambda_tuple_capped(lambda, 1024)
}

pub fn lambda_tuple_capped(lambda: &LambdaMatrix, cap: usize) -> Result<OperatorTuple> {
    let lt = lambda_tuple_monomial(lambda, cap)?;
    let mats = lt.generators.iter().map(|g| g.to_dense()).collect();
    OperatorTuple::new(mats, Some(Commutation::Lambda(lambda.clone())))
}

impl LambdaTuple {
    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    /// max over i < j of the entrywise residual of u_i u_j − λ_ij u_j u_i.
    pub fn residual(&self) -> f64 {
        let d = self.generators.len();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                let lhs = self.generators[i].compose(&self.generators[j]);
                let rhs = self.generators[j]
                    .compose(&self.generators[i])
                    .scale(self.lambda.lambda(i, j));
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
        worst
    }

    /// Orbits of the basis under the generated group: invariant subspaces.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut orbit = vec![s];
            let mut k = 0;
            while k < orbit.len() {
                let x = orbit[k];
                for g in &self.generators {
                    let y = g.perm[x];
                    if !seen[y] {
                        seen[y] = true;
                        orbit.push(y);
                    }
                }
                k += 1;
            }
            orbit.sort_unstable();
            out.push(orbit);
        }
        out
    }

    /// Dimensions of the irreducible summands, found by splitting into
    /// orbits and then diagonalizing a random element of the commutant
    /// of each orbit (obtained by averaging over the finite group
    /// generated by conjugation with the u_i). Eigenvalue multiplicities
    /// of a generic commutant element are the irreducible dimensions.
    pub fn irreducible_dimensions<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        let n_order = self.lambda.order() as usize;
        let mut dims = Vec::new();
        for orbit in self.orbits() {
            let gens: Vec<Monomial> = self
                .generators
                .iter()
                .map(|g| g.restrict_monomial(&orbit))
                .collect();
            let m = orbit.len();
            if m == 1 {
                dims.push(1);
                continue;
            }
            let mut x = crate::numerics::random_hermitian(m, rng);
            for g in &gens {
                let ord = g
                    .order(n_order * m)
                    .ok_or_else(|| Error::NumericalFailure("generator of infinite order".into()))?;
                let mut acc = ComplexMatrix::zeros(m);
                let mut y = x.clone();
                for _ in 0..ord {
                    acc = &acc + &y;
                    y = g.conjugate(&y);
                }
                x = acc.scale_real(1.0 / ord as f64).hermitian_part();
            }
            let (vals, _) = hermitian_eigen(&x)?;
            let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
            let mut run = 1;
            for w in vals.windows(2) {
                if (w[1] - w[0]).abs() <= 1e-8 * scale {
                    run += 1;
                } else {
                    dims.push(run);
                    run = 1;
                }
            }
            dims.push(run);
        }
        dims.sort_unstable();
        Ok(dims)
    }
}

impl Monomial {
    /// Restriction to an invariant index set, as a monomial.
    pub fn restrict_monomial(&self, idx: &[usize]) -> Monomial {
        let mut pos = vec![usize::MAX; self.dim()];
        for (p, &i) in idx.iter().enumerate() {
            pos[i] = p;
        }
        Monomial {
            perm: idx.iter().map(|&j| pos[self.perm[j]]).collect(),
            phases: idx.iter().map(|&j| self.phases[j]).collect(),
        }
    }

    /// M* X M in O(n²).
    pub fn conjugate(&self, x: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |a, b| {
            self.phases[a].conj() * self.phases[b] * x.get(self.perm[a], self.perm[b])
        })
    }

    pub fn from_dense(m: &ComplexMatrix) -> Option<Monomial> {
        let n = m.dim();
        let mut perm = vec![0; n];
        let mut phases = vec![ZERO; n];
        for j in 0..n {
            let mut found = None;
            for i in 0..n {
                if m.get(i, j).norm() > 1e-12 {
                    if found.is_some() {
                        return None;
                    }
                    found = Some(i);
                }
            }
            let i = found?;
            perm[j] = i;
            phases[j] = m.get(i, j);
        }
        Some(Monomial { perm, phases })
    }
}

#[cfg(test)]
mod tests;
