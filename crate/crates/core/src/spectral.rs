//! Dilation constants of q-commuting pairs.
//!
//! For the universal pair at angle θ = k/n the fibers are (αU, βV) with
//! α, β on the circle, so ‖u + u* + v + v*‖ is the supremum over the phase
//! torus of ‖H(α, β)‖, H(α, β) = αU + ᾱU* + βV + β̄V*. Conjugating by V or
//! U multiplies α or β by q, so [0, 2π/n)² is a fundamental domain.
//!
//! The supremum is bracketed by branch-and-bound. Two upper bounds on a
//! square cell of half-width h are combined:
//!   * Lipschitz: ‖H‖ moves by at most 2|Δa| + 2|Δb|, so f(centre) + 4h.
//!   * Curvature: for unit x, x*H x has Hessian ≥ −2I in (a, b), hence
//!     ‖H‖ + |θ|² is convex and f ≤ max over corners + 2h².
//! The second one is what makes 1e-7 brackets cheap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigenvalues, operator_norm, phase, ComplexMatrix, C64};
use crate::tuples::{clock, shift, transpose_second, universal_sample, RationalAngle};

/// Cells examined before giving up on the requested tolerance.
pub const DEFAULT_BUDGET: usize = 2_000_000;
/// Initial cells per side of the fundamental domain.
const START_GRID: usize = 8;

/// αU + ᾱU* + βV + β̄V*.
pub fn harper_matrix(angle: RationalAngle, alpha: C64, beta: C64) -> Result<ComplexMatrix> {
    for (z, name) in [(alpha, "alpha"), (beta, "beta")] {
        if (z.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::precondition(format!("{name} = {z} is not unimodular")));
        }
    }
    let n = angle.n() as usize;
    let u = clock(angle).scale(alpha);
    let v = shift(n).scale(beta);
    let h = &(&u + &u.adjoint()) + &(&v + &v.adjoint());
    // Exactly Hermitian.
    Ok(h.hermitian_part())
}

fn fiber_norm(angle: RationalAngle, a: f64, b: f64) -> f64 {
    let h = harper_matrix(angle, phase(a), phase(b)).expect("unimodular by construction");
    let ev = hermitian_eigenvalues(&h).expect("small Hermitian eigenproblem");
    ev[0].abs().max(ev[ev.len() - 1].abs())
}

#[derive(Clone, Debug, Serialize)]
pub struct NormBracket {
    /// Attained value ‖H(α*, β*)‖: a lower bound on the supremum.
    pub norm: f64,
    /// Supremum ≤ norm + error_bound.
    pub error_bound: f64,
    /// Arguments of the best fiber found.
    pub argmax: (f64, f64),
    /// Finest grid reached, in cells per side of the fundamental domain.
    pub grid_final: u64,
    pub cells: usize,
    /// False when the budget ran out before `error_bound ≤ tol`.
    pub converged: bool,
}

struct Cell {
    upper: f64,
    depth: u32,
    i: u64,
    j: u64,
    corners: [f64; 4],
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    // Largest upper bound first; ties broken on position so runs are
    // reproducible.
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.depth.cmp(&self.depth))
            .then_with(|| other.i.cmp(&self.i))
            .then_with(|| other.j.cmp(&self.j))
    }
}

/// sup over the phase torus of ‖H(α, β)‖, bracketed to `tol`.
pub fn universal_norm(angle: RationalAngle, tol: f64) -> Result<NormBracket> {
    universal_norm_with_budget(angle, tol, DEFAULT_BUDGET)
}

pub fn universal_norm_with_budget(angle: RationalAngle, tol: f64, budget: usize) -> Result<NormBracket> {
    if !(tol >= 1e-9) {
        return Err(Error::precondition("tol must be at least 1e-9"));
    }
    let side = TAU / angle.n() as f64;
    // Cell (depth, i, j) spans [i, i+1]·w × [j, j+1]·w, w = side/(G0·2^depth).
    let width = |depth: u32| side / (START_GRID as f64 * 2f64.powi(depth as i32));
    let eval = |depth: u32, i: u64, j: u64| fiber_norm(angle, i as f64 * width(depth), j as f64 * width(depth));
    let bound = |depth: u32, i: u64, j: u64, corners: &[f64; 4]| {
        let h = 0.5 * width(depth);
        let centre = fiber_norm(angle, (i as f64 + 0.5) * width(depth), (j as f64 + 0.5) * width(depth));
        let top = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ((centre + 4.0 * h).min(top + 2.0 * h * h), centre)
    };

    let g0 = START_GRID as u64;
    let nodes: Vec<f64> = (0..=g0)
        .flat_map(|i| (0..=g0).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(i, j)| eval(0, i, j))
        .collect();
    let node = |i: u64, j: u64| nodes[(i * (g0 + 1) + j) as usize];

    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    let consider = |v: f64, a: f64, b: f64, best: &mut (f64, (f64, f64))| {
        if v > best.0 {
            *best = (v, (a, b));
        }
    };
    let mut heap = BinaryHeap::new();
    for i in 0..g0 {
        for j in 0..g0 {
            let corners = [node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)];
            let (upper, centre) = bound(0, i, j, &corners);
            consider(corners[0], i as f64 * width(0), j as f64 * width(0), &mut best);
            consider(
                centre,
                (i as f64 + 0.5) * width(0),
                (j as f64 + 0.5) * width(0),
                &mut best,
            );
            heap.push(Cell {
                upper,
                depth: 0,
                i,
                j,
                corners,
            });
        }
    }

    let mut cells = heap.len();
    let mut max_depth = 0;
    let mut converged = false;
    let mut upper = f64::INFINITY;
    while let Some(cell) = heap.pop() {
        upper = cell.upper;
        if upper - best.0 <= tol {
            converged = true;
            break;
        }
        if cells >= budget {
            break;
        }
        let d = cell.depth + 1;
        max_depth = max_depth.max(d);
        let (i0, j0) = (2 * cell.i, 2 * cell.j);
        // Grid values at depth d: the parent's corners plus five new points.
        let mut grid = [[0.0; 3]; 3];
        grid[0][0] = cell.corners[0];
        grid[2][0] = cell.corners[1];
        grid[0][2] = cell.corners[2];
        grid[2][2] = cell.corners[3];
        for (di, dj) in [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)] {
            let v = eval(d, i0 + di, j0 + dj);
            grid[di as usize][dj as usize] = v;
            consider(v, (i0 + di) as f64 * width(d), (j0 + dj) as f64 * width(d), &mut best);
        }
        for (si, sj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let corners = [grid[si][sj], grid[si + 1][sj], grid[si][sj + 1], grid[si + 1][sj + 1]];
            let (i, j) = (i0 + si as u64, j0 + sj as u64);
            let (up, centre) = bound(d, i, j, &corners);
            consider(centre, (i as f64 + 0.5) * width(d), (j as f64 + 0.5) * width(d), &mut best);
            heap.push(Cell {
                upper: up,
                depth: d,
                i,
                j,
                corners,
            });
            cells += 1;
        }
    }
    let error_bound = (upper - best.0).max(0.0);

    // Guard: the bracket must dominate the four corners of the torus.
    for (a, b) in [(0.0, 0.0), (0.5 * TAU, 0.0), (0.0, 0.5 * TAU), (0.5 * TAU, 0.5 * TAU)] {
        let v = fiber_norm(angle, a, b);
        if v > best.0 + error_bound + 1e-12 {
            return Err(Error::NumericalFailure(format!(
                "torus corner ({a}, {b}) has norm {v} above the bracket {} + {error_bound:e}",
                best.0
            )));
        }
    }
    Ok(NormBracket {
        norm: best.0,
        error_bound,
        argmax: best.1,
        grid_final: g0 << max_depth,
        cells,
        converged,
    })
}

/// max of ‖H‖ over the phases used by `universal_sample(angle, grid)`.
pub fn grid_norm(angle: RationalAngle, grid: usize) -> Result<f64> {
    let s = universal_sample(angle, grid)?;
    let mut best = 0.0f64;
    for block in s.blocks() {
        let (u, v) = (&block[0], &block[1]);
        let h = &(u + &u.adjoint()) + &(v + &v.adjoint());
        best = best.max(operator_norm(&h)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct DilationConstantResult {
    pub angle: RationalAngle,
    pub norm: f64,
    pub norm_error_bound: f64,
    /// 4 / norm.
    pub constant: f64,
    /// |c_θ − constant| ≤ error_bound.
    pub error_bound: f64,
    pub grid_final: u64,
    pub converged: bool,
    pub tol: f64,
}

pub fn dilation_constant(angle: RationalAngle, tol: f64) -> Result<DilationConstantResult> {
    let b = universal_norm(angle, tol)?;
    if !(2.0 - 1e-9..=4.0 + 1e-9).contains(&b.norm) {
        return Err(Error::NumericalFailure(format!(
            "norm {} outside [2, 4] at angle {angle}",
            b.norm
        )));
    }
    let (l, e) = (b.norm, b.error_bound);
    Ok(DilationConstantResult {
        angle,
        norm: l,
        norm_error_bound: e,
        constant: 4.0 / l,
        error_bound: 4.0 * e / (l * (l + e)),
        grid_final: b.grid_final,
        converged: b.converged,
        tol,
    })
}

/// c_{θ,θ'} depends only on γ = θ − θ' mod 1.
pub fn dilation_constant_pair(
    theta: RationalAngle,
    theta_prime: RationalAngle,
    tol: f64,
) -> Result<DilationConstantResult> {
    dilation_constant(theta.minus(&theta_prime), tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransposeCheck {
    pub angle: RationalAngle,
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    /// max |‖x‖ − ‖x'‖| / ‖x‖ over the sampled combinations.
    pub max_deviation: f64,
}

/// Norms of a₀ + a₁u + a₂v + b₁u* + b₂v* on the sampled universal pair
/// and on the same sample with every V transposed.
pub fn transpose_isometry_check(
    angle: RationalAngle,
    grid: usize,
    samples: usize,
    seed: u64,
) -> Result<TransposeCheck> {
    if grid == 0 {
        return Err(Error::precondition("grid must be at least 1"));
    }
    let s = universal_sample(angle, grid)?;
    let t = transpose_second(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<[C64; 5]> = (0..samples)
        .map(|_| {
            std::array::from_fn(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        })
        .collect();
    let norm_of = |blocks: &[Vec<ComplexMatrix>], c: &[C64; 5]| -> Result<f64> {
        let mut best = 0.0f64;
        for b in blocks {
            let (u, v) = (&b[0], &b[1]);
            let n = u.dim();
            let m = &(&(&(&ComplexMatrix::identity(n).scale(c[0]) + &u.scale(c[1])) + &v.scale(c[2]))
                + &u.adjoint().scale(c[3]))
                + &v.adjoint().scale(c[4]);
            best = best.max(operator_norm(&m)?);
        }
        Ok(best)
    };
    let devs: Vec<f64> = coeffs
        .par_iter()
        .map(|c| {
            let x = norm_of(s.blocks(), c)?;
            let y = norm_of(t.blocks(), c)?;
            Ok((x - y).abs() / x.max(1e-300))
        })
        .collect::<Result<_>>()?;
    Ok(TransposeCheck {
        angle,
        grid,
        samples,
        seed,
        max_deviation: devs.into_iter().fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ButterflyRow {
    pub k: u64,
    pub n: u64,
    pub theta: f64,
    pub norm: f64,
    pub constant: f64,
    pub error_bound: f64,
    pub grid_final: u64,
    pub converged: bool,
}

/// c_{k/n} for every reduced k/n in [0, 1) with n ≤ n_max.
pub fn butterfly_scan(n_max: u64, tol: f64) -> Result<Vec<ButterflyRow>> {
    if n_max == 0 {
        return Err(Error::precondition("n_max must be at least 1"));
    }
    let angles: Vec<RationalAngle> = (1..=n_max)
        .flat_map(|n| (0..n).map(move |k| (k, n)))
        .filter_map(|(k, n)| RationalAngle::new(k as i64, n).ok())
        .collect();
    angles
        .par_iter()
        .map(|&a| {
            let r = dilation_constant(a, tol)?;
            Ok(ButterflyRow {
                k: a.k(),
                n: a.n(),
                theta: a.value(),
                norm: r.norm,
                constant: r.constant,
                error_bound: r.error_bound,
                grid_final: r.grid_final,
                converged: r.converged,
            })
        })
        .collect()
}

/// Largest |c_{k/n} − c_{(n−k)/n}| in a scan.
pub fn butterfly_asymmetry(rows: &[ButterflyRow]) -> f64 {
    let mut worst = 0.0f64;
    for r in rows {
        if r.k == 0 {
            continue;
        }
        if let Some(m) = rows.iter().find(|m| m.n == r.n && m.k == r.n - r.k) {
            worst = worst.max((r.constant - m.constant).abs());
        }
    }
    worst
}

pub fn butterfly_csv(rows: &[ButterflyRow]) -> String {
    let mut out = String::from("k,n,theta,norm,constant,error_bound,grid_final\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.17},{:.17},{:.17},{:.3e},{}\n",
            r.k, r.n, r.theta, r.norm, r.constant, r.error_bound, r.grid_final
        ));
    }
    out
}

#[cfg(test)]
mod tests;
