//! Maximum-determinant positive definite completion.
//!
//! The unknowns are the free entries of the full symmetric matrix, one per
//! unordered free pair. Diagonal constancy of the optimum is never imposed,
//! so Toeplitz-ness of the result is an observation, not an assumption.
//!
//! Newton steps are computed without forming the Hessian. With `T = L L^T`
//! the negated Hessian of `log det T(x)` is the Gram matrix of the vectors
//! `L^{-1} E_ij L^{-T}`, and the gradient is their inner product with the
//! identity, so the step is the least-squares solution of
//! `min_d || sum_ij d_ij L^{-1} E_ij L^{-T} - I ||_F`. Solving it by QR keeps
//! the conditioning at the square root of the Hessian's, which matters on
//! the central path where `T` is nearly singular.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymMatrix};
use crate::model::{block_permutation, classify, PartialToeplitz, PatternClass};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_NEWTON: usize = 200;

/// Phase I thresholds are `FEASIBILITY_RTOL * t0`.
pub const FEASIBILITY_RTOL: f64 = 1e-9;
/// Total Newton budget for Phase I across all barrier stages.
pub const PHASE_ONE_MAX_NEWTON: usize = 500;

/// Above this condition estimate of the least-squares factor the Newton step
/// is replaced by a Barzilai-Borwein gradient step.
const LSQ_COND_LIMIT: f64 = 1e12;
const ARMIJO: f64 = 1e-4;

/// Affine parametrization `T(x) = base + sum_v x_v E_{pairs[v]}`.
#[derive(Debug, Clone)]
pub(crate) struct FreeCoords {
    base: SymMatrix,
    pairs: Vec<(usize, usize)>,
}

impl FreeCoords {
    pub(crate) fn new(pt: &PartialToeplitz) -> Self {
        FreeCoords {
            base: pt.base_matrix(),
            pairs: pt.pattern().free_pairs(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.pairs.len()
    }

    pub(crate) fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub(crate) fn assemble(&self, x: &[f64]) -> SymMatrix {
        let mut m = self.base.clone();
        for (&(i, j), &v) in self.pairs.iter().zip(x) {
            m.set(i, j, v);
        }
        m
    }

    pub(crate) fn extract(&self, m: &SymMatrix) -> Vec<f64> {
        self.pairs.iter().map(|&(i, j)| m.get(i, j)).collect()
    }
}

/// Rows of the symmetric vectorization: `(p, q)` with `p >= q`, off-diagonal weight `sqrt 2`.
fn svec_rows(n: usize) -> Vec<(usize, usize, f64)> {
    let mut rows = Vec::with_capacity(n * (n + 1) / 2);
    for p in 0..n {
        for q in 0..=p {
            rows.push((p, q, if p == q { 1.0 } else { std::f64::consts::SQRT_2 }));
        }
    }
    rows
}

/// Columns `svec(L^{-1} E_ij L^{-T})` for every free pair, plus optionally
/// `svec(-L^{-1} L^{-T})` for a diagonal shift variable.
fn newton_design(linv: &DMatrix<f64>, pairs: &[(usize, usize)], with_shift: bool) -> DMatrix<f64> {
    let n = linv.nrows();
    let rows = svec_rows(n);
    let cols = pairs.len() + usize::from(with_shift);
    let mut c = DMatrix::<f64>::zeros(rows.len(), cols);
    for (v, &(i, j)) in pairs.iter().enumerate() {
        for (r, &(p, q, w)) in rows.iter().enumerate() {
            c[(r, v)] = w * (linv[(p, i)] * linv[(q, j)] + linv[(p, j)] * linv[(q, i)]);
        }
    }
    if with_shift {
        let v = pairs.len();
        for (r, &(p, q, w)) in rows.iter().enumerate() {
            let s: f64 = (0..=q).map(|k| linv[(p, k)] * linv[(q, k)]).sum();
            c[(r, v)] = -w * s;
        }
    }
    c
}

fn svec_identity(n: usize) -> DVector<f64> {
    DVector::from_iterator(n * (n + 1) / 2, svec_rows(n).into_iter().map(|(p, q, _)| if p == q { 1.0 } else { 0.0 }))
}

/// Solves `C^T C d = g` through a QR factorization of `C`.
/// Returns `(d, d^T C^T C d)`, or `None` when `R` is too ill-conditioned.
fn gram_solve(c: DMatrix<f64>, g: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let m = c.ncols();
    if m == 0 {
        return Some((DVector::zeros(0), 0.0));
    }
    let r = c.qr().r();
    let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > 0.0) || dmax / dmin > LSQ_COND_LIMIT {
        return None;
    }
    let z = r.tr_solve_upper_triangular(g)?;
    let d = r.solve_upper_triangular(&z)?;
    let dec = z.norm_squared();
    Some((d, dec))
}

/// Phase I verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeasibilityStatus {
    StrictlyFeasible,
    BoundaryOnly,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub status: FeasibilityStatus,
    /// PD completion when strictly feasible, approximately PSD completion when boundary-only.
    pub witness: Option<SymMatrix>,
    /// Smallest eigenvalue of the best completion found.
    pub lambda_min_achieved: f64,
    /// Threshold `1e-9 * t0` used for the classification.
    pub tol: f64,
    pub iterations: usize,
}

/// Phase I from all free entries equal to zero.
pub fn find_pd_completion(pt: &PartialToeplitz) -> FeasibilityReport {
    let start = vec![0.0; pt.pattern().free_pairs().len()];
    find_pd_completion_from(pt, &start)
}

/// Maximizes the smallest eigenvalue of the completion over the free entries,
/// starting from `start` (one value per free pair, row-major).
///
/// Solved as `max lambda s.t. T(x) - lambda I >= 0` with a log-barrier path
/// method; at barrier weight `mu` the central point is within `n mu` of the
/// optimum, and the path is followed until the sign of the optimum is decided
/// at resolution `1e-9 * t0`.
pub fn find_pd_completion_from(pt: &PartialToeplitz, start: &[f64]) -> FeasibilityReport {
    let n = pt.order();
    let t0 = pt.t0();
    let tol = FEASIBILITY_RTOL * t0.max(0.0);

    if !(t0 > 0.0) {
        // Every completion has t0 on the diagonal.
        let worst_offdiag = pt.data().values().fold(0.0_f64, |m, v| m.max(v.abs()));
        let lambda = if t0 < 0.0 { t0 } else { -worst_offdiag };
        let boundary = t0 == 0.0 && worst_offdiag == 0.0;
        return FeasibilityReport {
            status: if boundary {
                FeasibilityStatus::BoundaryOnly
            } else {
                FeasibilityStatus::Infeasible
            },
            witness: boundary.then(|| SymMatrix::zeros(n)),
            lambda_min_achieved: lambda,
            tol,
            iterations: 0,
        };
    }

    let coords = FreeCoords::new(pt);
    assert_eq!(start.len(), coords.len(), "start vector has the wrong length");
    let scale = pt.scale();
    let mut x = start.to_vec();
    let mut lambda = coords.assemble(&x).min_eigenvalue() - scale;
    let mut mu = scale;
    let mu_min = 0.01 * tol / n as f64;
    let rhs_i = svec_identity(n);
    let mut iterations = 0;

    let objective = |x: &[f64], lambda: f64, mu: f64| -> Option<f64> {
        let mut m = coords.assemble(x);
        m.add_diagonal(-lambda);
        m.cholesky().map(|c| lambda / mu + c.log_det())
    };

    'stages: loop {
        let stage_tol = if mu <= mu_min { 1e-12 } else { 1e-8 };
        loop {
            if iterations >= PHASE_ONE_MAX_NEWTON {
                break 'stages;
            }
            let mut m = coords.assemble(&x);
            m.add_diagonal(-lambda);
            let Some(chol) = m.cholesky() else { break 'stages };
            let f = lambda / mu + chol.log_det();
            let c = newton_design(&chol.l_inverse(), coords.pairs(), true);
            let mut g = c.tr_mul(&rhs_i);
            let last = g.len() - 1;
            g[last] += 1.0 / mu;
            let Some((d, dec)) = gram_solve(c, &g) else { break 'stages };
            iterations += 1;
            if dec <= stage_tol {
                break;
            }
            let slope = g.dot(&d);
            let mut t = if dec.sqrt() > 0.25 { 1.0 / (1.0 + dec.sqrt()) } else { 1.0 };
            let mut gain = None;
            for _ in 0..60 {
                let xt: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                let lt = lambda + t * d[last];
                if let Some(ft) = objective(&xt, lt, mu) {
                    if ft >= f + ARMIJO * t * slope || (dec < 1e-10 && ft >= f - 1e-12 * (1.0 + f.abs())) {
                        x = xt;
                        lambda = lt;
                        gain = Some(ft - f);
                        break;
                    }
                }
                t *= 0.5;
            }
            // No step, or one lost in rounding: the stage is as centred as it will get.
            match gain {
                Some(g) if g > 1e-15 * (1.0 + f.abs()) => {}
                _ => break,
            }
        }

        let lam_lo = coords.assemble(&x).min_eigenvalue();
        let gap = n as f64 * mu;
        if lam_lo > tol.max(2.0 * gap) || lambda + 2.0 * gap < -tol || mu <= mu_min {
            break;
        }
        mu *= 0.1;
    }

    let witness = coords.assemble(&x);
    let lambda_min_achieved = witness.min_eigenvalue();
    let status = if lambda_min_achieved > tol && witness.is_positive_definite() {
        FeasibilityStatus::StrictlyFeasible
    } else if lambda_min_achieved < -tol {
        FeasibilityStatus::Infeasible
    } else {
        FeasibilityStatus::BoundaryOnly
    };
    FeasibilityReport {
        status,
        witness: (status != FeasibilityStatus::Infeasible).then_some(witness),
        lambda_min_achieved,
        tol,
        iterations,
    }
}

/// A free entry of the completion, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub completion: SymMatrix,
    pub inverse: SymMatrix,
    /// `max |inverse_ij|` over free positions.
    pub certificate_residual: f64,
    /// Max over diagonals of the spread (max - min) of the entries on it.
    pub toeplitz_deviation: f64,
    pub log_det: f64,
    pub iterations: usize,
    /// Squared Newton decrement at termination.
    pub newton_decrement: f64,
    /// `log det` after each accepted step, starting with the initial point.
    pub log_det_trace: Vec<f64>,
    pub free_entries: Vec<FreeEntry>,
}

impl CompletionResult {
    /// `certificate_residual / max |inverse|`.
    pub fn relative_certificate(&self) -> f64 {
        self.certificate_residual / self.inverse.max_abs().max(f64::MIN_POSITIVE)
    }

    fn from_matrix(pt: &PartialToeplitz, completion: SymMatrix, chol: &Cholesky) -> Self {
        let pairs = pt.pattern().free_pairs();
        let inverse = chol.inverse();
        let certificate_residual = pairs
            .iter()
            .fold(0.0_f64, |m, &(i, j)| m.max(inverse.get(i, j).abs()));
        let free_entries = pairs
            .iter()
            .map(|&(i, j)| FreeEntry { i, j, value: completion.get(i, j) })
            .collect();
        let log_det = chol.log_det();
        CompletionResult {
            toeplitz_deviation: toeplitz_deviation(&completion),
            completion,
            inverse,
            certificate_residual,
            log_det,
            iterations: 0,
            newton_decrement: 0.0,
            log_det_trace: vec![log_det],
            free_entries,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxdetOptions {
    /// Convergence threshold on the gradient max-norm and squared Newton decrement.
    pub tol: f64,
    pub max_iterations: usize,
    /// Initial free-entry vector; used only if it yields a PD matrix.
    pub start: Option<Vec<f64>>,
}

impl Default for MaxdetOptions {
    fn default() -> Self {
        MaxdetOptions {
            tol: DEFAULT_TOL,
            max_iterations: DEFAULT_MAX_NEWTON,
            start: None,
        }
    }
}

pub fn maxdet_complete(pt: &PartialToeplitz, tol: f64) -> Result<CompletionResult> {
    maxdet_complete_with(
        pt,
        &MaxdetOptions {
            tol,
            ..MaxdetOptions::default()
        },
    )
}

/// Unique maximizer of `log det` over the positive definite completions.
pub fn maxdet_complete_with(pt: &PartialToeplitz, opts: &MaxdetOptions) -> Result<CompletionResult> {
    let coords = FreeCoords::new(pt);
    let warm = opts
        .start
        .as_ref()
        .filter(|s| s.len() == coords.len() && coords.assemble(s).cholesky().is_some())
        .cloned();
    let x0 = match warm {
        Some(x) => x,
        None => {
            let report = find_pd_completion(pt);
            match (report.status, report.witness) {
                (FeasibilityStatus::StrictlyFeasible, Some(w)) => coords.extract(&w),
                _ => {
                    return Err(Error::NotStrictlyFeasible {
                        lambda_min: report.lambda_min_achieved,
                    })
                }
            }
        }
    };
    newton_maxdet(pt, &coords, x0, opts)
}

fn newton_maxdet(
    pt: &PartialToeplitz,
    coords: &FreeCoords,
    mut x: Vec<f64>,
    opts: &MaxdetOptions,
) -> Result<CompletionResult> {
    let n = pt.order();
    let tol = opts.tol;
    let rhs = svec_identity(n);
    let mut chol = coords
        .assemble(&x)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let mut f = chol.log_det();
    let mut trace = vec![f];
    let mut prev_dec = f64::INFINITY;
    let mut stagnant = 0;
    let mut stalls = 0;
    let mut bb_state: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut dec = f64::INFINITY;

    for it in 0..opts.max_iterations {
        let c = newton_design(&chol.l_inverse(), coords.pairs(), false);
        let g = c.tr_mul(&rhs);
        let grad_max = g.amax();
        let step = gram_solve(c, &g);
        dec = step.as_ref().map_or(f64::INFINITY, |s| s.1);
        if grad_max <= 1e-3 * tol || dec <= tol * tol {
            // One last full step; at this distance Newton is quadratically convergent.
            if let Some((d, _)) = &step {
                let xt: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
                if let Some(ct) = coords.assemble(&xt).cholesky() {
                    if ct.log_det() >= f - 1e-12 * (1.0 + f.abs()) {
                        x = xt;
                        chol = ct;
                    }
                }
            }
            return Ok(finish(pt, coords, &x, chol, it, dec, trace));
        }
        if dec <= tol {
            stagnant = if dec > 0.25 * prev_dec { stagnant + 1 } else { 0 };
            if stagnant >= 3 {
                return Ok(finish(pt, coords, &x, chol, it, dec, trace));
            }
        }
        prev_dec = dec;

        let (d, slope) = match step {
            Some((d, dec)) => {
                bb_state = None;
                (d, dec)
            }
            None => {
                // Barzilai-Borwein gradient step.
                let gv: Vec<f64> = g.iter().copied().collect();
                let alpha = match &bb_state {
                    Some((xp, gp)) => {
                        let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                        let y: Vec<f64> = gv.iter().zip(gp).map(|(a, b)| a - b).collect();
                        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                        let ss: f64 = s.iter().map(|a| a * a).sum();
                        if sy < 0.0 {
                            ss / -sy
                        } else {
                            1e-3
                        }
                    }
                    None => 1e-3 / grad_max.max(1.0),
                };
                bb_state = Some((x.clone(), gv));
                let d = g.clone() * alpha;
                let slope = g.dot(&d);
                (d, slope)
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            if let Some(ct) = coords.assemble(&xt).cholesky() {
                let ft = ct.log_det();
                let armijo = ft > f && ft >= f + ARMIJO * t * slope;
                let flat = slope < 1e-12 && ft >= f - 1e-12 * (1.0 + f.abs());
                if armijo || flat {
                    accepted = Some((xt, ct, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let progressed = accepted
            .as_ref()
            .is_some_and(|(_, _, ft)| ft - f > 1e-15 * (1.0 + f.abs()));
        let had_step = accepted.is_some();
        if let Some((xt, ct, ft)) = accepted {
            x = xt;
            chol = ct;
            f = ft;
            trace.push(f);
        }
        if progressed {
            stalls = 0;
            continue;
        }
        // No measurable gain: log det is only known to about n eps cond(T), so a
        // decrement below that floor is as converged as the arithmetic allows.
        stalls += 1;
        if dec <= tol.max(rounding_floor(n, &chol)) {
            return Ok(finish(pt, coords, &x, chol, it, dec, trace));
        }
        if !had_step || stalls >= 3 {
            return Err(Error::MaxIterations {
                iterations: it,
                decrement: dec,
            });
        }
    }
    Err(Error::MaxIterations {
        iterations: opts.max_iterations,
        decrement: dec,
    })
}

/// Smallest squared Newton decrement whose predicted gain is visible in `log det`.
fn rounding_floor(n: usize, chol: &Cholesky) -> f64 {
    let l = chol.l();
    let (lo, hi) = (0..n).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
        let v = l[(i, i)].abs();
        (lo.min(v), hi.max(v))
    });
    let cond = (hi / lo).powi(2);
    1e3 * n as f64 * f64::EPSILON * cond
}

fn finish(
    pt: &PartialToeplitz,
    coords: &FreeCoords,
    x: &[f64],
    chol: Cholesky,
    iterations: usize,
    dec: f64,
    trace: Vec<f64>,
) -> CompletionResult {
    let mut r = CompletionResult::from_matrix(pt, coords.assemble(x), &chol);
    r.iterations = iterations;
    r.newton_decrement = dec;
    r.log_det_trace = trace;
    r
}

/// Max over diagonals `d` of (max - min) of the entries on diagonal `d`.
pub fn toeplitz_deviation(m: &SymMatrix) -> f64 {
    let n = m.order();
    let mut worst = 0.0_f64;
    for d in 0..n {
        let (lo, hi) = (0..n - d).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let v = m.get(i + d, i);
            (lo.min(v), hi.max(v))
        });
        worst = worst.max(hi - lo);
    }
    worst
}

/// `(deviation <= tol * (1 + max |entry|), deviation)`.
pub fn is_toeplitz(m: &SymMatrix, tol: f64) -> (bool, f64) {
    let dev = toeplitz_deviation(m);
    (dev <= tol * (1.0 + m.max_abs()), dev)
}

/// Mean of each diagonal, `[t_0, ..., t_{n-1}]`.
pub fn diagonal_means(m: &SymMatrix) -> Vec<f64> {
    let n = m.order();
    (0..n)
        .map(|d| (0..n - d).map(|i| m.get(i + d, i)).sum::<f64>() / (n - d) as f64)
        .collect()
}

/// Completes a P1 or P2 partial matrix through its block decomposition:
/// each distinct block is completed once, and entries between blocks are zero.
pub fn structured_complete(pt: &PartialToeplitz, class: PatternClass) -> Result<CompletionResult> {
    if !matches!(class, PatternClass::P1 { .. } | PatternClass::P2 { .. }) {
        return Err(Error::class_mismatch(&format!("P1 or P2 (got {class})")));
    }
    let bd = block_permutation(pt, class)?;
    let n = pt.order();

    // Blocks of equal size carry identical partial data.
    let mut solved: Vec<(usize, SymMatrix, SymMatrix, f64)> = Vec::new();
    let mut iterations = 0;
    for block in &bd.blocks {
        if solved.iter().any(|s| s.0 == block.size) {
            continue;
        }
        let (completion, inverse, log_det) = match &block.partial {
            None => {
                if !(pt.t0() > 0.0) {
                    return Err(Error::NotStrictlyFeasible { lambda_min: pt.t0() });
                }
                (
                    SymMatrix::from_fn(1, |_, _| pt.t0()),
                    SymMatrix::from_fn(1, |_, _| 1.0 / pt.t0()),
                    pt.t0().ln(),
                )
            }
            Some(bp) => {
                let r = maxdet_complete(bp, DEFAULT_TOL)?;
                iterations += r.iterations;
                if let PatternClass::P2 { r: rr, .. } = class {
                    // The two entries of free diagonal r-1 agree by K-symmetry.
                    let a = r.completion.get(rr - 1, 0);
                    let b = r.completion.get(rr, 1);
                    if (a - b).abs() > 1e-8 * (1.0 + bp.scale()) {
                        return Err(Error::StructureViolation(format!(
                            "P2 block free entries differ: {a} vs {b}"
                        )));
                    }
                }
                (r.completion, r.inverse, r.log_det)
            }
        };
        solved.push((block.size, completion, inverse, log_det));
    }

    let loc = bd.block_of_position();
    let mut origin = vec![(0usize, 0usize); n];
    for (a, &orig) in bd.permutation.iter().enumerate() {
        origin[orig] = loc[a];
    }
    let pick = |size: usize| solved.iter().find(|s| s.0 == size).unwrap();
    let fill = |which: usize| {
        SymMatrix::from_fn(n, |i, j| {
            let (bi, oi) = origin[i];
            let (bj, oj) = origin[j];
            if bi != bj {
                return 0.0;
            }
            let s = pick(bd.blocks[bi].size);
            if which == 0 {
                s.1.get(oi, oj)
            } else {
                s.2.get(oi, oj)
            }
        })
    };
    let completion = fill(0);
    let inverse = fill(1);
    let log_det = bd.blocks.iter().map(|b| pick(b.size).3).sum();

    let pairs = pt.pattern().free_pairs();
    Ok(CompletionResult {
        certificate_residual: pairs.iter().fold(0.0_f64, |m, &(i, j)| m.max(inverse.get(i, j).abs())),
        toeplitz_deviation: toeplitz_deviation(&completion),
        free_entries: pairs
            .iter()
            .map(|&(i, j)| FreeEntry { i, j, value: completion.get(i, j) })
            .collect(),
        completion,
        inverse,
        log_det,
        iterations,
        newton_decrement: 0.0,
        log_det_trace: vec![log_det],
    })
}

/// Preferred fast path for a pattern: the first of P1, P2 among its classes.
pub fn structured_class(pt: &PartialToeplitz) -> Option<PatternClass> {
    classify(pt.pattern())
        .into_iter()
        .find(|c| matches!(c, PatternClass::P1 { .. } | PatternClass::P2 { .. }))
}

/// Structured completion when the pattern allows it, otherwise the generic solver.
pub fn complete_auto(pt: &PartialToeplitz, tol: f64) -> Result<CompletionResult> {
    match structured_class(pt) {
        Some(class) => structured_complete(pt, class),
        None => maxdet_complete(pt, tol),
    }
}
