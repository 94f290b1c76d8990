//! Maximum-rank PSD completions as limits of the diagonally shifted central
//! path, the staged fill-in for the relaxed forms, and the singularity-degree
//! probe for cycle patterns `{k, n-k}`.

use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, RankDecision, SymMatrix};
use crate::model::{classify, PartialToeplitz, PatternClass};
use crate::solver::{
    diagonal_means, find_pd_completion, is_toeplitz, maxdet_complete, maxdet_complete_with, CompletionResult,
    FeasibilityStatus, FreeCoords, MaxdetOptions, DEFAULT_TOL,
};

/// Tolerance for the Toeplitz check on path limits.
pub const LIMIT_TOEPLITZ_TOL: f64 = 1e-6;
/// Relative tolerance for the support and complementarity checks on `Z`.
pub const EXPOSING_RTOL: f64 = 1e-6;
/// Two extrapolation windows must agree to this relative accuracy.
pub const EXTRAPOLATION_RTOL: f64 = 1e-4;

/// Geometric schedule `alpha_j = alpha0 * rho^j` for `alpha_j >= alpha_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOptions {
    pub alpha0: f64,
    pub rho: f64,
    pub alpha_min: f64,
    pub tol: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            alpha0: 1.0,
            rho: 0.5,
            alpha_min: 1e-8,
            tol: DEFAULT_TOL,
        }
    }
}

impl PathOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::OutOfRange(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::OutOfRange(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha0) {
            return Err(Error::OutOfRange(format!(
                "alpha_min must lie in (0, alpha0], got {}",
                self.alpha_min
            )));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::OutOfRange(format!("tol must lie in (0, 1e-2], got {}", self.tol)));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut a = self.alpha0;
        while a >= self.alpha_min {
            out.push(a);
            a *= self.rho;
        }
        out
    }
}

/// One solved point of the path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPoint {
    pub alpha: f64,
    /// Free entries of `X(alpha)`, one per free pair in row-major order.
    pub free: Vec<f64>,
    pub log_det: f64,
    pub iterations: usize,
    pub certificate_residual: f64,
}

/// How a limit was obtained from the sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Extrapolation {
    /// Strictly feasible data: the limit is the maximum-determinant completion itself.
    Interior,
    /// The sampled values had stopped moving.
    Converged,
    /// Polynomial extrapolation in `alpha^exponent` through `degree + 1` points.
    Power { exponent: f64, degree: usize },
    /// No consistent extrapolation; the last iterate is reported.
    Raw,
}

#[derive(Debug, Clone)]
pub struct PathLimit {
    pub x_bar: SymMatrix,
    pub z_bar: SymMatrix,
    pub rank_x: usize,
    pub rank_z: usize,
    pub rank_x_decision: RankDecision,
    pub rank_z_decision: RankDecision,
    /// `max |(X Z)_ij|`.
    pub complementarity_residual: f64,
    /// `max |Z_ij|` over free positions.
    pub support_residual: f64,
    pub x_min_eigenvalue: f64,
    pub z_min_eigenvalue: f64,
    pub feasibility: FeasibilityStatus,
    pub extrapolation_x: Extrapolation,
    pub extrapolation_z: Extrapolation,
    pub alpha_trace: Vec<PathPoint>,
}

impl PathLimit {
    pub fn ranks_reliable(&self) -> bool {
        self.rank_x_decision.reliable && self.rank_z_decision.reliable
    }

    /// `complementarity_residual <= 1e-6 (1 + |X|_max |Z|_max)`.
    pub fn complementarity_ok(&self) -> bool {
        self.complementarity_residual <= EXPOSING_RTOL * (1.0 + self.x_bar.max_abs() * self.z_bar.max_abs())
    }

    /// Free entries of `Z` are negligible relative to `|Z|_max`.
    pub fn support_ok(&self) -> bool {
        self.support_residual <= EXPOSING_RTOL * self.z_bar.max_abs()
    }
}

/// `X(alpha)`: the maximum-determinant completion with `t0` replaced by `t0 + alpha`.
pub fn path_point(pt: &PartialToeplitz, alpha: f64) -> Result<CompletionResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::OutOfRange(format!("alpha must be positive, got {alpha}")));
    }
    maxdet_complete(&pt.shifted(alpha), DEFAULT_TOL).map_err(|e| match e {
        Error::NotStrictlyFeasible { lambda_min } => Error::NotPsdCompletable { lambda_min },
        e => e,
    })
}

fn tri_vec(m: &SymMatrix) -> Vec<f64> {
    let n = m.order();
    (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| m.get(i, j)).collect()
}

fn from_tri_vec(n: usize, v: &[f64]) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| v[i * (i + 1) / 2 + j])
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Value at `s = 0` of the polynomial through `(s_i, v_i)` (Neville).
fn neville_at_zero(s: &[f64], v: &[Vec<f64>]) -> Vec<f64> {
    let mut p: Vec<Vec<f64>> = v.to_vec();
    let m = s.len();
    for k in 1..m {
        for i in 0..m - k {
            let (si, sk) = (s[i], s[i + k]);
            p[i] = p[i]
                .iter()
                .zip(&p[i + 1])
                .map(|(a, b)| (si * b - sk * a) / (si - sk))
                .collect();
        }
    }
    p.swap_remove(0)
}

/// Limit as `alpha -> 0` of samples `values[i]` taken at decreasing `alphas[i]`.
///
/// Samples are modelled as polynomials in `s = alpha^p` for `p` in
/// `{1, 1/2, 1/3, 1/4}`. Every window of `degree + 1` consecutive samples gives
/// an estimate, which is compared with the estimate from the window one sample
/// earlier. The pair that agrees best wins: small-`alpha` samples carry
/// rounding noise of order `eps/alpha`, large-`alpha` ones carry truncation
/// error, and the disagreement sees both.
fn extrapolate(alphas: &[f64], values: &[Vec<f64>]) -> (Vec<f64>, Extrapolation) {
    let m = values.len();
    let last = values[m - 1].clone();
    if m < 3 {
        return (last, Extrapolation::Raw);
    }
    let scale = 1.0 + max_norm(&last);
    let d1 = max_norm(&diff(&values[m - 2], &values[m - 3]));
    let d2 = max_norm(&diff(&values[m - 1], &values[m - 2]));
    if d1.max(d2) <= 1e-14 * scale {
        return (last, Extrapolation::Converged);
    }

    let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
    for p in [1.0, 0.5, 1.0 / 3.0, 0.25] {
        let s: Vec<f64> = alphas.iter().map(|a| a.powf(p)).collect();
        for degree in 1..=4usize {
            for end in degree + 2..=m {
                let a = neville_at_zero(&s[end - degree - 1..end], &values[end - degree - 1..end]);
                let b = neville_at_zero(&s[end - degree - 2..end - 1], &values[end - degree - 2..end - 1]);
                let disagreement = max_norm(&diff(&a, &b));
                if best.as_ref().map_or(true, |(d, ..)| disagreement < *d) {
                    best = Some((disagreement, a, p, degree));
                }
            }
        }
    }
    match best {
        Some((d, v, exponent, degree)) if d <= EXTRAPOLATION_RTOL * (1.0 + max_norm(&v)) => {
            (v, Extrapolation::Power { exponent, degree })
        }
        _ => (last, Extrapolation::Raw),
    }
}

fn is_pd_at(coords: &FreeCoords, x: &[f64]) -> bool {
    coords.assemble(x).cholesky().is_some()
}

/// Previous free vector if still PD after the shift decreases, otherwise the
/// first blend toward the Phase I witness that is.
fn warm_start(coords: &FreeCoords, prev: Option<&[f64]>, witness: Option<&[f64]>) -> Option<Vec<f64>> {
    if let Some(p) = prev {
        if is_pd_at(coords, p) {
            return Some(p.to_vec());
        }
    }
    let w = witness?;
    if let Some(p) = prev {
        for s in [0.25, 0.5, 0.75, 0.9, 0.99] {
            let x: Vec<f64> = p.iter().zip(w).map(|(a, b)| (1.0 - s) * a + s * b).collect();
            if is_pd_at(coords, &x) {
                return Some(x);
            }
        }
    }
    is_pd_at(coords, w).then(|| w.to_vec())
}

/// Follows `X(alpha)` and `Z(alpha) = alpha X(alpha)^{-1}` down the schedule and
/// extrapolates both to `alpha = 0`.
pub fn path_limit(pt: &PartialToeplitz, opts: &PathOptions) -> Result<PathLimit> {
    opts.validate()?;
    let n = pt.order();
    let report = find_pd_completion(pt);
    if report.status == FeasibilityStatus::Infeasible {
        return Err(Error::NotPsdCompletable {
            lambda_min: report.lambda_min_achieved,
        });
    }
    let base = FreeCoords::new(pt);
    let witness = report.witness.as_ref().map(|w| base.extract(w));
    let alphas = opts.schedule();

    let mut trace = Vec::with_capacity(alphas.len());
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(alphas.len());
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let shifted = pt.shifted(alpha);
        let coords = FreeCoords::new(&shifted);
        let start = warm_start(&coords, xs.last().map(Vec::as_slice), witness.as_deref());
        let r = maxdet_complete_with(
            &shifted,
            &MaxdetOptions {
                tol: opts.tol,
                start,
                ..MaxdetOptions::default()
            },
        )
        .map_err(|e| match e {
            Error::NotStrictlyFeasible { lambda_min } => Error::NotPsdCompletable { lambda_min },
            e => e,
        })?;
        if !r.completion.is_finite() || !r.inverse.is_finite() {
            return Err(Error::PathDivergence { alpha });
        }
        let free: Vec<f64> = r.free_entries.iter().map(|e| e.value).collect();
        zs.push(tri_vec(&r.inverse.scaled(alpha)));
        trace.push(PathPoint {
            alpha,
            free: free.clone(),
            log_det: r.log_det,
            iterations: r.iterations,
            certificate_residual: r.certificate_residual,
        });
        xs.push(free);
    }

    let (x_bar, z_bar, extrapolation_x, extrapolation_z) = if report.status == FeasibilityStatus::StrictlyFeasible {
        let r = maxdet_complete(pt, opts.tol)?;
        (r.completion, SymMatrix::zeros(n), Extrapolation::Interior, Extrapolation::Interior)
    } else if xs.is_empty() {
        return Err(Error::OutOfRange("empty alpha schedule".into()));
    } else {
        let (free, ex) = extrapolate(&alphas, &xs);
        let (zv, ez) = extrapolate(&alphas, &zs);
        (base.assemble(&free), from_tri_vec(n, &zv), ex, ez)
    };
    if !x_bar.is_finite() || !z_bar.is_finite() {
        return Err(Error::PathDivergence {
            alpha: *alphas.last().unwrap_or(&0.0),
        });
    }

    let rank_x_decision = numerical_rank(&x_bar);
    let rank_z_decision = numerical_rank(&z_bar);
    let complementarity_residual = x_bar.mul(&z_bar).amax();
    let support_residual = pt
        .pattern()
        .free_pairs()
        .iter()
        .fold(0.0_f64, |m, &(i, j)| m.max(z_bar.get(i, j).abs()));
    Ok(PathLimit {
        x_min_eigenvalue: x_bar.min_eigenvalue(),
        z_min_eigenvalue: z_bar.min_eigenvalue(),
        rank_x: rank_x_decision.rank,
        rank_z: rank_z_decision.rank,
        rank_x_decision,
        rank_z_decision,
        complementarity_residual,
        support_residual,
        x_bar,
        z_bar,
        feasibility: report.status,
        extrapolation_x,
        extrapolation_z,
        alpha_trace: trace,
    })
}

fn require_toeplitz_class(pt: &PartialToeplitz) -> Result<()> {
    let ok = classify(pt.pattern())
        .iter()
        .any(|c| matches!(c, PatternClass::P1 { .. } | PatternClass::P2 { .. } | PatternClass::P3 { .. }));
    if ok {
        Ok(())
    } else {
        Err(Error::class_mismatch("P1, P2 or P3"))
    }
}

/// Maximum-rank PSD completion for P1, P2 and P3 patterns; Toeplitz by construction of the limit.
pub fn max_rank_psd_complete(pt: &PartialToeplitz) -> Result<SymMatrix> {
    max_rank_psd_complete_detailed(pt, &PathOptions::default()).map(|l| l.x_bar)
}

pub fn max_rank_psd_complete_detailed(pt: &PartialToeplitz, opts: &PathOptions) -> Result<PathLimit> {
    require_toeplitz_class(pt)?;
    let limit = path_limit(pt, opts)?;
    let (ok, deviation) = is_toeplitz(&limit.x_bar, LIMIT_TOEPLITZ_TOL);
    if !ok {
        return Err(Error::NotToeplitz { deviation });
    }
    Ok(limit)
}

/// Toeplitz PSD completion for the relaxed forms P2' and P3'.
///
/// The leading partial submatrix of order `(r+1)k` (resp. `k+r`) is a P2
/// (resp. P3) instance; its Toeplitz completion fixes every diagonal below
/// that order, and the resulting banded matrix is completed as a P1 instance.
pub fn complete_relaxed(pt: &PartialToeplitz, class: PatternClass) -> Result<SymMatrix> {
    let m = match class {
        PatternClass::P2Prime { k, r } => (r + 1) * k,
        PatternClass::P3Prime { k, r } => k + r,
        _ => return Err(Error::class_mismatch("P2' or P3'")),
    };
    if !class.matches(pt.pattern()) {
        return Err(Error::class_mismatch(&class.to_string()));
    }
    let n = pt.order();
    let stage = |stage: &'static str| move |e: Error| Error::Stage { stage, source: Box::new(e) };

    let lead = pt.leading(m)?;
    let x1 = max_rank_psd_complete(&lead).map_err(stage("leading submatrix"))?;
    if m == n {
        return Ok(x1);
    }
    let a = diagonal_means(&x1);
    let values: Vec<(usize, f64)> = (1..m).map(|d| (d, pt.value(d).unwrap_or(a[d]))).collect();
    let banded = PartialToeplitz::from_values(n, pt.t0(), &values)?;
    max_rank_psd_complete(&banded).map_err(stage("banded extension"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SdVerdict {
    /// Singularity degree 0.
    SlaterHolds,
    SdOne,
    SdAtLeastTwo,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct SdProbe {
    pub verdict: SdVerdict,
    pub rank_x: usize,
    pub rank_z: usize,
    /// Upper bound on the rank of any exposing vector, when certified.
    pub exposing_rank_bound: Option<usize>,
    pub note: Option<String>,
    pub limit: Option<PathLimit>,
}

fn is_cycle_pattern(pt: &PartialToeplitz) -> bool {
    classify(pt.pattern())
        .iter()
        .any(|c| matches!(c, PatternClass::P3 { .. }))
}

pub fn sd_probe(pt: &PartialToeplitz) -> Result<SdProbe> {
    sd_probe_with(pt, &PathOptions::default())
}

pub fn sd_probe_with(pt: &PartialToeplitz, opts: &PathOptions) -> Result<SdProbe> {
    let n = pt.order();
    let report = find_pd_completion(pt);
    match report.status {
        FeasibilityStatus::StrictlyFeasible => {
            return Ok(SdProbe {
                verdict: SdVerdict::SlaterHolds,
                rank_x: n,
                rank_z: 0,
                exposing_rank_bound: Some(0),
                note: None,
                limit: None,
            })
        }
        FeasibilityStatus::Infeasible => {
            return Err(Error::NotPsdCompletable {
                lambda_min: report.lambda_min_achieved,
            })
        }
        FeasibilityStatus::BoundaryOnly => {}
    }

    let limit = path_limit(pt, opts)?;
    let (rank_x, rank_z) = (limit.rank_x, limit.rank_z);
    let inconclusive = |note: String, limit: PathLimit| {
        Ok(SdProbe {
            verdict: SdVerdict::Inconclusive,
            rank_x,
            rank_z,
            exposing_rank_bound: None,
            note: Some(note),
            limit: Some(limit),
        })
    };

    if !is_cycle_pattern(pt) {
        return inconclusive("pattern is not of the form {k, n-k}".into(), limit);
    }
    if !limit.ranks_reliable() {
        return inconclusive(
            format!(
                "rank decision unreliable (spectral gaps {:.3e}, {:.3e})",
                limit.rank_x_decision.gap, limit.rank_z_decision.gap
            ),
            limit,
        );
    }
    if rank_z > 0 && !limit.support_ok() {
        return inconclusive(
            format!("limit Z has free entries up to {:.3e}", limit.support_residual),
            limit,
        );
    }
    if !limit.complementarity_ok() {
        return inconclusive(
            format!("X Z residual {:.3e}", limit.complementarity_residual),
            limit,
        );
    }

    if rank_z >= 1 && rank_x + rank_z == n {
        return Ok(SdProbe {
            verdict: SdVerdict::SdOne,
            rank_x,
            rank_z,
            exposing_rank_bound: Some(rank_z),
            note: None,
            limit: Some(limit),
        });
    }
    if rank_z <= 1 && rank_x + 1 < n {
        if rank_x + 2 != n {
            return inconclusive(
                format!("kernel of X has dimension {}; only dimension 2 is decided", n - rank_x),
                limit,
            );
        }
        return match kernel_admits_definite_exposer(pt, &limit.x_bar) {
            Some(false) => Ok(SdProbe {
                verdict: SdVerdict::SdAtLeastTwo,
                rank_x,
                rank_z,
                exposing_rank_bound: Some(1),
                note: None,
                limit: Some(limit),
            }),
            Some(true) => inconclusive(
                "a rank-2 exposing vector exists but the path limit did not find it".into(),
                limit,
            ),
            None => inconclusive("kernel test is numerically ambiguous".into(), limit),
        };
    }
    inconclusive(format!("ranks {rank_x} + {rank_z} do not decide the degree"), limit)
}

/// For `X` with a two-dimensional kernel `U`, decides whether some `Z = U S U^T`
/// with `S` positive definite vanishes on every free position.
/// `None` when the answer hinges on values at the noise level.
fn kernel_admits_definite_exposer(pt: &PartialToeplitz, x: &SymMatrix) -> Option<bool> {
    let (_, vecs) = x.eigen();
    let u = vecs.columns(0, 2);
    let pairs = pt.pattern().free_pairs();
    if pairs.is_empty() {
        return Some(true);
    }
    // Linear functionals on (s11, s12, s22) giving (U S U^T)_ij.
    let mut c = DMatrix::<f64>::zeros(pairs.len(), 3);
    for (row, &(i, j)) in pairs.iter().enumerate() {
        c[(row, 0)] = u[(i, 0)] * u[(j, 0)];
        c[(row, 1)] = u[(i, 0)] * u[(j, 1)] + u[(i, 1)] * u[(j, 0)];
        c[(row, 2)] = u[(i, 1)] * u[(j, 1)];
    }
    // Zero rows keep V^T square when there are fewer than three constraints.
    let rows = c.nrows().max(3);
    let c = c.resize_vertically(rows, 0.0);
    let svd = c.svd(false, true);
    let v_t = svd.v_t?;
    // Ascending singular values with matching right singular vectors as columns.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = DMatrix::from_fn(3, 3, |r, col| v_t[(order[col], r)]);
    let smax = sv[2];
    if !(smax > 0.0) {
        return Some(true);
    }
    let cutoff = 1e-8 * smax;
    if sv.iter().any(|&s| s > 1e-3 * cutoff && s <= 1e3 * cutoff) {
        return None;
    }
    let null_dim = sv.iter().filter(|&&s| s <= cutoff).count();
    match null_dim {
        3 => Some(true),
        // The null space is the orthogonal complement of the normal `Y`; it
        // contains a PD matrix iff `Y` is indefinite.
        2 => {
            // <w, (s11, s12, s22)> = <Y, S> with the off-diagonal of Y halved.
            let y = Matrix2::new(vecs[(0, 2)], 0.5 * vecs[(1, 2)], 0.5 * vecs[(1, 2)], vecs[(2, 2)]);
            // A numerically singular normal is semidefinite: every S in the
            // complement is singular or indefinite.
            Some(y.determinant() < -1e-10 * y.norm().powi(2))
        }
        1 => {
            let s0 = Matrix2::new(vecs[(0, 0)], vecs[(1, 0)], vecs[(1, 0)], vecs[(2, 0)]);
            Some(s0.determinant() > 1e-10 * s0.norm().powi(2))
        }
        _ => Some(false),
    }
}

/// Scalars `(a, b, c, d)` of a Toeplitz inverse with the cycle zero pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CeForm {
    /// `(a^2 + c^2 - d^2) / a`.
    pub fn predicted_b(&self) -> f64 {
        (self.a * self.a + self.c * self.c - self.d * self.d) / self.a
    }

    /// The full inverse this form describes at order `n`.
    pub fn template(&self, n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |i, j| {
            if i == j {
                if i == 0 || i == n - 1 {
                    self.a
                } else {
                    self.b
                }
            } else if i - j == 1 {
                self.c
            } else if i == n - 1 && j == 0 {
                self.d
            } else {
                0.0
            }
        })
    }
}

/// Reads the `(a, b, c, d)` form off the inverse of a PD Toeplitz matrix whose
/// inverse vanishes in the first column outside rows 0, 1 and `n - 1`.
pub fn ce_inverse_form(t: &SymMatrix) -> Result<CeForm> {
    let n = t.order();
    if n < 3 {
        return Err(Error::Shape(format!("order must be at least 3, got {n}")));
    }
    let (toep, deviation) = is_toeplitz(t, 1e-8);
    if !toep {
        return Err(Error::NotToeplitz { deviation });
    }
    let inv = t.inverse()?;
    let scale = inv.max_abs();
    for k in 2..n - 1 {
        if inv.get(k, 0).abs() > 1e-8 * scale {
            return Err(Error::StructureViolation(format!(
                "inverse entry ({k}, 0) = {:e} is not zero",
                inv.get(k, 0)
            )));
        }
    }
    let form = CeForm {
        a: inv.get(0, 0),
        b: inv.get(1, 1),
        c: inv.get(1, 0),
        d: inv.get(n - 1, 0),
    };
    let mismatch = inv.max_diff(&form.template(n));
    if mismatch > 1e-8 * scale {
        return Err(Error::StructureViolation(format!(
            "inverse deviates from the (a, b, c, d) template by {mismatch:e}"
        )));
    }
    if (form.b - form.predicted_b()).abs() > 1e-8 * form.a.abs() {
        return Err(Error::StructureViolation(format!(
            "b = {} but (a^2 + c^2 - d^2)/a = {}",
            form.b,
            form.predicted_b()
        )));
    }
    Ok(form)
}

/// The matrix `cos((i - j) theta)`, `0 <= theta <= pi/(n-1)`.
pub fn cos_completion(n: usize, theta: f64) -> Result<SymMatrix> {
    if n < 2 {
        return Err(Error::Shape(format!("order must be at least 2, got {n}")));
    }
    let bound = std::f64::consts::PI / (n - 1) as f64;
    if !(theta >= 0.0 && theta <= bound * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange(format!("theta must lie in [0, {bound}], got {theta}")));
    }
    Ok(SymMatrix::from_fn(n, |i, j| ((i - j) as f64 * theta).cos()))
}

/// The instance `{1, n-1}` with data `(1, cos(pi/(n-1)), -1)`.
pub fn cycle_instance(n: usize) -> Result<PartialToeplitz> {
    let theta = std::f64::consts::PI / (n as f64 - 1.0);
    PartialToeplitz::from_values(n, 1.0, &[(1, theta.cos()), (n - 1, -1.0)])
}

#[derive(Debug, Clone, Serialize)]
pub struct ExposingCheck {
    pub n: usize,
    pub verdict: SdVerdict,
    pub rank_x: usize,
    pub rank_z: usize,
    /// Largest interior diagonal entry `|Z_ii|`, `0 < i < n-1`.
    pub interior_b: f64,
    /// `Z_00`, `Z_{n-1,n-1}`, `Z_{n-1,0}`.
    pub corners: [f64; 3],
    pub expected_corner: f64,
    pub corner_error: f64,
    /// Corners within `1e-3` of `(n-1)/4`; an observation only.
    pub corner_agrees: bool,
}

/// Probes `{1, n-1}` with data `(1, cos(pi/(n-1)), -1)` and reports the shape of
/// the limiting exposing vector.
pub fn general_n_exposing_check(n: usize) -> Result<ExposingCheck> {
    if n < 4 {
        return Err(Error::OutOfRange(format!("n must be at least 4, got {n}")));
    }
    let pt = cycle_instance(n)?;
    let probe = sd_probe(&pt)?;
    let limit = probe
        .limit
        .as_ref()
        .ok_or_else(|| Error::Internal("probe ran without a path limit".into()))?;
    let z = &limit.z_bar;
    let interior_b = (1..n - 1).fold(0.0_f64, |m, i| m.max(z.get(i, i).abs()));
    let corners = [z.get(0, 0), z.get(n - 1, n - 1), z.get(n - 1, 0)];
    let expected_corner = (n as f64 - 1.0) / 4.0;
    let corner_error = corners.iter().fold(0.0_f64, |m, c| m.max((c - expected_corner).abs()));
    Ok(ExposingCheck {
        n,
        verdict: probe.verdict,
        rank_x: probe.rank_x,
        rank_z: probe.rank_z,
        interior_b,
        corners,
        expected_corner,
        corner_error,
        corner_agrees: corner_error <= 1e-3,
    })
}

/// Boundary family on `{1, 3}` at order 4: data `(1, cos(theta/3), cos(theta))`.
pub fn four_cycle_instance(theta: f64) -> Result<PartialToeplitz> {
    PartialToeplitz::from_values(4, 1.0, &[(1, (theta / 3.0).cos()), (3, theta.cos())])
}

/// Free entry of the shifted four-cycle family in closed form.
pub fn four_cycle_free_entry(theta: f64, alpha: f64) -> f64 {
    let c = (theta / 3.0).cos();
    let k = 4.0 * c * c - 1.0;
    0.5 * ((alpha * (alpha + 2.0) + k * k).sqrt() - (1.0 + alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn schedule_default_has_27_points() {
        let s = PathOptions::default().schedule();
        assert_eq!(s.len(), 27);
        assert_eq!(s[0], 1.0);
        assert!(*s.last().unwrap() >= 1e-8);
        assert!(PathOptions { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(PathOptions { tol: 0.1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn neville_reproduces_polynomials() {
        let s = [1.0, 0.5, 0.25, 0.125];
        let v: Vec<Vec<f64>> = s.iter().map(|&x| vec![2.0 + 3.0 * x - x * x * x]).collect();
        assert!((neville_at_zero(&s, &v)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_finds_square_root_rate() {
        let alphas: Vec<f64> = (0..20).map(|j| 0.5f64.powi(j)).collect();
        let vals: Vec<Vec<f64>> = alphas
            .iter()
            .map(|&a| vec![four_cycle_free_entry(PI, a)])
            .collect();
        let (v, ex) = extrapolate(&alphas, &vals);
        assert!((v[0] + 0.5).abs() < 1e-9, "{v:?} {ex:?}");
        assert!(matches!(ex, Extrapolation::Power { exponent, .. } if (exponent - 0.5).abs() < 1e-12));
    }

    #[test]
    fn identity_family_path_point() {
        let pt = PartialToeplitz::from_values(3, 1.0, &[(1, 0.0)]).unwrap();
        let r = path_point(&pt, 0.3).unwrap();
        assert!(r.completion.max_diff(&SymMatrix::identity(3).scaled(1.3)) < 1e-12);
        assert!(path_point(&pt, 0.0).is_err());
    }

    #[test]
    fn closed_form_free_entry() {
        let pt = four_cycle_instance(PI / 2.0).unwrap();
        for alpha in [1.0, 0.1, 0.01] {
            let r = path_point(&pt, alpha).unwrap();
            let x = r.completion.get(2, 0);
            assert!((x - four_cycle_free_entry(PI / 2.0, alpha)).abs() < 1e-8);
        }
    }

    #[test]
    fn ce_form_of_identity() {
        let f = ce_inverse_form(&SymMatrix::identity(5)).unwrap();
        assert_eq!(f, CeForm { a: 1.0, b: 1.0, c: 0.0, d: 0.0 });
        assert_eq!(f.predicted_b(), 1.0);
    }

    #[test]
    fn ce_form_rejects_dense_inverse() {
        let t = SymMatrix::toeplitz(&[2.0, 0.9, 0.5, 0.1, 0.05]);
        assert!(matches!(ce_inverse_form(&t), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn cos_completion_examples() {
        let ones = cos_completion(4, 0.0).unwrap();
        assert_eq!(ones, SymMatrix::from_fn(4, |_, _| 1.0));
        let m = cos_completion(4, PI / 3.0).unwrap();
        let row: Vec<f64> = (0..4).map(|j| m.get(0, j)).collect();
        for (a, b) in row.iter().zip([1.0, 0.5, -0.5, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(numerical_rank(&m).rank, 2);
        assert!(cos_completion(4, PI / 2.0).is_err());
    }

    #[test]
    fn strictly_feasible_limit_is_interior() {
        let pt = PartialToeplitz::from_values(4, 2.0, &[(1, 0.5), (3, 0.2)]).unwrap();
        let l = path_limit(&pt, &PathOptions::default()).unwrap();
        assert_eq!(l.extrapolation_x, Extrapolation::Interior);
        assert_eq!(l.rank_x, 4);
        assert_eq!(l.rank_z, 0);
        let direct = maxdet_complete(&pt, DEFAULT_TOL).unwrap();
        assert_eq!(l.x_bar, direct.completion);
        let near = path_point(&pt, 1e-8).unwrap();
        let mut x = near.completion.clone();
        x.add_diagonal(-1e-8);
        assert!(x.max_diff(&direct.completion) < 1e-5);
    }

    #[test]
    fn relaxed_rejects_other_classes() {
        let pt = four_cycle_instance(PI / 2.0).unwrap();
        assert!(matches!(
            complete_relaxed(&pt, PatternClass::P3 { k: 1 }),
            Err(Error::ClassMismatch { .. })
        ));
        let general = PartialToeplitz::from_values(6, 1.0, &[(1, 0.1), (2, 0.1), (5, 0.1)]).unwrap();
        assert!(matches!(
            max_rank_psd_complete(&general),
            Err(Error::ClassMismatch { .. })
        ));
    }
}
