//! Displacement-structure algebra for symmetric Toeplitz matrices.
//!
//! `J` is the `n x n` lower shift (ones on diagonal -1). Products of powers of
//! `J` and `J^T` are 0/1 matrices and are returned as integer matrices so
//! identities between them can be checked exactly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{PartialToeplitz, Pattern};
use crate::solver::{maxdet_complete, DEFAULT_TOL};

pub type IntMatrix = DMatrix<i64>;

/// `J^k`: ones at `(j + k, j)` for `j < n - k`; `k = n` gives the zero matrix.
pub fn jordan_power(n: usize, k: usize) -> Result<IntMatrix> {
    if k > n {
        return Err(Error::OutOfRange(format!("power {k} exceeds order {n}")));
    }
    let mut m = IntMatrix::zeros(n, n);
    for j in 0..n - k {
        m[(j + k, j)] = 1;
    }
    Ok(m)
}

/// `J^k (J^T)^l`: ones at `(j + k, j + l)` for `j < n - max(k, l)`, i.e. only on diagonal `l - k`.
pub fn displacement_product(n: usize, k: usize, l: usize) -> Result<IntMatrix> {
    if n == 0 || k >= n || l >= n {
        return Err(Error::OutOfRange(format!(
            "powers ({k}, {l}) must lie in [0, {}]",
            n.saturating_sub(1)
        )));
    }
    let mut m = IntMatrix::zeros(n, n);
    for j in 0..n - k.max(l) {
        m[(j + k, j + l)] = 1;
    }
    Ok(m)
}

/// Real polynomial coefficients `a_0, ..., a_{n-1}` of `a_0 + a_1 z + ... + a_{n-1} z^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs(Vec<f64>);

impl PolyCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Shape("empty coefficient vector".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidData("non-finite coefficient".into()));
        }
        Ok(PolyCoeffs(coeffs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn nonzero_terms(&self) -> Vec<(usize, f64)> {
        self.0
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, a)| a != 0.0)
            .collect()
    }
}

/// Toeplitz Bezoutian `A A^T - B^T B` with `A = sum_{j>=0} a_j J^j` and
/// `B = sum_{j>=1} a_j (J^T)^{n-j}`.
///
/// Expanded pairwise as `sum a_j a_l [J^j (J^T)^l - J^{n-l} (J^T)^{n-j}]`; pairs
/// with `l = n - j` cancel identically and are skipped, so entries that vanish
/// structurally come out as exact zeros.
pub fn bezoutian(a: &PolyCoeffs) -> SymMatrix {
    let n = a.len();
    let terms = a.nonzero_terms();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for &(j, aj) in &terms {
        for &(l, al) in &terms {
            if j >= 1 && l >= 1 && j + l == n {
                continue;
            }
            let c = aj * al;
            for m in 0..n - j.max(l) {
                acc[(m + j, m + l)] += c;
            }
            if j >= 1 && l >= 1 {
                for m in 0..j.min(l) {
                    acc[(m + n - l, m + n - j)] -= c;
                }
            }
        }
    }
    SymMatrix::from_fn(n, |i, j| acc[(i, j)])
}

/// Gohberg-Semencul reconstruction `(1/a_0)(A A^T - B^T B)` from the first
/// column `a` of the inverse of a symmetric positive definite Toeplitz matrix.
pub fn gs_inverse(first_col: &PolyCoeffs) -> Result<SymMatrix> {
    let a0 = first_col.as_slice()[0];
    if !(a0 > 0.0) {
        return Err(Error::BadLeadingCoefficient("positive"));
    }
    Ok(bezoutian(first_col).scaled(1.0 / a0))
}

/// Smallest Bezoutian eigenvalues within this fraction of the largest are
/// treated as numerically zero.
pub const ROOT_INDETERMINATE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootLocation {
    /// Every root satisfies `|z| > 1`.
    OutsideDisk,
    /// Some root lies in the closed unit disk.
    NotOutside,
    /// A root is too close to the unit circle to decide.
    Indeterminate { min_eigenvalue: f64 },
}

impl RootLocation {
    pub fn is_outside(&self) -> bool {
        matches!(self, RootLocation::OutsideDisk)
    }
}

/// Schur-Cohn test: all roots of `a_0 + a_1 z + ...` lie outside the closed
/// unit disk iff the Bezoutian is positive definite.
pub fn roots_outside_disk(a: &PolyCoeffs) -> Result<RootLocation> {
    if a.as_slice().iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroPolynomial);
    }
    if a.as_slice()[0] == 0.0 {
        return Err(Error::BadLeadingCoefficient("nonzero"));
    }
    let bez = bezoutian(a);
    let ev = bez.eigenvalues();
    let lmin = ev[0];
    let scale = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if lmin.abs() <= ROOT_INDETERMINATE_RTOL * scale {
        return Ok(RootLocation::Indeterminate { min_eigenvalue: lmin });
    }
    Ok(if bez.is_positive_definite() {
        RootLocation::OutsideDisk
    } else {
        RootLocation::NotOutside
    })
}

fn check_p3_band(n: usize, k: usize) -> Result<()> {
    if k == 0 || 2 * k >= n {
        return Err(Error::OutOfRange(format!("band k = {k} must satisfy 1 <= k < n - k with n = {n}")));
    }
    Ok(())
}

/// Coefficient vector of `p + q z^k + r z^{n-k}` padded to length `n`.
pub fn p3_coefficients(p: f64, q: f64, r: f64, n: usize, k: usize) -> Result<PolyCoeffs> {
    check_p3_band(n, k)?;
    let mut c = vec![0.0; n];
    c[0] = p;
    c[k] = q;
    c[n - k] = r;
    PolyCoeffs::new(c)
}

/// Relative tolerance for the Toeplitz check on `Bez(p, q, r)^{-1}`.
const P3_TOEPLITZ_RTOL: f64 = 1e-8;

/// Maps `(p, q, r)` to the data `(t_0, t_k, t_{n-k})` read off rows 1, `k+1`,
/// `n-k+1` (1-based) of the first column of `Bez(p, q, r)^{-1}`.
pub fn p3_map_g(p: f64, q: f64, r: f64, n: usize, k: usize) -> Result<(f64, f64, f64)> {
    if !(p > 0.0) {
        return Err(Error::BadLeadingCoefficient("positive"));
    }
    let coeffs = p3_coefficients(p, q, r, n, k)?;
    match roots_outside_disk(&coeffs)? {
        RootLocation::OutsideDisk => {}
        RootLocation::NotOutside => return Err(Error::RootsInsideDisk),
        RootLocation::Indeterminate { min_eigenvalue } => {
            return Err(Error::IndeterminateRoots(min_eigenvalue))
        }
    }
    let bez = bezoutian(&coeffs);
    let pattern = Pattern::new(n, [k, n - k])?;
    for i in 0..n {
        for j in 0..i {
            if !pattern.is_specified(i, j) && bez.get(i, j) != 0.0 {
                return Err(Error::Internal(format!(
                    "Bezoutian entry ({}, {}) = {:e} off the P3 diagonals",
                    i + 1,
                    j + 1,
                    bez.get(i, j)
                )));
            }
        }
    }
    let inv = bez.inverse()?;
    let (ok, dev) = crate::solver::is_toeplitz(&inv, P3_TOEPLITZ_RTOL);
    if !ok {
        return Err(Error::NotToeplitz { deviation: dev });
    }
    Ok((inv.get(0, 0), inv.get(k, 0), inv.get(n - k, 0)))
}

/// Inverse of [`p3_map_g`]: completes the P3 data by maximum determinant and
/// returns `(sqrt(f_0), f_k / sqrt(f_0), f_{n-k} / sqrt(f_0))`, where `f` is the
/// first column of the completion's inverse.
pub fn p3_map_g_inverse(t0: f64, tk: f64, tnk: f64, n: usize, k: usize) -> Result<(f64, f64, f64)> {
    check_p3_band(n, k)?;
    let pt = PartialToeplitz::from_values(n, t0, &[(k, tk), (n - k, tnk)])?;
    let res = maxdet_complete(&pt, DEFAULT_TOL)?;
    let f0 = res.inverse.get(0, 0);
    if !(f0 > 0.0) {
        return Err(Error::Internal(format!("inverse has non-positive (1,1) entry {f0:e}")));
    }
    let s = f0.sqrt();
    Ok((s, res.inverse.get(k, 0) / s, res.inverse.get(n - k, 0) / s))
}
