//! Dense symmetric matrices and the few factorizations the solvers need.
//!
//! Everything here is dense and O(n^3). Orders are desk-scale, so the
//! Toeplitz structure is used to decide *what* to compute, never to
//! speed up the arithmetic.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pivot below `PD_PIVOT_RTOL * max diagonal` counts as a failed factorization.
pub const PD_PIVOT_RTOL: f64 = 1e-12;

/// Real symmetric matrix stored as its packed lower triangle (row by row).
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds the matrix from `f(i, j)` evaluated on the lower triangle (`i >= j`, 0-based).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymMatrix { n, data }
    }

    /// Symmetric Toeplitz matrix with first column `t`.
    pub fn toeplitz(t: &[f64]) -> Self {
        Self::from_fn(t.len(), |i, j| t[i - j])
    }

    /// Takes the symmetric part `(m + m^T) / 2` of a square dense matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Shape(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    /// Parses a full row-major array of rows. Asymmetry beyond `1e-12` relative is rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Shape(format!(
                "row of length {} in a matrix with {} rows",
                bad.len(),
                n
            )));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        for i in 0..n {
            for j in 0..i {
                if !rows[i][j].is_finite() || !rows[j][i].is_finite() {
                    return Err(Error::InvalidData("non-finite matrix entry".into()));
                }
                if (rows[i][j] - rows[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::Shape(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed(i, j)] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max-norm distance to `other`.
    pub fn max_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n, "order mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            self.data[packed(i, i)] += shift;
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).fold(f64::MIN, f64::max)
    }

    /// Cholesky factorization that only fails on a non-positive pivot.
    pub fn cholesky(&self) -> Option<Cholesky> {
        Cholesky::factor(self, 0.0)
    }

    /// Positive definiteness test shared by every module: a Cholesky pivot
    /// below `PD_PIVOT_RTOL * max diagonal` counts as failure.
    pub fn is_positive_definite(&self) -> bool {
        let dmax = self.max_diagonal();
        dmax > 0.0 && Cholesky::factor(self, PD_PIVOT_RTOL * dmax).is_some()
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        self.cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::NotPositiveDefinite)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dense().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Eigenpairs sorted by ascending eigenvalue; eigenvectors are the columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.to_dense().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.n, self.n, |i, c| eig.eigenvectors[(i, order[c])]);
        (values, vectors)
    }

    pub fn mul(&self, other: &SymMatrix) -> DMatrix<f64> {
        self.to_dense() * other.to_dense()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SymMatrix({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| format!("{:>12.6e}", self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    fn factor(a: &SymMatrix, min_pivot: f64) -> Option<Self> {
        let n = a.order();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > min_pivot) {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Cholesky { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L^{-1}`, lower triangular.
    pub fn l_inverse(&self) -> DMatrix<f64> {
        let n = self.l.nrows();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            inv[(c, c)] = 1.0 / self.l[(c, c)];
            for i in c + 1..n {
                let mut s = 0.0;
                for k in c..i {
                    s -= self.l[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = s / self.l[(i, i)];
            }
        }
        inv
    }

    pub fn inverse(&self) -> SymMatrix {
        let li = self.l_inverse();
        let n = li.nrows();
        // (L^{-T} L^{-1})_{ij} = sum_k Li[k,i] Li[k,j], k >= max(i, j)
        SymMatrix::from_fn(n, |i, j| (i..n).map(|k| li[(k, i)] * li[(k, j)]).sum())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.nrows();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }
}

/// Outcome of a numerical rank decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankDecision {
    pub rank: usize,
    /// Ratio between the smallest counted and the largest discarded eigenvalue
    /// (infinite when nothing is discarded or nothing is counted).
    pub gap: f64,
    /// Whether the gap is wide enough to trust `rank`.
    pub reliable: bool,
}

pub const RANK_RTOL: f64 = 1e-10;
pub const RANK_MIN_GAP: f64 = 1e3;

/// Numerical rank of a PSD matrix: eigenvalues above `n * 1e-10 * lambda_max`
/// count, and the decision is reliable only if the spectral gap is at least `1e3`.
pub fn numerical_rank(m: &SymMatrix) -> RankDecision {
    let mut ev = m.eigenvalues();
    ev.reverse();
    let n = m.order();
    let lmax = ev.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return RankDecision {
            rank: 0,
            gap: f64::INFINITY,
            reliable: true,
        };
    }
    let threshold = n as f64 * RANK_RTOL * lmax;
    let rank = ev.iter().take_while(|&&v| v > threshold).count();
    let gap = if rank == n {
        f64::INFINITY
    } else {
        let discarded = ev[rank..]
            .iter()
            .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        ev[rank - 1] / discarded
    };
    RankDecision {
        rank,
        gap,
        reliable: gap >= RANK_MIN_GAP,
    }
}
