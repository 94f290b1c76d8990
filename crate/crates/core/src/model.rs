//! Partial symmetric Toeplitz matrices, their patterns, and pattern classification.
//!
//! Indices are 0-based in code. Diagonal `d` holds the entries `(i, j)` with
//! `|i - j| = d`; diagonal 0 is always specified.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Order `n` plus the strictly increasing set of specified off-diagonals, each in `1..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    n: usize,
    diagonals: Vec<usize>,
}

impl Pattern {
    /// Diagonals may be given in any order; duplicates are rejected.
    pub fn new(n: usize, diagonals: impl IntoIterator<Item = usize>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidPattern(format!("order must be at least 2, got {n}")));
        }
        let mut d: Vec<usize> = diagonals.into_iter().collect();
        d.sort_unstable();
        if d.is_empty() {
            return Err(Error::InvalidPattern("no specified off-diagonal".into()));
        }
        if d.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPattern("duplicate diagonal".into()));
        }
        if d[0] == 0 || *d.last().unwrap() >= n {
            return Err(Error::InvalidPattern(format!(
                "diagonals must lie in [1, {}], got {:?}",
                n - 1,
                d
            )));
        }
        Ok(Pattern { n, diagonals: d })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn diagonals(&self) -> &[usize] {
        &self.diagonals
    }

    /// Whether diagonal `d` is specified (`d = 0` always is).
    pub fn contains(&self, d: usize) -> bool {
        d == 0 || self.diagonals.binary_search(&d).is_ok()
    }

    pub fn is_specified(&self, i: usize, j: usize) -> bool {
        self.contains(i.abs_diff(j))
    }

    /// Unordered free positions `(i, j)`, `i < j`, in row-major order.
    pub fn free_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if !self.contains(j - i) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Unspecified off-diagonals.
    pub fn free_diagonals(&self) -> Vec<usize> {
        (1..self.n).filter(|&d| !self.contains(d)).collect()
    }
}

/// A pattern together with its data `t_0` and `t_d` for every specified diagonal `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialToeplitz {
    pattern: Pattern,
    t0: f64,
    data: BTreeMap<usize, f64>,
}

impl PartialToeplitz {
    pub fn new(pattern: Pattern, t0: f64, data: BTreeMap<usize, f64>) -> Result<Self> {
        if !t0.is_finite() || data.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite data value".into()));
        }
        let keys: Vec<usize> = data.keys().copied().collect();
        if keys != pattern.diagonals() {
            return Err(Error::InvalidData(format!(
                "data diagonals {:?} do not match the pattern {:?}",
                keys,
                pattern.diagonals()
            )));
        }
        Ok(PartialToeplitz { pattern, t0, data })
    }

    /// Convenience constructor from `(diagonal, value)` pairs.
    pub fn from_values(n: usize, t0: f64, values: &[(usize, f64)]) -> Result<Self> {
        let pattern = Pattern::new(n, values.iter().map(|&(d, _)| d))?;
        Self::new(pattern, t0, values.iter().copied().collect())
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn order(&self) -> usize {
        self.pattern.n
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn data(&self) -> &BTreeMap<usize, f64> {
        &self.data
    }

    /// Value on diagonal `d`, if specified.
    pub fn value(&self, d: usize) -> Option<f64> {
        if d == 0 {
            Some(self.t0)
        } else {
            self.data.get(&d).copied()
        }
    }

    /// Same pattern and off-diagonal data, main diagonal `t0 + shift`.
    pub fn shifted(&self, shift: f64) -> PartialToeplitz {
        PartialToeplitz {
            pattern: self.pattern.clone(),
            t0: self.t0 + shift,
            data: self.data.clone(),
        }
    }

    /// The matrix with specified entries filled in and zeros at free positions.
    pub fn base_matrix(&self) -> SymMatrix {
        SymMatrix::from_fn(self.order(), |i, j| self.value(i - j).unwrap_or(0.0))
    }

    /// Largest absolute data value, including `t0`.
    pub fn scale(&self) -> f64 {
        self.data.values().fold(self.t0.abs(), |acc, v| acc.max(v.abs()))
    }

    /// Leading principal partial submatrix of order `m`.
    pub fn leading(&self, m: usize) -> Result<PartialToeplitz> {
        if m > self.order() {
            return Err(Error::OutOfRange(format!(
                "leading order {m} exceeds {}",
                self.order()
            )));
        }
        let values: Vec<(usize, f64)> = self
            .data
            .iter()
            .filter(|(&d, _)| d < m)
            .map(|(&d, &v)| (d, v))
            .collect();
        Self::from_values(m, self.t0, &values)
    }

    /// Largest deviation of `m` from the data at specified positions.
    pub fn data_mismatch(&self, m: &SymMatrix) -> f64 {
        let n = self.order();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                if let Some(v) = self.value(i - j) {
                    worst = worst.max((m.get(i, j) - v).abs());
                }
            }
        }
        worst
    }

    /// Overwrites the specified entries of `m` with the data.
    pub fn impose_data(&self, m: &mut SymMatrix) {
        let n = self.order();
        for i in 0..n {
            for j in 0..=i {
                if let Some(v) = self.value(i - j) {
                    m.set(i, j, v);
                }
            }
        }
    }
}

/// The pattern families for which the maximum-determinant completion is
/// Toeplitz (`P1`, `P2`, `P3`), their relaxations guaranteeing a Toeplitz PSD
/// completion (`P2Prime`, `P3Prime`), and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternClass {
    /// `{k, 2k, ..., rk}`
    P1 { k: usize, r: usize },
    /// `{k, 2k, ..., (r-2)k, rk}` with `n = (r+1)k`
    P2 { k: usize, r: usize },
    /// `{k, n-k}` with `k < n-k`
    P3 { k: usize },
    /// `{k, 2k, ..., (r-2)k, rk}`, any `n`
    P2Prime { k: usize, r: usize },
    /// `{k, r}` with `k < r` and `n >= k + r`
    P3Prime { k: usize, r: usize },
    General,
}

impl PatternClass {
    /// Diagonal set this class describes at order `n`.
    pub fn diagonals(&self, n: usize) -> Vec<usize> {
        match *self {
            PatternClass::P1 { k, r } => (1..=r).map(|m| m * k).collect(),
            PatternClass::P2 { k, r } | PatternClass::P2Prime { k, r } => (1..=r.saturating_sub(2))
                .map(|m| m * k)
                .chain(std::iter::once(r * k))
                .collect(),
            PatternClass::P3 { k } => vec![k, n - k],
            PatternClass::P3Prime { k, r } => vec![k, r],
            PatternClass::General => Vec::new(),
        }
    }

    /// Whether the class's defining equations hold for `p`.
    pub fn matches(&self, p: &Pattern) -> bool {
        let n = p.order();
        let ok = match *self {
            PatternClass::P1 { k, r } => k >= 1 && r >= 1,
            PatternClass::P2 { k, r } => k >= 1 && r >= 2 && n == (r + 1) * k,
            PatternClass::P3 { k } => k >= 1 && k < n - k,
            PatternClass::P2Prime { k, r } => k >= 1 && r >= 2 && n >= (r + 1) * k,
            PatternClass::P3Prime { k, r } => k >= 1 && k < r && n >= k + r,
            PatternClass::General => return classify(p) == vec![PatternClass::General],
        };
        ok && self.diagonals(n) == p.diagonals()
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PatternClass::P1 { k, r } => write!(f, "P1(k={k},r={r})"),
            PatternClass::P2 { k, r } => write!(f, "P2(k={k},r={r})"),
            PatternClass::P3 { k } => write!(f, "P3(k={k})"),
            PatternClass::P2Prime { k, r } => write!(f, "P2'(k={k},r={r})"),
            PatternClass::P3Prime { k, r } => write!(f, "P3'(k={k},r={r})"),
            PatternClass::General => write!(f, "General"),
        }
    }
}

/// Every form the pattern matches, in the order P1, P2, P3, P2', P3'.
/// Returns `[General]` exactly when none match.
pub fn classify(p: &Pattern) -> Vec<PatternClass> {
    let n = p.order();
    let d = p.diagonals();
    let s = d.len();
    let mut out = Vec::new();

    let k = d[0];
    if d.iter().enumerate().all(|(i, &v)| v == (i + 1) * k) {
        out.push(PatternClass::P1 { k, r: s });
    }

    // {k, ..., (r-2)k, rk}: the last element is rk, the first s-1 are consecutive multiples.
    let p2 = if s == 1 {
        (d[0] % 2 == 0).then(|| (d[0] / 2, 2))
    } else {
        let k = d[0];
        let last = d[s - 1];
        let head_ok = d[..s - 1].iter().enumerate().all(|(i, &v)| v == (i + 1) * k);
        (head_ok && last % k == 0 && last / k == s + 1).then(|| (k, s + 1))
    };
    if let Some((k, r)) = p2 {
        if n == (r + 1) * k {
            out.push(PatternClass::P2 { k, r });
        }
    }

    if s == 2 && d[0] + d[1] == n {
        out.push(PatternClass::P3 { k: d[0] });
    }
    if let Some((k, r)) = p2 {
        if n >= (r + 1) * k {
            out.push(PatternClass::P2Prime { k, r });
        }
    }
    if s == 2 && n >= d[0] + d[1] {
        out.push(PatternClass::P3Prime { k: d[0], r: d[1] });
    }

    if out.is_empty() {
        out.push(PatternClass::General);
    }
    out
}

/// One diagonal block after the residue-class permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub size: usize,
    /// `None` for a 1x1 block, which carries only `t0`.
    pub partial: Option<PartialToeplitz>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    /// `permutation[a]` is the original (0-based) index placed at position `a`.
    pub permutation: Vec<usize>,
    pub blocks: Vec<Block>,
}

impl BlockDecomposition {
    /// Block index and offset within the block for each permuted position.
    pub fn block_of_position(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| (0..blk.size).map(move |o| (b, o)))
            .collect()
    }
}

/// Groups indices by residue mod `k`, each group ordered by quotient. A pattern
/// of form P1/P2 becomes block diagonal with unspecified entries between blocks.
pub fn block_permutation(pt: &PartialToeplitz, class: PatternClass) -> Result<BlockDecomposition> {
    let (k, r) = match class {
        PatternClass::P1 { k, r } | PatternClass::P2 { k, r } => (k, r),
        other => return Err(Error::class_mismatch(&format!("P1 or P2 (got {other})"))),
    };
    if !class.matches(pt.pattern()) {
        return Err(Error::class_mismatch(&class.to_string()));
    }
    let n = pt.order();
    let mut permutation = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (c..n).step_by(k).collect();
        let size = members.len();
        permutation.extend_from_slice(&members);
        let values: Vec<(usize, f64)> = (1..size)
            .filter_map(|m| pt.value(m * k).map(|v| (m, v)))
            .collect();
        let partial = if size == 1 {
            None
        } else {
            Some(PartialToeplitz::from_values(size, pt.t0(), &values)?)
        };
        blocks.push(Block { size, partial });
    }
    debug_assert_eq!(permutation.len(), n);
    debug_assert!(matches!(class, PatternClass::P1 { .. }) || blocks.iter().all(|b| b.size == r + 1));
    Ok(BlockDecomposition { permutation, blocks })
}

/// `K m K` with `K` the anti-diagonal permutation: entry `(i, j)` becomes `(n-1-i, n-1-j)`.
pub fn apply_k_involution(m: &SymMatrix) -> SymMatrix {
    let n = m.order();
    SymMatrix::from_fn(n, |i, j| m.get(n - 1 - i, n - 1 - j))
}

pub const CLIQUE_NODE_BUDGET: usize = 1_000_000;

/// All maximal index sets (0-based, at most `size_cap` elements) whose
/// pairwise differences are specified diagonals, sorted lexicographically.
/// A set of exactly `size_cap` elements counts as maximal.
pub fn specified_cliques(pt: &PartialToeplitz, size_cap: usize) -> Result<Vec<Vec<usize>>> {
    specified_cliques_with_budget(pt.pattern(), size_cap, CLIQUE_NODE_BUDGET)
}

pub fn specified_cliques_with_budget(
    p: &Pattern,
    size_cap: usize,
    budget: usize,
) -> Result<Vec<Vec<usize>>> {
    if size_cap < 2 {
        return Err(Error::OutOfRange(format!("size cap must be at least 2, got {size_cap}")));
    }
    struct Search<'a> {
        p: &'a Pattern,
        cap: usize,
        budget: usize,
        nodes: usize,
        out: Vec<Vec<usize>>,
    }
    impl Search<'_> {
        // Bron-Kerbosch without pivoting: every clique is visited exactly once.
        fn expand(&mut self, r: &mut Vec<usize>, cand: Vec<usize>, mut excl: Vec<usize>) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::CapExceeded { budget: self.budget });
            }
            if r.len() == self.cap || (cand.is_empty() && excl.is_empty()) {
                self.out.push(r.clone());
                return Ok(());
            }
            for (idx, &v) in cand.iter().enumerate() {
                let adj = |u: &usize| self.p.contains(u.abs_diff(v));
                let next_cand: Vec<usize> = cand[idx + 1..].iter().copied().filter(adj).collect();
                let next_excl: Vec<usize> = excl.iter().copied().filter(adj).collect();
                r.push(v);
                self.expand(r, next_cand, next_excl)?;
                r.pop();
                excl.push(v);
            }
            Ok(())
        }
    }
    let mut s = Search {
        p,
        cap: size_cap,
        budget,
        nodes: 0,
        out: Vec::new(),
    };
    s.expand(&mut Vec::new(), (0..p.order()).collect(), Vec::new())?;
    let mut out = s.out;
    out.sort();
    Ok(out)
}

/// Input schema: `{"n": 5, "t0": 6.0, "data": {"1": 1.0, "3": 1.0}}`.
/// `t0` may be omitted when only the pattern is needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialMatrixJson {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub data: BTreeMap<String, f64>,
}

impl PartialMatrixJson {
    fn diagonal_values(&self) -> Result<BTreeMap<usize, f64>> {
        self.data
            .iter()
            .map(|(k, &v)| {
                let d = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidData(format!("diagonal key {k:?} is not a non-negative integer")))?;
                if d.to_string() != *k {
                    return Err(Error::InvalidData(format!("diagonal key {k:?} is not canonical")));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!("value on diagonal {d} is not finite")));
                }
                Ok((d, v))
            })
            .collect()
    }

    pub fn pattern(&self) -> Result<Pattern> {
        Pattern::new(self.n, self.diagonal_values()?.into_keys())
    }

    pub fn partial(&self) -> Result<PartialToeplitz> {
        let t0 = self
            .t0
            .ok_or_else(|| Error::InvalidData("missing main-diagonal value \"t0\"".into()))?;
        PartialToeplitz::new(self.pattern()?, t0, self.diagonal_values()?)
    }

    pub fn from_partial(pt: &PartialToeplitz) -> Self {
        PartialMatrixJson {
            n: pt.order(),
            t0: Some(pt.t0()),
            data: pt.data().iter().map(|(d, v)| (d.to_string(), *v)).collect(),
        }
    }
}

impl Serialize for PartialToeplitz {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartialMatrixJson::from_partial(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PartialToeplitz {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        PartialMatrixJson::deserialize(d)?
            .partial()
            .map_err(serde::de::Error::custom)
    }
}
