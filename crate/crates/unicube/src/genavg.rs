//! Generalized averages E_A(f) over binary matrices, and reductions that
//! bound them by uniformity norms.
//!
//! A t x T matrix A over F2 encodes the average
//!
//! ```text
//! E_A(f) = E_(y_1..y_t)  prod_(columns j)  f( sum_(rows i with A[i][j] = 1) y_i )
//! ```
//!
//! with the y_i uniform over {0,1}^n. The value depends only on the row
//! space of A (substituting y -> My for invertible M permutes nothing but
//! the names of the averaged variables), which is what makes row-level
//! rewriting sound.
//!
//! The special matrices A_k (k+1 rows, 2^k columns: column c carries the
//! k-bit binary expansion of c with the all-ones row below, columns in
//! lexicographic order) satisfy E_(A_k)(f) = ||f||_(U_k)^(2^k). The
//! reduction machinery rewrites an arbitrary matrix with distinct nonzero
//! columns into such a form:
//!
//! * a `Reduce` step picks a minimal row-space vector v (no nonzero
//!   row-space vector has support strictly inside supp(v)), restricts the
//!   columns to supp(v), doubles them side by side and appends an indicator
//!   row for the two halves; Cauchy-Schwarz gives E_A(f)^2 <= E_A'(f);
//! * `ReplaceRow` steps rewrite one row by row operations (row space, and
//!   hence the average, unchanged) to make the first row minimal;
//! * `Cleanup` steps reorder rows and drop linearly dependent ones (row
//!   space unchanged);
//! * `CancelColumns` steps delete pairs of identical columns, which is
//!   sound because f^2 = 1, and drop rows left without support.
//!
//! Each run is recorded as a [`ReductionCertificate`] whose steps can be
//! replayed and re-checked independently.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::f2::BitMatrix;
use crate::rng::{gen_point, stream_rng};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::collections::HashMap;
use std::fmt;

/// Largest exponent for exact assignment enumeration: n * t <= 26.
pub const MAX_ASSIGNMENT_BITS: usize = 26;
/// Row-count cap for exhaustive row-space enumeration (2^t vectors).
pub const MAX_ROWSPACE_ROWS: usize = 20;

/// A binary matrix whose columns name subset sums of the averaged points.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    mat: BitMatrix,
}

impl BinaryMatrix {
    /// Wraps a bit matrix (any shape, including empty).
    pub fn from_bit_matrix(mat: BitMatrix) -> Self {
        BinaryMatrix { mat }
    }

    /// Builds from explicit 0/1 entries, one inner vector per row.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::input("matrix needs at least one row"));
        }
        let cols = rows[0].len();
        let mut mat = BitMatrix::zero(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::input(format!(
                    "row {} has {} entries, expected {cols}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 => mat.set(i, j, true),
                    _ => {
                        return Err(Error::input(format!(
                            "entries must be 0 or 1, got {e} at row {}, column {}",
                            i + 1,
                            j + 1
                        )))
                    }
                }
            }
        }
        Ok(BinaryMatrix { mat })
    }

    /// Parses the matrix file format: one 0/1 string per line, leftmost
    /// character is column 1. Blank lines and trailing whitespace are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut cols = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for ch in line.chars() {
                match ch {
                    '0' => row.push(0),
                    '1' => row.push(1),
                    _ => {
                        return Err(Error::input(format!(
                            "line {}: matrix characters must be 0 or 1, got `{ch}`",
                            lineno + 1
                        )))
                    }
                }
            }
            if let Some(c) = cols {
                if row.len() != c {
                    return Err(Error::input(format!(
                        "line {}: row has {} columns, expected {c}",
                        lineno + 1,
                        row.len()
                    )));
                }
            } else {
                cols = Some(row.len());
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Number of rows t (averaged points).
    #[inline]
    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    /// Number of columns T (factors in the product).
    #[inline]
    pub fn cols(&self) -> usize {
        self.mat.cols()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mat.get(row, col)
    }

    /// The underlying bit matrix.
    #[inline]
    pub fn bit_matrix(&self) -> &BitMatrix {
        &self.mat
    }

    /// Rank over F2.
    pub fn rank(&self) -> usize {
        self.mat.rank()
    }

    /// Column `j` as a 0/1 vector over the rows.
    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.rows()).map(|i| self.get(i, j) as u8).collect()
    }

    /// Row `i` as a 0/1 vector.
    pub fn row_vec(&self, i: usize) -> Vec<u8> {
        (0..self.cols()).map(|j| self.get(i, j) as u8).collect()
    }

    /// For each row, the list of columns containing it.
    fn columns_of_rows(&self) -> Vec<Vec<usize>> {
        let mut by_row = vec![Vec::new(); self.rows()];
        for j in 0..self.cols() {
            for (i, slots) in by_row.iter_mut().enumerate() {
                if self.get(i, j) {
                    slots.push(j);
                }
            }
        }
        by_row
    }
}

impl fmt::Display for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mat)
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryMatrix {}x{}:\n{}", self.rows(), self.cols(), self.mat)
    }
}

impl Serialize for BinaryMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<String> = (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| if self.get(i, j) { '1' } else { '0' })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

/// A Monte-Carlo estimate of a generalized average.
#[derive(Clone, Debug, Serialize)]
pub struct AverageEstimate {
    /// Sample mean of the column product over random assignments.
    pub estimate: f64,
    /// Standard error of the mean; `None` when there are fewer than two
    /// samples.
    pub stderr: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

/// Exact E_A(f) by enumerating all 2^(n t) assignments.
///
/// The walk visits assignments in Gray-code order, so each step re-evaluates
/// f only on the columns containing the flipped coordinate. Refused with a
/// resource error when n * t exceeds 26 bits of assignment space.
pub fn generalized_average_exact(a: &BinaryMatrix, f: &BooleanFunction) -> Result<f64> {
    let (n, t) = (f.n(), a.rows());
    if a.cols() == 0 {
        return Ok(1.0);
    }
    let bits = n * t;
    if bits > MAX_ASSIGNMENT_BITS {
        return Err(Error::budget(
            1u128 << bits.min(127),
            1u128 << MAX_ASSIGNMENT_BITS,
            "use generalized_average_estimate for a Monte-Carlo value",
        ));
    }
    let row_cols = a.columns_of_rows();
    let total_assignments = 1u64 << bits;
    let chunk_bits = bits.min(16);
    let chunk_len = 1u64 << chunk_bits;
    let chunks = total_assignments >> chunk_bits;
    let sum: i64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            walk_assignments(
                f,
                a,
                &row_cols,
                c * chunk_len,
                (c + 1) * chunk_len,
            )
        })
        .sum();
    Ok(sum as f64 / total_assignments as f64)
}

/// Sums the column-product sign over the Gray-code assignment range
/// [start, end).
fn walk_assignments(
    f: &BooleanFunction,
    a: &BinaryMatrix,
    row_cols: &[Vec<usize>],
    start: u64,
    end: u64,
) -> i64 {
    let n = f.n();
    let mask = (1u64 << n) - 1;
    let gray = start ^ (start >> 1);
    let ys: Vec<u32> = (0..a.rows())
        .map(|q| ((gray >> (q * n)) & mask) as u32)
        .collect();
    let mut args: Vec<u32> = (0..a.cols())
        .map(|j| {
            (0..a.rows())
                .filter(|&i| a.get(i, j))
                .fold(0u32, |acc, i| acc ^ ys[i])
        })
        .collect();
    let mut bits: Vec<bool> = args.iter().map(|&x| f.sign_bit(x)).collect();
    let mut parity = bits.iter().filter(|&&b| b).count() % 2 == 1;
    let mut sum: i64 = if parity { -1 } else { 1 };
    for k in (start + 1)..end {
        let p = k.trailing_zeros() as usize;
        let (q, r) = (p / n, p % n);
        for &j in &row_cols[q] {
            args[j] ^= 1 << r;
            let b = f.sign_bit(args[j]);
            parity ^= b ^ bits[j];
            bits[j] = b;
        }
        sum += if parity { -1 } else { 1 };
    }
    sum
}

/// Monte-Carlo estimate of E_A(f) over `trials` random assignments, one
/// RNG stream per trial (bit-identical for a given seed at any thread
/// count).
pub fn generalized_average_estimate(
    a: &BinaryMatrix,
    f: &BooleanFunction,
    trials: u64,
    seed: u64,
) -> Result<AverageEstimate> {
    if trials < 1 {
        return Err(Error::input("at least one trial is required"));
    }
    let n = f.n();
    let sum: i64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let ys: Vec<u32> = (0..a.rows()).map(|_| gen_point(&mut rng, n)).collect();
            let mut parity = false;
            for j in 0..a.cols() {
                let arg = (0..a.rows())
                    .filter(|&i| a.get(i, j))
                    .fold(0u32, |acc, i| acc ^ ys[i]);
                parity ^= f.sign_bit(arg);
            }
            if parity {
                -1i64
            } else {
                1i64
            }
        })
        .sum();
    let estimate = sum as f64 / trials as f64;
    let stderr = if trials >= 2 {
        Some(((1.0 - estimate * estimate).max(0.0) / (trials - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(AverageEstimate {
        estimate,
        stderr,
        trials,
        seed,
    })
}

/// The (k+1) x 2^k matrix whose average is ||f||_(U_k)^(2^k): column c
/// (0-based) carries the k-bit binary expansion of c (most significant bit
/// in the first row), and the last row is all ones.
pub fn ak_matrix(k: usize) -> BinaryMatrix {
    assert!(k >= 1, "ak_matrix needs k >= 1");
    assert!(k <= 20, "ak_matrix(k) has 2^k columns; k > 20 is not supported");
    let mut mat = BitMatrix::zero(k + 1, 1 << k);
    for c in 0..(1usize << k) {
        for i in 0..k {
            if (c >> (k - 1 - i)) & 1 == 1 {
                mat.set(i, c, true);
            }
        }
        mat.set(k, c, true);
    }
    BinaryMatrix { mat }
}

/// Cancels pairs of identical columns (f^2 = 1 keeps the average intact),
/// keeping the first copy of every column that appears an odd number of
/// times, then drops rows left without any 1.
pub fn simplify(a: &BinaryMatrix) -> BinaryMatrix {
    simplify_with_kept_rows(a).0
}

fn simplify_with_kept_rows(a: &BinaryMatrix) -> (BinaryMatrix, Vec<usize>) {
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for j in 0..a.cols() {
        *counts.entry(a.column(j)).or_insert(0) += 1;
    }
    let mut kept_cols = Vec::new();
    let mut seen: HashMap<Vec<u8>, bool> = HashMap::new();
    for j in 0..a.cols() {
        let col = a.column(j);
        let first = !seen.get(&col).copied().unwrap_or(false);
        if first {
            seen.insert(col.clone(), true);
            if counts[&col] % 2 == 1 {
                kept_cols.push(j);
            }
        }
    }
    let trimmed = a.mat.select_columns(&kept_cols);
    let kept_rows: Vec<usize> = (0..trimmed.rows())
        .filter(|&i| !trimmed.row_is_zero(i))
        .collect();
    (
        BinaryMatrix {
            mat: trimmed.select_rows(&kept_rows),
        },
        kept_rows,
    )
}

fn words_to_u8(words: &[u64], len: usize) -> Vec<u8> {
    (0..len).map(|j| ((words[j / 64] >> (j % 64)) & 1) as u8).collect()
}

fn u8_to_words(v: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; v.len().div_ceil(64).max(1)];
    for (j, &b) in v.iter().enumerate() {
        if b == 1 {
            words[j / 64] |= 1 << (j % 64);
        }
    }
    words
}

fn support_weight(words: &[u64]) -> u32 {
    words.iter().map(|w| w.count_ones()).sum()
}

/// True when supp(inner) is contained in supp(outer).
fn support_subset(inner: &[u64], outer: &[u64]) -> bool {
    inner.iter().zip(outer).all(|(a, b)| a & !b == 0)
}

/// Coordinate-lexicographic comparison (coordinate 0 first; 0 sorts before
/// 1), used for deterministic tie-breaks among equal-weight vectors.
fn lex_cmp(a: &[u64], b: &[u64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            let p = (x ^ y).trailing_zeros();
            // The vector with a 0 in the first differing coordinate is
            // lexicographically smaller.
            return if (x >> p) & 1 == 0 {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            };
        }
    }
    std::cmp::Ordering::Equal
}

/// Enumerates the row space of `basis` (canonical RREF rows), calling
/// `visit` on every nonzero vector.
fn for_each_rowspace_vector(basis: &[Vec<u64>], words: usize, mut visit: impl FnMut(&[u64])) {
    let r = basis.len();
    assert!(r <= 30, "row-space enumeration needs rank <= 30");
    // Gray-code walk over the 2^r combinations.
    let mut cur = vec![0u64; words];
    for k in 1u64..(1u64 << r) {
        let idx = k.trailing_zeros() as usize;
        for (c, b) in cur.iter_mut().zip(&basis[idx]) {
            *c ^= b;
        }
        visit(&cur);
    }
}

/// All nonzero row-space vectors of A whose support is minimal under
/// inclusion, sorted by weight and then lexicographically. Every other
/// row-space vector's support strictly contains one of these.
pub fn row_space_minimal_vectors(a: &BinaryMatrix) -> Result<Vec<Vec<u8>>> {
    if a.rows() > MAX_ROWSPACE_ROWS {
        return Err(Error::budget(
            1u128 << a.rows().min(127),
            1u128 << MAX_ROWSPACE_ROWS,
            "row-space enumeration is exponential in the row count",
        ));
    }
    let basis = a.mat.row_space_basis();
    let words = a.cols().div_ceil(64).max(1);
    let mut vectors: Vec<Vec<u64>> = Vec::new();
    for_each_rowspace_vector(&basis, words, |v| vectors.push(v.to_vec()));
    vectors.sort_by(|x, y| {
        support_weight(x)
            .cmp(&support_weight(y))
            .then_with(|| lex_cmp(x, y))
    });
    let mut minimal: Vec<Vec<u64>> = Vec::new();
    for v in vectors {
        if minimal.iter().all(|m| !support_subset(m, &v)) {
            minimal.push(v);
        }
    }
    Ok(minimal.iter().map(|m| words_to_u8(m, a.cols())).collect())
}

/// The lightest (then lexicographically smallest) nonzero row-space vector
/// whose support sits inside supp(bound). `bound` itself is always a
/// candidate when it is a row, so the minimum exists.
fn min_vector_within_support(mat: &BitMatrix, bound: &[u64]) -> Vec<u64> {
    let basis = mat.row_space_basis();
    let words = mat.cols().div_ceil(64).max(1);
    let mut best: Option<Vec<u64>> = None;
    for_each_rowspace_vector(&basis, words, |v| {
        if support_weight(v) == 0 || !support_subset(v, bound) {
            return;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                let (wv, wb) = (support_weight(v), support_weight(b));
                wv < wb || (wv == wb && lex_cmp(v, b) == std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(v.to_vec());
        }
    });
    best.expect("the bounding vector itself lies in the row space")
}

/// True when `v` lies in the row space of `mat`.
fn in_row_space(mat: &BitMatrix, v: &[u64]) -> bool {
    let mut stacked = mat.clone();
    stacked.push_row(v);
    stacked.rank() == mat.rank()
}

/// One Cauchy-Schwarz reduction: restrict the columns of A to supp(v),
/// place two copies of the restriction side by side and append an indicator
/// row (ones over the first copy). For every boolean f,
/// E_A(f)^2 <= E_(A')(f).
///
/// `v` must be a minimal vector in the row space of A, and A must have full
/// row rank.
pub fn reduction_step(a: &BinaryMatrix, v: &[u8]) -> Result<BinaryMatrix> {
    if v.len() != a.cols() {
        return Err(Error::input(format!(
            "vector length {} does not match the column count {}",
            v.len(),
            a.cols()
        )));
    }
    if v.iter().any(|&b| b > 1) {
        return Err(Error::input("vector entries must be 0 or 1"));
    }
    if v.iter().all(|&b| b == 0) {
        return Err(Error::input("the zero vector is not minimal"));
    }
    if a.rank() != a.rows() {
        return Err(Error::input(
            "reduction_step needs a matrix of full row rank",
        ));
    }
    if a.rows() > 24 {
        return Err(Error::budget(
            1u128 << a.rows().min(127),
            1u128 << 24,
            "minimality checking enumerates the row space",
        ));
    }
    let vw = u8_to_words(v);
    if !in_row_space(&a.mat, &vw) {
        return Err(Error::input("vector is not in the row space"));
    }
    let weight = support_weight(&vw);
    let mut strictly_inside = false;
    let basis = a.mat.row_space_basis();
    for_each_rowspace_vector(&basis, vw.len(), |x| {
        if support_subset(x, &vw) && support_weight(x) < weight && support_weight(x) > 0 {
            strictly_inside = true;
        }
    });
    if strictly_inside {
        return Err(Error::input(
            "vector is not minimal: a nonzero row-space vector has support strictly inside it",
        ));
    }
    Ok(reduction_step_unchecked(a, &vw))
}

fn reduction_step_unchecked(a: &BinaryMatrix, v_words: &[u64]) -> BinaryMatrix {
    let support: Vec<usize> = (0..a.cols())
        .filter(|&j| (v_words[j / 64] >> (j % 64)) & 1 == 1)
        .collect();
    let b = a.mat.select_columns(&support);
    let half = support.len();
    let mut out = BitMatrix::zero(a.rows() + 1, 2 * half);
    for i in 0..a.rows() {
        for (jj, _) in support.iter().enumerate() {
            if b.get(i, jj) {
                out.set(i, jj, true);
                out.set(i, half + jj, true);
            }
        }
    }
    for jj in 0..half {
        out.set(a.rows(), jj, true);
    }
    BinaryMatrix { mat: out }
}

/// What a recorded reduction step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ReductionStepKind {
    /// Cauchy-Schwarz column doubling along a minimal vector.
    Reduce,
    /// Row rewriting (row space preserved).
    ReplaceRow,
    /// Row reordering and dependent-row removal (row space preserved).
    Cleanup,
    /// Identical-column pair cancellation and empty-row removal.
    CancelColumns,
}

/// One step of a reduction chain.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionStep {
    pub kind: ReductionStepKind,
    pub before: BinaryMatrix,
    /// The chosen minimal vector, present on `Reduce` steps.
    pub vector: Option<Vec<u8>>,
    pub after: BinaryMatrix,
}

/// A replayable record of a reduction run: the chain of matrices from the
/// input to a matrix equal to some A_k up to row operations and column
/// permutation.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionCertificate {
    pub input: BinaryMatrix,
    pub steps: Vec<ReductionStep>,
    pub terminal: BinaryMatrix,
    /// The k with the terminal matrix row-and-column-equivalent to A_k;
    /// the certified bound is |E_A(f)| <= ||f||_(U_k) for this k.
    pub terminal_k: usize,
    /// 2^(number of Reduce steps): the chain proves
    /// |E_A(f)| <= E_terminal(f)^(1/exponent).
    pub exponent: u64,
}

/// Recognizes matrices that equal some A_k up to row operations and column
/// permutation: full row rank, 2^(rows - 1) distinct nonzero columns that
/// form a proper affine subspace.
pub fn ak_equivalent_order(m: &BitMatrix) -> Option<usize> {
    let rows = m.rows();
    if rows < 2 || rows > 32 {
        return None;
    }
    let k = rows - 1;
    if m.cols() != 1usize << k {
        return None;
    }
    let mut cols: Vec<u64> = (0..m.cols()).map(|c| m.col_u64(c)).collect();
    if cols.iter().any(|&c| c == 0) {
        return None;
    }
    let c0 = cols[0];
    let mut sorted = cols.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cols.len() {
        return None;
    }
    // The differences from one fixed column must form a k-dimensional
    // linear space; 2^k distinct members of a span of dimension <= k fill
    // it exactly, so checking the span's dimension suffices.
    for c in cols.iter_mut() {
        *c ^= c0;
    }
    let mut pivots: Vec<u64> = Vec::new();
    for mut c in cols {
        for &p in &pivots {
            let high = 63 - p.leading_zeros();
            if (c >> high) & 1 == 1 {
                c ^= p;
            }
        }
        if c != 0 {
            pivots.push(c);
        }
    }
    if pivots.len() != k {
        return None;
    }
    if m.rank() != rows {
        return None;
    }
    Some(k)
}

/// Tracks which physical rows currently play which role in the staged
/// reduction shape [core rows | indicator rows | all-ones row].
struct RowRoles {
    core: Vec<usize>,
    indicators: Vec<usize>,
    all_ones: Option<usize>,
}

/// Runs the reduction chain on a matrix with distinct nonzero columns,
/// recording every step, until the matrix is recognized as an A_k.
///
/// Inputs whose columns have weight at most 3 always terminate with
/// terminal_k <= 3. Heavier columns are processed by the same loop; if the
/// chain cancels away every column it stops with an input error instead of
/// inventing a bound.
pub fn reduce_to_uk(a: &BinaryMatrix) -> Result<ReductionCertificate> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::input("cannot reduce an empty matrix"));
    }
    if a.rows() > MAX_ROWSPACE_ROWS {
        return Err(Error::budget(
            1u128 << a.rows().min(127),
            1u128 << MAX_ROWSPACE_ROWS,
            "row-space enumeration is exponential in the row count",
        ));
    }
    for j in 0..a.cols() {
        if (0..a.rows()).all(|i| !a.get(i, j)) {
            return Err(Error::input(format!(
                "column {} is zero; drop it (it only contributes a factor f(0)) before reducing",
                j + 1
            )));
        }
    }
    {
        let mut cols: Vec<Vec<u8>> = (0..a.cols()).map(|j| a.column(j)).collect();
        cols.sort();
        let before = cols.len();
        cols.dedup();
        if cols.len() != before {
            return Err(Error::input(
                "duplicate columns; cancel them with simplify before reducing",
            ));
        }
    }

    let mut steps: Vec<ReductionStep> = Vec::new();
    let mut current = a.clone();
    let mut roles = RowRoles {
        core: (0..a.rows()).collect(),
        indicators: Vec::new(),
        all_ones: None,
    };

    // Rank-deficient inputs are first rewritten in reduced row echelon form
    // with zero rows dropped; full-rank inputs are left untouched (row
    // reduction could only grow column weights).
    if current.rank() != current.rows() {
        let r = current.mat.rref();
        let keep: Vec<usize> = (0..r.rows()).filter(|&i| !r.row_is_zero(i)).collect();
        let after = BinaryMatrix {
            mat: r.select_rows(&keep),
        };
        steps.push(ReductionStep {
            kind: ReductionStepKind::Cleanup,
            before: current.clone(),
            vector: None,
            after: after.clone(),
        });
        roles.core = (0..after.rows()).collect();
        current = after;
    }

    for _stage in 0..64 {
        if let Some(k) = ak_equivalent_order(&current.mat) {
            let exponent = 1u64
                << steps
                    .iter()
                    .filter(|s| s.kind == ReductionStepKind::Reduce)
                    .count();
            return Ok(ReductionCertificate {
                input: a.clone(),
                steps,
                terminal: current.clone(),
                terminal_k: k,
                exponent,
            });
        }
        let Some(&first_core) = roles.core.first() else {
            return Err(Error::input(
                "reduction stalled: no reducible rows remain and the matrix is not an A_k",
            ));
        };

        // Rewrite the first core row until it is a minimal vector: find the
        // lightest row-space vector supported inside it; swap it in if it is
        // independent of the other rows, otherwise add it (strictly
        // shrinking the row's support) and repeat.
        loop {
            let u = current.mat.row(first_core).to_vec();
            let v = min_vector_within_support(&current.mat, &u);
            if v == u {
                break;
            }
            let mut others = current.mat.clone();
            let other_rows: Vec<usize> =
                (0..current.rows()).filter(|&i| i != first_core).collect();
            others = others.select_rows(&other_rows);
            let independent = !in_row_space(&others, &v);
            let mut replaced = current.mat.clone();
            if independent {
                replaced.set_row(first_core, &v);
            } else {
                let merged: Vec<u64> = u.iter().zip(&v).map(|(a, b)| a ^ b).collect();
                replaced.set_row(first_core, &merged);
            }
            let after = BinaryMatrix { mat: replaced };
            steps.push(ReductionStep {
                kind: ReductionStepKind::ReplaceRow,
                before: current.clone(),
                vector: None,
                after: after.clone(),
            });
            current = after;
            if independent {
                break;
            }
        }

        // Cauchy-Schwarz along the (now minimal) first core row.
        let v_words = current.mat.row(first_core).to_vec();
        let v_u8 = words_to_u8(&v_words, current.cols());
        let after = reduction_step_unchecked(&current, &v_words);
        steps.push(ReductionStep {
            kind: ReductionStepKind::Reduce,
            before: current.clone(),
            vector: Some(v_u8),
            after: after.clone(),
        });
        let new_indicator = current.rows();
        current = after;

        // Reorder to [core | indicators | all-ones] and drop dependent rows
        // (the first core row turned into a second all-ones row).
        let mut all_ones_candidates = vec![first_core];
        if let Some(old) = roles.all_ones {
            all_ones_candidates.push(old);
        }
        let mut priority: Vec<usize> = Vec::new();
        priority.extend(&all_ones_candidates);
        priority.extend(&roles.indicators);
        priority.push(new_indicator);
        priority.extend(roles.core.iter().skip(1));
        let reordered = current.mat.select_rows(&priority);
        let kept_local = reordered.independent_row_subset();
        let kept: Vec<usize> = kept_local.iter().map(|&i| priority[i]).collect();
        // Reassemble in display order: surviving core rows, indicators, the
        // all-ones row last.
        let core_kept: Vec<usize> = roles
            .core
            .iter()
            .skip(1)
            .copied()
            .filter(|i| kept.contains(i))
            .collect();
        let ind_kept: Vec<usize> = roles
            .indicators
            .iter()
            .copied()
            .chain(std::iter::once(new_indicator))
            .filter(|i| kept.contains(i))
            .collect();
        let ones_kept: Vec<usize> = all_ones_candidates
            .iter()
            .copied()
            .filter(|i| kept.contains(i))
            .collect();
        let mut order = core_kept.clone();
        order.extend(&ind_kept);
        order.extend(&ones_kept);
        let cleaned = BinaryMatrix {
            mat: current.mat.select_rows(&order),
        };
        steps.push(ReductionStep {
            kind: ReductionStepKind::Cleanup,
            before: current.clone(),
            vector: None,
            after: cleaned.clone(),
        });
        roles = RowRoles {
            core: (0..core_kept.len()).collect(),
            indicators: (core_kept.len()..core_kept.len() + ind_kept.len()).collect(),
            all_ones: ones_kept
                .first()
                .map(|_| core_kept.len() + ind_kept.len()),
        };
        current = cleaned;

        // Restriction can merge columns; cancel identical pairs.
        let (cancelled, kept_rows) = simplify_with_kept_rows(&current);
        if cancelled != current {
            if cancelled.cols() == 0 {
                return Err(Error::input(
                    "reduction stalled: every column cancelled away",
                ));
            }
            steps.push(ReductionStep {
                kind: ReductionStepKind::CancelColumns,
                before: current.clone(),
                vector: None,
                after: cancelled.clone(),
            });
            let relabel = |old: usize| kept_rows.iter().position(|&r| r == old);
            roles = RowRoles {
                core: roles.core.iter().filter_map(|&i| relabel(i)).collect(),
                indicators: roles.indicators.iter().filter_map(|&i| relabel(i)).collect(),
                all_ones: roles.all_ones.and_then(relabel),
            };
            current = cancelled;
        }
    }
    Err(Error::input(
        "reduction did not terminate within the stage limit",
    ))
}

impl ReductionCertificate {
    /// The norm order k of the certified bound |E_A(f)| <= ||f||_(U_k).
    pub fn bound_norm_order(&self) -> usize {
        self.terminal_k
    }

    /// Re-checks the whole chain:
    ///
    /// * matrices connect (each step's `after` is the next step's `before`);
    /// * `Reduce` steps reproduce under [`reduction_step`] (which re-checks
    ///   minimality and membership) and satisfy E_before(f)^2 <=
    ///   E_after(f) + tol on every n=2 function;
    /// * `ReplaceRow` and `Cleanup` steps preserve the row space (hence the
    ///   average, exactly); `CancelColumns` steps reproduce under
    ///   [`simplify`]; both kinds are also checked numerically on every n=2
    ///   function where the enumeration budget allows;
    /// * the terminal matrix is an A_(terminal_k) and the exponent is
    ///   2^(number of Reduce steps), which never exceeds 2^terminal_k.
    pub fn verify(&self, tol: f64) -> Result<()> {
        let mut expected = &self.input;
        for (idx, step) in self.steps.iter().enumerate() {
            if &step.before != expected {
                return Err(Error::input(format!(
                    "step {}: chain broken (before-matrix mismatch)",
                    idx + 1
                )));
            }
            match step.kind {
                ReductionStepKind::Reduce => {
                    let v = step.vector.as_ref().ok_or_else(|| {
                        Error::input(format!("step {}: Reduce step lacks its vector", idx + 1))
                    })?;
                    let replay = reduction_step(&step.before, v)?;
                    if replay != step.after {
                        return Err(Error::input(format!(
                            "step {}: Reduce step does not replay",
                            idx + 1
                        )));
                    }
                }
                ReductionStepKind::ReplaceRow | ReductionStepKind::Cleanup => {
                    if step.after.cols() != step.before.cols()
                        || !step.before.mat.same_row_space(&step.after.mat)
                    {
                        return Err(Error::input(format!(
                            "step {}: row space changed",
                            idx + 1
                        )));
                    }
                }
                ReductionStepKind::CancelColumns => {
                    if simplify(&step.before) != step.after {
                        return Err(Error::input(format!(
                            "step {}: column cancellation does not replay",
                            idx + 1
                        )));
                    }
                }
            }
            self.check_step_numerically(step, idx, tol)?;
            expected = &step.after;
        }
        if expected != &self.terminal {
            return Err(Error::input("terminal matrix does not close the chain"));
        }
        match ak_equivalent_order(&self.terminal.mat) {
            Some(k) if k == self.terminal_k => {}
            other => {
                return Err(Error::input(format!(
                    "terminal matrix is not an A_{} (recognized: {:?})",
                    self.terminal_k, other
                )))
            }
        }
        let reduces = self
            .steps
            .iter()
            .filter(|s| s.kind == ReductionStepKind::Reduce)
            .count();
        if self.exponent != 1u64 << reduces {
            return Err(Error::input("exponent does not match the Reduce count"));
        }
        if reduces > self.terminal_k {
            return Err(Error::input(
                "more Cauchy-Schwarz steps than the terminal order supports",
            ));
        }
        Ok(())
    }

    /// Numeric spot-check of one step over every function on two variables
    /// (exhaustive at that size), skipped when the matrices are too large
    /// for the exact-enumeration budget.
    fn check_step_numerically(&self, step: &ReductionStep, idx: usize, tol: f64) -> Result<()> {
        let rows = step.before.rows().max(step.after.rows());
        if 2 * rows > MAX_ASSIGNMENT_BITS {
            return Ok(());
        }
        for table in 0..16u32 {
            let bits: Vec<u8> = (0..4).map(|i| ((table >> i) & 1) as u8).collect();
            let f = BooleanFunction::from_truth_table(2, &bits).expect("valid table");
            let before = generalized_average_exact(&step.before, &f)?;
            let after = generalized_average_exact(&step.after, &f)?;
            let ok = match step.kind {
                ReductionStepKind::Reduce => before * before <= after + tol,
                _ => (before - after).abs() <= tol,
            };
            if !ok {
                return Err(Error::input(format!(
                    "step {}: numeric check failed on table {table:#x}: before {before}, after {after}",
                    idx + 1
                )));
            }
        }
        Ok(())
    }

    /// Human-readable report listing each step's matrices.
    pub fn to_report_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "input ({}x{}):\n{}\n",
            self.input.rows(),
            self.input.cols(),
            indent(&self.input.to_string())
        ));
        for (idx, step) in self.steps.iter().enumerate() {
            let kind = match step.kind {
                ReductionStepKind::Reduce => "reduce",
                ReductionStepKind::ReplaceRow => "replace-row",
                ReductionStepKind::Cleanup => "cleanup",
                ReductionStepKind::CancelColumns => "cancel-columns",
            };
            out.push_str(&format!("step {}: {kind}", idx + 1));
            if let Some(v) = &step.vector {
                let s: String = v.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
                out.push_str(&format!(" along {s}"));
            }
            out.push('\n');
            out.push_str(&format!(
                "  -> {}x{}:\n{}\n",
                step.after.rows(),
                step.after.cols(),
                indent(&step.after.to_string())
            ));
        }
        out.push_str(&format!(
            "terminal: A_{} form, {} columns\n",
            self.terminal_k,
            self.terminal.cols()
        ));
        out.push_str(&format!(
            "bound: |E_A(f)| <= E_terminal(f)^(1/{}) <= ||f||_(U_{})\n",
            self.exponent, self.terminal_k
        ));
        out
    }
}

fn indent(s: &str) -> String {
    s.lines()
        .map(|l| format!("    {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gowers::gowers_norm_exact;

    fn all_n2_functions() -> Vec<BooleanFunction> {
        (0..16u32)
            .map(|t| {
                let bits: Vec<u8> = (0..4).map(|i| ((t >> i) & 1) as u8).collect();
                BooleanFunction::from_truth_table(2, &bits).unwrap()
            })
            .collect()
    }

    #[test]
    fn blr_matrix_average_is_cubic_fourier_sum() {
        let a = BinaryMatrix::parse("101\n011\n").unwrap();
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(4, seed).unwrap();
            let e = generalized_average_exact(&a, &f).unwrap();
            let cubes: f64 = crate::fourier::wht(&f)
                .coeffs()
                .iter()
                .map(|c| c.powi(3))
                .sum();
            assert!((e - cubes).abs() < 1e-12, "seed {seed}: {e} vs {cubes}");
        }
    }

    #[test]
    fn single_entry_matrix_is_the_mean() {
        let a = BinaryMatrix::parse("1\n").unwrap();
        let f = BooleanFunction::random_fn(5, 9).unwrap();
        let e = generalized_average_exact(&a, &f).unwrap();
        assert!((e - f.mean()).abs() < 1e-12);
    }

    #[test]
    fn ak_matrix_matches_examples_and_norms() {
        let a1 = ak_matrix(1);
        assert_eq!(a1.to_string(), "01\n11");
        let a2 = ak_matrix(2);
        assert_eq!(a2.to_string(), "0011\n0101\n1111");
        let a3 = ak_matrix(3);
        assert_eq!(a3.rows(), 4);
        assert_eq!(a3.cols(), 8);
        // Top-3 bits of the 8 columns enumerate {0,1}^3.
        let mut tops: Vec<Vec<u8>> = (0..8).map(|c| a3.column(c)[..3].to_vec()).collect();
        tops.sort();
        tops.dedup();
        assert_eq!(tops.len(), 8);

        for k in 1..=2 {
            let a = ak_matrix(k);
            for seed in 0..4 {
                let f = BooleanFunction::random_fn(3, seed).unwrap();
                let e = generalized_average_exact(&a, &f).unwrap();
                let u = gowers_norm_exact(&f, k).unwrap();
                assert!(
                    (e - u.powi(1 << k)).abs() < 1e-10,
                    "k={k} seed={seed}: {e} vs {}",
                    u.powi(1 << k)
                );
                assert!(e >= -1e-12, "norm powers are nonnegative");
            }
        }
    }

    #[test]
    fn averages_depend_only_on_the_row_space() {
        // Left multiplication by a nonsingular matrix is a change of
        // variables.
        let a = BinaryMatrix::parse("1011\n0110\n1100\n").unwrap();
        let m = BitMatrix::from_strings(&["110", "011", "111"]);
        assert_eq!(m.rank(), 3);
        let ma = BinaryMatrix::from_bit_matrix(m.mul(a.bit_matrix()));
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(4, seed).unwrap();
            let lhs = generalized_average_exact(&ma, &f).unwrap();
            let rhs = generalized_average_exact(&a, &f).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn estimate_agrees_with_exact() {
        let a = ak_matrix(2);
        let f = BooleanFunction::inner_product_bent(8).unwrap();
        let exact = 1.0 / 256.0; // U_2(bent)^4 = 2^(-n)
        let est = generalized_average_estimate(&a, &f, 50_000, 3).unwrap();
        assert!(
            (est.estimate - exact).abs() <= 4.0 * est.stderr.unwrap() + 1e-12,
            "{} vs {exact}",
            est.estimate
        );
        let one = generalized_average_estimate(&a, &f, 1, 3).unwrap();
        assert_eq!(one.stderr, None);
    }

    #[test]
    fn estimate_on_linear_function_is_one() {
        // Every column sum check passes identically for linear f on the
        // BLR matrix.
        let a = BinaryMatrix::parse("101\n011\n").unwrap();
        let f = BooleanFunction::linear_fn(6, 0b101101, false).unwrap();
        let est = generalized_average_estimate(&a, &f, 2_000, 1).unwrap();
        assert_eq!(est.estimate, 1.0);
    }

    #[test]
    fn exact_budget_is_enforced() {
        let a = ak_matrix(3); // 4 rows
        let f = BooleanFunction::random_fn(8, 1).unwrap(); // 8 * 4 = 32 > 26
        match generalized_average_exact(&a, &f) {
            Err(Error::Budget { hint, .. }) => assert!(hint.contains("estimate")),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_vectors_examples() {
        let a = BinaryMatrix::parse("101\n110\n").unwrap();
        let mv = row_space_minimal_vectors(&a).unwrap();
        assert!(mv.contains(&vec![1, 0, 1]));
        // All three nonzero vectors have incomparable supports here.
        assert_eq!(mv.len(), 3);

        let id = BinaryMatrix::parse("100\n010\n001\n").unwrap();
        let mv = row_space_minimal_vectors(&id).unwrap();
        // Equal weights sort lexicographically: 001 < 010 < 100.
        assert_eq!(mv, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);

        let single = BinaryMatrix::parse("1101\n").unwrap();
        assert_eq!(row_space_minimal_vectors(&single).unwrap(), vec![vec![1, 1, 0, 1]]);
    }

    #[test]
    fn minimal_vectors_span_the_row_space() {
        let a = BinaryMatrix::parse("10110\n01011\n00101\n").unwrap();
        let mv = row_space_minimal_vectors(&a).unwrap();
        let rows: Vec<Vec<u8>> = mv;
        let m = BinaryMatrix::from_rows(&rows).unwrap();
        assert!(m.bit_matrix().same_row_space(a.bit_matrix()));
    }

    #[test]
    fn reduction_step_worked_example() {
        let a = BinaryMatrix::parse("101\n110\n").unwrap();
        let out = reduction_step(&a, &[1, 0, 1]).unwrap();
        assert_eq!(out.to_string(), "1111\n1010\n1100");
    }

    #[test]
    fn reduction_step_validates_its_vector() {
        let a = BinaryMatrix::parse("101\n110\n").unwrap();
        // (0,1,1) = r1 + r2 is in the row space and minimal; (1,1,1) is not
        // in the row space; (0,0,0) is never minimal.
        assert!(reduction_step(&a, &[0, 1, 1]).is_ok());
        assert!(reduction_step(&a, &[1, 1, 1]).is_err());
        assert!(reduction_step(&a, &[0, 0, 0]).is_err());
        // Non-minimal vector: in the row space of the identity-ish matrix
        // below, (1,1,0) strictly contains the row (1,0,0).
        let b = BinaryMatrix::parse("100\n010\n").unwrap();
        assert!(reduction_step(&b, &[1, 1, 0]).is_err());
        // Rank-deficient matrices are rejected.
        let c = BinaryMatrix::parse("101\n101\n").unwrap();
        assert!(reduction_step(&c, &[1, 0, 1]).is_err());
    }

    #[test]
    fn reduction_step_bound_on_all_small_functions() {
        let a = BinaryMatrix::parse("101\n110\n").unwrap();
        let out = reduction_step(&a, &[1, 0, 1]).unwrap();
        for f in all_n2_functions() {
            let before = generalized_average_exact(&a, &f).unwrap();
            let after = generalized_average_exact(&out, &f).unwrap();
            assert!(before * before <= after + 1e-9);
        }
    }

    #[test]
    fn simplify_cancels_pairs_and_drops_empty_rows() {
        let a = BinaryMatrix::parse("1010\n0101\n").unwrap();
        // Columns 1 and 3 are equal, as are 2 and 4: everything cancels.
        let s = simplify(&a);
        assert_eq!(s.cols(), 0);
        let b = BinaryMatrix::parse("110\n001\n").unwrap();
        // Columns 1 and 2 cancel; row 1 is left empty and dropped.
        let s = simplify(&b);
        assert_eq!(s.to_string(), "1");
        for f in all_n2_functions() {
            let e1 = generalized_average_exact(&b, &f).unwrap();
            let e2 = generalized_average_exact(&s, &f).unwrap();
            assert!((e1 - e2).abs() < 1e-12);
        }
    }

    #[test]
    fn ak_recognition() {
        for k in 1..=4 {
            assert_eq!(ak_equivalent_order(ak_matrix(k).bit_matrix()), Some(k));
        }
        // Row operations and column permutations do not matter.
        let m = BitMatrix::from_strings(&["0101", "1100", "1111"]);
        assert_eq!(ak_equivalent_order(&m), Some(2));
        // Wrong column count.
        let m = BitMatrix::from_strings(&["011", "111"]);
        assert_eq!(ak_equivalent_order(&m), None);
    }

    #[test]
    fn reduce_blr_matrix_terminates_at_u2() {
        let a = BinaryMatrix::parse("101\n011\n").unwrap();
        let cert = reduce_to_uk(&a).unwrap();
        // One Cauchy-Schwarz step: restrict to supp(101), double, clean up.
        assert_eq!(cert.terminal_k, 2);
        assert_eq!(cert.exponent, 2);
        cert.verify(1e-9).unwrap();
        // The certified bound holds on every n=2 function.
        for f in all_n2_functions() {
            let e = generalized_average_exact(&a, &f).unwrap();
            let u = gowers_norm_exact(&f, cert.terminal_k).unwrap();
            assert!(e.abs() <= u + 1e-9);
        }
    }

    #[test]
    fn reduce_full_column_set_and_check_bound() {
        // All seven nonzero columns on three rows: several stages, with
        // column cancellation along the way.
        let a = BinaryMatrix::parse("1010101\n0110011\n0001111\n").unwrap();
        let cert = reduce_to_uk(&a).unwrap();
        assert!(cert.terminal_k <= 3, "k = {}", cert.terminal_k);
        cert.verify(1e-9).unwrap();
        for f in all_n2_functions() {
            let e = generalized_average_exact(&a, &f).unwrap();
            let u = gowers_norm_exact(&f, cert.terminal_k).unwrap();
            assert!(e.abs() <= u + 1e-9, "{e} vs {u}");
        }
    }

    #[test]
    fn reduce_ak_matrix_is_terminal_immediately() {
        let cert = reduce_to_uk(&ak_matrix(3)).unwrap();
        assert_eq!(cert.terminal_k, 3);
        assert!(cert.steps.is_empty());
        assert_eq!(cert.exponent, 1);
        cert.verify(1e-9).unwrap();
    }

    #[test]
    fn reduce_single_one_reaches_u1() {
        let a = BinaryMatrix::parse("1\n").unwrap();
        let cert = reduce_to_uk(&a).unwrap();
        assert_eq!(cert.terminal_k, 1);
        cert.verify(1e-9).unwrap();
    }

    #[test]
    fn reduce_rejects_bad_columns() {
        let zero_col = BinaryMatrix::parse("10\n01\n").unwrap();
        assert!(reduce_to_uk(&zero_col).is_ok());
        let with_zero = BinaryMatrix::parse("100\n010\n").unwrap();
        assert!(reduce_to_uk(&with_zero).is_err());
        let dup = BinaryMatrix::parse("11\n11\n").unwrap();
        assert!(reduce_to_uk(&dup).is_err());
    }

    #[test]
    fn reduce_handles_rank_deficient_input() {
        let a = BinaryMatrix::parse("101\n101\n011\n").unwrap();
        let cert = reduce_to_uk(&a).unwrap();
        cert.verify(1e-9).unwrap();
        assert_eq!(cert.steps[0].kind, ReductionStepKind::Cleanup);
    }

    #[test]
    fn certificate_report_mentions_the_bound() {
        let a = BinaryMatrix::parse("101\n011\n").unwrap();
        let cert = reduce_to_uk(&a).unwrap();
        let report = cert.to_report_string();
        assert!(report.contains("bound:"));
        assert!(report.contains("terminal"));
    }

    #[test]
    fn matrix_parse_errors_carry_line_numbers() {
        let err = BinaryMatrix::parse("101\n1x1\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = BinaryMatrix::parse("101\n11\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
