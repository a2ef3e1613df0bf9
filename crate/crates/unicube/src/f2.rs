//! Dense bit matrices over F2.
//!
//! Rows are packed into `u64` words, least-significant bit first: column `c`
//! of a row lives in word `c / 64` at bit `c % 64`. Padding bits beyond
//! `cols` are kept zero so whole-word equality and XOR are valid on rows.
//!
//! This is deliberately minimal: reduced row echelon form, rank, row-space
//! comparison, transpose, multiplication, inversion, and a kernel basis for
//! matrices that fit one word per row. These cover the matroid machinery
//! (minimal vectors, reduction certificates) and the decoder's linear-map
//! fitting; nothing here depends on matrix contents being small, only the
//! one-word fast paths assert `cols <= 64`.

use std::fmt;

/// Dense matrix over F2 with word-packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    /// `rows * words_per_row` words, row-major.
    words: Vec<u64>,
}

/// XOR `src` into `dst` word-wise. Both slices must have equal length.
#[inline]
pub fn xor_assign(dst: &mut [u64], src: &[u64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

impl BitMatrix {
    /// All-zero `rows x cols` matrix.
    pub fn zero(rows: usize, cols: usize) -> Self {
        let wpr = Self::wpr_for(cols);
        BitMatrix {
            rows,
            cols,
            words: vec![0; rows * wpr],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds from one `u64` per row; requires `cols <= 64`.
    pub fn from_rows_u64(rows: &[u64], cols: usize) -> Self {
        assert!(cols <= 64, "one-word constructor needs cols <= 64");
        let mask = Self::low_mask(cols);
        let mut m = Self::zero(rows.len(), cols);
        for (r, &row) in rows.iter().enumerate() {
            debug_assert_eq!(row & !mask, 0, "bits beyond cols must be zero");
            m.words[r] = row & mask;
        }
        m
    }

    /// Builds from `'0'`/`'1'` strings, one per row, leftmost char = column 0.
    pub fn from_strings(rows: &[&str]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zero(rows.len(), cols);
        for (r, s) in rows.iter().enumerate() {
            assert_eq!(s.len(), cols, "ragged rows");
            for (c, ch) in s.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => m.set(r, c, true),
                    _ => panic!("matrix rows must be 0/1 strings"),
                }
            }
        }
        m
    }

    #[inline]
    fn wpr_for(cols: usize) -> usize {
        cols.div_ceil(64).max(1)
    }

    #[inline]
    fn low_mask(bits: usize) -> u64 {
        if bits >= 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn wpr(&self) -> usize {
        Self::wpr_for(self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        let wpr = self.wpr();
        (self.words[r * wpr + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let wpr = self.wpr();
        let w = &mut self.words[r * wpr + c / 64];
        let bit = 1u64 << (c % 64);
        if v {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    /// The words of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        let wpr = self.wpr();
        &self.words[r * wpr..(r + 1) * wpr]
    }

    /// Row `r` as a single word; requires `cols <= 64`.
    #[inline]
    pub fn row_u64(&self, r: usize) -> u64 {
        assert!(self.cols <= 64);
        self.words[r * self.wpr()]
    }

    /// Overwrites row `r`; `row` must have `words_per_row` entries.
    pub fn set_row(&mut self, r: usize, row: &[u64]) {
        let wpr = self.wpr();
        self.words[r * wpr..(r + 1) * wpr].copy_from_slice(row);
    }

    /// XORs row `src` into row `dst`.
    #[inline]
    pub fn xor_rows(&mut self, dst: usize, src: usize) {
        let wpr = self.wpr();
        let (a, b) = (dst.min(src), dst.max(src));
        let (lo, hi) = self.words.split_at_mut(b * wpr);
        let src_slice: &[u64];
        let dst_slice: &mut [u64];
        if dst < src {
            dst_slice = &mut lo[a * wpr..(a + 1) * wpr];
            src_slice = &hi[..wpr];
        } else {
            dst_slice = &mut hi[..wpr];
            src_slice = &lo[a * wpr..(a + 1) * wpr];
        }
        for (d, s) in dst_slice.iter_mut().zip(src_slice) {
            *d ^= s;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let wpr = self.wpr();
        for k in 0..wpr {
            self.words.swap(a * wpr + k, b * wpr + k);
        }
    }

    #[inline]
    pub fn row_is_zero(&self, r: usize) -> bool {
        self.row(r).iter().all(|&w| w == 0)
    }

    /// Number of ones in row `r`.
    pub fn row_weight(&self, r: usize) -> u32 {
        self.row(r).iter().map(|w| w.count_ones()).sum()
    }

    /// Number of ones in column `c`.
    pub fn col_weight(&self, c: usize) -> u32 {
        (0..self.rows).filter(|&r| self.get(r, c)).count() as u32
    }

    /// Column `c` as a bit mask over rows; requires `rows <= 64`.
    pub fn col_u64(&self, c: usize) -> u64 {
        assert!(self.rows <= 64);
        let mut m = 0u64;
        for r in 0..self.rows {
            if self.get(r, c) {
                m |= 1 << r;
            }
        }
        m
    }

    /// Matrix with the listed columns of `self`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> BitMatrix {
        let mut m = BitMatrix::zero(self.rows, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            for r in 0..self.rows {
                if self.get(r, c) {
                    m.set(r, j, true);
                }
            }
        }
        m
    }

    /// Matrix with the listed rows of `self`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> BitMatrix {
        let mut m = BitMatrix::zero(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            m.set_row(i, self.row(r));
        }
        m
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Entrywise sum over F2; shapes must match.
    pub fn xor(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "xor needs equal shapes"
        );
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
        out
    }

    /// Matrix product over F2; `self.cols` must equal `other.rows`.
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = BitMatrix::zero(self.rows, other.cols);
        let wpr = out.wpr();
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    let dst = &mut out.words[r * wpr..(r + 1) * wpr];
                    xor_assign(dst, other.row(k));
                }
            }
        }
        out
    }

    /// Matrix-vector product for `cols <= 64`: bit `r` of the result is
    /// `<row_r, x>` over F2.
    #[inline]
    pub fn mul_vec_u64(&self, x: u64) -> u64 {
        assert!(self.cols <= 64 && self.rows <= 64);
        let mut y = 0u64;
        for r in 0..self.rows {
            if (self.row_u64(r) & x).count_ones() & 1 == 1 {
                y |= 1 << r;
            }
        }
        y
    }

    /// Reduced row echelon form (Gauss-Jordan).
    pub fn rref(&self) -> BitMatrix {
        let mut m = self.clone();
        let mut pivot_row = 0;
        for c in 0..m.cols {
            if pivot_row == m.rows {
                break;
            }
            // Find a row at or below pivot_row with a 1 in column c.
            let hit = (pivot_row..m.rows).find(|&r| m.get(r, c));
            let Some(r) = hit else { continue };
            m.swap_rows(pivot_row, r);
            for other in 0..m.rows {
                if other != pivot_row && m.get(other, c) {
                    m.xor_rows(other, pivot_row);
                }
            }
            pivot_row += 1;
        }
        m
    }

    /// Rank over F2.
    pub fn rank(&self) -> usize {
        let r = self.rref();
        (0..r.rows).filter(|&i| !r.row_is_zero(i)).count()
    }

    /// The nonzero rows of the RREF: a canonical basis of the row space.
    pub fn row_space_basis(&self) -> Vec<Vec<u64>> {
        let r = self.rref();
        (0..r.rows)
            .filter(|&i| !r.row_is_zero(i))
            .map(|i| r.row(i).to_vec())
            .collect()
    }

    /// True when `self` and `other` span the same row space (same `cols`).
    pub fn same_row_space(&self, other: &BitMatrix) -> bool {
        self.cols == other.cols && self.row_space_basis() == other.row_space_basis()
    }

    /// Indices of a maximal independent subset of rows, scanning top-down.
    pub fn independent_row_subset(&self) -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::new();
        let mut basis = BitMatrix::zero(0, self.cols);
        for r in 0..self.rows {
            let mut candidate = basis.clone();
            candidate.push_row(self.row(r));
            if candidate.rank() > basis.rank() {
                kept.push(r);
                basis = candidate;
            }
        }
        kept
    }

    /// Appends a row (must have `words_per_row` entries).
    pub fn push_row(&mut self, row: &[u64]) {
        let wpr = self.wpr();
        debug_assert_eq!(row.len(), wpr);
        self.words.extend_from_slice(row);
        self.rows += 1;
    }

    /// Inverse of a square matrix, or `None` if singular. `cols <= 64`.
    pub fn invert(&self) -> Option<BitMatrix> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        assert!(self.cols <= 64);
        let n = self.rows;
        let mut a: Vec<u64> = (0..n).map(|r| self.row_u64(r)).collect();
        let mut inv: Vec<u64> = (0..n).map(|r| 1u64 << r).collect();
        for c in 0..n {
            let pivot = (c..n).find(|&r| (a[r] >> c) & 1 == 1)?;
            a.swap(c, pivot);
            inv.swap(c, pivot);
            for r in 0..n {
                if r != c && (a[r] >> c) & 1 == 1 {
                    a[r] ^= a[c];
                    inv[r] ^= inv[c];
                }
            }
        }
        Some(BitMatrix::from_rows_u64(&inv, n))
    }

    /// Basis of `{x : self * x = 0}` as bit vectors; `cols <= 64`.
    pub fn kernel_basis(&self) -> Vec<u64> {
        assert!(self.cols <= 64);
        let r = self.rref();
        // Locate the pivot column of each nonzero row.
        let mut pivot_of_col: Vec<Option<usize>> = vec![None; self.cols];
        let mut pivots: Vec<usize> = Vec::new();
        for i in 0..r.rows {
            if let Some(c) = (0..r.cols).find(|&c| r.get(i, c)) {
                pivot_of_col[c] = Some(i);
                pivots.push(c);
            }
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_of_col[free].is_some() {
                continue;
            }
            // x_free = 1, other free vars 0; pivots forced by their rows.
            let mut x = 1u64 << free;
            for &p in &pivots {
                let i = pivot_of_col[p].unwrap();
                if r.get(i, free) {
                    x |= 1 << p;
                }
            }
            basis.push(x);
        }
        basis
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", if self.get(r, c) { '1' } else { '0' })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", if self.get(r, c) { '1' } else { '0' })?;
            }
            if r + 1 < self.rows {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}
