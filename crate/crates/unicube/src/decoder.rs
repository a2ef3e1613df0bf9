//! Constructive search for quadratic structure: given a boolean function,
//! produce a quadratic sign function g(x) = (-1)^(<x,Ax> + <alpha,x> + a)
//! together with its correlation <f, g>.
//!
//! The pipeline reads the quadratic part off the derivative structure of f:
//!
//! 1. [`choice_function`] takes one spectrum per direction y and records
//!    where the derivative spectrum peaks (`phi(y)`) and how strongly
//!    (`weight(y)`). For an exact quadratic with coefficient matrix A the
//!    peaks form the linear map phi(y) = (A + A^t) y with weight 1
//!    everywhere; noise moves only a fraction of them.
//! 2. [`fit_linear_map`] recovers a candidate matrix D from the peaks by
//!    solving D y = phi(y) on randomly sampled spanning subsets of the
//!    high-weight directions and keeping the best of R restarts (or, for
//!    n <= 3, by trying every matrix).
//! 3. [`symmetrize`] replaces D by a symmetric zero-diagonal B -- the only
//!    shape a map of the form A + A^t can have -- agreeing with D on an
//!    explicit subspace.
//! 4. [`quadratic_from_b`] splits B = A + A^t, multiplies f by
//!    (-1)^(<x,Ax>), and completes the witness with the top Fourier
//!    coefficient of the product, which supplies alpha, the constant bit,
//!    and the exact correlation.
//!
//! [`decode_quadratic`] chains the stages and falls back to the B = 0
//! completion (the best affine approximation) whenever the pipeline's
//! witness is worse, so its correlation never drops below the plain Fourier
//! decoder's. For small n it instead enumerates every B outright, making
//! the output the global optimum over all quadratics -- the same value
//! `rm2_exact_distance` finds by walking truth tables, reached here through
//! spectra.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::f2::BitMatrix;
use crate::fourier::wht;
use crate::gowers::DEFAULT_OP_BUDGET;
use crate::quad::QuadraticPolynomial;
use crate::rng::{gen_below, stream_rng};

/// Where each derivative spectrum peaks and how strongly.
///
/// For every direction y the table stores `phi(y)`, the location of the
/// largest-magnitude coefficient of the spectrum of f_y(x) = f(x) f(x+y)
/// (the smallest location on magnitude ties), and `weight(y)`, that
/// coefficient squared. Two facts shape everything downstream:
///
/// * `weight(y) > 0` forces `<phi(y), y> = 0`, because derivative spectra
///   vanish off the subspace orthogonal to their direction;
/// * when f is the sign function of a quadratic with coefficient matrix A,
///   phi is the linear map y -> (A + A^t) y and weight is 1 everywhere.
#[derive(Clone, Debug)]
pub struct ChoiceFunction {
    n: usize,
    phi: Vec<u32>,
    weight: Vec<f64>,
}

impl ChoiceFunction {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// The peak location of the derivative spectrum in direction y.
    #[inline]
    pub fn phi(&self, y: u32) -> u32 {
        self.phi[y as usize]
    }

    /// The squared peak coefficient in direction y.
    #[inline]
    pub fn weight(&self, y: u32) -> f64 {
        self.weight[y as usize]
    }

    /// E_y weight(y) = E_y max_alpha f_y-hat(alpha)^2. This average is at
    /// least the eighth power of the third-order uniformity norm, since
    /// that power equals E_y sum_alpha f_y-hat(alpha)^4 and each inner sum
    /// is at most its largest term times a total of 1.
    pub fn mean_weight(&self) -> f64 {
        self.weight.iter().sum::<f64>() / self.weight.len() as f64
    }

    /// Directions whose weight reaches the threshold.
    fn support(&self, threshold: f64) -> Vec<u32> {
        (0..self.phi.len() as u32)
            .filter(|&y| self.weight[y as usize] >= threshold)
            .collect()
    }
}

/// Computes the choice function of f: one size-2^n spectrum per direction,
/// about n * 4^n table operations in total, refused beyond the 2^32 budget.
pub fn choice_function(f: &BooleanFunction) -> Result<ChoiceFunction> {
    let n = f.n();
    let required = (n as u128) << (2 * n);
    if required > DEFAULT_OP_BUDGET {
        return Err(Error::budget(
            required,
            DEFAULT_OP_BUDGET,
            "the choice function takes a full spectrum of every derivative",
        ));
    }
    let rows: Vec<(u32, f64)> = (0..f.len() as u32)
        .into_par_iter()
        .map(|y| {
            let (alpha, coeff) = wht(&f.derivative(y)).max_abs();
            (alpha, coeff * coeff)
        })
        .collect();
    Ok(ChoiceFunction {
        n,
        phi: rows.iter().map(|r| r.0).collect(),
        weight: rows.iter().map(|r| r.1).collect(),
    })
}

/// A linear model phi(y) = D y (+ shift) fitted to a choice function.
#[derive(Clone, Debug)]
pub struct LinearFit {
    /// The fitted matrix D.
    pub matrix: BitMatrix,
    /// Number of support directions with phi(y) = D y + shift.
    pub agreement: usize,
    /// Size of the support {y : weight(y) >= threshold} that was scored.
    pub support: usize,
    /// The scored shift; always 0 unless a shift search was requested.
    pub shift: u32,
}

/// Incremental F2 span tracker: one stored vector per leading (lowest set)
/// bit position.
struct XorBasis {
    rows: Vec<u64>,
}

impl XorBasis {
    fn new(n: usize) -> Self {
        XorBasis { rows: vec![0; n] }
    }

    /// Reduces v against the basis; a nonzero residue means independence.
    fn residue(&self, mut v: u64) -> u64 {
        while v != 0 {
            let i = v.trailing_zeros() as usize;
            if self.rows[i] == 0 {
                return v;
            }
            v ^= self.rows[i];
        }
        0
    }

    /// Adds v to the span; false when it was already inside.
    fn insert(&mut self, v: u64) -> bool {
        let r = self.residue(v);
        if r == 0 {
            return false;
        }
        self.rows[r.trailing_zeros() as usize] = r;
        true
    }
}

/// Solves D y = phi(y) on the first spanning subset found along `order`;
/// directions outside the span of `order` are completed by unit vectors
/// mapped to 0, so the system is always square and invertible.
fn solve_from_order(n: usize, cf: &ChoiceFunction, order: &[u32]) -> BitMatrix {
    let mut basis = XorBasis::new(n);
    let mut kept: Vec<(u64, u64)> = Vec::with_capacity(n);
    for &y in order {
        if kept.len() == n {
            break;
        }
        if basis.insert(y as u64) {
            kept.push((y as u64, cf.phi[y as usize] as u64));
        }
    }
    for i in 0..n {
        if kept.len() == n {
            break;
        }
        if basis.insert(1u64 << i) {
            kept.push((1u64 << i, 0));
        }
    }
    debug_assert_eq!(kept.len(), n, "unit vectors complete any span");
    let ys: Vec<u64> = kept.iter().map(|k| k.0).collect();
    let phis: Vec<u64> = kept.iter().map(|k| k.1).collect();
    let y_mat = BitMatrix::from_rows_u64(&ys, n);
    let phi_mat = BitMatrix::from_rows_u64(&phis, n);
    // Row j of y_mat * D^t is D y_j, so D^t = y_mat^(-1) * phi_mat.
    let m = y_mat.invert().expect("kept rows are independent");
    m.mul(&phi_mat).transpose()
}

/// Scores a candidate matrix over the support. Without a shift search the
/// agreement counts phi(y) = D y; with one it counts the most common
/// residual phi(y) + D y (smallest residual on count ties) and reports it
/// as the shift.
fn score(cf: &ChoiceFunction, support: &[u32], matrix: BitMatrix, shift_search: bool) -> LinearFit {
    let mut agreement = 0usize;
    let mut shift = 0u32;
    if shift_search {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &y in support {
            let residual = cf.phi[y as usize] ^ matrix.mul_vec_u64(y as u64) as u32;
            *counts.entry(residual).or_insert(0) += 1;
        }
        let mut best = (u32::MAX, 0usize);
        for (&z, &count) in &counts {
            if count > best.1 || (count == best.1 && z < best.0) {
                best = (z, count);
            }
        }
        shift = best.0;
        agreement = best.1;
    } else {
        for &y in support {
            if matrix.mul_vec_u64(y as u64) as u32 == cf.phi[y as usize] {
                agreement += 1;
            }
        }
    }
    LinearFit {
        matrix,
        agreement,
        support: support.len(),
        shift,
    }
}

/// Fits a matrix D to the choice function by restarted spanning-subset
/// solving.
///
/// Each restart shuffles the support A = {y : weight(y) >= threshold} with
/// its own RNG stream, keeps the first spanning subset of the shuffle,
/// solves D y = phi(y) on it exactly, and scores the solution on all of A.
/// The best agreement wins; ties keep the earliest restart, so the result
/// is reproducible and independent of thread count. With `shift_search`
/// set, scoring allows a constant offset phi(y) = D y + z (the offset only
/// affects scoring -- the affine completion later absorbs any shift).
pub fn fit_linear_map(
    cf: &ChoiceFunction,
    threshold: f64,
    restarts: u64,
    seed: u64,
    shift_search: bool,
) -> Result<LinearFit> {
    if restarts == 0 {
        return Err(Error::input("fitting needs at least one restart"));
    }
    let n = cf.n();
    let support = cf.support(threshold);
    if support.is_empty() {
        return Err(Error::input(format!(
            "no direction has weight >= {threshold}; lower the threshold"
        )));
    }
    let fits: Vec<LinearFit> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(seed, restart);
            let mut order = support.clone();
            for i in (1..order.len()).rev() {
                order.swap(i, gen_below(&mut rng, i as u64 + 1) as usize);
            }
            let d = solve_from_order(n, cf, &order);
            score(cf, &support, d, shift_search)
        })
        .collect();
    Ok(fits
        .into_iter()
        .reduce(|best, next| {
            if next.agreement > best.agreement {
                next
            } else {
                best
            }
        })
        .expect("restarts >= 1"))
}

/// Fits by scoring every n x n matrix; only feasible for n <= 3, where it
/// serves as the ground truth for the restarted fit. Ties go to the
/// smallest matrix encoding (rows read as integers, row 0 least
/// significant).
pub fn fit_linear_map_exhaustive(cf: &ChoiceFunction, threshold: f64) -> Result<LinearFit> {
    let n = cf.n();
    if n > 3 {
        return Err(Error::budget(
            1u128 << ((n * n) as u32).min(127),
            1 << 9,
            "exhaustive fitting scores 2^(n^2) matrices; use fit_linear_map",
        ));
    }
    let support = cf.support(threshold);
    if support.is_empty() {
        return Err(Error::input(format!(
            "no direction has weight >= {threshold}; lower the threshold"
        )));
    }
    let mask = (1u64 << n) - 1;
    let mut best: Option<LinearFit> = None;
    for code in 0u64..1 << (n * n) {
        let rows: Vec<u64> = (0..n).map(|i| (code >> (i * n)) & mask).collect();
        let fit = score(cf, &support, BitMatrix::from_rows_u64(&rows, n), false);
        if best.as_ref().is_none_or(|b| fit.agreement > b.agreement) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least the zero matrix was scored"))
}

/// A symmetric bit matrix with zero diagonal: exactly the matrices of the
/// form A + A^t, the shape the derivative peaks of a quadratic sign
/// function trace out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricZeroDiagMatrix {
    b: BitMatrix,
}

impl SymmetricZeroDiagMatrix {
    /// Wraps a matrix after checking the shape: square, symmetric, zero
    /// diagonal.
    pub fn new(b: BitMatrix) -> Result<Self> {
        if b.rows() != b.cols() {
            return Err(Error::input(format!(
                "shape matrix must be square, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        for i in 0..b.rows() {
            if b.get(i, i) {
                return Err(Error::input(format!("diagonal entry ({i}, {i}) is 1")));
            }
            for j in (i + 1)..b.cols() {
                if b.get(i, j) != b.get(j, i) {
                    return Err(Error::input(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymmetricZeroDiagMatrix { b })
    }

    /// The zero shape: no quadratic part at all.
    pub fn zero(n: usize) -> Self {
        SymmetricZeroDiagMatrix {
            b: BitMatrix::zero(n, n),
        }
    }

    /// A + A^t for the polynomial's coefficient matrix A.
    pub fn from_quadratic(q: &QuadraticPolynomial) -> Self {
        let a = q.quad_matrix();
        SymmetricZeroDiagMatrix {
            b: a.xor(&a.transpose()),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.b.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &BitMatrix {
        &self.b
    }

    /// The product B y as a point of the cube.
    #[inline]
    pub fn apply(&self, y: u32) -> u32 {
        debug_assert!(self.b.cols() <= 32);
        self.b.mul_vec_u64(y as u64) as u32
    }

    /// The strictly upper-triangular A with A + A^t equal to the matrix.
    pub fn upper_half(&self) -> BitMatrix {
        let n = self.b.rows();
        let mut a = BitMatrix::zero(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.b.get(i, j) {
                    a.set(i, j, true);
                }
            }
        }
        a
    }
}

/// <u, D w> over F2.
#[inline]
fn pair(u: u64, d: &BitMatrix, w: u64) -> bool {
    (d.mul_vec_u64(w) & u).count_ones() & 1 == 1
}

/// Projects an arbitrary square matrix onto the symmetric zero-diagonal
/// shape; see [`symmetrize_detailed`] for the subspace where nothing is
/// lost.
pub fn symmetrize(d: &BitMatrix) -> SymmetricZeroDiagMatrix {
    symmetrize_detailed(d).0
}

/// Like [`symmetrize`], additionally reporting a basis of the subspace on
/// which the output still acts like the input.
///
/// The construction runs in two stages. First, on U = {x : D x = D^t x}
/// (computed as the kernel of D + D^t) the bilinear form <x, D y> is
/// already symmetric; extending a basis of U by unit vectors to a basis of
/// the whole space and mirroring the form's values across the U-block
/// (zero elsewhere) yields a symmetric matrix S with S u = D u on U.
/// Second, the diagonal d of S is cleared by the rank-one correction
/// B = S + d d^t, which cannot disturb x with <d, x> = 0. The reported
/// basis therefore spans {u in U : <d, u> = 0}, and B u = D u holds on all
/// of it.
pub fn symmetrize_detailed(d: &BitMatrix) -> (SymmetricZeroDiagMatrix, Vec<u64>) {
    assert_eq!(d.rows(), d.cols(), "symmetrize needs a square matrix");
    assert!(d.cols() <= 64, "matrices act on cube points");
    let n = d.rows();
    let skew = d.xor(&d.transpose());
    let u_basis = skew.kernel_basis();
    let r = u_basis.len();

    // Basis of the whole space: U first, unit vectors filling the gap.
    let mut span = XorBasis::new(n);
    let mut v: Vec<u64> = Vec::with_capacity(n);
    for &u in &u_basis {
        let fresh = span.insert(u);
        debug_assert!(fresh, "kernel bases are independent");
        v.push(u);
    }
    for i in 0..n {
        if v.len() == n {
            break;
        }
        if span.insert(1u64 << i) {
            v.push(1u64 << i);
        }
    }

    // The form's values in v-coordinates. Mirroring is consistent on the
    // U-block because <v_i, D v_j> = <v_j, D^t v_i> = <v_j, D v_i> when
    // v_j lies in U; the extension block carries zeros.
    let mut g = BitMatrix::zero(n, n);
    for i in 0..n {
        for j in 0..n {
            let val = if j < r {
                pair(v[i], d, v[j])
            } else if i < r {
                pair(v[j], d, v[i])
            } else {
                false
            };
            g.set(i, j, val);
        }
    }

    // Pull back through the basis change Q (columns v_i):
    // S = Q^(-t) G Q^(-1), so <Q b, S Q c> = <b, G c>.
    let mut q = BitMatrix::zero(n, n);
    for (j, &vj) in v.iter().enumerate() {
        for i in 0..n {
            if (vj >> i) & 1 == 1 {
                q.set(i, j, true);
            }
        }
    }
    let q_inv = q.invert().expect("v is a basis");
    let s = q_inv.transpose().mul(&g).mul(&q_inv);

    // Clear the diagonal with the rank-one correction d d^t.
    let mut diag = 0u64;
    for i in 0..n {
        if s.get(i, i) {
            diag |= 1 << i;
        }
    }
    let mut b = s;
    for i in 0..n {
        if (diag >> i) & 1 == 0 {
            continue;
        }
        for j in 0..n {
            if (diag >> j) & 1 == 1 {
                let flipped = !b.get(i, j);
                b.set(i, j, flipped);
            }
        }
    }

    // Both corrections vanish inside U and orthogonal to the diagonal.
    let mut stacked_rows: Vec<u64> = (0..n).map(|i| skew.row_u64(i)).collect();
    stacked_rows.push(diag);
    let kept = BitMatrix::from_rows_u64(&stacked_rows, n).kernel_basis();

    let b = SymmetricZeroDiagMatrix::new(b).expect("the construction forces the shape");
    (b, kept)
}

/// Completes a candidate shape B into a full quadratic witness.
///
/// Splits B = A + A^t with A strictly upper triangular, multiplies f by
/// h(x) = (-1)^(<x,Ax>), and reads the affine part off the top coefficient
/// of the product's spectrum: the result g(x) = (-1)^(<x,Ax> + <alpha,x> + a)
/// satisfies <f, g> = |fh-hat(alpha)| exactly, returned alongside it.
pub fn quadratic_from_b(
    f: &BooleanFunction,
    b: &SymmetricZeroDiagMatrix,
) -> Result<(QuadraticPolynomial, f64)> {
    if b.n() != f.n() {
        return Err(Error::input(format!(
            "dimension mismatch: function has {}, shape matrix has {}",
            f.n(),
            b.n()
        )));
    }
    let a = b.upper_half();
    let h = QuadraticPolynomial::new(f.n(), a.clone(), 0, false)
        .expect("the upper half is strictly upper triangular");
    let product = BooleanFunction::from_fn(f.n(), |x| f.sign_bit(x) ^ h.eval_bit(x))
        .expect("f's dimension is valid");
    let (alpha, coeff) = wht(&product).max_abs();
    let g = QuadraticPolynomial::new(f.n(), a, alpha, coeff < 0.0)
        .expect("alpha comes from a spectrum of matching size");
    Ok((g, coeff.abs()))
}

/// Knobs for [`decode_quadratic`].
#[derive(Clone, Debug)]
pub struct DecodeConfig {
    /// Weight cutoff for the fitting support; `None` takes half the mean
    /// weight of the choice function.
    pub threshold: Option<f64>,
    /// Restarts of the spanning-subset fit.
    pub restarts: u64,
    /// Seed for the restart shuffles.
    pub seed: u64,
    /// Score fits as phi(y) = D y + z over the best shift z instead of
    /// pinning z = 0. Off by default: exact quadratics need no shift, and
    /// the affine completion absorbs one anyway.
    pub shift_search: bool,
    /// Up to this dimension (inclusive) the decoder enumerates every
    /// candidate shape B instead of fitting, making the result the global
    /// optimum over all quadratics.
    pub exhaustive_max_n: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            threshold: None,
            restarts: 50,
            seed: 0,
            shift_search: false,
            exhaustive_max_n: 6,
        }
    }
}

/// Tries every symmetric zero-diagonal shape and keeps the best completion;
/// correlation ties go to the smallest shape encoding (pair bits row-major,
/// earliest pair least significant).
fn decode_exhaustive(f: &BooleanFunction) -> Result<(QuadraticPolynomial, f64)> {
    let n = f.n();
    let pairs = n * (n - 1) / 2;
    // One spectrum of size 2^n per candidate shape.
    let required = (1u128 << pairs) * ((n as u128) << n);
    if required > DEFAULT_OP_BUDGET {
        return Err(Error::budget(
            required,
            DEFAULT_OP_BUDGET,
            "lower exhaustive_max_n; the fitted pipeline handles larger dimensions",
        ));
    }
    let best = (0u64..1 << pairs)
        .into_par_iter()
        .map(|code| {
            let mut b = BitMatrix::zero(n, n);
            let mut idx = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if (code >> idx) & 1 == 1 {
                        b.set(i, j, true);
                        b.set(j, i, true);
                    }
                    idx += 1;
                }
            }
            let shape = SymmetricZeroDiagMatrix { b };
            let (g, corr) = quadratic_from_b(f, &shape).expect("dimensions match");
            (g, corr, code)
        })
        .reduce_with(|best, next| {
            // Correlations are dyadic rationals, so ties compare exactly.
            if next.1 > best.1 || (next.1 == best.1 && next.2 < best.2) {
                next
            } else {
                best
            }
        })
        .expect("the zero shape is always a candidate");
    Ok((best.0, best.1))
}

/// Finds a quadratic sign function correlating with f, returning it with
/// its exact correlation <f, g>.
///
/// For n up to `config.exhaustive_max_n` every candidate shape is tried,
/// so the correlation equals the maximum of <f, g> over all quadratic sign
/// functions g -- equivalently 1 - 2 * (minimum normalized distance).
/// Above that the staged pipeline runs (choice function, fitted linear
/// map, symmetrization, affine completion) and the result is kept only if
/// it beats the B = 0 completion, so the correlation never drops below the
/// best affine approximation.
pub fn decode_quadratic(
    f: &BooleanFunction,
    config: &DecodeConfig,
) -> Result<(QuadraticPolynomial, f64)> {
    let n = f.n();
    if n <= config.exhaustive_max_n {
        return decode_exhaustive(f);
    }
    let cf = choice_function(f)?;
    let threshold = config.threshold.unwrap_or(cf.mean_weight() / 2.0);
    let fit = fit_linear_map(&cf, threshold, config.restarts, config.seed, config.shift_search)?;
    let shape = symmetrize(&fit.matrix);
    let (g, correlation) = quadratic_from_b(f, &shape)?;
    let (affine, affine_corr) = quadratic_from_b(f, &SymmetricZeroDiagMatrix::zero(n))?;
    if affine_corr > correlation {
        Ok((affine, affine_corr))
    } else {
        Ok((g, correlation))
    }
}
