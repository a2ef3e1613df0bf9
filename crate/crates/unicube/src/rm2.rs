//! Distance to the second-order Reed-Muller code: exhaustive search at
//! small n, and a sampling dichotomy that decides far-from versus near-to
//! quadratic far beyond the code's unique-decoding radius.
//!
//! The exhaustive search enumerates all 2^(1 + n + n(n-1)/2) quadratic
//! polynomials in Gray-code order, updating a single 64-bit truth table by
//! one precomputed monomial pattern per step, so n <= 6 stays cheap.
//!
//! The dichotomy samples the order-3 derivative at random points: its mean
//! is ||f||_(U_3)^8. A mean above the threshold certifies usable quadratic
//! structure (some quadratic correlates with f, so its distance is
//! strictly below 1/2); a mean below it bounds every quadratic's
//! correlation by ||f||_(U_3)^(1/2), pushing the distance above a concrete
//! floor.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::f2::BitMatrix;
use crate::gowers::{derivative_product, gowers_norm_exact};
use crate::quad::QuadraticPolynomial;
use crate::rng::{gen_point, stream_rng};
use rayon::prelude::*;
use serde::Serialize;

/// Largest n for the exhaustive quadratic search (2^22 candidates at 6).
pub const MAX_EXACT_N: usize = 6;

/// Which side of the dichotomy a run landed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DichotomyBranch {
    #[serde(rename = "FAR")]
    Far,
    #[serde(rename = "NEAR")]
    Near,
}

/// Outcome of the sampling dichotomy.
#[derive(Clone, Debug, Serialize)]
pub struct DichotomyVerdict {
    pub branch: DichotomyBranch,
    /// Sampled mean of the order-3 derivative (estimates ||f||_(U_3)^8).
    pub nu: f64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    /// On FAR: a lower bound on the normalized distance from every
    /// quadratic, (1 - (3 delta / 2)^(1/16)) / 2.
    pub far_bound: Option<f64>,
    /// On NEAR: the qualitative guarantee that comes with the branch.
    pub near_statement: Option<String>,
}

/// The monomial truth-table patterns in coefficient-encoding order:
/// constant, x_1..x_n, then pair terms row-major. Bit x of a pattern is
/// the monomial's value at point x.
fn monomial_patterns(n: usize) -> Vec<u64> {
    let points = 1usize << n;
    let all = if points == 64 {
        u64::MAX
    } else {
        (1u64 << points) - 1
    };
    let var = |i: usize| {
        let mut m = 0u64;
        for x in 0..points {
            if (x >> i) & 1 == 1 {
                m |= 1 << x;
            }
        }
        m
    };
    let mut patterns = vec![all];
    for i in 0..n {
        patterns.push(var(i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            patterns.push(var(i) & var(j));
        }
    }
    patterns
}

/// Truth table of f as a bit mask (bit x set when f(x) = -1); n <= 6.
fn truth_mask(f: &BooleanFunction) -> u64 {
    let mut m = 0u64;
    for x in 0..(1u32 << f.n()) {
        if f.sign_bit(x) {
            m |= 1 << x;
        }
    }
    m
}

/// Packs Gray-code coefficient bits into the lexicographic tie-break key:
/// earlier encoding positions are more significant, so a smaller key is a
/// lexicographically smaller coefficient sequence.
fn tie_key(coeffs: u64, m: usize) -> u64 {
    let mut key = 0u64;
    for i in 0..m {
        if (coeffs >> i) & 1 == 1 {
            key |= 1 << (m - 1 - i);
        }
    }
    key
}

/// Walks candidates [start, end) in Gray order, returning the best
/// (mismatch count, tie key, coefficient bits) of the range.
fn search_range(
    patterns: &[u64],
    f_mask: u64,
    m: usize,
    start: u64,
    end: u64,
) -> (u32, u64, u64) {
    let mut coeffs = start ^ (start >> 1);
    let mut table = 0u64;
    for i in 0..m {
        if (coeffs >> i) & 1 == 1 {
            table ^= patterns[i];
        }
    }
    let mut best = (
        (table ^ f_mask).count_ones(),
        tie_key(coeffs, m),
        coeffs,
    );
    for k in (start + 1)..end {
        let p = k.trailing_zeros() as usize;
        coeffs ^= 1 << p;
        table ^= patterns[p];
        let dist = (table ^ f_mask).count_ones();
        if dist < best.0 || (dist == best.0 && tie_key(coeffs, m) < best.1) {
            best = (dist, tie_key(coeffs, m), coeffs);
        }
    }
    best
}

fn quadratic_from_coeff_bits(n: usize, coeffs: u64) -> QuadraticPolynomial {
    let const_bit = coeffs & 1 == 1;
    let mut lin = 0u32;
    for i in 0..n {
        if (coeffs >> (1 + i)) & 1 == 1 {
            lin |= 1 << i;
        }
    }
    let mut quad = BitMatrix::zero(n, n);
    let mut idx = 1 + n;
    for i in 0..n {
        for j in (i + 1)..n {
            if (coeffs >> idx) & 1 == 1 {
                quad.set(i, j, true);
            }
            idx += 1;
        }
    }
    QuadraticPolynomial::new(n, quad, lin, const_bit).expect("bits decode to a valid quadratic")
}

/// Minimum normalized distance from f to any quadratic sign function, by
/// exhaustive search, together with the nearest polynomial (ties broken by
/// the lexicographically smallest coefficient encoding).
pub fn rm2_exact_distance(f: &BooleanFunction) -> Result<(f64, QuadraticPolynomial)> {
    let n = f.n();
    if n > MAX_EXACT_N {
        let m = 1 + n + n * (n - 1) / 2;
        return Err(Error::budget(
            1u128 << m.min(127),
            1u128 << (1 + MAX_EXACT_N + MAX_EXACT_N * (MAX_EXACT_N - 1) / 2),
            "exhaustive quadratic search is limited to n <= 6",
        ));
    }
    let m = 1 + n + n * (n - 1) / 2;
    let patterns = monomial_patterns(n);
    let f_mask = truth_mask(f);
    let total = 1u64 << m;
    let chunk_bits = m.min(16) as u64;
    let chunk_len = 1u64 << chunk_bits;
    let chunks = total >> chunk_bits;
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| search_range(&patterns, f_mask, m, c * chunk_len, (c + 1) * chunk_len))
        .reduce(
            || (u32::MAX, u64::MAX, 0),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let poly = quadratic_from_coeff_bits(n, best.2);
    Ok((best.0 as f64 / (1u64 << n) as f64, poly))
}

/// Decides FAR-from versus NEAR-to quadratic by sampling the order-3
/// derivative on m = ceil(8 ln(2/(1-confidence)) / delta^2) random
/// (x, y_1, y_2, y_3) tuples.
///
/// With probability at least `confidence` the sample mean nu lands within
/// delta/2 of ||f||_(U_3)^8, so:
///
/// * nu >= delta (NEAR): the norm power is at least delta/2, and a
///   quadratic with distance strictly below 1/2 exists;
/// * nu < delta (FAR): the norm power is below 3 delta / 2, every
///   quadratic g has <f, g> <= ||f||_(U_3)^(1/2), and the distance from
///   every quadratic exceeds (1 - (3 delta / 2)^(1/16)) / 2.
pub fn dichotomy(
    f: &BooleanFunction,
    delta: f64,
    confidence: f64,
    seed: u64,
) -> Result<DichotomyVerdict> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::input(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let trials = (8.0 * (2.0 / (1.0 - confidence)).ln() / (delta * delta)).ceil() as u64;
    let sum: i64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let x = gen_point(&mut rng, f.n());
            let ys: [u32; 3] = [
                gen_point(&mut rng, f.n()),
                gen_point(&mut rng, f.n()),
                gen_point(&mut rng, f.n()),
            ];
            derivative_product(f, x, &ys) as i64
        })
        .sum();
    let nu = sum as f64 / trials as f64;
    if nu >= delta {
        Ok(DichotomyVerdict {
            branch: DichotomyBranch::Near,
            nu,
            delta,
            trials,
            seed,
            far_bound: None,
            near_statement: Some(
                "some quadratic sign function has normalized distance strictly below 1/2 \
                 from the function"
                    .to_string(),
            ),
        })
    } else {
        let far_bound = (1.0 - (1.5 * delta).powf(1.0 / 16.0)) / 2.0;
        Ok(DichotomyVerdict {
            branch: DichotomyBranch::Far,
            nu,
            delta,
            trials,
            seed,
            far_bound: Some(far_bound),
            near_statement: None,
        })
    }
}

/// Pointwise product f * g as a function (g as its sign function).
fn multiply_by_quadratic(f: &BooleanFunction, g: &QuadraticPolynomial) -> BooleanFunction {
    BooleanFunction::from_fn(f.n(), |x| f.sign_bit(x) ^ g.eval_bit(x))
        .expect("product of valid functions is valid")
}

/// Returns (<f, g>, ||f||_(U_3)^(1/2)): the correlation of f with the
/// quadratic's sign function, and the bound it never exceeds.
pub fn rm2_correlation_bound_check(
    f: &BooleanFunction,
    g: &QuadraticPolynomial,
) -> Result<(f64, f64)> {
    if g.n() != f.n() {
        return Err(Error::input(format!(
            "variable counts differ: function has {}, polynomial has {}",
            f.n(),
            g.n()
        )));
    }
    let product = multiply_by_quadratic(f, g);
    let lhs = product.mean();
    let rhs = gowers_norm_exact(f, 3)?.sqrt();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::BooleanFunction;

    fn functions_equal(f: &BooleanFunction, g: &BooleanFunction) -> bool {
        (0..(1u32 << f.n())).all(|x| f.eval(x) == g.eval(x))
    }

    #[test]
    fn quadratics_have_distance_zero() {
        for seed in 0..4 {
            let q = QuadraticPolynomial::random(5, seed).unwrap();
            let f = q.to_function();
            let (d, nearest) = rm2_exact_distance(&f).unwrap();
            assert_eq!(d, 0.0, "seed {seed}");
            assert!(functions_equal(&nearest.to_function(), &f));
        }
    }

    #[test]
    fn bent_four_is_itself_quadratic() {
        let f = BooleanFunction::inner_product_bent(4).unwrap();
        let (d, nearest) = rm2_exact_distance(&f).unwrap();
        assert_eq!(d, 0.0);
        assert!(functions_equal(&nearest.to_function(), &f));
    }

    #[test]
    fn cubic_monomial_distance_and_tie_break() {
        // (-1)^(x1 x2 x3) disagrees with the zero polynomial on exactly
        // one of 8 points, and no quadratic does better; among the ties
        // the all-zero coefficient vector is lexicographically first.
        let f = BooleanFunction::from_fn(3, |x| x == 0b111).unwrap();
        let (d, nearest) = rm2_exact_distance(&f).unwrap();
        assert_eq!(d, 0.125);
        assert_eq!(nearest.encoding_key(), vec![0u8; 7]);
    }

    #[test]
    fn exact_distance_matches_a_naive_enumeration() {
        // Independent oracle: rebuild every quadratic from coefficients
        // and use the generic distance routine.
        for seed in 0..3 {
            let f = BooleanFunction::random_fn(3, seed).unwrap();
            let (d, nearest) = rm2_exact_distance(&f).unwrap();
            let mut naive = f64::INFINITY;
            for bits in 0u64..(1 << 7) {
                let q = quadratic_from_coeff_bits(3, bits);
                naive = naive.min(f.normalized_distance(&q.to_function()).unwrap());
            }
            assert_eq!(d, naive, "seed {seed}");
            assert!((f.normalized_distance(&nearest.to_function()).unwrap() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_distance_budget() {
        let f = BooleanFunction::random_fn(7, 0).unwrap();
        match rm2_exact_distance(&f) {
            Err(Error::Budget { hint, .. }) => assert!(hint.contains("n <= 6")),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn dichotomy_on_quadratic_is_deterministically_near() {
        let q = QuadraticPolynomial::random(8, 3).unwrap();
        let v = dichotomy(&q.to_function(), 0.05, 0.99, 7).unwrap();
        assert_eq!(v.branch, DichotomyBranch::Near);
        assert_eq!(v.nu, 1.0);
        assert!(v.far_bound.is_none());
        assert!(v.near_statement.is_some());
    }

    #[test]
    fn dichotomy_sample_count_follows_the_hoeffding_rule() {
        let q = QuadraticPolynomial::random(4, 0).unwrap();
        let v = dichotomy(&q.to_function(), 0.05, 0.99, 0).unwrap();
        assert_eq!(v.trials, 16955);
    }

    #[test]
    fn dichotomy_separates_random_from_noisy_quadratic() {
        for seed in 0..3 {
            let f = BooleanFunction::random_fn(12, seed).unwrap();
            let v = dichotomy(&f, 0.05, 0.99, seed).unwrap();
            assert_eq!(v.branch, DichotomyBranch::Far, "seed {seed}, nu {}", v.nu);
            let b = v.far_bound.unwrap();
            assert!(b > 0.0 && b <= 0.5, "{b}");

            let q = QuadraticPolynomial::random(10, seed).unwrap();
            let noisy = q.to_function().noisy(0.05, seed + 100).unwrap();
            let v = dichotomy(&noisy, 0.05, 0.99, seed).unwrap();
            assert_eq!(v.branch, DichotomyBranch::Near, "seed {seed}, nu {}", v.nu);
        }
    }

    #[test]
    fn dichotomy_validates_parameters() {
        let f = BooleanFunction::random_fn(4, 0).unwrap();
        assert!(dichotomy(&f, 0.0, 0.9, 0).is_err());
        assert!(dichotomy(&f, 1.0, 0.9, 0).is_err());
        assert!(dichotomy(&f, 0.1, 0.0, 0).is_err());
        assert!(dichotomy(&f, 0.1, 1.0, 0).is_err());
    }

    #[test]
    fn correlation_bound_extremes() {
        let q = QuadraticPolynomial::random(5, 2).unwrap();
        let f = q.to_function();
        let (lhs, rhs) = rm2_correlation_bound_check(&f, &q).unwrap();
        assert!((lhs - 1.0).abs() < 1e-12);
        assert!((rhs - 1.0).abs() < 1e-12);
        // Negated function: correlation -1, same norm.
        let neg = BooleanFunction::from_fn(5, |x| !f.sign_bit(x)).unwrap();
        let (lhs, rhs) = rm2_correlation_bound_check(&neg, &q).unwrap();
        assert!((lhs + 1.0).abs() < 1e-12);
        assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn correlation_never_exceeds_the_norm_bound() {
        for seed in 0..4 {
            let f = BooleanFunction::random_fn(5, seed).unwrap();
            for qseed in 0..4 {
                let q = QuadraticPolynomial::random(5, qseed).unwrap();
                let (lhs, rhs) = rm2_correlation_bound_check(&f, &q).unwrap();
                assert!(lhs <= rhs + 1e-9, "seed {seed}/{qseed}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn quadratic_multiplication_preserves_u3() {
        // Exhaustive over all quadratics at n=3, random pairs at n=5.
        let f = BooleanFunction::random_fn(3, 1).unwrap();
        let u = gowers_norm_exact(&f, 3).unwrap();
        for bits in 0u64..(1 << 7) {
            let q = quadratic_from_coeff_bits(3, bits);
            let fg = multiply_by_quadratic(&f, &q);
            let v = gowers_norm_exact(&fg, 3).unwrap();
            assert!((u - v).abs() < 1e-10, "bits {bits}: {u} vs {v}");
        }
        for seed in 0..3 {
            let f = BooleanFunction::random_fn(5, seed).unwrap();
            let q = QuadraticPolynomial::random(5, seed + 10).unwrap();
            let u = gowers_norm_exact(&f, 3).unwrap();
            let v = gowers_norm_exact(&multiply_by_quadratic(&f, &q), 3).unwrap();
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn far_bound_formula() {
        let f = BooleanFunction::random_fn(10, 4).unwrap();
        let v = dichotomy(&f, 0.05, 0.99, 1).unwrap();
        let expected = (1.0 - 0.075f64.powf(1.0 / 16.0)) / 2.0;
        assert_eq!(v.far_bound.unwrap().to_bits(), expected.to_bits());
    }
}
