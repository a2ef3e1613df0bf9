//! Uniformity norms of boolean functions, exact and estimated.
//!
//! The d-th uniformity norm is defined through iterated derivatives:
//!
//! ```text
//! ||f||_(U_d) ^ (2^d)  =  E_(x, y_1..y_d)  prod_(S subset of [d])  f(x + sum_(i in S) y_i)
//! ```
//!
//! Exact values are computed through integer numerators so that every path
//! (and every thread count) produces bit-identical results:
//!
//! * numer(f, 1) = w(0)^2, where w(alpha) = 2^n * f_hat(alpha) is the
//!   integer Walsh coefficient;
//! * numer(f, 2) = (sum_alpha w(alpha)^4) / 2^n, an exact integer division;
//! * numer(f, d) = sum_y numer(f_y, d-1) for d >= 3;
//!
//! and ||f||_(U_d)^(2^d) = numer(f, d) / 2^((d+1) n). Accumulation uses
//! `i128`, which holds every reachable numerator (they are bounded by
//! 2^((d+1) n), and the operation budget keeps (d+1) n far below 127).
//!
//! Cost is modeled as table reads: 2^n for d = 1 and (n+1) * 2^((d-1) n)
//! for d >= 2 (one transform per order-(d-2) derivative). Work beyond the
//! budget is refused with a resource error pointing at the Monte-Carlo
//! estimator.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::fourier::wht_i32;
use crate::rng::{gen_point, stream_rng};
use rayon::prelude::*;
use serde::Serialize;

/// Default operation budget for exact norms: 2^32 table reads.
pub const DEFAULT_OP_BUDGET: u128 = 1 << 32;

/// A Monte-Carlo estimate of a uniformity norm.
#[derive(Clone, Debug, Serialize)]
pub struct GowersEstimate {
    /// Norm order d.
    pub d: usize,
    /// The norm estimate: max(raw_mean, 0)^(1 / 2^d).
    pub value: f64,
    /// Sample mean of the 2^d-point derivative product, the unbiased
    /// estimate of the 2^d-th power of the norm.
    pub raw_mean: f64,
    /// Standard error of `raw_mean` (normal approximation); `None` when
    /// there are fewer than two samples.
    pub stderr: Option<f64>,
    /// Number of sampled (x, y_1..y_d) tuples.
    pub trials: u64,
    /// Seed the samples were drawn from.
    pub seed: u64,
}

/// Table reads needed for the exact order-d norm at dimension n.
fn exact_ops(d: usize, n: usize) -> u128 {
    if d == 1 {
        return 1u128 << n;
    }
    let shift = (d - 1).saturating_mul(n);
    if shift >= 120 {
        return u128::MAX;
    }
    (n as u128 + 1) << shift
}

fn check_order(d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::input("norm order d must be at least 1"));
    }
    Ok(())
}

/// numer(f, 2) = (sum_alpha w(alpha)^4) >> n. The sum is divisible by 2^n
/// because it equals 2^n times a count-weighted sign sum.
fn numer_d2(f: &BooleanFunction) -> i128 {
    let w = wht_i32(f);
    let sum: i128 = w.iter().map(|&c| (c as i128).pow(4)).sum();
    let n = f.n();
    debug_assert_eq!(sum & ((1i128 << n) - 1), 0, "fourth-power sum not divisible by 2^n");
    sum >> n
}

fn numer(f: &BooleanFunction, d: usize) -> i128 {
    match d {
        1 => {
            let w0: i128 = (0..f.len() as u32).map(|x| f.eval(x) as i128).sum();
            w0 * w0
        }
        2 => numer_d2(f),
        3 => (0..f.len() as u32)
            .into_par_iter()
            .map(|y| numer_d2(&f.derivative(y)))
            .sum(),
        _ => (0..f.len() as u32)
            .into_par_iter()
            .map(|y| numer(&f.derivative(y), d - 1))
            .sum(),
    }
}

fn norm_from_numer(numer: i128, d: usize, n: usize) -> f64 {
    let power = numer as f64 * (2f64).powi(-(((d + 1) * n) as i32));
    power.max(0.0).powf(1.0 / (1u64 << d) as f64)
}

/// Exact ||f||_(U_d) under the default 2^32-read budget.
pub fn gowers_norm_exact(f: &BooleanFunction, d: usize) -> Result<f64> {
    gowers_norm_exact_with_budget(f, d, DEFAULT_OP_BUDGET)
}

/// Exact ||f||_(U_d), refusing with a resource error when the required
/// table reads exceed `budget` (or the integer accumulator would overflow).
pub fn gowers_norm_exact_with_budget(f: &BooleanFunction, d: usize, budget: u128) -> Result<f64> {
    check_order(d)?;
    let n = f.n();
    let required = exact_ops(d, n);
    if required > budget || (d + 1) * n > 126 {
        return Err(Error::budget(
            required,
            budget,
            "use gowers_norm_estimate for a Monte-Carlo value",
        ));
    }
    Ok(norm_from_numer(numer(f, d), d, n))
}

/// ||f||_(U_2) through the spectrum: (sum_alpha f_hat(alpha)^4)^(1/4).
pub fn u2_via_spectrum(f: &BooleanFunction) -> f64 {
    norm_from_numer(numer_d2(f), 2, f.n())
}

/// ||f||_(U_3) through derivative spectra:
/// (E_y sum_alpha f_hat_y(alpha)^4)^(1/8). Costs about (n+1) * 4^n reads.
pub fn u3_via_derivative_spectra(f: &BooleanFunction) -> f64 {
    let total: i128 = (0..f.len() as u32)
        .into_par_iter()
        .map(|y| numer_d2(&f.derivative(y)))
        .sum();
    norm_from_numer(total, 3, f.n())
}

/// Monte-Carlo estimate of ||f||_(U_d) from `trials` sampled derivative
/// products. Trials use independent RNG streams keyed by (seed, trial), so
/// the result is bit-identical for a given seed regardless of thread count.
pub fn gowers_norm_estimate(
    f: &BooleanFunction,
    d: usize,
    trials: u64,
    seed: u64,
) -> Result<GowersEstimate> {
    check_order(d)?;
    if d > 24 {
        return Err(Error::input(format!(
            "norm order {d} needs 2^{d} points per sample; orders above 24 are not supported"
        )));
    }
    if trials < 1 {
        return Err(Error::input("at least one trial is required"));
    }
    let n = f.n();
    let sum: i64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let x = gen_point(&mut rng, n);
            let ys: Vec<u32> = (0..d).map(|_| gen_point(&mut rng, n)).collect();
            derivative_product(f, x, &ys) as i64
        })
        .sum();
    let raw_mean = sum as f64 / trials as f64;
    let stderr = if trials >= 2 {
        Some(((1.0 - raw_mean * raw_mean).max(0.0) / (trials - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(GowersEstimate {
        d,
        value: raw_mean.max(0.0).powf(1.0 / (1u64 << d) as f64),
        raw_mean,
        stderr,
        trials,
        seed,
    })
}

/// The order-d derivative value f_(y_1..y_d)(x) in {-1, +1}: the product of
/// f over all 2^d subset sums, walked in Gray-code order.
pub fn derivative_product(f: &BooleanFunction, x: u32, ys: &[u32]) -> i32 {
    let mut point = x;
    let mut bit = f.sign_bit(x);
    for k in 1u64..(1u64 << ys.len()) {
        point ^= ys[k.trailing_zeros() as usize];
        bit ^= f.sign_bit(point);
    }
    if bit {
        -1
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_n3_functions() -> impl Iterator<Item = BooleanFunction> {
        (0..256u32).map(|t| {
            let bits: Vec<u8> = (0..8).map(|i| ((t >> i) & 1) as u8).collect();
            BooleanFunction::from_truth_table(3, &bits).unwrap()
        })
    }

    /// Definition-level oracle: the full (d+1)-fold expectation, summed
    /// point by point.
    fn norm_power_by_enumeration(f: &BooleanFunction, d: usize) -> f64 {
        let len = f.len() as u32;
        let mut total = 0i64;
        let mut ys = vec![0u32; d];
        fn rec(f: &BooleanFunction, ys: &mut [u32], level: usize, x: u32, total: &mut i64) {
            if level == ys.len() {
                *total += derivative_product(f, x, ys) as i64;
                return;
            }
            for y in 0..f.len() as u32 {
                ys[level] = y;
                rec(f, ys, level + 1, x, total);
            }
        }
        for x in 0..len {
            rec(f, &mut ys, 0, x, &mut total);
        }
        total as f64 / (f.len() as f64).powi(d as i32 + 1)
    }

    #[test]
    fn linear_functions_have_norm_one_from_order_two() {
        for a in [0u32, 0b101, 0b11111] {
            for b in [false, true] {
                let f = BooleanFunction::linear_fn(5, a, b).unwrap();
                // U_1 is the absolute mean: 1 for the constants, 0 otherwise.
                let u1 = gowers_norm_exact(&f, 1).unwrap();
                assert_eq!(u1, if a == 0 { 1.0 } else { 0.0 }, "a={a} b={b}");
                for d in 2..=4 {
                    assert_eq!(gowers_norm_exact(&f, d).unwrap(), 1.0, "a={a} b={b} d={d}");
                }
            }
        }
    }

    #[test]
    fn bent_function_norms() {
        let f = BooleanFunction::inner_product_bent(4).unwrap();
        let u2 = gowers_norm_exact(&f, 2).unwrap();
        assert!((u2 - 0.5).abs() < 1e-12, "u2 = {u2}");
        let u3 = gowers_norm_exact(&f, 3).unwrap();
        assert_eq!(u3, 1.0, "a quadratic has vanishing third derivatives");
    }

    #[test]
    fn u1_is_absolute_mean() {
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(6, seed).unwrap();
            let u1 = gowers_norm_exact(&f, 1).unwrap();
            assert!((u1 - f.mean().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_paths_agree_with_each_other() {
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(5, seed).unwrap();
            let u2 = gowers_norm_exact(&f, 2).unwrap();
            assert_eq!(u2, u2_via_spectrum(&f));
            let u3 = gowers_norm_exact(&f, 3).unwrap();
            assert_eq!(u3, u3_via_derivative_spectra(&f));
        }
    }

    #[test]
    fn exact_matches_definition_oracle_at_n3() {
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(3, seed).unwrap();
            for d in 1..=3 {
                let exact = gowers_norm_exact(&f, d).unwrap();
                let oracle = norm_power_by_enumeration(&f, d);
                let lifted = exact.powi(1 << d);
                assert!(
                    (lifted - oracle).abs() < 1e-10,
                    "d={d} seed={seed}: {lifted} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn triple_monomial_third_norm_power() {
        // Frozen value for (-1)^(x1 x2 x3) at n=3, cross-checked against the
        // definition-level enumeration: ||f||_(U_3)^8 = 11/32.
        let f = BooleanFunction::from_fn(3, |x| x == 0b111).unwrap();
        let u3 = gowers_norm_exact(&f, 3).unwrap();
        assert!((u3.powi(8) - 11.0 / 32.0).abs() < 1e-12, "{}", u3.powi(8));
        assert!(
            (norm_power_by_enumeration(&f, 3) - 11.0 / 32.0).abs() < 1e-12,
            "oracle disagrees"
        );
    }

    #[test]
    fn monotone_in_d_on_random_functions() {
        for seed in 0..3 {
            let f = BooleanFunction::random_fn(6, seed).unwrap();
            let u1 = gowers_norm_exact(&f, 1).unwrap();
            let u2 = gowers_norm_exact(&f, 2).unwrap();
            let u3 = gowers_norm_exact(&f, 3).unwrap();
            assert!(u1 <= u2 + 1e-9 && u2 <= u3 + 1e-9, "{u1} {u2} {u3}");
        }
    }

    #[test]
    fn u2_dominates_max_coefficient() {
        for seed in 0..5 {
            let f = BooleanFunction::random_fn(7, seed).unwrap();
            let (_, top) = crate::fourier::wht(&f).max_abs();
            assert!(u2_via_spectrum(&f) >= top.abs() - 1e-12);
        }
    }

    #[test]
    fn exhaustive_n3_agreement_of_all_paths() {
        for f in all_n3_functions() {
            let u2 = gowers_norm_exact(&f, 2).unwrap();
            let via = u2_via_spectrum(&f);
            assert!((u2 - via).abs() < 1e-10);
            let u3 = gowers_norm_exact(&f, 3).unwrap();
            let via3 = u3_via_derivative_spectra(&f);
            assert!((u3 - via3).abs() < 1e-10);
        }
    }

    #[test]
    fn budget_is_enforced_with_a_hint() {
        let f = BooleanFunction::random_fn(13, 1).unwrap();
        let err = gowers_norm_exact(&f, 4).unwrap_err();
        match err {
            Error::Budget { hint, .. } => assert!(hint.contains("estimate")),
            other => panic!("expected a budget error, got {other}"),
        }
        // d = 4 fits comfortably at n = 8.
        let f = BooleanFunction::inner_product_bent(8).unwrap();
        assert_eq!(gowers_norm_exact(&f, 4).unwrap(), 1.0);
    }

    #[test]
    fn invalid_order_is_rejected() {
        let f = BooleanFunction::random_fn(4, 1).unwrap();
        assert!(gowers_norm_exact(&f, 0).is_err());
        assert!(gowers_norm_estimate(&f, 0, 10, 1).is_err());
        assert!(gowers_norm_estimate(&f, 2, 0, 1).is_err());
    }

    #[test]
    fn estimate_on_linear_is_exact() {
        let f = BooleanFunction::linear_fn(8, 0b1011_0010, true).unwrap();
        let est = gowers_norm_estimate(&f, 3, 500, 7).unwrap();
        assert_eq!(est.raw_mean, 1.0);
        assert_eq!(est.value, 1.0);
        assert_eq!(est.stderr, Some(0.0));
    }

    #[test]
    fn estimate_is_deterministic_and_single_trial_lacks_stderr() {
        let f = BooleanFunction::random_fn(8, 5).unwrap();
        let a = gowers_norm_estimate(&f, 2, 4000, 11).unwrap();
        let b = gowers_norm_estimate(&f, 2, 4000, 11).unwrap();
        assert_eq!(a.raw_mean.to_bits(), b.raw_mean.to_bits());
        let one = gowers_norm_estimate(&f, 2, 1, 11).unwrap();
        assert_eq!(one.stderr, None);
        assert_eq!(one.trials, 1);
    }

    #[test]
    fn estimate_tracks_exact_value() {
        let f = BooleanFunction::random_fn(10, 3).unwrap();
        let exact = gowers_norm_exact(&f, 2).unwrap().powi(4);
        let est = gowers_norm_estimate(&f, 2, 100_000, 17).unwrap();
        let err = (est.raw_mean - exact).abs();
        assert!(
            err <= 4.0 * est.stderr.unwrap() + 1e-12,
            "err {err} vs stderr {:?}",
            est.stderr
        );
    }
}
