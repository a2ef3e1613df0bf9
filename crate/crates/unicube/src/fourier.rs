//! Walsh-Hadamard transform and Fourier spectra.
//!
//! The transform is expectation-normalized: for f: {0,1}^n -> {-1,+1},
//!
//! ```text
//! f_hat(alpha) = 2^(-n) * sum_x f(x) * (-1)^(<alpha, x>)
//! ```
//!
//! so Parseval reads sum_alpha f_hat(alpha)^2 = 1. The butterfly runs on
//! `i32` sign sums, which are exact; the final division by 2^n is a
//! power-of-two scale and therefore exact in `f64` as well (every
//! coefficient is a dyadic rational with at most n fractional bits).
//! Index convention matches [`crate::boolfn`]: bit 0 of alpha pairs with
//! variable x_1.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};

/// The 2^n Walsh-Hadamard coefficients of a boolean function.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

/// In-place unnormalized butterfly: turns sign values into
/// `2^n * f_hat(alpha)` for every alpha.
fn butterfly_i32(vals: &mut [i32]) {
    let len = vals.len();
    let mut h = 1;
    while h < len {
        let mut i = 0;
        while i < len {
            for j in i..i + h {
                let (a, b) = (vals[j], vals[j + h]);
                vals[j] = a + b;
                vals[j + h] = a - b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Integer Walsh coefficients `w(alpha) = 2^n * f_hat(alpha)`.
///
/// These are exact and are the building block for the integer-only norm
/// computations in [`crate::gowers`].
pub fn wht_i32(f: &BooleanFunction) -> Vec<i32> {
    let mut vals: Vec<i32> = (0..f.len() as u32).map(|x| f.eval(x)).collect();
    butterfly_i32(&mut vals);
    vals
}

/// The expectation-normalized Walsh-Hadamard transform of f.
pub fn wht(f: &BooleanFunction) -> FourierSpectrum {
    let scale = 1.0 / f.len() as f64;
    let coeffs = wht_i32(f).into_iter().map(|w| w as f64 * scale).collect();
    FourierSpectrum { n: f.n(), coeffs }
}

impl FourierSpectrum {
    /// Same as [`wht`].
    pub fn from_function(f: &BooleanFunction) -> Self {
        wht(f)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// f_hat(alpha).
    #[inline]
    pub fn coeff(&self, alpha: u32) -> f64 {
        self.coeffs[alpha as usize]
    }

    /// All coefficients, indexed by alpha.
    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// sum_alpha f_hat(alpha)^2 (equals 1 for spectra of boolean functions).
    pub fn parseval_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// The coefficient of largest magnitude as `(alpha, f_hat(alpha))`,
    /// breaking magnitude ties toward the smallest alpha.
    pub fn max_abs(&self) -> (u32, f64) {
        let mut best = (0u32, self.coeffs[0]);
        for (alpha, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c.abs() > best.1.abs() {
                best = (alpha as u32, c);
            }
        }
        best
    }

    /// Inverts the transform back to a boolean function.
    ///
    /// Fails with an input error if the spectrum is not that of a +-1-valued
    /// function (each reconstructed value must land on +-1 exactly, up to
    /// 1e-9 of floating-point slack).
    pub fn inverse(&self) -> Result<BooleanFunction> {
        // f(x) = sum_alpha f_hat(alpha) (-1)^(<alpha,x>): the same butterfly
        // without normalization.
        let mut vals = self.coeffs.clone();
        let len = vals.len();
        let mut h = 1;
        while h < len {
            let mut i = 0;
            while i < len {
                for j in i..i + h {
                    let (a, b) = (vals[j], vals[j + h]);
                    vals[j] = a + b;
                    vals[j + h] = a - b;
                }
                i += 2 * h;
            }
            h *= 2;
        }
        let mut bits = Vec::with_capacity(len);
        for (x, v) in vals.iter().enumerate() {
            if (v - 1.0).abs() < 1e-9 {
                bits.push(0u8);
            } else if (v + 1.0).abs() < 1e-9 {
                bits.push(1u8);
            } else {
                return Err(Error::input(format!(
                    "spectrum does not invert to a +-1 function: value {v} at point {x}"
                )));
            }
        }
        BooleanFunction::from_truth_table(self.n, &bits)
    }
}
