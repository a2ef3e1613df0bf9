//! Bit-packed boolean functions f: {0,1}^n -> {-1,+1}.
//!
//! Conventions, used everywhere in this crate and in the file formats:
//!
//! * A point x in {0,1}^n is a `u32` whose bit 0 (least significant) is the
//!   first variable x_1, bit 1 is x_2, and so on.
//! * The table packs one bit per point: stored bit b at point x means
//!   f(x) = (-1)^b, so bit 1 stands for the value -1. XOR of tables is then
//!   pointwise product of functions.
//! * Dimensions run from 1 to 24, keeping the 2^n table and the O(n 2^n)
//!   transform at desk scale.
//!
//! Directional derivatives f_y(x) = f(x) f(x+y) reduce to XOR-ing the table
//! with a copy of itself permuted by x -> x ^ y; that permutation is done
//! word-wise (whole-word swaps for bits >= 6 of y, masked shifts inside a
//! word for the low bits).

use crate::error::{Error, Result};
use crate::rng::{gen_bool, stream_rng};
use rand::RngCore;

/// Largest supported dimension for exact truth-table work.
pub const MAX_DIMENSION: usize = 24;

/// In-word shuffle masks for the x -> x ^ y permutation: entry p masks the
/// bit positions whose p-th index bit is 0 (the "low half" of each pair of
/// blocks of size 2^p).
const SHUFFLE_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// A boolean function f: {0,1}^n -> {-1,+1} as a bit-packed truth table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    n: usize,
    /// 2^n sign bits (bit = 1 means f = -1), 64 per word; padding bits are
    /// kept zero so word-level equality and XOR are valid.
    words: Vec<u64>,
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 1 || n > MAX_DIMENSION {
        return Err(Error::input(format!(
            "dimension must be between 1 and {MAX_DIMENSION}, got {n}"
        )));
    }
    Ok(())
}

fn words_for(n: usize) -> usize {
    (1usize << n).div_ceil(64)
}

impl BooleanFunction {
    /// Builds a function from 2^n bits, where bit value 1 means f = -1.
    pub fn from_truth_table(n: usize, bits: &[u8]) -> Result<Self> {
        check_dimension(n)?;
        let len = 1usize << n;
        if bits.len() != len {
            return Err(Error::input(format!(
                "truth table for n={n} needs {len} entries, got {}",
                bits.len()
            )));
        }
        let mut words = vec![0u64; words_for(n)];
        for (x, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => words[x / 64] |= 1 << (x % 64),
                _ => {
                    return Err(Error::input(format!(
                        "truth table entries must be 0 or 1, got {b} at index {x}"
                    )))
                }
            }
        }
        Ok(BooleanFunction { n, words })
    }

    /// Builds a function by evaluating `minus_one_at` on every point
    /// (`true` means the value -1).
    pub fn from_fn(n: usize, mut minus_one_at: impl FnMut(u32) -> bool) -> Result<Self> {
        check_dimension(n)?;
        let mut words = vec![0u64; words_for(n)];
        for x in 0..(1u32 << n) {
            if minus_one_at(x) {
                words[(x / 64) as usize] |= 1 << (x % 64);
            }
        }
        Ok(BooleanFunction { n, words })
    }

    /// The constant +1 function.
    pub fn constant_one(n: usize) -> Result<Self> {
        check_dimension(n)?;
        Ok(BooleanFunction {
            n,
            words: vec![0u64; words_for(n)],
        })
    }

    /// f(x) = (-1)^(<a,x> + b): the linear (b = false) or affine character.
    pub fn linear_fn(n: usize, a: u32, b: bool) -> Result<Self> {
        check_dimension(n)?;
        if a >= (1u32 << n) {
            return Err(Error::input(format!(
                "coefficient vector {a:#x} has bits above dimension n={n}"
            )));
        }
        Self::from_fn(n, |x| ((a & x).count_ones() & 1 == 1) ^ b)
    }

    /// The inner-product function (-1)^(x_1 x_2 + x_3 x_4 + ...), defined for
    /// even n. All its Fourier coefficients have magnitude 2^(-n/2).
    pub fn inner_product_bent(n: usize) -> Result<Self> {
        check_dimension(n)?;
        if n % 2 != 0 {
            return Err(Error::input(format!(
                "the inner-product function needs an even dimension, got {n}"
            )));
        }
        // Pair up (x_1,x_2), (x_3,x_4), ...: the products x_(2i-1) x_(2i)
        // sit at the even bit positions of x & (x >> 1).
        Self::from_fn(n, |x| (x & (x >> 1) & 0x5555_5555).count_ones() & 1 == 1)
    }

    /// A uniformly random function, deterministic for a given seed.
    pub fn random_fn(n: usize, seed: u64) -> Result<Self> {
        check_dimension(n)?;
        let mut rng = stream_rng(seed, 0);
        let mut words: Vec<u64> = (0..words_for(n)).map(|_| rng.next_u64()).collect();
        if n < 6 {
            words[0] &= (1u64 << (1 << n)) - 1;
        }
        Ok(BooleanFunction { n, words })
    }

    /// Flips the value at each point independently with probability `rate`.
    pub fn noisy(&self, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::input(format!(
                "noise rate must lie in [0, 1], got {rate}"
            )));
        }
        let mut rng = stream_rng(seed, 0);
        let mut words = self.words.clone();
        for x in 0..self.len() {
            if gen_bool(&mut rng, rate) {
                words[x / 64] ^= 1 << (x % 64);
            }
        }
        Ok(BooleanFunction { n: self.n, words })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points, 2^n.
    #[inline]
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The sign bit at point x: `true` means f(x) = -1.
    #[inline]
    pub fn sign_bit(&self, x: u32) -> bool {
        debug_assert!((x as usize) < self.len());
        (self.words[(x / 64) as usize] >> (x % 64)) & 1 == 1
    }

    /// The value f(x) in {-1, +1}.
    #[inline]
    pub fn eval(&self, x: u32) -> i32 {
        1 - 2 * (self.sign_bit(x) as i32)
    }

    /// Number of points where f = -1.
    pub fn count_minus_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// E_x f(x), exactly (a dyadic rational).
    pub fn mean(&self) -> f64 {
        let minus = self.count_minus_ones() as i64;
        let total = self.len() as i64;
        (total - 2 * minus) as f64 / total as f64
    }

    /// The raw table words (bit = 1 means f = -1); padding bits are zero.
    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// -f: every value negated.
    pub fn negated(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if self.n < 6 {
            words[0] &= (1u64 << (1 << self.n)) - 1;
        }
        BooleanFunction { n: self.n, words }
    }

    /// The translate x -> f(x + y).
    pub fn shift(&self, y: u32) -> Self {
        assert!((y as usize) < self.len(), "shift direction outside the cube");
        let mut words = vec![0u64; self.words.len()];
        let word_xor = (y >> 6) as usize;
        for (i, w) in words.iter_mut().enumerate() {
            *w = self.words[i ^ word_xor];
        }
        for (p, &mask) in SHUFFLE_MASKS.iter().enumerate().take(self.n.min(6)) {
            if (y >> p) & 1 == 1 {
                let s = 1 << p;
                for w in words.iter_mut() {
                    *w = ((*w & mask) << s) | ((*w >> s) & mask);
                }
            }
        }
        BooleanFunction { n: self.n, words }
    }

    /// The directional derivative f_y(x) = f(x) f(x+y).
    pub fn derivative(&self, y: u32) -> Self {
        let mut d = self.shift(y);
        for (w, s) in d.words.iter_mut().zip(&self.words) {
            *w ^= s;
        }
        d
    }

    /// The iterated derivative along `ys`, i.e. `derivative` applied once per
    /// direction; the result does not depend on the order.
    pub fn iterated_derivative(&self, ys: &[u32]) -> Self {
        assert!(!ys.is_empty(), "iterated derivative needs a direction");
        let mut d = self.derivative(ys[0]);
        for &y in &ys[1..] {
            d = d.derivative(y);
        }
        d
    }

    /// Pointwise product f*g (XOR of sign tables).
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_same_dimension(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BooleanFunction { n: self.n, words })
    }

    /// Fraction of points where the two functions disagree.
    pub fn normalized_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_dimension(other)?;
        let diff: u64 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum();
        Ok(diff as f64 / self.len() as f64)
    }

    /// E_x f(x) g(x); equals 1 - 2 * normalized_distance.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        Ok(1.0 - 2.0 * self.normalized_distance(other)?)
    }

    fn check_same_dimension(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::input(format!(
                "dimension mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// Parses the truth-table text format: line 1 is `n=<k>`, line 2 holds
    /// 2^k characters from {0,1} (character i is the sign bit at point i).
    pub fn parse_truth_table(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::input("line 1: missing `n=<k>` header"))?
            .trim();
        let n: usize = header
            .strip_prefix("n=")
            .ok_or_else(|| Error::input(format!("line 1: expected `n=<k>`, got `{header}`")))?
            .parse()
            .map_err(|_| Error::input(format!("line 1: cannot parse dimension in `{header}`")))?;
        check_dimension(n)?;
        let row = lines
            .next()
            .ok_or_else(|| Error::input("line 2: missing truth-table bits"))?
            .trim();
        let mut bits = Vec::with_capacity(row.len());
        for ch in row.chars() {
            match ch {
                '0' => bits.push(0u8),
                '1' => bits.push(1u8),
                _ => {
                    return Err(Error::input(format!(
                        "line 2: truth-table characters must be 0 or 1, got `{ch}`"
                    )))
                }
            }
        }
        Self::from_truth_table(n, &bits)
    }

    /// Serializes to the truth-table text format parsed by
    /// [`parse_truth_table`](Self::parse_truth_table).
    pub fn to_truth_table_string(&self) -> String {
        let mut s = String::with_capacity(self.len() + 16);
        s.push_str(&format!("n={}\n", self.n));
        for x in 0..self.len() as u32 {
            s.push(if self.sign_bit(x) { '1' } else { '0' });
        }
        s.push('\n');
        s
    }
}

impl std::fmt::Debug for BooleanFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BooleanFunction(n={}, table=", self.n)?;
        let shown = self.len().min(64);
        for x in 0..shown as u32 {
            write!(f, "{}", self.sign_bit(x) as u8)?;
        }
        if shown < self.len() {
            write!(f, "...")?;
        }
        write!(f, ")")
    }
}
