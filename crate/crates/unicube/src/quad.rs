//! Quadratic polynomials over F2 and the sign functions they induce.
//!
//! A polynomial is stored as (A, alpha, a): a strictly upper-triangular
//! n x n bit matrix A of coefficients for the monomials x_i x_j (i < j), a
//! linear coefficient vector alpha, and a constant bit a. The induced
//! boolean function is
//!
//! ```text
//! g(x) = (-1)^(<x, A x> + <alpha, x> + a)
//! ```
//!
//! Squares collapse over F2 (x_i^2 = x_i), so diagonal terms fold into the
//! linear vector; keeping A strictly upper triangular makes the coefficient
//! encoding of a polynomial unique.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::f2::BitMatrix;
use crate::rng::{gen_bool, gen_point, stream_rng};

/// A degree-<= 2 polynomial over F2 in n variables, in the canonical
/// (strictly upper triangular) coefficient form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadraticPolynomial {
    n: usize,
    quad: BitMatrix,
    lin: u32,
    const_bit: bool,
}

impl QuadraticPolynomial {
    /// Builds a polynomial, checking that `quad` is n x n and strictly upper
    /// triangular and that `lin` has no bits at or above position n.
    pub fn new(n: usize, quad: BitMatrix, lin: u32, const_bit: bool) -> Result<Self> {
        if n < 1 || n > crate::boolfn::MAX_DIMENSION {
            return Err(Error::input(format!(
                "dimension must be between 1 and {}, got {n}",
                crate::boolfn::MAX_DIMENSION
            )));
        }
        if quad.rows() != n || quad.cols() != n {
            return Err(Error::input(format!(
                "coefficient matrix must be {n}x{n}, got {}x{}",
                quad.rows(),
                quad.cols()
            )));
        }
        for i in 0..n {
            for j in 0..=i {
                if quad.get(i, j) {
                    return Err(Error::input(format!(
                        "coefficient matrix must be strictly upper triangular; found a 1 at ({i}, {j})"
                    )));
                }
            }
        }
        if n < 32 && lin >= (1u32 << n) {
            return Err(Error::input(format!(
                "linear vector {lin:#x} has bits above dimension n={n}"
            )));
        }
        Ok(QuadraticPolynomial {
            n,
            quad,
            lin,
            const_bit,
        })
    }

    /// The zero polynomial (the constant +1 function).
    pub fn zero(n: usize) -> Result<Self> {
        Self::new(n, BitMatrix::zero(n, n), 0, false)
    }

    /// Uniformly random quadratic: every pair coefficient, linear
    /// coefficient and the constant is an independent fair bit.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0);
        let mut quad = BitMatrix::zero(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if gen_bool(&mut rng, 0.5) {
                    quad.set(i, j, true);
                }
            }
        }
        let lin = gen_point(&mut rng, n);
        let constant = gen_bool(&mut rng, 0.5);
        Self::new(n, quad, lin, constant)
    }

    /// Builds the canonical form from any n x n coefficient matrix: entry
    /// (i, j) contributes x_i x_j, so (i, j) and (j, i) fold together and
    /// diagonal entries fold into the linear vector.
    pub fn from_coefficients(
        n: usize,
        matrix: &BitMatrix,
        lin: u32,
        const_bit: bool,
    ) -> Result<Self> {
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::input(format!(
                "coefficient matrix must be {n}x{n}, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let mut quad = BitMatrix::zero(n, n);
        let mut lin = lin;
        for i in 0..n {
            if matrix.get(i, i) {
                lin ^= 1 << i;
            }
            for j in (i + 1)..n {
                if matrix.get(i, j) ^ matrix.get(j, i) {
                    quad.set(i, j, true);
                }
            }
        }
        Self::new(n, quad, lin, const_bit)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// The strictly upper-triangular coefficient matrix A.
    #[inline]
    pub fn quad_matrix(&self) -> &BitMatrix {
        &self.quad
    }

    #[inline]
    pub fn linear_vector(&self) -> u32 {
        self.lin
    }

    #[inline]
    pub fn const_bit(&self) -> bool {
        self.const_bit
    }

    /// The exponent bit <x,Ax> + <alpha,x> + a at the point x.
    pub fn eval_bit(&self, x: u32) -> bool {
        debug_assert!(self.n >= 32 || x < (1u32 << self.n));
        // <x, Ax> = sum over i with x_i = 1 of <row_i(A), x>.
        let mut bit = (self.lin & x).count_ones() & 1;
        let mut rest = x;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            bit ^= ((self.quad.row_u64(i) as u32) & x).count_ones() & 1;
        }
        (bit == 1) ^ self.const_bit
    }

    /// The value g(x) in {-1, +1}.
    #[inline]
    pub fn eval(&self, x: u32) -> i32 {
        1 - 2 * (self.eval_bit(x) as i32)
    }

    /// The induced boolean function (-1)^(<x,Ax> + <alpha,x> + a).
    pub fn to_function(&self) -> BooleanFunction {
        BooleanFunction::from_fn(self.n, |x| self.eval_bit(x))
            .expect("dimension was validated at construction")
    }

    /// The coefficient encoding used for deterministic tie-breaks: the
    /// constant bit, then the linear bits x_1..x_n, then the quadratic bits
    /// in row-major pair order (1,2), (1,3), ..., (n-1,n). Comparing the
    /// returned vectors compares encodings lexicographically.
    pub fn encoding_key(&self) -> Vec<u8> {
        let mut key = Vec::with_capacity(1 + self.n + self.n * (self.n - 1) / 2);
        key.push(self.const_bit as u8);
        for i in 0..self.n {
            key.push(((self.lin >> i) & 1) as u8);
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                key.push(self.quad.get(i, j) as u8);
            }
        }
        key
    }

    /// Parses a degree-<= 2 expression such as `x1*x2+x3+1`.
    ///
    /// Terms are separated by `+`; a term is `1`, `0`, `xi`, or `xi*xj`
    /// (1-based variables, whitespace allowed). Repeated terms cancel over
    /// F2 and `xi*xi` folds to `xi`.
    pub fn parse_expression(n: usize, expr: &str) -> Result<Self> {
        if n < 1 || n > crate::boolfn::MAX_DIMENSION {
            return Err(Error::input(format!(
                "dimension must be between 1 and {}, got {n}",
                crate::boolfn::MAX_DIMENSION
            )));
        }
        let parse_var = |tok: &str| -> Result<usize> {
            let idx: usize = tok
                .strip_prefix('x')
                .ok_or_else(|| Error::input(format!("expected a variable like x2, got `{tok}`")))?
                .parse()
                .map_err(|_| Error::input(format!("cannot parse variable index in `{tok}`")))?;
            if idx < 1 || idx > n {
                return Err(Error::input(format!(
                    "variable x{idx} is outside 1..={n}"
                )));
            }
            Ok(idx - 1)
        };
        let mut quad = BitMatrix::zero(n, n);
        let mut lin = 0u32;
        let mut const_bit = false;
        for raw in expr.split('+') {
            let term: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
            if term.is_empty() {
                return Err(Error::input(format!("empty term in `{expr}`")));
            }
            if term == "1" {
                const_bit ^= true;
                continue;
            }
            if term == "0" {
                continue;
            }
            let factors: Vec<&str> = term.split('*').collect();
            match factors[..] {
                [v] => lin ^= 1 << parse_var(v)?,
                [v, w] => {
                    let (i, j) = (parse_var(v)?, parse_var(w)?);
                    if i == j {
                        // x^2 = x over F2.
                        lin ^= 1 << i;
                    } else {
                        let (i, j) = (i.min(j), i.max(j));
                        quad.set(i, j, !quad.get(i, j));
                    }
                }
                _ => {
                    return Err(Error::input(format!(
                        "term `{term}` has degree above 2"
                    )))
                }
            }
        }
        Self::new(n, quad, lin, const_bit)
    }

    /// Parses the four-line polynomial file format produced by
    /// [`to_file_string`](Self::to_file_string):
    /// line 1 `n=<k>`; line 2 the n(n-1)/2 quadratic bits in row-major pair
    /// order; line 3 the n linear bits (x_1 first); line 4 the constant bit.
    pub fn parse(text: &str) -> Result<Self> {
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
        if n < 1 || n > crate::boolfn::MAX_DIMENSION {
            return Err(Error::input(format!(
                "line 1: dimension must be between 1 and {}, got {n}",
                crate::boolfn::MAX_DIMENSION
            )));
        }
        let mut bit_line = |lineno: usize, expect: usize| -> Result<Vec<bool>> {
            let row = lines
                .next()
                .ok_or_else(|| Error::input(format!("line {lineno}: missing bit row")))?
                .trim();
            if row.len() != expect {
                return Err(Error::input(format!(
                    "line {lineno}: expected {expect} bits, got {}",
                    row.len()
                )));
            }
            row.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::input(format!(
                        "line {lineno}: bits must be 0 or 1, got `{c}`"
                    ))),
                })
                .collect()
        };
        let qbits = bit_line(2, n * (n - 1) / 2)?;
        let lbits = bit_line(3, n)?;
        let cbits = bit_line(4, 1)?;
        let mut quad = BitMatrix::zero(n, n);
        let mut pos = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                quad.set(i, j, qbits[pos]);
                pos += 1;
            }
        }
        let mut lin = 0u32;
        for (i, &b) in lbits.iter().enumerate() {
            if b {
                lin |= 1 << i;
            }
        }
        Self::new(n, quad, lin, cbits[0])
    }

    /// Serializes to the four-line file format read by [`parse`](Self::parse).
    pub fn to_file_string(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                s.push(if self.quad.get(i, j) { '1' } else { '0' });
            }
        }
        s.push('\n');
        for i in 0..self.n {
            s.push(if (self.lin >> i) & 1 == 1 { '1' } else { '0' });
        }
        s.push('\n');
        s.push(if self.const_bit { '1' } else { '0' });
        s.push('\n');
        s
    }

    /// Renders the polynomial as an expression like `x1*x2+x3+1` (the zero
    /// polynomial renders as `0`).
    pub fn to_expression(&self) -> String {
        let mut terms = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.quad.get(i, j) {
                    terms.push(format!("x{}*x{}", i + 1, j + 1));
                }
            }
        }
        for i in 0..self.n {
            if (self.lin >> i) & 1 == 1 {
                terms.push(format!("x{}", i + 1));
            }
        }
        if self.const_bit {
            terms.push("1".to_string());
        }
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join("+")
        }
    }
}

impl std::fmt::Debug for QuadraticPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "QuadraticPolynomial(n={}, {})", self.n, self.to_expression())
    }
}

impl std::fmt::Display for QuadraticPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_expression())
    }
}
