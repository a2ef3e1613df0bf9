//! Randomized property tests for boolean functions, with exact
//! acceptance-probability computation at small sizes.
//!
//! The linearity tests share one BLR-style check per hyperedge across a
//! common pool of random points: for an edge e the check is
//!
//! ```text
//! prod_(i in e) f(x_i) * f(sum_(i in e) x_i)  =  f(0)^(|e|+1)
//! ```
//!
//! which affine functions pass identically. The quadraticity test checks a
//! vanishing third derivative per size-3 edge, and the derivative test of
//! order k accepts when the order-k derivative at a random point is +1,
//! which happens with probability exactly (1 + ||f||_(U_k)^(2^k))/2.
//!
//! Every runner draws one RNG stream per trial, so reports are
//! bit-identical for a given seed regardless of thread count.

use crate::boolfn::BooleanFunction;
use crate::error::{Error, Result};
use crate::f2::BitMatrix;
use crate::genavg::{generalized_average_exact, simplify, BinaryMatrix};
use crate::gowers::{derivative_product, gowers_norm_exact};
use crate::rng::{gen_point, stream_rng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Cap on derivative order in [`akklr_test`]: each trial queries 2^k
/// points.
pub const MAX_DERIVATIVE_ORDER: usize = 24;
/// Cap on edge count in the exact acceptance expansions (2^|E| terms).
pub const MAX_EXACT_EDGES: usize = 20;

/// A hypergraph on vertices {1, ..., t}; each edge is a set of at least
/// one vertex, stored sorted, with no repeated edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    t: usize,
    edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Validates and normalizes the edge list: vertices must lie in
    /// [1, t], edges must be nonempty sets, and no edge may repeat.
    pub fn new(t: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let mut normalized: Vec<Vec<usize>> = Vec::with_capacity(edges.len());
        for (idx, edge) in edges.into_iter().enumerate() {
            if edge.is_empty() {
                return Err(Error::input(format!("edge {} is empty", idx + 1)));
            }
            let mut e = edge;
            e.sort_unstable();
            for &v in &e {
                if v < 1 || v > t {
                    return Err(Error::input(format!(
                        "edge {}: vertex {v} is outside [1, {t}]",
                        idx + 1
                    )));
                }
            }
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::input(format!(
                    "edge {} repeats a vertex; edges are vertex sets",
                    idx + 1
                )));
            }
            if normalized.contains(&e) {
                return Err(Error::input(format!(
                    "edge {} duplicates an earlier edge",
                    idx + 1
                )));
            }
            normalized.push(e);
        }
        Ok(Hypergraph {
            t,
            edges: normalized,
        })
    }

    /// All size-2 edges on t vertices.
    pub fn complete_graph(t: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 1..=t {
            for j in (i + 1)..=t {
                edges.push(vec![i, j]);
            }
        }
        Self::new(t, edges)
    }

    /// All size-3 edges on t vertices.
    pub fn complete_3_uniform(t: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 1..=t {
            for j in (i + 1)..=t {
                for k in (j + 1)..=t {
                    edges.push(vec![i, j, k]);
                }
            }
        }
        Self::new(t, edges)
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Size of the largest edge; 0 when there are no edges.
    pub fn max_edge_size(&self) -> usize {
        self.edges.iter().map(|e| e.len()).max().unwrap_or(0)
    }

    /// True when every edge has exactly `k` vertices.
    pub fn is_uniform(&self, k: usize) -> bool {
        self.edges.iter().all(|e| e.len() == k)
    }

    /// Parses the hypergraph file format: first line `t=<vertices>`, then
    /// one edge per line as space-separated 1-based vertex indices. Blank
    /// lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t: Option<usize> = None;
        let mut edges: Vec<Vec<usize>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if t.is_none() {
                let rest = line.strip_prefix("t=").ok_or_else(|| {
                    Error::input(format!(
                        "line {}: expected `t=<vertices>`, got `{line}`",
                        lineno + 1
                    ))
                })?;
                let parsed = rest.trim().parse::<usize>().map_err(|_| {
                    Error::input(format!(
                        "line {}: cannot parse vertex count `{rest}`",
                        lineno + 1
                    ))
                })?;
                t = Some(parsed);
                continue;
            }
            let mut edge = Vec::new();
            for tok in line.split_whitespace() {
                let v = tok.parse::<usize>().map_err(|_| {
                    Error::input(format!(
                        "line {}: cannot parse vertex index `{tok}`",
                        lineno + 1
                    ))
                })?;
                edge.push(v);
            }
            edges.push(edge);
        }
        let t = t.ok_or_else(|| Error::input("missing `t=<vertices>` header line"))?;
        Self::new(t, edges)
    }

    /// Renders the file format parsed by [`Hypergraph::parse`].
    pub fn to_file_string(&self) -> String {
        let mut out = format!("t={}\n", self.t);
        for e in &self.edges {
            let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Outcome of a Monte-Carlo test run.
#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub trials: u64,
    pub accepts: u64,
    /// accepts / trials.
    pub acceptance: f64,
    /// Standard error of the acceptance estimate; `None` below two trials.
    pub stderr: Option<f64>,
    pub seed: u64,
    /// Soundness bound 1/2^|E| + ||f||_(U_d) when it was computed.
    pub theoretical_bound: Option<f64>,
    /// Function queries per trial.
    pub queries_per_trial: u64,
}

impl TestReport {
    pub(crate) fn from_counts(trials: u64, accepts: u64, seed: u64, queries_per_trial: u64) -> Self {
        let acceptance = accepts as f64 / trials as f64;
        let stderr = if trials >= 2 {
            Some((acceptance * (1.0 - acceptance) / (trials - 1) as f64).sqrt())
        } else {
            None
        };
        TestReport {
            trials,
            accepts,
            acceptance,
            stderr,
            seed,
            theoretical_bound: None,
            queries_per_trial,
        }
    }

    /// Same report with the theoretical bound filled in.
    pub fn with_theoretical_bound(mut self, bound: f64) -> Self {
        self.theoretical_bound = Some(bound);
        self
    }
}

fn require_trials(trials: u64) -> Result<()> {
    if trials < 1 {
        return Err(Error::input("at least one trial is required"));
    }
    Ok(())
}

/// One strict BLR check on two fresh points: f(x) f(y) f(x+y) = 1.
pub fn blr_trial(f: &BooleanFunction, rng: &mut ChaCha8Rng) -> bool {
    let x = gen_point(rng, f.n());
    let y = gen_point(rng, f.n());
    !(f.sign_bit(x) ^ f.sign_bit(y) ^ f.sign_bit(x ^ y))
}

/// Monte-Carlo BLR test. In affine mode the check compares against f(0)
/// instead of +1, so affine functions also pass identically.
pub fn blr_test(f: &BooleanFunction, trials: u64, seed: u64, affine: bool) -> Result<TestReport> {
    require_trials(trials)?;
    let f0 = f.sign_bit(0);
    let accepts: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let x = gen_point(&mut rng, f.n());
            let y = gen_point(&mut rng, f.n());
            let parity = f.sign_bit(x) ^ f.sign_bit(y) ^ f.sign_bit(x ^ y);
            let target = if affine { f0 } else { false };
            (parity == target) as u64
        })
        .sum();
    Ok(TestReport::from_counts(
        trials,
        accepts,
        seed,
        if affine { 4 } else { 3 },
    ))
}

/// Exact BLR acceptance via the Fourier expansion:
/// (1 + sum_alpha fhat(alpha)^3)/2 in strict mode, with an extra f(0)
/// factor on the sum in affine mode.
pub fn blr_exact_acceptance(f: &BooleanFunction, affine: bool) -> f64 {
    let cubes: f64 = crate::fourier::wht(f).coeffs().iter().map(|c| c.powi(3)).sum();
    let sign = if affine { f.eval(0) as f64 } else { 1.0 };
    (1.0 + sign * cubes) / 2.0
}

/// True when every edge check passes on the given points (1-based edges
/// into xs).
fn edges_pass_linearity(f: &BooleanFunction, h: &Hypergraph, xs: &[u32]) -> bool {
    let f0 = f.sign_bit(0);
    for e in h.edges() {
        let mut parity = false;
        let mut sum = 0u32;
        for &v in e {
            parity ^= f.sign_bit(xs[v - 1]);
            sum ^= xs[v - 1];
        }
        parity ^= f.sign_bit(sum);
        let target = if (e.len() + 1) % 2 == 1 { f0 } else { false };
        if parity != target {
            return false;
        }
    }
    true
}

fn edges_pass_quadraticity(f: &BooleanFunction, h: &Hypergraph, xs: &[u32]) -> bool {
    let f0 = f.sign_bit(0);
    for e in h.edges() {
        let (a, b, c) = (xs[e[0] - 1], xs[e[1] - 1], xs[e[2] - 1]);
        let mut parity = false;
        for p in [a, b, c, a ^ b, a ^ c, b ^ c, a ^ b ^ c] {
            parity ^= f.sign_bit(p);
        }
        if parity != f0 {
            return false;
        }
    }
    true
}

/// Monte-Carlo hypergraph linearity test: draws one point per vertex and
/// accepts when every edge's BLR-style check passes.
pub fn hypergraph_linearity_test(
    f: &BooleanFunction,
    h: &Hypergraph,
    trials: u64,
    seed: u64,
) -> Result<TestReport> {
    require_trials(trials)?;
    let accepts: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let xs: Vec<u32> = (0..h.t()).map(|_| gen_point(&mut rng, f.n())).collect();
            edges_pass_linearity(f, h, &xs) as u64
        })
        .sum();
    Ok(TestReport::from_counts(
        trials,
        accepts,
        seed,
        (h.t() + h.edge_count()) as u64,
    ))
}

/// Monte-Carlo quadraticity test on a 3-uniform hypergraph: per edge
/// {i,j,k} checks that the product of f over the seven nonzero subset sums
/// of (x_i, x_j, x_k) equals f(0), i.e. that the third derivative at 0
/// along those directions is +1.
pub fn hypergraph_quadraticity_test(
    f: &BooleanFunction,
    h: &Hypergraph,
    trials: u64,
    seed: u64,
) -> Result<TestReport> {
    require_trials(trials)?;
    if !h.is_uniform(3) {
        return Err(Error::input(
            "quadraticity testing needs a 3-uniform hypergraph",
        ));
    }
    let accepts: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let xs: Vec<u32> = (0..h.t()).map(|_| gen_point(&mut rng, f.n())).collect();
            edges_pass_quadraticity(f, h, &xs) as u64
        })
        .sum();
    Ok(TestReport::from_counts(
        trials,
        accepts,
        seed,
        (h.t() + 4 * h.edge_count()) as u64,
    ))
}

/// Monte-Carlo derivative test of order k: accepts when the order-k
/// derivative at a random point along random directions is +1. The exact
/// acceptance probability is (1 + ||f||_(U_k)^(2^k))/2.
pub fn akklr_test(f: &BooleanFunction, k: usize, trials: u64, seed: u64) -> Result<TestReport> {
    require_trials(trials)?;
    if k < 1 || k > MAX_DERIVATIVE_ORDER {
        return Err(Error::input(format!(
            "derivative order must be in [1, {MAX_DERIVATIVE_ORDER}], got {k}"
        )));
    }
    let accepts: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let x = gen_point(&mut rng, f.n());
            let ys: Vec<u32> = (0..k).map(|_| gen_point(&mut rng, f.n())).collect();
            (derivative_product(f, x, &ys) == 1) as u64
        })
        .sum();
    Ok(TestReport::from_counts(trials, accepts, seed, 1 << k))
}

/// Builds the average matrix for one sub-family of linearity edge checks:
/// one singleton column per vertex occurrence plus the edge-sum column,
/// for every edge in the sub-family, with identical columns cancelled.
fn linearity_subset_matrix(h: &Hypergraph, subset: u32) -> BinaryMatrix {
    let mut cols: Vec<Vec<usize>> = Vec::new();
    for (idx, e) in h.edges().iter().enumerate() {
        if (subset >> idx) & 1 == 0 {
            continue;
        }
        for &v in e {
            cols.push(vec![v - 1]);
        }
        cols.push(e.iter().map(|&v| v - 1).collect());
    }
    columns_to_matrix(h.t(), &cols)
}

fn quadraticity_subset_matrix(h: &Hypergraph, subset: u32) -> BinaryMatrix {
    let mut cols: Vec<Vec<usize>> = Vec::new();
    for (idx, e) in h.edges().iter().enumerate() {
        if (subset >> idx) & 1 == 0 {
            continue;
        }
        let (i, j, k) = (e[0] - 1, e[1] - 1, e[2] - 1);
        cols.push(vec![i]);
        cols.push(vec![j]);
        cols.push(vec![k]);
        cols.push(vec![i, j]);
        cols.push(vec![i, k]);
        cols.push(vec![j, k]);
        cols.push(vec![i, j, k]);
    }
    columns_to_matrix(h.t(), &cols)
}

fn columns_to_matrix(t: usize, cols: &[Vec<usize>]) -> BinaryMatrix {
    let mut mat = BitMatrix::zero(t, cols.len());
    for (j, rows) in cols.iter().enumerate() {
        for &i in rows {
            mat.set(i, j, true);
        }
    }
    simplify(&BinaryMatrix::from_bit_matrix(mat))
}

/// Exact acceptance of the hypergraph linearity test by expanding each
/// edge indicator (1 + f(0)^(|e|+1) C_e)/2 into a signed sum of
/// generalized averages over the 2^|E| edge sub-families.
pub fn exact_acceptance_hypergraph(f: &BooleanFunction, h: &Hypergraph) -> Result<f64> {
    if h.edge_count() > MAX_EXACT_EDGES {
        return Err(Error::budget(
            1u128 << h.edge_count().min(127),
            1u128 << MAX_EXACT_EDGES,
            "the exact expansion sums over all edge sub-families",
        ));
    }
    let f0 = f.eval(0);
    let mut total = 0.0;
    for subset in 0u32..(1u32 << h.edge_count()) {
        let mut sigma = 0usize;
        for (idx, e) in h.edges().iter().enumerate() {
            if (subset >> idx) & 1 == 1 {
                sigma += e.len() + 1;
            }
        }
        let sign = if sigma % 2 == 1 { f0 as f64 } else { 1.0 };
        let avg = if subset == 0 {
            1.0
        } else {
            generalized_average_exact(&linearity_subset_matrix(h, subset), f)?
        };
        total += sign * avg;
    }
    Ok(total / (1u64 << h.edge_count()) as f64)
}

/// Exact acceptance of the quadraticity test via the same expansion; the
/// per-edge sign is f(0)^|S| because each check compares a seven-point
/// product against f(0).
pub fn exact_acceptance_quadraticity(f: &BooleanFunction, h: &Hypergraph) -> Result<f64> {
    if !h.is_uniform(3) {
        return Err(Error::input(
            "quadraticity testing needs a 3-uniform hypergraph",
        ));
    }
    if h.edge_count() > MAX_EXACT_EDGES {
        return Err(Error::budget(
            1u128 << h.edge_count().min(127),
            1u128 << MAX_EXACT_EDGES,
            "the exact expansion sums over all edge sub-families",
        ));
    }
    let f0 = f.eval(0);
    let mut total = 0.0;
    for subset in 0u32..(1u32 << h.edge_count()) {
        let size = subset.count_ones() as usize;
        let sign = if size % 2 == 1 { f0 as f64 } else { 1.0 };
        let avg = if subset == 0 {
            1.0
        } else {
            generalized_average_exact(&quadraticity_subset_matrix(h, subset), f)?
        };
        total += sign * avg;
    }
    Ok(total / (1u64 << h.edge_count()) as f64)
}

/// Soundness bound 1/2^|E| + ||f||_(U_d) with d the largest edge size.
pub fn linearity_theoretical_bound(f: &BooleanFunction, h: &Hypergraph) -> Result<f64> {
    if h.edge_count() == 0 {
        return Ok(1.0);
    }
    let d = h.max_edge_size();
    let norm = gowers_norm_exact(f, d)?;
    Ok(0.5f64.powi(h.edge_count() as i32) + norm)
}

/// Soundness bound 1/2^|E| + ||f||_(U_3) for the quadraticity test.
pub fn quadraticity_theoretical_bound(f: &BooleanFunction, h: &Hypergraph) -> Result<f64> {
    if h.edge_count() == 0 {
        return Ok(1.0);
    }
    let norm = gowers_norm_exact(f, 3)?;
    Ok(0.5f64.powi(h.edge_count() as i32) + norm)
}
