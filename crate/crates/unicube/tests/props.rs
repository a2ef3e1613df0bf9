//! Property tests: structural invariants that must hold for *every* input,
//! checked on randomized cases with shrinking.

use proptest::prelude::*;

use unicube::boolfn::BooleanFunction;
use unicube::fourier::wht;
use unicube::genavg::{
    ak_matrix, generalized_average_exact, reduce_to_uk, reduction_step,
    row_space_minimal_vectors, simplify, BinaryMatrix,
};
use unicube::gowers::gowers_norm_exact;
use unicube::hom::{homomorphism_from_images, FiniteAbelianPGroup, GroupMap};
use unicube::quad::QuadraticPolynomial;
use unicube::rm2::rm2_exact_distance;
use unicube::testers::{blr_exact_acceptance, Hypergraph};

/// Arbitrary boolean function with `1 <= n <= max_n`, shrinkable through its
/// truth table.
fn arb_fn(max_n: usize) -> impl Strategy<Value = BooleanFunction> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), 1 << n)
            .prop_map(move |bits| BooleanFunction::from_fn(n, |x| bits[x as usize]).unwrap())
    })
}

/// Full-row-rank binary matrix with `t` rows: an identity block followed
/// by up to `max_extra` distinct weight->=2 columns.
fn arb_full_rank_matrix(max_t: usize, max_extra: usize) -> impl Strategy<Value = BinaryMatrix> {
    (2..=max_t).prop_flat_map(move |t| {
        let heavy: Vec<u32> = (1u32..(1 << t)).filter(|c| c.count_ones() >= 2).collect();
        let take = max_extra.min(heavy.len());
        proptest::sample::subsequence(heavy, 0..=take).prop_map(move |extras| {
            let mut cols: Vec<u32> = (0..t).map(|i| 1 << i).collect();
            cols.extend(extras);
            let rows: Vec<Vec<u8>> = (0..t)
                .map(|i| cols.iter().map(|c| ((c >> i) & 1) as u8).collect())
                .collect();
            BinaryMatrix::from_rows(&rows).unwrap()
        })
    })
}

/// Two independent functions over a shared dimension.
fn arb_fn_pair(max_n: usize) -> impl Strategy<Value = (BooleanFunction, BooleanFunction)> {
    (1..=max_n).prop_flat_map(|n| {
        let bits = proptest::collection::vec(any::<bool>(), 1 << n);
        (bits.clone(), bits).prop_map(move |(a, b)| {
            (
                BooleanFunction::from_fn(n, |x| a[x as usize]).unwrap(),
                BooleanFunction::from_fn(n, |x| b[x as usize]).unwrap(),
            )
        })
    })
}

/// Quadratic polynomial in `1 <= n <= max_n` variables from raw coefficient
/// bits.
fn arb_quadratic(max_n: usize) -> impl Strategy<Value = QuadraticPolynomial> {
    (1..=max_n).prop_flat_map(|n| {
        let coeff_count = 1 + n + n * (n - 1) / 2;
        proptest::collection::vec(any::<bool>(), coeff_count).prop_map(move |bits| {
            let mut quad = unicube::f2::BitMatrix::zero(n, n);
            let mut pos = 1 + n;
            for i in 0..n {
                for j in (i + 1)..n {
                    quad.set(i, j, bits[pos]);
                    pos += 1;
                }
            }
            let mut lin = 0u32;
            for (i, &b) in bits[1..=n].iter().enumerate() {
                if b {
                    lin |= 1 << i;
                }
            }
            QuadraticPolynomial::new(n, quad, lin, bits[0]).unwrap()
        })
    })
}

proptest! {
    /// The squared spectrum of a sign function always sums to one.
    #[test]
    fn parseval(f in arb_fn(10)) {
        prop_assert!((wht(&f).parseval_sum() - 1.0).abs() <= 1e-9);
    }

    /// The spectrum reconstructs the function pointwise.
    #[test]
    fn spectrum_inverts(f in arb_fn(6)) {
        let coeffs = wht(&f).coeffs().to_vec();
        for x in 0..f.len() as u32 {
            let value: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(alpha, c)| {
                    if (alpha as u32 & x).count_ones() % 2 == 1 { -c } else { *c }
                })
                .sum();
            let expected = if f.sign_bit(x) { -1.0 } else { 1.0 };
            prop_assert!((value - expected).abs() <= 1e-9);
        }
    }

    /// `max_abs` names an actual coefficient and nothing is larger.
    #[test]
    fn max_abs_is_attained(f in arb_fn(8)) {
        let spectrum = wht(&f);
        let (alpha, coeff) = spectrum.max_abs();
        prop_assert_eq!(spectrum.coeffs()[alpha as usize], coeff);
        for c in spectrum.coeffs() {
            prop_assert!(c.abs() <= coeff.abs() + 1e-15);
        }
    }

    /// Discrete derivatives commute, and the zero direction is trivial.
    #[test]
    fn derivatives_commute(f in arb_fn(7), y in any::<u32>(), z in any::<u32>()) {
        let mask = (f.len() - 1) as u32;
        let (y, z) = (y & mask, z & mask);
        prop_assert_eq!(f.derivative(y).derivative(z), f.derivative(z).derivative(y));
        prop_assert_eq!(
            f.derivative(0),
            BooleanFunction::constant_one(f.n()).unwrap()
        );
    }

    /// Correlation and normalized Hamming distance are two views of one
    /// quantity.
    #[test]
    fn inner_product_mirrors_distance((f, g) in arb_fn_pair(8)) {
        let ip = f.inner_product(&g).unwrap();
        let dist = f.normalized_distance(&g).unwrap();
        prop_assert!((ip - (1.0 - 2.0 * dist)).abs() <= 1e-12);
    }

    /// Truth tables survive the text round trip.
    #[test]
    fn truth_table_round_trip(f in arb_fn(8)) {
        let text = f.to_truth_table_string();
        prop_assert_eq!(BooleanFunction::parse_truth_table(&text).unwrap(), f);
    }

    /// Shifting twice by the same point is the identity; negation is an
    /// involution.
    #[test]
    fn shift_and_negate_are_involutions(f in arb_fn(8), y in any::<u32>()) {
        let y = y & (f.len() - 1) as u32;
        prop_assert_eq!(f.shift(y).shift(y), f.clone());
        prop_assert_eq!(f.negated().negated(), f);
    }

    /// A derivative in direction y has no spectral weight on characters
    /// that do not annihilate y.
    #[test]
    fn derivative_spectrum_vanishes_off_the_annihilator(f in arb_fn(5), y in any::<u32>()) {
        let y = y & (f.len() - 1) as u32;
        let coeffs = wht(&f.derivative(y)).coeffs().to_vec();
        for (alpha, c) in coeffs.iter().enumerate() {
            if (alpha as u32 & y).count_ones() % 2 == 1 {
                prop_assert!(c.abs() <= 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Uniformity norms increase with the order.
    #[test]
    fn norms_are_monotone(f in arb_fn(6)) {
        let norms: Vec<f64> = (1..=4).map(|d| gowers_norm_exact(&f, d).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-9);
        }
    }

    /// The canonical k-th matrix averages to exactly the 2^k-th power of
    /// the k-th norm.
    #[test]
    fn ak_average_is_the_norm_power(f in arb_fn(4), k in 1usize..=3) {
        let avg = generalized_average_exact(&ak_matrix(k), &f).unwrap();
        let norm = gowers_norm_exact(&f, k).unwrap();
        prop_assert!((avg - norm.powi(1 << k)).abs() <= 1e-9);
    }

    /// Cancelling a duplicated column (and any rows left empty) never
    /// changes the average.
    #[test]
    fn simplify_preserves_the_average(
        a in arb_full_rank_matrix(3, 2),
        f in arb_fn(4),
        dup in any::<proptest::sample::Index>(),
    ) {
        let copy = dup.index(a.cols());
        let rows: Vec<Vec<u8>> = (0..a.rows())
            .map(|i| {
                let mut row = a.row_vec(i);
                row.push(u8::from(a.get(i, copy)));
                row
            })
            .collect();
        let doubled = BinaryMatrix::from_rows(&rows).unwrap();
        let direct = generalized_average_exact(&doubled, &f).unwrap();
        let reduced = generalized_average_exact(&simplify(&doubled), &f).unwrap();
        prop_assert!((direct - reduced).abs() <= 1e-12);
    }

    /// One reduction step: the squared average is dominated by the stepped
    /// matrix's average.
    #[test]
    fn reduction_step_dominates_the_square(a in arb_full_rank_matrix(3, 2), f in arb_fn(3)) {
        let v = row_space_minimal_vectors(&a).unwrap().into_iter().next().unwrap();
        let stepped = reduction_step(&a, &v).unwrap();
        let before = generalized_average_exact(&a, &f).unwrap();
        let after = generalized_average_exact(&stepped, &f).unwrap();
        prop_assert!(before.powi(2) <= after + 1e-9);
    }

    /// Every certificate the reducer emits re-verifies numerically.
    #[test]
    fn certificates_verify(a in arb_full_rank_matrix(3, 2)) {
        let cert = reduce_to_uk(&a).unwrap();
        prop_assert!(cert.verify(1e-9).is_ok());
    }

    /// Affine functions pass the exact four-point test with probability
    /// one.
    #[test]
    fn affine_functions_always_pass_blr(n in 1usize..=6, a in any::<u32>(), b in any::<bool>()) {
        let f = BooleanFunction::linear_fn(n, a & ((1 << n) - 1), b).unwrap();
        prop_assert_eq!(blr_exact_acceptance(&f, true), 1.0);
    }

    /// Encoded quadratics sit at distance zero from the quadratic code.
    #[test]
    fn quadratics_have_zero_rm2_distance(q in arb_quadratic(4)) {
        let (dist, witness) = rm2_exact_distance(&q.to_function()).unwrap();
        prop_assert_eq!(dist, 0.0);
        prop_assert_eq!(witness.to_function(), q.to_function());
    }

    /// A quadratic survives both of its text encodings.
    #[test]
    fn quadratic_round_trips(q in arb_quadratic(5)) {
        let parsed = QuadraticPolynomial::parse(&q.to_file_string()).unwrap();
        prop_assert_eq!(&parsed, &q);
        let via_expr =
            QuadraticPolynomial::parse_expression(q.n(), &q.to_expression()).unwrap();
        prop_assert_eq!(via_expr, q);
    }

    /// Edge lists survive their text encoding.
    #[test]
    fn hypergraph_round_trips(
        t in 2usize..=6,
        picks in proptest::collection::vec(any::<u64>(), 1..8),
    ) {
        let mut edges: Vec<Vec<usize>> = picks
            .iter()
            .map(|&p| {
                let a = 1 + (p % t as u64) as usize;
                let b = 1 + ((p >> 16) % t as u64) as usize;
                if a == b { vec![a] } else { vec![a.min(b), a.max(b)] }
            })
            .collect();
        edges.sort();
        edges.dedup();
        let h = Hypergraph::new(t, edges).unwrap();
        let parsed = Hypergraph::parse(&h.to_file_string()).unwrap();
        prop_assert_eq!(parsed.to_file_string(), h.to_file_string());
    }

    /// Maps built from generator images are genuine homomorphisms with
    /// full four-point agreement, and survive their text encoding.
    #[test]
    fn built_homomorphisms_agree_everywhere(
        p_pick in 0usize..3,
        ks in proptest::collection::vec(1u32..=2, 1..=2),
        factors in 1usize..=2,
        image_seed in any::<u64>(),
    ) {
        let p = [2u32, 3, 5][p_pick];
        let domain = FiniteAbelianPGroup::new(p, ks.clone()).unwrap();
        let codomain = FiniteAbelianPGroup::new(p, vec![1; factors]).unwrap();
        let h_order = codomain.order() as u64;
        let images: Vec<u32> = (0..ks.len())
            .map(|i| ((image_seed >> (8 * i)) % h_order) as u32)
            .collect();
        let phi = homomorphism_from_images(&domain, &codomain, &images).unwrap();
        prop_assert!(phi.is_homomorphism());
        prop_assert_eq!(unicube::hom::blr_agreement(&phi).unwrap(), 1.0);
        let parsed = GroupMap::parse(
            domain.clone(),
            codomain.clone(),
            &phi.to_file_string(),
        )
        .unwrap();
        prop_assert_eq!(parsed, phi);
    }
}
