//! Analysis toolkit for boolean functions on the hypercube: Walsh-Hadamard
//! spectra, uniformity norms, randomized low-degree tests with exact
//! acceptance oracles, generalized averages with reduction certificates, a
//! quadratic decoder, and homomorphism testing over abelian p-groups.

pub mod boolfn;
pub mod decoder;
pub mod error;
pub mod f2;
pub mod fourier;
pub mod genavg;
pub mod gowers;
pub mod hom;
pub mod quad;
pub mod rm2;
pub mod rng;
pub mod testers;

pub use boolfn::BooleanFunction;
pub use decoder::{
    choice_function, decode_quadratic, fit_linear_map, fit_linear_map_exhaustive,
    quadratic_from_b, symmetrize, symmetrize_detailed, ChoiceFunction, DecodeConfig, LinearFit,
    SymmetricZeroDiagMatrix,
};
pub use error::{Error, Result};
pub use f2::BitMatrix;
pub use fourier::{wht, wht_i32, FourierSpectrum};
pub use genavg::{
    ak_matrix, generalized_average_estimate, generalized_average_exact, reduce_to_uk,
    reduction_step, row_space_minimal_vectors, simplify, AverageEstimate, BinaryMatrix,
    ReductionCertificate, ReductionStep, ReductionStepKind,
};
pub use hom::{
    best_homomorphism, blr_agreement, blr_agreement_estimate, enumerate_homomorphisms,
    homomorphism_count, homomorphism_from_images, map_agreement, shift_correction,
    FiniteAbelianPGroup, GroupMap,
};

pub use gowers::{
    gowers_norm_estimate, gowers_norm_exact, u2_via_spectrum, u3_via_derivative_spectra,
    GowersEstimate,
};
pub use quad::QuadraticPolynomial;
pub use rm2::{
    dichotomy, rm2_correlation_bound_check, rm2_exact_distance, DichotomyBranch, DichotomyVerdict,
};
pub use testers::{
    akklr_test, blr_exact_acceptance, blr_test, blr_trial, exact_acceptance_hypergraph,
    exact_acceptance_quadraticity, hypergraph_linearity_test, hypergraph_quadraticity_test,
    Hypergraph, TestReport,
};

/// Builds the boolean function (-1)^P for a degree-<= 2 polynomial P.
pub fn from_quadratic(q: &QuadraticPolynomial) -> BooleanFunction {
    q.to_function()
}

// Every fenced Rust block in the guide runs as a doc-test of this crate,
// so the book in book/ cannot drift from the API (or the numbers) it
// shows.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/boolean-functions.md")]
    mod boolean_functions {}
    #[doc = include_str!("../../../book/src/uniformity-norms.md")]
    mod uniformity_norms {}
    #[doc = include_str!("../../../book/src/generalized-averages.md")]
    mod generalized_averages {}
    #[doc = include_str!("../../../book/src/property-tests.md")]
    mod property_tests {}
    #[doc = include_str!("../../../book/src/rm2-distance.md")]
    mod rm2_distance {}
    #[doc = include_str!("../../../book/src/quadratic-decoding.md")]
    mod quadratic_decoding {}
    #[doc = include_str!("../../../book/src/homomorphism-testing.md")]
    mod homomorphism_testing {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
