//! Exact bitstring combinatorics, enumeration-based claim checking, and the
//! certificate search.
//!
//! Everything in this module is deterministic: enumeration is a pure
//! map-reduce over activation patterns and the certificate search is a
//! bisection over a monotone feasibility predicate. Exact quantities (the
//! per-pattern exponent h, bit-flip counts, the constant-one identity) are
//! computed in integer/rational arithmetic; exponentials are evaluated in
//! f64 with a recorded 1e-12 relative slack added to every upper bound.

mod certificate;
mod exact;

pub use certificate::{
    certify, f_bound, s_n_upper, seed_lambda, CertMode, CertVerdict, Certificate, CertifyConfig,
    FBound, FSurfacePoint,
};
pub use exact::{
    bit_flips, dead_mu_exponent_exact, enumerate_claims, enumerate_rows, h_exact,
    h_theta_assembly, min_h_over_patterns, ClaimCell, ClaimId, ClaimReport, ClaimVerdict,
    EnumerationRow,
};
