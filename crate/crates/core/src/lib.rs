//! Asymptotic marginal-likelihood (singular BIC) scores for general Markov
//! models on binary rooted trees.
//!
//! The library has three independent pillars that cross-check each other:
//!
//! * [`score`] — closed-form learning coefficients driven by the covariance
//!   zero pattern of the data ([`pattern`]), with an itemized per-component
//!   decomposition.
//! * [`newton`] — a Newton-diagram RLCT calculator for monomial ideals
//!   (exact rational LP over the Newton polyhedron) that re-derives the
//!   closed forms from first principles, plus the pair-edge incidence
//!   polytope checks ([`hull`]).
//! * [`laplace`] — a Monte Carlo estimator of the Laplace integral
//!   `I(N) = ∫ exp(−N·f(θ)) φ(θ) dθ` whose `log I(N)`-vs-`log N` slope
//!   recovers the learning coefficient empirically.
//!
//! Everything upstream of the Monte Carlo validator runs in exact rational
//! arithmetic ([`num_rational::BigRational`]); floats appear only where an
//! integral must be estimated.

pub mod enumerate;
pub mod hull;
pub mod laplace;
pub mod lp;
pub mod moments;
pub mod newton;
pub mod pattern;
pub mod score;
pub mod tree;

pub use num_rational::BigRational;

/// Convenience constructor for small rational constants.
pub fn ratio(num: i64, den: i64) -> BigRational {
    use num_bigint::BigInt;
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Renders a rational as `"p"` or `"p/q"`, the form used in all JSON output.
pub fn ratio_string(r: &BigRational) -> String {
    use num_traits::One;
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p"` or `"p/q"` back into a rational.
pub fn parse_ratio(s: &str) -> Option<BigRational> {
    use num_bigint::BigInt;
    use num_traits::Zero;
    let mut parts = s.splitn(2, '/');
    let numer: BigInt = parts.next()?.trim().parse().ok()?;
    let denom: BigInt = match parts.next() {
        Some(d) => d.trim().parse().ok()?,
        None => BigInt::from(1),
    };
    if denom.is_zero() {
        return None;
    }
    Some(BigRational::new(numer, denom))
}
