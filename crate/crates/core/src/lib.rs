//! Operator-differential forms of singular differential expressions.
//!
//! A singular expression with distribution-valued coefficients is rewritten as
//! `ℓy = dᵐ/dxᵐ (B y⁽ⁿ⁾ + C y)` where `B` is a second-kind Volterra operator and
//! `C` has finite rank. For separated boundary conditions the inverse operator
//! is a finite-rank perturbation of a Volterra integral operator, which is
//! discretised here to compute eigenvalues, root subspaces and completeness
//! diagnostics.
//!
//! Everything lives on uniform grids over `[0, 1]` with complex samples.

pub mod bvp;
pub mod coefficients;
pub mod error;
pub mod io;
pub mod quadrature;
pub mod quasideriv;
pub mod reduction;
pub mod spectral;
pub mod volterra;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

pub(crate) fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `s^p / p!`, with `s^0/0! = 1` for every `s`.
pub(crate) fn taylor_monomial(s: f64, p: usize) -> f64 {
    let mut v = 1.0;
    for q in 1..=p {
        v *= s / q as f64;
    }
    v
}
