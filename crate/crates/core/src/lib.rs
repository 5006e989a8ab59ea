//! A numerical laboratory for the boosted ODE blow-up family of the focusing
//! wave equation `∂_t² u − Δu = |u|^{p−1} u` in similarity variables.
//!
//! The crate assembles the linearized generators around the profiles `κ_d`,
//! checks mode stability and the spectral equivalence induced by Lorentz
//! boosts, and runs the stabilized nonlinear evolution together with the
//! `(T*, d*)` parameter shooting that removes the symmetry-induced
//! instabilities.

// NaN must fail every range check, hence `!(x > a)`; index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod discretization;
pub mod error;
pub mod evolution;
pub mod lorentz;
pub mod operator;
pub mod params;
pub mod shooting;
pub mod spectrum;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
    #[doc = include_str!("../../../book/src/lorentz.md")]
    mod lorentz {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/operator.md")]
    mod operator {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/shooting.md")]
    mod shooting {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
