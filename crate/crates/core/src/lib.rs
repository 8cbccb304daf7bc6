// NaN must fail every strict check, so `!(x > 0.0)` is intended throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod error;
pub mod falsifier;
pub mod matnum;
pub mod plants;
pub mod quadrature;
pub mod regions;
pub mod sampling;
pub mod simulator;

mod diff;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/regions.md")]
    pub mod regions {}
    #[doc = include_str!("../../../book/src/plants.md")]
    pub mod plants {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    pub mod certificates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/falsification.md")]
    pub mod falsification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
