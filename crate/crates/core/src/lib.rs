//! Certified constants for log-type moduli of continuity.
//!
//! The crate covers safe polygonal chains around finite unions of affine
//! flats, propagation of local log-moduli to global ones, transfer of moduli
//! through coordinate blow-ups, budget envelopes for approximation schemes
//! and a numerical lab for grid fields.

// negated comparisons double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod bounds;
pub mod chains;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod logmod;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/logmod.md")]
    mod logmod {}
    #[doc = include_str!("../../../book/src/blowup.md")]
    mod blowup {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/lab.md")]
    mod lab {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
