#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod accelerogram;
pub mod bootstrap;
pub mod error;
pub mod ground_motion;
pub mod intensity;
pub mod nonparametric;
pub mod numeric;
pub mod parametric;
pub mod rng;
pub mod special;
pub mod structure;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ground_motions.md")]
    mod ground_motions {}
    #[doc = include_str!("../../../book/src/intensity_measures.md")]
    mod intensity_measures {}
    #[doc = include_str!("../../../book/src/structure.md")]
    mod structure {}
    #[doc = include_str!("../../../book/src/parametric.md")]
    mod parametric {}
    #[doc = include_str!("../../../book/src/nonparametric.md")]
    mod nonparametric {}
    #[doc = include_str!("../../../book/src/bootstrap.md")]
    mod bootstrap {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
