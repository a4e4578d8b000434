#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bie;
pub mod cli;
pub mod geometry;
pub mod optimize;
pub mod quad;
pub mod specfun;
pub mod spectral;
pub mod validate;
pub mod zaremba;
