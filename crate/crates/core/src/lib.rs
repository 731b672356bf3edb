// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod profiles;
pub mod params;
pub mod moves;
pub mod lplus;
pub mod certify;
pub mod ledger;
