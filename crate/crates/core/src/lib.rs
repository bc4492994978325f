//! Printing-cost model, batching strategies and bound checks for
//! array-based DNA synthesis.
//!
//! A strand is printed by walking a reference strand and emitting its bases
//! in order; the cost of a strand is the length of the shortest reference
//! prefix that contains it as a subsequence. Pools are split into batches
//! and each batch pays the cost of its most expensive strand.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batching;
pub mod cost;
pub mod error;
pub mod exact_dist;
pub mod experiments;
pub mod lb_lab;
pub mod pool;
pub mod rng;
pub mod scs;
pub mod strand;

pub use cost::{BatchPlan, CostProfile, ReferenceStrand};
pub use error::{Error, ErrorClass, Result};
pub use exact_dist::CostPmf;
pub use pool::StrandPool;
pub use strand::{Base, RepeatDistribution, Strand, Universe};
