//! Game recommendation from playtime, friendships and game context.
//!
//! The pipeline: load and filter the engagement/social/catalog tables
//! ([`data`]), build the five-relation game context graph ([`graph`]),
//! train the social- and context-aware embedding model ([`model`],
//! [`train`]) and rank held-out games ([`eval`]). [`analysis`] holds the
//! descriptive statistics and [`synthetic`] a generator with planted
//! structure for end-to-end checks.

// Negated comparisons such as `!(x >= 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
