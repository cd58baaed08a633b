//! Map-cache miss-rate analysis for locator/identifier split routers.
//!
//! The crate turns packet or object traces into reference strings, measures
//! their temporal locality, simulates LRU map-caches, and evaluates an
//! analytic miss-rate model derived from generalized-Zipf popularity.
//!
//! ```
//! use mapcache::{lru, synth};
//!
//! let law = synth::RankLaw::from_gzipf_exponents(1_000, 1.7, 1.3, 50).unwrap();
//! let probs = synth::rank_probabilities(&law);
//! let trace = synth::generate_irm(&probs, 20_000, 7).unwrap();
//! let hist = lru::stack_distance_histogram(&trace);
//! let curve = lru::miss_rate_curve(&hist, &[1, 10, 100]).unwrap();
//! assert!(curve.is_non_increasing());
//! ```
//!
//! Data-parallel work goes through rayon when the `parallel` feature is on
//! (the default). Turning it off gives a sequential build with identical
//! results.

// Negated comparisons are how NaN inputs get rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod error;
pub mod lru;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod powerfit;
pub mod prefixdb;
pub mod refstring;
pub mod stats;
pub mod synth;

pub use curve::{CurveSource, MissRateCurve, MissRatePoint};
pub use error::{Error, Result};
pub use model::{GZipfParams, MissRateModel, ModelParams, ThreeRegionParams};
pub use prefixdb::{Prefix, PrefixTable};
pub use refstring::{ObjectId, ReferenceString};
