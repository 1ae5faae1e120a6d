//! Responsiveness of ordinal (Likert) raters to a binary severity reference.
//!
//! The crate is organised bottom-up:
//!
//! - [`ratings`]: domain types, CSV / JSON-lines ingestion and export, group selection
//! - [`aggregation`]: plurality / median / mean group scores with keyed tie-breaking
//! - [`reference`]: guideline-based and crowd-based `(S, U)` pair sets
//! - [`responsiveness`]: Monotonic Precision Area, Weighted Recall Area and their harmonic mean
//! - [`baselines`]: Kendall's tau, Spearman's rho, AUROC, AUCPR, Mokken-style H
//! - [`inference`]: item-level bootstrap, rater-level permutation tests, macro averaging
//! - [`pipeline`]: a precomputed aggregate → reference → metric path for resampling drivers
//! - [`simulation`]: synthetic rater populations under three scoring patterns
//!
//! Every random draw goes through [`rng`], so results depend only on seeds and never on
//! thread scheduling.

pub mod aggregation;
pub mod baselines;
pub mod error;
pub mod inference;
pub mod pipeline;
pub mod ratings;
pub mod reference;
pub mod responsiveness;
pub mod rng;
pub mod simulation;

pub use error::{DataError, MetricError};
