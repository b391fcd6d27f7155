//! Speculative coreset selection.
//!
//! A cheap model from the same family as an expensive target model scores the
//! whole dataset; the scores are split into equal-width regions; a handful of
//! samples per region are re-scored by the target model, and the ratio of the
//! two scores scales how much of the coreset budget each region receives.
//!
//! * [`selection`] holds the selection loop, baselines and ablations.
//! * [`scoring`] computes effort (gradient-norm) and EL2N scores.
//! * [`toy`] is a small feed-forward model family for end-to-end runs.
//! * [`harness`] sweeps pruning rates and methods over the toy family.

pub mod error;
pub mod harness;
pub mod rng;
pub mod scores;
pub mod scoring;
pub mod selection;
pub mod toy;

pub use error::{Error, Result};
pub use scores::{file_oracle, CountingOracle, FileOracle, ScoreOracle, ScoreTable};
pub use selection::{Coreset, Mode, SelectionConfig};
