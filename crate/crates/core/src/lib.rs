//! Bayesian learning of staged event trees over categorical variables.
//!
//! Stage partitions at each modeled depth are sampled by a collapsed MCMC
//! (Polya-urn Gibbs sweeps plus split-merge moves) under product-partition
//! priors that can penalize grouping distant contexts and contexts with
//! dissimilar continuous covariates. Posterior samples are summarized by
//! loss-minimizing point estimates and credible balls, and turned into
//! posterior draws of average and conditional treatment effects.

pub mod causal;
pub mod data;
pub mod error;
pub mod export;
pub mod independence;
pub mod likelihood;
pub mod partition;
pub mod priors;
pub mod simulate;
pub mod sampler;
pub mod summaries;
pub mod tree;

pub use data::Dataset;
pub use error::{Error, Result};
pub use partition::Partition;
pub use tree::{ContextTable, EventTree, Variable};
pub use sampler::{ChainConfig, DepthModel, PosteriorSampleSet};
pub use summaries::Loss;
