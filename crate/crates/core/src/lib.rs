//! Discrete flow-matching graph generation with tunable symmetry breaking.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: categorical graphs, permutations, isomorphism and structural statistics.
//! - [`datasets`]: generators and validity checks for SBM, planar, tree, Erdős–Rényi and
//!   Barabási–Albert families.
//! - [`encodings`]: RRWP and sinusoidal positional encodings plus λ-modulation.
//! - [`flow`]: noising, CTMC rates and Euler sampling.
//! - [`denoiser`]: a small pairwise-attention graph transformer with its own reverse-mode tape.
//! - [`training`]: permutation schedules and the training loop.
//! - [`eval`]: VUN and MMD-ratio metrics.

pub mod datasets;
pub mod denoiser;
pub mod encodings;
pub mod error;
pub mod eval;
pub mod flow;
pub mod graph;
pub mod rng;
pub mod training;

pub use datasets::{DatasetSpec, DatasetSplit, FamilyParams};
pub use denoiser::{ModelConfig, Parameters};
pub use encodings::{EncodingConfig, EncodingMatrix};
pub use error::{Error, Result};
pub use eval::{MetricConfig, RatioReport, VunReport};
pub use flow::{Distortion, NoiseDistribution, PosteriorPrediction, RatePolicy};
pub use graph::{Graph, GraphStatistics, Permutation};
pub use training::{PermutationSchedule, TrainConfig};

/// Version string echoed into manifests and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
