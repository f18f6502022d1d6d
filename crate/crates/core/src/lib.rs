//! Multi-consistency correspondence selection.
//!
//! Given putative keypoint matches between two images, the pipeline rejects
//! outliers and partitions the inliers into several geometric consistencies,
//! each described by a homography:
//!
//! 1. [`blocks`]: grid both images and pair blocks by correspondence counts.
//! 2. [`games`]: play a replicator-dynamics matching game inside every
//!    block pair and keep the popular players.
//! 3. [`cluster`]: cluster the survivors around anchor pairs of the global
//!    payoff matrix, fit a homography per cluster and re-label every
//!    original correspondence by reprojection error.
//!
//! [`metrics`] scores results with classic and consistency-weighted
//! precision/recall, and [`synth`] generates scenes with exact ground truth.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod blocks;
pub mod cluster;
pub mod error;
pub mod games;
pub mod metrics;
pub mod model;
pub mod payoff;
pub mod pipeline;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    load_correspondences, load_result, save_correspondences, save_result, Assignment, Correspondence,
    CorrespondenceSet, Descriptor, Diagnostics, Homography, ImageSize, Keypoint, Label, MatchResult, TruthLabel,
};
pub use pipeline::{run_pipeline, run_pipeline_timed, PipelineConfig, StageTimings};
pub use scalar::Real;

pub type CorrespondenceF64 = Correspondence<f64>;
pub type CorrespondenceSetF64 = CorrespondenceSet<f64>;
pub type HomographyF64 = Homography<f64>;
pub type MatchResultF64 = MatchResult<f64>;
pub type PipelineConfigF64 = PipelineConfig<f64>;
pub type PayoffMatrixF64 = payoff::PayoffMatrix<f64>;

pub type CorrespondenceF32 = Correspondence<f32>;
pub type CorrespondenceSetF32 = CorrespondenceSet<f32>;
pub type HomographyF32 = Homography<f32>;
pub type MatchResultF32 = MatchResult<f32>;
pub type PipelineConfigF32 = PipelineConfig<f32>;
pub type PayoffMatrixF32 = payoff::PayoffMatrix<f32>;
