//! Supervised classification of high-dimensional functional data.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`preprocess`]: truncate each trial to its active window, denoise every
//!    signal by wavelet shrinkage, resample onto a fixed unit grid and
//!    z-score the amplitudes.
//! 2. [`compression`]: pick one approximation level per functional variable
//!    from its energy curve and represent the variable by its level's
//!    approximation coefficients.
//! 3. [`selection`]: a five-phase stepwise search over coefficient packets
//!    driven by a cost-sensitive CART classifier ([`cart`]).
//!
//! [`synth`] generates benchmark datasets with planted discriminant variables.

pub mod cart;
pub mod cli;
pub mod compression;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod seed;
pub mod selection;
pub mod synth;
pub mod types;
pub mod wavelet;

pub use error::{Error, Result};
pub use types::{validate_dataset, Dataset, FinalStrategy, Grid, PipelineConfig, Signal, Trial};
