//! 1-D discrete wavelet transform engine and universal-threshold denoising.

mod denoise;
mod filters;
mod transform;

pub use denoise::{
    auto_level, denoise, denoise_values, denoise_with_info, estimate_noise_sigma, hard_threshold,
    soft_threshold, universal_threshold, DenoiseInfo, ThresholdMode, MAD_SCALE,
};
pub use filters::{WaveletFilter, WaveletKind};
pub use transform::{
    approx_reconstruct, cascade_lengths, dwt_decompose, dwt_reconstruct, max_level,
    ExtensionMode, WaveletDecomposition,
};
