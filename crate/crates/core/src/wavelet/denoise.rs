//! Universal-threshold wavelet shrinkage.

use serde::{Deserialize, Serialize};

use super::filters::WaveletFilter;
use super::transform::{cascade_lengths, dwt_decompose, dwt_reconstruct, ExtensionMode};
use crate::error::{Error, Result};
use crate::types::{PipelineConfig, Signal};

/// Scale factor turning the median absolute value of Gaussian noise into its
/// standard deviation.
pub const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Soft,
    Hard,
}

/// Robust noise level from the finest detail coefficients: `median(|d|) / 0.6745`.
pub fn estimate_noise_sigma(detail1: &[f64]) -> Result<f64> {
    if detail1.is_empty() {
        return Err(Error::Empty("detail coefficients"));
    }
    let mut abs: Vec<f64> = detail1.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let median = if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    };
    Ok(median / MAD_SCALE)
}

/// `sigma * sqrt(2 ln n)`.
pub fn universal_threshold(sigma: f64, n: usize) -> f64 {
    if sigma <= 0.0 || n < 2 {
        return 0.0;
    }
    sigma * (2.0 * (n as f64).ln()).sqrt()
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    let mag = x.abs() - lambda;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

pub fn hard_threshold(x: f64, lambda: f64) -> f64 {
    if x.abs() > lambda {
        x
    } else {
        0.0
    }
}

/// What the denoiser did to one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseInfo {
    pub level: usize,
    pub sigma: f64,
    pub threshold: f64,
}

/// Deepest level in `[min_level, max_level]` whose approximation keeps at least
/// twice the filter length in coefficients.
pub fn auto_level(
    n: usize,
    min_level: usize,
    max_level: usize,
    f: &WaveletFilter,
    mode: ExtensionMode,
) -> Result<usize> {
    let need = 2 * f.len();
    let lens = cascade_lengths(n, max_level, f.len(), mode);
    (min_level..=max_level)
        .rev()
        .find(|&p| lens[p] >= need && lens[..p].iter().all(|&l| l >= 2))
        .ok_or(Error::SignalTooShort {
            len: n,
            min: minimal_length(min_level, need, f.len(), mode),
        })
}

fn minimal_length(level: usize, need: usize, filter_len: usize, mode: ExtensionMode) -> usize {
    (2..)
        .find(|&n| cascade_lengths(n, level, filter_len, mode)[level] >= need)
        .unwrap_or(usize::MAX)
}

/// Shrinks the detail coefficients of `x` at the universal threshold.
pub fn denoise_values(
    x: &[f64],
    f: &WaveletFilter,
    mode: ExtensionMode,
    levels: (usize, usize),
    threshold_mode: ThresholdMode,
) -> Result<(Vec<f64>, DenoiseInfo)> {
    let level = auto_level(x.len(), levels.0, levels.1, f, mode)?;
    let mut d = dwt_decompose(x, level, f, mode)?;
    let sigma = estimate_noise_sigma(&d.details[0])?;
    let lambda = universal_threshold(sigma, x.len());
    let shrink = match threshold_mode {
        ThresholdMode::Soft => soft_threshold,
        ThresholdMode::Hard => hard_threshold,
    };
    for level in &mut d.details {
        for c in level.iter_mut() {
            *c = shrink(*c, lambda);
        }
    }
    let out = dwt_reconstruct(&d, f)?;
    Ok((
        out,
        DenoiseInfo {
            level,
            sigma,
            threshold: lambda,
        },
    ))
}

/// Denoises a signal with the wavelet, extension and level range of `cfg`.
pub fn denoise(s: &Signal, cfg: &PipelineConfig) -> Result<Signal> {
    denoise_with_info(s, cfg).map(|(s, _)| s)
}

pub fn denoise_with_info(s: &Signal, cfg: &PipelineConfig) -> Result<(Signal, DenoiseInfo)> {
    let f = cfg.wavelet.filter();
    let (values, info) = denoise_values(
        s.values(),
        &f,
        cfg.extension,
        (cfg.denoise_level_min, cfg.denoise_level_max),
        cfg.threshold_mode,
    )?;
    Ok((s.with_values(values), info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn mad_sigma_hand_values() {
        let s = estimate_noise_sigma(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((s - 1.48258).abs() < 1e-5);
        assert_eq!(estimate_noise_sigma(&[0.0; 8]).unwrap(), 0.0);
        assert!(matches!(estimate_noise_sigma(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn mad_sigma_recovers_gaussian_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = 0.7;
        let noise: Vec<f64> = Normal::new(0.0, sigma)
            .unwrap()
            .sample_iter(&mut rng)
            .take(4096)
            .collect();
        let f = WaveletKind::Sym4.filter();
        let d = dwt_decompose(&noise, 1, &f, ExtensionMode::Periodic).unwrap();
        let est = estimate_noise_sigma(&d.details[0]).unwrap();
        assert!((est - sigma).abs() / sigma < 0.1, "estimate {est}");
    }

    #[test]
    fn universal_threshold_values() {
        // sqrt(2 ln 512) evaluated independently: 3.532230067546424
        assert!((universal_threshold(1.0, 512) - 3.532_230_067_546_424).abs() < 1e-12);
        assert_eq!(universal_threshold(0.0, 512), 0.0);
        assert!((universal_threshold(1.5, 1024) - 5.58494).abs() < 1e-5);
    }

    #[test]
    fn soft_and_hard_shrinkage() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(hard_threshold(-3.0, 1.0), -3.0);
        assert_eq!(hard_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn clean_piecewise_constant_signal_is_untouched() {
        // Haar details of a signal with jumps on even boundaries vanish at level 1,
        // so the noise estimate and threshold are zero.
        let x: Vec<f64> = (0..512).map(|i| ((i / 64) % 3) as f64 * 2.0 - 1.0).collect();
        let f = WaveletKind::Haar.filter();
        let (y, info) =
            denoise_values(&x, &f, ExtensionMode::Symmetric, (3, 5), ThresholdMode::Soft).unwrap();
        assert_eq!(info.threshold, 0.0);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn pure_noise_is_mostly_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise: Vec<f64> = Normal::new(0.0, 1.0)
            .unwrap()
            .sample_iter(&mut rng)
            .take(512)
            .collect();
        let s = Signal::on_unit_grid(noise).unwrap();
        let out = denoise(&s, &PipelineConfig::default()).unwrap();
        let v = out.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(var <= 0.2, "variance {var}");
    }

    #[test]
    fn auto_level_prefers_deepest_feasible() {
        let f = WaveletKind::Sym4.filter();
        assert_eq!(auto_level(512, 3, 5, &f, ExtensionMode::Symmetric).unwrap(), 5);
        assert_eq!(auto_level(512, 3, 5, &f, ExtensionMode::Periodic).unwrap(), 5);
        // Periodic: 128 -> 64 -> 32 -> 16 -> 8; level 4 keeps 8 < 16.
        assert_eq!(auto_level(128, 3, 5, &f, ExtensionMode::Periodic).unwrap(), 3);
        assert!(matches!(
            auto_level(40, 3, 5, &f, ExtensionMode::Periodic),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
