//! Per-variable choice of an approximation level and construction of the
//! coefficient packets that feed the classifier.
//!
//! For variable `j` the energy curve `EQ_j(p)` sums, over trials, the squared
//! distance between each signal and its reconstruction from level-`p`
//! approximation coefficients. The chosen level sits one below the first
//! sharp slope change of that curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::types::{Dataset, PipelineConfig, Signal};
use crate::wavelet::{
    approx_reconstruct, cascade_lengths, dwt_decompose, ExtensionMode, WaveletFilter,
};

/// Guards the increment ratio against division by zero.
pub const SLOPE_EPS: f64 = 1e-12;

/// `EQ_j(p)` for `p = 1..=values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqCurve {
    /// 1-based variable number.
    pub variable: usize,
    pub values: Vec<f64>,
}

/// Approximation coefficients of one variable across all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPacket {
    /// 1-based variable number.
    pub variable: usize,
    pub level: usize,
    /// Row `i` holds trial `i`'s coefficients.
    pub coeffs: Vec<Vec<f64>>,
    /// Stable identifiers `"j:k"`, `k` 1-based.
    pub coeff_ids: Vec<String>,
}

impl CoefficientPacket {
    pub fn width(&self) -> usize {
        self.coeff_ids.len()
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.coeffs.iter().map(|row| row[k]).collect()
    }
}

pub fn coeff_id(variable: usize, k: usize) -> String {
    format!("{variable}:{}", k + 1)
}

/// Deepest level of the energy curve for signals of length `m`.
pub fn curve_depth(m: usize) -> usize {
    (usize::BITS - 1 - m.leading_zeros()) as usize
}

fn common_length(signals: &[&Signal]) -> Result<usize> {
    let first = signals.first().ok_or(Error::Empty("signals"))?.len();
    for s in signals {
        if s.len() != first {
            return Err(Error::MixedGridLengths {
                expected: first,
                found: s.len(),
            });
        }
    }
    Ok(first)
}

/// Energy curve of one variable for `p = 1..=curve_depth(m)`.
pub fn eq_curve(
    variable: usize,
    signals: &[&Signal],
    f: &WaveletFilter,
    mode: ExtensionMode,
) -> Result<EqCurve> {
    let m = common_length(signals)?;
    let depth = curve_depth(m);
    let mut values = vec![0.0; depth];
    for s in signals {
        let x = s.values();
        for (p, slot) in values.iter_mut().enumerate() {
            let d = dwt_decompose(x, p + 1, f, mode)?;
            let a = approx_reconstruct(&d, f)?;
            *slot += x.iter().zip(&a).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
        }
    }
    Ok(EqCurve { variable, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelChoice {
    pub level: usize,
    /// Level at which the slope change was detected, before the conservative step back.
    pub slope_change: Option<usize>,
    /// No slope change was found and the fallback level was used.
    pub fallback: bool,
}

/// Smallest `p >= 2` whose increment `EQ(p+1) - EQ(p)` is at least `ratio`
/// times the previous one, minus one (never below 1). Curves without such a
/// change return `fallback`.
pub fn select_level(curve: &[f64], ratio: f64, fallback: usize) -> LevelChoice {
    let fallback = LevelChoice {
        level: fallback.max(1),
        slope_change: None,
        fallback: true,
    };
    if curve.len() < 3 {
        return fallback;
    }
    // inc[p - 1] = EQ(p + 1) - EQ(p)
    let inc: Vec<f64> = curve.windows(2).map(|w| w[1] - w[0]).collect();
    (2..=inc.len())
        .find(|&p| inc[p - 1] / (inc[p - 2] + SLOPE_EPS) >= ratio)
        .map(|p| LevelChoice {
            level: (p - 1).max(1),
            slope_change: Some(p),
            fallback: false,
        })
        .unwrap_or(fallback)
}

/// Level-`level` approximation coefficients of every signal.
pub fn build_packet(
    variable: usize,
    signals: &[&Signal],
    level: usize,
    f: &WaveletFilter,
    mode: ExtensionMode,
) -> Result<CoefficientPacket> {
    let m = common_length(signals)?;
    let width = cascade_lengths(m, level, f.len(), mode)[level];
    let coeffs = signals
        .iter()
        .map(|s| dwt_decompose(s.values(), level, f, mode).map(|d| d.approx))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientPacket {
        variable,
        level,
        coeffs,
        coeff_ids: (0..width).map(|k| coeff_id(variable, k)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCompression {
    pub variable: usize,
    pub name: String,
    pub eq_curve: Vec<f64>,
    pub choice: LevelChoice,
    pub width: usize,
    pub zero_variance_coeffs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub wavelet: String,
    pub extension: ExtensionMode,
    pub elbow_threshold: f64,
    pub variables: Vec<VariableCompression>,
    pub total_coefficients: usize,
}

fn zero_variance(p: &CoefficientPacket) -> Vec<String> {
    (0..p.width())
        .filter(|&k| {
            let first = p.coeffs[0][k];
            p.coeffs.iter().all(|row| row[k] == first)
        })
        .map(|k| p.coeff_ids[k].clone())
        .collect()
}

/// Level selection and packet construction for every variable of a
/// preprocessed dataset.
pub fn compress_dataset(
    d: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(Vec<CoefficientPacket>, CompressionReport)> {
    let f = cfg.wavelet.filter();
    let per_var = (0..d.variable_count())
        .into_par_iter()
        .map(|j| {
            let signals = d.variable(j);
            if let Some(s) = signals.iter().find(|s| !s.grid().is_unit()) {
                return Err(Error::InvalidDataset(format!(
                    "variable {} is not on the unit grid ({:?}); preprocess first",
                    j + 1,
                    s.grid()
                )));
            }
            let curve = eq_curve(j + 1, &signals, &f, cfg.extension)?;
            let choice = select_level(&curve.values, cfg.elbow_threshold, cfg.fallback_level);
            let packet = build_packet(j + 1, &signals, choice.level, &f, cfg.extension)?;
            let summary = VariableCompression {
                variable: j + 1,
                name: d.variable_names[j].clone(),
                eq_curve: curve.values,
                choice,
                width: packet.width(),
                zero_variance_coeffs: zero_variance(&packet),
            };
            Ok((packet, summary))
        })
        .collect::<Result<Vec<_>>>()
        .stage("compress")?;
    let (packets, variables): (Vec<_>, Vec<_>) = per_var.into_iter().unzip();
    let total_coefficients = packets.iter().map(CoefficientPacket::width).sum();
    Ok((
        packets,
        CompressionReport {
            wavelet: f.name().to_string(),
            extension: cfg.extension,
            elbow_threshold: cfg.elbow_threshold,
            variables,
            total_coefficients,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(v: Vec<f64>) -> Signal {
        Signal::on_unit_grid(v).unwrap()
    }

    #[test]
    fn constant_signals_have_flat_zero_curve() {
        let s = [unit(vec![2.0; 64]), unit(vec![-1.0; 64])];
        let refs: Vec<&Signal> = s.iter().collect();
        let c = eq_curve(1, &refs, &WaveletKind::Sym4.filter(), ExtensionMode::Symmetric).unwrap();
        assert_eq!(c.values.len(), 6);
        assert!(c.values.iter().all(|v| v.abs() < 1e-18), "{:?}", c.values);
    }

    #[test]
    fn haar_level_one_hand_value() {
        let s = unit(vec![1.0, 2.0, 3.0, 4.0]);
        let c = eq_curve(1, &[&s], &WaveletKind::Haar.filter(), ExtensionMode::Periodic).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_is_nondecreasing_for_periodic_orthogonal_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigs: Vec<Signal> = (0..10)
            .map(|_| unit((0..512).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let refs: Vec<&Signal> = sigs.iter().collect();
        for kind in WaveletKind::ALL {
            let c = eq_curve(1, &refs, &kind.filter(), ExtensionMode::Periodic).unwrap();
            assert_eq!(c.values.len(), 9);
            assert!(c.values.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{kind:?}");
        }
    }

    #[test]
    fn mixed_lengths_are_rejected() {
        let a = unit(vec![0.0; 16]);
        let b = unit(vec![0.0; 32]);
        assert!(matches!(
            eq_curve(1, &[&a, &b], &WaveletKind::Haar.filter(), ExtensionMode::Periodic),
            Err(Error::MixedGridLengths { .. })
        ));
    }

    #[test]
    fn level_rule_on_worked_curve() {
        let c = select_level(&[1.0, 1.2, 1.5, 6.0, 20.0], 3.0, 5);
        assert_eq!(c.slope_change, Some(3));
        assert_eq!(c.level, 2);
        assert!(!c.fallback);
    }

    #[test]
    fn level_rule_on_late_jump() {
        // Increments 0, 0, 0, 100: the first ratio >= 3 is at p = 4.
        let c = select_level(&[0.0, 0.0, 0.0, 0.0, 100.0, 150.0], 3.0, 5);
        assert_eq!(c.slope_change, Some(4));
        assert_eq!(c.level, 3);
    }

    #[test]
    fn level_rule_falls_back_on_flat_or_short_curves() {
        let c = select_level(&[0.0; 9], 3.0, 5);
        assert_eq!(c, LevelChoice { level: 5, slope_change: None, fallback: true });
        assert!(select_level(&[0.0, 1.0], 3.0, 5).fallback);
    }

    #[test]
    fn level_rule_never_returns_zero() {
        let c = select_level(&[0.0, 1.0, 10.0], 3.0, 5);
        assert_eq!(c.slope_change, Some(2));
        assert_eq!(c.level, 1);
    }

    #[test]
    fn packet_widths() {
        let sigs: Vec<Signal> = (0..3).map(|i| unit(vec![i as f64; 512])).collect();
        let refs: Vec<&Signal> = sigs.iter().collect();
        let f = WaveletKind::Sym4.filter();
        let p = build_packet(4, &refs, 5, &f, ExtensionMode::Periodic).unwrap();
        assert_eq!(p.width(), 16);
        assert_eq!(p.coeff_ids[0], "4:1");
        assert_eq!(p.coeff_ids[15], "4:16");
        let p = build_packet(4, &refs, 5, &f, ExtensionMode::Symmetric).unwrap();
        assert_eq!(p.width(), 22);
        // Constant c maps to c * 2^(p/2) in every coefficient.
        let scale = 2f64.powf(2.5);
        for (i, row) in p.coeffs.iter().enumerate() {
            assert!(row.iter().all(|v| (v - i as f64 * scale).abs() < 1e-9));
        }
    }
}
