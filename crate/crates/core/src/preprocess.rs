//! Truncation to the active window, resampling onto the unit grid and
//! amplitude normalisation.
//!
//! The orchestrated order is truncate, denoise, resample, normalise: denoising
//! runs on the truncated raw samples before any interpolation touches them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::types::{Dataset, Grid, PipelineConfig, Signal, Trial};
use crate::wavelet::{denoise_with_info, DenoiseInfo};

/// Inclusive sample range `[start, end]` of the active part of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

fn min_max_normalized(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - lo) / span).collect()
}

/// Finds the active window from the start and end marker signals.
///
/// Each marker is min-max scaled to `[0, 1]`. The start is the first sample at
/// or above `frac` that follows a sample below it; the end is the last sample
/// below `frac` that follows a sample at or above it.
pub fn detect_active_window(start_marker: &Signal, end_marker: &Signal, frac: f64) -> Result<Window> {
    if start_marker.len() != end_marker.len() {
        return Err(Error::MixedGridLengths {
            expected: start_marker.len(),
            found: end_marker.len(),
        });
    }
    let up = min_max_normalized(start_marker.values());
    let down = min_max_normalized(end_marker.values());
    let start = (1..up.len())
        .find(|&i| up[i - 1] < frac && up[i] >= frac)
        .ok_or(Error::NoCrossing {
            direction: "upward",
            frac,
        })?;
    let end = (1..down.len())
        .rev()
        .find(|&i| down[i - 1] >= frac && down[i] < frac)
        .ok_or(Error::NoCrossing {
            direction: "downward",
            frac,
        })?;
    if start >= end {
        return Err(Error::WindowInverted { start, end });
    }
    Ok(Window { start, end })
}

fn truncate_signal(s: &Signal, w: Window) -> Result<Signal> {
    if w.is_empty() {
        return Err(Error::WindowInverted {
            start: w.start,
            end: w.end,
        });
    }
    if w.end >= s.len() {
        return Err(Error::WindowOutOfRange {
            start: w.start,
            end: w.end,
            len: s.len(),
        });
    }
    let grid = match s.grid() {
        Grid::Raw { t0, dt, .. } => Grid::raw(t0 + w.start as f64 * dt, dt, w.len()),
        Grid::Unit { .. } => {
            return Err(Error::DegenerateGrid(
                "cannot truncate a signal already on the unit grid".into(),
            ))
        }
    };
    Signal::new(grid, s.values()[w.start..=w.end].to_vec())
}

/// Restricts every signal of the trial to `window`.
pub fn truncate(t: &Trial, window: Window) -> Result<Trial> {
    let signals = t
        .signals
        .iter()
        .map(|s| truncate_signal(s, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trial {
        id: t.id.clone(),
        label: t.label,
        signals,
    })
}

/// Position of each sample on `[0, 1]` for interpolation purposes.
fn unit_positions(g: Grid) -> Vec<f64> {
    match g {
        // Affine map of the acquisition interval onto [0, 1]; independent of t0 and dt.
        Grid::Raw { len, .. } => {
            let last = (len - 1) as f64;
            (0..len).map(|i| i as f64 / last).collect()
        }
        Grid::Unit { m } => (1..=m).map(|i| i as f64 / m as f64).collect(),
    }
}

/// Linear interpolation of `s` at `{1/m, ..., (m-1)/m, 1}` after mapping its
/// time axis onto `[0, 1]`. Points left of the first sample take its value.
pub fn resample_to_unit_grid(s: &Signal, m: usize) -> Result<Signal> {
    if s.len() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "cannot resample a signal of length {}",
            s.len()
        )));
    }
    if m < 2 {
        return Err(Error::DegenerateGrid(format!("target length m = {m}")));
    }
    let pos = unit_positions(s.grid());
    let x = s.values();
    let mut out = Vec::with_capacity(m);
    let mut k = 0usize;
    for i in 1..=m {
        let u = i as f64 / m as f64;
        if u <= pos[0] {
            out.push(x[0]);
            continue;
        }
        while k + 2 < pos.len() && pos[k + 1] < u {
            k += 1;
        }
        let (u0, u1) = (pos[k], pos[k + 1]);
        let w = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
        out.push(if w == 0.0 {
            x[k]
        } else if w == 1.0 {
            x[k + 1]
        } else {
            x[k] + w * (x[k + 1] - x[k])
        });
    }
    Signal::new(Grid::unit(m), out)
}

/// Relative spread below which a signal counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

/// Z-score with the population standard deviation; constants map to zeros.
pub fn normalize_amplitude(s: &Signal) -> Signal {
    let x = s.values();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > CONSTANT_TOL * mean.abs().max(1.0)) {
        return s.with_values(vec![0.0; x.len()]);
    }
    s.with_values(x.iter().map(|v| (v - mean) / std).collect())
}

/// Names of the stages applied to every trial, in order.
pub const STAGE_ORDER: [&str; 4] = ["truncate", "denoise", "resample", "normalize"];

/// Per-trial record of what preprocessing did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAudit {
    pub id: String,
    pub raw_len: usize,
    pub window: Window,
    pub truncated_len: usize,
    /// Denoising level, noise estimate and threshold per variable.
    pub denoise: Vec<DenoiseInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessAudit {
    pub stage_order: Vec<String>,
    pub m: usize,
    pub trials: Vec<TrialAudit>,
}

fn preprocess_trial(
    t: &Trial,
    marker_start: usize,
    marker_end: usize,
    cfg: &PipelineConfig,
) -> Result<(Trial, TrialAudit)> {
    let ctx = |e: Error| Error::InvalidDataset(format!("trial {}: {e}", t.id));
    let window = detect_active_window(
        &t.signals[marker_start - 1],
        &t.signals[marker_end - 1],
        cfg.marker_frac,
    )
    .map_err(ctx)?;
    let truncated = truncate(t, window).map_err(ctx)?;
    let mut denoise = Vec::with_capacity(truncated.signals.len());
    let mut signals = Vec::with_capacity(truncated.signals.len());
    for s in &truncated.signals {
        let (clean, info) = denoise_with_info(s, cfg).map_err(ctx)?;
        denoise.push(info);
        let resampled = resample_to_unit_grid(&clean, cfg.m).map_err(ctx)?;
        signals.push(normalize_amplitude(&resampled));
    }
    let audit = TrialAudit {
        id: t.id.clone(),
        raw_len: t.signals[0].len(),
        window,
        truncated_len: window.len(),
        denoise,
    };
    Ok((
        Trial {
            id: t.id.clone(),
            label: t.label,
            signals,
        },
        audit,
    ))
}

/// Runs truncate, denoise, resample and normalise on every trial.
pub fn preprocess_dataset(d: &Dataset, cfg: &PipelineConfig) -> Result<(Dataset, PreprocessAudit)> {
    let results = d
        .trials
        .par_iter()
        .map(|t| preprocess_trial(t, d.marker_start, d.marker_end, cfg))
        .collect::<Result<Vec<_>>>()
        .stage("preprocess")?;
    let (trials, audits): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((
        Dataset {
            trials,
            class_count: d.class_count,
            variable_names: d.variable_names.clone(),
            marker_start: d.marker_start,
            marker_end: d.marker_end,
        },
        PreprocessAudit {
            stage_order: STAGE_ORDER.iter().map(|s| s.to_string()).collect(),
            m: cfg.m,
            trials: audits,
        },
    ))
}

/// Denoises every signal in place of its grid; no truncation or resampling.
pub fn denoise_dataset(d: &Dataset, cfg: &PipelineConfig) -> Result<Dataset> {
    let trials = d
        .trials
        .par_iter()
        .map(|t| {
            let signals = t
                .signals
                .iter()
                .map(|s| crate::wavelet::denoise(s, cfg))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::InvalidDataset(format!("trial {}: {e}", t.id)))?;
            Ok(Trial {
                id: t.id.clone(),
                label: t.label,
                signals,
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("denoise")?;
    Ok(Dataset {
        trials,
        ..d.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(n: usize, at: usize, rising: bool) -> Signal {
        let v = (0..n)
            .map(|i| if (i >= at) == rising { 1.0 } else { 0.0 })
            .collect();
        Signal::sampled(v).unwrap()
    }

    #[test]
    fn step_markers_give_exact_window() {
        let w = detect_active_window(&step(1000, 100, true), &step(1000, 900, false), 0.5).unwrap();
        assert_eq!(w, Window { start: 100, end: 900 });
    }

    #[test]
    fn ramp_crossing_is_at_midpoint() {
        let mut v = vec![0.0; 50];
        v.extend((0..200).map(|i| i as f64 / 199.0));
        v.extend(vec![1.0; 50]);
        let ramp = Signal::sampled(v).unwrap();
        let w = detect_active_window(&ramp, &step(300, 280, false), 0.5).unwrap();
        assert_eq!(w.start, 50 + 100);
    }

    #[test]
    fn missing_or_inverted_crossings_are_errors() {
        let flat = Signal::sampled(vec![1.0; 100]).unwrap();
        assert!(matches!(
            detect_active_window(&flat, &step(100, 50, false), 0.5),
            Err(Error::NoCrossing { .. })
        ));
        assert!(matches!(
            detect_active_window(&step(100, 60, true), &step(100, 40, false), 0.5),
            Err(Error::WindowInverted { .. })
        ));
    }

    fn trial(len: usize) -> Trial {
        Trial {
            id: "t".into(),
            label: 1,
            signals: (0..2)
                .map(|k| Signal::sampled((0..len).map(|i| (i * (k + 1)) as f64).collect()).unwrap())
                .collect(),
        }
    }

    #[test]
    fn truncation_slices_inclusively() {
        let t = trial(1000);
        let full = truncate(&t, Window { start: 0, end: 999 }).unwrap();
        assert_eq!(full, t);
        let cut = truncate(&t, Window { start: 100, end: 400 }).unwrap();
        assert!(cut.signals.iter().all(|s| s.len() == 301));
        assert_eq!(cut.signals[1].values()[0], 200.0);
        match cut.signals[0].grid() {
            Grid::Raw { t0, .. } => assert!((t0 - 100.0 / 250.0).abs() < 1e-12),
            g => panic!("unexpected grid {g:?}"),
        }
        assert!(matches!(
            truncate(&t, Window { start: 10, end: 1000 }),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn two_point_signal_resamples_linearly() {
        let s = Signal::new(Grid::raw(0.0, 1.0, 2), vec![0.0, 2.0]).unwrap();
        let r = resample_to_unit_grid(&s, 4).unwrap();
        assert_eq!(r.values(), &[0.5, 1.0, 1.5, 2.0]);
        assert_eq!(r.grid(), Grid::unit(4));
    }

    #[test]
    fn unit_grid_signal_is_unchanged() {
        let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = Signal::on_unit_grid(v.clone()).unwrap();
        let r = resample_to_unit_grid(&s, 16).unwrap();
        assert!(r.values().iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn resample_rejects_degenerate_input() {
        let s = Signal::from_parts(Grid::raw(0.0, 1.0, 1), vec![1.0]);
        assert!(matches!(resample_to_unit_grid(&s, 8), Err(Error::DegenerateGrid(_))));
    }

    #[test]
    fn z_score_hand_values() {
        let s = Signal::sampled(vec![1.0, 2.0, 3.0]).unwrap();
        let z = normalize_amplitude(&s);
        let want = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        assert!(z.values().iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12));
        let c = normalize_amplitude(&Signal::sampled(vec![7.0; 3]).unwrap());
        assert_eq!(c.values(), &[0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn affine_functions_resample_exactly(
            a in -5.0f64..5.0, b in -5.0f64..5.0, len in 2usize..300, m in 2usize..600,
        ) {
            let v: Vec<f64> = (0..len).map(|i| a + b * i as f64 / (len - 1) as f64).collect();
            let s = Signal::new(Grid::raw(3.0, 0.004, len), v).unwrap();
            let r = resample_to_unit_grid(&s, m).unwrap();
            for (i, y) in r.values().iter().enumerate() {
                let u = (i + 1) as f64 / m as f64;
                prop_assert!((y - (a + b * u)).abs() < 1e-12);
            }
        }

        #[test]
        fn resampling_ignores_affine_time_changes(
            v in prop::collection::vec(-10.0f64..10.0, 2..200),
            t0 in -100.0f64..100.0, dt in 1e-3f64..10.0, m in 2usize..600,
        ) {
            let a = Signal::new(Grid::raw(0.0, 1.0 / 250.0, v.len()), v.clone()).unwrap();
            let b = Signal::new(Grid::raw(t0, dt, v.len()), v).unwrap();
            prop_assert_eq!(
                resample_to_unit_grid(&a, m).unwrap().into_values(),
                resample_to_unit_grid(&b, m).unwrap().into_values()
            );
        }

        #[test]
        fn resampling_stays_inside_envelope(
            v in prop::collection::vec(-10.0f64..10.0, 2..200), m in 2usize..600,
        ) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let r = resample_to_unit_grid(&Signal::sampled(v).unwrap(), m).unwrap();
            prop_assert!(r.values().iter().all(|&y| y >= lo && y <= hi));
        }

        #[test]
        fn z_score_has_zero_mean_unit_std(v in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let z = normalize_amplitude(&Signal::sampled(v).unwrap());
            let x = z.values();
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let std = (x.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
            if x.iter().any(|&y| y != 0.0) {
                prop_assert!(mean.abs() < 1e-12);
                prop_assert!((std - 1.0).abs() < 1e-12);
            }
        }
    }
}
