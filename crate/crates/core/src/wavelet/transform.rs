//! Multilevel 1-D discrete wavelet transform.
//!
//! Each analysis step convolves the (extended) input with the lowpass and
//! highpass analysis filters and keeps every other output. Synthesis is the
//! transpose of analysis, which for orthogonal filters inverts it exactly on
//! the samples covered by the original signal, whatever the extension.

use serde::{Deserialize, Serialize};

use super::filters::WaveletFilter;
use crate::error::{Error, Result};

/// How the signal is continued beyond its ends during analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    /// Half-point mirror: `x[-1] = x[0]`, `x[N] = x[N-1]`.
    Symmetric,
    /// Circular; odd lengths are first padded by repeating the last sample.
    Periodic,
    /// Zeros outside the signal.
    Zero,
}

impl ExtensionMode {
    pub const ALL: [ExtensionMode; 3] = [
        ExtensionMode::Symmetric,
        ExtensionMode::Periodic,
        ExtensionMode::Zero,
    ];

    /// Length of one analysis step's output for an input of length `len`.
    pub fn output_len(self, len: usize, filter_len: usize) -> usize {
        match self {
            ExtensionMode::Periodic => len.div_ceil(2),
            ExtensionMode::Symmetric | ExtensionMode::Zero => (len + filter_len - 1) / 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExtensionMode::Symmetric => "symmetric",
            ExtensionMode::Periodic => "periodic",
            ExtensionMode::Zero => "zero",
        }
    }
}

/// Approximation and detail coefficients of a signal at level `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    pub level: usize,
    /// Level-`level` approximation coefficients.
    pub approx: Vec<f64>,
    /// Detail coefficients, `details[0]` being the finest level.
    pub details: Vec<Vec<f64>>,
    pub original_len: usize,
    pub extension: ExtensionMode,
}

/// Approximation lengths `[len_0 = n, len_1, ..., len_level]` of the cascade.
pub fn cascade_lengths(
    n: usize,
    level: usize,
    filter_len: usize,
    mode: ExtensionMode,
) -> Vec<usize> {
    let mut lens = Vec::with_capacity(level + 1);
    lens.push(n);
    for _ in 0..level {
        let last = *lens.last().unwrap();
        lens.push(mode.output_len(last, filter_len));
    }
    lens
}

/// Deepest level the cascade allows for a signal of length `n`.
pub fn max_level(n: usize, filter_len: usize, mode: ExtensionMode) -> usize {
    let mut level = 0;
    let mut len = n;
    // Non-periodic lengths stall at filter_len - 1; cap to avoid looping forever.
    while len >= 2 && level < 64 {
        let next = mode.output_len(len, filter_len);
        level += 1;
        if next == len {
            return usize::MAX;
        }
        len = next;
    }
    level
}

fn check_input(n: usize, level: usize, f: &WaveletFilter, mode: ExtensionMode) -> Result<()> {
    if level == 0 {
        return Err(Error::InvalidLevel(level));
    }
    let min = f.len().max(2);
    if n < min {
        return Err(Error::SignalTooShort { len: n, min });
    }
    let lens = cascade_lengths(n, level - 1, f.len(), mode);
    if lens.iter().any(|&l| l < 2) {
        return Err(Error::LevelTooDeep { level, len: n });
    }
    Ok(())
}

#[inline]
fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - 1 - r }) as usize
}

/// Offset of the first periodic analysis output; centres the filter support.
#[inline]
fn periodic_offset(filter_len: usize) -> isize {
    (filter_len / 2) as isize
}

fn analysis_step(x: &[f64], f: &WaveletFilter, mode: ExtensionMode) -> (Vec<f64>, Vec<f64>) {
    let flen = f.len();
    let n = x.len();
    match mode {
        ExtensionMode::Periodic => {
            let padded: std::borrow::Cow<[f64]> = if n % 2 == 1 {
                let mut v = x.to_vec();
                v.push(x[n - 1]);
                v.into()
            } else {
                x.into()
            };
            let np = padded.len() as isize;
            let out_len = padded.len() / 2;
            let off = periodic_offset(flen);
            let mut lo = vec![0.0; out_len];
            let mut hi = vec![0.0; out_len];
            for o in 0..out_len {
                let base = 2 * o as isize + off;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..flen {
                    let v = padded[(base - j as isize).rem_euclid(np) as usize];
                    a += f.dec_lo[j] * v;
                    d += f.dec_hi[j] * v;
                }
                lo[o] = a;
                hi[o] = d;
            }
            (lo, hi)
        }
        ExtensionMode::Symmetric | ExtensionMode::Zero => {
            let out_len = mode.output_len(n, flen);
            let mut lo = vec![0.0; out_len];
            let mut hi = vec![0.0; out_len];
            for o in 0..out_len {
                let base = 2 * o as isize + 1;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..flen {
                    let i = base - j as isize;
                    let v = if (0..n as isize).contains(&i) {
                        x[i as usize]
                    } else if mode == ExtensionMode::Symmetric {
                        x[symmetric_index(i, n)]
                    } else {
                        0.0
                    };
                    a += f.dec_lo[j] * v;
                    d += f.dec_hi[j] * v;
                }
                lo[o] = a;
                hi[o] = d;
            }
            (lo, hi)
        }
    }
}

fn synthesis_step(
    approx: &[f64],
    detail: &[f64],
    out_len: usize,
    f: &WaveletFilter,
    mode: ExtensionMode,
) -> Vec<f64> {
    let flen = f.len();
    match mode {
        ExtensionMode::Periodic => {
            let np = 2 * approx.len();
            let off = periodic_offset(flen);
            let mut x = vec![0.0; np];
            for o in 0..approx.len() {
                let base = 2 * o as isize + off;
                for j in 0..flen {
                    let t = (base - j as isize).rem_euclid(np as isize) as usize;
                    x[t] += approx[o] * f.rec_lo[flen - 1 - j] + detail[o] * f.rec_hi[flen - 1 - j];
                }
            }
            x.truncate(out_len);
            x
        }
        ExtensionMode::Symmetric | ExtensionMode::Zero => {
            let mut x = vec![0.0; out_len];
            for (t, xt) in x.iter_mut().enumerate() {
                // Outputs o with 0 <= 2o + 1 - t <= F - 1.
                let o_min = t.saturating_sub(1).div_ceil(2);
                let o_max = ((t + flen - 2) / 2).min(approx.len() - 1);
                let mut acc = 0.0;
                for o in o_min..=o_max {
                    let k = 2 * o + 1 - t;
                    acc += approx[o] * f.rec_lo[flen - 1 - k] + detail[o] * f.rec_hi[flen - 1 - k];
                }
                *xt = acc;
            }
            x
        }
    }
}

/// Decomposes `x` down to `level`.
pub fn dwt_decompose(
    x: &[f64],
    level: usize,
    f: &WaveletFilter,
    mode: ExtensionMode,
) -> Result<WaveletDecomposition> {
    check_input(x.len(), level, f, mode)?;
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (lo, hi) = analysis_step(&approx, f, mode);
        details.push(hi);
        approx = lo;
    }
    Ok(WaveletDecomposition {
        level,
        approx,
        details,
        original_len: x.len(),
        extension: mode,
    })
}

fn check_decomposition(d: &WaveletDecomposition, f: &WaveletFilter) -> Result<Vec<usize>> {
    if d.level == 0 {
        return Err(Error::InvalidLevel(0));
    }
    if d.details.len() != d.level {
        return Err(Error::InconsistentCoefficients(format!(
            "{} detail levels for a level-{} decomposition",
            d.details.len(),
            d.level
        )));
    }
    let lens = cascade_lengths(d.original_len, d.level, f.len(), d.extension);
    if d.approx.len() != lens[d.level] {
        return Err(Error::InconsistentCoefficients(format!(
            "approximation has {} coefficients, expected {}",
            d.approx.len(),
            lens[d.level]
        )));
    }
    for (k, det) in d.details.iter().enumerate() {
        if det.len() != lens[k + 1] {
            return Err(Error::InconsistentCoefficients(format!(
                "level-{} details have {} coefficients, expected {}",
                k + 1,
                det.len(),
                lens[k + 1]
            )));
        }
    }
    Ok(lens)
}

/// Inverts [`dwt_decompose`]; the output has `original_len` samples.
pub fn dwt_reconstruct(d: &WaveletDecomposition, f: &WaveletFilter) -> Result<Vec<f64>> {
    let lens = check_decomposition(d, f)?;
    let mut approx = d.approx.clone();
    for k in (0..d.level).rev() {
        approx = synthesis_step(&approx, &d.details[k], lens[k], f, d.extension);
    }
    Ok(approx)
}

/// Reconstruction from the approximation coefficients alone.
pub fn approx_reconstruct(d: &WaveletDecomposition, f: &WaveletFilter) -> Result<Vec<f64>> {
    let zeroed = WaveletDecomposition {
        details: d.details.iter().map(|v| vec![0.0; v.len()]).collect(),
        ..d.clone()
    };
    dwt_reconstruct(&zeroed, f)
}
