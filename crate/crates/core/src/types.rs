//! Domain data model shared by every stage of the pipeline.
//!
//! A [`Dataset`] holds `n` [`Trial`]s, each carrying an ordinal class label and
//! `J` functional variables sampled on a per-trial [`Grid`]. Variables are
//! numbered `1..=J` in everything a user sees (manifests, coefficient ids,
//! reports); vectors are indexed from zero internally.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{ExtensionMode, ThresholdMode, WaveletKind};

/// Sampling rate of raw recordings, in Hz.
pub const RAW_SAMPLING_HZ: f64 = 250.0;

/// Time grid of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    /// Regular acquisition grid `t0, t0 + dt, ..., t0 + (len - 1) dt`.
    Raw { t0: f64, dt: f64, len: usize },
    /// The fixed grid `{1/m, 2/m, ..., 1}`.
    Unit { m: usize },
}

impl Grid {
    pub fn raw(t0: f64, dt: f64, len: usize) -> Self {
        Grid::Raw { t0, dt, len }
    }

    pub fn unit(m: usize) -> Self {
        Grid::Unit { m }
    }

    pub fn len(&self) -> usize {
        match *self {
            Grid::Raw { len, .. } => len,
            Grid::Unit { m } => m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        match *self {
            Grid::Raw { t0, dt, .. } => t0 + i as f64 * dt,
            Grid::Unit { m } => (i + 1) as f64 / m as f64,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Grid::Unit { .. })
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        match *self {
            Grid::Raw { t0, dt, len } => {
                if !t0.is_finite() {
                    return Err(format!("t0 = {t0} is not finite"));
                }
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(format!("dt = {dt} must be positive"));
                }
                if len < 2 {
                    return Err(format!("raw grid has {len} points, need at least 2"));
                }
            }
            Grid::Unit { m } => {
                if m < 2 {
                    return Err(format!("unit grid has m = {m}, need at least 2"));
                }
            }
        }
        Ok(())
    }
}

/// Real-valued samples on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    grid: Grid,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check().map_err(Error::DegenerateGrid)?;
        if grid.len() != values.len() {
            return Err(Error::InvalidDataset(format!(
                "signal has {} values but its grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at sample {i}"
            )));
        }
        Ok(Signal { grid, values })
    }

    /// Builds a signal without validating it. Callers guarantee the invariants.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Signal { grid, values }
    }

    /// Signal on the unit grid `{1/m, ..., 1}` with `m = values.len()`.
    pub fn on_unit_grid(values: Vec<f64>) -> Result<Self> {
        Signal::new(Grid::unit(values.len()), values)
    }

    /// Signal on a raw 250 Hz grid starting at zero.
    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        Signal::new(
            Grid::raw(0.0, 1.0 / RAW_SAMPLING_HZ, values.len()),
            values,
        )
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid, new values (length must match).
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Signal::from_parts(self.grid, values)
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(msg) = self.grid.check() {
            out.push(msg);
        }
        if self.grid.len() != self.values.len() {
            out.push(format!(
                "{} values but grid has {} points",
                self.values.len(),
                self.grid.len()
            ));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            out.push(format!("non-finite value at sample {i}"));
        }
        out
    }
}

/// One recorded trial: a class label and one signal per functional variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    /// Class index in `1..=class_count`.
    pub label: usize,
    pub signals: Vec<Signal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub trials: Vec<Trial>,
    pub class_count: usize,
    pub variable_names: Vec<String>,
    /// 1-based variable number of the start-of-trial marker.
    pub marker_start: usize,
    /// 1-based variable number of the end-of-trial marker.
    pub marker_end: usize,
}

pub const DEFAULT_MARKER_START: usize = 8;
pub const DEFAULT_MARKER_END: usize = 21;

impl Dataset {
    pub fn n(&self) -> usize {
        self.trials.len()
    }

    /// Number of functional variables `J`.
    pub fn variable_count(&self) -> usize {
        self.variable_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.trials.iter().map(|t| t.label).collect()
    }

    /// All trials' signals for variable `j` (zero-based).
    pub fn variable(&self, j: usize) -> Vec<&Signal> {
        self.trials.iter().map(|t| &t.signals[j]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for t in &self.trials {
            if (1..=self.class_count).contains(&t.label) {
                counts[t.label - 1] += 1;
            }
        }
        counts
    }
}

/// Checks every dataset invariant and reports violations as readable strings.
/// An empty list means the dataset is well formed.
pub fn validate_dataset(d: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    let j = d.variable_count();
    if j == 0 {
        out.push("dataset declares no variables".to_string());
    }
    if d.class_count == 0 {
        out.push("class count must be positive".to_string());
    }
    if d.trials.is_empty() {
        out.push("dataset has no trials".to_string());
    }
    for (name, idx) in [("start", d.marker_start), ("end", d.marker_end)] {
        if idx == 0 || idx > j {
            out.push(format!("{name} marker variable {idx} outside 1..={j}"));
        }
    }
    if d.marker_start == d.marker_end {
        out.push(format!(
            "start and end markers are the same variable {}",
            d.marker_start
        ));
    }
    let mut seen = HashSet::new();
    for t in &d.trials {
        if !seen.insert(t.id.as_str()) {
            out.push(format!("trial {}: duplicate id", t.id));
        }
        if t.signals.len() != j {
            out.push(format!(
                "trial {}: has {} signals, expected {j}",
                t.id,
                t.signals.len()
            ));
        }
        if t.label == 0 || t.label > d.class_count {
            out.push(format!(
                "trial {}: label {} out of range 1..={}",
                t.id, t.label, d.class_count
            ));
        }
        let first_grid = t.signals.first().map(Signal::grid);
        for (v, s) in t.signals.iter().enumerate() {
            for msg in s.violations() {
                out.push(format!("trial {} variable {}: {msg}", t.id, v + 1));
            }
            if Some(s.grid()) != first_grid {
                out.push(format!(
                    "trial {} variable {}: grid differs from the trial's other signals",
                    t.id,
                    v + 1
                ));
            }
        }
    }
    out
}

/// Phase-5 finalisation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStrategy {
    /// Keep the `top_k` most important coefficients.
    TopK,
    /// Cross-validate nested prefixes of the importance ranking.
    Nested,
}

/// Every tunable of the pipeline. Serialized as a flat key/value TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Resampled length of every signal.
    pub m: usize,
    pub wavelet: WaveletKind,
    pub denoise_level_min: usize,
    pub denoise_level_max: usize,
    pub extension: ExtensionMode,
    pub threshold_mode: ThresholdMode,
    /// Min-max normalised level at which marker crossings are detected.
    pub marker_frac: f64,
    /// Increment ratio that counts as a slope change in the energy curve.
    pub elbow_threshold: f64,
    /// Level returned when no slope change is detected.
    pub fallback_level: usize,
    /// Coefficients with importance >= this fraction of the packet maximum are kept.
    pub importance_keep_fraction: f64,
    /// Packets whose largest raw importance is below this are flagged low-signal.
    pub importance_floor: f64,
    /// Count the primary split's own decrease in addition to the best surrogate.
    pub importance_include_primary: bool,
    pub cv_folds: usize,
    pub cv_repeats: usize,
    pub one_se_rule: bool,
    pub bootstrap_count: usize,
    pub seed: u64,
    /// A forward step keeps its packet only if CV cost improves by more than this.
    pub forward_margin: f64,
    pub min_node_size: usize,
    pub max_depth: usize,
    /// Rank packets on screened coefficients (true) or on full packets.
    pub rank_on_screened: bool,
    pub final_strategy: FinalStrategy,
    pub top_k: usize,
    pub max_prefix: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            m: 512,
            wavelet: WaveletKind::Sym4,
            denoise_level_min: 3,
            denoise_level_max: 5,
            extension: ExtensionMode::Periodic,
            threshold_mode: ThresholdMode::Soft,
            marker_frac: 0.5,
            elbow_threshold: 3.0,
            fallback_level: 5,
            importance_keep_fraction: 0.2,
            importance_floor: 1.0,
            importance_include_primary: true,
            cv_folds: 10,
            cv_repeats: 5,
            one_se_rule: false,
            bootstrap_count: 25,
            seed: 0,
            forward_margin: 0.0,
            min_node_size: 5,
            max_depth: 30,
            rank_on_screened: true,
            final_strategy: FinalStrategy::Nested,
            top_k: 5,
            max_prefix: 15,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("denoise_level_min", self.denoise_level_min),
            ("fallback_level", self.fallback_level),
            ("cv_folds", self.cv_folds),
            ("cv_repeats", self.cv_repeats),
            ("bootstrap_count", self.bootstrap_count),
            ("min_node_size", self.min_node_size),
            ("max_depth", self.max_depth),
            ("top_k", self.top_k),
            ("max_prefix", self.max_prefix),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if self.denoise_level_max < self.denoise_level_min {
            return Err(Error::Config(
                "denoise_level_max must be >= denoise_level_min".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        if !(self.importance_keep_fraction > 0.0 && self.importance_keep_fraction <= 1.0) {
            return Err(Error::Config(
                "importance_keep_fraction must lie in (0, 1]".into(),
            ));
        }
        if !(self.elbow_threshold > 1.0) {
            return Err(Error::Config("elbow_threshold must exceed 1".into()));
        }
        if !(self.marker_frac > 0.0 && self.marker_frac < 1.0) {
            return Err(Error::Config("marker_frac must lie in (0, 1)".into()));
        }
        if !(self.forward_margin >= 0.0) || !self.forward_margin.is_finite() {
            return Err(Error::Config("forward_margin must be >= 0".into()));
        }
        if !(self.importance_floor >= 0.0) {
            return Err(Error::Config("importance_floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        let trial = |id: &str, label| Trial {
            id: id.to_string(),
            label,
            signals: (0..3)
                .map(|_| Signal::sampled(vec![0.0, 1.0, 2.0]).unwrap())
                .collect(),
        };
        Dataset {
            trials: vec![trial("a", 1), trial("b", 2)],
            class_count: 2,
            variable_names: vec!["x1".into(), "x2".into(), "x3".into()],
            marker_start: 1,
            marker_end: 3,
        }
    }

    #[test]
    fn well_formed_dataset_has_no_violations() {
        assert!(validate_dataset(&tiny_dataset()).is_empty());
    }

    #[test]
    fn missing_signal_is_reported_against_the_trial() {
        let mut d = tiny_dataset();
        d.trials[1].signals.pop();
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("trial b"), "{v:?}");
    }

    #[test]
    fn label_zero_is_out_of_range() {
        let mut d = tiny_dataset();
        d.trials[0].label = 0;
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("label 0 out of range"), "{v:?}");
    }

    #[test]
    fn marker_indices_must_be_valid_and_distinct() {
        let mut d = tiny_dataset();
        d.marker_end = 1;
        assert!(validate_dataset(&d).iter().any(|m| m.contains("same variable")));
        d.marker_end = 4;
        assert!(validate_dataset(&d).iter().any(|m| m.contains("outside")));
    }

    #[test]
    fn signal_rejects_non_finite_and_length_mismatch() {
        assert!(Signal::sampled(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(Grid::unit(4), vec![1.0; 3]).is_err());
        assert!(Signal::new(Grid::raw(0.0, 0.0, 2), vec![1.0; 2]).is_err());
        assert!(Signal::new(Grid::unit(1), vec![1.0]).is_err());
    }

    #[test]
    fn unit_grid_times() {
        let g = Grid::unit(4);
        let t: Vec<f64> = (0..4).map(|i| g.time(i)).collect();
        assert_eq!(t, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn config_defaults_validate_and_reject_bad_knobs() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let bad = PipelineConfig {
            importance_keep_fraction: 0.0,
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            elbow_threshold: 1.0,
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            cv_folds: 0,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_parses_from_flat_toml() {
        let cfg: PipelineConfig =
            toml::from_str("m = 256\nwavelet = \"haar\"\nseed = 7\nfinal_strategy = \"top_k\"\n")
                .unwrap();
        assert_eq!(cfg.m, 256);
        assert_eq!(cfg.wavelet, WaveletKind::Haar);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.final_strategy, FinalStrategy::TopK);
        assert_eq!(cfg.cv_folds, 10);
        assert!(toml::from_str::<PipelineConfig>("bogus = 1").is_err());
    }
}
