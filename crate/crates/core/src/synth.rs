//! Seeded synthetic benchmark with planted discriminant variables.
//!
//! Each variable has a smooth template (a few logistic ramps and Gaussian
//! bumps) defined on the normalised time `u` of the active window. Trials
//! jitter the template, add white noise and hold the end values outside the
//! window. Planted variables carry one extra feature whose location,
//! height or steepness depends on the class through a per-class contrast.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::types::{Dataset, Grid, Signal, Trial, DEFAULT_MARKER_END, DEFAULT_MARKER_START, RAW_SAMPLING_HZ};

/// Samples kept before the window start and after its end.
const WINDOW_MARGIN: usize = 20;
const MARKER_NOISE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    /// A bump whose position moves with the class.
    BumpLocationShift,
    /// A bump whose height changes with the class.
    AmplitudeShift,
    /// A ramp whose steepness changes with the class.
    SlopeShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVariable {
    /// 1-based variable number.
    pub variable: usize,
    pub effect: EffectKind,
    /// Effect multiplier for each class.
    pub contrast: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSpec {
    pub n: usize,
    pub variable_count: usize,
    pub class_frequencies: Vec<f64>,
    pub planted: Vec<PlantedVariable>,
    pub effect_size: f64,
    /// Standard deviation of the white noise added to every variable.
    pub noise_sigma: f64,
    pub raw_len_range: (usize, usize),
    pub window_len_range: (usize, usize),
    pub dt: f64,
    pub marker_start: usize,
    pub marker_end: usize,
    /// Non-discriminant variable with strong high-frequency content.
    pub high_frequency_variable: Option<usize>,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            n: 114,
            variable_count: 21,
            class_frequencies: vec![0.33, 0.17, 0.17, 0.18, 0.15],
            // Each contrast separates a different pair of neighbouring classes,
            // so all three variables are needed to tell the five classes apart.
            planted: vec![
                PlantedVariable {
                    variable: 4,
                    effect: EffectKind::BumpLocationShift,
                    contrast: vec![0.0, 1.0, 1.0, 1.0, 2.0],
                },
                PlantedVariable {
                    variable: 14,
                    effect: EffectKind::AmplitudeShift,
                    contrast: vec![0.0, 0.0, 1.0, 1.0, 1.0],
                },
                PlantedVariable {
                    variable: 17,
                    effect: EffectKind::SlopeShift,
                    contrast: vec![0.0, 0.0, 0.0, 1.0, 1.0],
                },
            ],
            effect_size: 1.3,
            noise_sigma: 0.05,
            raw_len_range: (600, 5000),
            window_len_range: (300, 700),
            dt: 1.0 / RAW_SAMPLING_HZ,
            marker_start: DEFAULT_MARKER_START,
            marker_end: DEFAULT_MARKER_END,
            high_frequency_variable: Some(2),
        }
    }
}

impl PlantSpec {
    pub fn class_count(&self) -> usize {
        self.class_frequencies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        let j = self.variable_count;
        if self.n == 0 || j < 2 {
            return bad(format!("need n >= 1 and at least 2 variables, got n={} J={j}", self.n));
        }
        let k = self.class_count();
        if k == 0 || self.class_frequencies.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return bad("class frequencies must be positive".into());
        }
        let total: f64 = self.class_frequencies.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("class frequencies sum to {total}"));
        }
        for (name, v) in [("start", self.marker_start), ("end", self.marker_end)] {
            if v == 0 || v > j {
                return bad(format!("{name} marker {v} outside 1..={j}"));
            }
        }
        if self.marker_start == self.marker_end {
            return bad("markers must be distinct variables".into());
        }
        let mut used = vec![self.marker_start, self.marker_end];
        if let Some(h) = self.high_frequency_variable {
            if h == 0 || h > j || used.contains(&h) {
                return bad(format!("high-frequency variable {h} is invalid or clashes with a marker"));
            }
            used.push(h);
        }
        for p in &self.planted {
            if p.variable == 0 || p.variable > j || used.contains(&p.variable) {
                return bad(format!("planted variable {} is out of range or already used", p.variable));
            }
            if p.contrast.len() != k {
                return bad(format!("planted variable {} has {} contrasts for {k} classes", p.variable, p.contrast.len()));
            }
            used.push(p.variable);
        }
        if !(self.effect_size >= 0.0 && self.noise_sigma >= 0.0 && self.dt > 0.0) {
            return bad("effect size and noise must be nonnegative, dt positive".into());
        }
        let (rlo, rhi) = self.raw_len_range;
        let (wlo, whi) = self.window_len_range;
        if rlo > rhi || wlo > whi || wlo < 16 {
            return bad(format!("bad length ranges raw {rlo}..{rhi} window {wlo}..{whi}"));
        }
        if wlo + 2 * WINDOW_MARGIN > rlo {
            return bad(format!(
                "a window of {wlo} samples plus margins does not fit in a raw trial of {rlo} samples"
            ));
        }
        Ok(())
    }
}

/// What the generator planted, for checking recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub effect_size: f64,
    pub planted: Vec<PlantedVariable>,
    pub high_frequency_variable: Option<usize>,
    pub class_counts: Vec<usize>,
    /// Inclusive active window of each trial, 0-based raw sample indices.
    pub windows: Vec<(usize, usize)>,
}

impl GroundTruth {
    pub fn planted_variables(&self) -> Vec<usize> {
        self.planted.iter().map(|p| p.variable).collect()
    }
}

/// Class sizes by largest-remainder rounding of `n * frequency`.
pub fn class_sizes(n: usize, freqs: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = freqs.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..freqs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    sizes
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ramp,
    Bump,
}

#[derive(Debug, Clone, Copy)]
struct Component {
    shape: Shape,
    center: f64,
    width: f64,
    amplitude: f64,
}

impl Component {
    fn eval(&self, u: f64) -> f64 {
        let z = (u - self.center) / self.width;
        match self.shape {
            Shape::Ramp => self.amplitude / (1.0 + (-z).exp()),
            Shape::Bump => self.amplitude * (-0.5 * z * z).exp(),
        }
    }

    fn jittered(&self, rng: &mut ChaCha8Rng) -> Component {
        Component {
            center: self.center + 0.02 * normal(rng),
            width: self.width * (1.0 + 0.1 * normal(rng)).max(0.5),
            amplitude: self.amplitude * (1.0 + 0.1 * normal(rng)),
            ..*self
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn template(rng: &mut ChaCha8Rng) -> Vec<Component> {
    let count = rng.random_range(3..=6);
    (0..count)
        .map(|_| Component {
            shape: if rng.random_bool(0.5) { Shape::Ramp } else { Shape::Bump },
            center: rng.random_range(0.1..0.9),
            width: rng.random_range(0.05..0.2),
            amplitude: normal(rng),
        })
        .collect()
}

/// The class-dependent feature of a planted variable for one trial.
fn planted_component(effect: EffectKind, g: f64, size: f64, rng: &mut ChaCha8Rng) -> Component {
    match effect {
        EffectKind::BumpLocationShift => Component {
            shape: Shape::Bump,
            center: 0.3 + 0.08 * size * g + 0.02 * normal(rng),
            width: 0.06,
            amplitude: 1.0 + 0.1 * normal(rng),
        },
        EffectKind::AmplitudeShift => Component {
            shape: Shape::Bump,
            center: 0.55 + 0.02 * normal(rng),
            width: 0.08,
            amplitude: (1.0 + 0.6 * size * g) * (1.0 + 0.15 * normal(rng)),
        },
        EffectKind::SlopeShift => Component {
            shape: Shape::Ramp,
            center: 0.75 + 0.02 * normal(rng),
            width: 0.08 / (1.0 + 1.5 * size * g) * (1.0 + 0.1 * normal(rng)).max(0.5),
            amplitude: 1.0 + 0.1 * normal(rng),
        },
    }
}

struct Layout {
    len: usize,
    start: usize,
    end: usize,
}

fn draw_layout(spec: &PlantSpec, rng: &mut ChaCha8Rng) -> Layout {
    let (rlo, rhi) = spec.raw_len_range;
    let (wlo, whi) = spec.window_len_range;
    let len = rng.random_range(rlo..=rhi);
    let w = rng.random_range(wlo..=whi.min(len - 2 * WINDOW_MARGIN));
    let start = rng.random_range(WINDOW_MARGIN..=len - WINDOW_MARGIN - w);
    Layout {
        len,
        start,
        end: start + w - 1,
    }
}

fn sample_window(layout: &Layout, f: impl Fn(f64) -> f64, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let span = (layout.end - layout.start) as f64;
    (0..layout.len)
        .map(|i| {
            let u = (i as f64 - layout.start as f64) / span;
            f(u.clamp(0.0, 1.0)) + sigma * normal(rng)
        })
        .collect()
}

/// Draws a dataset from `spec`. Identical `(spec, seed)` give identical output.
pub fn generate(spec: &PlantSpec, seed: u64) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let j = spec.variable_count;
    let sizes = class_sizes(spec.n, &spec.class_frequencies);
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k + 1, c))
        .collect();
    labels.shuffle(&mut seed::rng(seed, seed::stream::SYNTH_LABELS, 0));
    let templates: Vec<Vec<Component>> = (0..j)
        .map(|v| template(&mut seed::rng(seed, seed::stream::SYNTH_TEMPLATE, v as u64)))
        .collect();
    let trials: Vec<(Trial, (usize, usize))> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut rng = seed::rng(seed, seed::stream::SYNTH_TRIAL, i as u64);
            let layout = draw_layout(spec, &mut rng);
            let grid = Grid::raw(0.0, spec.dt, layout.len);
            let signals = (1..=j)
                .map(|v| {
                    let values = if v == spec.marker_start {
                        (0..layout.len)
                            .map(|t| f64::from(u8::from(t >= layout.start)) + MARKER_NOISE * normal(&mut rng))
                            .collect()
                    } else if v == spec.marker_end {
                        (0..layout.len)
                            .map(|t| f64::from(u8::from(t < layout.end)) + MARKER_NOISE * normal(&mut rng))
                            .collect()
                    } else {
                        let mut parts: Vec<Component> =
                            templates[v - 1].iter().map(|c| c.jittered(&mut rng)).collect();
                        if let Some(p) = spec.planted.iter().find(|p| p.variable == v) {
                            parts.push(planted_component(p.effect, p.contrast[label - 1], spec.effect_size, &mut rng));
                        }
                        let hf = spec.high_frequency_variable == Some(v);
                        let phase = rng.random_range(0.0..std::f64::consts::TAU);
                        let sigma = if hf { 4.0 * spec.noise_sigma } else { spec.noise_sigma };
                        let f = |u: f64| {
                            let base: f64 = parts.iter().map(|c| c.eval(u)).sum();
                            if hf {
                                base + 0.5 * (std::f64::consts::TAU * 40.0 * u + phase).sin()
                            } else {
                                base
                            }
                        };
                        sample_window(&layout, f, sigma, &mut rng)
                    };
                    Signal::new(grid, values)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                Trial {
                    id: format!("trial-{:03}", i + 1),
                    label,
                    signals,
                },
                (layout.start, layout.end),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (trials, windows): (Vec<_>, Vec<_>) = trials.into_iter().unzip();
    let dataset = Dataset {
        trials,
        class_count: spec.class_count(),
        variable_names: (1..=j).map(|v| format!("v{v:02}")).collect(),
        marker_start: spec.marker_start,
        marker_end: spec.marker_end,
    };
    let truth = GroundTruth {
        seed,
        effect_size: spec.effect_size,
        planted: spec.planted.clone(),
        high_frequency_variable: spec.high_frequency_variable,
        class_counts: sizes,
        windows,
    };
    Ok((dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::detect_active_window;
    use crate::types::validate_dataset;

    fn small() -> PlantSpec {
        PlantSpec {
            n: 20,
            raw_len_range: (600, 900),
            ..PlantSpec::default()
        }
    }

    #[test]
    fn default_class_counts() {
        assert_eq!(class_sizes(114, &PlantSpec::default().class_frequencies), vec![38, 19, 19, 21, 17]);
        let (d, t) = generate(&PlantSpec::default(), 1).unwrap();
        assert_eq!(d.class_counts(), vec![38, 19, 19, 21, 17]);
        assert_eq!(t.class_counts, d.class_counts());
    }

    #[test]
    fn generated_data_is_valid_and_reproducible() {
        let (a, ta) = generate(&small(), 5).unwrap();
        assert!(validate_dataset(&a).is_empty(), "{:?}", validate_dataset(&a));
        let (b, tb) = generate(&small(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&small(), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn markers_recover_planted_windows() {
        let (d, t) = generate(&small(), 9).unwrap();
        for (trial, &(s, e)) in d.trials.iter().zip(&t.windows) {
            let w = detect_active_window(
                &trial.signals[d.marker_start - 1],
                &trial.signals[d.marker_end - 1],
                0.5,
            )
            .unwrap();
            assert_eq!((w.start, w.end), (s, e));
            assert!((300..=700).contains(&w.len()));
            let len = trial.signals[0].len();
            assert!((600..=900).contains(&len));
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut s = PlantSpec::default();
        s.raw_len_range = (300, 400);
        assert!(matches!(generate(&s, 0), Err(Error::InfeasibleSpec(_))));
        let mut s = PlantSpec::default();
        s.planted[0].variable = 8;
        assert!(matches!(generate(&s, 0), Err(Error::InfeasibleSpec(_))));
        let mut s = PlantSpec::default();
        s.class_frequencies = vec![0.5, 0.6];
        assert!(s.validate().is_err());
    }
}
