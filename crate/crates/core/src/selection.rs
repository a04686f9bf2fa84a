//! Stepwise selection of discriminant variables and coefficients.
//!
//! 1. Screen each coefficient packet with bagged tree importance.
//! 2. Rank the screened packets by the cross-validated cost of a tree on each.
//! 3. Add packets in rank order, keeping one only if it lowers the CV cost of
//!    the union by more than `forward_margin`.
//! 4. Take the step with the lowest CV cost.
//! 5. Rank that model's coefficients by bagged importance and keep either the
//!    top `K` or the best-validated prefix of the ranking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{
    bagged_importance, fit_cv, BagParams, CostMatrix, CvParams, FeatureMatrix, GrowParams, Importance,
};
use crate::compression::CoefficientPacket;
use crate::error::{Error, Result, StageContext};
use crate::types::{FinalStrategy, PipelineConfig};

/// Describes the phase-3 inclusion rule in reports.
pub const FORWARD_TEST: &str =
    "a packet is kept iff the cross-validated cost of the union is below the best cost so far minus forward_margin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedPacket {
    pub variable: usize,
    pub name: String,
    pub level: usize,
    /// Bagged importance of every coefficient of the packet.
    pub importance: Importance,
    /// Indices into the packet of the kept coefficients.
    pub kept: Vec<usize>,
    pub kept_ids: Vec<String>,
    /// Largest raw importance fell below `importance_floor`.
    pub low_signal: bool,
    /// Not passed on to ranking (low signal or nothing kept).
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPacket {
    pub rank: usize,
    pub variable: usize,
    pub name: String,
    pub width: usize,
    pub cv_cost: f64,
    pub cv_per_repeat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStep {
    /// 1-based step number.
    pub step: usize,
    pub candidate: usize,
    /// CV cost of the included packets plus the candidate.
    pub candidate_cv_cost: f64,
    pub decision: Decision,
    /// Packets included after the decision.
    pub included: Vec<usize>,
    /// CV cost of `included`.
    pub cv_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientImportance {
    pub rank: usize,
    pub id: String,
    pub raw: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    /// Number of leading coefficients of the importance ranking.
    pub size: usize,
    pub ids: Vec<String>,
    pub leaves: usize,
    /// Training misclassifications of the CV-pruned tree.
    pub apparent_errors: usize,
    /// Training cost per sample of the CV-pruned tree.
    pub apparent_cost: f64,
    pub cv_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSelection {
    pub strategy: FinalStrategy,
    pub importance: Vec<CoefficientImportance>,
    pub refinement: Vec<RefinementRow>,
    /// Size of the retained prefix.
    pub chosen_size: usize,
    pub criteria: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub forward_test: String,
    pub screened: Vec<ScreenedPacket>,
    pub ranking: Vec<RankedPacket>,
    pub steps: Vec<ModelStep>,
    /// Index into `steps` of the chosen model.
    pub chosen_step: Option<usize>,
    pub chosen_variables: Vec<usize>,
    pub chosen_cv_cost: Option<f64>,
    pub finalization: Option<FinalSelection>,
    pub final_criteria: Vec<String>,
    /// Set when the pipeline could not produce a model, with the reason.
    pub degenerate: Option<String>,
}

/// Labels, cost matrix and tree settings shared by all phases.
pub struct Problem<'a> {
    pub labels: &'a [usize],
    pub cost: CostMatrix,
    pub cfg: &'a PipelineConfig,
}

impl<'a> Problem<'a> {
    pub fn new(labels: &'a [usize], class_count: usize, cfg: &'a PipelineConfig) -> Self {
        Problem {
            labels,
            cost: CostMatrix::ordinal(class_count),
            cfg,
        }
    }

    fn grow_params(&self) -> GrowParams {
        GrowParams {
            min_node_size: self.cfg.min_node_size,
            max_depth: self.cfg.max_depth,
            max_surrogates: 5,
        }
    }

    fn cv_params(&self) -> CvParams {
        CvParams {
            folds: self.cfg.cv_folds,
            repeats: self.cfg.cv_repeats,
            seed: self.cfg.seed,
            one_se_rule: self.cfg.one_se_rule,
            grow: self.grow_params(),
        }
    }

    fn bag_params(&self) -> BagParams {
        BagParams {
            bootstraps: self.cfg.bootstrap_count,
            seed: self.cfg.seed,
            include_primary: self.cfg.importance_include_primary,
            grow: self.grow_params(),
        }
    }
}

fn packet_matrix(p: &CoefficientPacket, cols: &[usize]) -> Result<FeatureMatrix> {
    FeatureMatrix::new(
        cols.iter().map(|&k| p.coeff_ids[k].clone()).collect(),
        cols.iter().map(|&k| p.column(k)).collect(),
    )
}

fn union_matrix(packets: &[&CoefficientPacket], screened: &[&ScreenedPacket]) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix::new(Vec::new(), Vec::new())?;
    for (p, s) in packets.iter().zip(screened) {
        m = m.hstack(&packet_matrix(p, &s.kept)?)?;
    }
    Ok(m)
}

/// Phase 1: bagged importance per packet; keeps coefficients whose importance
/// reaches `importance_keep_fraction` of the packet maximum.
pub fn phase1_screen(packets: &[CoefficientPacket], names: &[String], pb: &Problem) -> Result<Vec<ScreenedPacket>> {
    let alpha = pb.cfg.importance_keep_fraction;
    packets
        .par_iter()
        .map(|p| {
            let all: Vec<usize> = (0..p.width()).collect();
            let x = packet_matrix(p, &all)?;
            let importance = bagged_importance(&x, pb.labels, &pb.cost, &pb.bag_params())?;
            let max = importance.max_raw();
            let kept: Vec<usize> = if max > 0.0 {
                all.into_iter()
                    .filter(|&k| importance.raw[k] >= alpha * max)
                    .collect()
            } else {
                Vec::new()
            };
            let low_signal = max < pb.cfg.importance_floor;
            Ok(ScreenedPacket {
                variable: p.variable,
                name: names.get(p.variable - 1).cloned().unwrap_or_default(),
                level: p.level,
                kept_ids: kept.iter().map(|&k| p.coeff_ids[k].clone()).collect(),
                excluded: low_signal || kept.is_empty(),
                kept,
                importance,
                low_signal,
            })
        })
        .collect()
}

/// Phase 2: CV cost of one tree per retained packet, best first. Ties go to
/// the narrower packet, then the lower variable number.
pub fn phase2_rank(packets: &[CoefficientPacket], screened: &[ScreenedPacket], pb: &Problem) -> Result<Vec<RankedPacket>> {
    let mut ranked = packets
        .par_iter()
        .zip(screened)
        .filter(|(_, s)| !s.excluded)
        .map(|(p, s)| {
            let cols: Vec<usize> = if pb.cfg.rank_on_screened {
                s.kept.clone()
            } else {
                (0..p.width()).collect()
            };
            let x = packet_matrix(p, &cols)?;
            let (_, cv) = fit_cv(&x, pb.labels, &pb.cost, &CvParams {
                grow: GrowParams { max_surrogates: 0, ..pb.grow_params() },
                ..pb.cv_params()
            })?;
            Ok(RankedPacket {
                rank: 0,
                variable: p.variable,
                name: s.name.clone(),
                width: cols.len(),
                cv_cost: cv.cost,
                cv_per_repeat: cv.per_repeat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        a.cv_cost
            .total_cmp(&b.cv_cost)
            .then(a.width.cmp(&b.width))
            .then(a.variable.cmp(&b.variable))
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

/// Phase 3: forward inclusion in rank order.
pub fn phase3_forward(
    packets: &[CoefficientPacket],
    screened: &[ScreenedPacket],
    ranking: &[RankedPacket],
    pb: &Problem,
) -> Result<Vec<ModelStep>> {
    let find = |v: usize| -> Result<usize> {
        packets
            .iter()
            .position(|p| p.variable == v)
            .ok_or_else(|| Error::Internal(format!("ranked variable {v} has no packet")))
    };
    let cv = CvParams {
        grow: GrowParams { max_surrogates: 0, ..pb.grow_params() },
        ..pb.cv_params()
    };
    let mut included: Vec<usize> = Vec::new();
    let mut best = f64::INFINITY;
    let mut steps = Vec::with_capacity(ranking.len());
    for (i, r) in ranking.iter().enumerate() {
        let mut candidate = included.clone();
        candidate.push(r.variable);
        let idx = candidate.iter().map(|&v| find(v)).collect::<Result<Vec<_>>>()?;
        let ps: Vec<&CoefficientPacket> = idx.iter().map(|&k| &packets[k]).collect();
        let ss: Vec<&ScreenedPacket> = idx.iter().map(|&k| &screened[k]).collect();
        let x = union_matrix(&ps, &ss)?;
        let (_, res) = fit_cv(&x, pb.labels, &pb.cost, &cv)?;
        let decision = if res.cost < best - pb.cfg.forward_margin {
            best = res.cost;
            included = candidate;
            Decision::Kept
        } else {
            Decision::Dropped
        };
        steps.push(ModelStep {
            step: i + 1,
            candidate: r.variable,
            candidate_cv_cost: res.cost,
            decision,
            included: included.clone(),
            cv_cost: best,
        });
    }
    Ok(steps)
}

/// Phase 4: index of the lowest cost; ties go to the earlier step, which has
/// no more packets than any later one.
pub fn phase4_select(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in costs.iter().enumerate() {
        if best.is_none_or(|b| c < costs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Phase 5: importance ranking of the chosen model's coefficients and the
/// nested-prefix refinement table.
pub fn phase5_finalize(x: &FeatureMatrix, pb: &Problem, strategy: FinalStrategy) -> Result<FinalSelection> {
    let imp = bagged_importance(x, pb.labels, &pb.cost, &pb.bag_params())?;
    let order = imp.ranking();
    let importance: Vec<CoefficientImportance> = order
        .iter()
        .enumerate()
        .map(|(r, &k)| CoefficientImportance {
            rank: r + 1,
            id: imp.names[k].clone(),
            raw: imp.raw[k],
            scaled: imp.scaled[k],
        })
        .collect();
    let depth = order.len().min(pb.cfg.max_prefix);
    let cv = pb.cv_params();
    let refinement = (1..=depth)
        .into_par_iter()
        .map(|size| {
            let xs = x.select_columns(&order[..size]);
            let (tree, res) = fit_cv(&xs, pb.labels, &pb.cost, &cv)?;
            let step = res.chosen_step;
            let apparent_errors = (0..xs.n())
                .filter(|&i| tree.predict_at(&xs.row(i), step) != pb.labels[i])
                .count();
            Ok(RefinementRow {
                size,
                ids: xs.names().to_vec(),
                leaves: tree.leaves(Some(step)).len(),
                apparent_errors,
                apparent_cost: tree.training_cost(Some(step)),
                cv_cost: res.cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen_size = match strategy {
        FinalStrategy::TopK => pb.cfg.top_k.min(order.len()),
        FinalStrategy::Nested => {
            let costs: Vec<f64> = refinement.iter().map(|r| r.cv_cost).collect();
            phase4_select(&costs).map_or(0, |i| i + 1)
        }
    };
    Ok(FinalSelection {
        strategy,
        criteria: importance[..chosen_size].iter().map(|c| c.id.clone()).collect(),
        importance,
        refinement,
        chosen_size,
    })
}

/// All five phases on compressed packets.
pub fn select(
    packets: &[CoefficientPacket],
    names: &[String],
    labels: &[usize],
    class_count: usize,
    cfg: &PipelineConfig,
) -> Result<SelectionReport> {
    let pb = Problem::new(labels, class_count, cfg);
    if let Some(p) = packets.iter().find(|p| p.n() != labels.len()) {
        return Err(Error::InvalidDataset(format!(
            "packet for variable {} has {} rows for {} labels",
            p.variable,
            p.n(),
            labels.len()
        )));
    }
    let screened = phase1_screen(packets, names, &pb).stage("phase 1 screening")?;
    let mut report = SelectionReport {
        forward_test: FORWARD_TEST.to_string(),
        screened,
        ranking: Vec::new(),
        steps: Vec::new(),
        chosen_step: None,
        chosen_variables: Vec::new(),
        chosen_cv_cost: None,
        finalization: None,
        final_criteria: Vec::new(),
        degenerate: None,
    };
    if report.screened.iter().all(|s| s.excluded) {
        report.degenerate = Some("no packet carries importance above the floor".into());
        return Ok(report);
    }
    report.ranking = phase2_rank(packets, &report.screened, &pb).stage("phase 2 ranking")?;
    report.steps = phase3_forward(packets, &report.screened, &report.ranking, &pb).stage("phase 3 forward inclusion")?;
    let costs: Vec<f64> = report.steps.iter().map(|s| s.cv_cost).collect();
    let Some(chosen) = phase4_select(&costs) else {
        report.degenerate = Some("forward inclusion produced no model".into());
        return Ok(report);
    };
    report.chosen_step = Some(chosen);
    report.chosen_variables = report.steps[chosen].included.clone();
    report.chosen_cv_cost = Some(report.steps[chosen].cv_cost);
    let idx: Vec<usize> = report
        .chosen_variables
        .iter()
        .map(|&v| packets.iter().position(|p| p.variable == v).expect("chosen packet exists"))
        .collect();
    let ps: Vec<&CoefficientPacket> = idx.iter().map(|&k| &packets[k]).collect();
    let ss: Vec<&ScreenedPacket> = idx.iter().map(|&k| &report.screened[k]).collect();
    let x = union_matrix(&ps, &ss)?;
    let fin = phase5_finalize(&x, &pb, cfg.final_strategy).stage("phase 5 finalisation")?;
    report.final_criteria = fin.criteria.clone();
    report.finalization = Some(fin);
    Ok(report)
}
