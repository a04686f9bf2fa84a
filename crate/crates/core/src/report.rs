//! The run report and its tabular views.

use serde::{Deserialize, Serialize};

use crate::compression::CompressionReport;
use crate::selection::{Decision, SelectionReport};
use crate::types::PipelineConfig;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: u32,
    pub config: PipelineConfig,
    pub n: usize,
    pub class_count: usize,
    pub class_counts: Vec<usize>,
    pub variable_names: Vec<String>,
    pub compression: CompressionReport,
    pub selection: SelectionReport,
}

impl PipelineReport {
    pub fn new(
        cfg: &PipelineConfig,
        labels: &[usize],
        class_count: usize,
        variable_names: &[String],
        compression: CompressionReport,
        selection: SelectionReport,
    ) -> Self {
        let mut class_counts = vec![0; class_count];
        for &l in labels {
            if (1..=class_count).contains(&l) {
                class_counts[l - 1] += 1;
            }
        }
        PipelineReport {
            version: REPORT_VERSION,
            config: cfg.clone(),
            n: labels.len(),
            class_count,
            class_counts,
            variable_names: variable_names.to_vec(),
            compression,
            selection,
        }
    }

    /// Ratio of the worst to the best phase-2 CV cost.
    pub fn ranking_cost_ratio(&self) -> Option<f64> {
        let r = &self.selection.ranking;
        let lo = r.first()?.cv_cost;
        let hi = r.last()?.cv_cost;
        (lo > 0.0).then(|| hi / lo)
    }

    pub fn tables(&self) -> Vec<Table> {
        vec![
            self.eq_curves(),
            self.packet_ranking(),
            self.forward_steps(),
            self.refinement_table(),
            self.importance(),
        ]
    }

    pub fn eq_curves(&self) -> Table {
        eq_curves_table(&self.compression)
    }

    pub fn packet_ranking(&self) -> Table {
        let header = ["rank", "variable", "name", "width", "cv_cost"];
        let rows = self
            .selection
            .ranking
            .iter()
            .map(|r| vec![r.rank.to_string(), r.variable.to_string(), r.name.clone(), r.width.to_string(), num(&r.cv_cost)])
            .collect();
        Table::new("packet_ranking", header.map(String::from).to_vec(), rows)
    }

    pub fn forward_steps(&self) -> Table {
        let header = ["step", "candidate", "candidate_cv_cost", "decision", "included", "cv_cost"];
        let rows = self
            .selection
            .steps
            .iter()
            .map(|s| {
                vec![
                    s.step.to_string(),
                    s.candidate.to_string(),
                    num(&s.candidate_cv_cost),
                    match s.decision {
                        Decision::Kept => "kept".into(),
                        Decision::Dropped => "dropped".into(),
                    },
                    s.included.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                    num(&s.cv_cost),
                ]
            })
            .collect();
        Table::new("forward_steps", header.map(String::from).to_vec(), rows)
    }

    pub fn refinement_table(&self) -> Table {
        let header = ["size", "added", "leaves", "apparent_errors", "apparent_cost", "cv_cost", "chosen"];
        let rows = match &self.selection.finalization {
            None => Vec::new(),
            Some(f) => f
                .refinement
                .iter()
                .map(|r| {
                    vec![
                        r.size.to_string(),
                        r.ids.last().cloned().unwrap_or_default(),
                        r.leaves.to_string(),
                        r.apparent_errors.to_string(),
                        num(&r.apparent_cost),
                        num(&r.cv_cost),
                        (r.size == f.chosen_size).to_string(),
                    ]
                })
                .collect(),
        };
        Table::new("refinement_table", header.map(String::from).to_vec(), rows)
    }

    pub fn importance(&self) -> Table {
        let header = ["rank", "coefficient", "raw", "scaled", "selected"];
        let rows = match &self.selection.finalization {
            None => Vec::new(),
            Some(f) => f
                .importance
                .iter()
                .map(|c| {
                    vec![
                        c.rank.to_string(),
                        c.id.clone(),
                        num(&c.raw),
                        num(&c.scaled),
                        f.criteria.contains(&c.id).to_string(),
                    ]
                })
                .collect(),
        };
        Table::new("importance", header.map(String::from).to_vec(), rows)
    }
}

/// Energy curve and chosen level of every variable.
pub fn eq_curves_table(c: &CompressionReport) -> Table {
    let depth = c.variables.iter().map(|v| v.eq_curve.len()).max().unwrap_or(0);
    let mut header = vec!["variable".to_string(), "name".into(), "level".into(), "fallback".into()];
    header.extend((1..=depth).map(|p| format!("eq_{p}")));
    let rows = c
        .variables
        .iter()
        .map(|v| {
            let mut row = vec![
                v.variable.to_string(),
                v.name.clone(),
                v.choice.level.to_string(),
                v.choice.fallback.to_string(),
            ];
            row.extend(v.eq_curve.iter().map(num));
            row.resize(header.len(), String::new());
            row
        })
        .collect();
    Table::new("eq_curves", header, rows)
}

fn num(v: &f64) -> String {
    format!("{v:?}")
}

/// A named table of string cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        Table {
            name: name.to_string(),
            header,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    /// Rows as objects keyed by column name.
    pub fn to_json(&self) -> serde_json::Value {
        self.rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .cloned()
                    .zip(r.iter().cloned().map(serde_json::Value::String))
                    .collect::<serde_json::Map<_, _>>()
            })
            .collect::<Vec<_>>()
            .into()
    }
}
