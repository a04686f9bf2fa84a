//! End-to-end run: preprocessing, compression and selection.

use crate::compression::{compress_dataset, CoefficientPacket, CompressionReport};
use crate::error::{Error, Result, StageContext};
use crate::preprocess::{preprocess_dataset, PreprocessAudit};
use crate::report::PipelineReport;
use crate::selection::select;
use crate::types::{validate_dataset, Dataset, PipelineConfig};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub audit: PreprocessAudit,
    pub packets: Vec<CoefficientPacket>,
    pub report: PipelineReport,
}

pub fn check_dataset(d: &Dataset) -> Result<()> {
    let problems = validate_dataset(d);
    if problems.is_empty() {
        Ok(())
    } else {
        let more = if problems.len() > 1 {
            format!(" (and {} more)", problems.len() - 1)
        } else {
            String::new()
        };
        Err(Error::InvalidDataset(format!("{}{more}", problems[0])))
    }
}

/// Selection stage on already compressed packets.
pub fn select_stage(
    packets: &[CoefficientPacket],
    compression: CompressionReport,
    variable_names: &[String],
    labels: &[usize],
    class_count: usize,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let selection = select(packets, variable_names, labels, class_count, cfg).stage("select")?;
    Ok(PipelineReport::new(cfg, labels, class_count, variable_names, compression, selection))
}

pub fn run_pipeline(d: &Dataset, cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    check_dataset(d)?;
    let (pre, audit) = preprocess_dataset(d, cfg)?;
    let (packets, compression) = compress_dataset(&pre, cfg)?;
    let report = select_stage(&packets, compression, &d.variable_names, &d.labels(), d.class_count, cfg)?;
    Ok(PipelineRun { audit, packets, report })
}
