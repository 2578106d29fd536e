//! Held-out cross-entropy, cloze prediction, and metric-space export.

mod cloze;
mod export;
mod procrustes;
mod xent;

pub use cloze::{
    cloze_accuracy, cloze_predict, cloze_predict_brute_force, make_cloze_instances, ClozeInstance, ClozeOutcome,
    ClozeReport, ClozeVariant,
};
pub use export::{export_metric_space, ExportRow, GridSpec, MetricSpaceExport, RowKind};
pub use procrustes::{procrustes_align, ProcrustesResult};
pub use xent::{cross_entropy, cross_entropy_process, log_partition, CrossEntropyReport, EvalSettings, PartitionInfo};

use serde::{Deserialize, Serialize};

/// Combined metrics written by the evaluation command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub test_languages: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_entropy: Option<CrossEntropyReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cloze: Vec<ClozeReport>,
    /// `(size, symbols)` of MAP inventories.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub map: Vec<(usize, Vec<String>)>,
}
