//! Dataset ingestion, report serialization and heatmap rendering.

pub mod dataset;
pub mod heatmap;
pub mod report;

pub use dataset::{parse_dataset, parse_dataset_str, CellRecord, Dataset, LabelDictionary};
pub use heatmap::render_heatmap;
pub use report::{
    read_report, write_report, AnalysisConfig, AnalysisReport, MatrixRecord, PairRecord,
    TruthReport,
};
