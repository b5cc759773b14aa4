//! The analysis report: one JSON document with an explicit schema version.
//!
//! Matrices are stored row-major with their dimensions. Floats are written
//! in shortest round-trip form and parsed back exactly, so a report survives
//! `write → read` bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::changepoint::{ChangePointReport, PeakDetector};
use crate::error::{Error, Result};
use crate::io::dataset::LabelDictionary;
use crate::reduce::Reducer;
use crate::uot::SolverConfig;

pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Input(format!(
                "matrix record holds {} values for {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub solver: SolverConfig,
    pub smoothing: f64,
    pub detector: PeakDetector,
    pub reducer: Reducer,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            smoothing: crate::distributions::DEFAULT_SMOOTHING,
            detector: PeakDetector::default(),
            reducer: Reducer::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// Source time index; the pair is `(t, t + 1)`.
    pub t: usize,
    pub plan: MatrixRecord,
    pub w: f64,
    /// `H^{t+1|t}`.
    pub forward: MatrixRecord,
    /// `H^{t|t+1}`.
    pub backward: MatrixRecord,
    pub forward_degenerate: Vec<usize>,
    pub backward_degenerate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u64,
    pub labels: LabelDictionary,
    /// Raw time value of each time index.
    pub times: Vec<f64>,
    pub marginals: Vec<Vec<f64>>,
    pub cost: MatrixRecord,
    pub pairs: Vec<PairRecord>,
    pub change_points: ChangePointReport,
    pub config: AnalysisConfig,
}

impl AnalysisReport {
    pub fn w_values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.w).collect()
    }

    fn check(&self) -> Result<()> {
        for (i, p) in self.pairs.iter().enumerate() {
            if p.t != i {
                return Err(Error::Input(format!(
                    "report pairs are not contiguous: position {i} holds t = {}",
                    p.t
                )));
            }
        }
        Ok(())
    }
}

/// Ground truth written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub schema_version: u64,
    pub config: crate::simulation::SimConfig,
    pub lambda: f64,
    pub labels: Vec<String>,
    pub change_times: Vec<usize>,
    pub marginals: Vec<Vec<f64>>,
    pub cost: MatrixRecord,
    pub plans: Vec<MatrixRecord>,
}

impl TruthReport {
    pub fn new(
        config: &crate::simulation::SimConfig,
        lambda: f64,
        truth: &crate::simulation::SimTruth,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config: config.clone(),
            lambda,
            labels: (0..config.d).map(crate::simulation::type_name).collect(),
            change_times: truth.change_times.clone(),
            marginals: truth.marginals.iter().map(|m| m.probs().to_vec()).collect(),
            cost: MatrixRecord::from(truth.cost.as_matrix()),
            plans: truth
                .plans
                .iter()
                .map(|p| MatrixRecord::from(p.entries()))
                .collect(),
        }
    }
}

pub fn report_to_string(report: &AnalysisReport) -> Result<String> {
    report.check()?;
    serde_json::to_string_pretty(report).map_err(|e| Error::Input(e.to_string()))
}

pub fn report_from_str(text: &str) -> Result<AnalysisReport> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing schema_version".into(),
        })?;
    if found != REPORT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    // Parse from the text rather than the `Value` so floats keep every bit.
    let report: AnalysisReport = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    report.check()?;
    Ok(report)
}

pub fn write_report(report: &AnalysisReport, path: &Path) -> Result<()> {
    let mut text = report_to_string(report)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<AnalysisReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    report_from_str(&text)
}
