//! Delimited cell tables: `time, cell_type, f1..fK`, one row per cell.
//!
//! The delimiter (comma or tab) is taken from the header line. Distinct time
//! values are sorted and mapped to consecutive indices; uneven spacing is
//! logged but otherwise ignored. Types are numbered in order of first
//! appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::{Marginal, Snapshot};
use crate::error::{Error, Result};
use crate::reduce::{FeatureSummary, Reducer};
use crate::uot::CostMatrix;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelDictionary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for LabelDictionary {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::from_names(names)
    }
}

impl From<LabelDictionary> for Vec<String> {
    fn from(d: LabelDictionary) -> Self {
        d.names
    }
}

impl LabelDictionary {
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut dict = Self::default();
        for n in names {
            if dict.index.contains_key(&n) {
                return Err(Error::Input(format!("duplicate type label {n:?}")));
            }
            dict.intern(&n);
        }
        Ok(dict)
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub time_index: usize,
    pub cell_type: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: LabelDictionary,
    /// Sorted distinct raw time values; position = time index.
    pub times: Vec<f64>,
    pub feature_names: Vec<String>,
    pub records: Vec<CellRecord>,
}

pub fn parse_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

pub fn parse_dataset_str(text: &str) -> Result<Dataset> {
    read_dataset(text.as_bytes())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut reader = BufReader::new(reader);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| parse_err(1, e.to_string()))?;
    if header.trim().is_empty() {
        return Err(parse_err(1, "empty file: expected a header row"));
    }
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(header.as_bytes().chain(reader));

    let mut rows = csv.records();
    let head = rows
        .next()
        .ok_or_else(|| parse_err(1, "missing header row"))?
        .map_err(|e| parse_err(1, e.to_string()))?;
    if head.len() < 3
        || !head[0].eq_ignore_ascii_case("time")
        || !head[1].eq_ignore_ascii_case("cell_type")
    {
        return Err(parse_err(
            1,
            "header must be `time, cell_type, f1, ..., fK` with at least one feature column",
        ));
    }
    let width = head.len() - 2;
    let feature_names: Vec<String> = head.iter().skip(2).map(str::to_owned).collect();

    let mut labels = LabelDictionary::default();
    let mut raw: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != width + 2 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", width + 2, row.len()),
            ));
        }
        let time: f64 = row[0]
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_err(line, format!("time {:?} is not a finite number", &row[0])))?;
        if row[1].is_empty() {
            return Err(parse_err(line, "empty cell_type"));
        }
        let cell_type = labels.intern(&row[1]);
        let features = row
            .iter()
            .skip(2)
            .enumerate()
            .map(|(i, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        parse_err(
                            line,
                            format!(
                                "feature {:?} value {v:?} is not a finite number",
                                feature_names[i]
                            ),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        raw.push((time, cell_type, features));
    }
    if raw.is_empty() {
        return Err(parse_err(2, "no data rows after the header"));
    }

    let mut times: Vec<f64> = raw.iter().map(|r| r.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    warn_on_gaps(&times);
    let records = raw
        .into_iter()
        .map(|(time, cell_type, features)| CellRecord {
            time_index: times.partition_point(|&t| t < time),
            cell_type,
            features,
        })
        .collect();
    Ok(Dataset {
        labels,
        times,
        feature_names,
        records,
    })
}

fn warn_on_gaps(times: &[f64]) {
    if times.len() < 3 {
        return;
    }
    let step = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0) {
            log::warn!(
                "time points are unevenly spaced ({} → {}); they are treated as adjacent steps",
                w[0],
                w[1]
            );
            return;
        }
    }
}

impl Dataset {
    pub fn n_types(&self) -> usize {
        self.labels.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn snapshots(&self) -> Result<Vec<Snapshot>> {
        let mut by_time = vec![Vec::new(); self.n_times()];
        for r in &self.records {
            by_time[r.time_index].push(r.cell_type);
        }
        by_time
            .into_iter()
            .enumerate()
            .map(|(t, labels)| Snapshot::new(t, labels))
            .collect()
    }

    pub fn marginals(&self) -> Result<Vec<Marginal>> {
        self.snapshots()?
            .iter()
            .map(|s| s.empirical_marginal(self.n_types()))
            .collect()
    }

    pub fn summary(&self) -> FeatureSummary {
        let mut s = FeatureSummary::new(self.n_types(), self.width());
        for r in &self.records {
            s.add(r.cell_type, &r.features);
        }
        s
    }

    fn namer(&self) -> impl Fn(usize) -> String + '_ {
        |j| self.labels.name(j).to_owned()
    }

    /// Per-type centroids pooled over all time points.
    pub fn compute_centroids(&self) -> Result<Vec<Vec<f64>>> {
        self.summary().centroids(&self.namer())
    }

    pub fn cost(&self, reducer: Reducer) -> Result<CostMatrix> {
        self.summary().cost(reducer, &self.namer())
    }
}
