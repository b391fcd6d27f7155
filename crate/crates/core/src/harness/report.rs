//! Metric rows and the report join.
//!
//! Reports are CSV with the header `method,prune_rate,seed,metric,value`.
//! Rows are sorted by method, then prune rate, then seed (numeric seeds
//! first in numeric order, then aggregate labels such as `mean` and `std`),
//! then metric name.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, std_dev};
use crate::error::{Error, Result};
use crate::selection::Audit;

pub const HEADER: &str = "method,prune_rate,seed,metric,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub prune_rate: f64,
    /// A numeric seed, or an aggregate label.
    pub seed: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(method: &str, prune_rate: f64, seed: u64, metric: &str, value: f64) -> Self {
        Self {
            method: method.to_string(),
            prune_rate,
            seed: seed.to_string(),
            metric: metric.to_string(),
            value,
        }
    }

    pub fn numeric_seed(&self) -> Option<u64> {
        self.seed.parse().ok()
    }
}

fn seed_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

pub fn sort_rows(rows: &mut [MetricRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.prune_rate.total_cmp(&b.prune_rate))
            .then_with(|| seed_order(&a.seed, &b.seed))
            .then_with(|| a.metric.cmp(&b.metric))
    });
}

/// Mean and sample standard deviation over numeric seeds for every
/// (method, prune rate, metric) group, labelled `mean` and `std`.
pub fn aggregate(rows: &[MetricRow]) -> Vec<MetricRow> {
    let mut groups: BTreeMap<(String, u64, String), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.numeric_seed().is_some()) {
        groups
            .entry((r.method.clone(), r.prune_rate.to_bits(), r.metric.clone()))
            .or_default()
            .push(r.value);
    }
    let mut out = Vec::with_capacity(groups.len() * 2);
    for ((method, rate, metric), values) in groups {
        for (label, v) in [("mean", mean(&values)), ("std", std_dev(&values))] {
            out.push(MetricRow {
                method: method.clone(),
                prune_rate: f64::from_bits(rate),
                seed: label.to_string(),
                metric: metric.clone(),
                value: v,
            });
        }
    }
    out
}

/// Keeps the metric rows whose (method, prune rate, seed) cell has an audit.
/// With no audits every row is kept. When `with_aggregates` is set, mean and
/// standard-deviation rows over the kept rows are appended. The result is sorted.
pub fn join(audits: &[Audit], rows: &[MetricRow], with_aggregates: bool) -> Vec<MetricRow> {
    let cells: HashSet<(String, u64, String)> = audits
        .iter()
        .map(|a| (a.method.clone(), a.prune_rate.to_bits(), a.seed.to_string()))
        .collect();
    let mut out: Vec<MetricRow> = rows
        .iter()
        .filter(|r| {
            audits.is_empty()
                || cells.contains(&(r.method.clone(), r.prune_rate.to_bits(), r.seed.clone()))
        })
        .cloned()
        .collect();
    if with_aggregates {
        let agg = aggregate(&out);
        out.extend(agg);
    }
    sort_rows(&mut out);
    out
}

pub fn write_csv<W: Write>(w: W, rows: &[MetricRow]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    writer.write_record(HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        writer.serialize(r).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_csv<R: Read>(r: R, origin: &str) -> Result<Vec<MetricRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: format!("expected header {HEADER:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<MetricRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string())
}

pub fn save_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(file, rows)
}

pub fn load_audit(path: impl AsRef<Path>) -> Result<Audit> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}
