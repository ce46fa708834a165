//! Append-only metric stream, mirrored to `iteration,metric,value` CSV.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iteration,metric,value";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub iteration: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Default)]
pub struct RunMetrics {
    records: Vec<MetricRecord>,
    last: BTreeMap<String, u64>,
    sink: Option<(PathBuf, BufWriter<File>)>,
}

impl PartialEq for RunMetrics {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl RunMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also append every record to `path`, writing the header if the file
    /// is new.
    pub fn with_csv(path: &Path) -> Result<Self> {
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        if fresh {
            writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(path, e))?;
        }
        Ok(Self {
            sink: Some((path.to_path_buf(), w)),
            ..Self::default()
        })
    }

    /// Iterations must strictly increase per metric and never go backwards
    /// overall.
    pub fn record(&mut self, iteration: u64, metric: &str, value: f64) -> Result<()> {
        if metric.contains(',') || metric.contains('\n') {
            return Err(Error::contract(format!("metric name {metric:?} is not CSV-safe")));
        }
        if let Some(prev) = self.records.last() {
            if iteration < prev.iteration {
                return Err(Error::contract(format!(
                    "metric {metric} at iteration {iteration} after iteration {}",
                    prev.iteration
                )));
            }
        }
        if let Some(&prev) = self.last.get(metric) {
            if iteration <= prev {
                return Err(Error::contract(format!("metric {metric} already recorded at iteration {prev}")));
            }
        }
        if let Some((path, w)) = &mut self.sink {
            writeln!(w, "{iteration},{metric},{value}").map_err(|e| Error::io(path.as_path(), e))?;
        }
        self.last.insert(metric.to_string(), iteration);
        self.records.push(MetricRecord {
            iteration,
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((path, w)) = &mut self.sink {
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    /// `(iteration, value)` pairs of one metric.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.records
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.iteration, r.value))
            .collect()
    }

    pub fn metric_names(&self) -> Vec<String> {
        self.last.keys().cloned().collect()
    }

    /// Read a CSV written by [`RunMetrics::with_csv`].
    pub fn read_csv(path: &Path) -> Result<Vec<MetricRecord>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if n == 0 {
                if line != CSV_HEADER {
                    return Err(Error::config(format!("{}: unexpected header {line:?}", path.display())));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = || Error::config(format!("{}:{}: malformed row {line:?}", path.display(), n + 1));
            let mut parts = line.splitn(3, ',');
            let (i, m, v) = (parts.next(), parts.next(), parts.next());
            let (Some(i), Some(m), Some(v)) = (i, m, v) else {
                return Err(bad());
            };
            out.push(MetricRecord {
                iteration: i.parse().map_err(|_| bad())?,
                metric: m.to_string(),
                value: v.parse().map_err(|_| bad())?,
            });
        }
        Ok(out)
    }
}
