//! Metric records and their on-disk forms: JSON lines plus a flat CSV with
//! the same rows. Both files are appended and flushed one record at a time.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iteration,epoch,seed,optimizer,lr,train_mse,test_metric,grad_norm,seconds,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub dataset: String,
    pub iteration: u64,
    pub epoch: usize,
    pub seed: u64,
    pub optimizer: String,
    pub lr: f64,
    /// Mean over rows of `‖y − ŷ‖² / d_o`. `None` once the run has diverged.
    pub train_mse: Option<f64>,
    /// Test MSE for regression, test accuracy in `[0, 1]` for classification.
    pub test_metric: Option<f64>,
    pub grad_norm: Option<f64>,
    /// Training time so far, excluding evaluation.
    pub seconds: f64,
    pub status: RunStatus,
}

fn fmt_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        write!(out, "{v}").expect("write to String");
    }
}

impl MetricsRecord {
    pub fn csv_line(&self) -> String {
        let mut s = format!("{},{},{},{},{},", self.iteration, self.epoch, self.seed, self.optimizer, self.lr);
        fmt_opt(&mut s, self.train_mse);
        s.push(',');
        fmt_opt(&mut s, self.test_metric);
        s.push(',');
        fmt_opt(&mut s, self.grad_norm);
        write!(s, ",{},{}", self.seconds, self.status.as_str()).expect("write to String");
        s
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics record serializes")
    }
}

/// Appends records to `<stem>.jsonl` and `<stem>.csv`, flushing after each
/// one so a crash loses at most the record being written.
pub struct MetricsWriter {
    jsonl: BufWriter<File>,
    csv: BufWriter<File>,
    jsonl_path: PathBuf,
    csv_path: PathBuf,
    last_iteration: Option<u64>,
}

impl MetricsWriter {
    /// Creates (truncating) both files.
    pub fn create(stem: &Path) -> Result<Self> {
        let jsonl_path = stem.with_extension("jsonl");
        let csv_path = stem.with_extension("csv");
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let open = |p: &Path| {
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(p)
                .map(BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        let jsonl = open(&jsonl_path)?;
        let mut csv = open(&csv_path)?;
        writeln!(csv, "{CSV_HEADER}").and_then(|_| csv.flush()).map_err(|e| Error::io(&csv_path, e))?;
        Ok(MetricsWriter {
            jsonl,
            csv,
            jsonl_path,
            csv_path,
            last_iteration: None,
        })
    }

    pub fn append(&mut self, rec: &MetricsRecord) -> Result<()> {
        if let Some(prev) = self.last_iteration {
            assert!(rec.iteration > prev, "iterations must increase: {} after {prev}", rec.iteration);
        }
        self.last_iteration = Some(rec.iteration);
        writeln!(self.jsonl, "{}", rec.json_line())
            .and_then(|_| self.jsonl.flush())
            .map_err(|e| Error::io(&self.jsonl_path, e))?;
        writeln!(self.csv, "{}", rec.csv_line())
            .and_then(|_| self.csv.flush())
            .map_err(|e| Error::io(&self.csv_path, e))
    }

    pub fn paths(&self) -> (&Path, &Path) {
        (&self.jsonl_path, &self.csv_path)
    }
}

/// Parses JSON-lines metrics. A malformed final line without a trailing
/// newline is treated as a torn write and dropped; any other bad line is an
/// error.
pub fn parse_metrics_jsonl(text: &str) -> Result<Vec<MetricsRecord>> {
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<MetricsRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => break,
            Err(e) => {
                return Err(Error::Metrics {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn read_metrics_jsonl(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iteration: u64) -> MetricsRecord {
        MetricsRecord {
            dataset: "energy".into(),
            iteration,
            epoch: 1,
            seed: 3,
            optimizer: "sepsa".into(),
            lr: 1e-3,
            train_mse: Some(1.5),
            test_metric: Some(2.25),
            grad_norm: None,
            seconds: 0.0,
            status: RunStatus::Ok,
        }
    }

    #[test]
    fn csv_line_layout() {
        assert_eq!(rec(7).csv_line(), "7,1,3,sepsa,0.001,1.5,2.25,,0,ok");
        let mut r = rec(8);
        r.train_mse = None;
        r.status = RunStatus::Diverged;
        assert_eq!(r.csv_line(), "8,1,3,sepsa,0.001,,2.25,,0,diverged");
    }

    #[test]
    fn torn_last_line_is_dropped() {
        let full = format!("{}\n{}\n", rec(1).json_line(), rec(2).json_line());
        assert_eq!(parse_metrics_jsonl(&full).unwrap().len(), 2);
        let torn = &full[..full.len() - 10];
        let got = parse_metrics_jsonl(torn).unwrap();
        assert_eq!(got, vec![rec(1)]);
        let bad_middle = format!("{}\n{{oops\n{}\n", rec(1).json_line(), rec(2).json_line());
        assert!(matches!(parse_metrics_jsonl(&bad_middle), Err(Error::Metrics { line: 2, .. })));
    }

    #[test]
    fn writer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("sub/run");
        let mut w = MetricsWriter::create(&stem).unwrap();
        w.append(&rec(1)).unwrap();
        w.append(&rec(2)).unwrap();
        drop(w);
        assert_eq!(read_metrics_jsonl(stem.with_extension("jsonl")).unwrap(), vec![rec(1), rec(2)]);
        let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    }
}
