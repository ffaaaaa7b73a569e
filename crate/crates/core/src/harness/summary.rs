//! Multi-seed aggregation into mean ± sample-std tables.

use std::collections::BTreeMap;
use std::fmt;

use super::metrics::{MetricsRecord, RunStatus};

/// Final state of one (dataset, optimizer, lr, seed) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dataset: String,
    pub optimizer: String,
    pub lr: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub train_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub seconds: f64,
}

impl RunSummary {
    /// Summarizes one run's records; `None` for an empty slice.
    pub fn from_records(records: &[MetricsRecord]) -> Option<Self> {
        let last = records.last()?;
        let status = if records.iter().any(|r| r.status == RunStatus::Diverged) {
            RunStatus::Diverged
        } else {
            RunStatus::Ok
        };
        Some(RunSummary {
            dataset: last.dataset.clone(),
            optimizer: last.optimizer.clone(),
            lr: last.lr,
            seed: last.seed,
            status,
            train_metric: last.train_mse,
            test_metric: last.test_metric,
            seconds: last.seconds,
        })
    }
}

/// Splits a mixed record list into runs keyed by (dataset, optimizer, lr, seed).
pub fn runs_from_records(records: &[MetricsRecord]) -> Vec<RunSummary> {
    let mut groups: BTreeMap<(String, String, u64, u64), Vec<MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.optimizer.clone(), r.lr.to_bits(), r.seed))
            .or_default()
            .push(r.clone());
    }
    groups.values().filter_map(|g| RunSummary::from_records(g)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for one value.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd { mean, std })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub optimizer: String,
    pub lr: f64,
    pub completed: usize,
    pub diverged: usize,
    pub train: Option<MeanStd>,
    pub test: Option<MeanStd>,
    pub seconds: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// One row per (dataset, optimizer, lr). Diverged runs are counted but kept
/// out of the means.
pub fn summarize(runs: &[RunSummary]) -> SummaryTable {
    let mut cells: BTreeMap<(String, String, u64), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        cells
            .entry((r.dataset.clone(), r.optimizer.clone(), r.lr.to_bits()))
            .or_default()
            .push(r);
    }
    let rows = cells
        .into_iter()
        .map(|((dataset, optimizer, lr), rs)| {
            let ok: Vec<&&RunSummary> = rs.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let col = |f: fn(&RunSummary) -> Option<f64>| mean_std(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                dataset,
                optimizer,
                lr: f64::from_bits(lr),
                completed: ok.len(),
                diverged: rs.len() - ok.len(),
                train: col(|r| r.train_metric),
                test: col(|r| r.test_metric),
                seconds: col(|r| Some(r.seconds)),
            }
        })
        .collect();
    SummaryTable { rows }
}

fn cell(m: Option<MeanStd>) -> String {
    m.map_or_else(|| "-".to_owned(), |m| format!("{:.4} ± {:.4}", m.mean, m.std))
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:<12} {:>8} {:>4} {:>4}  {:<22} {:<22} {:<22}",
            "dataset", "optimizer", "lr", "ok", "div", "train", "test", "seconds"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:<12} {:>8} {:>4} {:>4}  {:<22} {:<22} {:<22}",
                r.dataset,
                r.optimizer,
                format!("{:e}", r.lr),
                r.completed,
                r.diverged,
                cell(r.train),
                cell(r.test),
                cell(r.seconds)
            )?;
        }
        Ok(())
    }
}
