//! Config-driven experiment runner: dataset resolution, per-seed training
//! loops with divergence detection, metric files, sweeps and summaries.

mod config;
mod metrics;
mod summary;

pub use config::{parse_config, parse_kv, parse_list, parse_seeds, ExperimentConfig, OptimizerKind, ScheduleMode};
pub use metrics::{
    parse_metrics_jsonl, read_metrics_jsonl, MetricsRecord, MetricsWriter, RunStatus, CSV_HEADER,
};
pub use summary::{mean_std, runs_from_records, summarize, MeanStd, RunSummary, SummaryRow, SummaryTable};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::data::{self, gen_synthetic, load_csv, load_idx, Dataset, SplitSpec, SynthSpec, Task};
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{Dims, SeparableModel};
use crate::optim::{
    FirstOrderOptimizer, NewtonState, Optimizer, SepsaOptimizer, StepContext, ThetaUpdater,
};
use crate::rng::{derive_rng, Purpose};

/// Loss (MSE scale) above which a run counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
pub const DATA_DIR_ENV: &str = "SEPSA_DATA_DIR";
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.76;
const CLASSIFICATION_EVAL_EVERY: u64 = 500;
const CLASSIFICATION_TRAIN_EVAL_ROWS: usize = 5000;

pub const ENERGY_FILE: &str = "energy.csv";
pub const ENERGY_TARGETS: [&str; 2] = ["Y1", "Y2"];
pub const DIABETES_FILE: &str = "diabetes.csv";
pub const DIABETES_TARGETS: [&str; 1] = ["Y"];
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Train/test pair ready for training.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub name: String,
    pub task: Task,
    pub train: Dataset,
    pub test: Dataset,
}

/// `cfg.data_dir`, else `$SEPSA_DATA_DIR`, else `./data`.
pub fn data_root(cfg: &ExperimentConfig) -> PathBuf {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn mnist_paths(root: &Path) -> Option<[PathBuf; 4]> {
    [root.join("mnist"), root.to_path_buf()]
        .into_iter()
        .map(|dir| MNIST_FILES.map(|f| dir.join(f)))
        .find(|ps| ps.iter().all(|p| p.is_file()))
}

/// Whether a named dataset can be loaded from `root` without touching the
/// network.
pub fn dataset_available(name: &str, root: &Path) -> bool {
    match name {
        "energy" => root.join(ENERGY_FILE).is_file(),
        "diabetes" => root.join(DIABETES_FILE).is_file(),
        "mnist" => mnist_paths(root).is_some(),
        "synthetic" => true,
        path => Path::new(path).is_file(),
    }
}

/// Loads, splits and standardizes the configured dataset. Inputs are
/// standardized with training statistics; targets only on request.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let root = data_root(cfg);
    let split_spec = |default: f64| SplitSpec {
        train_fraction: cfg.train_fraction.unwrap_or(default),
        seed: cfg.split_seed,
    };
    let (name, train, test) = match cfg.dataset.as_str() {
        "mnist" => {
            let [tri, trl, tei, tel] = mnist_paths(&root).ok_or_else(|| {
                Error::io(
                    root.join("mnist"),
                    std::io::Error::new(std::io::ErrorKind::NotFound, "MNIST IDX files not found"),
                )
            })?;
            ("mnist".to_owned(), load_idx(tri, trl)?, load_idx(tei, tel)?)
        }
        "synthetic" => {
            let (ds, _) = gen_synthetic(SynthSpec {
                d: cfg.synth_d,
                hidden: cfg.synth_hidden,
                d_o: cfg.synth_outputs,
                n_samples: cfg.synth_n,
                noise_std: cfg.synth_noise,
                seed: cfg.synth_seed,
            });
            let (tr, te) = data::split(&ds, split_spec(0.8));
            ("synthetic".to_owned(), tr, te)
        }
        named @ ("energy" | "diabetes") => {
            let (file, targets): (&str, &[&str]) = if named == "energy" {
                (ENERGY_FILE, &ENERGY_TARGETS)
            } else {
                (DIABETES_FILE, &DIABETES_TARGETS)
            };
            let targets: Vec<&str> = if cfg.targets.is_empty() {
                targets.to_vec()
            } else {
                cfg.targets.iter().map(String::as_str).collect()
            };
            let ds = load_csv(root.join(file), &targets)?;
            let (tr, te) = data::split(&ds, split_spec(DEFAULT_TRAIN_FRACTION));
            (named.to_owned(), tr, te)
        }
        path => {
            if cfg.targets.is_empty() {
                return Err(Error::Config {
                    line: 0,
                    message: format!("dataset `{path}` is a file path; `targets` must name its target columns"),
                });
            }
            let targets: Vec<&str> = cfg.targets.iter().map(String::as_str).collect();
            let ds = load_csv(path, &targets)?;
            let (tr, te) = data::split(&ds, split_spec(DEFAULT_TRAIN_FRACTION));
            (ds.name.clone(), tr, te)
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("train or test split"));
    }
    let task = train.task;
    let (mut train, mut test) = if cfg.standardize_inputs && task == Task::Regression {
        data::standardize_pair(train, test)
    } else {
        (train, test)
    };
    if cfg.standardize_targets && task == Task::Regression {
        standardize_targets(&mut train, &mut test);
    }
    Ok(PreparedData { name, task, train, test })
}

fn standardize_targets(train: &mut Dataset, test: &mut Dataset) {
    let swapped: Vec<crate::model::Sample> = train
        .samples
        .iter()
        .map(|s| crate::model::Sample::new(s.y.clone(), vec![0.0]))
        .collect();
    let norm = data::Normalization::fit(&swapped);
    for s in train.samples.iter_mut().chain(test.samples.iter_mut()) {
        norm.apply(&mut s.y);
    }
}

/// Builds the optimizer for a fresh model.
pub fn build_optimizer(
    cfg: &ExperimentConfig,
    kind: OptimizerKind,
    lr: f64,
    model: &SeparableModel,
) -> Result<Box<dyn Optimizer>> {
    let cfg_lr = ExperimentConfig { lr, ..cfg.clone() };
    let schedule = cfg_lr.step_schedule().map_err(|message| Error::Config { line: 0, message })?;
    let p = model.feature_dim();
    let q = model.theta().len();
    Ok(match kind {
        OptimizerKind::Sepsa => {
            let mut o = SepsaOptimizer::rls(p, q, cfg.b0_scale, cfg.theta_optimizer, schedule);
            o.decay_head_batch = cfg.head_batch_decay;
            Box::new(o)
        }
        OptimizerKind::NewtonHead => {
            let b0 = SpdMatrix::scaled_identity(p, cfg.b0_scale);
            let head = match cfg.schedule {
                ScheduleMode::Constant => NewtonState::rls_equivalent(&b0, 1.0)?,
                ScheduleMode::Decaying => NewtonState::new(b0.inverse()?),
            };
            let mut o = SepsaOptimizer::new(head, ThetaUpdater::new(cfg.theta_optimizer, q), schedule);
            o.decay_head_batch = cfg.head_batch_decay;
            Box::new(o)
        }
        OptimizerKind::FirstOrder(k) => Box::new(FirstOrderOptimizer::new(k, model.head.as_slice().len(), q, schedule)),
    })
}

/// Train metric (MSE) and test metric (MSE or accuracy).
pub fn evaluate(model: &SeparableModel, data: &PreparedData, train_rows: usize) -> (f64, f64) {
    let rows = &data.train.samples[..train_rows.min(data.train.len())];
    let train = mse(model, rows);
    let test = match data.task {
        Task::Regression => mse(model, &data.test.samples),
        Task::Classification => accuracy(model, &data.test.samples),
    };
    (train, test)
}

/// Mean over rows of `‖y − ŷ‖² / d_o`.
pub fn mse(model: &SeparableModel, samples: &[crate::model::Sample]) -> f64 {
    let d_o = model.output_dim() as f64;
    samples
        .iter()
        .map(|s| 2.0 * model.loss(s) / d_o)
        .sum::<f64>()
        / samples.len() as f64
}

pub fn accuracy(model: &SeparableModel, samples: &[crate::model::Sample]) -> f64 {
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
            .0
    };
    let hits = samples
        .iter()
        .filter(|s| argmax(&model.predict(&s.x)) == argmax(&s.y))
        .count();
    hits as f64 / samples.len() as f64
}

/// Outcome of one (optimizer, lr, seed) run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub dataset: String,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub records: Vec<MetricsRecord>,
    pub iterations: u64,
    /// Training time, excluding evaluation.
    pub train_seconds: f64,
    pub model: SeparableModel,
    pub gain: Option<SpdMatrix>,
    /// `(jsonl, csv)` paths when metrics went to disk.
    pub files: Option<(PathBuf, PathBuf)>,
}

impl RunResult {
    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("every run writes at least one record")
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::from_records(&self.records).expect("nonempty records")
    }
}

/// File stem for a run's metric files inside `dir`.
pub fn run_stem(dir: &Path, dataset: &str, optimizer: OptimizerKind, lr: f64, seed: u64) -> PathBuf {
    dir.join(format!("{dataset}_{optimizer}_lr{lr:e}_seed{seed}"))
}

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_THRESHOLD
}

/// Trains one seed. Records go to `cfg.output` (if set) as they are produced.
pub fn run_single(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    optimizer: OptimizerKind,
    lr: f64,
    seed: u64,
) -> Result<RunResult> {
    let dims = Dims::new(data.train.input_dim, cfg.hidden_dim, data.train.output_dim);
    let mut model = SeparableModel::init_kaiming_uniform(dims, seed);
    let mut opt = build_optimizer(cfg, optimizer, lr, &model)?;
    let mut stream = data::BatchStream::new(data.train.len(), cfg.batch_size, seed);
    let mut subset_rng = derive_rng(seed, Purpose::Subset, 0);
    let mut writer = match &cfg.output {
        Some(dir) => Some(MetricsWriter::create(&run_stem(dir, &data.name, optimizer, lr, seed))?),
        None => None,
    };

    let total = (stream.batches_per_epoch() as u64) * cfg.epochs as u64;
    let total = cfg.max_iterations.map_or(total, |m| m.min(total));
    let eval_every = cfg.eval_every.unwrap_or(match data.task {
        Task::Regression => 1,
        Task::Classification => CLASSIFICATION_EVAL_EVERY,
    });
    let train_rows = cfg.eval_train_max.unwrap_or(match data.task {
        Task::Regression => usize::MAX,
        Task::Classification => CLASSIFICATION_TRAIN_EVAL_ROWS,
    });
    let d_o = dims.output as f64;

    let mut records = Vec::new();
    let mut status = RunStatus::Ok;
    let mut elapsed = 0.0;
    let mut k = 0;
    let mut push = |rec: MetricsRecord, records: &mut Vec<MetricsRecord>| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            w.append(&rec)?;
        }
        records.push(rec);
        Ok(())
    };
    let record = |k: u64, epoch: usize, train: Option<f64>, test: Option<f64>, grad: Option<f64>, secs: f64, st| MetricsRecord {
        dataset: data.name.clone(),
        iteration: k,
        epoch,
        seed,
        optimizer: optimizer.to_string(),
        lr,
        train_mse: train,
        test_metric: test,
        grad_norm: grad,
        seconds: if cfg.timing { secs } else { 0.0 },
        status: st,
    };

    while k < total {
        let (epoch, batch) = stream.next_batch(&data.train);
        let ctx = StepContext {
            epoch,
            batch_size: cfg.batch_size,
        };
        let t0 = Instant::now();
        let outcome = opt.step(&mut model, &batch, ctx, &mut subset_rng);
        elapsed += t0.elapsed().as_secs_f64();
        k += 1;
        let blown = match outcome {
            Ok(stats) => diverged(2.0 * stats.batch_loss / d_o),
            Err(Error::NonFinite { .. } | Error::HessianBreakdown { .. } | Error::NotPositiveDefinite { .. }) => true,
            Err(e) => return Err(e),
        };
        if blown {
            status = RunStatus::Diverged;
            push(record(k, epoch, None, None, None, elapsed, status), &mut records)?;
            break;
        }
        if k % eval_every == 0 || k == total {
            let (train, test) = evaluate(&model, data, train_rows);
            if diverged(train) {
                status = RunStatus::Diverged;
                push(record(k, epoch, None, None, None, elapsed, status), &mut records)?;
                break;
            }
            let grad = if cfg.track_grad_norm {
                Some(crate::verify::full_grad_norm(&model, &data.train.samples)?)
            } else {
                None
            };
            push(record(k, epoch, Some(train), Some(test), grad, elapsed, status), &mut records)?;
        }
    }
    let files = writer.map(|w| {
        let (j, c) = w.paths();
        (j.to_path_buf(), c.to_path_buf())
    });
    Ok(RunResult {
        dataset: data.name.clone(),
        optimizer,
        lr,
        seed,
        status,
        records,
        iterations: k,
        train_seconds: elapsed,
        gain: opt.gain_matrix().cloned(),
        model,
        files,
    })
}

/// Runs every configured seed sequentially.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate().map_err(|message| Error::Config { line: 0, message })?;
    let data = prepare_data(cfg)?;
    cfg.seeds
        .iter()
        .map(|&seed| run_single(cfg, &data, cfg.optimizer, cfg.lr, seed))
        .collect()
}

/// Cross product of `optimizers × lrs × cfg.seeds` on `threads` workers.
/// Results come back in (optimizer, lr, seed) order regardless of scheduling.
pub fn sweep(
    cfg: &ExperimentConfig,
    optimizers: &[OptimizerKind],
    lrs: &[f64],
    threads: usize,
) -> Result<Vec<RunResult>> {
    cfg.validate().map_err(|message| Error::Config { line: 0, message })?;
    if let Some(bad) = lrs.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
        return Err(Error::Config {
            line: 0,
            message: format!("lr must be positive, got {bad}"),
        });
    }
    let data = prepare_data(cfg)?;
    let cells: Vec<(OptimizerKind, f64, u64)> = optimizers
        .iter()
        .flat_map(|&o| lrs.iter().flat_map(move |&lr| cfg.seeds.iter().map(move |&s| (o, lr, s))))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(o, lr, s)) = cells.get(i) else { break };
                let r = run_single(cfg, &data, o, lr, s);
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            dataset: "synthetic".into(),
            synth_n: 120,
            synth_d: 3,
            synth_hidden: 4,
            hidden_dim: 6,
            timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn online_run_records_every_iteration() {
        let cfg = small_cfg();
        let runs = run_experiment(&cfg).unwrap();
        let r = &runs[0];
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.iterations, 96);
        assert_eq!(r.records.len(), 96);
        assert!(r.records.windows(2).all(|w| w[0].iteration < w[1].iteration));
        assert!(r.gain.is_some());
    }

    #[test]
    fn divergence_is_flagged() {
        let cfg = ExperimentConfig {
            optimizer: OptimizerKind::FirstOrder(crate::optim::UpdaterKind::Sgd),
            lr: 1e6,
            ..small_cfg()
        };
        let r = &run_experiment(&cfg).unwrap()[0];
        assert_eq!(r.status, RunStatus::Diverged);
        assert_eq!(r.final_record().status, RunStatus::Diverged);
        assert!(r.iterations < 96);
    }

    #[test]
    fn sweep_orders_cells() {
        let cfg = ExperimentConfig {
            seeds: vec![0, 1],
            ..small_cfg()
        };
        let opts = [OptimizerKind::Sepsa, OptimizerKind::FirstOrder(crate::optim::UpdaterKind::Adam)];
        let runs = sweep(&cfg, &opts, &[1e-2, 1e-3], 3).unwrap();
        let keys: Vec<_> = runs.iter().map(|r| (r.optimizer, r.lr, r.seed)).collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[0], (OptimizerKind::Sepsa, 1e-2, 0));
        assert_eq!(keys[7], (opts[1], 1e-3, 1));
        let serial = run_single(&cfg, &prepare_data(&cfg).unwrap(), opts[1], 1e-3, 1).unwrap();
        assert_eq!(serial.records, runs[7].records);
    }
}
