use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sepsa::checkpoint::Checkpoint;
use sepsa::data::{gen_synthetic, write_csv, SynthSpec};
use sepsa::harness::{
    parse_list, read_metrics_jsonl, runs_from_records, summarize, sweep, ExperimentConfig, OptimizerKind, RunResult,
    RunStatus, RunSummary,
};
use sepsa::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "sepsa", version, about = "Separable-model training with RLS heads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration over its seeds.
    Train {
        #[command(flatten)]
        exp: ExpArgs,
        /// Write `<run>.ckpt` next to each run's metric files.
        #[arg(long)]
        save_checkpoints: bool,
    },
    /// Train every optimizer × lr × seed cell.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma-separated learning rates.
        #[arg(long, default_value = "1e-2,1e-3,1e-4")]
        lrs: String,
        /// Comma-separated optimizers.
        #[arg(long, default_value = "sepsa,adam,sgd,nag,rmsprop")]
        optimizers: String,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Fold metric files (.jsonl) into a mean ± std table.
    Summarize {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the oracle suites and print their reports.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic separable-regression dataset as CSV.
    ExportSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 1)]
        outputs: usize,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Experiment flags. Each maps onto the config key of the same name; a
/// `--config` file is applied afterwards and wins on conflicts.
#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    theta_optimizer: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma list and/or half-open ranges, e.g. `0..5,10`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    hidden_dim: Option<String>,
    #[arg(long)]
    b0_scale: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    #[arg(long)]
    train_fraction: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    track_grad_norm: bool,
    /// Record zero seconds so metric files are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Any other config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl ExpArgs {
    fn build(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = ExperimentConfig {
            output: Some(PathBuf::from("results")),
            ..ExperimentConfig::default()
        };
        let flags = [
            ("dataset", &self.dataset),
            ("targets", &self.targets),
            ("data_dir", &self.data_dir),
            ("optimizer", &self.optimizer),
            ("theta_optimizer", &self.theta_optimizer),
            ("lr", &self.lr),
            ("schedule", &self.schedule),
            ("tau", &self.tau),
            ("rho", &self.rho),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("max_iterations", &self.max_iterations),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("hidden_dim", &self.hidden_dim),
            ("b0_scale", &self.b0_scale),
            ("eval_every", &self.eval_every),
            ("train_fraction", &self.train_fraction),
            ("split_seed", &self.split_seed),
            ("output", &self.output),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| format!("--{}: {e}", key.replace('_', "-")))?;
            }
        }
        if self.track_grad_norm {
            cfg.track_grad_norm = true;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        for kv in &self.extra {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k, v).map_err(|e| format!("--set {k}: {e}"))?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(runs: &[RunResult]) {
    let summaries: Vec<RunSummary> = runs.iter().map(RunResult::summary).collect();
    print!("{}", summarize(&summaries));
    for r in runs {
        if let Some((jsonl, _)) = &r.files {
            eprintln!("{} seed {} lr {:e}: {} -> {}", r.optimizer, r.seed, r.lr, r.status.as_str(), jsonl.display());
        }
    }
}

fn failure(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } | Error::Io { .. } | Error::Csv { .. } | Error::MissingColumn(..) => {
            ExitCode::from(EXIT_CONFIG)
        }
        _ => ExitCode::FAILURE,
    }
}

fn config_failure(msg: String) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Train { exp, save_checkpoints } => {
            let cfg = match exp.build() {
                Ok(c) => c,
                Err(m) => return config_failure(m),
            };
            let runs = match sepsa::harness::run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return failure(e),
            };
            if save_checkpoints {
                for r in &runs {
                    if let Some((jsonl, _)) = &r.files {
                        let ck = Checkpoint {
                            model: r.model.clone(),
                            gain: r.gain.clone(),
                        };
                        if let Err(e) = ck.save(jsonl.with_extension("ckpt")) {
                            return failure(e);
                        }
                    }
                }
            }
            report(&runs);
            if runs.iter().any(|r| r.status == RunStatus::Diverged) {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Sweep {
            exp,
            lrs,
            optimizers,
            threads,
        } => {
            let cfg = match exp.build() {
                Ok(c) => c,
                Err(m) => return config_failure(m),
            };
            let lrs: Vec<f64> = match parse_list(&lrs) {
                Ok(v) if !v.is_empty() => v,
                Ok(_) => return config_failure("--lrs is empty".into()),
                Err(m) => return config_failure(format!("--lrs: {m}")),
            };
            let opts: Vec<OptimizerKind> = match parse_list(&optimizers) {
                Ok(v) if !v.is_empty() => v,
                Ok(_) => return config_failure("--optimizers is empty".into()),
                Err(m) => return config_failure(format!("--optimizers: {m}")),
            };
            let runs = match sweep(&cfg, &opts, &lrs, threads) {
                Ok(r) => r,
                Err(e) => return failure(e),
            };
            report(&runs);
            if runs.iter().all(|r| r.status == RunStatus::Diverged) {
                ExitCode::from(EXIT_DIVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Command::Summarize { files } => {
            let mut runs = Vec::new();
            for f in &files {
                match read_metrics_jsonl(f) {
                    Ok(recs) => runs.extend(runs_from_records(&recs)),
                    Err(e) => return failure(e),
                }
            }
            print!("{}", summarize(&runs));
            ExitCode::SUCCESS
        }
        Command::Verify { seed } => {
            let reports = match sepsa::verify::run_suite(seed) {
                Ok(r) => r,
                Err(e) => return failure(e),
            };
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::ExportSynth {
            out,
            d,
            hidden,
            outputs,
            n,
            noise,
            seed,
        } => {
            if d == 0 || hidden == 0 || outputs == 0 || n == 0 || !(noise >= 0.0 && noise.is_finite()) {
                return config_failure("synthetic dimensions must be positive and noise nonnegative".into());
            }
            let (ds, _) = gen_synthetic(SynthSpec {
                d,
                hidden,
                d_o: outputs,
                n_samples: n,
                noise_std: noise,
                seed,
            });
            let file = match std::fs::File::create(&out) {
                Ok(f) => f,
                Err(e) => return failure(Error::io(&out, e)),
            };
            match write_csv(&ds, std::io::BufWriter::new(file)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => failure(e),
            }
        }
    }
}

fn main() -> ExitCode {
    run(Cli::parse())
}
