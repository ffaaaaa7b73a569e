//! Experiment configuration and its `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! dataset = energy
//! optimizer = sepsa
//! lr = 1e-3
//! seeds = 0,1,2
//! ```
//!
//! Keys match the long CLI flags with `-` or `_` accepted interchangeably.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{StepSchedule, UpdaterKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sepsa,
    NewtonHead,
    FirstOrder(UpdaterKind),
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Sepsa,
        OptimizerKind::NewtonHead,
        OptimizerKind::FirstOrder(UpdaterKind::Sgd),
        OptimizerKind::FirstOrder(UpdaterKind::Nag),
        OptimizerKind::FirstOrder(UpdaterKind::RmsProp),
        OptimizerKind::FirstOrder(UpdaterKind::Adam),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sepsa => "sepsa",
            OptimizerKind::NewtonHead => "newton-head",
            OptimizerKind::FirstOrder(k) => k.as_str(),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown optimizer `{s}` (expected sepsa, newton-head, sgd, nag, rmsprop or adam)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    Constant,
    Decaying,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// `energy`, `diabetes`, `mnist`, `synthetic`, or a path to a CSV file.
    pub dataset: String,
    /// Target columns for a CSV path dataset.
    pub targets: Vec<String>,
    /// Dataset root; falls back to `$SEPSA_DATA_DIR`, then `./data`.
    pub data_dir: Option<PathBuf>,
    pub optimizer: OptimizerKind,
    /// First-order rule for the extractor in `sepsa` / `newton-head`.
    pub theta_optimizer: UpdaterKind,
    pub lr: f64,
    pub schedule: ScheduleMode,
    pub tau: f64,
    pub rho: f64,
    pub c: f64,
    pub d: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_iterations: Option<u64>,
    pub seeds: Vec<u64>,
    pub hidden_dim: usize,
    /// `B₀ = δ I`.
    pub b0_scale: f64,
    pub head_batch_decay: bool,
    /// Evaluation cadence in iterations; `None` picks 1 for regression and
    /// 500 for classification.
    pub eval_every: Option<u64>,
    /// Cap on training rows used for the train metric (`None`: all for
    /// regression, 5000 for classification).
    pub eval_train_max: Option<usize>,
    pub track_grad_norm: bool,
    pub train_fraction: Option<f64>,
    pub split_seed: u64,
    pub standardize_inputs: bool,
    pub standardize_targets: bool,
    /// Record wall-clock seconds; off makes metric files byte-reproducible.
    pub timing: bool,
    pub output: Option<PathBuf>,
    pub synth_d: usize,
    pub synth_hidden: usize,
    pub synth_outputs: usize,
    pub synth_n: usize,
    pub synth_noise: f64,
    pub synth_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "synthetic".into(),
            targets: vec![],
            data_dir: None,
            optimizer: OptimizerKind::Sepsa,
            theta_optimizer: UpdaterKind::Adam,
            lr: 1e-3,
            schedule: ScheduleMode::Constant,
            tau: 1000.0,
            rho: 1.0,
            c: 1.0,
            d: 1.0,
            batch_size: 1,
            epochs: 1,
            max_iterations: None,
            seeds: vec![0],
            hidden_dim: 50,
            b0_scale: 100.0,
            head_batch_decay: true,
            eval_every: None,
            eval_train_max: None,
            track_grad_norm: false,
            train_fraction: None,
            split_seed: 0,
            standardize_inputs: true,
            standardize_targets: false,
            timing: true,
            output: None,
            synth_d: 8,
            synth_hidden: 16,
            synth_outputs: 1,
            synth_n: 2000,
            synth_noise: 0.05,
            synth_seed: 0,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

pub fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn positive(v: f64, what: &str) -> std::result::Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be positive and finite, got {v}"))
    }
}

impl ExperimentConfig {
    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "dataset" => self.dataset = v.to_owned(),
            "targets" => self.targets = parse_list(v)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(v)),
            "optimizer" => self.optimizer = v.parse()?,
            "theta_optimizer" => self.theta_optimizer = v.parse()?,
            "lr" => self.lr = positive(parse_num(v)?, "lr")?,
            "schedule" => {
                self.schedule = match v {
                    "constant" => ScheduleMode::Constant,
                    "decaying" => ScheduleMode::Decaying,
                    _ => return Err(format!("schedule must be constant or decaying, got `{v}`")),
                }
            }
            "tau" => self.tau = positive(parse_num(v)?, "tau")?,
            "rho" => self.rho = parse_num(v)?,
            "c" => self.c = positive(parse_num(v)?, "c")?,
            "d" => self.d = positive(parse_num(v)?, "d")?,
            "batch_size" => self.batch_size = parse_num(v)?,
            "epochs" => self.epochs = parse_num(v)?,
            "max_iterations" => self.max_iterations = Some(parse_num(v)?),
            "seed" => self.seeds = vec![parse_num(v)?],
            "seeds" => self.seeds = parse_seeds(v)?,
            "hidden_dim" => self.hidden_dim = parse_num(v)?,
            "b0_scale" => self.b0_scale = positive(parse_num(v)?, "b0_scale")?,
            "head_batch_decay" => self.head_batch_decay = parse_bool(v)?,
            "eval_every" => self.eval_every = Some(parse_num(v)?),
            "eval_train_max" => self.eval_train_max = Some(parse_num(v)?),
            "track_grad_norm" => self.track_grad_norm = parse_bool(v)?,
            "train_fraction" => self.train_fraction = Some(parse_num(v)?),
            "split_seed" => self.split_seed = parse_num(v)?,
            "standardize_inputs" => self.standardize_inputs = parse_bool(v)?,
            "standardize_targets" => self.standardize_targets = parse_bool(v)?,
            "timing" => self.timing = parse_bool(v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "synth_d" => self.synth_d = parse_num(v)?,
            "synth_hidden" => self.synth_hidden = parse_num(v)?,
            "synth_outputs" => self.synth_outputs = parse_num(v)?,
            "synth_n" => self.synth_n = parse_num(v)?,
            "synth_noise" => self.synth_noise = parse_num(v)?,
            "synth_seed" => self.synth_seed = parse_num(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies every entry of a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_kv(text)? {
            self.set(&key, &value).map_err(|message| Error::Config { line, message })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(format!("lr must be positive, got {}", self.lr));
        }
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        if self.hidden_dim == 0 {
            return Err("hidden dim must be at least 1".into());
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(format!("train fraction must lie in (0, 1), got {f}"));
            }
        }
        if self.eval_every == Some(0) {
            return Err("eval_every must be at least 1".into());
        }
        if self.schedule == ScheduleMode::Decaying {
            self.step_schedule()?;
        }
        if self.synth_d == 0 || self.synth_hidden == 0 || self.synth_outputs == 0 || self.synth_n == 0 {
            return Err("synthetic dimensions must be positive".into());
        }
        if !(self.synth_noise >= 0.0 && self.synth_noise.is_finite()) {
            return Err("synthetic noise must be nonnegative".into());
        }
        Ok(())
    }

    /// Schedule for the configured `lr`; in decaying mode `lr` is `η₀`.
    pub fn step_schedule(&self) -> std::result::Result<StepSchedule, String> {
        match self.schedule {
            ScheduleMode::Constant => Ok(StepSchedule::constant(self.lr)),
            ScheduleMode::Decaying => StepSchedule::decaying(self.lr, self.tau, self.rho, self.c, self.d),
        }
    }
}

/// Accepts `0,1,2` and ranges like `0..100` (half-open).
pub fn parse_seeds(v: &str) -> std::result::Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (parse_num(a.trim())?, parse_num(b.trim())?);
            if b <= a || b - a > 1_000_000 {
                return Err(format!("bad seed range `{part}`"));
            }
            out.extend(a..b);
        } else {
            out.push(parse_num(part)?);
        }
    }
    if out.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(out)
}

/// Splits config text into `(line, key, value)` entries.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key".into(),
            });
        }
        out.push((line, k.to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

/// Parses a complete config file on top of the defaults and validates it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(text)?;
    cfg.validate().map_err(|message| Error::Config { line: 0, message })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file() {
        let cfg = parse_config(
            "# energy run\ndataset = energy\noptimizer=adam\nlr = 1e-2  # high\nseeds = 0..3, 10\nbatch-size = 32\nhead_batch_decay = off\n",
        )
        .unwrap();
        assert_eq!(cfg.dataset, "energy");
        assert_eq!(cfg.optimizer, OptimizerKind::FirstOrder(UpdaterKind::Adam));
        assert_eq!(cfg.lr, 1e-2);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 10]);
        assert_eq!(cfg.batch_size, 32);
        assert!(!cfg.head_batch_decay);
    }

    #[test]
    fn reports_line_numbers() {
        match parse_config("lr = 1e-3\nbogus = 1\n") {
            Err(Error::Config { line: 2, message }) => assert!(message.contains("bogus")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("lr\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("lr = -1\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("epochs = 0\n"), Err(Error::Config { line: 0, .. })));
    }

    #[test]
    fn decaying_schedule_validated() {
        assert!(parse_config("schedule = decaying\nrho = 0.4\n").is_err());
        let cfg = parse_config("schedule = decaying\nrho = 0.75\nlr = 0.5\n").unwrap();
        assert!(matches!(cfg.step_schedule().unwrap(), StepSchedule::Decaying { eta0, .. } if eta0 == 0.5));
    }

    #[test]
    fn optimizer_names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.name().parse::<OptimizerKind>().unwrap(), k);
        }
    }
}
