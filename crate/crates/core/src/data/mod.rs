//! Datasets: loading, standardization, splitting, batching, and a synthetic
//! separable-regression generator.

mod csv;
mod idx;
mod stream;
mod synth;

pub use self::csv::{load_csv, parse_csv, write_csv};
pub use idx::{
    decode_idx_images, decode_idx_labels, encode_idx_images, encode_idx_labels, idx_to_dataset, load_idx, IdxImages,
};
pub use stream::BatchStream;
pub use synth::{gen_synthetic, SynthSpec};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::Sample;
use crate::rng::{derive_rng, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    /// Targets are one-hot; the test metric is argmax accuracy.
    Classification,
}

/// Per-feature affine map `x ↦ (x − mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Population statistics of the inputs of `samples`. Constant features get
    /// `std = 1` so they map to 0.
    pub fn fit(samples: &[Sample]) -> Self {
        assert!(!samples.is_empty(), "Normalization::fit on empty set");
        let d = samples[0].x.len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            mean.iter_mut().zip(&s.x).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; d];
        for s in samples {
            var.iter_mut()
                .zip(&s.x)
                .zip(&mean)
                .for_each(|((v, x), m)| *v += (x - m) * (x - m) / n);
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = v.sqrt();
                if s > 1e-12 * (1.0 + s) && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalization { mean, std }
    }

    pub fn apply(&self, x: &mut [f64]) {
        for ((x, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    pub input_dim: usize,
    pub output_dim: usize,
    pub samples: Vec<Sample>,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, task: Task, samples: Vec<Sample>) -> Self {
        let (input_dim, output_dim) = samples.first().map_or((0, 0), |s| (s.x.len(), s.y.len()));
        assert!(
            samples.iter().all(|s| s.x.len() == input_dim && s.y.len() == output_dim),
            "ragged dataset"
        );
        Dataset {
            name: name.into(),
            task,
            input_dim,
            output_dim,
            samples,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_normalization(mut self, norm: &Normalization) -> Self {
        for s in &mut self.samples {
            norm.apply(&mut s.x);
        }
        self.normalization = Some(norm.clone());
        self
    }
}

/// Standardizes inputs with the dataset's own statistics, recording them.
/// Apply the recorded [`Normalization`] to a held-out split with
/// [`Dataset::with_normalization`] so it never sees its own statistics.
pub fn standardize(ds: Dataset) -> Dataset {
    let norm = Normalization::fit(&ds.samples);
    ds.with_normalization(&norm)
}

/// Standardizes `train` and applies the same transform to `test`.
pub fn standardize_pair(train: Dataset, test: Dataset) -> (Dataset, Dataset) {
    let norm = Normalization::fit(&train.samples);
    (train.with_normalization(&norm), test.with_normalization(&norm))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Deterministic shuffled split; the train part has `⌈n · fraction⌉` rows.
/// Rows keep their original relative order within each part.
pub fn split(ds: &Dataset, spec: SplitSpec) -> (Dataset, Dataset) {
    assert!(
        spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
        "train fraction must be in (0, 1), got {}",
        spec.train_fraction
    );
    let n = ds.len();
    // guard the ceiling against 0.76 * 645 = 490.2000000001-style noise
    let n_train = ((n as f64 * spec.train_fraction) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut derive_rng(spec.seed, Purpose::Split, 0));
    let mut train_idx = perm[..n_train].to_vec();
    let mut test_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize], suffix: &str| Dataset {
        name: format!("{}-{suffix}", ds.name),
        task: ds.task,
        input_dim: ds.input_dim,
        output_dim: ds.output_dim,
        samples: idx.iter().map(|&i| ds.samples[i].clone()).collect(),
        normalization: ds.normalization.clone(),
    };
    (pick(&train_idx, "train"), pick(&test_idx, "test"))
}
