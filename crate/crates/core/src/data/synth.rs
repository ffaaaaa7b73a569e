use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Dataset, Task};
use crate::model::{Dims, Sample, SeparableModel};
use crate::rng::{derive_rng, Purpose};

/// A planted separable regression problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub d: usize,
    pub hidden: usize,
    pub d_o: usize,
    pub n_samples: usize,
    pub noise_std: f64,
    pub seed: u64,
}

/// Draws `x ~ N(0, I)` and `y = W* h(x; θ*) + ε` with `ε ~ N(0, σ² I)`.
/// The planted model is Kaiming-initialized from a seed derived from
/// `spec.seed` and returned alongside the data.
pub fn gen_synthetic(spec: SynthSpec) -> (Dataset, SeparableModel) {
    assert!(spec.n_samples > 0, "synthetic dataset needs samples");
    assert!(spec.noise_std >= 0.0, "noise std must be nonnegative");
    let dims = Dims::new(spec.d, spec.hidden, spec.d_o);
    let planted_seed: u64 = derive_rng(spec.seed, Purpose::Synthetic, 0).random();
    let planted = SeparableModel::init_kaiming_uniform(dims, planted_seed);

    let mut xs = derive_rng(spec.seed, Purpose::Synthetic, 1);
    let mut eps = derive_rng(spec.seed, Purpose::Synthetic, 2);
    let noise = Normal::new(0.0, spec.noise_std).expect("finite noise std");
    let samples = (0..spec.n_samples)
        .map(|_| {
            let x: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(&mut xs)).collect();
            let mut y = planted.predict(&x);
            if spec.noise_std > 0.0 {
                y.iter_mut().for_each(|v| *v += noise.sample(&mut eps));
            }
            Sample::new(x, y)
        })
        .collect();
    (Dataset::new("synthetic", Task::Regression, samples), planted)
}
