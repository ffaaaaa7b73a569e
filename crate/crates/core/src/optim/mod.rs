//! Parameter updates: head updaters, first-order updaters, step schedules,
//! and the composite optimizers that combine them.

mod first_order;
mod head;
mod schedule;

pub use first_order::{Hyper, ThetaUpdater, UpdaterKind};
pub use head::{HeadUpdater, NewtonGain, NewtonState, RlsState};
pub use schedule::{batch_decay_count, StepSchedule};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::model::{half_sq_error, FeatureExtractor, Sample, SeparableModel};

/// Where in training a step happens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepContext {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Nominal batch size (the final batch of an epoch may be shorter).
    pub batch_size: usize,
}

impl StepContext {
    pub fn online() -> Self {
        StepContext { epoch: 1, batch_size: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub iteration: u64,
    /// Mean `½‖y − ŷ‖²` over the batch, before the update.
    pub batch_loss: f64,
    /// Samples that went through the head update.
    pub head_samples: usize,
}

/// Anything that can train a [`SeparableModel`] one batch at a time.
pub trait Optimizer: Send {
    fn step(
        &mut self,
        model: &mut SeparableModel,
        batch: &[&Sample],
        ctx: StepContext,
        rng: &mut dyn RngCore,
    ) -> Result<StepStats>;

    fn iteration(&self) -> u64;

    /// Head gain matrix, when the optimizer maintains one.
    fn gain_matrix(&self) -> Option<&SpdMatrix> {
        None
    }
}

/// Block-coordinate optimizer: a second-order head update on each selected
/// sample, then one first-order extractor step whose gradient is taken at the
/// already-updated head (Gauss-Seidel order).
#[derive(Clone, Debug)]
pub struct SepsaOptimizer<H = RlsState> {
    pub head: H,
    pub theta: ThetaUpdater,
    pub schedule: StepSchedule,
    /// Apply the per-epoch halving of the head sample count.
    pub decay_head_batch: bool,
    k: u64,
}

impl SepsaOptimizer<RlsState> {
    /// RLS head with `B₀ = δ I`.
    pub fn rls(p: usize, theta_len: usize, delta: f64, theta_kind: UpdaterKind, schedule: StepSchedule) -> Self {
        SepsaOptimizer::new(
            RlsState::with_scale(p, delta),
            ThetaUpdater::new(theta_kind, theta_len),
            schedule,
        )
    }
}

impl<H: HeadUpdater> SepsaOptimizer<H> {
    pub fn new(head: H, theta: ThetaUpdater, schedule: StepSchedule) -> Self {
        SepsaOptimizer {
            head,
            theta,
            schedule,
            decay_head_batch: true,
            k: 0,
        }
    }

    pub fn sepsa_step<E: FeatureExtractor>(
        &mut self,
        model: &mut SeparableModel<E>,
        batch: &[&Sample],
        ctx: StepContext,
        rng: &mut dyn RngCore,
    ) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::Empty("sepsa_step batch"));
        }
        for s in batch {
            model.check_sample(s)?;
        }
        self.k += 1;
        let (gamma, beta) = self.schedule.next(self.k);

        // θ stays at θₖ₋₁ until the end of the step, so features are computed once.
        let feats: Vec<Vec<f64>> = batch.iter().map(|s| model.features(&s.x)).collect();
        let mut yhat = Vec::with_capacity(model.output_dim());
        let mut batch_loss = 0.0;
        for (s, h) in batch.iter().zip(&feats) {
            crate::linalg::matvec_into(&model.head, h, &mut yhat);
            batch_loss += half_sq_error(&s.y, &yhat);
        }
        batch_loss /= batch.len() as f64;

        let n_head = if self.decay_head_batch {
            batch_decay_count(ctx.epoch, ctx.batch_size.max(batch.len())).min(batch.len())
        } else {
            batch.len()
        };
        let selected: Vec<usize> = if n_head == batch.len() {
            (0..batch.len()).collect()
        } else {
            rand::seq::index::sample(rng, batch.len(), n_head).into_vec()
        };
        for &j in &selected {
            crate::linalg::matvec_into(&model.head, &feats[j], &mut yhat);
            self.head.update(&mut model.head, &feats[j], &batch[j].y, &yhat, gamma)?;
        }

        let mut grad = vec![0.0; model.theta().len()];
        let scale = 1.0 / batch.len() as f64;
        for (s, h) in batch.iter().zip(&feats) {
            crate::linalg::matvec_into(&model.head, h, &mut yhat);
            model.accumulate_grad_theta(&s.x, &yhat, &s.y, scale, &mut grad);
        }
        self.theta.step(model.theta_mut(), &grad, beta);
        if let Some(index) = model.theta().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("extractor step {}", self.k),
                index,
            });
        }

        Ok(StepStats {
            iteration: self.k,
            batch_loss,
            head_samples: selected.len(),
        })
    }
}

impl<H: HeadUpdater> Optimizer for SepsaOptimizer<H> {
    fn step(
        &mut self,
        model: &mut SeparableModel,
        batch: &[&Sample],
        ctx: StepContext,
        rng: &mut dyn RngCore,
    ) -> Result<StepStats> {
        self.sepsa_step(model, batch, ctx, rng)
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn gain_matrix(&self) -> Option<&SpdMatrix> {
        self.head.gain_matrix()
    }
}

/// Baseline: the same first-order rule applied jointly to `W` and `θ`, with
/// both gradients taken at the current point.
#[derive(Clone, Debug)]
pub struct FirstOrderOptimizer {
    head: ThetaUpdater,
    theta: ThetaUpdater,
    schedule: StepSchedule,
    k: u64,
}

impl FirstOrderOptimizer {
    pub fn new(kind: UpdaterKind, head_len: usize, theta_len: usize, schedule: StepSchedule) -> Self {
        FirstOrderOptimizer {
            head: ThetaUpdater::new(kind, head_len),
            theta: ThetaUpdater::new(kind, theta_len),
            schedule,
            k: 0,
        }
    }

    pub fn kind(&self) -> UpdaterKind {
        self.theta.kind()
    }
}

impl Optimizer for FirstOrderOptimizer {
    fn step(
        &mut self,
        model: &mut SeparableModel,
        batch: &[&Sample],
        _ctx: StepContext,
        _rng: &mut dyn RngCore,
    ) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::Empty("first-order step batch"));
        }
        for s in batch {
            model.check_sample(s)?;
        }
        self.k += 1;
        let (_, lr) = self.schedule.next(self.k);
        let scale = 1.0 / batch.len() as f64;
        let mut gw = Matrix::zeros(model.output_dim(), model.feature_dim());
        let mut gt = vec![0.0; model.theta().len()];
        let mut batch_loss = 0.0;
        for s in batch {
            let f = model.forward(&s.x);
            batch_loss += half_sq_error(&s.y, &f.yhat) * scale;
            for i in 0..model.output_dim() {
                let r = (f.yhat[i] - s.y[i]) * scale;
                for (g, h) in gw.row_mut(i).iter_mut().zip(&f.h) {
                    *g += r * h;
                }
            }
            model.accumulate_grad_theta(&s.x, &f.yhat, &s.y, scale, &mut gt);
        }
        self.head.step(model.head.as_mut_slice(), gw.as_slice(), lr);
        self.theta.step(model.theta_mut(), &gt, lr);
        if !model.is_finite() {
            return Err(Error::NonFinite {
                context: format!("{} step {}", self.kind(), self.k),
                index: 0,
            });
        }
        Ok(StepStats {
            iteration: self.k,
            batch_loss,
            head_samples: 0,
        })
    }

    fn iteration(&self) -> u64 {
        self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use crate::rng::{derive_rng, Purpose};

    fn setup(seed: u64) -> (SeparableModel, Vec<Sample>) {
        let model = SeparableModel::init_kaiming_uniform(Dims::new(3, 4, 2), seed);
        let samples = (0..6)
            .map(|i| {
                let t = i as f64;
                Sample::new(vec![t.sin(), (0.3 * t).cos(), 0.1 * t - 0.2], vec![t * 0.5 - 1.0, 2.0 - t])
            })
            .collect();
        (model, samples)
    }

    #[test]
    fn perfect_fit_only_downdates() {
        let (mut model, samples) = setup(1);
        let s = Sample::new(samples[0].x.clone(), model.predict(&samples[0].x));
        let before = model.clone();
        let mut opt = SepsaOptimizer::rls(model.feature_dim(), model.theta().len(), 100.0, UpdaterKind::Sgd, StepSchedule::constant(0.1));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        opt.sepsa_step(&mut model, &[&s], StepContext::online(), &mut rng).unwrap();
        assert_eq!(model, before);
        assert!(opt.head.b().matrix().max_abs_diff(SpdMatrix::scaled_identity(5, 100.0).matrix()) > 0.0);
    }

    #[test]
    fn repeated_sample_residual_shrinks() {
        let (mut model, samples) = setup(2);
        let s = &samples[3];
        let before = model.loss(s);
        let mut opt = SepsaOptimizer::rls(model.feature_dim(), model.theta().len(), 100.0, UpdaterKind::Sgd, StepSchedule::constant(1e-3));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        let ctx = StepContext { epoch: 1, batch_size: 2 };
        opt.sepsa_step(&mut model, &[s, s], ctx, &mut rng).unwrap();
        assert!(model.loss(s) < before);
    }

    /// Recomputes one step by hand: RLS over the batch under θₖ₋₁, then the
    /// mean extractor gradient at (Wₖ, θₖ₋₁).
    #[test]
    fn gradient_is_taken_at_updated_head() {
        let (model0, samples) = setup(3);
        let batch: Vec<&Sample> = samples.iter().take(3).collect();
        let ctx = StepContext { epoch: 1, batch_size: 3 };
        let lr = 0.05;

        let mut model = model0.clone();
        let mut opt = SepsaOptimizer::rls(model.feature_dim(), model.theta().len(), 10.0, UpdaterKind::Sgd, StepSchedule::constant(lr));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        opt.sepsa_step(&mut model, &batch, ctx, &mut rng).unwrap();

        let mut manual = model0.clone();
        let mut rls = RlsState::with_scale(manual.feature_dim(), 10.0);
        for s in &batch {
            let f = manual.forward(&s.x);
            rls.rls_step(&mut manual.head, &f.h, &s.y, &f.yhat).unwrap();
        }
        assert_eq!(manual.head, model.head);
        let mut g = vec![0.0; manual.theta().len()];
        for s in &batch {
            let gs = manual.grad_theta(s);
            g.iter_mut().zip(&gs).for_each(|(a, b)| *a += b / 3.0);
        }
        manual.theta_mut().iter_mut().zip(&g).for_each(|(t, gi)| *t -= lr * gi);
        for (a, b) in manual.theta().iter().zip(model.theta()) {
            assert!((a - b).abs() < 1e-14);
        }

        // Jacobi order (gradient at the old head) lands somewhere else.
        let mut jacobi = model0.clone();
        let mut g_old = vec![0.0; jacobi.theta().len()];
        for s in &batch {
            let gs = model0.grad_theta(s);
            g_old.iter_mut().zip(&gs).for_each(|(a, b)| *a += b / 3.0);
        }
        jacobi.head = manual.head.clone();
        jacobi.theta_mut().iter_mut().zip(&g_old).for_each(|(t, gi)| *t -= lr * gi);
        let diff = jacobi
            .theta()
            .iter()
            .zip(model.theta())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff > 1e-6, "orders should differ, got {diff}");
    }

    #[test]
    fn decayed_head_subset() {
        let (mut model, samples) = setup(4);
        let batch: Vec<&Sample> = samples.iter().collect();
        let mut opt = SepsaOptimizer::rls(model.feature_dim(), model.theta().len(), 100.0, UpdaterKind::Adam, StepSchedule::constant(1e-3));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        let st = opt.sepsa_step(&mut model, &batch, StepContext { epoch: 2, batch_size: 6 }, &mut rng).unwrap();
        assert_eq!(st.head_samples, 3);
        let st = opt.sepsa_step(&mut model, &batch[..2], StepContext { epoch: 1, batch_size: 6 }, &mut rng).unwrap();
        assert_eq!(st.head_samples, 2);
        assert_eq!(opt.iteration(), 2);
    }

    #[test]
    fn empty_batch_is_error() {
        let (mut model, _) = setup(5);
        let mut opt = SepsaOptimizer::rls(model.feature_dim(), model.theta().len(), 100.0, UpdaterKind::Adam, StepSchedule::constant(1e-3));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        assert!(matches!(
            opt.sepsa_step(&mut model, &[], StepContext::online(), &mut rng),
            Err(Error::Empty(_))
        ));
        let mut base = FirstOrderOptimizer::new(UpdaterKind::Sgd, 10, model.theta().len(), StepSchedule::constant(0.1));
        assert!(base.step(&mut model, &[], StepContext::online(), &mut rng).is_err());
    }

    #[test]
    fn first_order_sgd_matches_gradients() {
        let (model0, samples) = setup(6);
        let mut model = model0.clone();
        let mut opt = FirstOrderOptimizer::new(UpdaterKind::Sgd, 2 * 5, model.theta().len(), StepSchedule::constant(0.01));
        let mut rng = derive_rng(0, Purpose::Subset, 0);
        let batch: Vec<&Sample> = samples.iter().take(2).collect();
        let st = opt.step(&mut model, &batch, StepContext { epoch: 1, batch_size: 2 }, &mut rng).unwrap();
        let (f, gw, gt) = model0.full_objective_and_grad(&samples[..2]).unwrap();
        assert!((st.batch_loss - f).abs() < 1e-12);
        for (i, (a, g)) in model.head.as_slice().iter().zip(gw.as_slice()).enumerate() {
            assert!((a - (model0.head.as_slice()[i] - 0.01 * g)).abs() < 1e-14);
        }
        for (i, (a, g)) in model.theta().iter().zip(&gt).enumerate() {
            assert!((a - (model0.theta()[i] - 0.01 * g)).abs() < 1e-14);
        }
    }
}
