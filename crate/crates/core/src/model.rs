//! Separable model `ŷ = W h(x; θ)`.
//!
//! `h` is a nonlinear feature extractor with a trailing constant-1 feature,
//! so the head bias lives in the last column of `W`. The only extractor built
//! here is a single ReLU hidden layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec_into, outer, Matrix};
use crate::rng::{derive_rng, Purpose};

/// One input/target pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Sample { x, y }
    }
}

/// Layer sizes: input `d`, hidden width, output `d_o`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Dims {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        assert!(input > 0 && hidden > 0 && output > 0, "dims must be positive: {input}/{hidden}/{output}");
        Dims { input, hidden, output }
    }

    /// Feature dimension seen by the head (`hidden + 1`).
    pub fn features(&self) -> usize {
        self.hidden + 1
    }

    /// Length of the flattened extractor parameter vector θ.
    pub fn theta_len(&self) -> usize {
        self.hidden * self.input + self.hidden
    }
}

/// Interface the separable model needs from its feature extractor.
///
/// Parameters are exposed as one flat vector so first-order updaters can act
/// on them without knowing the layer layout.
pub trait FeatureExtractor: Clone {
    fn input_dim(&self) -> usize;

    /// Number of features emitted, including the trailing constant 1.
    fn feature_dim(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Writes `h(x)` into `out` (resized as needed).
    fn features_into(&self, x: &[f64], out: &mut Vec<f64>);

    /// Accumulates `scale · ∂⟨dh, h(x)⟩/∂θ` into `grad`, where `dh` covers the
    /// non-constant features only.
    fn backprop_into(&self, x: &[f64], dh: &[f64], scale: f64, grad: &mut [f64]);
}

/// `h(x) = [ReLU(W₁ x + b₁); 1]`, with θ = (W₁ row-major, b₁).
#[derive(Clone, Debug, PartialEq)]
pub struct ReluLayer {
    input: usize,
    hidden: usize,
    theta: Vec<f64>,
}

impl ReluLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        ReluLayer {
            input,
            hidden,
            theta: vec![0.0; hidden * input + hidden],
        }
    }

    pub fn from_parts(w1: &Matrix, b1: &[f64]) -> Result<Self> {
        if w1.rows() != b1.len() {
            return Err(Error::dim("ReluLayer::from_parts", w1.rows(), b1.len()));
        }
        let mut theta = w1.as_slice().to_vec();
        theta.extend_from_slice(b1);
        Ok(ReluLayer {
            input: w1.cols(),
            hidden: w1.rows(),
            theta,
        })
    }

    pub fn from_flat(input: usize, hidden: usize, theta: Vec<f64>) -> Result<Self> {
        let want = hidden * input + hidden;
        if theta.len() != want {
            return Err(Error::dim("ReluLayer::from_flat", want, theta.len()));
        }
        Ok(ReluLayer { input, hidden, theta })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn w1(&self) -> Matrix {
        Matrix::from_vec(self.hidden, self.input, self.theta[..self.hidden * self.input].to_vec())
            .expect("layout")
    }

    pub fn b1(&self) -> &[f64] {
        &self.theta[self.hidden * self.input..]
    }

    /// Hidden pre-activations `W₁ x + b₁`.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.theta.split_at(self.hidden * self.input);
        (0..self.hidden)
            .map(|j| dot(&w[j * self.input..(j + 1) * self.input], x) + b[j])
            .collect()
    }
}

impl FeatureExtractor for ReluLayer {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn feature_dim(&self) -> usize {
        self.hidden + 1
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn features_into(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.input);
        let (w, b) = self.theta.split_at(self.hidden * self.input);
        out.clear();
        out.extend((0..self.hidden).map(|j| {
            let z = dot(&w[j * self.input..(j + 1) * self.input], x) + b[j];
            z.max(0.0)
        }));
        out.push(1.0);
    }

    fn backprop_into(&self, x: &[f64], dh: &[f64], scale: f64, grad: &mut [f64]) {
        debug_assert_eq!(dh.len(), self.hidden);
        let n_w = self.hidden * self.input;
        let (w, b) = self.theta.split_at(n_w);
        let (gw, gb) = grad.split_at_mut(n_w);
        for j in 0..self.hidden {
            let row = &w[j * self.input..(j + 1) * self.input];
            let z = dot(row, x) + b[j];
            // ReLU'(0) := 0
            if z <= 0.0 || dh[j] == 0.0 {
                continue;
            }
            let dz = scale * dh[j];
            gb[j] += dz;
            for (g, xi) in gw[j * self.input..(j + 1) * self.input].iter_mut().zip(x) {
                *g += dz * xi;
            }
        }
    }
}

/// Forward pass output.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub h: Vec<f64>,
    pub yhat: Vec<f64>,
}

/// `ŷ = W h(x; θ)` with `W` of shape `d_o × p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableModel<E = ReluLayer> {
    pub extractor: E,
    pub head: Matrix,
}

impl SeparableModel<ReluLayer> {
    pub fn zeros(dims: Dims) -> Self {
        SeparableModel {
            extractor: ReluLayer::zeros(dims.input, dims.hidden),
            head: Matrix::zeros(dims.output, dims.features()),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.extractor.input, self.extractor.hidden, self.head.rows())
    }

    /// Kaiming-uniform initialization for ReLU layers: weights uniform on
    /// `±√(6 / fan_in)`, biases uniform on `±1/√fan_in`. The hidden layer's
    /// fan-in is `d`; the head's is `p`. Deterministic in `seed`.
    pub fn init_kaiming_uniform(dims: Dims, seed: u64) -> Self {
        let mut rng = derive_rng(seed, Purpose::Init, 0);
        let mut model = SeparableModel::zeros(dims);

        let (d, hidden) = (dims.input, dims.hidden);
        let w_bound = (6.0 / d as f64).sqrt();
        let b_bound = 1.0 / (d as f64).sqrt();
        let theta = model.extractor.params_mut();
        for t in &mut theta[..hidden * d] {
            *t = rng.random_range(-w_bound..w_bound);
        }
        for t in &mut theta[hidden * d..] {
            *t = rng.random_range(-b_bound..b_bound);
        }

        let p = dims.features();
        let w_bound = (6.0 / p as f64).sqrt();
        let b_bound = 1.0 / (p as f64).sqrt();
        for i in 0..dims.output {
            let row = model.head.row_mut(i);
            for w in &mut row[..p - 1] {
                *w = rng.random_range(-w_bound..w_bound);
            }
            row[p - 1] = rng.random_range(-b_bound..b_bound);
        }
        model
    }
}

impl<E: FeatureExtractor> SeparableModel<E> {
    pub fn new(extractor: E, head: Matrix) -> Result<Self> {
        if head.cols() != extractor.feature_dim() {
            return Err(Error::dim("SeparableModel::new", extractor.feature_dim(), head.cols()));
        }
        Ok(SeparableModel { extractor, head })
    }

    pub fn input_dim(&self) -> usize {
        self.extractor.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.extractor.feature_dim()
    }

    pub fn theta(&self) -> &[f64] {
        self.extractor.params()
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        self.extractor.params_mut()
    }

    pub fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.x.len() != self.input_dim() {
            return Err(Error::dim("sample input", self.input_dim(), s.x.len()));
        }
        if s.y.len() != self.output_dim() {
            return Err(Error::dim("sample target", self.output_dim(), s.y.len()));
        }
        Ok(())
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.feature_dim());
        self.extractor.features_into(x, &mut h);
        h
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        let h = self.features(x);
        let mut yhat = Vec::with_capacity(self.output_dim());
        matvec_into(&self.head, &h, &mut yhat);
        Forward { h, yhat }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).yhat
    }

    /// `½‖y − ŷ‖²`.
    pub fn loss(&self, s: &Sample) -> f64 {
        let f = self.forward(&s.x);
        half_sq_error(&s.y, &f.yhat)
    }

    /// `∇_W F = (ŷ − y) hᵀ`.
    pub fn grad_alpha(&self, s: &Sample) -> Matrix {
        let f = self.forward(&s.x);
        let r: Vec<f64> = f.yhat.iter().zip(&s.y).map(|(a, b)| a - b).collect();
        outer(&r, &f.h)
    }

    /// `∇_θ F` by backpropagation through the extractor.
    pub fn grad_theta(&self, s: &Sample) -> Vec<f64> {
        let mut g = vec![0.0; self.theta().len()];
        let f = self.forward(&s.x);
        self.accumulate_grad_theta(&s.x, &f.yhat, &s.y, 1.0, &mut g);
        g
    }

    /// Adds `scale · ∇_θ F` to `grad` given an already-computed `ŷ`.
    pub fn accumulate_grad_theta(&self, x: &[f64], yhat: &[f64], y: &[f64], scale: f64, grad: &mut [f64]) {
        let p = self.feature_dim();
        // dF/dh = Wᵀ (ŷ − y), dropping the constant feature
        let mut dh = vec![0.0; p - 1];
        for (i, (a, b)) in yhat.iter().zip(y).enumerate() {
            let r = a - b;
            if r == 0.0 {
                continue;
            }
            for (d, w) in dh.iter_mut().zip(&self.head.row(i)[..p - 1]) {
                *d += r * w;
            }
        }
        self.extractor.backprop_into(x, &dh, scale, grad);
    }

    /// Mean loss and mean gradients over `samples`.
    pub fn full_objective_and_grad(&self, samples: &[Sample]) -> Result<(f64, Matrix, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::Empty("full_objective_and_grad"));
        }
        let scale = 1.0 / samples.len() as f64;
        let mut f = 0.0;
        let mut gw = Matrix::zeros(self.output_dim(), self.feature_dim());
        let mut gt = vec![0.0; self.theta().len()];
        for s in samples {
            self.check_sample(s)?;
            let fw = self.forward(&s.x);
            f += half_sq_error(&s.y, &fw.yhat) * scale;
            for i in 0..self.output_dim() {
                let r = (fw.yhat[i] - s.y[i]) * scale;
                for (g, h) in gw.row_mut(i).iter_mut().zip(&fw.h) {
                    *g += r * h;
                }
            }
            self.accumulate_grad_theta(&s.x, &fw.yhat, &s.y, scale, &mut gt);
        }
        Ok((f, gw, gt))
    }

    pub fn is_finite(&self) -> bool {
        self.theta().iter().all(|v| v.is_finite()) && self.head.first_non_finite().is_none()
    }
}

pub(crate) fn half_sq_error(y: &[f64], yhat: &[f64]) -> f64 {
    0.5 * y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SeparableModel {
        // d=2, hidden=2, W₁ = I, b₁ = 0
        let ex = ReluLayer::from_parts(&Matrix::identity(2), &[0.0, 0.0]).unwrap();
        SeparableModel::new(ex, Matrix::zeros(1, 3)).unwrap()
    }

    #[test]
    fn dead_relu_features() {
        let m = SeparableModel::zeros(Dims::new(3, 4, 1));
        assert_eq!(m.features(&[1.0, -2.0, 3.0]), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        assert_eq!(tiny().features(&[-1.0, 2.0]), vec![0.0, 2.0, 1.0]);
    }

    #[test]
    fn forward_zero_head_and_bias_only() {
        let m = tiny();
        assert_eq!(m.forward(&[3.0, 4.0]).yhat, vec![0.0]);

        let mut m = SeparableModel::zeros(Dims::new(2, 3, 2));
        m.head = Matrix::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        assert_eq!(m.forward(&[0.5, 0.5]).yhat, vec![4.0, 8.0]);
    }

    #[test]
    fn loss_examples() {
        let mut m = tiny();
        let s = Sample::new(vec![1.0, 1.0], vec![0.0]);
        assert_eq!(m.loss(&s), 0.0);
        assert_eq!(m.loss(&Sample::new(vec![1.0, 1.0], vec![1.0])), 0.5);

        m.head = Matrix::zeros(2, 3);
        assert_eq!(m.loss(&Sample::new(vec![1.0, 1.0], vec![1.0, 2.0])), 2.5);
    }

    #[test]
    fn grad_alpha_examples() {
        let m = tiny();
        assert_eq!(m.grad_alpha(&Sample::new(vec![1.0, 1.0], vec![0.0])), Matrix::zeros(1, 3));

        // h = (1) only: hidden 0-width isn't allowed, so use dead hidden units
        // and the bias feature: W = 0, y = 1 gives g = 1·(0 − 1) on the bias.
        let m = SeparableModel::zeros(Dims::new(1, 1, 1));
        let g = m.grad_alpha(&Sample::new(vec![1.0], vec![1.0]));
        assert_eq!(g, Matrix::from_rows(&[&[0.0, -1.0]]));
    }

    #[test]
    fn grad_theta_zero_cases() {
        let mut m = SeparableModel::init_kaiming_uniform(Dims::new(3, 5, 2), 7);
        let s = Sample::new(vec![0.3, -0.1, 0.8], vec![0.0, 0.0]);
        let y = m.predict(&s.x);
        assert!(m.grad_theta(&Sample::new(s.x.clone(), y)).iter().all(|&g| g == 0.0));

        // force every pre-activation negative
        let n_w = 5 * 3;
        for (i, t) in m.theta_mut().iter_mut().enumerate() {
            *t = if i < n_w { 0.0 } else { -1.0 };
        }
        assert!(m.grad_theta(&s).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn kaiming_is_deterministic_and_bounded() {
        let dims = Dims::new(100, 50, 2);
        let a = SeparableModel::init_kaiming_uniform(dims, 3);
        let b = SeparableModel::init_kaiming_uniform(dims, 3);
        let c = SeparableModel::init_kaiming_uniform(dims, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound = (6.0f64 / 100.0).sqrt();
        assert!(a.extractor.w1().as_slice().iter().all(|w| w.abs() <= bound));
        assert!(a.extractor.b1().iter().all(|b| b.abs() <= 0.1));
    }

    #[test]
    fn objective_is_mean_of_samples() {
        let m = SeparableModel::init_kaiming_uniform(Dims::new(2, 3, 1), 1);
        let s1 = Sample::new(vec![0.5, -1.0], vec![2.0]);
        let s2 = Sample::new(vec![1.5, 0.2], vec![-1.0]);

        let (f, gw, gt) = m.full_objective_and_grad(std::slice::from_ref(&s1)).unwrap();
        assert_eq!(f, m.loss(&s1));
        assert!(gw.max_abs_diff(&m.grad_alpha(&s1)) < 1e-15);
        assert_eq!(gt, m.grad_theta(&s1));

        let dup = vec![s1.clone(); 4];
        let (f4, gw4, gt4) = m.full_objective_and_grad(&dup).unwrap();
        assert!((f4 - f).abs() < 1e-15);
        assert!(gw4.max_abs_diff(&gw) < 1e-15);
        assert!(gt4.iter().zip(&gt).all(|(a, b)| (a - b).abs() < 1e-15));

        let (f2, gw2, _) = m.full_objective_and_grad(&[s1.clone(), s2.clone()]).unwrap();
        assert!((f2 - 0.5 * (m.loss(&s1) + m.loss(&s2))).abs() < 1e-12);
        let mut mean = m.grad_alpha(&s1);
        let g2 = m.grad_alpha(&s2);
        for (a, b) in mean.as_mut_slice().iter_mut().zip(g2.as_slice()) {
            *a = 0.5 * (*a + b);
        }
        assert!(gw2.max_abs_diff(&mean) < 1e-12);

        assert!(matches!(m.full_objective_and_grad(&[]), Err(Error::Empty(_))));
    }
}
