use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// First-order update rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdaterKind {
    Sgd,
    Nag,
    RmsProp,
    Adam,
}

impl UpdaterKind {
    pub const ALL: [UpdaterKind; 4] = [UpdaterKind::Sgd, UpdaterKind::Nag, UpdaterKind::RmsProp, UpdaterKind::Adam];

    pub fn as_str(&self) -> &'static str {
        match self {
            UpdaterKind::Sgd => "sgd",
            UpdaterKind::Nag => "nag",
            UpdaterKind::RmsProp => "rmsprop",
            UpdaterKind::Adam => "adam",
        }
    }
}

impl fmt::Display for UpdaterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdaterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        UpdaterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown updater `{s}` (expected sgd, nag, rmsprop or adam)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyper {
    /// NAG momentum.
    pub momentum: f64,
    /// RMSprop squared-gradient decay.
    pub rms_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            momentum: 0.9,
            rms_decay: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Stateful first-order updater for one flat parameter block.
///
/// * SGD: `θ ← θ − β g`
/// * NAG: `v ← μ v + g`, `θ ← θ − β (g + μ v)` (single-gradient Nesterov form)
/// * RMSprop: `s ← ρ s + (1−ρ) g²`, `θ ← θ − β g / (√s + ε)`
/// * Adam: bias-corrected moments, `θ ← θ − β m̂ / (√v̂ + ε)`
#[derive(Clone, Debug)]
pub struct ThetaUpdater {
    kind: UpdaterKind,
    hyper: Hyper,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl ThetaUpdater {
    pub fn new(kind: UpdaterKind, len: usize) -> Self {
        ThetaUpdater::with_hyper(kind, len, Hyper::default())
    }

    pub fn with_hyper(kind: UpdaterKind, len: usize, hyper: Hyper) -> Self {
        let (first, second) = match kind {
            UpdaterKind::Sgd => (vec![], vec![]),
            UpdaterKind::Nag => (vec![0.0; len], vec![]),
            UpdaterKind::RmsProp => (vec![], vec![0.0; len]),
            UpdaterKind::Adam => (vec![0.0; len], vec![0.0; len]),
        };
        ThetaUpdater {
            kind,
            hyper,
            first,
            second,
            t: 0,
        }
    }

    pub fn kind(&self) -> UpdaterKind {
        self.kind
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(theta.len(), grad.len(), "theta/grad length mismatch");
        self.t += 1;
        let h = self.hyper;
        match self.kind {
            UpdaterKind::Sgd => {
                for (p, g) in theta.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            UpdaterKind::Nag => {
                assert_eq!(self.first.len(), theta.len());
                for ((p, g), v) in theta.iter_mut().zip(grad).zip(&mut self.first) {
                    *v = h.momentum * *v + g;
                    *p -= lr * (g + h.momentum * *v);
                }
            }
            UpdaterKind::RmsProp => {
                assert_eq!(self.second.len(), theta.len());
                for ((p, g), s) in theta.iter_mut().zip(grad).zip(&mut self.second) {
                    *s = h.rms_decay * *s + (1.0 - h.rms_decay) * g * g;
                    *p -= lr * g / (s.sqrt() + h.eps);
                }
            }
            UpdaterKind::Adam => {
                assert_eq!(self.first.len(), theta.len());
                let bc1 = 1.0 - h.beta1.powf(self.t as f64);
                let bc2 = 1.0 - h.beta2.powf(self.t as f64);
                for (((p, g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
                    *m = h.beta1 * *m + (1.0 - h.beta1) * g;
                    *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + h.eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_theta() {
        for kind in UpdaterKind::ALL {
            let mut u = ThetaUpdater::new(kind, 3);
            let mut theta = vec![1.0, -2.0, 0.5];
            u.step(&mut theta, &[0.0; 3], 0.1);
            assert_eq!(theta, vec![1.0, -2.0, 0.5], "{kind}");
        }
    }

    #[test]
    fn sgd_definition() {
        let mut u = ThetaUpdater::new(UpdaterKind::Sgd, 1);
        let mut theta = vec![1.0];
        u.step(&mut theta, &[2.0], 0.1);
        assert!((theta[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut u = ThetaUpdater::new(UpdaterKind::Adam, 3);
        let g = [3.0, -0.02, 250.0];
        let mut theta = vec![0.0; 3];
        u.step(&mut theta, &g, 0.01);
        for (t, g) in theta.iter().zip(&g) {
            // m̂ = g, v̂ = g², so the step is β g / (|g| + ε)
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((t - expected).abs() < 1e-15, "{t} vs {expected}");
            assert!((t + 0.01 * g.signum()).abs() < 1e-8);
        }
        assert_eq!(u.timestep(), 1);
    }

    #[test]
    fn nag_matches_hand_unrolled() {
        let mut u = ThetaUpdater::new(UpdaterKind::Nag, 1);
        let mut theta = vec![0.0];
        u.step(&mut theta, &[1.0], 0.1);
        // v = 1, θ = −0.1·(1 + 0.9)
        assert!((theta[0] + 0.19).abs() < 1e-15);
        u.step(&mut theta, &[1.0], 0.1);
        // v = 1.9, θ −= 0.1·(1 + 1.71)
        assert!((theta[0] + 0.19 + 0.271).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut u = ThetaUpdater::new(UpdaterKind::RmsProp, 1);
        let mut theta = vec![0.0];
        u.step(&mut theta, &[2.0], 0.01);
        // s = 0.1·4 = 0.4
        let expected = -0.01 * 2.0 / (0.4f64.sqrt() + 1e-8);
        assert!((theta[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("rmsprop".parse::<UpdaterKind>().unwrap(), UpdaterKind::RmsProp);
        assert!("lbfgs".parse::<UpdaterKind>().is_err());
    }
}
