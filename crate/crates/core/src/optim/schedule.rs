use serde::{Deserialize, Serialize};

/// Generator of the per-iteration step sizes `(γₖ, βₖ)` for the head and
/// extractor blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum StepSchedule {
    /// `(lr, lr)` at every iteration.
    Constant { lr: f64 },
    /// `ηₖ = η₀ / (1 + k/τ)^ρ`, `γₖ = c ηₖ`, `βₖ = d ηₖ`. For `ρ ∈ (0.5, 1]`
    /// the steps satisfy `Σ ηₖ = ∞` and `Σ ηₖ² < ∞`.
    Decaying {
        eta0: f64,
        tau: f64,
        rho: f64,
        c: f64,
        d: f64,
    },
}

impl StepSchedule {
    pub fn constant(lr: f64) -> Self {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive, got {lr}");
        StepSchedule::Constant { lr }
    }

    pub fn decaying(eta0: f64, tau: f64, rho: f64, c: f64, d: f64) -> Result<Self, String> {
        if !(rho > 0.5 && rho <= 1.0) {
            return Err(format!("decay exponent must lie in (0.5, 1], got {rho}"));
        }
        for (name, v) in [("eta0", eta0), ("tau", tau), ("c", c), ("d", d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(StepSchedule::Decaying { eta0, tau, rho, c, d })
    }

    /// Base step `ηₖ` (the learning rate itself in constant mode).
    pub fn eta(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant { lr } => lr,
            StepSchedule::Decaying { eta0, tau, rho, .. } => eta0 / (1.0 + k as f64 / tau).powf(rho),
        }
    }

    /// `(γₖ, βₖ)` for iteration `k ≥ 1`.
    pub fn next(&self, k: u64) -> (f64, f64) {
        debug_assert!(k >= 1);
        match *self {
            StepSchedule::Constant { lr } => (lr, lr),
            StepSchedule::Decaying { c, d, .. } => {
                let eta = self.eta(k);
                (c * eta, d * eta)
            }
        }
    }

    /// Nominal learning rate used to label runs.
    pub fn nominal_lr(&self) -> f64 {
        match *self {
            StepSchedule::Constant { lr } => lr,
            StepSchedule::Decaying { eta0, d, .. } => eta0 * d,
        }
    }
}

/// Number of samples fed to the head update in epoch `epoch` (1-based):
/// `⌈0.5^(epoch−1) · batch_size⌉`, at least 1.
pub fn batch_decay_count(epoch: usize, batch_size: usize) -> usize {
    assert!(epoch >= 1, "epochs are 1-based");
    let shift = (epoch - 1).min(63) as u32;
    // exact ceiling of batch_size / 2^shift
    let denom = 1u128 << shift;
    let count = (batch_size as u128).div_ceil(denom) as usize;
    count.max(1)
}
