//! Second-order updaters for the linear head `W`.
//!
//! Both act on one sample at a time given the features `h` (computed under the
//! current extractor) and the prediction `ŷ = W h` made before the update.

use crate::error::{Error, Result};
use crate::linalg::{assert_spd, Cholesky, Matrix, SpdMatrix, SYMMETRY_TOL};

/// A per-sample update rule for the head.
pub trait HeadUpdater: Send {
    /// `gamma` is the scheduled head step size; updaters that absorb it
    /// (RLS) ignore it.
    fn update(&mut self, head: &mut Matrix, h: &[f64], y: &[f64], yhat: &[f64], gamma: f64) -> Result<()>;

    /// Current gain matrix (`B` for RLS), if the updater keeps one.
    fn gain_matrix(&self) -> Option<&SpdMatrix> {
        None
    }
}

fn check_dims(head: &Matrix, h: &[f64], y: &[f64], yhat: &[f64]) -> Result<()> {
    if h.len() != head.cols() {
        return Err(Error::dim("head update: features", head.cols(), h.len()));
    }
    if y.len() != head.rows() {
        return Err(Error::dim("head update: target", head.rows(), y.len()));
    }
    if yhat.len() != head.rows() {
        return Err(Error::dim("head update: prediction", head.rows(), yhat.len()));
    }
    Ok(())
}

fn check_head(head: &Matrix, what: &str, step: u64) -> Result<()> {
    match head.first_non_finite() {
        Some(index) => Err(Error::NonFinite {
            context: format!("{what} step {step}: head"),
            index,
        }),
        None => Ok(()),
    }
}

/// Recursive least squares: `B ← B − B h hᵀ B / (1 + hᵀ B h)`, then every
/// row `Wᵢ ← Wᵢ − B h (ŷᵢ − yᵢ)` with the downdated `B`.
///
/// One `B` is shared by all output rows since the curvature `E[h hᵀ]` does
/// not depend on the output index.
#[derive(Clone, Debug)]
pub struct RlsState {
    b: SpdMatrix,
    steps: u64,
}

impl RlsState {
    pub fn new(b0: SpdMatrix) -> Self {
        RlsState { b: b0, steps: 0 }
    }

    /// `B₀ = δ I`.
    pub fn with_scale(p: usize, delta: f64) -> Self {
        RlsState::new(SpdMatrix::scaled_identity(p, delta))
    }

    pub fn b(&self) -> &SpdMatrix {
        &self.b
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rls_step(&mut self, head: &mut Matrix, h: &[f64], y: &[f64], yhat: &[f64]) -> Result<()> {
        check_dims(head, h, y, yhat)?;
        let step = self.steps + 1;
        let gain = self.b.downdate_in_place(h).map_err(|e| match e {
            Error::NonFinite { context, index } => Error::NonFinite {
                context: format!("rls step {step}: {context}"),
                index,
            },
            other => other,
        })?;
        for (i, (yh, yt)) in yhat.iter().zip(y).enumerate() {
            let r = yh - yt;
            if r == 0.0 {
                continue;
            }
            for (w, g) in head.row_mut(i).iter_mut().zip(&gain) {
                *w -= g * r;
            }
        }
        self.steps = step;
        check_head(head, "rls", step)
    }
}

impl HeadUpdater for RlsState {
    fn update(&mut self, head: &mut Matrix, h: &[f64], y: &[f64], yhat: &[f64], _gamma: f64) -> Result<()> {
        self.rls_step(head, h, y, yhat)
    }

    fn gain_matrix(&self) -> Option<&SpdMatrix> {
        Some(&self.b)
    }
}

/// How [`NewtonState`] picks its step when driven through [`HeadUpdater`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NewtonGain {
    /// Use the scheduled `γₖ`.
    Scheduled,
    /// `γₖ = 1 / (k + k₀)`: with `H₀ = B₀⁻¹ / k₀` this reproduces RLS from `B₀`
    /// exactly, since then `(k + k₀) Hₖ = B₀⁻¹ + Σ h hᵀ = Bₖ⁻¹`.
    RlsEquivalent { prior_weight: f64 },
}

/// Stochastic Newton head update with a Robbins-Monro curvature estimate:
/// `H ← H + γ (h hᵀ − H)`, then `Wᵢ ← Wᵢ − γ H⁻¹ h (ŷᵢ − yᵢ)`.
#[derive(Clone, Debug)]
pub struct NewtonState {
    h_hat: Matrix,
    k: u64,
    gain: NewtonGain,
}

impl NewtonState {
    pub fn new(h0: SpdMatrix) -> Self {
        NewtonState {
            h_hat: h0.into_matrix(),
            k: 0,
            gain: NewtonGain::Scheduled,
        }
    }

    /// Initialization that tracks [`RlsState`] started from `b0`:
    /// `H₀ = B₀⁻¹ / k₀` with gains `1/(k + k₀)`.
    pub fn rls_equivalent(b0: &SpdMatrix, prior_weight: f64) -> Result<Self> {
        assert!(prior_weight > 0.0, "prior weight must be positive");
        let mut h0 = b0.inverse()?.into_matrix();
        h0.scale(1.0 / prior_weight);
        Ok(NewtonState {
            h_hat: h0,
            k: 0,
            gain: NewtonGain::RlsEquivalent { prior_weight },
        })
    }

    pub fn h_hat(&self) -> &Matrix {
        &self.h_hat
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn gain(&self) -> NewtonGain {
        self.gain
    }

    pub fn newton_step(&mut self, head: &mut Matrix, h: &[f64], y: &[f64], yhat: &[f64], gamma: f64) -> Result<()> {
        check_dims(head, h, y, yhat)?;
        self.k += 1;
        if gamma == 0.0 {
            return Ok(());
        }
        let p = h.len();
        for i in 0..p {
            for j in 0..p {
                let v = self.h_hat[(i, j)];
                self.h_hat[(i, j)] = v + gamma * (h[i] * h[j] - v);
            }
        }
        if !assert_spd(&self.h_hat, SYMMETRY_TOL) {
            return Err(Error::HessianBreakdown { step: self.k });
        }
        let chol = Cholesky::factor(&self.h_hat).map_err(|_| Error::HessianBreakdown { step: self.k })?;
        let dir = chol.solve(h);
        for (i, (yh, yt)) in yhat.iter().zip(y).enumerate() {
            let r = gamma * (yh - yt);
            for (w, d) in head.row_mut(i).iter_mut().zip(&dir) {
                *w -= r * d;
            }
        }
        check_head(head, "newton", self.k)
    }
}

impl HeadUpdater for NewtonState {
    fn update(&mut self, head: &mut Matrix, h: &[f64], y: &[f64], yhat: &[f64], gamma: f64) -> Result<()> {
        let gamma = match self.gain {
            NewtonGain::Scheduled => gamma,
            NewtonGain::RlsEquivalent { prior_weight } => 1.0 / (self.k as f64 + 1.0 + prior_weight),
        };
        self.newton_step(head, h, y, yhat, gamma)
    }
}
