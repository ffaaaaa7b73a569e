//! Independent oracles: closed-form regularized least squares, central finite
//! differences, the RLS ↔ stochastic-Newton cross-check, and full-gradient
//! norm traces.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix, SpdMatrix};
use crate::model::{Dims, Sample, SeparableModel};
use crate::optim::{NewtonState, RlsState};
use crate::rng::{derive_rng, Purpose};

/// Gradient-check step and tolerance.
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
/// Hidden units with `|pre-activation|` below this are excluded from FD checks.
pub const KINK_MARGIN: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub instance: String,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, max_abs_error: f64, tolerance: f64, instance: impl Into<String>) -> Self {
        OracleReport {
            name: name.into(),
            max_abs_error,
            tolerance,
            passed: max_abs_error <= tolerance,
            instance: instance.into(),
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<28} err={:<10.3e} tol={:<8.1e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.max_abs_error,
            self.tolerance,
            self.instance
        )
    }
}

/// `argmin_W Σᵢ ‖yᵢ − W hᵢ‖² + Σ_rows (W − W₀) B₀⁻¹ (W − W₀)ᵀ`, solved row by
/// row from the normal equations `(HᵀH + B₀⁻¹) wᵀ = Hᵀ y + B₀⁻¹ w₀ᵀ`.
pub fn batch_ls_oracle(features: &Matrix, targets: &Matrix, b0: &SpdMatrix, w0: &Matrix) -> Result<Matrix> {
    let (n, p) = (features.rows(), features.cols());
    if targets.rows() != n {
        return Err(Error::dim("batch_ls_oracle targets", n, targets.rows()));
    }
    if b0.dim() != p {
        return Err(Error::dim("batch_ls_oracle B0", p, b0.dim()));
    }
    let d_o = targets.cols();
    if (w0.rows(), w0.cols()) != (d_o, p) {
        return Err(Error::dim("batch_ls_oracle W0", d_o * p, w0.rows() * w0.cols()));
    }
    let prior = b0.inverse()?.into_matrix();
    let mut a = prior.clone();
    for r in 0..n {
        let h = features.row(r);
        for i in 0..p {
            for j in 0..p {
                a[(i, j)] += h[i] * h[j];
            }
        }
    }
    let chol = Cholesky::factor(&a)?;
    let mut w = Matrix::zeros(d_o, p);
    for o in 0..d_o {
        let mut rhs: Vec<f64> = (0..p).map(|i| dot(prior.row(i), w0.row(o))).collect();
        for r in 0..n {
            let y = targets[(r, o)];
            for (v, h) in rhs.iter_mut().zip(features.row(r)) {
                *v += h * y;
            }
        }
        w.row_mut(o).copy_from_slice(&chol.solve(&rhs));
    }
    Ok(w)
}

/// Gradient of the objective minimized by [`batch_ls_oracle`] (halved).
pub fn regularized_ls_grad(features: &Matrix, targets: &Matrix, b0: &SpdMatrix, w0: &Matrix, w: &Matrix) -> Result<Matrix> {
    let prior = b0.inverse()?.into_matrix();
    let mut g = Matrix::zeros(w.rows(), w.cols());
    for o in 0..w.rows() {
        let diff: Vec<f64> = w.row(o).iter().zip(w0.row(o)).map(|(a, b)| a - b).collect();
        for i in 0..w.cols() {
            g[(o, i)] = dot(prior.row(i), &diff);
        }
        for r in 0..features.rows() {
            let h = features.row(r);
            let resid = dot(w.row(o), h) - targets[(r, o)];
            for (gi, hi) in g.row_mut(o).iter_mut().zip(h) {
                *gi += resid * hi;
            }
        }
    }
    Ok(g)
}

/// Central differences `(f(x + s eᵢ) − f(x − s eᵢ)) / 2s`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, at: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut x = at.to_vec();
    (0..at.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x);
            x[i] = orig - step;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| dot(v, v).sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-8)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub theta_rel_error: f64,
    pub alpha_rel_error: f64,
    /// θ coordinates excluded because their hidden unit sits near the ReLU kink.
    pub skipped: usize,
}

/// Compares `grad_theta` and `grad_alpha` against central differences of
/// `loss`, skipping θ coordinates of near-kink hidden units.
pub fn check_model_gradients(model: &SeparableModel, s: &Sample, step: f64) -> GradCheck {
    let dims = model.dims();
    let z = model.extractor.pre_activations(&s.x);
    let near_kink: Vec<bool> = z.iter().map(|v| v.abs() < KINK_MARGIN).collect();
    let unit_of = |i: usize| if i < dims.hidden * dims.input { i / dims.input } else { i - dims.hidden * dims.input };

    let analytic = model.grad_theta(s);
    let mut probe = model.clone();
    let numeric = fd_gradient(
        |t| {
            probe.theta_mut().copy_from_slice(t);
            probe.loss(s)
        },
        model.theta(),
        step,
    );
    let keep: Vec<usize> = (0..analytic.len()).filter(|&i| !near_kink[unit_of(i)]).collect();
    let a: Vec<f64> = keep.iter().map(|&i| analytic[i]).collect();
    let n: Vec<f64> = keep.iter().map(|&i| numeric[i]).collect();
    let theta_rel_error = relative_error(&a, &n);

    let analytic_w = model.grad_alpha(s);
    let mut probe = model.clone();
    let numeric_w = fd_gradient(
        |w| {
            probe.head.as_mut_slice().copy_from_slice(w);
            probe.loss(s)
        },
        model.head.as_slice(),
        step,
    );
    GradCheck {
        theta_rel_error,
        alpha_rel_error: relative_error(analytic_w.as_slice(), &numeric_w),
        skipped: analytic.len() - keep.len(),
    }
}

/// Runs RLS from `(W₀, B₀)` and the stochastic Newton recursion with
/// `H₀ = B₀⁻¹`, `γₖ = 1/(k+1)` over the same `(h, y)` stream, reporting the
/// largest deviation between the two head trajectories.
pub fn trajectory_equivalence(stream: &[(Vec<f64>, Vec<f64>)], w0: &Matrix, b0: &SpdMatrix, tol: f64) -> Result<OracleReport> {
    let mut rls = RlsState::new(b0.clone());
    let mut newton = NewtonState::rls_equivalent(b0, 1.0)?;
    let (mut wa, mut wb) = (w0.clone(), w0.clone());
    let mut worst = 0.0f64;
    let mut yhat = Vec::new();
    for (k, (h, y)) in stream.iter().enumerate() {
        crate::linalg::matvec_into(&wa, h, &mut yhat);
        rls.rls_step(&mut wa, h, y, &yhat)?;
        crate::linalg::matvec_into(&wb, h, &mut yhat);
        let gamma = 1.0 / (k as f64 + 2.0);
        newton.newton_step(&mut wb, h, y, &yhat, gamma)?;
        worst = worst.max(wa.max_abs_diff(&wb));
    }
    Ok(OracleReport::new(
        "rls-newton trajectory",
        worst,
        tol,
        format!("p={} d_o={} steps={}", w0.cols(), w0.rows(), stream.len()),
    ))
}

/// `‖∇f‖₂` of the mean objective over `samples`, head and extractor blocks
/// concatenated.
pub fn full_grad_norm(model: &SeparableModel, samples: &[Sample]) -> Result<f64> {
    let (_, gw, gt) = model.full_objective_and_grad(samples)?;
    Ok((dot(gw.as_slice(), gw.as_slice()) + dot(&gt, &gt)).sqrt())
}

pub fn grad_norm_trace(snapshots: &[(u64, SeparableModel)], samples: &[Sample]) -> Result<Vec<(u64, f64)>> {
    snapshots
        .iter()
        .map(|(k, m)| Ok((*k, full_grad_norm(m, samples)?)))
        .collect()
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with eigenvalues log-spaced on
/// `[scale / cond, scale]`.
pub fn random_spd(p: usize, cond: f64, scale: f64, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let q = random_orthogonal(p, rng);
    let eig: Vec<f64> = (0..p)
        .map(|i| {
            let t = if p == 1 { 1.0 } else { i as f64 / (p - 1) as f64 };
            scale * cond.powf(-t)
        })
        .collect();
    let m = Matrix::from_fn(p, p, |i, j| (0..p).map(|k| q[(i, k)] * eig[k] * q[(j, k)]).sum());
    let sym = Matrix::from_fn(p, p, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    SpdMatrix::new(sym).expect("well-conditioned by construction")
}

fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // modified Gram-Schmidt on Gaussian columns, stored as columns of q
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let proj = dot(&v, c);
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            cols.push(v);
        }
    }
    Matrix::from_fn(p, p, |i, j| cols[j][i])
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Rank-1 downdate against the direct route `(B⁻¹ + h hᵀ)⁻¹`.
pub fn sherman_morrison_report(cases: usize, max_p: usize, cond: f64, seed: u64) -> Result<OracleReport> {
    let mut rng = derive_rng(seed, Purpose::Synthetic, 10);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let p = rng.random_range(1..=max_p);
        let b = random_spd(p, cond, 1.0, &mut rng);
        let h = gaussian_vec(p, &mut rng);
        let fast = crate::linalg::sherman_morrison_downdate(&b, &h)?;
        let mut direct = b.inverse()?.into_matrix();
        for i in 0..p {
            for j in 0..p {
                direct[(i, j)] += h[i] * h[j];
            }
        }
        let direct = Cholesky::factor(&direct)?.inverse();
        worst = worst.max(fast.matrix().max_abs_diff(&direct));
    }
    Ok(OracleReport::new(
        "sherman-morrison identity",
        worst,
        1e-8,
        format!("cases={cases} p<={max_p} cond<={cond:e} seed={seed}"),
    ))
}

/// One pass of RLS over a random frozen-feature instance against
/// [`batch_ls_oracle`].
pub fn rls_batch_report(n: usize, p: usize, d_o: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = derive_rng(seed, Purpose::Synthetic, 11);
    let features = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let targets = Matrix::from_fn(n, d_o, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
    let w0 = Matrix::from_fn(d_o, p, |_, _| rng.sample(StandardNormal));
    let delta = 10f64.powf(rng.random_range(-1.0..3.0));
    let b0 = SpdMatrix::scaled_identity(p, delta);

    let mut rls = RlsState::new(b0.clone());
    let mut w = w0.clone();
    let mut yhat = Vec::new();
    for r in 0..n {
        crate::linalg::matvec_into(&w, features.row(r), &mut yhat);
        rls.rls_step(&mut w, features.row(r), targets.row(r), &yhat)?;
    }
    let oracle = batch_ls_oracle(&features, &targets, &b0, &w0)?;
    Ok(OracleReport::new(
        "rls vs batch least squares",
        w.max_abs_diff(&oracle),
        1e-7,
        format!("n={n} p={p} d_o={d_o} delta={delta:.3e} seed={seed}"),
    ))
}

/// Newton/RLS cross-check on a random stream.
pub fn trajectory_report(p: usize, d_o: usize, steps: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = derive_rng(seed, Purpose::Synthetic, 12);
    let stream: Vec<(Vec<f64>, Vec<f64>)> = (0..steps)
        .map(|_| (gaussian_vec(p, &mut rng), gaussian_vec(d_o, &mut rng)))
        .collect();
    let w0 = Matrix::from_fn(d_o, p, |_, _| rng.sample(StandardNormal));
    let b0 = SpdMatrix::scaled_identity(p, 10.0);
    let mut report = trajectory_equivalence(&stream, &w0, &b0, 1e-8)?;
    report.instance.push_str(&format!(" seed={seed}"));
    Ok(report)
}

/// Gradient check over `cases` random small models.
pub fn gradient_report(cases: usize, seed: u64) -> OracleReport {
    let mut rng = derive_rng(seed, Purpose::Synthetic, 13);
    let mut worst = 0.0f64;
    for c in 0..cases {
        let dims = Dims::new(rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=3));
        let model = SeparableModel::init_kaiming_uniform(dims, seed.wrapping_mul(1000).wrapping_add(c as u64));
        let s = Sample::new(gaussian_vec(dims.input, &mut rng), gaussian_vec(dims.output, &mut rng));
        let gc = check_model_gradients(&model, &s, FD_STEP);
        worst = worst.max(gc.theta_rel_error).max(gc.alpha_rel_error);
    }
    OracleReport::new(
        "gradient vs finite differences",
        worst,
        FD_REL_TOL,
        format!("cases={cases} d,hidden<=8 seed={seed}"),
    )
}

/// Everything the `verify` subcommand prints.
pub fn run_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut out = vec![
        sherman_morrison_report(100, 20, 1e6, seed)?,
        rls_batch_report(300, 20, 3, seed)?,
        trajectory_report(10, 2, 200, seed)?,
        gradient_report(100, seed),
    ];
    let quad = fd_gradient(|x| 0.5 * x[0] * x[0], &[3.0], FD_STEP);
    out.push(OracleReport::new("fd on quadratic", (quad[0] - 3.0).abs(), 1e-8, "f=x^2/2 at 3"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_ls_examples() {
        // δ → ∞: exact interpolation y/h
        let w = batch_ls_oracle(
            &Matrix::from_rows(&[&[2.0]]),
            &Matrix::from_rows(&[&[3.0]]),
            &SpdMatrix::scaled_identity(1, 1e12),
            &Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!((w[(0, 0)] - 1.5).abs() < 1e-9);

        let w = batch_ls_oracle(
            &Matrix::from_rows(&[&[1.0]]),
            &Matrix::from_rows(&[&[1.0]]),
            &SpdMatrix::scaled_identity(1, 1.0),
            &Matrix::zeros(1, 1),
        )
        .unwrap();
        assert!((w[(0, 0)] - 0.5).abs() < 1e-15);

        // orthonormal columns: W ≈ Hᵀ y row-wise
        let h = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let y = Matrix::from_rows(&[&[2.0], &[-1.0], &[7.0]]);
        let w = batch_ls_oracle(&h, &y, &SpdMatrix::scaled_identity(2, 1e10), &Matrix::zeros(1, 2)).unwrap();
        assert!((w[(0, 0)] - 2.0).abs() < 1e-8 && (w[(0, 1)] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn batch_ls_zeroes_its_gradient() {
        let mut rng = derive_rng(1, Purpose::Synthetic, 0);
        let h = Matrix::from_fn(40, 6, |_, _| rng.sample(StandardNormal));
        let y = Matrix::from_fn(40, 2, |_, _| rng.sample(StandardNormal));
        let w0 = Matrix::from_fn(2, 6, |_, _| rng.sample(StandardNormal));
        let b0 = random_spd(6, 100.0, 5.0, &mut rng);
        let w = batch_ls_oracle(&h, &y, &b0, &w0).unwrap();
        let g = regularized_ls_grad(&h, &y, &b0, &w0, &w).unwrap();
        assert!(g.max_abs() <= 1e-8, "{}", g.max_abs());
    }

    #[test]
    fn fd_examples() {
        let g = fd_gradient(|x| 0.5 * x[0] * x[0], &[3.0], 1e-6);
        assert!((g[0] - 3.0).abs() < 1e-8);
        assert_eq!(fd_gradient(|_| 4.0, &[1.0, 2.0], 1e-6), vec![0.0, 0.0]);
        let g = fd_gradient(|x| x[0] * x[0] + 3.0 * x[0] * x[1], &[1.0, -2.0], 1e-3);
        assert!((g[0] - (2.0 - 6.0)).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn trajectory_examples() {
        let report = trajectory_report(1, 1, 50, 3).unwrap();
        assert!(report.passed, "{report}");

        // zero residuals keep W fixed on both sides
        let w0 = Matrix::from_rows(&[&[1.0, -1.0]]);
        let stream: Vec<_> = (0..10)
            .map(|i| {
                let h = vec![i as f64, 1.0];
                let y = vec![i as f64 - 1.0];
                (h, y)
            })
            .collect();
        let r = trajectory_equivalence(&stream, &w0, &SpdMatrix::scaled_identity(2, 5.0), 1e-12).unwrap();
        assert_eq!(r.max_abs_error, 0.0);
    }

    #[test]
    fn grad_norm_at_planted_optimum() {
        let (ds, planted) = crate::data::gen_synthetic(crate::data::SynthSpec {
            d: 3,
            hidden: 5,
            d_o: 2,
            n_samples: 100,
            noise_std: 0.0,
            seed: 1,
        });
        let trace = grad_norm_trace(
            &[(0, planted.clone()), (1, SeparableModel::init_kaiming_uniform(planted.dims(), 9))],
            &ds.samples,
        )
        .unwrap();
        assert!(trace[0].1 <= 1e-9);
        assert!(trace[1].1 > 0.0);
    }

    #[test]
    fn report_pass_flag_follows_tolerance() {
        assert!(OracleReport::new("a", 1e-9, 1e-8, "").passed);
        assert!(!OracleReport::new("a", 2e-8, 1e-8, "").passed);
        assert!(!OracleReport::new("a", f64::NAN, 1e-8, "").passed);
    }

    #[test]
    fn suite_is_deterministic_and_green() {
        let a = run_suite(0).unwrap();
        let b = run_suite(0).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!(r.passed, "{r}");
        }
    }
}
