use proptest::prelude::*;
use sepsa::data::{gen_synthetic, SynthSpec};
use sepsa::verify::{check_model_gradients, full_grad_norm, gaussian_vec, FD_REL_TOL, FD_STEP};
use sepsa::{Dims, Sample, SeparableModel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gradients_match_finite_differences(
        d in 1usize..6, hidden in 1usize..8, d_o in 1usize..4, seed in any::<u64>(),
    ) {
        let dims = Dims::new(d, hidden, d_o);
        let model = SeparableModel::init_kaiming_uniform(dims, seed);
        let mut rng = sepsa::rng::derive_rng(seed, sepsa::rng::Purpose::Synthetic, 99);
        let s = Sample::new(gaussian_vec(d, &mut rng), gaussian_vec(d_o, &mut rng));
        let gc = check_model_gradients(&model, &s, FD_STEP);
        prop_assert!(gc.theta_rel_error <= FD_REL_TOL, "theta {:e}", gc.theta_rel_error);
        prop_assert!(gc.alpha_rel_error <= FD_REL_TOL, "alpha {:e}", gc.alpha_rel_error);
    }

    #[test]
    fn prediction_is_head_times_features(d in 1usize..6, hidden in 1usize..8, d_o in 1usize..4, seed in any::<u64>()) {
        let model = SeparableModel::init_kaiming_uniform(Dims::new(d, hidden, d_o), seed);
        let mut rng = sepsa::rng::derive_rng(seed, sepsa::rng::Purpose::Synthetic, 1);
        let x = gaussian_vec(d, &mut rng);
        let h = model.features(&x);
        prop_assert_eq!(h.len(), hidden + 1);
        prop_assert_eq!(*h.last().unwrap(), 1.0);
        prop_assert!(h.iter().all(|v| *v >= 0.0));
        let yhat = model.predict(&x);
        for (i, y) in yhat.iter().enumerate() {
            let direct: f64 = model.head.row(i).iter().zip(&h).map(|(w, h)| w * h).sum();
            prop_assert!((y - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn planted_noiseless_optimum_is_stationary() {
    let (ds, planted) = gen_synthetic(SynthSpec {
        d: 5,
        hidden: 7,
        d_o: 2,
        n_samples: 300,
        noise_std: 0.0,
        seed: 3,
    });
    assert!(full_grad_norm(&planted, &ds.samples).unwrap() <= 1e-9);
    let random = SeparableModel::init_kaiming_uniform(Dims::new(5, 7, 2), 77);
    assert!(full_grad_norm(&random, &ds.samples).unwrap() > 0.0);
}

#[test]
fn init_respects_fan_in_bounds() {
    let dims = Dims::new(9, 50, 2);
    let m = SeparableModel::init_kaiming_uniform(dims, 1);
    let w_bound = (6.0f64 / 9.0).sqrt();
    let (w1, b1) = m.theta().split_at(50 * 9);
    assert!(w1.iter().all(|w| w.abs() <= w_bound));
    assert!(b1.iter().all(|b| b.abs() <= 1.0 / 3.0));
    let head_bound = (6.0f64 / 51.0).sqrt();
    assert!(m.head.as_slice().iter().all(|w| w.abs() <= head_bound));
    assert_eq!(m, SeparableModel::init_kaiming_uniform(dims, 1));
    assert_ne!(m, SeparableModel::init_kaiming_uniform(dims, 2));
}
