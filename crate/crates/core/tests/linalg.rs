use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sepsa::linalg::{assert_spd, matvec, outer, sherman_morrison_downdate, solve_spd, Cholesky, SYMMETRY_TOL};
use sepsa::verify::{gaussian_vec, random_spd};
use sepsa::{Matrix, SpdMatrix};

fn direct_downdate(b: &SpdMatrix, h: &[f64]) -> Matrix {
    let mut info = b.inverse().unwrap().into_matrix();
    let hh = outer(h, h);
    for (a, x) in info.as_mut_slice().iter_mut().zip(hh.as_slice()) {
        *a += x;
    }
    Cholesky::factor(&info).unwrap().inverse()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn downdate_matches_direct_inverse(p in 1usize..=12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // eigenvalues spread over [1e-6, 1]
        let b = random_spd(p, 1e6, 1.0, &mut rng);
        let h = gaussian_vec(p, &mut rng);
        let fast = sherman_morrison_downdate(&b, &h).unwrap();
        let err = fast.matrix().max_abs_diff(&direct_downdate(&b, &h));
        prop_assert!(err <= 1e-8, "err {err:e}");
    }

    #[test]
    fn downdate_stays_spd_and_shrinks(p in 1usize..=15, seed in any::<u64>(), steps in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b0 = random_spd(p, 1e3, 10.0, &mut rng);
        let mut b = b0.clone();
        for _ in 0..steps {
            let h = gaussian_vec(p, &mut rng);
            b.downdate_in_place(&h).unwrap();
            prop_assert!(assert_spd(b.matrix(), SYMMETRY_TOL));
            let m = b.matrix();
            for i in 0..p {
                for j in 0..p {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
        }
        // Loewner-decreasing: diagonal never grows
        for i in 0..p {
            prop_assert!(b.matrix()[(i, i)] <= b0.matrix()[(i, i)] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn solve_round_trip(p in 1usize..=20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(p, 1e4, 1.0, &mut rng);
        let rhs = gaussian_vec(p, &mut rng);
        let x = solve_spd(&a, &rhs).unwrap();
        let back = matvec(a.matrix(), &x).unwrap();
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let resid = back.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(resid <= 1e-9 * scale, "resid {resid:e}");
    }

    #[test]
    fn outer_entries(u in prop::collection::vec(-10.0f64..10.0, 1..6), v in prop::collection::vec(-10.0f64..10.0, 1..6)) {
        let m = outer(&u, &v);
        prop_assert_eq!((m.rows(), m.cols()), (u.len(), v.len()));
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                prop_assert_eq!(m[(i, j)], a * b);
            }
        }
    }
}

#[test]
fn zero_h_leaves_b_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = random_spd(6, 100.0, 2.0, &mut rng);
    assert_eq!(sherman_morrison_downdate(&b, &[0.0; 6]).unwrap(), b);
}

#[test]
fn non_spd_inputs_rejected() {
    let indefinite = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
    assert!(SpdMatrix::new(indefinite.clone()).is_err());
    assert!(!assert_spd(&indefinite, SYMMETRY_TOL));
    let asym = Matrix::from_rows(&[&[2.0, 0.1], &[0.0, 2.0]]);
    assert!(SpdMatrix::new(asym).is_err());
    assert!(matvec(&Matrix::identity(2), &[1.0, 2.0, 3.0]).is_err());
}
