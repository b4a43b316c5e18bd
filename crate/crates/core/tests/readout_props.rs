use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magnon_rc::readout::{
    backprop_grad, evaluate_scores, fit_ensemble, fit_linear, param_shift_grad, pinv, FeatureMatrix, MlpModel,
    MlpOutput,
};

fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= tol * (1.0 + b.amax())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn penrose_conditions(rows in 1usize..40, cols in 1usize..25, rank_cut in 0usize..5, seed in any::<u64>()) {
        let mut x = random(rows, cols, seed);
        // force some rank deficiency through repeated columns
        for c in 0..rank_cut.min(cols.saturating_sub(1)) {
            let src = x.column(0).into_owned();
            x.set_column(c + 1, &src);
        }
        let p = pinv(&x).unwrap();
        prop_assert!(close(&(&x * &p * &x), &x, 1e-9));
        prop_assert!(close(&(&p * &x * &p), &p, 1e-9));
        let xp = &x * &p;
        prop_assert!(close(&xp.transpose(), &xp, 1e-9));
        let px = &p * &x;
        prop_assert!(close(&px.transpose(), &px, 1e-9));
    }

    #[test]
    fn exact_recovery_of_a_planted_map(rows in 8usize..60, cols in 1usize..8, outs in 1usize..4, seed in any::<u64>()) {
        prop_assume!(rows >= cols + 2);
        let x = random(rows, cols, seed);
        let w = random(cols, outs, seed ^ 0x5eed);
        let m = fit_linear(&FeatureMatrix::new(x.clone()).unwrap(), &(&x * &w)).unwrap();
        prop_assert!((&m.w - &w).amax() <= 1e-8, "{}", (&m.w - &w).amax());
    }

    #[test]
    fn least_squares_beats_perturbations(rows in 5usize..50, cols in 1usize..10, seed in any::<u64>()) {
        let x = random(rows, cols, seed);
        let y = random(rows, 1, seed.wrapping_add(1));
        let xf = FeatureMatrix::new(x.clone()).unwrap();
        let m = fit_linear(&xf, &y).unwrap();
        let best = (&x * &m.w - &y).norm_squared();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        for _ in 0..100 {
            let dw = DMatrix::from_fn(cols, 1, |_, _| rng.random_range(-1e-3..1e-3));
            let r = (&x * (&m.w + dw) - &y).norm_squared();
            prop_assert!(r >= best - 1e-12 * (1.0 + best));
        }
    }

    #[test]
    fn one_member_ensemble_is_the_linear_map(rows in 2usize..40, cols in 1usize..10, seed in any::<u64>()) {
        let xf = FeatureMatrix::new(random(rows, cols, seed)).unwrap();
        let y = random(rows, 2, !seed);
        let lin = fit_linear(&xf, &y).unwrap().predict(&xf).unwrap();
        let ens = fit_ensemble(&xf, &y, 1).unwrap().predict(&xf).unwrap();
        prop_assert!((&lin - &ens).amax() <= 1e-12);
    }

    #[test]
    fn accuracy_ignores_row_order(rows in 1usize..60, classes in 1usize..5, seed in any::<u64>()) {
        let scores = random(rows, classes.max(1), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes.max(2))).collect();
        let mut perm: Vec<usize> = (0..rows).collect();
        for i in (1..rows).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = scores.select_rows(perm.iter());
        let lab: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(evaluate_scores(&scores, &labels), evaluate_scores(&shuffled, &lab));
    }

    #[test]
    fn shift_estimate_of_an_affine_function_is_exact(
        coef in prop::collection::vec(-5.0..5.0f64, 1..20),
        c in -5.0..5.0f64,
        delta in 1e-4..1e-1f64,
    ) {
        let n = coef.len();
        let mut calls = 0;
        let g = param_shift_grad(
            |p| {
                calls += 1;
                Ok(c + p.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
            },
            &vec![0.3; n],
            delta,
        )
        .unwrap();
        prop_assert_eq!(calls, n + 1);
        for (gi, ci) in g.iter().zip(&coef) {
            prop_assert!((gi - ci).abs() <= 1e-9 * (1.0 + ci.abs()) / delta.min(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backprop_agrees_with_shifted_loss(n_in in 1usize..6, hidden in 1usize..8, classes in 2usize..4, seed in any::<u64>()) {
        let output = if classes == 2 { MlpOutput::Sigmoid } else { MlpOutput::Softmax };
        let model = MlpModel::init(n_in, hidden, output, classes, seed);
        let x = FeatureMatrix::new(random(20, n_in, seed ^ 3)).unwrap();
        let labels: Vec<usize> = (0..20).map(|i| i % classes).collect();
        let bp = backprop_grad(&model, &x, &labels).unwrap();
        let fd = param_shift_grad(
            |p| model.with_params(p)?.loss(&x, &labels),
            &model.params(),
            1e-7,
        )
        .unwrap();
        let scale = bp.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-6);
        for (a, b) in bp.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 0.01 * scale, "{a} vs {b}");
        }
    }
}

/// Fixed large case: the pseudo-inverse of a 200×100 matrix.
#[test]
fn pinv_large() {
    let x = random(200, 100, 11);
    let p = pinv(&x).unwrap();
    assert!(close(&(&x * &p * &x), &x, 1e-9));
    assert!(close(&(&p * &x), &DMatrix::identity(100, 100), 1e-9));
}
