mod common;

use common::*;
use iacv::datagen::{gen_logistic, gen_logistic_with_theta};
use iacv::metrics::{cv_loss, err_approx, err_cv};
use iacv::{Dataset, LooState, LossModel};
use ndarray::{array, Array1, Array2};

#[test]
fn cv_loss_on_hand_instance() {
    let data = Dataset::new(array![[1.0, 2.0], [-1.0, 0.5], [0.0, -3.0]], array![1.0, 0.0, 1.0]).unwrap();
    let rows = array![[0.1, 0.2], [-0.5, 1.0], [2.0, 0.3]];
    let st = LooState { rows: rows.clone(), t: 0 };
    // ℓ = log(1 + e^η) − yη at η = 0.5, 1.0, −0.9
    let want = ((1.0 + 0.5f64.exp()).ln() - 0.5 + (1.0 + 1.0f64.exp()).ln() + (1.0 + (-0.9f64).exp()).ln() + 0.9) / 3.0;
    let got = cv_loss(LossModel::Logistic, &data, &st).unwrap();
    assert!((got - want).abs() < 1e-15);
    let same = LooState { rows: Array2::from_shape_fn((3, 2), |(_, k)| rows[[0, k]]), t: 0 };
    let th = rows.row(0).to_vec();
    let direct: f64 = (0..3).map(|i| loss(LossModel::Logistic, &row(&data, i), data.y()[i], &th)).sum::<f64>() / 3.0;
    assert!((cv_loss(LossModel::Logistic, &data, &same).unwrap() - direct).abs() < 1e-15);
}

#[test]
fn err_approx_matches_direct_formula() {
    let mut r = rng(3);
    let a = Array2::from_shape_vec((5, 3), normal_vec(&mut r, 15, 1.0)).unwrap();
    let b = Array2::from_shape_vec((5, 3), normal_vec(&mut r, 15, 1.0)).unwrap();
    let want = (0..5).map(|i| norm(&sub(&a.row(i).to_vec(), &b.row(i).to_vec()))).sum::<f64>() / 5.0;
    let got = err_approx(&LooState { rows: a, t: 1 }, &LooState { rows: b, t: 1 }).unwrap();
    assert!((got - want).abs() < 1e-15);
}

#[test]
fn err_cv_of_baseline_is_difference_of_cv_losses() {
    let mut r = rng(4);
    let data = random_data(&mut r, 6, 2, LossModel::Logistic, &[1.0, -1.0]);
    let target = LooState { rows: Array2::from_shape_vec((6, 2), normal_vec(&mut r, 12, 1.0)).unwrap(), t: 2 };
    let theta = array![0.4, -0.3];
    let base = LooState::replicated(6, theta.view(), 2);
    let e = err_cv(&target, &base, LossModel::Logistic, &data).unwrap();
    let cv_t = cv_loss(LossModel::Logistic, &data, &target).unwrap();
    let cv_b = cv_loss(LossModel::Logistic, &data, &base).unwrap();
    assert_eq!(e.absolute, (cv_b - cv_t).abs());
    assert_eq!(e.relative, Some((cv_b - cv_t).abs() / cv_t));
    let same = err_cv(&target, &target, LossModel::Logistic, &data).unwrap();
    assert_eq!((same.absolute, same.relative), (0.0, Some(0.0)));
}

#[test]
fn cv_error_is_bounded_by_segment_lipschitz_constants() {
    let mut r = rng(5);
    for kind in [LossModel::Logistic, LossModel::Squared] {
        let n = 8;
        let data = random_data(&mut r, n, 3, kind, &[0.5, 1.0, -1.0]);
        let a = Array2::from_shape_vec((n, 3), normal_vec(&mut r, n * 3, 1.0)).unwrap();
        let b = &a + &Array2::from_shape_vec((n, 3), normal_vec(&mut r, n * 3, 0.3)).unwrap();
        let bound: f64 = (0..n)
            .map(|i| {
                let (ai, bi) = (a.row(i).to_vec(), b.row(i).to_vec());
                let lip = (0..=2000)
                    .map(|s| {
                        let w = s as f64 / 2000.0;
                        let th: Vec<f64> = ai.iter().zip(&bi).map(|(x, y)| (1.0 - w) * x + w * y).collect();
                        norm(&loss_grad(kind, &row(&data, i), data.y()[i], &th))
                    })
                    .fold(0.0, f64::max);
                lip * norm(&sub(&ai, &bi))
            })
            .sum::<f64>()
            / n as f64;
        let e = err_cv(&LooState { rows: a, t: 0 }, &LooState { rows: b, t: 0 }, kind, &data).unwrap();
        // sampled maxima can undershoot the true supremum slightly
        assert!(e.absolute <= bound * (1.0 + 1e-4), "{kind:?}: {} > {bound}", e.absolute);
    }
}

#[test]
fn labels_are_fair_coins_at_zero_parameter() {
    let data: Dataset<f64> = gen_logistic_with_theta(100_000, &Array1::zeros(3), 9);
    let mean = data.y().mean().unwrap();
    assert!((mean - 0.5).abs() <= 0.005, "mean {mean}");
}

#[test]
fn label_frequency_follows_the_link() {
    let (data, theta) = gen_logistic::<f64>(100_000, 4, 2, 10).unwrap();
    let probs: Vec<f64> = data.x().rows().into_iter().map(|x| 1.0 / (1.0 + (-x.dot(&theta)).exp())).collect();
    let expected = probs.iter().sum::<f64>() / probs.len() as f64;
    let sd = (probs.iter().map(|q| q * (1.0 - q)).sum::<f64>()).sqrt() / probs.len() as f64;
    let mean = data.y().mean().unwrap();
    assert!((mean - expected).abs() <= 4.0 * sd, "{mean} vs {expected} ± {sd}");
    let xs = data.x();
    let m = xs.mean().unwrap();
    let var = xs.mapv(|v| (v - m) * (v - m)).mean().unwrap();
    assert!(m.abs() < 0.01 && (var - 1.0).abs() < 0.01);
}

#[test]
fn simulation_shape() {
    let (data, theta) = gen_logistic::<f64>(250, 20, 5, 0).unwrap();
    assert_eq!((data.n(), data.p()), (250, 20));
    assert_eq!(theta.iter().filter(|v| **v != 0.0).count(), 5);
}
