use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dacer::entropy::{em_fit, estimate_entropy_with, EmConfig, GmmModel};
use dacer::numcore::Tensor;

fn three_blobs(n: usize, rng: &mut ChaCha8Rng) -> (Tensor<f64>, GmmModel<f64>) {
    let means = [[-2.0, 0.0], [2.0, 1.0], [0.0, -3.0]];
    let sd = [0.4, 0.3, 0.5];
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 3;
        rows.push(vec![means[k][0] + sd[k] * z.sample(rng), means[k][1] + sd[k] * z.sample(rng)]);
    }
    let truth = GmmModel::new(
        vec![1.0 / 3.0; 3],
        means.iter().map(|m| m.to_vec()).collect(),
        sd.iter().map(|s| vec![s * s, 0.0, 0.0, s * s]).collect(),
    )
    .unwrap();
    (Tensor::from_rows(&rows).unwrap(), truth)
}

#[test]
fn em_recovers_a_separated_mixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (data, truth) = three_blobs(600, &mut rng);
    let fit = em_fit(&data, &EmConfig::default(), &mut rng).unwrap();
    // Best of the 3! assignments of fitted to true components.
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let worst = |p: &[usize; 3]| {
        (0..3)
            .map(|k| {
                let (a, b) = (&fit.model.means[p[k]], &truth.means[k]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max)
    };
    let best = perms.iter().map(worst).fold(f64::INFINITY, f64::min);
    assert!(best < 0.1, "mean error {best}");
    let (_, ll_fit) = fit.model.responsibilities(&data).unwrap();
    let (_, ll_true) = truth.responsibilities(&data).unwrap();
    assert!(((ll_fit - ll_true) / ll_true).abs() < 0.01, "{ll_fit} vs {ll_true}");
}

#[test]
fn em_log_likelihood_never_drops() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..10 {
        let (data, _) = three_blobs(150 + 30 * trial, &mut rng);
        let fit = em_fit(&data, &EmConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.reseeded, 0);
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "trial {trial}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn nearly_constant_actions_give_the_degenerate_gaussian_limit() {
    let sigma = 0.01;
    let d = 2.0;
    let analytic = d * (sigma * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).ln();
    let states = Tensor::from_fn(8, 1, |_, _| 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let est = estimate_entropy_with(&states, 200, &EmConfig::default(), &mut rng, |_, n, rng| {
        let z = Normal::new(0.0, sigma).unwrap();
        Ok(Tensor::from_fn(n, 2, |_, _| 0.3 + z.sample(rng)))
    })
    .unwrap();
    assert!(((est.mean - analytic) / analytic).abs() < 0.10, "{} vs {analytic}", est.mean);
}

#[test]
fn identical_states_agree_within_monte_carlo_noise() {
    let states = Tensor::from_fn(16, 3, |_, j| j as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let est = estimate_entropy_with(&states, 200, &EmConfig::default(), &mut rng, |_, n, rng| {
        let modes: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 0.5 } else { -0.5 }).collect();
        Ok(Tensor::from_fn(n, 2, |i, _| {
            modes[i] + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        }))
    })
    .unwrap();
    let m = est.mean;
    let sd = (est.per_state.iter().map(|h| (h - m).powi(2)).sum::<f64>() / est.per_state.len() as f64).sqrt();
    assert!(sd < 0.2, "{sd}");
}
