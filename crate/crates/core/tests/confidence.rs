mod common;

use banditlab::confidence::{BetaSchedule, CovarianceMode};
use banditlab::Covariance;
use common::{invert_dense, quad_form};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_vectors(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn full_bonus_matches_dense_inverse(p in 1usize..12, n in 0usize..30, seed in any::<u64>(), lambda in 0.01f64..2.0) {
        let mut cov = Covariance::new(p, lambda, CovarianceMode::Full).unwrap();
        let mut dense = vec![0.0; p * p];
        for i in 0..p {
            dense[i * p + i] = lambda;
        }
        for v in random_vectors(n, p, seed) {
            cov.rank1_update(&v).unwrap();
            for i in 0..p {
                for j in 0..p {
                    dense[i * p + j] += v[i] * v[j];
                }
            }
        }
        let inv = invert_dense(&dense, p);
        for q in random_vectors(3, p, seed ^ 1) {
            let want = quad_form(&inv, &q);
            let got = cov.inv_quadratic(&q).unwrap();
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want));
        }
    }

    #[test]
    fn bonus_never_grows_with_more_data(p in 1usize..8, seed in any::<u64>(), diagonal in any::<bool>()) {
        let mode = if diagonal { CovarianceMode::Diagonal } else { CovarianceMode::Full };
        let mut cov = Covariance::new(p, 0.5, mode).unwrap();
        let queries = random_vectors(4, p, seed ^ 7);
        let mut prev: Vec<f64> = queries.iter().map(|q| cov.bonus(q).unwrap()).collect();
        let mut prev_logdet = cov.log_det_ratio().unwrap();
        prop_assert!(prev_logdet.abs() < 1e-12);
        for v in random_vectors(10, p, seed) {
            cov.rank1_update(&v).unwrap();
            let now: Vec<f64> = queries.iter().map(|q| cov.bonus(q).unwrap()).collect();
            for (a, b) in now.iter().zip(&prev) {
                prop_assert!(*a <= *b + 1e-12);
            }
            let logdet = cov.log_det_ratio().unwrap();
            prop_assert!(logdet >= prev_logdet - 1e-12);
            prev = now;
            prev_logdet = logdet;
        }
    }

    #[test]
    fn bonus_is_bounded_by_eigenvalue_sandwich(p in 1usize..8, n in 0usize..20, seed in any::<u64>()) {
        // λ ≤ eig(Λ) ≤ λ + Σ‖v‖², so ‖q‖²/(λ + Σ‖v‖²) ≤ qᵀΛ⁻¹q ≤ ‖q‖²/λ.
        let lambda = 0.3;
        let mut cov = Covariance::new(p, lambda, CovarianceMode::Full).unwrap();
        let mut trace_added = 0.0;
        for v in random_vectors(n, p, seed) {
            trace_added += v.iter().map(|x| x * x).sum::<f64>();
            cov.rank1_update(&v).unwrap();
        }
        for q in random_vectors(3, p, seed ^ 3) {
            let qq: f64 = q.iter().map(|x| x * x).sum();
            let got = cov.inv_quadratic(&q).unwrap();
            prop_assert!(got <= qq / lambda * (1.0 + 1e-12));
            prop_assert!(got >= qq / (lambda + trace_added) * (1.0 - 1e-12));
        }
    }
}

#[test]
fn sherman_morrison_agrees_after_many_updates() {
    let p = 20;
    let lambda = 0.1;
    let mut cov = Covariance::new(p, lambda, CovarianceMode::Full).unwrap();
    let mut inv = vec![0.0; p * p];
    for i in 0..p {
        inv[i * p + i] = 1.0 / lambda;
    }
    for v in random_vectors(300, p, 5) {
        cov.rank1_update(&v).unwrap();
        let av: Vec<f64> = (0..p).map(|i| (0..p).map(|j| inv[i * p + j] * v[j]).sum()).collect();
        let denom = 1.0 + v.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..p {
            for j in 0..p {
                inv[i * p + j] -= av[i] * av[j] / denom;
            }
        }
    }
    for q in random_vectors(10, p, 6) {
        assert!((cov.bonus(&q).unwrap() - quad_form(&inv, &q).sqrt()).abs() < 1e-10);
    }
}

#[test]
fn diagonal_equals_full_for_axis_aligned_updates() {
    let p = 5;
    let mut full = Covariance::new(p, 0.2, CovarianceMode::Full).unwrap();
    let mut diag = Covariance::new(p, 0.2, CovarianceMode::Diagonal).unwrap();
    for k in 0..17 {
        let mut v = vec![0.0; p];
        v[k % p] = 0.5 + k as f64;
        full.rank1_update(&v).unwrap();
        diag.rank1_update(&v).unwrap();
    }
    for q in random_vectors(5, p, 8) {
        let (a, b) = (full.bonus(&q).unwrap(), diag.bonus(&q).unwrap());
        assert!((a - b).abs() < 1e-12 * (1.0 + a));
    }
}

#[test]
fn scaled_update_equals_prescaled_vector() {
    let p = 6;
    let mut a = Covariance::new(p, 1.0, CovarianceMode::Full).unwrap();
    let mut b = Covariance::new(p, 1.0, CovarianceMode::Full).unwrap();
    let c = 1.0 / 20f64.sqrt();
    for v in random_vectors(10, p, 9) {
        a.rank1_update_scaled(&v, c).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        b.rank1_update(&scaled).unwrap();
    }
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn solve_inverts_the_covariance() {
    let p = 7;
    let mut cov = Covariance::new(p, 0.1, CovarianceMode::Full).unwrap();
    for v in random_vectors(12, p, 10) {
        cov.rank1_update(&v).unwrap();
    }
    let b = random_vectors(1, p, 11).remove(0);
    let x = cov.solve(&b).unwrap();
    let a = cov.values();
    for i in 0..p {
        let row: f64 = (0..p).map(|j| a[i * p + j] * x[j]).sum();
        assert!((row - b[i]).abs() < 1e-10);
    }
}

#[test]
fn theoretical_beta_grows_with_t() {
    let beta = BetaSchedule::Theoretical {
        lambda: 1.0,
        depth: 2,
        width: 100,
        samples: 10,
        actions: 2,
        lambda0: 0.5,
        c3: 1.0,
    };
    beta.validate().unwrap();
    let values: Vec<f64> = (0..50).map(|t| beta.at(t)).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    assert!(BetaSchedule::Constant(-1.0).validate().is_err());
}
