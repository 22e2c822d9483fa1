mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scenedet::propagation::{gamma_grid, gamma_line_search};

#[test]
fn separable_pool_takes_gamma_max() {
    for (seed, gamma_max) in [(1, 1.0), (2, 0.7), (3, 0.5)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let existing = common::clean_instances(&mut rng, 20, 4);
        let pool = common::separable_pool(&mut rng, 60, 4);
        let model = common::incumbent(&existing);
        let out = gamma_line_search(&common::line_search_input(&existing, &pool, &model, gamma_max)).unwrap();
        assert_eq!(out.estimate.gamma, *gamma_grid(gamma_max).last().unwrap());
        assert!(out.estimate.xi_u <= out.estimate.xi_l);
    }
}

#[test]
fn noise_pool_takes_nothing() {
    for seed in 1..=3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let existing = common::clean_instances(&mut rng, 20, 4);
        let pool = common::noise_pool(&mut rng, 60, 4);
        let model = common::incumbent(&existing);
        let out = gamma_line_search(&common::line_search_input(&existing, &pool, &model, 1.0)).unwrap();
        assert_eq!(out.estimate.gamma, 0.0);
        assert_eq!(out.estimate.u, 0);
        assert_eq!(out.model, model);
        assert!(out.estimate.xi_u <= out.estimate.xi_l);
    }
}

#[test]
fn trials_cover_the_grid_with_monotone_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let existing = common::clean_instances(&mut rng, 10, 3);
    let pool = common::separable_pool(&mut rng, 30, 3);
    let model = common::incumbent(&existing);
    let out = gamma_line_search(&common::line_search_input(&existing, &pool, &model, 1.0)).unwrap();
    let gammas: Vec<f64> = out.trials.iter().map(|t| t.gamma).collect();
    assert_eq!(gammas, gamma_grid(1.0));
    assert!(out.trials.windows(2).all(|w| w[0].u <= w[1].u));
}
