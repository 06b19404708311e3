//! Cross-module property checks that do not fit a single unit-test module.

mod common;

use common::random_simplex_point;
use gdr_core::{
    evaluate_formulation, generate_random_scenario, value_iteration, BallSpec, Belief, BeliefGrid,
    Formulation, Metric, PlannerLikelihood, Policy,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gdr_value_is_non_increasing_in_radius() {
    let channel = PlannerLikelihood::default();
    for seed in 0..20u64 {
        let scenario = generate_random_scenario(seed, 2, 4, 3, 2, 0.9, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(300));
        let action_dist = (0..3)
            .map(|_| {
                let mut row: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() + 0.05).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= sum);
                row
            })
            .collect();
        let policy = Policy::StationaryStateTable { action_dist };
        let b0 = Belief::group(random_simplex_point(&mut rng, 2));
        let mut previous = f64::INFINITY;
        for xi in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let value = evaluate_formulation(
                &scenario,
                Formulation::Gdr,
                &policy,
                &b0,
                &BallSpec::new(xi, Metric::SupNorm),
                &channel,
            )
            .unwrap();
            assert!(
                value <= previous + 1e-12,
                "seed {seed}: value rose from {previous} to {value} at xi {xi}"
            );
            previous = value;
        }
    }
}

#[test]
fn grid_refinement_is_cauchy_at_shared_points() {
    // Doubling the resolution moves the fixed point at shared grid points by
    // no more than the previous refinement did.
    let channel = PlannerLikelihood::default();
    let ball = BallSpec::new(0.15, Metric::SupNorm);
    for seed in 0..10u64 {
        let scenario = generate_random_scenario(seed, 2, 4, 3, 2, 0.9, 3).unwrap();
        let tables: Vec<_> = [5usize, 10, 20]
            .into_iter()
            .map(|k| {
                value_iteration(
                    &scenario,
                    &ball,
                    BeliefGrid::new(2, k),
                    &channel,
                    1e-9,
                    3000,
                )
                .unwrap()
                .table
            })
            .collect();

        let max_change = |coarse: &gdr_core::ValueTable, fine: &gdr_core::ValueTable| -> f64 {
            let mut worst = 0.0f64;
            for bi in 0..coarse.grid.len() {
                let point = coarse.grid.point(bi);
                for s in 0..3 {
                    let delta = (coarse.get(bi, s) - fine.value_at(point, s)).abs();
                    worst = worst.max(delta);
                }
            }
            worst
        };
        let first = max_change(&tables[0], &tables[1]);
        let second = max_change(&tables[1], &tables[2]);
        assert!(
            second <= first + 1e-9,
            "seed {seed}: refinement changes grew from {first} to {second}"
        );
    }
}
