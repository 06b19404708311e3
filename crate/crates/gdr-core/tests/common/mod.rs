//! Shared test fixtures: an independent brute-force worst-case oracle and
//! seeded random problem generators.
#![allow(dead_code)] // not every integration test uses every fixture

use gdr_core::{AmbiguityBall, Belief, Metric};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exhaustive grid search for the worst case of a linear payoff over a ball.
/// Enumerates the first `d - 1` coordinates on a uniform grid of the given
/// step inside the coordinate envelope; the last coordinate takes the
/// remaining mass and the full membership test filters the rest. Independent
/// of the greedy oracle under test.
pub fn brute_force_worst_case(ball: &AmbiguityBall, payoff: &[f64], step: f64) -> f64 {
    let n = ball.dim();
    let (lo, hi) = ball.coordinate_bounds();
    let mut best = f64::INFINITY;
    let mut point = vec![0.0; n];

    fn recurse(
        coord: usize,
        point: &mut Vec<f64>,
        partial: f64,
        lo: &[f64],
        hi: &[f64],
        step: f64,
        ball: &AmbiguityBall,
        payoff: &[f64],
        best: &mut f64,
    ) {
        let n = point.len();
        if coord == n - 1 {
            let last = 1.0 - partial;
            if last < lo[n - 1] - 1e-9 || last > hi[n - 1] + 1e-9 {
                return;
            }
            point[n - 1] = last;
            if ball.contains(point, 1e-9) {
                let v: f64 = point.iter().zip(payoff).map(|(p, u)| p * u).sum();
                if v < *best {
                    *best = v;
                }
            }
            return;
        }
        let steps = ((hi[coord] - lo[coord]) / step).ceil() as usize;
        for k in 0..=steps {
            let x = (lo[coord] + k as f64 * step).min(hi[coord]);
            point[coord] = x;
            recurse(
                coord + 1,
                point,
                partial + x,
                lo,
                hi,
                step,
                ball,
                payoff,
                best,
            );
        }
    }

    recurse(0, &mut point, 0.0, &lo, &hi, step, ball, payoff, &mut best);
    best
}

/// Random point on the simplex with mass bounded away from zero.
pub fn random_simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.05).collect();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Seeded random ball of the given metric and dimension.
pub fn random_ball(
    seed: u64,
    dim: usize,
    max_radius: f64,
    metric: Metric,
) -> (AmbiguityBall, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nominal = random_simplex_point(&mut rng, dim);
    let radius = 0.02 + rng.gen::<f64>() * (max_radius - 0.02);
    let ball = AmbiguityBall::new(Belief::group(nominal), radius, metric).unwrap();
    (ball, rng)
}
