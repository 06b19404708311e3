//! Bayesian belief filtering over task groups.
//!
//! The filter itself is a pure normalized elementwise product; what varies is
//! where the likelihood vector comes from. The controllable model here emits a
//! softened one-hot vector around a (possibly noisily reported) group index,
//! with three knobs: sharpness `l`, hit probability `eps_l`, and the test-time
//! noise level `eps_z` that corrupts which group the likelihood targets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdrError, Result};
use crate::scenario::Belief;

/// Parameters of the controllable noisy-likelihood channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    /// Peak likelihood value `l`; informative when `l > 1/Z`.
    #[serde(rename = "l")]
    pub sharpness: f64,
    /// Probability that the likelihood targets the intended group.
    #[serde(rename = "eps_l")]
    pub hit_prob: f64,
    /// Probability that the test-time target is the true group rather than a
    /// uniformly random one.
    #[serde(rename = "eps_z")]
    pub noise_level: f64,
}

impl LikelihoodModel {
    pub fn new(sharpness: f64, hit_prob: f64, noise_level: f64) -> Self {
        LikelihoodModel {
            sharpness,
            hit_prob,
            noise_level,
        }
    }

    /// Validates the parameter ranges against a group count.
    pub fn validate_for(&self, num_groups: usize) -> Result<()> {
        let floor = 1.0 / num_groups as f64;
        if !(self.sharpness > floor && self.sharpness <= 1.0) {
            return Err(GdrError::InvalidParameter(format!(
                "sharpness l = {} must lie in (1/Z, 1] = ({floor}, 1]",
                self.sharpness
            )));
        }
        for (name, v) in [("eps_l", self.hit_prob), ("eps_z", self.noise_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GdrError::InvalidParameter(format!(
                    "{name} = {v} must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Filter state carried through one episode. The true group is visible to the
/// harness only; policies see just the belief.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub belief: Belief,
    pub true_group: usize,
}

/// Uniform initial belief over `num_groups` groups.
pub fn init_belief(num_groups: usize) -> Result<Belief> {
    if num_groups == 0 {
        return Err(GdrError::InvalidParameter(
            "belief needs at least one group".into(),
        ));
    }
    Ok(Belief::group(vec![1.0 / num_groups as f64; num_groups]))
}

/// Bayes update: normalized elementwise product of belief and likelihood.
///
/// All-zero posterior mass is an error rather than a silent reset; it means
/// the likelihood model contradicts the belief support.
pub fn update_belief(belief: &Belief, likelihood: &[f64]) -> Result<Belief> {
    if likelihood.len() != belief.len() {
        return Err(GdrError::DimensionMismatch {
            what: "likelihood",
            expected: belief.len(),
            got: likelihood.len(),
        });
    }
    if likelihood.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(GdrError::InvalidParameter(
            "likelihood entries must be finite and non-negative".into(),
        ));
    }
    let mut weights: Vec<f64> = belief
        .weights
        .iter()
        .zip(likelihood)
        .map(|(b, l)| b * l)
        .collect();
    let mass: f64 = weights.iter().sum();
    if mass <= 0.0 {
        return Err(GdrError::DegenerateLikelihood);
    }
    for w in &mut weights {
        *w /= mass;
    }
    Ok(Belief {
        weights,
        level: belief.level,
    })
}

/// Builds the softened one-hot likelihood vector peaked at `target`.
pub fn soft_one_hot(target: usize, num_groups: usize, sharpness: f64) -> Vec<f64> {
    if num_groups == 1 {
        return vec![1.0];
    }
    let off = (1.0 - sharpness) / (num_groups as f64 - 1.0);
    (0..num_groups)
        .map(|i| if i == target { sharpness } else { off })
        .collect()
}

/// Draws one likelihood vector: the peak lands on `true_group` with
/// probability `eps_l`, otherwise on a uniformly random group.
pub fn sample_likelihood(
    model: &LikelihoodModel,
    true_group: usize,
    num_groups: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    debug_assert!(true_group < num_groups);
    let hit = rng.gen::<f64>() < model.hit_prob;
    let target = if hit {
        true_group
    } else {
        rng.gen_range(0..num_groups)
    };
    soft_one_hot(target, num_groups, model.sharpness)
}

/// Draws the noisy test-time group index: the true group with probability
/// `eps_z`, otherwise uniform.
pub fn sample_test_group(
    model: &LikelihoodModel,
    true_group: usize,
    num_groups: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    debug_assert!(true_group < num_groups);
    if rng.gen::<f64>() < model.noise_level {
        true_group
    } else {
        rng.gen_range(0..num_groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_belief_is_uniform() {
        assert_eq!(init_belief(2).unwrap().weights, vec![0.5, 0.5]);
        assert_eq!(init_belief(1).unwrap().weights, vec![1.0]);
        assert_eq!(init_belief(4).unwrap().weights, vec![0.25; 4]);
        assert!(init_belief(0).is_err());
    }

    #[test]
    fn uniform_prior_returns_normalized_likelihood() {
        let b = update_belief(&Belief::group(vec![0.5, 0.5]), &[0.9, 0.1]).unwrap();
        assert!((b.weights[0] - 0.9).abs() < 1e-15);
        assert!((b.weights[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn uninformative_likelihood_is_identity() {
        let b = update_belief(&Belief::group(vec![0.9, 0.1]), &[1.0, 1.0]).unwrap();
        assert!((b.weights[0] - 0.9).abs() < 1e-15);
        assert!((b.weights[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn update_matches_rational_oracle() {
        // Exact fractions: [0.3*0.8, 0.7*0.2] / 0.38 = [24/38, 14/38].
        let b = update_belief(&Belief::group(vec![0.3, 0.7]), &[0.8, 0.2]).unwrap();
        let expected = [24.0 / 38.0, 14.0 / 38.0];
        assert!((b.weights[0] - expected[0]).abs() < 1e-12);
        assert!((b.weights[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn annihilated_posterior_is_an_error() {
        let err = update_belief(&Belief::group(vec![1.0, 0.0]), &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, GdrError::DegenerateLikelihood));
    }

    #[test]
    fn noiseless_likelihood_is_the_soft_one_hot() {
        let model = LikelihoodModel::new(0.9, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..32 {
            let l = sample_likelihood(&model, 0, 2, &mut rng);
            assert!((l[0] - 0.9).abs() < 1e-15);
            assert!((l[1] - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn uninformative_sharpness_gives_uniform_vector() {
        // l = 1/Z is the uninformative limit of the vector itself.
        let l = soft_one_hot(1, 4, 0.25);
        assert!(l.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn missed_hits_target_uniformly() {
        let model = LikelihoodModel::new(0.9, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut hits_on_zero = 0usize;
        let n = 10_000;
        for _ in 0..n {
            let l = sample_likelihood(&model, 0, 2, &mut rng);
            if l[0] > l[1] {
                hits_on_zero += 1;
            }
        }
        let freq = hits_on_zero as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "freq = {freq}");
    }

    #[test]
    fn test_group_noiseless_limit_returns_truth() {
        let model = LikelihoodModel::new(0.9, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..64 {
            assert_eq!(sample_test_group(&model, 3, 6, &mut rng), 3);
        }
    }

    #[test]
    fn test_group_fully_noisy_is_uniform_chi_squared() {
        let model = LikelihoodModel::new(0.9, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000usize;
        let z = 6;
        let mut counts = vec![0usize; z];
        for _ in 0..n {
            counts[sample_test_group(&model, 2, z, &mut rng)] += 1;
        }
        let expected = n as f64 / z as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99.9% quantile of chi-squared with 5 dof is 20.515.
        assert!(stat < 20.515, "chi-squared stat = {stat}");
    }

    #[test]
    fn test_group_mixture_probability() {
        // eps_z = 0.5, Z = 2: P(z_test = truth) = 0.5 + 0.5 * 0.5 = 0.75.
        let model = LikelihoodModel::new(0.9, 1.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000usize;
        let mut hits = 0usize;
        for _ in 0..n {
            if sample_test_group(&model, 0, 2, &mut rng) == 0 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() <= 0.01, "freq = {freq}");
    }

    #[test]
    fn model_validation_ranges() {
        assert!(LikelihoodModel::new(0.9, 1.0, 1.0).validate_for(2).is_ok());
        assert!(LikelihoodModel::new(0.5, 1.0, 1.0).validate_for(2).is_err()); // l = 1/Z excluded
        assert!(LikelihoodModel::new(0.9, 1.5, 1.0).validate_for(2).is_err());
    }

    #[test]
    fn filter_convergence_bound_holds() {
        // With eps_l = 1 and l > 1/Z the weight on the true group is
        // non-decreasing and crosses 1 - 1e-6 within the ratio-argument bound.
        for (z, sharpness) in [(2usize, 0.9f64), (3, 0.6), (4, 0.4)] {
            let truth = z - 1;
            let likelihood = soft_one_hot(truth, z, sharpness);
            let ratio = sharpness * (z as f64 - 1.0) / (1.0 - sharpness);
            let bound = ((z as f64 - 1.0) * 1e6).ln() / ratio.ln();
            let steps = bound.ceil() as usize;
            let mut belief = init_belief(z).unwrap();
            let mut prev = belief.weights[truth];
            for _ in 0..steps {
                belief = update_belief(&belief, &likelihood).unwrap();
                assert!(belief.weights[truth] >= prev - 1e-15);
                prev = belief.weights[truth];
            }
            assert!(
                belief.weights[truth] > 1.0 - 1e-6,
                "Z={z} l={sharpness}: weight {} after {steps} steps",
                belief.weights[truth]
            );
        }
    }

    #[test]
    fn repeated_updates_stay_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = LikelihoodModel::new(0.7, 0.8, 1.0);
        let mut belief = init_belief(3).unwrap();
        for _ in 0..200 {
            let l = sample_likelihood(&model, 1, 3, &mut rng);
            belief = update_belief(&belief, &l).unwrap();
            assert!(belief.is_valid(1e-7));
        }
    }

    #[test]
    fn update_is_scale_invariant() {
        let b = Belief::group(vec![0.2, 0.5, 0.3]);
        let l = [0.4, 0.1, 0.5];
        let scaled: Vec<f64> = l.iter().map(|x| x * 37.5).collect();
        let a = update_belief(&b, &l).unwrap();
        let c = update_belief(&b, &scaled).unwrap();
        for (x, y) in a.weights.iter().zip(&c.weights) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
