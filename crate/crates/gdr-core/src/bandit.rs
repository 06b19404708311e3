//! The two-group hierarchical latent bandit used as a golden test vector.
//!
//! Closed-form solutions exist because the value of a mixed policy
//! `[p, 1-p]` is concave piecewise-linear in `p` under every robust
//! formulation, so the outer maximization is a one-dimensional concave
//! search. A brute-force grid solver over `(p, perturbation)` provides an
//! independent cross-check.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{worst_case_belief_exact, AmbiguityBall, Metric};
use crate::dp::Formulation;
use crate::error::{GdrError, Result};
use crate::scenario::{Belief, HlmdpScenario, TabularMdp};

/// A one-step hierarchical bandit: rewards per (MDP, action), a mixing matrix
/// over groups, the current group belief, and the ambiguity radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalBandit {
    /// Indexed `reward[m][a]`.
    pub reward: Vec<Vec<f64>>,
    /// Column-stochastic `M x Z`.
    pub mixing: Vec<Vec<f64>>,
    pub group_belief: Vec<f64>,
    pub radius: f64,
}

impl HierarchicalBandit {
    pub fn num_mdps(&self) -> usize {
        self.reward.len()
    }

    pub fn num_groups(&self) -> usize {
        self.mixing[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.reward[0].len()
    }

    /// Expected reward of action `a` within group `z`.
    pub fn group_action_value(&self, group: usize, action: usize) -> f64 {
        (0..self.num_mdps())
            .map(|m| self.mixing[m][group] * self.reward[m][action])
            .sum()
    }

    /// Expected reward of the mixed policy `[p, 1-p]` in MDP `m`.
    fn mdp_policy_value(&self, m: usize, p: f64) -> f64 {
        p * self.reward[m][0] + (1.0 - p) * self.reward[m][1]
    }

    /// MDP-level nominal belief induced by the group belief.
    pub fn projected_belief(&self) -> Vec<f64> {
        (0..self.num_mdps())
            .map(|m| {
                self.mixing[m]
                    .iter()
                    .zip(&self.group_belief)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Embeds the bandit as a single-state, single-step scenario.
    pub fn to_scenario(&self, discount: f64) -> HlmdpScenario {
        let mdps = self
            .reward
            .iter()
            .map(|rewards| TabularMdp {
                num_states: 1,
                num_actions: self.num_actions(),
                transition: vec![vec![vec![1.0]; self.num_actions()]],
                reward: vec![rewards.clone()],
                initial_state_dist: vec![1.0],
            })
            .collect();
        HlmdpScenario {
            num_groups: self.num_groups(),
            num_mdps: self.num_mdps(),
            mdps,
            mixing: self.mixing.clone(),
            prior: self.group_belief.clone(),
            horizon: 1,
            discount,
        }
    }
}

/// The worked two-group, two-MDP instance: rewards `m0: (22, 5)`,
/// `m1: (0, 5)`, mixing columns `[0.8, 0.2]` and `[0, 1]`, uniform group
/// belief, radius 0.2.
pub fn canonical_bandit() -> HierarchicalBandit {
    HierarchicalBandit {
        reward: vec![vec![22.0, 5.0], vec![0.0, 5.0]],
        mixing: vec![vec![0.8, 0.0], vec![0.2, 1.0]],
        group_belief: vec![0.5, 0.5],
        radius: 0.2,
    }
}

/// Solution of one robust formulation of the bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditSolution {
    /// Optimal weight on action 0 in the mixed policy `[p, 1-p]`.
    pub policy_weight: f64,
    pub value: f64,
}

impl BanditSolution {
    /// Figure-style label: a pure action or the mixing weight.
    pub fn policy_label(&self) -> String {
        if self.policy_weight >= 1.0 - 1e-9 {
            "a0".to_string()
        } else if self.policy_weight <= 1e-9 {
            "a1".to_string()
        } else {
            format!("mixed(p={})", self.policy_weight)
        }
    }
}

fn robust_policy_value(
    bandit: &HierarchicalBandit,
    formulation: Formulation,
    metric: Metric,
    p: f64,
) -> f64 {
    match formulation {
        Formulation::Gdr => {
            let payoff: Vec<f64> = (0..bandit.num_groups())
                .map(|z| {
                    (0..bandit.num_mdps())
                        .map(|m| bandit.mixing[m][z] * bandit.mdp_policy_value(m, p))
                        .sum()
                })
                .collect();
            let ball = AmbiguityBall::new(
                Belief::group(bandit.group_belief.clone()),
                bandit.radius,
                metric,
            )
            .expect("radius validated by caller");
            worst_case_belief_exact(&ball, &payoff)
                .expect("dimensions match")
                .1
        }
        Formulation::GroupRobust => (0..bandit.num_groups())
            .map(|z| {
                (0..bandit.num_mdps())
                    .map(|m| bandit.mixing[m][z] * bandit.mdp_policy_value(m, p))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min),
        Formulation::DistRobust => {
            let payoff: Vec<f64> = (0..bandit.num_mdps())
                .map(|m| bandit.mdp_policy_value(m, p))
                .collect();
            let ball = AmbiguityBall::new(
                Belief::mdp(bandit.projected_belief()),
                bandit.radius,
                metric,
            )
            .expect("radius validated by caller");
            worst_case_belief_exact(&ball, &payoff)
                .expect("dimensions match")
                .1
        }
        Formulation::Robust => (0..bandit.num_mdps())
            .map(|m| bandit.mdp_policy_value(m, p))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Exact max-min solution: concave search over the policy weight with the
/// inner worst case solved in closed form per formulation.
pub fn solve_bandit(
    bandit: &HierarchicalBandit,
    formulation: Formulation,
    metric: Metric,
) -> Result<BanditSolution> {
    if bandit.num_actions() != 2 {
        return Err(GdrError::Unsupported(
            "mixed-policy bandit solver handles two actions".into(),
        ));
    }
    let f = |p: f64| robust_policy_value(bandit, formulation, metric, p);

    // Ternary search: f is concave piecewise-linear on [0, 1].
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..120 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let interior = 0.5 * (lo + hi);

    // Prefer clean endpoints on ties.
    let mut best = BanditSolution {
        policy_weight: 0.0,
        value: f(0.0),
    };
    for p in [1.0, interior] {
        let v = f(p);
        if v > best.value + 1e-12 {
            best = BanditSolution {
                policy_weight: p,
                value: v,
            };
        }
    }
    if best.policy_weight > 1.0 - 1e-9 {
        best.policy_weight = 1.0;
        best.value = f(1.0);
    }
    Ok(best)
}

/// Independent brute-force solver over uniform grids for the policy weight
/// and the adversary's perturbation. Supports the two-atom belief spaces
/// where the perturbation is one-dimensional (Z = 2 for GDR/GR, M = 2 for
/// DR/R). Guaranteed within `2 / p_grid * max|reward|` of the exact value.
pub fn solve_bandit_brute_force(
    bandit: &HierarchicalBandit,
    formulation: Formulation,
    p_grid: usize,
    eps_grid: usize,
) -> Result<BanditSolution> {
    if p_grid < 2 || eps_grid < 2 {
        return Err(GdrError::InvalidParameter(
            "brute-force grids need at least 2 points".into(),
        ));
    }
    let needs_two = match formulation {
        Formulation::Gdr | Formulation::GroupRobust => bandit.num_groups(),
        Formulation::DistRobust | Formulation::Robust => bandit.num_mdps(),
    };
    if needs_two != 2 {
        return Err(GdrError::Unsupported(
            "brute-force perturbation grid requires a two-atom belief space".into(),
        ));
    }

    let inner_min = |p: f64| -> f64 {
        match formulation {
            Formulation::GroupRobust => (0..2)
                .map(|z| {
                    (0..bandit.num_mdps())
                        .map(|m| bandit.mixing[m][z] * bandit.mdp_policy_value(m, p))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
            Formulation::Robust => (0..2)
                .map(|m| bandit.mdp_policy_value(m, p))
                .fold(f64::INFINITY, f64::min),
            Formulation::Gdr | Formulation::DistRobust => {
                let (nominal, payoff): (Vec<f64>, Vec<f64>) = match formulation {
                    Formulation::Gdr => (
                        bandit.group_belief.clone(),
                        (0..2)
                            .map(|z| {
                                (0..bandit.num_mdps())
                                    .map(|m| bandit.mixing[m][z] * bandit.mdp_policy_value(m, p))
                                    .sum()
                            })
                            .collect(),
                    ),
                    _ => (
                        bandit.projected_belief(),
                        (0..2).map(|m| bandit.mdp_policy_value(m, p)).collect(),
                    ),
                };
                let mut worst = f64::INFINITY;
                for k in 0..=eps_grid {
                    let eps = -bandit.radius + 2.0 * bandit.radius * k as f64 / eps_grid as f64;
                    let perturbed = [nominal[0] + eps, nominal[1] - eps];
                    if perturbed
                        .iter()
                        .any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x))
                    {
                        continue;
                    }
                    let v = perturbed[0] * payoff[0] + perturbed[1] * payoff[1];
                    worst = worst.min(v);
                }
                worst
            }
        }
    };

    let mut best = BanditSolution {
        policy_weight: 0.0,
        value: f64::NEG_INFINITY,
    };
    for i in 0..=p_grid {
        let p = i as f64 / p_grid as f64;
        let v = inner_min(p);
        if v > best.value {
            best = BanditSolution {
                policy_weight: p,
                value: v,
            };
        }
    }
    Ok(best)
}

/// Agreement bound between the exact and brute-force solvers: the objective
/// is bilinear, so the grid error is at most `2 / p_grid * max|reward|`.
pub fn brute_force_tolerance(bandit: &HierarchicalBandit, p_grid: usize) -> f64 {
    let max_reward = bandit
        .reward
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &r| acc.max(r.abs()));
    2.0 / p_grid as f64 * max_reward
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_group_values() {
        let bandit = canonical_bandit();
        assert!((bandit.group_action_value(0, 0) - 17.6).abs() < 1e-12);
        assert!((bandit.group_action_value(0, 1) - 5.0).abs() < 1e-12);
        assert!((bandit.group_action_value(1, 0) - 0.0).abs() < 1e-12);
        assert!((bandit.group_action_value(1, 1) - 5.0).abs() < 1e-12);
        let b_m = bandit.projected_belief();
        assert!((b_m[0] - 0.4).abs() < 1e-12);
        assert!((b_m[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn canonical_solutions() {
        let bandit = canonical_bandit();
        let gdr = solve_bandit(&bandit, Formulation::Gdr, Metric::SupNorm).unwrap();
        assert_eq!(gdr.policy_label(), "a0");
        assert!((gdr.value - 5.28).abs() < 1e-9);

        let dr = solve_bandit(&bandit, Formulation::DistRobust, Metric::SupNorm).unwrap();
        assert_eq!(dr.policy_label(), "a1");
        assert!((dr.value - 5.0).abs() < 1e-9);

        let gr = solve_bandit(&bandit, Formulation::GroupRobust, Metric::SupNorm).unwrap();
        assert_eq!(gr.policy_label(), "a1");
        assert!((gr.value - 5.0).abs() < 1e-9);

        let r = solve_bandit(&bandit, Formulation::Robust, Metric::SupNorm).unwrap();
        assert_eq!(r.policy_label(), "a1");
        assert!((r.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn worst_case_of_pure_arm_zero() {
        // Pure a0 under DR loses 0.2 of the weight on the good MDP: 0.2*22 = 4.4.
        let bandit = canonical_bandit();
        let v_dr = robust_policy_value(&bandit, Formulation::DistRobust, Metric::SupNorm, 1.0);
        assert!((v_dr - 4.4).abs() < 1e-9);
        let v_gdr = robust_policy_value(&bandit, Formulation::Gdr, Metric::SupNorm, 1.0);
        assert!((v_gdr - 5.28).abs() < 1e-9);
    }

    #[test]
    fn closed_form_and_brute_force_agree() {
        let bandit = canonical_bandit();
        let tol = brute_force_tolerance(&bandit, 1001);
        for f in [
            Formulation::Gdr,
            Formulation::GroupRobust,
            Formulation::DistRobust,
            Formulation::Robust,
        ] {
            let exact = solve_bandit(&bandit, f, Metric::SupNorm).unwrap();
            let brute = solve_bandit_brute_force(&bandit, f, 1001, 1001).unwrap();
            assert!(
                (exact.value - brute.value).abs() <= tol,
                "{f:?}: exact {} vs brute {}",
                exact.value,
                brute.value
            );
        }
    }

    #[test]
    fn zero_radius_collapses_to_nominal_maximum() {
        let mut bandit = canonical_bandit();
        bandit.radius = 0.0;
        let gdr = solve_bandit(&bandit, Formulation::Gdr, Metric::SupNorm).unwrap();
        assert!((gdr.value - 8.8).abs() < 1e-9);
        assert_eq!(gdr.policy_label(), "a0");
        let dr = solve_bandit(&bandit, Formulation::DistRobust, Metric::SupNorm).unwrap();
        assert!((dr.value - 8.8).abs() < 1e-9);
    }

    fn random_bandit(rng: &mut ChaCha8Rng) -> HierarchicalBandit {
        let m = rng.gen_range(2..=4usize);
        let reward = (0..m)
            .map(|_| vec![rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0])
            .collect();
        let mut columns = Vec::new();
        for _ in 0..2 {
            let mut col: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + 0.01).collect();
            let sum: f64 = col.iter().sum();
            col.iter_mut().for_each(|x| *x /= sum);
            columns.push(col);
        }
        let mixing = (0..m)
            .map(|mi| vec![columns[0][mi], columns[1][mi]])
            .collect();
        let b0 = rng.gen_range(0.1..0.9);
        HierarchicalBandit {
            reward,
            mixing,
            group_belief: vec![b0, 1.0 - b0],
            radius: rng.gen_range(0.05..0.3),
        }
    }

    #[test]
    fn formulation_ordering_on_random_bandits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let bandit = random_bandit(&mut rng);
            let gdr = solve_bandit(&bandit, Formulation::Gdr, Metric::SupNorm).unwrap();
            let gr = solve_bandit(&bandit, Formulation::GroupRobust, Metric::SupNorm).unwrap();
            let dr = solve_bandit(&bandit, Formulation::DistRobust, Metric::SupNorm).unwrap();
            let r = solve_bandit(&bandit, Formulation::Robust, Metric::SupNorm).unwrap();
            assert!(gdr.value >= dr.value - 1e-9);
            assert!(gdr.value >= gr.value - 1e-9);
            assert!(gr.value >= r.value - 1e-9);
        }
    }

    #[test]
    fn solver_is_invariant_to_relabeling() {
        let bandit = canonical_bandit();
        // Swap the two actions: optimal weight flips, value is unchanged.
        let swapped = HierarchicalBandit {
            reward: bandit.reward.iter().map(|r| vec![r[1], r[0]]).collect(),
            ..bandit.clone()
        };
        // Swap the two MDPs together with the mixing rows.
        let permuted = HierarchicalBandit {
            reward: vec![bandit.reward[1].clone(), bandit.reward[0].clone()],
            mixing: vec![bandit.mixing[1].clone(), bandit.mixing[0].clone()],
            ..bandit.clone()
        };
        for f in [
            Formulation::Gdr,
            Formulation::GroupRobust,
            Formulation::DistRobust,
            Formulation::Robust,
        ] {
            let base = solve_bandit(&bandit, f, Metric::SupNorm).unwrap();
            let s = solve_bandit(&swapped, f, Metric::SupNorm).unwrap();
            assert!((base.value - s.value).abs() < 1e-9, "{f:?} action swap");
            assert!((base.policy_weight - (1.0 - s.policy_weight)).abs() < 1e-9);
            let p = solve_bandit(&permuted, f, Metric::SupNorm).unwrap();
            assert!((base.value - p.value).abs() < 1e-9, "{f:?} mdp swap");
        }
    }
}
