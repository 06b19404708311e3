//! Group distributionally robust MDPs over hierarchical latent task models.
//!
//! The library models a two-level task hierarchy (groups of MDPs with mixing
//! weights), filters a belief over groups during an episode, and plans or
//! trains against the worst belief inside an ambiguity ball around the
//! filtered one. Everything is tabular and exactly solvable: the worst-case
//! belief oracles are closed-form greedy transports, the finite-horizon
//! planner recurses over the exact reachable belief tree, and the
//! infinite-horizon planner iterates a contraction on a discretized simplex.
//!
//! Module map:
//! - [`scenario`]: the data model, validation, seeded generation, belief
//!   projection, and the JSON file format.
//! - [`filter`]: Bayes updates and the controllable noisy-likelihood channel.
//! - [`ambiguity`]: ambiguity balls, exact worst-case oracles, the projected
//!   set with its membership test, and the signed-gradient attack.
//! - [`grid`]: the discretized belief simplex with barycentric interpolation.
//! - [`dp`]: robust Bellman backups, value iteration, exact finite-horizon
//!   planning, and the four-formulation comparator.
//! - [`bandit`]: the closed-form two-group bandit used as a golden vector.
//! - [`train`]: rollouts, adversarial TD learning, advantage drops, and the
//!   belief-noise robustness protocol.

pub mod ambiguity;
pub mod bandit;
pub mod dp;
pub mod error;
pub mod filter;
pub mod grid;
pub mod lp;
pub mod rng;
pub mod scenario;
pub mod train;

pub use ambiguity::{
    fgsm_belief_attack, project_ball, worst_case_belief_exact, AmbiguityBall, AttackConfig,
    AttackOutcome, BallSpec, Metric,
};
pub use bandit::{
    brute_force_tolerance, canonical_bandit, solve_bandit, solve_bandit_brute_force,
    BanditSolution, HierarchicalBandit,
};
pub use dp::{
    bellman_operator, evaluate_formulation, finite_horizon_dp, optimal_values_all_formulations,
    value_iteration, value_iteration_from, BeliefChannel, BeliefTree, FiniteHorizonSolution,
    Formulation, IterationStat, OptimalValues, PlannerLikelihood, ValueIterationOutcome,
    ValueTable,
};
pub use error::{GdrError, Result};
pub use filter::{
    init_belief, sample_likelihood, sample_test_group, soft_one_hot, update_belief, FilterState,
    LikelihoodModel,
};
pub use grid::BeliefGrid;
pub use scenario::{
    generate_random_scenario, project_belief, scenario_from_json, scenario_to_json,
    validate_scenario, Belief, BeliefLevel, HlmdpScenario, Policy, TabularMdp, ValidationReport,
    Violation,
};
pub use train::{
    advantage_drop, adversarial_td_update, baseline_config, belief_error_profile,
    evaluate_robustness, rollout_episode, train, AdvantageDrop, Baseline, BeliefErrorRow,
    BeliefFeed, BeliefStatePolicy, EpisodeStat, LinearSchedule, QTable, RobustnessRow,
    TdTargetMode, TrainConfig, TrainOutcome, TransitionRecord,
};
