//! Tabular robust training: trajectory rollouts with belief filtering,
//! adversarially perturbed TD targets, and the robustness evaluation protocol.
//!
//! The Q table lives on a belief grid; reads gather through barycentric
//! interpolation and updates scatter the TD step onto the containing cell's
//! vertices with interpolation weights, so the learned value stays piecewise
//! linear in the belief. The adversarial target minimizes that interpolated
//! value over the ambiguity ball around the successor belief — exactly on
//! two-point belief spaces, via a candidate set elsewhere, or with the
//! signed-gradient attack when configured.

use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{
    fgsm_belief_attack, worst_case_belief_exact, AmbiguityBall, AttackConfig, BallSpec, BALL_TOL,
};
use crate::dp::{sanitize_weights, ValueTable};
use crate::error::{GdrError, Result};
use crate::filter::{
    init_belief, sample_likelihood, sample_test_group, update_belief, LikelihoodModel,
};
use crate::grid::BeliefGrid;
use crate::rng::derive_seed;
use crate::scenario::{Belief, BeliefLevel, HlmdpScenario, Policy};

/// Action-value table on (belief grid x states x actions).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub grid: BeliefGrid,
    pub num_states: usize,
    pub num_actions: usize,
    /// Indexed `q[(belief * S + s) * A + a]`.
    pub q: Vec<f64>,
}

impl QTable {
    pub fn zeros(grid: BeliefGrid, num_states: usize, num_actions: usize) -> Self {
        let q = vec![0.0; grid.len() * num_states * num_actions];
        QTable {
            grid,
            num_states,
            num_actions,
            q,
        }
    }

    #[inline]
    fn offset(&self, belief_index: usize, state: usize, action: usize) -> usize {
        (belief_index * self.num_states + state) * self.num_actions + action
    }

    pub fn get(&self, belief_index: usize, state: usize, action: usize) -> f64 {
        self.q[self.offset(belief_index, state, action)]
    }

    /// Interpolated action values at an arbitrary belief.
    pub fn action_values(&self, belief_weights: &[f64], state: usize) -> Vec<f64> {
        let w = sanitize_weights(belief_weights);
        let pieces = self.grid.interpolate(&w);
        let mut values = vec![0.0; self.num_actions];
        for (idx, lambda) in pieces {
            for (a, v) in values.iter_mut().enumerate() {
                *v += lambda * self.get(idx, state, a);
            }
        }
        values
    }

    /// Greedy action with ties broken toward the lowest index.
    pub fn greedy_action(&self, belief_weights: &[f64], state: usize) -> usize {
        let values = self.action_values(belief_weights, state);
        let mut best = 0usize;
        for (a, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = a;
            }
        }
        best
    }

    /// Interpolated state value `max_a Q(b, s, a)`.
    pub fn state_value(&self, belief_weights: &[f64], state: usize) -> f64 {
        self.action_values(belief_weights, state)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Freezes the greedy policy into a one-hot belief-state table.
    pub fn greedy_policy(&self) -> Policy {
        let action_dist = (0..self.grid.len())
            .map(|bi| {
                (0..self.num_states)
                    .map(|s| {
                        let a = self.greedy_action(self.grid.point(bi), s);
                        let mut row = vec![0.0; self.num_actions];
                        row[a] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Policy::BeliefStateTable {
            grid: self.grid.clone(),
            action_dist,
        }
    }
}

/// One logged step of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub belief: Belief,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_belief: Belief,
    pub next_state: usize,
    pub done: bool,
}

/// What the policy sees as its belief input during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefFeed {
    /// Bayesian filter over groups.
    Filtered,
    /// The exact one-hot of the hidden group (supervised-context path).
    OneHotTrue,
    /// A constant uniform vector; the policy is effectively belief-blind.
    Masked,
    /// Filtered group belief projected to the MDP level each step.
    ProjectedMdp,
}

impl BeliefFeed {
    /// Dimension of the fed belief.
    pub fn dim(&self, scenario: &HlmdpScenario) -> usize {
        match self {
            BeliefFeed::ProjectedMdp => scenario.num_mdps,
            _ => scenario.num_groups,
        }
    }

    fn level(&self) -> BeliefLevel {
        match self {
            BeliefFeed::ProjectedMdp => BeliefLevel::Mdp,
            _ => BeliefLevel::Group,
        }
    }
}

/// Anything that maps a fed belief and a state to an action distribution.
pub trait BeliefStatePolicy {
    fn action_dist(&self, belief_weights: &[f64], state: usize) -> Vec<f64>;
}

impl BeliefStatePolicy for QTable {
    fn action_dist(&self, belief_weights: &[f64], state: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_actions];
        row[self.greedy_action(belief_weights, state)] = 1.0;
        row
    }
}

impl BeliefStatePolicy for Policy {
    fn action_dist(&self, belief_weights: &[f64], state: usize) -> Vec<f64> {
        match self {
            Policy::StationaryStateTable { action_dist } => action_dist[state].clone(),
            Policy::BeliefStateTable { grid, action_dist } => {
                let w = sanitize_weights(belief_weights);
                let pieces = grid.interpolate(&w);
                let num_actions = action_dist[0][0].len();
                let mut mixed = vec![0.0; num_actions];
                for (idx, lambda) in pieces {
                    for (a, m) in mixed.iter_mut().enumerate() {
                        *m += lambda * action_dist[idx][state][a];
                    }
                }
                mixed
            }
        }
    }
}

fn sample_categorical(rng: &mut ChaCha8Rng, dist: &[f64]) -> usize {
    let draw = rng.gen::<f64>();
    let mut cumulative = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return i;
        }
    }
    dist.len() - 1
}

fn project_weights(scenario: &HlmdpScenario, group_weights: &[f64]) -> Vec<f64> {
    scenario
        .mixing
        .iter()
        .map(|row| row.iter().zip(group_weights).map(|(a, b)| a * b).sum())
        .collect()
}

/// Samples one episode: a hidden (group, MDP) pair drives the environment, the
/// filter tracks the group, and the policy acts epsilon-greedily on the fed
/// belief. Returns the step records and the discounted return.
pub fn rollout_episode(
    scenario: &HlmdpScenario,
    policy: &dyn BeliefStatePolicy,
    model: &LikelihoodModel,
    feed: BeliefFeed,
    test_noise: bool,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<TransitionRecord>, f64) {
    let num_groups = scenario.num_groups;
    let group = sample_categorical(rng, &scenario.prior);
    let column: Vec<f64> = (0..scenario.num_mdps)
        .map(|m| scenario.mixing[m][group])
        .collect();
    let mdp_index = sample_categorical(rng, &column);
    let mdp = &scenario.mdps[mdp_index];
    let mut state = sample_categorical(rng, &mdp.initial_state_dist);

    let mut group_belief = init_belief(num_groups).expect("num_groups >= 1");
    let fed = |group_belief: &Belief| -> Vec<f64> {
        match feed {
            BeliefFeed::Filtered => group_belief.weights.clone(),
            BeliefFeed::OneHotTrue => {
                let mut w = vec![0.0; num_groups];
                w[group] = 1.0;
                w
            }
            BeliefFeed::Masked => vec![1.0 / num_groups as f64; num_groups],
            BeliefFeed::ProjectedMdp => project_weights(scenario, &group_belief.weights),
        }
    };

    let mut records = Vec::with_capacity(scenario.horizon);
    let mut episode_return = 0.0;
    let mut discount_power = 1.0;
    for t in 0..scenario.horizon {
        let fed_weights = fed(&group_belief);
        let action = if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..scenario.num_actions())
        } else {
            sample_categorical(rng, &policy.action_dist(&fed_weights, state))
        };
        let reward = mdp.reward_at(state, action);
        episode_return += discount_power * reward;
        discount_power *= scenario.discount;
        let next_state = sample_categorical(rng, mdp.transition_row(state, action));

        if !matches!(feed, BeliefFeed::Masked) && num_groups > 1 {
            let target = if test_noise {
                sample_test_group(model, group, num_groups, rng)
            } else {
                group
            };
            let likelihood = sample_likelihood(model, target, num_groups, rng);
            group_belief = update_belief(&group_belief, &likelihood)
                .expect("soft one-hot likelihood is strictly positive");
        }
        let next_fed = fed(&group_belief);

        records.push(TransitionRecord {
            belief: Belief {
                weights: fed_weights,
                level: feed.level(),
            },
            state,
            action,
            reward,
            next_belief: Belief {
                weights: next_fed,
                level: feed.level(),
            },
            next_state,
            done: t + 1 == scenario.horizon,
        });
        state = next_state;
    }
    (records, episode_return)
}

/// How the inner minimization of the TD target is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdTargetMode {
    /// Candidate enumeration over the interpolated value (exact on two-point
    /// belief spaces, where all kinks and action crossings are enumerable).
    ExactOracle,
    /// The iterative signed-gradient attack on the interpolated value.
    FgsmAttack,
}

/// Minimum of `max_a Q(., s, a)` over the ball, by candidate enumeration.
///
/// On a 1-dimensional belief family (two atoms) the interpolated value is
/// piecewise linear with kinks at grid points and at action crossings, so
/// enumerating those plus the interval bounds is exact. In higher dimension
/// the candidates are the in-ball grid points, the per-action linearized
/// oracle minimizers, and the nominal point; the result is then a tight upper
/// bound on the true minimum and never exceeds the nominal value.
fn worst_state_value_candidates(q: &QTable, ball: &AmbiguityBall, state: usize) -> f64 {
    let nominal = &ball.nominal.weights;
    let mut best = q.state_value(nominal, state);
    if ball.radius <= 0.0 {
        return best;
    }

    if q.grid.dim == 2 {
        let k = q.grid.resolution as f64;
        let lo = (nominal[0] - ball.radius).max(0.0);
        let hi = (nominal[0] + ball.radius).min(1.0);
        let mut candidates = vec![lo, hi];
        let first_cell = (lo * k).floor() as usize;
        let last_cell = ((hi * k).ceil() as usize).min(q.grid.resolution);
        for cell in first_cell..=last_cell {
            let x = cell as f64 / k;
            if x > lo && x < hi {
                candidates.push(x);
            }
        }
        // Action crossings inside each cell.
        for cell in first_cell..last_cell.min(q.grid.resolution) {
            let x0 = cell as f64 / k;
            let x1 = (cell + 1) as f64 / k;
            let i0 = q
                .grid
                .exact_index(&[x0, 1.0 - x0])
                .expect("cell endpoint is a grid point");
            let i1 = q
                .grid
                .exact_index(&[x1, 1.0 - x1])
                .expect("cell endpoint is a grid point");
            for a in 0..q.num_actions {
                for b in (a + 1)..q.num_actions {
                    let fa0 = q.get(i0, state, a);
                    let fa1 = q.get(i1, state, a);
                    let fb0 = q.get(i0, state, b);
                    let fb1 = q.get(i1, state, b);
                    let denom = (fa1 - fa0) - (fb1 - fb0);
                    if denom.abs() > 1e-14 {
                        let t = (fb0 - fa0) / denom;
                        if (0.0..=1.0).contains(&t) {
                            let x = x0 + t * (x1 - x0);
                            if x >= lo && x <= hi {
                                candidates.push(x);
                            }
                        }
                    }
                }
            }
        }
        for x in candidates {
            let w = [x, 1.0 - x];
            if ball.contains(&w, BALL_TOL) {
                best = best.min(q.state_value(&w, state));
            }
        }
        return best;
    }

    // Higher-dimensional belief spaces: candidate set.
    for bi in 0..q.grid.len() {
        let point = q.grid.point(bi);
        if ball.contains(point, BALL_TOL) {
            best = best.min(q.state_value(point, state));
        }
    }
    for a in 0..q.num_actions {
        let vertex_values: Vec<f64> = (0..q.grid.dim)
            .map(|z| q.get(q.grid.vertex_index(z), state, a))
            .collect();
        if let Ok((member, _)) = worst_case_belief_exact(ball, &vertex_values) {
            best = best.min(q.state_value(&member.weights, state));
        }
    }
    best
}

fn worst_next_state_value(
    q: &QTable,
    ball_spec: &BallSpec,
    next_belief: &Belief,
    next_state: usize,
    mode: TdTargetMode,
    attack: &AttackConfig,
) -> f64 {
    let ball = ball_spec.centered_at(next_belief.clone());
    match mode {
        TdTargetMode::ExactOracle => worst_state_value_candidates(q, &ball, next_state),
        TdTargetMode::FgsmAttack => {
            let value_fn = |w: &[f64]| q.state_value(w, next_state);
            fgsm_belief_attack(&ball, &value_fn, attack).value
        }
    }
}

/// Applies one adversarial TD sweep over a batch. Targets use the worst
/// in-ball successor value; terminal records bootstrap nothing. Returns the
/// mean absolute TD residual measured before the update.
pub fn adversarial_td_update(
    q: &mut QTable,
    batch: &[&TransitionRecord],
    discount: f64,
    ball: &BallSpec,
    mode: TdTargetMode,
    attack: &AttackConfig,
    learning_rate: f64,
) -> f64 {
    let mut total_residual = 0.0;
    for record in batch {
        let target = if record.done {
            record.reward
        } else {
            record.reward
                + discount
                    * worst_next_state_value(
                        q,
                        ball,
                        &record.next_belief,
                        record.next_state,
                        mode,
                        attack,
                    )
        };
        let current: f64 = q
            .action_values(&record.belief.weights, record.state)
            .swap_remove(record.action);
        total_residual += (target - current).abs();

        let pieces = q
            .grid
            .interpolate(&sanitize_weights(&record.belief.weights));
        for (idx, lambda) in pieces {
            let cell = q.offset(idx, record.state, record.action);
            q.q[cell] += learning_rate * lambda * (target - q.q[cell]);
        }
    }
    if batch.is_empty() {
        0.0
    } else {
        total_residual / batch.len() as f64
    }
}

/// Linear schedule from `start` to `end` over the first `fraction` of
/// episodes, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl LinearSchedule {
    pub fn at(&self, episode: usize, total: usize) -> f64 {
        let span = (total as f64 * self.fraction).max(1.0);
        let t = (episode as f64 / span).min(1.0);
        self.start + (self.end - self.start) * t
    }
}

/// Training configuration for the tabular robust learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub epsilon: LinearSchedule,
    pub learning_rate: LinearSchedule,
    /// Leading episodes fed exact one-hot beliefs with nominal targets.
    pub pretrain_episodes: usize,
    pub ball: BallSpec,
    pub attack: AttackConfig,
    pub target_mode: TdTargetMode,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub grid_resolution: usize,
    pub likelihood: LikelihoodModel,
    pub feed: BeliefFeed,
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults sized for desk-scale scenarios.
    pub fn new(episodes: usize, ball: BallSpec, seed: u64) -> Self {
        TrainConfig {
            episodes,
            epsilon: LinearSchedule {
                start: 1.0,
                end: 0.05,
                fraction: 0.5,
            },
            learning_rate: LinearSchedule {
                start: 0.4,
                end: 0.05,
                fraction: 1.0,
            },
            pretrain_episodes: episodes / 10,
            ball,
            attack: AttackConfig {
                step_size: 0.02,
                max_steps: 50,
                seed,
            },
            target_mode: TdTargetMode::ExactOracle,
            replay_capacity: 4096,
            batch_size: 32,
            grid_resolution: 10,
            likelihood: LikelihoodModel::new(0.9, 1.0, 1.0),
            feed: BeliefFeed::Filtered,
            seed,
        }
    }

    fn validate(&self, scenario: &HlmdpScenario) -> Result<()> {
        for (name, v) in [
            ("epsilon.start", self.epsilon.start),
            ("epsilon.end", self.epsilon.end),
            ("learning_rate.start", self.learning_rate.start),
            ("learning_rate.end", self.learning_rate.end),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(GdrError::InvalidParameter(format!(
                    "{name} = {v} must lie in (0, 1]"
                )));
            }
        }
        if self.pretrain_episodes > self.episodes {
            return Err(GdrError::InvalidParameter(
                "pretrain_episodes exceeds total episodes".into(),
            ));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(GdrError::InvalidParameter(
                "batch size must be positive and fit in the replay buffer".into(),
            ));
        }
        if scenario.num_groups > 1 {
            self.likelihood.validate_for(scenario.num_groups)?;
        }
        Ok(())
    }
}

/// The tabular presets standing in for the deep baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Group distributionally robust training (the full method).
    Gdr,
    /// Exact one-hot group context, nominal targets.
    GExact,
    /// Belief input masked to uniform, nominal targets.
    NoBelief,
    /// Filtered beliefs, nominal targets.
    GBelief,
    /// Projected MDP-level beliefs with a ball on the projection.
    DrProjected,
    /// State-space perturbations; needs a metric state embedding, which
    /// tabular scenarios do not declare.
    StateRobust,
}

/// Adjusts a base configuration to one of the baseline presets.
pub fn baseline_config(base: &TrainConfig, baseline: Baseline) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    match baseline {
        Baseline::Gdr => {
            cfg.feed = BeliefFeed::Filtered;
        }
        Baseline::GExact => {
            cfg.feed = BeliefFeed::OneHotTrue;
            cfg.ball.xi = 0.0;
            cfg.pretrain_episodes = cfg.episodes;
        }
        Baseline::NoBelief => {
            cfg.feed = BeliefFeed::Masked;
            cfg.ball.xi = 0.0;
        }
        Baseline::GBelief => {
            cfg.feed = BeliefFeed::Filtered;
            cfg.ball.xi = 0.0;
        }
        Baseline::DrProjected => {
            cfg.feed = BeliefFeed::ProjectedMdp;
        }
        Baseline::StateRobust => {
            return Err(GdrError::Unsupported(
                "state-perturbing robust training requires a metric state embedding, \
                 which tabular scenarios do not declare"
                    .into(),
            ));
        }
    }
    Ok(cfg)
}

/// One row of the per-episode training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeStat {
    pub episode: usize,
    pub episode_return: f64,
    pub td_residual: f64,
    pub epsilon: f64,
    /// "pretrain" or "main".
    pub phase: &'static str,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub q: QTable,
    pub log: Vec<EpisodeStat>,
}

/// Runs the robust training loop: rollouts feed a FIFO replay buffer; one
/// batch is sampled without replacement per episode and updated toward the
/// adversarial target. The pretrain phase feeds exact one-hot beliefs with a
/// zero-radius ball. Aborts with a diagnostic when |Q| exceeds ten times the
/// value bound.
pub fn train(scenario: &HlmdpScenario, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate(scenario)?;
    let dim = cfg.feed.dim(scenario);
    let mut q = QTable::zeros(
        BeliefGrid::new(dim, cfg.grid_resolution),
        scenario.num_states(),
        scenario.num_actions(),
    );
    let mut replay: VecDeque<TransitionRecord> = VecDeque::with_capacity(cfg.replay_capacity);
    let mut rollout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut batch_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let bound = {
        let (lo, hi) = scenario.reward_range();
        (lo.abs().max(hi.abs()) / (1.0 - scenario.discount)).max(1e-9)
    };

    let mut log = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let pretraining = episode < cfg.pretrain_episodes;
        let phase = if pretraining { "pretrain" } else { "main" };
        let feed = if pretraining {
            match cfg.feed {
                // Exact context for the projected feed is the true group's
                // mixing column.
                BeliefFeed::ProjectedMdp => BeliefFeed::ProjectedMdp,
                _ => BeliefFeed::OneHotTrue,
            }
        } else {
            cfg.feed
        };
        let ball = if pretraining {
            BallSpec::new(0.0, cfg.ball.metric)
        } else {
            cfg.ball
        };
        let epsilon = cfg.epsilon.at(episode, cfg.episodes);

        let (records, episode_return) = if pretraining && feed == BeliefFeed::ProjectedMdp {
            rollout_pretrain_projected(scenario, &q, &cfg.likelihood, epsilon, &mut rollout_rng)
        } else {
            rollout_episode(
                scenario,
                &q,
                &cfg.likelihood,
                feed,
                false,
                epsilon,
                &mut rollout_rng,
            )
        };
        for record in records {
            if replay.len() == cfg.replay_capacity {
                replay.pop_front();
            }
            replay.push_back(record);
        }

        let mut td_residual = 0.0;
        if replay.len() >= cfg.batch_size {
            let chosen = sample_indices(&mut batch_rng, replay.len(), cfg.batch_size);
            let batch: Vec<&TransitionRecord> = chosen.iter().map(|i| &replay[i]).collect();
            let lr = cfg.learning_rate.at(episode, cfg.episodes);
            td_residual = adversarial_td_update(
                &mut q,
                &batch,
                scenario.discount,
                &ball,
                cfg.target_mode,
                &cfg.attack,
                lr,
            );
        }

        let max_abs_q = q.max_abs();
        if max_abs_q > 10.0 * bound {
            return Err(GdrError::TrainingDiverged {
                episode,
                max_abs_q,
                bound,
            });
        }
        log.push(EpisodeStat {
            episode,
            episode_return,
            td_residual,
            epsilon,
            phase,
        });
    }
    Ok(TrainOutcome { q, log })
}

/// Pretrain rollout for the projected feed: the policy sees the true group's
/// exact MDP distribution (the mixing column) instead of the filtered
/// projection.
fn rollout_pretrain_projected(
    scenario: &HlmdpScenario,
    q: &QTable,
    model: &LikelihoodModel,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<TransitionRecord>, f64) {
    let _ = model;
    let group = sample_categorical(rng, &scenario.prior);
    let column: Vec<f64> = (0..scenario.num_mdps)
        .map(|m| scenario.mixing[m][group])
        .collect();
    let mdp_index = sample_categorical(rng, &column);
    let mdp = &scenario.mdps[mdp_index];
    let mut state = sample_categorical(rng, &mdp.initial_state_dist);
    let fed = column.clone();

    let mut records = Vec::with_capacity(scenario.horizon);
    let mut episode_return = 0.0;
    let mut discount_power = 1.0;
    for t in 0..scenario.horizon {
        let action = if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..scenario.num_actions())
        } else {
            q.greedy_action(&fed, state)
        };
        let reward = mdp.reward_at(state, action);
        episode_return += discount_power * reward;
        discount_power *= scenario.discount;
        let next_state = sample_categorical(rng, mdp.transition_row(state, action));
        records.push(TransitionRecord {
            belief: Belief::mdp(fed.clone()),
            state,
            action,
            reward,
            next_belief: Belief::mdp(fed.clone()),
            next_state,
            done: t + 1 == scenario.horizon,
        });
        state = next_state;
    }
    (records, episode_return)
}

/// Worst-in-ball value drop at (belief, state), with the pieces needed for
/// the advantage correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageDrop {
    /// `V(b, s) - min over the ball of V(., s)`; never negative.
    pub r_drop: f64,
    pub nominal_value: f64,
}

impl AdvantageDrop {
    /// Robustness-corrected advantage for a caller-supplied return-to-go.
    pub fn advantage(&self, return_to_go: f64) -> f64 {
        return_to_go - self.r_drop - self.nominal_value
    }
}

/// Computes the value drop under the worst in-ball belief for a value table.
pub fn advantage_drop(
    value: &ValueTable,
    belief: &Belief,
    state: usize,
    ball_spec: &BallSpec,
) -> AdvantageDrop {
    let nominal_value = value.value_at(&belief.weights, state);
    let ball = ball_spec.centered_at(belief.clone());
    let worst = worst_value_table_candidates(value, &ball, state);
    AdvantageDrop {
        r_drop: (nominal_value - worst).max(0.0),
        nominal_value,
    }
}

/// Minimum of the interpolated `V(., s)` over the ball; exact on two-point
/// belief spaces (kinks only at grid points), candidate-based elsewhere.
fn worst_value_table_candidates(value: &ValueTable, ball: &AmbiguityBall, state: usize) -> f64 {
    let nominal = &ball.nominal.weights;
    let mut best = value.value_at(nominal, state);
    if ball.radius <= 0.0 {
        return best;
    }
    if value.grid.dim == 2 {
        let k = value.grid.resolution as f64;
        let lo = (nominal[0] - ball.radius).max(0.0);
        let hi = (nominal[0] + ball.radius).min(1.0);
        let mut candidates = vec![lo, hi];
        let first = (lo * k).floor() as usize;
        let last = ((hi * k).ceil() as usize).min(value.grid.resolution);
        for cell in first..=last {
            let x = cell as f64 / k;
            if x > lo && x < hi {
                candidates.push(x);
            }
        }
        for x in candidates {
            let w = [x, 1.0 - x];
            if ball.contains(&w, BALL_TOL) {
                best = best.min(value.value_at(&w, state));
            }
        }
        return best;
    }
    for bi in 0..value.grid.len() {
        let point = value.grid.point(bi);
        if ball.contains(point, BALL_TOL) {
            best = best.min(value.value_at(point, state));
        }
    }
    let vertex_values: Vec<f64> = (0..value.grid.dim)
        .map(|z| value.get(value.grid.vertex_index(z), state))
        .collect();
    if let Ok((member, _)) = worst_case_belief_exact(ball, &vertex_values) {
        best = best.min(value.value_at(&member.weights, state));
    }
    best
}

/// One row of the robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub noise_level: f64,
    pub mean_return: f64,
    pub std_err: f64,
    pub episodes: usize,
}

/// Evaluates a policy's mean return under the test-time belief-noise protocol
/// at each noise level. Episodes run concurrently on independent seeded
/// streams; aggregation happens after all workers finish.
pub fn evaluate_robustness(
    scenario: &HlmdpScenario,
    policy: &(dyn BeliefStatePolicy + Sync),
    model: &LikelihoodModel,
    feed: BeliefFeed,
    noise_levels: &[f64],
    episodes: usize,
    seed: u64,
) -> Result<Vec<RobustnessRow>> {
    if episodes < 2 {
        return Err(GdrError::InvalidParameter(
            "robustness evaluation needs at least 2 episodes per level".into(),
        ));
    }
    for &level in noise_levels {
        if !(0.0..=1.0).contains(&level) {
            return Err(GdrError::InvalidParameter(format!(
                "noise level {level} outside [0, 1]"
            )));
        }
    }
    let mut rows = Vec::with_capacity(noise_levels.len());
    for &level in noise_levels {
        let eval_model = LikelihoodModel {
            noise_level: level,
            ..*model
        };
        // Episode streams are shared across noise levels (paired evaluation),
        // so levels differ only through the injected noise.
        let returns: Vec<f64> = (0..episodes)
            .into_par_iter()
            .map(|ep| {
                let stream = derive_seed(seed, ep as u64 + 10);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                rollout_episode(scenario, policy, &eval_model, feed, true, 0.0, &mut rng).1
            })
            .collect();
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
        rows.push(RobustnessRow {
            noise_level: level,
            mean_return: mean,
            std_err: (var / n).sqrt(),
            episodes,
        });
    }
    Ok(rows)
}

/// One row of the belief-error profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeliefErrorRow {
    pub noise_level: f64,
    pub step: usize,
    pub mean_l1_error: f64,
}

/// Mean L1 distance between the filtered belief and the true one-hot at each
/// step, per noise level. The filter runs standalone: the likelihood channel
/// does not depend on states or actions.
pub fn belief_error_profile(
    scenario: &HlmdpScenario,
    model: &LikelihoodModel,
    noise_levels: &[f64],
    episodes: usize,
    seed: u64,
) -> Result<Vec<BeliefErrorRow>> {
    if episodes == 0 {
        return Err(GdrError::InvalidParameter(
            "belief error profile needs at least one episode".into(),
        ));
    }
    let num_groups = scenario.num_groups;
    let horizon = scenario.horizon;
    let mut rows = Vec::new();
    for &level in noise_levels {
        let eval_model = LikelihoodModel {
            noise_level: level,
            ..*model
        };
        let mut totals = vec![0.0f64; horizon + 1];
        for ep in 0..episodes {
            let stream = derive_seed(seed, ep as u64 + 20);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let group = sample_categorical(&mut rng, &scenario.prior);
            let mut one_hot = vec![0.0; num_groups];
            one_hot[group] = 1.0;
            let mut belief = init_belief(num_groups)?;
            totals[0] += belief.l1_distance(&one_hot);
            for t in 1..=horizon {
                if num_groups > 1 {
                    let target = sample_test_group(&eval_model, group, num_groups, &mut rng);
                    let likelihood = sample_likelihood(&eval_model, target, num_groups, &mut rng);
                    belief = update_belief(&belief, &likelihood)?;
                }
                totals[t] += belief.l1_distance(&one_hot);
            }
        }
        for (step, total) in totals.iter().enumerate() {
            rows.push(BeliefErrorRow {
                noise_level: level,
                step,
                mean_l1_error: total / episodes as f64,
            });
        }
    }
    Ok(rows)
}
