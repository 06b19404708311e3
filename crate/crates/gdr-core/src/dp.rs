//! Robust dynamic programming over (belief, state) pairs.
//!
//! The one-step backup at a cell (b, s) builds, per action, the vector of
//! group-conditional continuation payoffs, hands it to the exact worst-case
//! oracle for the ball centered at b, and maximizes over actions. Deterministic
//! actions suffice for the outer maximization because the objective is linear
//! in the action distribution once the inner minimum is resolved per action;
//! ties break toward the lowest action index.
//!
//! Infinite-horizon planning iterates this backup on a discretized belief
//! simplex; finite-horizon planning recurses exactly over the reachable
//! belief tree, with no grid error.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{worst_case_belief_exact, BallSpec};
use crate::error::{GdrError, Result};
use crate::filter::update_belief;
use crate::grid::BeliefGrid;
use crate::scenario::{project_belief, Belief, HlmdpScenario, Policy};

/// The four robust value criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Formulation {
    /// Distributionally robust over group beliefs.
    Gdr,
    /// Hard minimum over groups.
    GroupRobust,
    /// Distributionally robust over MDP beliefs (flat structure).
    DistRobust,
    /// Hard minimum over MDPs.
    Robust,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::Gdr,
        Formulation::GroupRobust,
        Formulation::DistRobust,
        Formulation::Robust,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Formulation::Gdr => "GDR",
            Formulation::GroupRobust => "GR",
            Formulation::DistRobust => "DR",
            Formulation::Robust => "R",
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Deterministic belief-transition rule used inside planners: given the
/// current belief and an observed transition, produce the likelihood vector
/// fed to the Bayes update.
pub trait BeliefChannel: Sync {
    fn likelihood(&self, belief: &[f64], state: usize, next_state: usize) -> Vec<f64>;
}

/// Built-in planner channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerLikelihood {
    /// Uniform likelihood; the belief never moves during planning.
    Uninformative,
    /// The soft one-hot channel marginalized under the current belief:
    /// `L(i) = l b_i + (1 - l)(1 - b_i)/(Z - 1)`. Sharpens the current mode,
    /// which is the noise-free channel as seen by a planner that does not
    /// know the true group.
    BeliefMixture { sharpness: f64 },
}

impl Default for PlannerLikelihood {
    fn default() -> Self {
        PlannerLikelihood::BeliefMixture { sharpness: 0.9 }
    }
}

impl BeliefChannel for PlannerLikelihood {
    fn likelihood(&self, belief: &[f64], _state: usize, _next_state: usize) -> Vec<f64> {
        let z = belief.len();
        match *self {
            PlannerLikelihood::Uninformative => vec![1.0 / z as f64; z],
            PlannerLikelihood::BeliefMixture { sharpness } => {
                if z == 1 {
                    return vec![1.0];
                }
                let off = (1.0 - sharpness) / (z as f64 - 1.0);
                belief
                    .iter()
                    .map(|&b| b * sharpness + (1.0 - b) * off)
                    .collect()
            }
        }
    }
}

fn next_belief(
    channel: &dyn BeliefChannel,
    belief: &[f64],
    state: usize,
    next_state: usize,
) -> Vec<f64> {
    let b = Belief::group(belief.to_vec());
    let likelihood = channel.likelihood(belief, state, next_state);
    match update_belief(&b, &likelihood) {
        Ok(updated) => updated.weights,
        // A channel that annihilates the posterior leaves the belief in place;
        // the built-in channels never do.
        Err(_) => belief.to_vec(),
    }
}

/// Value function on (belief grid x states).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub grid: BeliefGrid,
    pub num_states: usize,
    pub discount: f64,
    /// Indexed `values[belief_index * num_states + state]`.
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(grid: BeliefGrid, num_states: usize, discount: f64) -> Self {
        let values = vec![0.0; grid.len() * num_states];
        ValueTable {
            grid,
            num_states,
            discount,
            values,
        }
    }

    pub fn constant(grid: BeliefGrid, num_states: usize, discount: f64, value: f64) -> Self {
        let values = vec![value; grid.len() * num_states];
        ValueTable {
            grid,
            num_states,
            discount,
            values,
        }
    }

    pub fn get(&self, belief_index: usize, state: usize) -> f64 {
        self.values[belief_index * self.num_states + state]
    }

    pub fn set(&mut self, belief_index: usize, state: usize, value: f64) {
        self.values[belief_index * self.num_states + state] = value;
    }

    /// Interpolated value at an arbitrary belief. Out-of-simplex probes are
    /// clamped and renormalized first, so the function is total (needed by
    /// finite-difference callers).
    pub fn value_at(&self, belief_weights: &[f64], state: usize) -> f64 {
        let w = sanitize_weights(belief_weights);
        self.grid
            .interpolate(&w)
            .into_iter()
            .map(|(idx, lambda)| lambda * self.get(idx, state))
            .sum()
    }

    /// Sup-norm distance to another table on the same grid.
    pub fn max_residual(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn sanitize_weights(weights: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = weights.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        let n = w.len();
        return vec![1.0 / n as f64; n];
    }
    if (sum - 1.0).abs() > 1e-12 {
        for x in &mut w {
            *x /= sum;
        }
    }
    w
}

/// Per-MDP one-step action values given a continuation value per successor
/// state: `q[m][a] = R_m(s, a) + gamma * sum_{s'} P_m(s'|s,a) cont[s']`.
fn mdp_action_values(
    scenario: &HlmdpScenario,
    state: usize,
    continuation: &[f64],
) -> Vec<Vec<f64>> {
    let gamma = scenario.discount;
    scenario
        .mdps
        .iter()
        .map(|mdp| {
            (0..scenario.num_actions())
                .map(|a| {
                    let row = mdp.transition_row(state, a);
                    let future: f64 = row.iter().zip(continuation).map(|(p, cont)| p * cont).sum();
                    mdp.reward_at(state, a) + gamma * future
                })
                .collect()
        })
        .collect()
}

/// Group-conditional payoffs from per-MDP payoffs: `u[z] = sum_m A[m][z] q[m]`.
fn group_payoffs(scenario: &HlmdpScenario, per_mdp: &[f64]) -> Vec<f64> {
    (0..scenario.num_groups)
        .map(|z| {
            (0..scenario.num_mdps)
                .map(|m| scenario.mixing[m][z] * per_mdp[m])
                .sum()
        })
        .collect()
}

/// Robust backup at one (belief, state) cell: per action, the exact worst case
/// of the group payoff vector over the ball centered at `belief`, then the max
/// over actions. Returns (best action, robust value).
fn robust_backup(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    belief: &[f64],
    state: usize,
    continuation: &[f64],
) -> (usize, f64) {
    let q = mdp_action_values(scenario, state, continuation);
    let centered = ball.centered_at(Belief::group(belief.to_vec()));
    let mut best = (0usize, f64::NEG_INFINITY);
    for a in 0..scenario.num_actions() {
        let per_mdp: Vec<f64> = q.iter().map(|row| row[a]).collect();
        let payoff = group_payoffs(scenario, &per_mdp);
        let (_, value) = worst_case_belief_exact(&centered, &payoff)
            .expect("payoff dimension matches group count");
        if value > best.1 {
            best = (a, value);
        }
    }
    best
}

/// One application of the robust Bellman operator on the grid.
pub fn bellman_operator(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    table: &ValueTable,
    channel: &dyn BeliefChannel,
) -> ValueTable {
    let num_states = table.num_states;
    let values: Vec<f64> = (0..table.grid.len())
        .into_par_iter()
        .flat_map_iter(|bi| {
            let belief = table.grid.point(bi).to_vec();
            let scenario = &scenario;
            let table = &table;
            (0..num_states).map(move |s| {
                let continuation: Vec<f64> = (0..num_states)
                    .map(|s_next| {
                        let updated = next_belief(channel, &belief, s, s_next);
                        table.value_at(&updated, s_next)
                    })
                    .collect();
                robust_backup(scenario, ball, &belief, s, &continuation).1
            })
        })
        .collect();
    ValueTable {
        grid: table.grid.clone(),
        num_states,
        discount: table.discount,
        values,
    }
}

/// One residual entry in the iteration log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationStat {
    pub iter: usize,
    pub residual: f64,
}

/// Value iteration outcome. Non-convergence is reported through `converged`
/// and the final residual rather than a silent success.
#[derive(Debug, Clone)]
pub struct ValueIterationOutcome {
    pub table: ValueTable,
    pub policy: Policy,
    pub log: Vec<IterationStat>,
    pub converged: bool,
}

/// Iterates the robust Bellman operator from `initial` until the sup-norm
/// residual drops below `tol` or `max_iters` sweeps have run.
pub fn value_iteration_from(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    initial: ValueTable,
    channel: &dyn BeliefChannel,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIterationOutcome> {
    if !(tol > 0.0) {
        return Err(GdrError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut table = initial;
    let mut log = Vec::new();
    let mut converged = false;
    for iter in 0..max_iters {
        let updated = bellman_operator(scenario, ball, &table, channel);
        let residual = updated.max_residual(&table);
        log.push(IterationStat { iter, residual });
        table = updated;
        if residual <= tol {
            converged = true;
            break;
        }
    }

    let policy = extract_policy(scenario, ball, &table, channel);
    Ok(ValueIterationOutcome {
        table,
        policy,
        log,
        converged,
    })
}

/// Value iteration from the all-zero table on a fresh grid.
pub fn value_iteration(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    grid: BeliefGrid,
    channel: &dyn BeliefChannel,
    tol: f64,
    max_iters: usize,
) -> Result<ValueIterationOutcome> {
    let initial = ValueTable::zeros(grid, scenario.num_states(), scenario.discount);
    value_iteration_from(scenario, ball, initial, channel, tol, max_iters)
}

/// Greedy policy of a value table, as one-hot action rows per grid cell.
pub fn extract_policy(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    table: &ValueTable,
    channel: &dyn BeliefChannel,
) -> Policy {
    let num_states = table.num_states;
    let num_actions = scenario.num_actions();
    let action_dist: Vec<Vec<Vec<f64>>> = (0..table.grid.len())
        .into_par_iter()
        .map(|bi| {
            let belief = table.grid.point(bi).to_vec();
            (0..num_states)
                .map(|s| {
                    let continuation: Vec<f64> = (0..num_states)
                        .map(|s_next| {
                            let updated = next_belief(channel, &belief, s, s_next);
                            table.value_at(&updated, s_next)
                        })
                        .collect();
                    let (action, _) = robust_backup(scenario, ball, &belief, s, &continuation);
                    let mut row = vec![0.0; num_actions];
                    row[action] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    Policy::BeliefStateTable {
        grid: table.grid.clone(),
        action_dist,
    }
}

/// The finite set of beliefs reachable from a root under a deterministic
/// channel, layered by timestep, with successor links per (state, next state).
pub struct BeliefTree {
    /// `levels[t]` holds the distinct beliefs reachable at time t.
    pub levels: Vec<Vec<Vec<f64>>>,
    /// `succ[t][node][s][s']` is the node index at level t+1.
    pub succ: Vec<Vec<Vec<Vec<usize>>>>,
}

impl BeliefTree {
    /// Expands the reachable tree for `horizon` steps, deduplicating beliefs
    /// bitwise per level. Errors once the node budget is exceeded.
    pub fn build(
        scenario: &HlmdpScenario,
        root: &[f64],
        channel: &dyn BeliefChannel,
        horizon: usize,
        node_budget: usize,
    ) -> Result<BeliefTree> {
        let num_states = scenario.num_states();
        let mut levels = vec![vec![root.to_vec()]];
        let mut succ = Vec::new();
        let mut total = 1usize;
        for t in 0..horizon {
            let current = &levels[t];
            let mut next: Vec<Vec<f64>> = Vec::new();
            let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
            let mut links = vec![vec![vec![0usize; num_states]; num_states]; current.len()];
            for (ni, belief) in current.iter().enumerate() {
                for s in 0..num_states {
                    for s_next in 0..num_states {
                        let updated = next_belief(channel, belief, s, s_next);
                        let key: Vec<u64> = updated.iter().map(|x| x.to_bits()).collect();
                        let idx = *keys.entry(key).or_insert_with(|| {
                            next.push(updated.clone());
                            next.len() - 1
                        });
                        links[ni][s][s_next] = idx;
                    }
                }
            }
            total += next.len();
            if total > node_budget {
                return Err(GdrError::ResourceExceeded {
                    what: format!("reachable belief tree at depth {}", t + 1),
                    budget: node_budget,
                });
            }
            succ.push(links);
            levels.push(next);
        }
        Ok(BeliefTree { levels, succ })
    }
}

/// One solved node of the exact finite-horizon recursion.
#[derive(Debug, Clone, Serialize)]
pub struct DpNode {
    pub time: usize,
    pub belief: Vec<f64>,
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

/// Exact finite-horizon solution at the root belief.
#[derive(Debug, Clone)]
pub struct FiniteHorizonSolution {
    /// Optimal robust value per root state.
    pub root_values: Vec<f64>,
    /// Optimal first action per root state.
    pub root_actions: Vec<usize>,
    /// Every (time, belief, state) node with its optimal action and value.
    pub tree: Vec<DpNode>,
}

/// Default cap on reachable-belief-tree nodes.
pub const DEFAULT_NODE_BUDGET: usize = 200_000;

/// Backward induction over the exact reachable-belief tree: the same robust
/// backup as the grid operator, but with no interpolation error. Values follow
/// the convention `sum_{t=0}^{T-1} gamma^t r_t`.
pub fn finite_horizon_dp(
    scenario: &HlmdpScenario,
    ball: &BallSpec,
    root_belief: &Belief,
    channel: &dyn BeliefChannel,
    node_budget: usize,
) -> Result<FiniteHorizonSolution> {
    if root_belief.len() != scenario.num_groups {
        return Err(GdrError::DimensionMismatch {
            what: "root belief",
            expected: scenario.num_groups,
            got: root_belief.len(),
        });
    }
    let horizon = scenario.horizon;
    let num_states = scenario.num_states();
    let tree = BeliefTree::build(
        scenario,
        &root_belief.weights,
        channel,
        horizon,
        node_budget,
    )?;

    // values[node][state] at the level currently being consumed.
    let mut future: Vec<Vec<f64>> = vec![vec![0.0; num_states]; tree.levels[horizon].len()];
    let mut nodes = Vec::new();
    for t in (0..horizon).rev() {
        let mut level_values = vec![vec![0.0; num_states]; tree.levels[t].len()];
        for (ni, belief) in tree.levels[t].iter().enumerate() {
            for s in 0..num_states {
                let continuation: Vec<f64> = (0..num_states)
                    .map(|s_next| future[tree.succ[t][ni][s][s_next]][s_next])
                    .collect();
                let (action, value) = robust_backup(scenario, ball, belief, s, &continuation);
                level_values[ni][s] = value;
                nodes.push(DpNode {
                    time: t,
                    belief: belief.clone(),
                    state: s,
                    action,
                    value,
                });
            }
        }
        future = level_values;
    }

    let root_values = future[0].clone();
    let root_actions = (0..num_states)
        .map(|s| {
            nodes
                .iter()
                .rev()
                .find(|n| n.time == 0 && n.state == s)
                .map(|n| n.action)
                .unwrap_or(0)
        })
        .collect();
    nodes.reverse(); // root first
    Ok(FiniteHorizonSolution {
        root_values,
        root_actions,
        tree: nodes,
    })
}

/// Episode values `U_m` of a policy in every MDP, computed exactly by backward
/// induction over the reachable belief tree (belief-conditioned policies see
/// the deterministic channel's belief trajectory).
pub fn policy_mdp_values(
    scenario: &HlmdpScenario,
    policy: &Policy,
    root_belief: &Belief,
    channel: &dyn BeliefChannel,
    node_budget: usize,
) -> Result<Vec<f64>> {
    let horizon = scenario.horizon;
    let num_states = scenario.num_states();
    let num_actions = scenario.num_actions();
    let tree = BeliefTree::build(
        scenario,
        &root_belief.weights,
        channel,
        horizon,
        node_budget,
    )?;

    let mut values = Vec::with_capacity(scenario.num_mdps);
    for mdp in &scenario.mdps {
        let mut future: Vec<Vec<f64>> = vec![vec![0.0; num_states]; tree.levels[horizon].len()];
        for t in (0..horizon).rev() {
            let mut level = vec![vec![0.0; num_states]; tree.levels[t].len()];
            for (ni, belief) in tree.levels[t].iter().enumerate() {
                for s in 0..num_states {
                    let dist = policy.action_dist(
                        &Belief {
                            weights: belief.clone(),
                            level: root_belief.level,
                        },
                        s,
                    );
                    let mut v = 0.0;
                    for a in 0..num_actions {
                        if dist[a] == 0.0 {
                            continue;
                        }
                        let row = mdp.transition_row(s, a);
                        let cont: f64 = (0..num_states)
                            .map(|s_next| row[s_next] * future[tree.succ[t][ni][s][s_next]][s_next])
                            .sum();
                        v += dist[a] * (mdp.reward_at(s, a) + scenario.discount * cont);
                    }
                    level[ni][s] = v;
                }
            }
            future = level;
        }
        let value: f64 = mdp
            .initial_state_dist
            .iter()
            .zip(&future[0])
            .map(|(p, v)| p * v)
            .sum();
        values.push(value);
    }
    Ok(values)
}

/// Value of a fixed policy under one robust formulation, evaluated at the
/// given group belief: GDR and DR apply the exact worst-case oracle to the
/// group- and MDP-level payoff vectors; GR and R take hard minima. The DR
/// nominal is the projected group belief.
pub fn evaluate_formulation(
    scenario: &HlmdpScenario,
    formulation: Formulation,
    policy: &Policy,
    group_belief: &Belief,
    ball: &BallSpec,
    channel: &dyn BeliefChannel,
) -> Result<f64> {
    let per_mdp = policy_mdp_values(scenario, policy, group_belief, channel, DEFAULT_NODE_BUDGET)?;
    evaluate_formulation_from_payoffs(scenario, formulation, &per_mdp, group_belief, ball)
}

/// Same as [`evaluate_formulation`] but reusing precomputed `U_m` payoffs.
pub fn evaluate_formulation_from_payoffs(
    scenario: &HlmdpScenario,
    formulation: Formulation,
    per_mdp: &[f64],
    group_belief: &Belief,
    ball: &BallSpec,
) -> Result<f64> {
    match formulation {
        Formulation::Gdr => {
            let payoff = group_payoffs(scenario, per_mdp);
            let centered = ball.centered_at(group_belief.clone());
            Ok(worst_case_belief_exact(&centered, &payoff)?.1)
        }
        Formulation::GroupRobust => Ok(group_payoffs(scenario, per_mdp)
            .into_iter()
            .fold(f64::INFINITY, f64::min)),
        Formulation::DistRobust => {
            let nominal = project_belief(scenario, group_belief)?;
            let centered = ball.centered_at(nominal);
            Ok(worst_case_belief_exact(&centered, per_mdp)?.1)
        }
        Formulation::Robust => Ok(per_mdp.iter().cloned().fold(f64::INFINITY, f64::min)),
    }
}

/// Per-formulation optimum over a shared policy class.
#[derive(Debug, Clone)]
pub struct FormulationOptimum {
    pub value: f64,
    pub policy: Policy,
}

/// Result of [`optimal_values_all_formulations`]. `exact` is false when the
/// enumeration budget forced the alternating best-response fallback, whose
/// values are feasible but not certified optimal.
#[derive(Debug, Clone)]
pub struct OptimalValues {
    pub per_formulation: BTreeMap<Formulation, FormulationOptimum>,
    pub exact: bool,
}

/// Optimizes each formulation over the class of deterministic stationary
/// state policies by exhaustive enumeration; every formulation sees the same
/// class and the same episode values, so the ordering guarantees between the
/// four optima carry over from the fixed-policy case. Falls back to
/// alternating best response when `|A|^|S|` exceeds `enumeration_budget`.
pub fn optimal_values_all_formulations(
    scenario: &HlmdpScenario,
    group_belief: &Belief,
    ball: &BallSpec,
    channel: &dyn BeliefChannel,
    enumeration_budget: usize,
) -> Result<OptimalValues> {
    let num_states = scenario.num_states();
    let num_actions = scenario.num_actions();
    let count = (num_actions as f64).powi(num_states as i32);
    if count > enumeration_budget as f64 {
        return best_response_fallback(scenario, group_belief, ball, channel);
    }
    let total = count as usize;

    let mut best: BTreeMap<Formulation, FormulationOptimum> = BTreeMap::new();
    let mut assignment = vec![0usize; num_states];
    for code in 0..total {
        let mut rest = code;
        for slot in assignment.iter_mut() {
            *slot = rest % num_actions;
            rest /= num_actions;
        }
        let policy = Policy::deterministic(&assignment, num_actions);
        let per_mdp = policy_mdp_values(
            scenario,
            &policy,
            group_belief,
            channel,
            DEFAULT_NODE_BUDGET,
        )?;
        for formulation in Formulation::ALL {
            let value = evaluate_formulation_from_payoffs(
                scenario,
                formulation,
                &per_mdp,
                group_belief,
                ball,
            )?;
            match best.get(&formulation) {
                Some(current) if current.value >= value => {}
                _ => {
                    best.insert(
                        formulation,
                        FormulationOptimum {
                            value,
                            policy: policy.clone(),
                        },
                    );
                }
            }
        }
    }
    Ok(OptimalValues {
        per_formulation: best,
        exact: true,
    })
}

/// Alternating best response: improve the policy against the current worst
/// case, then re-solve the worst case, for a bounded number of rounds. The
/// returned values are honest evaluations of feasible policies, without an
/// optimality certificate.
fn best_response_fallback(
    scenario: &HlmdpScenario,
    group_belief: &Belief,
    ball: &BallSpec,
    channel: &dyn BeliefChannel,
) -> Result<OptimalValues> {
    let num_states = scenario.num_states();
    let num_actions = scenario.num_actions();
    let mut best = BTreeMap::new();
    for formulation in Formulation::ALL {
        let mut assignment = vec![0usize; num_states];
        let mut value = f64::NEG_INFINITY;
        for _round in 0..32 {
            let mut improved = false;
            for s in 0..num_states {
                for a in 0..num_actions {
                    let mut candidate = assignment.clone();
                    candidate[s] = a;
                    let policy = Policy::deterministic(&candidate, num_actions);
                    let per_mdp = policy_mdp_values(
                        scenario,
                        &policy,
                        group_belief,
                        channel,
                        DEFAULT_NODE_BUDGET,
                    )?;
                    let v = evaluate_formulation_from_payoffs(
                        scenario,
                        formulation,
                        &per_mdp,
                        group_belief,
                        ball,
                    )?;
                    if v > value + 1e-12 {
                        value = v;
                        assignment = candidate;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best.insert(
            formulation,
            FormulationOptimum {
                value,
                policy: Policy::deterministic(&assignment, num_actions),
            },
        );
    }
    Ok(OptimalValues {
        per_formulation: best,
        exact: false,
    })
}
