//! Hierarchical latent MDP scenarios: a two-level mixture over tabular MDPs.
//!
//! A scenario bundles `M` tabular MDPs sharing state and action spaces, a
//! column-stochastic `M x Z` mixing matrix whose column `z` weights the MDPs
//! within group `z`, and a prior over the `Z` groups. Episodes draw a group
//! from the prior, then an MDP from the group's column, and keep both hidden.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdrError, Result};

/// Tolerance for probability sums on freshly constructed or deserialized data.
pub const PROB_TOL: f64 = 1e-9;
/// Tolerance applied after chains of floating-point arithmetic.
pub const ARITH_TOL: f64 = 1e-7;

/// A single tabular MDP with dense transition and reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// Indexed `transition[s][a][s']`; each row over `s'` is a distribution.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// Indexed `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    pub initial_state_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transition[state][action]
    }

    pub fn reward_at(&self, state: usize, action: usize) -> f64 {
        self.reward[state][action]
    }
}

/// Which simplex a belief lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefLevel {
    /// Distribution over task groups (dimension Z).
    Group,
    /// Distribution over MDPs (dimension M).
    Mdp,
}

/// A point on the probability simplex, tagged with the level it indexes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub weights: Vec<f64>,
    pub level: BeliefLevel,
}

impl Belief {
    pub fn group(weights: Vec<f64>) -> Self {
        Belief {
            weights,
            level: BeliefLevel::Group,
        }
    }

    pub fn mdp(weights: Vec<f64>) -> Self {
        Belief {
            weights,
            level: BeliefLevel::Mdp,
        }
    }

    /// One-hot belief with all mass on `index`.
    pub fn one_hot(len: usize, index: usize, level: BeliefLevel) -> Self {
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Belief { weights, level }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Checks the simplex invariants within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        !self.weights.is_empty()
            && self
                .weights
                .iter()
                .all(|&w| w.is_finite() && (-tol..=1.0 + tol).contains(&w))
            && (self.weights.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// L1 distance to another weight vector.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// A decision rule, either conditioned on (belief, state) through a belief
/// grid or on the state alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Action distributions indexed `[belief_grid_index][state][action]`.
    BeliefStateTable {
        grid: crate::grid::BeliefGrid,
        action_dist: Vec<Vec<Vec<f64>>>,
    },
    /// Action distributions indexed `[state][action]`.
    StationaryStateTable { action_dist: Vec<Vec<f64>> },
}

impl Policy {
    /// Deterministic stationary policy from a state -> action map.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Self {
        let action_dist = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Policy::StationaryStateTable { action_dist }
    }

    /// Action distribution at a (belief, state) pair. Belief-table policies
    /// interpolate their rows barycentrically; stationary ones ignore the belief.
    pub fn action_dist(&self, belief: &Belief, state: usize) -> Vec<f64> {
        match self {
            Policy::StationaryStateTable { action_dist } => action_dist[state].clone(),
            Policy::BeliefStateTable { grid, action_dist } => {
                let pieces = grid.interpolate(&belief.weights);
                let num_actions = action_dist[0][0].len();
                let mut mixed = vec![0.0; num_actions];
                for (idx, w) in pieces {
                    for (a, m) in mixed.iter_mut().enumerate() {
                        *m += w * action_dist[idx][state][a];
                    }
                }
                mixed
            }
        }
    }
}

/// A hierarchical latent MDP scenario: the full world model.
#[derive(Debug, Clone, PartialEq)]
pub struct HlmdpScenario {
    pub num_groups: usize,
    pub num_mdps: usize,
    pub mdps: Vec<TabularMdp>,
    /// Column-stochastic, `mixing[m][z]` = weight of MDP `m` within group `z`.
    pub mixing: Vec<Vec<f64>>,
    /// Prior over groups.
    pub prior: Vec<f64>,
    pub horizon: usize,
    pub discount: f64,
}

impl HlmdpScenario {
    pub fn num_states(&self) -> usize {
        self.mdps[0].num_states
    }

    pub fn num_actions(&self) -> usize {
        self.mdps[0].num_actions
    }

    /// Weight of MDP `m` within group `z`.
    pub fn mixing_weight(&self, mdp: usize, group: usize) -> f64 {
        self.mixing[mdp][group]
    }

    /// Smallest and largest reward entries across all MDPs.
    pub fn reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mdp in &self.mdps {
            for row in &mdp.reward {
                for &r in row {
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        (lo, hi)
    }

    /// Upper bound on |V| for the infinite-horizon discounted criterion.
    pub fn value_bound(&self) -> f64 {
        let (lo, hi) = self.reward_range();
        lo.abs().max(hi.abs()) / (1.0 - self.discount)
    }
}

/// One invariant violation found by [`validate_scenario`], with an index path
/// into the offending field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Everything [`validate_scenario`] found. Violations are data, not faults.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_dist(report: &mut ValidationReport, path: &str, dist: &[f64]) {
    let mut sum = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        if !p.is_finite() {
            report.push(format!("{path}[{i}]"), "entry is not finite");
            return;
        }
        if p < -PROB_TOL {
            report.push(format!("{path}[{i}]"), format!("entry {p} is negative"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        report.push(
            path,
            format!("sums to {sum:.9}, expected 1 within {PROB_TOL:e}"),
        );
    }
}

/// Checks every scenario invariant and reports all violations with index paths.
pub fn validate_scenario(scenario: &HlmdpScenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let z = scenario.num_groups;
    let m = scenario.num_mdps;

    if z == 0 {
        report.push("num_groups", "must be at least 1");
    }
    if m == 0 {
        report.push("num_mdps", "must be at least 1");
    }
    if scenario.mdps.len() != m {
        report.push(
            "mdps",
            format!("expected {m} MDPs, found {}", scenario.mdps.len()),
        );
    }
    if !(scenario.discount > 0.0 && scenario.discount < 1.0) {
        report.push(
            "discount",
            format!("discount not in (0,1): {}", scenario.discount),
        );
    }

    if scenario.mixing.len() != m {
        report.push(
            "mixing",
            format!("expected {m} rows, found {}", scenario.mixing.len()),
        );
    } else {
        for (mi, row) in scenario.mixing.iter().enumerate() {
            if row.len() != z {
                report.push(format!("mixing[{mi}]"), format!("expected {z} columns"));
            }
        }
        if scenario.mixing.iter().all(|r| r.len() == z) {
            for col in 0..z {
                let mut sum = 0.0;
                for (mi, row) in scenario.mixing.iter().enumerate() {
                    let v = row[col];
                    if !v.is_finite() || v < -PROB_TOL {
                        report.push(
                            format!("mixing[{mi}][{col}]"),
                            format!("entry {v} is negative or non-finite"),
                        );
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    report.push(
                        format!("mixing (column {col})"),
                        format!("column {col} sums to {sum:.9}"),
                    );
                }
            }
        }
    }

    if scenario.prior.len() != z {
        report.push(
            "prior",
            format!("expected length {z}, found {}", scenario.prior.len()),
        );
    } else {
        check_dist(&mut report, "prior", &scenario.prior);
    }

    let (s0, a0) = scenario
        .mdps
        .first()
        .map(|mdp| (mdp.num_states, mdp.num_actions))
        .unwrap_or((0, 0));
    for (mi, mdp) in scenario.mdps.iter().enumerate() {
        let path = format!("mdps[{mi}]");
        if mdp.num_states != s0 || mdp.num_actions != a0 {
            report.push(
                &path,
                format!(
                    "state/action counts ({}, {}) differ from mdps[0] ({s0}, {a0})",
                    mdp.num_states, mdp.num_actions
                ),
            );
        }
        if mdp.transition.len() != mdp.num_states {
            report.push(format!("{path}.transition"), "wrong number of state rows");
            continue;
        }
        for (s, per_action) in mdp.transition.iter().enumerate() {
            if per_action.len() != mdp.num_actions {
                report.push(
                    format!("{path}.transition[{s}]"),
                    "wrong number of action rows",
                );
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != mdp.num_states {
                    report.push(
                        format!("{path}.transition[{s}][{a}]"),
                        "wrong number of successor entries",
                    );
                } else {
                    check_dist(&mut report, &format!("{path}.transition[{s}][{a}]"), row);
                }
            }
        }
        if mdp.reward.len() != mdp.num_states
            || mdp.reward.iter().any(|row| row.len() != mdp.num_actions)
        {
            report.push(format!("{path}.reward"), "wrong table shape");
        } else {
            for (s, row) in mdp.reward.iter().enumerate() {
                for (a, &r) in row.iter().enumerate() {
                    if !r.is_finite() {
                        report.push(format!("{path}.reward[{s}][{a}]"), "entry is not finite");
                    }
                }
            }
        }
        if mdp.initial_state_dist.len() != mdp.num_states {
            report.push(format!("{path}.initial_state_dist"), "wrong length");
        } else {
            check_dist(
                &mut report,
                &format!("{path}.initial_state_dist"),
                &mdp.initial_state_dist,
            );
        }
    }

    report
}

fn dirichlet_like(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    // Exponential draws normalized to the simplex, i.e. Dirichlet(1,..,1).
    let mut v: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln().max(1e-12))
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Deterministically generates a valid scenario from a seed. Rewards land in
/// [0, 1]; mixing columns, prior, transition rows and initial distributions
/// are normalized positive draws.
#[allow(clippy::too_many_arguments)]
pub fn generate_random_scenario(
    seed: u64,
    num_groups: usize,
    num_mdps: usize,
    num_states: usize,
    num_actions: usize,
    discount: f64,
    horizon: usize,
) -> Result<HlmdpScenario> {
    if num_groups < 1 {
        return Err(GdrError::InvalidParameter("num_groups must be >= 1".into()));
    }
    if num_mdps < num_groups {
        return Err(GdrError::InvalidParameter(format!(
            "num_mdps ({num_mdps}) must be >= num_groups ({num_groups})"
        )));
    }
    if num_states < 1 || num_actions < 1 {
        return Err(GdrError::InvalidParameter(
            "num_states and num_actions must be >= 1".into(),
        ));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(GdrError::InvalidParameter(format!(
            "discount must lie in (0,1), got {discount}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdps = (0..num_mdps)
        .map(|_| {
            let transition = (0..num_states)
                .map(|_| {
                    (0..num_actions)
                        .map(|_| dirichlet_like(&mut rng, num_states))
                        .collect()
                })
                .collect();
            let reward = (0..num_states)
                .map(|_| (0..num_actions).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let initial_state_dist = dirichlet_like(&mut rng, num_states);
            TabularMdp {
                num_states,
                num_actions,
                transition,
                reward,
                initial_state_dist,
            }
        })
        .collect();

    let columns: Vec<Vec<f64>> = (0..num_groups)
        .map(|_| dirichlet_like(&mut rng, num_mdps))
        .collect();
    let mixing = (0..num_mdps)
        .map(|m| (0..num_groups).map(|z| columns[z][m]).collect())
        .collect();
    let prior = dirichlet_like(&mut rng, num_groups);

    Ok(HlmdpScenario {
        num_groups,
        num_mdps,
        mdps,
        mixing,
        prior,
        horizon,
        discount,
    })
}

/// Maps a group-level belief to the induced MDP-level belief via the mixing
/// matrix (total probability).
pub fn project_belief(scenario: &HlmdpScenario, belief: &Belief) -> Result<Belief> {
    if belief.level != BeliefLevel::Group {
        return Err(GdrError::InvalidParameter(
            "project_belief expects a group-level belief".into(),
        ));
    }
    if belief.len() != scenario.num_groups {
        return Err(GdrError::DimensionMismatch {
            what: "group belief",
            expected: scenario.num_groups,
            got: belief.len(),
        });
    }
    let weights = scenario
        .mixing
        .iter()
        .map(|row| row.iter().zip(&belief.weights).map(|(a, b)| a * b).sum())
        .collect();
    Ok(Belief::mdp(weights))
}

// --- scenario file format ---------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WireMdp {
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    initial_state_dist: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireScenario {
    num_groups: usize,
    num_mdps: usize,
    num_states: usize,
    num_actions: usize,
    discount: f64,
    horizon: usize,
    prior: Vec<f64>,
    mixing: Vec<Vec<f64>>,
    mdps: Vec<WireMdp>,
}

/// Serializes a scenario to the JSON file schema. Round-trips are bit-exact.
pub fn scenario_to_json(scenario: &HlmdpScenario) -> Result<String> {
    let wire = WireScenario {
        num_groups: scenario.num_groups,
        num_mdps: scenario.num_mdps,
        num_states: scenario.num_states(),
        num_actions: scenario.num_actions(),
        discount: scenario.discount,
        horizon: scenario.horizon,
        prior: scenario.prior.clone(),
        mixing: scenario.mixing.clone(),
        mdps: scenario
            .mdps
            .iter()
            .map(|m| WireMdp {
                transition: m.transition.clone(),
                reward: m.reward.clone(),
                initial_state_dist: m.initial_state_dist.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&wire)?)
}

/// Parses the JSON file schema back into a scenario.
pub fn scenario_from_json(text: &str) -> Result<HlmdpScenario> {
    let wire: WireScenario = serde_json::from_str(text)?;
    Ok(HlmdpScenario {
        num_groups: wire.num_groups,
        num_mdps: wire.num_mdps,
        mdps: wire
            .mdps
            .into_iter()
            .map(|m| TabularMdp {
                num_states: wire.num_states,
                num_actions: wire.num_actions,
                transition: m.transition,
                reward: m.reward,
                initial_state_dist: m.initial_state_dist,
            })
            .collect(),
        mixing: wire.mixing,
        prior: wire.prior,
        horizon: wire.horizon,
        discount: wire.discount,
    })
}
