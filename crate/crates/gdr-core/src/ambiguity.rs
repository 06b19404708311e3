//! Ambiguity balls on the simplex and their worst-case oracles.
//!
//! Two metrics are supported. `SupNorm` caps every coordinate deviation by the
//! radius; `TvPositivePart` caps the summed positive deviations (the usual
//! total-variation distance between distributions). They coincide on the
//! 2-point simplex and diverge from dimension 3 on.
//!
//! For a linear payoff the worst case over either ball is solved exactly by a
//! greedy mass transport: sort coordinates by payoff and move as much mass as
//! the per-coordinate caps allow from expensive coordinates to cheap ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GdrError, Result};
use crate::lp::standard_form_feasible;
use crate::scenario::{project_belief, Belief, HlmdpScenario};

/// Membership tolerance mirroring the probability tolerance on inputs.
pub const BALL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `max_i |p_i - nominal_i| <= radius`.
    SupNorm,
    /// `sum_i (p_i - nominal_i)_+ <= radius`.
    TvPositivePart,
}

/// Radius and metric without a fixed center; instantiated per belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub xi: f64,
    pub metric: Metric,
}

impl BallSpec {
    pub fn new(xi: f64, metric: Metric) -> Self {
        BallSpec { xi, metric }
    }

    pub fn centered_at(&self, nominal: Belief) -> AmbiguityBall {
        AmbiguityBall {
            nominal,
            radius: self.xi,
            metric: self.metric,
        }
    }
}

/// An ambiguity ball: all simplex points within `radius` of `nominal` under
/// the chosen metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityBall {
    pub nominal: Belief,
    pub radius: f64,
    pub metric: Metric,
}

impl AmbiguityBall {
    pub fn new(nominal: Belief, radius: f64, metric: Metric) -> Result<Self> {
        if !(0.0..=1.0).contains(&radius) {
            return Err(GdrError::InvalidParameter(format!(
                "ball radius must lie in [0, 1], got {radius}"
            )));
        }
        Ok(AmbiguityBall {
            nominal,
            radius,
            metric,
        })
    }

    pub fn dim(&self) -> usize {
        self.nominal.len()
    }

    /// Per-coordinate envelope `[max(0, c - xi), min(1, c + xi)]`. For the
    /// sup-norm ball this is exact; for the TV ball it is a valid outer box.
    pub fn coordinate_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self
            .nominal
            .weights
            .iter()
            .map(|&c| (c - self.radius).max(0.0))
            .collect();
        let hi = self
            .nominal
            .weights
            .iter()
            .map(|&c| (c + self.radius).min(1.0))
            .collect();
        (lo, hi)
    }

    /// Metric distance of `weights` from the nominal center.
    pub fn deviation(&self, weights: &[f64]) -> f64 {
        match self.metric {
            Metric::SupNorm => weights
                .iter()
                .zip(&self.nominal.weights)
                .map(|(p, c)| (p - c).abs())
                .fold(0.0, f64::max),
            Metric::TvPositivePart => weights
                .iter()
                .zip(&self.nominal.weights)
                .map(|(p, c)| (p - c).max(0.0))
                .sum(),
        }
    }

    /// Membership test with tolerance: on the simplex and within the radius.
    pub fn contains(&self, weights: &[f64], tol: f64) -> bool {
        weights.len() == self.dim()
            && weights.iter().all(|&p| (-tol..=1.0 + tol).contains(&p))
            && (weights.iter().sum::<f64>() - 1.0).abs() <= tol
            && self.deviation(weights) <= self.radius + tol
    }

    /// Euclidean projection onto the ball intersected with the simplex, by
    /// Dykstra's alternating projections between the simplex and the metric
    /// cap. Unlike ray scaling this keeps components orthogonal to the active
    /// constraint, which the iterative attack needs to make progress along
    /// the budget boundary.
    fn project_onto(&self, point: &[f64]) -> Vec<f64> {
        let mut u = point.to_vec();
        let n = u.len();
        let mut p_corr = vec![0.0; n];
        let mut q_corr = vec![0.0; n];
        for _ in 0..128 {
            let y = project_simplex(&add(&u, &p_corr));
            for i in 0..n {
                p_corr[i] = u[i] + p_corr[i] - y[i];
            }
            let next = self.project_metric_cap(&add(&y, &q_corr));
            let mut moved = 0.0f64;
            for i in 0..n {
                q_corr[i] = y[i] + q_corr[i] - next[i];
                moved = moved.max((next[i] - u[i]).abs());
            }
            u = next;
            if moved < 1e-14 {
                break;
            }
        }
        // Dykstra converges asymptotically; finish with an exact simplex
        // snap and, if a whisker of budget violation remains, a ray pull-back
        // toward the center (losing O(violation) accuracy at most).
        u = project_simplex(&u);
        if self.deviation(&u) > self.radius {
            let deviation: Vec<f64> = u
                .iter()
                .zip(&self.nominal.weights)
                .map(|(x, c)| x - c)
                .collect();
            u = self.scale_into_ball(&deviation);
        }
        u
    }

    /// Euclidean projection onto the metric cap alone (ignoring the simplex).
    fn project_metric_cap(&self, point: &[f64]) -> Vec<f64> {
        let c = &self.nominal.weights;
        match self.metric {
            Metric::SupNorm => point
                .iter()
                .zip(c)
                .map(|(&p, &ci)| p.clamp(ci - self.radius, ci + self.radius))
                .collect(),
            Metric::TvPositivePart => {
                let deviation: Vec<f64> = point.iter().zip(c).map(|(&p, &ci)| p - ci).collect();
                let mut positive: Vec<f64> =
                    deviation.iter().cloned().filter(|&d| d > 0.0).collect();
                let total: f64 = positive.iter().sum();
                if total <= self.radius {
                    return point.to_vec();
                }
                // Threshold tau so that sum(max(d - tau, 0)) = radius.
                positive.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let mut cumulative = 0.0;
                let mut tau = 0.0;
                for (k, &d) in positive.iter().enumerate() {
                    cumulative += d;
                    let candidate = (cumulative - self.radius) / (k as f64 + 1.0);
                    let next = positive.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
                    if candidate >= next {
                        tau = candidate;
                        break;
                    }
                }
                deviation
                    .iter()
                    .zip(c)
                    .map(|(&d, &ci)| {
                        if d > 0.0 {
                            ci + (d - tau).max(0.0)
                        } else {
                            ci + d
                        }
                    })
                    .collect()
            }
        }
    }

    /// Pulls an arbitrary deviation vector back into the ball along its ray
    /// from the nominal center. `deviation` must sum to zero.
    fn scale_into_ball(&self, deviation: &[f64]) -> Vec<f64> {
        let c = &self.nominal.weights;
        let mut t: f64 = 1.0;
        match self.metric {
            Metric::SupNorm => {
                for &d in deviation {
                    if d.abs() > self.radius {
                        t = t.min(self.radius / d.abs());
                    }
                }
            }
            Metric::TvPositivePart => {
                let tv: f64 = deviation.iter().map(|&d| d.max(0.0)).sum();
                if tv > self.radius {
                    t = t.min(self.radius / tv);
                }
            }
        }
        for (i, &d) in deviation.iter().enumerate() {
            if d < -c[i] {
                t = t.min(c[i] / -d);
            }
            if d > 1.0 - c[i] {
                t = t.min((1.0 - c[i]) / d);
            }
        }
        t = t.clamp(0.0, 1.0);
        c.iter()
            .zip(deviation)
            .map(|(&ci, &d)| ci + t * d)
            .collect()
    }
}

/// Exact minimizer of a linear payoff over the ball.
///
/// Returns the minimizing belief and the attained value. Sup-norm: start every
/// coordinate at its lower cap and fill the remaining mass into coordinates in
/// ascending payoff order. TV: move up to `radius` of mass from the most
/// expensive coordinates onto the cheapest one.
pub fn worst_case_belief_exact(ball: &AmbiguityBall, payoff: &[f64]) -> Result<(Belief, f64)> {
    let n = ball.dim();
    if payoff.len() != n {
        return Err(GdrError::DimensionMismatch {
            what: "payoff vector",
            expected: n,
            got: payoff.len(),
        });
    }
    if payoff.iter().any(|u| !u.is_finite()) {
        return Err(GdrError::InvalidParameter(
            "payoff entries must be finite".into(),
        ));
    }

    let nominal_value: f64 = ball
        .nominal
        .weights
        .iter()
        .zip(payoff)
        .map(|(p, u)| p * u)
        .sum();

    let spread = payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - payoff.iter().cloned().fold(f64::INFINITY, f64::min);
    if ball.radius <= 0.0 || spread <= 0.0 || n == 1 {
        // Constant payoffs and zero-radius balls: the nominal point is optimal.
        return Ok((ball.nominal.clone(), nominal_value));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| payoff[a].partial_cmp(&payoff[b]).unwrap().then(a.cmp(&b)));

    let weights = match ball.metric {
        Metric::SupNorm => {
            let (lo, hi) = ball.coordinate_bounds();
            let mut p = lo.clone();
            let mut budget = 1.0 - lo.iter().sum::<f64>();
            for &i in &order {
                let add = (hi[i] - lo[i]).min(budget);
                p[i] += add;
                budget -= add;
                if budget <= 0.0 {
                    break;
                }
            }
            debug_assert!(budget.abs() < 1e-9, "unallocated mass {budget}");
            p
        }
        Metric::TvPositivePart => {
            let mut p = ball.nominal.weights.clone();
            let receiver = order[0];
            let mut budget = ball.radius;
            for &i in order.iter().rev() {
                if i == receiver || payoff[i] <= payoff[receiver] {
                    continue;
                }
                let take = p[i].min(budget);
                p[i] -= take;
                p[receiver] += take;
                budget -= take;
                if budget <= 0.0 {
                    break;
                }
            }
            p
        }
    };

    let value = weights.iter().zip(payoff).map(|(p, u)| p * u).sum();
    Ok((
        Belief {
            weights,
            level: ball.nominal.level,
        },
        value,
    ))
}

/// The image of a group-level ambiguity ball under the mixing matrix: the set
/// `{ A p : p in ball }` of reachable MDP-level beliefs.
pub struct ProjectedBall<'a> {
    scenario: &'a HlmdpScenario,
    ball: AmbiguityBall,
}

/// Builds the projected-set view for a group-level ball.
pub fn project_ball<'a>(
    scenario: &'a HlmdpScenario,
    ball: AmbiguityBall,
) -> Result<ProjectedBall<'a>> {
    if ball.dim() != scenario.num_groups {
        return Err(GdrError::DimensionMismatch {
            what: "group ball nominal",
            expected: scenario.num_groups,
            got: ball.dim(),
        });
    }
    Ok(ProjectedBall { scenario, ball })
}

impl ProjectedBall<'_> {
    pub fn group_ball(&self) -> &AmbiguityBall {
        &self.ball
    }

    /// Draws a member of the projected set: a random deviation is ray-scaled
    /// into the group ball and pushed through the mixing matrix.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Belief {
        let n = self.ball.dim();
        let mut deviation: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-self.ball.radius..=self.ball.radius))
            .collect();
        let mean = deviation.iter().sum::<f64>() / n as f64;
        for d in &mut deviation {
            *d -= mean;
        }
        let member = Belief::group(self.ball.scale_into_ball(&deviation));
        project_belief(self.scenario, &member).expect("sampled member has group dimension")
    }

    /// Exact membership: is `point` the image of some group-ball member?
    /// Answered by a small feasibility linear program.
    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.scenario.num_mdps {
            return false;
        }
        let z = self.scenario.num_groups;
        let m = self.scenario.num_mdps;
        let c = &self.ball.nominal.weights;
        let xi = self.ball.radius + tol;
        let mixing = &self.scenario.mixing;

        match self.ball.metric {
            Metric::SupNorm => {
                // Variables y = p - lo in [0, hi - lo], plus one slack per box
                // row: A(y + lo) = q, sum(y + lo) = 1, y_i + s_i = hi_i - lo_i.
                let (lo, hi): (Vec<f64>, Vec<f64>) = (
                    c.iter().map(|&ci| (ci - xi).max(0.0)).collect(),
                    c.iter().map(|&ci| (ci + xi).min(1.0)).collect(),
                );
                let n_vars = 2 * z;
                let mut a = Vec::with_capacity(m + 1 + z);
                let mut b = Vec::with_capacity(m + 1 + z);
                for mi in 0..m {
                    let mut row = vec![0.0; n_vars];
                    let mut shift = 0.0;
                    for zi in 0..z {
                        row[zi] = mixing[mi][zi];
                        shift += mixing[mi][zi] * lo[zi];
                    }
                    a.push(row);
                    b.push(point[mi] - shift);
                }
                let mut row = vec![0.0; n_vars];
                for zi in 0..z {
                    row[zi] = 1.0;
                }
                a.push(row);
                b.push(1.0 - lo.iter().sum::<f64>());
                for zi in 0..z {
                    let mut row = vec![0.0; n_vars];
                    row[zi] = 1.0;
                    row[z + zi] = 1.0;
                    a.push(row);
                    b.push(hi[zi] - lo[zi]);
                }
                standard_form_feasible(&a, &b)
            }
            Metric::TvPositivePart => {
                // Variables [p (z) | t (z) | u (z) | v (1)]:
                //   A p = q;  sum p = 1;  p_i - t_i + u_i = c_i;  sum t + v = xi.
                let n_vars = 3 * z + 1;
                let mut a = Vec::with_capacity(m + 2 + z);
                let mut b = Vec::with_capacity(m + 2 + z);
                for mi in 0..m {
                    let mut row = vec![0.0; n_vars];
                    row[..z].copy_from_slice(&mixing[mi][..z]);
                    a.push(row);
                    b.push(point[mi]);
                }
                let mut row = vec![0.0; n_vars];
                for zi in 0..z {
                    row[zi] = 1.0;
                }
                a.push(row);
                b.push(1.0);
                for zi in 0..z {
                    let mut row = vec![0.0; n_vars];
                    row[zi] = 1.0;
                    row[z + zi] = -1.0;
                    row[2 * z + zi] = 1.0;
                    a.push(row);
                    b.push(c[zi]);
                }
                let mut row = vec![0.0; n_vars];
                for zi in 0..z {
                    row[z + zi] = 1.0;
                }
                row[3 * z] = 1.0;
                a.push(row);
                b.push(xi);
                standard_form_feasible(&a, &b)
            }
        }
    }

    /// Exact worst case of a linear MDP-level payoff over the projected set.
    ///
    /// `min over q = A p of <q, u>` equals the group-ball oracle applied to the
    /// pulled-back payoff `A^T u`, so no search over the image is needed.
    pub fn worst_case(&self, mdp_payoff: &[f64]) -> Result<(Belief, f64)> {
        if mdp_payoff.len() != self.scenario.num_mdps {
            return Err(GdrError::DimensionMismatch {
                what: "mdp payoff",
                expected: self.scenario.num_mdps,
                got: mdp_payoff.len(),
            });
        }
        let pulled: Vec<f64> = (0..self.scenario.num_groups)
            .map(|z| {
                (0..self.scenario.num_mdps)
                    .map(|m| self.scenario.mixing[m][z] * mdp_payoff[m])
                    .sum()
            })
            .collect();
        worst_case_belief_exact(&self.ball, &pulled)
    }
}

/// Iterative signed-gradient attack configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Base perturbation step size.
    #[serde(rename = "alpha")]
    pub step_size: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(step_size: f64, max_steps: usize, seed: u64) -> Result<Self> {
        if !(step_size > 0.0) {
            return Err(GdrError::InvalidParameter(format!(
                "attack step size must be positive, got {step_size}"
            )));
        }
        if max_steps == 0 {
            return Err(GdrError::InvalidParameter(
                "attack needs at least one step".into(),
            ));
        }
        Ok(AttackConfig {
            step_size,
            max_steps,
            seed,
        })
    }
}

/// Result of [`fgsm_belief_attack`]: the best ball member found, its value,
/// and every post-projection iterate (each a ball member).
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub belief: Belief,
    pub value: f64,
    pub trace: Vec<Vec<f64>>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Euclidean projection onto the probability simplex (threshold algorithm).
fn project_simplex(point: &[f64]) -> Vec<f64> {
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (k as f64 + 1.0);
        let next = sorted.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if candidate >= next {
            tau = candidate;
            break;
        }
    }
    point.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Iterative stochastic signed-gradient descent of `value_fn` over the ball.
///
/// Each step draws a compensating coordinate `i`, moves every other coordinate
/// against its finite-difference gradient sign, gives `i` the negated sum of
/// the applied increments so the point stays on the simplex, and projects back
/// into the ball (clip-and-redistribute for sup-norm, ray scaling for TV; the
/// step shrinks when the compensator cannot absorb the residual). Two
/// stabilizations on top of the raw update make the walk converge instead of
/// hovering at step-size resolution: the iterate resets to the best point
/// found every few steps, and the step size decays geometrically over the
/// final two thirds of the run. The returned member never values worse than
/// the nominal center.
pub fn fgsm_belief_attack(
    ball: &AmbiguityBall,
    value_fn: &dyn Fn(&[f64]) -> f64,
    cfg: &AttackConfig,
) -> AttackOutcome {
    let n = ball.dim();
    let nominal = ball.nominal.weights.clone();
    let nominal_value = value_fn(&nominal);
    let mut best = (nominal.clone(), nominal_value);
    let mut trace = vec![nominal.clone()];

    if ball.radius <= 0.0 || n == 1 {
        return AttackOutcome {
            belief: ball.nominal.clone(),
            value: nominal_value,
            trace,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = ball.coordinate_bounds();
    let mut p = nominal.clone();
    let warm = cfg.max_steps * 2 / 3;
    let fd_step = 1e-5;
    let restart_period = 50;

    for k in 0..cfg.max_steps {
        if k > 0 && k % restart_period == 0 {
            p = best.0.clone();
        }
        let alpha = if k <= warm || cfg.max_steps == warm {
            cfg.step_size
        } else {
            let progress = (k - warm) as f64 / (cfg.max_steps - warm) as f64;
            cfg.step_size * 1e-4f64.powf(progress)
        };
        let comp = rng.gen_range(0..n);

        let mut signs = vec![0.0; n];
        for (j, s) in signs.iter_mut().enumerate() {
            if j == comp {
                continue;
            }
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += fd_step;
            minus[j] -= fd_step;
            *s = sign((value_fn(&plus) - value_fn(&minus)) / (2.0 * fd_step));
        }

        let mut accepted: Option<Vec<f64>> = None;
        let mut scale = 1.0;
        for _ in 0..24 {
            let step = alpha * scale;
            let mut q = vec![0.0; n];
            match ball.metric {
                Metric::SupNorm => {
                    let mut others = 0.0;
                    for j in 0..n {
                        if j != comp {
                            q[j] = (p[j] - step * signs[j]).clamp(lo[j], hi[j]);
                            others += q[j];
                        }
                    }
                    q[comp] = 1.0 - others;
                    if q[comp] >= lo[comp] - 1e-12 && q[comp] <= hi[comp] + 1e-12 {
                        q[comp] = q[comp].clamp(lo[comp], hi[comp]);
                        accepted = Some(q);
                        break;
                    }
                }
                Metric::TvPositivePart => {
                    let mut others = 0.0;
                    for j in 0..n {
                        if j != comp {
                            q[j] = p[j] - step * signs[j];
                            others += q[j];
                        }
                    }
                    q[comp] = 1.0 - others;
                    accepted = Some(ball.project_onto(&q));
                    break;
                }
            }
            scale *= 0.5;
        }

        if let Some(q) = accepted {
            debug_assert!(ball.contains(&q, BALL_TOL));
            let value = value_fn(&q);
            if value < best.1 {
                best = (q.clone(), value);
            }
            trace.push(q.clone());
            p = q;
        } else {
            trace.push(p.clone());
        }
    }

    AttackOutcome {
        belief: Belief {
            weights: best.0,
            level: ball.nominal.level,
        },
        value: best.1,
        trace,
    }
}
