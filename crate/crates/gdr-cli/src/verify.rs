//! The executable property suite behind `gdr verify`: contraction, the value
//! orderings for fixed and optimal policies, projected-set inclusion, the
//! attack against the exact oracle, and filter convergence, all over seeded
//! instances.

use gdr_core::dp::policy_mdp_values;
use gdr_core::{
    fgsm_belief_attack, generate_random_scenario, init_belief, optimal_values_all_formulations,
    project_ball, project_belief, soft_one_hot, update_belief, worst_case_belief_exact,
    AmbiguityBall, AttackConfig, BallSpec, Belief, BeliefGrid, Formulation, Metric,
    PlannerLikelihood, Policy, ValueTable,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct PropertyReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl PropertyReport {
    fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.05).collect();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Inner minimum (or maximum, under the negate-sign test hook) of a linear
/// payoff over a ball.
fn inner_extreme(ball: &AmbiguityBall, payoff: &[f64], negate_sign: bool) -> f64 {
    if negate_sign {
        let flipped: Vec<f64> = payoff.iter().map(|u| -u).collect();
        -worst_case_belief_exact(ball, &flipped).unwrap().1
    } else {
        worst_case_belief_exact(ball, payoff).unwrap().1
    }
}

fn contraction_property(cases: usize, gammas: &[f64]) -> PropertyReport {
    let mut failures = Vec::new();
    let channel = PlannerLikelihood::default();
    for case in 0..cases as u64 {
        let gamma = gammas[case as usize % gammas.len()];
        let scenario = generate_random_scenario(case, 2, 3, 3, 2, gamma, 3).unwrap();
        let ball = BallSpec::new(0.1 + 0.1 * (case % 2) as f64, Metric::SupNorm);
        let grid = BeliefGrid::new(2, 10);
        let bound = 1.0 / (1.0 - gamma);
        let mut rng = ChaCha8Rng::seed_from_u64(case.wrapping_add(500));
        let mut table_u = ValueTable::zeros(grid.clone(), 3, gamma);
        let mut table_v = ValueTable::zeros(grid, 3, gamma);
        for v in table_u.values.iter_mut() {
            *v = rng.gen_range(0.0..bound);
        }
        for v in table_v.values.iter_mut() {
            *v = rng.gen_range(0.0..bound);
        }
        let lu = gdr_core::bellman_operator(&scenario, &ball, &table_u, &channel);
        let lv = gdr_core::bellman_operator(&scenario, &ball, &table_v, &channel);
        let lhs = lu.max_residual(&lv);
        let rhs = gamma * table_u.max_residual(&table_v) + 1e-7;
        if lhs > rhs {
            failures.push(format!(
                "seed {case} gamma {gamma}: |LU-LV| = {lhs} > gamma|U-V| + 1e-7 = {rhs}"
            ));
        }
    }
    PropertyReport {
        name: "contraction",
        cases,
        failures,
    }
}

fn fixed_policy_ordering_property(cases: usize, negate_sign: bool) -> PropertyReport {
    let mut failures = Vec::new();
    let channel = PlannerLikelihood::default();
    let radii = [0.05, 0.1, 0.2];
    for case in 0..cases as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let num_groups = 2 + (case % 2) as usize;
        let num_mdps = num_groups + 1 + (case % 3) as usize;
        let scenario = generate_random_scenario(case, num_groups, num_mdps, 3, 2, 0.9, 3).unwrap();
        let spec = BallSpec::new(radii[(case % 3) as usize], Metric::SupNorm);

        let action_dist = (0..3)
            .map(|_| {
                let mut row: Vec<f64> = (0..2).map(|_| rng.gen::<f64>() + 0.05).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= sum);
                row
            })
            .collect();
        let policy = Policy::StationaryStateTable { action_dist };
        let b0 = Belief::group(random_simplex(&mut rng, num_groups));

        let per_mdp = policy_mdp_values(&scenario, &policy, &b0, &channel, 200_000).unwrap();
        let group_payoff: Vec<f64> = (0..num_groups)
            .map(|z| {
                (0..num_mdps)
                    .map(|m| scenario.mixing[m][z] * per_mdp[m])
                    .sum()
            })
            .collect();
        let gdr = inner_extreme(&spec.centered_at(b0.clone()), &group_payoff, negate_sign);
        let gr = group_payoff.iter().cloned().fold(f64::INFINITY, f64::min);
        let mdp_nominal = project_belief(&scenario, &b0).unwrap();
        let dr = inner_extreme(&spec.centered_at(mdp_nominal), &per_mdp, negate_sign);
        let r = per_mdp.iter().cloned().fold(f64::INFINITY, f64::min);

        if gdr < gr - 1e-9 {
            failures.push(format!("seed {case}: V_GDR = {gdr} < V_GR = {gr}"));
        }
        if gr < r - 1e-9 {
            failures.push(format!("seed {case}: V_GR = {gr} < V_R = {r}"));
        }
        if gdr < dr - 1e-9 {
            failures.push(format!("seed {case}: V_GDR = {gdr} < V_DR = {dr}"));
        }
        if !negate_sign {
            let nominal: f64 = b0
                .weights
                .iter()
                .zip(&group_payoff)
                .map(|(p, u)| p * u)
                .sum();
            if gdr > nominal + 1e-9 {
                failures.push(format!(
                    "seed {case}: adversary helped, V_GDR = {gdr} > nominal = {nominal}"
                ));
            }
        }
    }
    PropertyReport {
        name: "fixed-policy-orderings",
        cases,
        failures,
    }
}

fn optimal_ordering_property(cases: usize) -> PropertyReport {
    let mut failures = Vec::new();
    let channel = PlannerLikelihood::default();
    let ball = BallSpec::new(0.15, Metric::SupNorm);
    for seed in 0..cases as u64 {
        let scenario = generate_random_scenario(seed, 2, 4, 3, 2, 0.9, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
        let b0 = Belief::group(random_simplex(&mut rng, 2));
        let out =
            optimal_values_all_formulations(&scenario, &b0, &ball, &channel, 1_000_000).unwrap();
        let v = |f: Formulation| out.per_formulation[&f].value;
        let (gdr, gr, dr, r) = (
            v(Formulation::Gdr),
            v(Formulation::GroupRobust),
            v(Formulation::DistRobust),
            v(Formulation::Robust),
        );
        if gdr < gr - 1e-6 {
            failures.push(format!("seed {seed}: V*_GDR = {gdr} < V*_GR = {gr}"));
        }
        if gr < r - 1e-6 {
            failures.push(format!("seed {seed}: V*_GR = {gr} < V*_R = {r}"));
        }
        if gdr < dr - 1e-6 {
            failures.push(format!("seed {seed}: V*_GDR = {gdr} < V*_DR = {dr}"));
        }
    }
    PropertyReport {
        name: "optimal-value-orderings",
        cases,
        failures,
    }
}

fn projection_inclusion_property(cases: usize) -> PropertyReport {
    let mut failures = Vec::new();
    for case in 0..cases as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case.wrapping_add(7000));
        let (num_groups, metric) = match case % 4 {
            0 => (2, Metric::SupNorm),
            1 => (2, Metric::TvPositivePart),
            2 => (3, Metric::TvPositivePart),
            _ => (4, Metric::TvPositivePart),
        };
        let num_mdps = num_groups + rng.gen_range(0..=2);
        let scenario = generate_random_scenario(case, num_groups, num_mdps, 2, 2, 0.9, 2).unwrap();
        let nominal = random_simplex(&mut rng, num_groups);
        let radius = 0.02 + rng.gen::<f64>() * 0.25;
        let group_ball =
            AmbiguityBall::new(Belief::group(nominal.clone()), radius, metric).unwrap();
        let projected = project_ball(&scenario, group_ball).unwrap();
        let mdp_nominal = project_belief(&scenario, &Belief::group(nominal)).unwrap();
        let mdp_ball = AmbiguityBall::new(mdp_nominal, radius, metric).unwrap();

        let mut sample_rng = ChaCha8Rng::seed_from_u64(case.wrapping_add(8000));
        for draw in 0..1000 {
            let image = projected.sample(&mut sample_rng);
            if !mdp_ball.contains(&image.weights, 1e-9) {
                failures.push(format!(
                    "seed {case} draw {draw}: projected point escapes the mdp-level ball"
                ));
                break;
            }
        }
        for _ in 0..20 {
            let payoff: Vec<f64> = (0..num_mdps).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, projected_min) = projected.worst_case(&payoff).unwrap();
            let (_, direct_min) = worst_case_belief_exact(&mdp_ball, &payoff).unwrap();
            if projected_min < direct_min - 1e-9 {
                failures.push(format!(
                    "seed {case}: min over projected set {projected_min} < min over mdp ball {direct_min}"
                ));
                break;
            }
        }
    }
    PropertyReport {
        name: "projection-inclusion",
        cases,
        failures,
    }
}

fn attack_vs_oracle_property(cases: usize) -> PropertyReport {
    let mut failures = Vec::new();
    for case in 0..cases as u64 {
        let dim = 2 + (case % 3) as usize;
        let metric = if case % 2 == 0 {
            Metric::SupNorm
        } else {
            Metric::TvPositivePart
        };
        let mut rng = ChaCha8Rng::seed_from_u64(case.wrapping_add(880));
        let nominal = random_simplex(&mut rng, dim);
        let radius = 0.02 + rng.gen::<f64>() * 0.23;
        let ball = AmbiguityBall::new(Belief::group(nominal), radius, metric).unwrap();
        let payoff: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let value_fn = |p: &[f64]| p.iter().zip(&payoff).map(|(x, u)| x * u).sum::<f64>();
        let (_, exact) = worst_case_belief_exact(&ball, &payoff).unwrap();
        let cfg = AttackConfig {
            step_size: 0.05,
            max_steps: 4000,
            seed: case,
        };
        let outcome = fgsm_belief_attack(&ball, &value_fn, &cfg);
        if (outcome.value - exact).abs() > 1e-4 {
            failures.push(format!(
                "seed {case}: |attack {} - oracle {exact}| > 1e-4",
                outcome.value
            ));
        }
        if outcome.trace.iter().any(|p| !ball.contains(p, 1e-9)) {
            failures.push(format!("seed {case}: infeasible attack iterate"));
        }
    }
    PropertyReport {
        name: "attack-vs-oracle",
        cases,
        failures,
    }
}

fn filter_convergence_property(cases: usize) -> PropertyReport {
    let mut failures = Vec::new();
    for case in 0..cases as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case.wrapping_add(3300));
        let num_groups = 2 + (case % 3) as usize;
        let floor = 1.0 / num_groups as f64;
        let sharpness = floor + (1.0 - floor) * (0.3 + 0.6 * rng.gen::<f64>());
        let truth = rng.gen_range(0..num_groups);
        let likelihood = soft_one_hot(truth, num_groups, sharpness);
        let ratio = sharpness * (num_groups as f64 - 1.0) / (1.0 - sharpness);
        let steps = (((num_groups as f64 - 1.0) * 1e6).ln() / ratio.ln()).ceil() as usize;
        let mut belief = init_belief(num_groups).unwrap();
        let mut previous = belief.weights[truth];
        let mut monotone = true;
        for _ in 0..steps {
            belief = update_belief(&belief, &likelihood).unwrap();
            if belief.weights[truth] < previous - 1e-15 {
                monotone = false;
            }
            previous = belief.weights[truth];
        }
        if !monotone {
            failures.push(format!("seed {case}: weight on the true group decreased"));
        }
        if belief.weights[truth] <= 1.0 - 1e-6 {
            failures.push(format!(
                "seed {case}: weight {} below 1 - 1e-6 after {steps} steps",
                belief.weights[truth]
            ));
        }
    }
    PropertyReport {
        name: "filter-convergence",
        cases,
        failures,
    }
}

/// Runs the full suite; returns the per-property reports.
pub fn run_suite(cases: usize, extra_gamma: Option<f64>, negate_sign: bool) -> Vec<PropertyReport> {
    let mut gammas = vec![0.5, 0.9];
    if let Some(gamma) = extra_gamma {
        gammas.push(gamma);
    }
    vec![
        contraction_property(cases.min(50), &gammas),
        fixed_policy_ordering_property(cases, negate_sign),
        optimal_ordering_property(cases),
        projection_inclusion_property(cases),
        attack_vs_oracle_property(cases),
        filter_convergence_property(cases),
    ]
}

/// Prints the pass/fail matrix; returns true iff everything passed.
pub fn print_matrix(reports: &[PropertyReport]) -> bool {
    println!("property,cases,failures,status");
    let mut all_ok = true;
    for report in reports {
        let status = if report.ok() { "pass" } else { "FAIL" };
        println!(
            "{},{},{},{}",
            report.name,
            report.cases,
            report.failures.len(),
            status
        );
        all_ok &= report.ok();
    }
    for report in reports {
        for failure in &report.failures {
            eprintln!("{}: {}", report.name, failure);
        }
    }
    all_ok
}
