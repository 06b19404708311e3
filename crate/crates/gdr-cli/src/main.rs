//! Batch command-line front end: scenario generation and I/O, robust
//! planning, the bandit table, the property-verification suite, tabular
//! robust training, and the belief-noise robustness sweep.
//!
//! Exit codes: 0 success, 2 solver hit its iteration cap, 3 training
//! diverged, 64 malformed configuration or arguments.

mod config;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gdr_core::{
    baseline_config, belief_error_profile, brute_force_tolerance, canonical_bandit,
    evaluate_robustness, generate_random_scenario, scenario_from_json, scenario_to_json,
    solve_bandit, solve_bandit_brute_force, train, validate_scenario, BallSpec, Baseline,
    BeliefFeed, BeliefGrid, Formulation, GdrError, HlmdpScenario, LikelihoodModel, LinearSchedule,
    Metric, PlannerLikelihood, QTable, TdTargetMode, TrainConfig,
};

use config::{resolve_out_dir, resolve_seed, FileConfig};
use output::{
    fmt, grid_sidecar, iteration_rows, policy_rows, qtable_rows, value_table_rows, write_csv,
};

const EXIT_OK: i32 = 0;
const EXIT_NO_CONVERGENCE: i32 = 2;
const EXIT_DIVERGENCE: i32 = 3;
const EXIT_CONFIG: i32 = 64;

#[derive(Parser)]
#[command(
    name = "gdr",
    about = "Group distributionally robust MDP toolkit",
    version
)]
struct Cli {
    /// Directory for all output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed (overrides GDR_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config JSON; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    SupNorm,
    TvPositivePart,
}

impl From<MetricArg> for Metric {
    fn from(value: MetricArg) -> Metric {
        match value {
            MetricArg::SupNorm => Metric::SupNorm,
            MetricArg::TvPositivePart => Metric::TvPositivePart,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LikelihoodArg {
    Uninformative,
    BeliefMixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Gdr,
    GExact,
    NoBelief,
    GBelief,
    DrProjected,
    StateRobust,
}

impl From<BaselineArg> for Baseline {
    fn from(value: BaselineArg) -> Baseline {
        match value {
            BaselineArg::Gdr => Baseline::Gdr,
            BaselineArg::GExact => Baseline::GExact,
            BaselineArg::NoBelief => Baseline::NoBelief,
            BaselineArg::GBelief => Baseline::GBelief,
            BaselineArg::DrProjected => Baseline::DrProjected,
            BaselineArg::StateRobust => Baseline::StateRobust,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario file (or the worked bandit instance).
    Gen(GenArgs),
    /// Robust value iteration: value table, greedy policy, iteration log.
    Solve(SolveArgs),
    /// The four-formulation bandit table with a brute-force cross-check.
    Bandit(BanditArgs),
    /// Run the seeded property suite and print the pass/fail matrix.
    Verify(VerifyArgs),
    /// Tabular robust training; writes the episode log and the Q table.
    Train(TrainArgs),
    /// Robustness sweep over belief-noise levels for a trained Q table.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    groups: usize,
    #[arg(long, default_value_t = 4)]
    mdps: usize,
    #[arg(long, default_value_t = 3)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    horizon: usize,
    /// Write the worked two-group bandit as a one-step scenario instead.
    #[arg(long)]
    bandit: bool,
    /// Output file name (under --out-dir).
    #[arg(long, default_value = "scenario.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Belief-grid resolution (default 50 for two groups, 20 for more).
    #[arg(long)]
    grid_k: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "belief-mixture")]
    likelihood: LikelihoodArg,
    #[arg(long, default_value_t = 0.9)]
    sharpness: f64,
    /// Record wall-clock times in the iteration log (breaks byte-for-byte
    /// reproducibility across runs).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct BanditArgs {
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[arg(long, default_value_t = 1001)]
    p_grid: usize,
    #[arg(long, default_value_t = 1001)]
    eps_grid: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seeded cases per property.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    /// Additional discount factor for the contraction check.
    #[arg(long)]
    gamma: Option<f64>,
    /// Test hook: flip the adversary to ascent and watch the orderings fail.
    #[arg(long)]
    negate_sign: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[arg(long)]
    pretrain: Option<usize>,
    #[arg(long)]
    grid_k: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long, value_enum, default_value = "gdr")]
    baseline: BaselineArg,
    /// Inner minimization of the TD target.
    #[arg(long, value_enum, default_value = "exact")]
    target: TargetArg,
    /// Sweep specification `xi=0.01,0.05,0.1`; one log/table pair per value.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Exact,
    Fgsm,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Q table CSV produced by `train` (grid sidecar expected next to it).
    #[arg(long)]
    qtable: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 0.8, 0.6, 0.4])]
    noise_levels: Vec<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Also write the per-step belief error profile.
    #[arg(long)]
    belief_error: bool,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            err.print().ok();
            std::process::exit(code);
        }
    };
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .ok();
    }
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify_error(&err)
        }
    };
    std::process::exit(code);
}

fn classify_error(err: &anyhow::Error) -> i32 {
    if let Some(gdr) = err.downcast_ref::<GdrError>() {
        if matches!(gdr, GdrError::TrainingDiverged { .. }) {
            return EXIT_DIVERGENCE;
        }
    }
    EXIT_CONFIG
}

fn run(cli: Cli) -> Result<i32> {
    let file_config = FileConfig::load(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &file_config)?;
    let out_dir = resolve_out_dir(cli.out_dir, &file_config);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    match cli.command {
        Command::Gen(args) => cmd_gen(&args, seed, &out_dir),
        Command::Solve(args) => cmd_solve(&args, &file_config, &out_dir),
        Command::Bandit(args) => cmd_bandit(&args, &file_config),
        Command::Verify(args) => cmd_verify(&args),
        Command::Train(args) => cmd_train(&args, &file_config, seed, &out_dir),
        Command::Eval(args) => cmd_eval(&args, &file_config, seed, &out_dir),
    }
}

fn load_scenario(
    flag: &Option<PathBuf>,
    config: &FileConfig,
    out_dir: Option<&Path>,
) -> Result<HlmdpScenario> {
    let path: PathBuf = match (flag, &config.scenario) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) => PathBuf::from(path),
        (None, None) => bail!("no scenario given: pass --scenario or set it in the config"),
    };
    // Paths are tried as given, then relative to the output directory.
    let resolved = if path.exists() {
        path
    } else if let Some(dir) = out_dir {
        let candidate = dir.join(&path);
        if candidate.exists() {
            candidate
        } else {
            bail!("scenario file not found: {}", path.display());
        }
    } else {
        bail!("scenario file not found: {}", path.display());
    };
    let text = std::fs::read_to_string(&resolved)
        .with_context(|| format!("cannot read scenario {}", resolved.display()))?;
    let scenario = scenario_from_json(&text)
        .with_context(|| format!("malformed scenario {}", resolved.display()))?;
    let report = validate_scenario(&scenario);
    if !report.ok() {
        let details: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.path, v.message))
            .collect();
        bail!(
            "scenario {} violates invariants:\n  {}",
            resolved.display(),
            details.join("\n  ")
        );
    }
    Ok(scenario)
}

fn cmd_gen(args: &GenArgs, seed: u64, out_dir: &Path) -> Result<i32> {
    let scenario = if args.bandit {
        canonical_bandit().to_scenario(args.gamma)
    } else {
        generate_random_scenario(
            seed,
            args.groups,
            args.mdps,
            args.states,
            args.actions,
            args.gamma,
            args.horizon,
        )?
    };
    let path = out_dir.join(&args.out);
    std::fs::write(&path, scenario_to_json(&scenario)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_solve(args: &SolveArgs, config: &FileConfig, out_dir: &Path) -> Result<i32> {
    let scenario = load_scenario(&args.scenario, config, Some(out_dir))?;
    let mut ball = config.ball_spec(0.1);
    if let Some(xi) = args.xi {
        ball.xi = xi;
    }
    if let Some(metric) = args.metric {
        ball.metric = metric.into();
    }
    let grid_k = args
        .grid_k
        .or(config.grid.map(|g| g.resolution))
        .unwrap_or(if scenario.num_groups <= 2 { 50 } else { 20 });
    let channel = match args.likelihood {
        LikelihoodArg::Uninformative => PlannerLikelihood::Uninformative,
        LikelihoodArg::BeliefMixture => PlannerLikelihood::BeliefMixture {
            sharpness: args.sharpness,
        },
    };

    let grid = BeliefGrid::new(scenario.num_groups, grid_k);
    let started = Instant::now();
    let outcome =
        gdr_core::value_iteration(&scenario, &ball, grid, &channel, args.tol, args.max_iters)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let warning = if outcome.converged {
        None
    } else {
        let residual = outcome.log.last().map(|s| s.residual).unwrap_or(f64::NAN);
        Some(format!(
            "max_iters {} reached; final residual {residual}",
            args.max_iters
        ))
    };
    // Per-sweep timings are only attributed when requested; a zero column
    // keeps reruns byte-identical.
    let wall: Vec<f64> = if args.timings {
        let per = elapsed_ms / outcome.log.len().max(1) as f64;
        outcome.log.iter().map(|_| per).collect()
    } else {
        vec![0.0; outcome.log.len()]
    };

    write_csv(
        &out_dir.join("value_table.csv"),
        &["belief_index", "state", "value"],
        &value_table_rows(&outcome.table, warning.as_deref()),
    )?;
    write_csv(
        &out_dir.join("policy.csv"),
        &["belief_index", "state", "action"],
        &policy_rows(&outcome.policy, warning.as_deref()),
    )?;
    write_csv(
        &out_dir.join("iterations.csv"),
        &["iter", "residual", "wall_ms"],
        &iteration_rows(&outcome.log, &wall, warning.as_deref()),
    )?;
    grid_sidecar(&out_dir.join("grid.json"), &outcome.table.grid)?;

    if let Some(message) = &warning {
        eprintln!("warning: {message}");
        return Ok(EXIT_NO_CONVERGENCE);
    }
    println!(
        "converged in {} sweeps (residual {})",
        outcome.log.len(),
        fmt(outcome.log.last().map(|s| s.residual).unwrap_or(0.0))
    );
    Ok(EXIT_OK)
}

fn cmd_bandit(args: &BanditArgs, config: &FileConfig) -> Result<i32> {
    let mut bandit = canonical_bandit();
    let ball = config.ball_spec(bandit.radius);
    bandit.radius = args.xi.unwrap_or(ball.xi);
    let metric = args.metric.map(Metric::from).unwrap_or(ball.metric);

    println!("formulation,optimal_policy,value");
    let mut agree = true;
    for formulation in Formulation::ALL {
        let exact = solve_bandit(&bandit, formulation, metric)?;
        println!(
            "{},{},{}",
            formulation,
            exact.policy_label(),
            fmt(exact.value)
        );
        let brute = solve_bandit_brute_force(&bandit, formulation, args.p_grid, args.eps_grid)?;
        let tolerance = brute_force_tolerance(&bandit, args.p_grid);
        let delta = (exact.value - brute.value).abs();
        eprintln!(
            "{formulation}: brute-force value {} (|delta| {} within tolerance {})",
            fmt(brute.value),
            fmt(delta),
            fmt(tolerance)
        );
        agree &= delta <= tolerance;
    }
    Ok(if agree { EXIT_OK } else { 1 })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let reports = verify::run_suite(args.cases, args.gamma, args.negate_sign);
    let all_ok = verify::print_matrix(&reports);
    Ok(if all_ok { EXIT_OK } else { 1 })
}

fn build_train_config(
    args: &TrainArgs,
    config: &FileConfig,
    seed: u64,
    xi: f64,
) -> Result<TrainConfig> {
    let block = config.train.unwrap_or_default();
    let episodes = args.episodes.or(block.episodes).unwrap_or(2000);
    let metric = args
        .metric
        .map(Metric::from)
        .unwrap_or(config.ball_spec(xi).metric);
    let mut cfg = TrainConfig::new(episodes, BallSpec::new(xi, metric), seed);
    if let Some(pretrain) = args.pretrain.or(block.pretrain_episodes) {
        cfg.pretrain_episodes = pretrain;
    }
    if let Some(k) = args.grid_k.or(block.grid_resolution) {
        cfg.grid_resolution = k;
    }
    if let Some(batch) = args.batch.or(block.batch_size) {
        cfg.batch_size = batch;
    }
    if let Some(capacity) = args.capacity.or(block.replay_capacity) {
        cfg.replay_capacity = capacity;
    }
    cfg.learning_rate = LinearSchedule {
        start: block.lr_start.unwrap_or(cfg.learning_rate.start),
        end: block.lr_end.unwrap_or(cfg.learning_rate.end),
        fraction: 1.0,
    };
    cfg.epsilon = LinearSchedule {
        start: block.eps_start.unwrap_or(cfg.epsilon.start),
        end: block.eps_end.unwrap_or(cfg.epsilon.end),
        fraction: 0.5,
    };
    if let Some(model) = config.likelihood {
        cfg.likelihood = model;
    }
    cfg.attack = config.attack_config(seed);
    cfg.target_mode = match args.target {
        TargetArg::Exact => TdTargetMode::ExactOracle,
        TargetArg::Fgsm => TdTargetMode::FgsmAttack,
    };
    baseline_config(&cfg, args.baseline.into()).map_err(|e| anyhow!(e))
}

fn run_one_training(
    scenario: &HlmdpScenario,
    cfg: &TrainConfig,
    out_dir: &Path,
    suffix: &str,
) -> Result<()> {
    let outcome = train(scenario, cfg).map_err(anyhow::Error::from)?;
    let rows: Vec<Vec<String>> = outcome
        .log
        .iter()
        .map(|stat| {
            vec![
                stat.episode.to_string(),
                fmt(stat.episode_return),
                fmt(stat.td_residual),
                fmt(stat.epsilon),
                stat.phase.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join(format!("training_log{suffix}.csv")),
        &["episode", "return", "td_residual", "epsilon", "phase"],
        &rows,
    )?;
    write_csv(
        &out_dir.join(format!("qtable{suffix}.csv")),
        &["belief_index", "state", "action", "value"],
        &qtable_rows(&outcome.q),
    )?;
    grid_sidecar(
        &out_dir.join(format!("qtable{suffix}_grid.json")),
        &outcome.q.grid,
    )?;
    Ok(())
}

fn cmd_train(args: &TrainArgs, config: &FileConfig, seed: u64, out_dir: &Path) -> Result<i32> {
    let scenario = load_scenario(&args.scenario, config, Some(out_dir))?;
    let default_xi = args.xi.unwrap_or(config.ball_spec(0.15).xi);

    let sweep_values: Vec<f64> = match &args.sweep {
        Some(spec) => {
            let rest = spec
                .strip_prefix("xi=")
                .ok_or_else(|| anyhow!("sweep spec must look like xi=0.01,0.05, got {spec:?}"))?;
            rest.split(',')
                .map(|piece| {
                    piece
                        .trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad sweep value {piece:?}"))
                })
                .collect::<Result<Vec<f64>>>()?
        }
        None => vec![default_xi],
    };

    for &xi in &sweep_values {
        let cfg = build_train_config(args, config, seed, xi)?;
        let suffix = if args.sweep.is_some() {
            format!("_xi{xi}")
        } else {
            String::new()
        };
        run_one_training(&scenario, &cfg, out_dir, &suffix)
            .map_err(|err| err.context(format!("training run at xi = {xi} failed")))?;
        println!("trained xi={xi} -> training_log{suffix}.csv, qtable{suffix}.csv");
    }
    Ok(EXIT_OK)
}

fn load_qtable(path: &Path, out_dir: &Path) -> Result<QTable> {
    let resolved = if path.exists() {
        path.to_path_buf()
    } else {
        let candidate = out_dir.join(path);
        if !candidate.exists() {
            bail!("q table file not found: {}", path.display());
        }
        candidate
    };
    let sidecar = resolved.with_file_name(format!(
        "{}_grid.json",
        resolved
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("q table path has no file name"))?
    ));
    let grid_text = std::fs::read_to_string(&sidecar)
        .with_context(|| format!("cannot read grid sidecar {}", sidecar.display()))?;
    let sidecar_json: serde_json::Value = serde_json::from_str(&grid_text)?;
    let resolution = sidecar_json["resolution"]
        .as_u64()
        .ok_or_else(|| anyhow!("grid sidecar missing resolution"))? as usize;
    let dim = sidecar_json["dim"]
        .as_u64()
        .ok_or_else(|| anyhow!("grid sidecar missing dim"))? as usize;
    let grid = BeliefGrid::new(dim, resolution);

    let mut reader = csv::Reader::from_path(&resolved)
        .with_context(|| format!("cannot read q table {}", resolved.display()))?;
    let mut entries = Vec::new();
    let mut num_states = 0usize;
    let mut num_actions = 0usize;
    for record in reader.records() {
        let record = record?;
        let bi: usize = record[0].parse()?;
        let s: usize = record[1].parse()?;
        let a: usize = record[2].parse()?;
        let v: f64 = record[3].parse()?;
        num_states = num_states.max(s + 1);
        num_actions = num_actions.max(a + 1);
        entries.push((bi, s, a, v));
    }
    if entries.is_empty() {
        bail!("q table {} has no rows", resolved.display());
    }
    let mut q = QTable::zeros(grid, num_states, num_actions);
    for (bi, s, a, v) in entries {
        let idx = (bi * num_states + s) * num_actions + a;
        q.q[idx] = v;
    }
    Ok(q)
}

fn cmd_eval(args: &EvalArgs, config: &FileConfig, seed: u64, out_dir: &Path) -> Result<i32> {
    let scenario = load_scenario(&args.scenario, config, Some(out_dir))?;
    let q = load_qtable(&args.qtable, out_dir)?;
    let feed = if q.grid.dim == scenario.num_groups {
        BeliefFeed::Filtered
    } else if q.grid.dim == scenario.num_mdps {
        BeliefFeed::ProjectedMdp
    } else {
        bail!(
            "q table belief dimension {} matches neither the group count {} nor the MDP count {}",
            q.grid.dim,
            scenario.num_groups,
            scenario.num_mdps
        );
    };
    let eval_block = config.eval.clone().unwrap_or_default();
    let noise_levels = if args.noise_levels.is_empty() {
        eval_block
            .noise_levels
            .unwrap_or_else(|| vec![1.0, 0.8, 0.6, 0.4])
    } else {
        args.noise_levels.clone()
    };
    let episodes = args.episodes.or(eval_block.episodes).unwrap_or(200);
    let model = config
        .likelihood
        .unwrap_or(LikelihoodModel::new(0.9, 1.0, 1.0));

    let rows = evaluate_robustness(&scenario, &q, &model, feed, &noise_levels, episodes, seed)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.noise_level),
                fmt(r.mean_return),
                fmt(r.std_err),
                r.episodes.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("robustness.csv"),
        &["noise_level", "mean_return", "std_err", "episodes"],
        &csv_rows,
    )?;
    println!(
        "wrote robustness.csv ({} levels x {episodes} episodes)",
        rows.len()
    );

    if args.belief_error {
        let profile = belief_error_profile(&scenario, &model, &noise_levels, episodes, seed)?;
        let profile_rows: Vec<Vec<String>> = profile
            .iter()
            .map(|r| vec![fmt(r.noise_level), r.step.to_string(), fmt(r.mean_l1_error)])
            .collect();
        write_csv(
            &out_dir.join("belief_error.csv"),
            &["noise_level", "step", "mean_l1_error"],
            &profile_rows,
        )?;
        println!("wrote belief_error.csv");
    }
    Ok(EXIT_OK)
}
