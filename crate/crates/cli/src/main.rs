mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cogduty::optimizer::{optimize_perfect, optimize_soft, sweep_alpha, sweep_alpha_with_lower, OptResult, SearchMode};
use cogduty::simulator::{simulate, validate_policy};
use cogduty::throughput::evaluate;
use cogduty::{PerfectPolicy, Policy, SoftMetricModel, SoftPolicy, ThresholdSet};

use crate::config::{parse_alphas, read_config_file, resolve, RawConfig, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{header, num, policy_columns, policy_row, write_table, Table};

const THREADS_VAR: &str = "COGDUTY_THREADS";

#[derive(Parser)]
#[command(name = "cogduty", version, about = "Optimize, evaluate and simulate secondary-user transmission policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one policy analytically.
    Eval(EvalArgs),
    /// Find the best policy for one alpha.
    Optimize(OptimizeArgs),
    /// Optimize over a range of alphas.
    Sweep(SweepArgs),
    /// Monte Carlo estimates for one policy.
    Simulate(PolicyRunArgs),
    /// Compare analytic and simulated rates; exits 3 if any |z| > 3.
    Validate(PolicyRunArgs),
    /// Write the sweep tables used for plotting.
    FiguresData(FiguresArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Perfect,
    Soft,
}

/// Configuration flags; each one overrides the same key from `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// Flat-key TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// channel_a, channel_b, tiny_gsp or custom.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    t_on: Option<f64>,
    #[arg(long)]
    t_off: Option<f64>,
    #[arg(long)]
    t_s: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    p_primary: Option<f64>,
    #[arg(long)]
    noise_p: Option<f64>,
    #[arg(long)]
    noise_s: Option<f64>,
    #[arg(long)]
    g_pp: Option<f64>,
    #[arg(long)]
    g_ss: Option<f64>,
    #[arg(long)]
    g_ps: Option<f64>,
    #[arg(long)]
    g_sp: Option<f64>,
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    t_cap: Option<f64>,
    #[arg(long)]
    power_points: Option<usize>,
    #[arg(long)]
    time_points: Option<usize>,
    #[arg(long)]
    threshold_points: Option<usize>,
    #[arg(long)]
    refine_rounds: Option<usize>,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    warmup_cycles: Option<u64>,
    #[arg(long)]
    sensing_lag: Option<f64>,
    #[arg(long)]
    credit_sensing_primary: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<Resolved> {
        let file = self.config.as_deref().map(read_config_file).transpose()?;
        let flags = RawConfig {
            preset: self.preset.clone(),
            t_on: self.t_on,
            t_off: self.t_off,
            t_s: self.t_s,
            r0: self.r0,
            p_primary: self.p_primary,
            noise_p: self.noise_p,
            noise_s: self.noise_s,
            g_pp: self.g_pp,
            g_ss: self.g_ss,
            g_ps: self.g_ps,
            g_sp: self.g_sp,
            p_max: self.p_max,
            gamma0: self.gamma0,
            t_cap: self.t_cap,
            power_points: self.power_points,
            time_points: self.time_points,
            threshold_points: self.threshold_points,
            refine_rounds: self.refine_rounds,
            cycles: self.cycles,
            seed: self.seed,
            replicas: self.replicas,
            warmup_cycles: self.warmup_cycles,
            sensing_lag: self.sensing_lag,
            credit_sensing_primary: self.credit_sensing_primary.then_some(true),
        };
        resolve(file.as_ref(), &flags)
    }
}

/// A policy given on the command line. For perfect sensing, powers and
/// durations are `FREE BUSY`.
#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value = "perfect")]
    mode: Mode,
    #[arg(long, num_args = 1..)]
    thresholds: Vec<f64>,
    #[arg(long, num_args = 1.., required = true)]
    powers: Vec<f64>,
    #[arg(long, num_args = 1.., required = true)]
    durations: Vec<f64>,
}

impl PolicyArgs {
    fn policy(&self) -> CliResult<Policy> {
        let bad = |e: cogduty::Error| CliError::Config(e.to_string());
        match self.mode {
            Mode::Perfect => {
                if !self.thresholds.is_empty() {
                    return Err(CliError::Config("perfect sensing takes no --thresholds".into()));
                }
                match (self.powers.as_slice(), self.durations.as_slice()) {
                    ([p_free, p_busy], [t_free, t_busy]) => Ok(Policy::Perfect(PerfectPolicy {
                        p_free: *p_free,
                        t_free: *t_free,
                        p_busy: *p_busy,
                        t_busy: *t_busy,
                    })),
                    _ => Err(CliError::Config(
                        "perfect sensing needs --powers P_FREE P_BUSY and --durations T_FREE T_BUSY".into(),
                    )),
                }
            }
            Mode::Soft => {
                if self.thresholds.is_empty() {
                    return Err(CliError::Config("soft sensing needs at least one --thresholds value".into()));
                }
                let thresholds = ThresholdSet::new(self.thresholds.clone()).map_err(bad)?;
                let soft = SoftPolicy::new(thresholds, self.powers.clone(), self.durations.clone()).map_err(bad)?;
                Ok(Policy::Soft(soft))
            }
        }
    }

    fn metric(&self, resolved: &Resolved) -> CliResult<Option<SoftMetricModel>> {
        match self.mode {
            Mode::Perfect => Ok(None),
            Mode::Soft => resolved.config.metric().map(Some),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_enum, default_value = "perfect")]
    mode: Mode,
    /// Number of soft-sensing thresholds S (S+1 levels).
    #[arg(long, default_value_t = 1)]
    num_thresholds: usize,
}

impl SearchArgs {
    fn mode(&self, resolved: &Resolved) -> CliResult<SearchMode> {
        Ok(match self.mode {
            Mode::Perfect => SearchMode::Perfect,
            Mode::Soft => SearchMode::Soft {
                metric: resolved.config.metric()?,
                thresholds: self.num_thresholds,
            },
        })
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// `start:end:step` (inclusive) or a single value.
    #[arg(long, default_value = "0:1:0.05")]
    alphas: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyRunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "0:1:0.05")]
    alphas: String,
    /// Directory for the sweep CSVs; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
}

fn summary(out: Option<&Path>, line: String) {
    match out {
        Some(path) => println!("{line} -> {}", path.display()),
        None => eprintln!("{line}"),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_VAR} must be a non-negative integer, got `{value}`")))?;
    if threads > 0 {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let policy = args.policy.policy()?;
    let metric = args.policy.metric(&resolved)?;
    let scenario = resolved.config.scenario()?;
    policy.validate(&scenario.link)?;
    let eval = evaluate(&scenario, args.alpha, &policy, metric.as_ref())?;
    let mut table = Table::new(policy_columns(&policy));
    table.push(policy_row(&policy, &eval));
    write_table(args.out.as_deref(), &header("eval", &resolved, &[]), &table)?;
    summary(
        args.out.as_deref(),
        format!("objective {} (rate_s {}, rate_p {})", eval.objective, eval.rate_secondary, eval.rate_primary),
    );
    Ok(())
}

fn run_optimize(args: &OptimizeArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let scenario = resolved.config.scenario()?;
    let grid = resolved.config.grid();
    let result = match args.search.mode(&resolved)? {
        SearchMode::Perfect => optimize_perfect(&scenario, args.alpha, &grid)?,
        SearchMode::Soft { metric, thresholds } => {
            optimize_soft(&scenario, &metric, args.alpha, thresholds, &grid, &[])?
        }
    };
    let mut table = Table::new(policy_columns(&result.best_policy));
    table.push(policy_row(&result.best_policy, &result.evaluation));
    let extra = [("evaluations", result.evaluations_count.to_string())];
    write_table(args.out.as_deref(), &header("optimize", &resolved, &extra), &table)?;
    summary(
        args.out.as_deref(),
        format!(
            "best objective {} after {} evaluations",
            result.evaluation.objective, result.evaluations_count
        ),
    );
    Ok(())
}

fn sweep_table(results: &[OptResult]) -> Table {
    let mut table = Table::new(policy_columns(&results[0].best_policy));
    for r in results {
        table.push(policy_row(&r.best_policy, &r.evaluation));
    }
    table
}

fn run_sweep(args: &SweepArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let alphas = parse_alphas(&args.alphas)?;
    let scenario = resolved.config.scenario()?;
    let results = sweep_alpha(&scenario, args.search.mode(&resolved)?, &alphas, &resolved.config.grid())?;
    let extra = [("alphas", args.alphas.clone())];
    write_table(args.out.as_deref(), &header("sweep", &resolved, &extra), &sweep_table(&results))?;
    summary(args.out.as_deref(), format!("{} alphas optimized", results.len()));
    Ok(())
}

fn run_simulate(args: &PolicyRunArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let policy = args.policy.policy()?;
    let metric = args.policy.metric(&resolved)?;
    let scenario = resolved.config.scenario()?;
    let report = simulate(&scenario, &policy, metric.as_ref(), &resolved.config.sim_config())?;
    let mut table = Table::new(["quantity", "value", "std_err"].map(String::from).to_vec());
    for (name, value, se) in [
        ("rate_s", report.rate_secondary_mean, report.rate_secondary_se),
        ("rate_p", report.rate_primary_mean, report.rate_primary_se),
        ("p_ss", report.p_ss_empirical, report.p_ss_se),
        ("mu", report.mean_cycle_empirical, report.mean_cycle_se),
    ] {
        table.push(vec![name.to_string(), num(value), num(se)]);
    }
    for (k, (occ, se)) in report.level_occupancy.iter().zip(&report.level_occupancy_se).enumerate() {
        table.push(vec![format!("level_{}", k + 1), num(*occ), num(*se)]);
    }
    write_table(args.out.as_deref(), &header("simulate", &resolved, &[]), &table)?;
    summary(
        args.out.as_deref(),
        format!("{} cycles over {} replicas", report.cycles_run, report.replicas),
    );
    Ok(())
}

fn run_validate(args: &PolicyRunArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let policy = args.policy.policy()?;
    let metric = args.policy.metric(&resolved)?;
    let scenario = resolved.config.scenario()?;
    let report = validate_policy(&scenario, &policy, metric.as_ref(), &resolved.config.sim_config())?;
    let mut table = Table::new(["quantity", "analytic", "simulated", "std_err", "z"].map(String::from).to_vec());
    for row in &report.rows {
        table.push(vec![
            row.quantity.clone(),
            num(row.analytic),
            num(row.simulated),
            num(row.std_err),
            num(row.z),
        ]);
    }
    write_table(args.out.as_deref(), &header("validate", &resolved, &[]), &table)?;
    let flagged: Vec<String> = report
        .flagged()
        .iter()
        .map(|r| format!("{} (z = {:.2})", r.quantity, r.z))
        .collect();
    if !flagged.is_empty() {
        return Err(CliError::Validation(format!("beyond 3 standard errors: {}", flagged.join(", "))));
    }
    let max_z = report.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    summary(args.out.as_deref(), format!("all quantities within 3 standard errors (max |z| {max_z:.2})"));
    Ok(())
}

fn run_figures_data(args: &FiguresArgs) -> CliResult<()> {
    let resolved = args.config.resolve()?;
    let alphas = parse_alphas(&args.alphas)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let grid = resolved.config.grid();
    let extra = [("alphas", args.alphas.clone())];

    let with_channel = |g_sp: f64, preset: &str| -> Resolved {
        let mut r = resolved.clone();
        if r.config.g_sp != g_sp {
            r.overrides.push(format!("g_sp = {g_sp} (channel {preset})"));
        }
        r.config.g_sp = g_sp;
        r
    };
    let write = |name: &str, r: &Resolved, results: &[OptResult]| -> CliResult<()> {
        let path = args.out_dir.join(name);
        write_table(Some(&path), &header("figures-data", r, &extra), &sweep_table(results))
    };

    let channel_a = with_channel(cogduty::presets::ChannelPreset::ChannelA.mean_gain_sp(), "channel_a");
    let channel_b = with_channel(cogduty::presets::ChannelPreset::ChannelB.mean_gain_sp(), "channel_b");
    let scenario_a = channel_a.config.scenario()?;
    let scenario_b = channel_b.config.scenario()?;

    write("perfect_channel_a.csv", &channel_a, &sweep_alpha(&scenario_a, SearchMode::Perfect, &alphas, &grid)?)?;
    write("perfect_channel_b.csv", &channel_b, &sweep_alpha(&scenario_b, SearchMode::Perfect, &alphas, &grid)?)?;

    let soft = |gamma0: f64, thresholds: usize, lower: Option<&[OptResult]>| -> CliResult<(Resolved, Vec<OptResult>)> {
        let mut r = channel_b.clone();
        if r.config.gamma0 != gamma0 {
            r.overrides.push(format!("gamma0 = {gamma0}"));
        }
        r.config.gamma0 = gamma0;
        let mode = SearchMode::Soft {
            metric: r.config.metric()?,
            thresholds,
        };
        let results = sweep_alpha_with_lower(&scenario_b, mode, &alphas, &grid, lower)?;
        Ok((r, results))
    };
    let (r, s1) = soft(3.0, 1, None)?;
    write("soft_s1_gamma3_channel_b.csv", &r, &s1)?;
    let (r, s1_sharp) = soft(10.0, 1, None)?;
    write("soft_s1_gamma10_channel_b.csv", &r, &s1_sharp)?;
    let (r, s2) = soft(3.0, 2, Some(&s1))?;
    write("soft_s2_gamma3_channel_b.csv", &r, &s2)?;

    println!("5 sweep tables written to {}", args.out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Validate(a) => run_validate(a),
        Command::FiguresData(a) => run_figures_data(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cogduty: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
