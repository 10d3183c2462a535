use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smmcts::bandit::Perturbation;
use smmcts::engine::{EngineConfig, RetVal, Variant};
use smmcts::experiment::{
    log_checkpoints, run_audit, run_battery, run_sweep, run_worstcase, BatteryConfig, ErrorSpec, SweepConfig,
    WorstCaseConfig,
};
use smmcts::policy::PolicyKind;
use smmcts::solver::backward_induction;
use smmcts::{par, GameSpec, MatrixGame};

/// Simultaneous-move MCTS experiments.
#[derive(Parser, Debug)]
#[command(name = "smmcts", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Shared {
    /// Base seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for `worstcase`). Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a game file exactly and print subgame values.
    Solve(SolveArgs),
    /// Exploitability of empirical frequencies over random games.
    Sweep(SweepArgs),
    /// Search small games for the highest exploitability after a fixed budget.
    Worstcase(WorstArgs),
    /// Repeated matrix-game battery with property checks.
    Bandit(BanditArgs),
    /// Payoff-band audit of one search run on a game file.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    game: PathBuf,
    /// Also print an equilibrium strategy for every state.
    #[arg(long)]
    profile: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    bf: usize,
    #[arg(long = "gamma", default_values_t = [0.05])]
    gammas: Vec<f64>,
    #[arg(long = "policy", value_enum, default_values_t = [PolicyArg::Rm, PolicyArg::Rmm])]
    policies: Vec<PolicyArg>,
    #[arg(long, default_value_t = 10)]
    games: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 100_000)]
    iters: u64,
    /// `log` for 1, 2, 5, 10, ... or a comma-separated list of iterations.
    #[arg(long, default_value = "log")]
    checkpoints: String,
}

#[derive(Args, Debug)]
struct WorstArgs {
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    bf: usize,
    #[arg(long, default_value = "0,0.5,1")]
    utilities: String,
    /// Number of sampled games.
    #[arg(long, default_value_t = 10_000, conflicts_with = "full")]
    budget: u64,
    /// Enumerate every utility assignment instead of sampling.
    #[arg(long)]
    full: bool,
    #[arg(long = "policy", value_enum, default_values_t = [PolicyArg::Rm, PolicyArg::Rmm])]
    policies: Vec<PolicyArg>,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1000)]
    eval_iters: u64,
    #[arg(long, default_value_t = 100)]
    eval_runs: usize,
}

#[derive(Args, Debug)]
struct BanditArgs {
    #[arg(long = "policy", value_enum, default_values_t = [LearnerArg::Rm, LearnerArg::Exp3])]
    policies: Vec<LearnerArg>,
    #[arg(long, default_value_t = 20)]
    games: usize,
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    slack: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Fixed matrix, rows separated by `;`, e.g. `1,0;0,1`.
    #[arg(long)]
    matrix: Option<String>,
    /// Payoff error bound; enables the error battery.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, default_value_t = PerturbationArg::Noise)]
    perturbation: PerturbationArg,
    /// First step from which payoffs must stay within `eta`.
    #[arg(long, default_value_t = 1000)]
    onset: u64,
    /// Half period of the square wave.
    #[arg(long, default_value_t = 1000)]
    period: u64,
    /// Regret bound for the onset check; measured from the battery when unset.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    game: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Rm)]
    policy: PolicyArg,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1_000_000)]
    iters: u64,
    /// Regret bound; measured with a standard regret-matching battery when unset.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Both players follow an exact equilibrium instead of learning.
    #[arg(long)]
    scripted: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Rm,
    Rmm,
    Exp3,
    Exp3m,
}

impl From<PolicyArg> for Variant {
    fn from(p: PolicyArg) -> Variant {
        match p {
            PolicyArg::Rm => Variant::Rm,
            PolicyArg::Rmm => Variant::Rmm,
            PolicyArg::Exp3 => Variant::Exp3,
            PolicyArg::Exp3m => Variant::Exp3m,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LearnerArg {
    Rm,
    Exp3,
}

impl From<LearnerArg> for PolicyKind {
    fn from(p: LearnerArg) -> PolicyKind {
        match p {
            LearnerArg::Rm => PolicyKind::RegretMatching,
            LearnerArg::Exp3 => PolicyKind::Exp3,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PerturbationArg {
    Noise,
    Square,
}

/// Why a command did not succeed.
enum Failure {
    Invalid(anyhow::Error),
    Property(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

impl From<smmcts::Error> for Failure {
    fn from(e: smmcts::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("not a number: '{s}'")))
        .collect()
}

fn parse_matrix(text: &str) -> Result<MatrixGame> {
    let rows = text.split(';').map(parse_list).collect::<Result<Vec<_>>>()?;
    Ok(MatrixGame::new(rows)?)
}

fn parse_checkpoints(text: &str, iters: u64) -> Result<Vec<u64>> {
    if text == "log" {
        return Ok(log_checkpoints(iters));
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("not an iteration count: '{s}'")))
        .collect()
}

fn solve(shared: &Shared, args: &SolveArgs) -> Result<(), Failure> {
    let game = GameSpec::load(&args.game)?;
    let values = backward_induction(&game);
    let mut text = format!("value {}\n", values.root_value());
    text.push_str("node,depth,value\n");
    for id in game.inner_nodes() {
        text.push_str(&format!("{id},{},{}\n", game.node_depth(id), values.value(id)));
    }
    if args.profile {
        let profile = values.equilibrium_profile(&game);
        text.push_str("node,player,strategy\n");
        for id in game.inner_nodes() {
            for (player, s) in [(1, &profile.p1), (2, &profile.p2)] {
                let probs = s.get(id).map(|m| m.probs().to_vec()).unwrap_or_default();
                let joined: Vec<String> = probs.iter().map(f64::to_string).collect();
                text.push_str(&format!("{id},{player},{}\n", joined.join(" ")));
            }
        }
    }
    emit(shared.out.as_deref(), &text)?;
    Ok(())
}

fn sweep(shared: &Shared, args: &SweepArgs) -> Result<(), Failure> {
    let cfg = SweepConfig {
        depth: args.depth,
        branching: args.bf,
        gammas: args.gammas.clone(),
        variants: args.policies.iter().map(|&p| p.into()).collect(),
        games: args.games,
        runs: args.runs,
        iterations: args.iters,
        checkpoints: parse_checkpoints(&args.checkpoints, args.iters)?,
        seed: shared.seed,
    };
    let result = run_sweep(&cfg)?;
    emit(shared.out.as_deref(), &result.to_csv())?;
    let mut summary = String::from("policy,gamma,iteration,mean_exploitability\n");
    for m in result.means() {
        summary.push_str(&format!("{},{},{},{}\n", m.variant, m.gamma, m.iteration, m.mean));
    }
    eprint!("{summary}");
    Ok(())
}

fn worstcase(shared: &Shared, args: &WorstArgs) -> Result<(), Failure> {
    let cfg = WorstCaseConfig {
        depth: args.depth,
        branching: args.bf,
        utilities: parse_list(&args.utilities)?,
        budget: (!args.full).then_some(args.budget),
        variants: args.policies.iter().map(|&p| p.into()).collect(),
        gamma: args.gamma,
        eval_iterations: args.eval_iters,
        eval_runs: args.eval_runs,
        seed: shared.seed,
    };
    let report = run_worstcase(&cfg)?;
    let mut text = format!("evaluated {} of {} games\n", report.scores.len(), report.total);
    text.push_str("policy,index,mean_exploitability,value,floor\n");
    for w in &report.worst {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            w.variant, w.index, w.mean_exploitability, w.value, w.floor
        ));
    }
    print!("{text}");
    if let Some(dir) = &shared.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.csv"), &text).context("writing report")?;
        for w in &report.worst {
            w.game.save(dir.join(format!("worst_{}.json", w.variant)))?;
        }
    }
    Ok(())
}

fn bandit(shared: &Shared, args: &BanditArgs) -> Result<(), Failure> {
    let error = args.eta.map(|eta| ErrorSpec {
        eta,
        onset: args.onset,
        perturbation: match args.perturbation {
            PerturbationArg::Noise => Perturbation::UniformNoise { initial: 0.3 },
            PerturbationArg::Square => Perturbation::SquareWave { period: args.period },
        },
    });
    let cfg = BatteryConfig {
        matrix: args.matrix.as_deref().map(parse_matrix).transpose()?,
        gamma: args.gamma,
        slack: args.slack,
        delta: args.delta,
        error,
        eps_hat: args.eps,
        ..BatteryConfig::standard(
            args.policies.iter().map(|&p| p.into()).collect(),
            args.games,
            args.horizon,
            shared.seed,
        )
    };
    let report = run_battery(&cfg)?;
    emit(shared.out.as_deref(), &report.to_csv())?;
    let summary = report.summary();
    if shared.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Property("battery properties failed".into()))
    }
}

fn audit(shared: &Shared, args: &AuditArgs) -> Result<(), Failure> {
    let game = GameSpec::load(&args.game)?;
    let eps = match args.eps {
        Some(e) => e,
        None => {
            let battery = run_battery(&BatteryConfig::standard(
                vec![PolicyKind::RegretMatching],
                20,
                100_000,
                shared.seed,
            ))?;
            battery.eps_hat(PolicyKind::RegretMatching).expect("one policy")
        }
    };
    let variant: Variant = args.policy.into();
    let engine = if args.scripted {
        let profile = backward_induction(&game).equilibrium_profile(&game);
        EngineConfig::scripted(profile, RetVal::Sample, shared.seed)
    } else {
        EngineConfig::variant(variant, args.gamma, shared.seed)?
    };
    let report = run_audit(&game, engine, args.iters, eps, args.delta)?;
    let text = format!("eps {eps}\ndelta {}\n{}", args.delta, report.summary());
    emit(shared.out.as_deref(), &text)?;
    if report.violations() == 0 && report.within_bound() {
        Ok(())
    } else {
        Err(Failure::Property("audit found band violations or exceeded the bound".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let shared = &cli.shared;
    if shared.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    let outcome = par::with_threads(shared.threads, || match &cli.command {
        Command::Solve(a) => solve(shared, a),
        Command::Sweep(a) => sweep(shared, a),
        Command::Worstcase(a) => worstcase(shared, a),
        Command::Bandit(a) => bandit(shared, a),
        Command::Audit(a) => audit(shared, a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Property(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
