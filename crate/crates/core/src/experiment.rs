//! Experiment drivers: exploitability sweeps, worst-case game search, repeated
//! game batteries and payoff-band audits.
//!
//! Every driver is a deterministic function of its configuration. Independent
//! cells run through [`crate::par`] with seeds derived from the base seed and
//! the cell key, and results are collected in key order.

use std::fmt::Write as _;

use crate::bandit::{
    check_eps_equilibrium_onset, checkpoint_row, play_repeated, play_with_error, ErrorModel, Perturbation,
    PlayOptions, RepeatedGameTrace,
};
use crate::engine::{run_with_checkpoints, EngineConfig, Variant};
use crate::error::{invalid, Result};
use crate::game::{enumerate_small_games, generate_random_game, GameSpec, MatrixGame, RandomGameParams, SampleBudget};
use crate::par;
use crate::policy::{PolicyConfig, PolicyKind};
use crate::rng::{derive_seed, derived_rng};
use crate::solver::{audit_payoff_bands, backward_induction, exploitability, exploitability_with_value, BandReport};
use crate::strategy::Player;

const GAME_KEY: u64 = 1;
const RUN_KEY: u64 = 2;
const MATRIX_KEY: u64 = 3;
const PLAY_KEY: u64 = 4;
const NOISE_KEY: u64 = 5;
const SAMPLE_KEY: u64 = 6;

/// `1, 2, 5, 10, 20, 50, ...` up to `max`, with `max` appended when it is not
/// on the grid.
pub fn log_checkpoints(max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let Some(c) = decade.checked_mul(m) else { break 'outer };
            if c > max {
                break 'outer;
            }
            out.push(c);
        }
        match decade.checked_mul(10) {
            Some(d) => decade = d,
            None => break,
        }
    }
    if out.last() != Some(&max) && max > 0 {
        out.push(max);
    }
    out
}

fn check_checkpoints(checkpoints: &[u64], max: u64) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(invalid("at least one checkpoint is required"));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("checkpoints must be positive and strictly increasing"));
    }
    if *checkpoints.last().expect("non-empty") > max {
        return Err(invalid(format!("checkpoint beyond the last iteration {max}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

/// Exploitability of player one's `gamma`-mixed equilibrium strategy: every
/// state plays `gamma / k + (1 - gamma) * sigma*`.
pub fn gamma_mixed_floor(game: &GameSpec, gamma: f64) -> Result<f64> {
    let values = backward_induction(game);
    let p1 = values.equilibrium_profile(game).p1.mix_uniform(gamma);
    exploitability(game, &p1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub depth: usize,
    pub branching: usize,
    pub gammas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub games: usize,
    pub runs: usize,
    pub iterations: u64,
    pub checkpoints: Vec<u64>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.branching == 0 {
            return Err(invalid("depth and branching factor must be at least 1"));
        }
        if self.games == 0 || self.runs == 0 || self.iterations == 0 {
            return Err(invalid("games, runs and iterations must be at least 1"));
        }
        if self.gammas.is_empty() || self.variants.is_empty() {
            return Err(invalid("at least one gamma and one policy are required"));
        }
        self.gammas.iter().try_for_each(|&g| check_gamma(g))?;
        check_checkpoints(&self.checkpoints, self.iterations)
    }

    /// Game `game_id` of the sweep.
    pub fn game(&self, game_id: usize) -> Result<GameSpec> {
        generate_random_game(&RandomGameParams::uniform(
            self.depth,
            self.branching,
            derive_seed(self.seed, &[GAME_KEY, game_id as u64]),
        ))
    }

    /// Engine seed of a run. Shared across policies and gammas, so every
    /// variant sees the same stream for a given `(game_id, run_id)`.
    pub fn run_seed(&self, game_id: usize, run_id: usize) -> u64 {
        derive_seed(self.seed, &[RUN_KEY, game_id as u64, run_id as u64])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub gamma: f64,
    pub depth: usize,
    pub branching: usize,
    pub game_id: usize,
    pub run_id: usize,
    pub iteration: u64,
    pub exploitability: f64,
}

pub const SWEEP_HEADER: &str = "policy,gamma,depth,bf,game_id,run_id,iteration,exploitability";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Mean exploitability over games and runs at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMean {
    pub variant: Variant,
    pub gamma: f64,
    pub iteration: u64,
    pub mean: f64,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.variant, r.gamma, r.depth, r.branching, r.game_id, r.run_id, r.iteration, r.exploitability
            )
            .expect("string write");
        }
        out
    }

    /// Means in first-appearance order of `(variant, gamma)`, then by iteration.
    pub fn means(&self) -> Vec<SweepMean> {
        let mut keys: Vec<(Variant, f64, u64)> = Vec::new();
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for r in &self.rows {
            let key = (r.variant, r.gamma, r.iteration);
            match keys.iter().position(|k| *k == key) {
                Some(p) => {
                    sums[p].0 += r.exploitability;
                    sums[p].1 += 1;
                }
                None => {
                    keys.push(key);
                    sums.push((r.exploitability, 1));
                }
            }
        }
        keys.into_iter()
            .zip(sums)
            .map(|((variant, gamma, iteration), (s, n))| SweepMean {
                variant,
                gamma,
                iteration,
                mean: s / n as f64,
            })
            .collect()
    }

    /// Mean over runs at `iteration`, per game.
    pub fn game_means(&self, variant: Variant, gamma: f64, iteration: u64) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in self
            .rows
            .iter()
            .filter(|r| r.variant == variant && r.gamma == gamma && r.iteration == iteration)
        {
            match out.iter_mut().find(|e| e.0 == r.game_id) {
                Some(e) => {
                    e.1 += r.exploitability;
                    e.2 += 1;
                }
                None => out.push((r.game_id, r.exploitability, 1)),
            }
        }
        out.into_iter().map(|(g, s, n)| (g, s / n as f64)).collect()
    }
}

/// Exploitability of player one's empirical frequencies at every checkpoint,
/// for every `(policy, gamma, game, run)` cell.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let games: Vec<GameSpec> = (0..cfg.games).map(|g| cfg.game(g)).collect::<Result<_>>()?;
    let values: Vec<f64> = par::map(&games, |g| backward_induction(g).root_value());
    let mut cells = Vec::new();
    for &variant in &cfg.variants {
        for &gamma in &cfg.gammas {
            for game_id in 0..cfg.games {
                for run_id in 0..cfg.runs {
                    cells.push((variant, gamma, game_id, run_id));
                }
            }
        }
    }
    let results = par::map(&cells, |&(variant, gamma, game_id, run_id)| -> Result<Vec<SweepRow>> {
        let game = &games[game_id];
        let engine = EngineConfig::variant(variant, gamma, cfg.run_seed(game_id, run_id))?;
        let mut rows = Vec::with_capacity(cfg.checkpoints.len());
        let mut failure = None;
        run_with_checkpoints(game, engine, cfg.iterations, &cfg.checkpoints, |t, tree| {
            match exploitability_with_value(game, values[game_id], &tree.empirical_strategy(Player::One)) {
                Ok(e) => rows.push(SweepRow {
                    variant,
                    gamma,
                    depth: cfg.depth,
                    branching: cfg.branching,
                    game_id,
                    run_id,
                    iteration: t,
                    exploitability: e,
                }),
                Err(e) => failure = Some(e),
            }
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(rows),
        }
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseConfig {
    pub depth: usize,
    pub branching: usize,
    pub utilities: Vec<f64>,
    /// Number of sampled games; `None` enumerates every assignment.
    pub budget: Option<u64>,
    pub variants: Vec<Variant>,
    pub gamma: f64,
    pub eval_iterations: u64,
    pub eval_runs: usize,
    pub seed: u64,
}

impl WorstCaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_iterations == 0 || self.eval_runs == 0 {
            return Err(invalid("evaluation iterations and runs must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(invalid("at least one policy is required"));
        }
        if self.budget == Some(0) {
            return Err(invalid("sampling budget must be positive"));
        }
        check_gamma(self.gamma)
    }
}

/// The highest-scoring game for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstGame {
    pub variant: Variant,
    /// Assignment index in the enumeration order.
    pub index: u64,
    pub game: GameSpec,
    /// Mean exploitability after the evaluation iterations.
    pub mean_exploitability: f64,
    pub value: f64,
    /// Exploitability of the `gamma`-mixed equilibrium strategy.
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    /// Size of the full assignment space.
    pub total: u64,
    /// `(index, mean exploitability per variant)` for every evaluated game.
    pub scores: Vec<(u64, Vec<f64>)>,
    pub worst: Vec<WorstGame>,
}

/// Mean exploitability of `variant` on `game` after `iterations` simulations,
/// averaged over `runs` runs with seeds derived from `seed`.
pub fn mean_exploitability(
    game: &GameSpec,
    value: f64,
    variant: Variant,
    gamma: f64,
    iterations: u64,
    runs: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for run_id in 0..runs {
        let engine = EngineConfig::variant(variant, gamma, derive_seed(seed, &[RUN_KEY, run_id as u64]))?;
        let result = crate::engine::run(game, engine, iterations)?;
        total += exploitability_with_value(game, value, &result.profile.profile.p1)?;
    }
    Ok(total / runs as f64)
}

/// Scores every candidate game by mean exploitability and reports the argmax
/// per policy. Ties go to the lowest index.
pub fn run_worstcase(cfg: &WorstCaseConfig) -> Result<WorstCaseReport> {
    cfg.validate()?;
    let budget = cfg.budget.map(|games| SampleBudget {
        games,
        seed: derive_seed(cfg.seed, &[SAMPLE_KEY]),
    });
    let stream = enumerate_small_games(cfg.depth, cfg.branching, &cfg.utilities, budget)?;
    let indices = stream.indices();
    let scored = par::map(&indices, |&index| -> Result<(u64, Vec<f64>)> {
        let game = stream.game_at(index);
        let value = backward_induction(&game).root_value();
        let means = cfg
            .variants
            .iter()
            .enumerate()
            .map(|(k, &variant)| {
                mean_exploitability(
                    &game,
                    value,
                    variant,
                    cfg.gamma,
                    cfg.eval_iterations,
                    cfg.eval_runs,
                    derive_seed(cfg.seed, &[index, k as u64]),
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((index, means))
    });
    let scores = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let mut worst = Vec::new();
    for (k, &variant) in cfg.variants.iter().enumerate() {
        let Some((index, means)) = scores
            .iter()
            .fold(None::<&(u64, Vec<f64>)>, |best, s| match best {
                Some(b) if b.1[k] >= s.1[k] => Some(b),
                _ => Some(s),
            })
        else {
            continue;
        };
        let game = stream.game_at(*index);
        worst.push(WorstGame {
            variant,
            index: *index,
            value: backward_induction(&game).root_value(),
            floor: gamma_mixed_floor(&game, cfg.gamma)?,
            mean_exploitability: means[k],
            game,
        });
    }
    Ok(WorstCaseReport {
        total: stream.total(),
        scores,
        worst,
    })
}

/// Payoff perturbation of an error battery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSpec {
    pub eta: f64,
    pub onset: u64,
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub policies: Vec<PolicyKind>,
    pub games: usize,
    /// Play this matrix in every game instead of drawing random ones.
    pub matrix: Option<MatrixGame>,
    /// Inclusive range of the number of actions per player.
    pub min_actions: usize,
    pub max_actions: usize,
    pub horizon: u64,
    pub gamma: f64,
    /// Added to `gamma` to form the regret surrogate `eps = gamma + slack`.
    pub slack: f64,
    pub delta: f64,
    /// Bound on `max |s_hat - s_bar|`.
    pub distance_tolerance: f64,
    pub error: Option<ErrorSpec>,
    /// Regret bound for the onset check; measured from this battery when unset.
    pub eps_hat: Option<f64>,
    pub seed: u64,
}

impl BatteryConfig {
    /// Random 2x2 to 5x5 matrices, `gamma = 0.05`, slack and delta `0.05`.
    pub fn standard(policies: Vec<PolicyKind>, games: usize, horizon: u64, seed: u64) -> Self {
        BatteryConfig {
            policies,
            games,
            matrix: None,
            min_actions: 2,
            max_actions: 5,
            horizon,
            gamma: 0.05,
            slack: 0.05,
            delta: 0.05,
            distance_tolerance: 0.01,
            error: None,
            eps_hat: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.games == 0 || self.horizon == 0 || self.policies.is_empty() {
            return Err(invalid("games, horizon and policies must be non-empty"));
        }
        if self.min_actions == 0 || self.min_actions > self.max_actions {
            return Err(invalid("action range must satisfy 1 <= min <= max"));
        }
        if let Some(e) = &self.error {
            if e.eta.is_nan() || e.eta < 0.0 {
                return Err(invalid("eta must be non-negative"));
            }
        }
        check_gamma(self.gamma)
    }

    /// Matrix of game `game_id`.
    pub fn matrix(&self, game_id: usize) -> MatrixGame {
        use rand::Rng;
        if let Some(m) = &self.matrix {
            return m.clone();
        }
        let mut rng = derived_rng(self.seed, &[MATRIX_KEY, game_id as u64]);
        let m = rng.random_range(self.min_actions..=self.max_actions);
        let n = rng.random_range(self.min_actions..=self.max_actions);
        MatrixGame::random(m, n, &mut rng)
    }

    /// Seeds failing a property that still let it pass.
    pub fn allowed_failures(&self) -> usize {
        self.games / 20
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryRun {
    pub policy: PolicyKind,
    pub game_id: usize,
    pub value: f64,
    pub trace: RepeatedGameTrace,
}

impl BatteryRun {
    /// Larger of the two players' average regrets at the horizon.
    pub fn regret(&self) -> f64 {
        self.trace.stats.regret1().max(self.trace.stats.regret2())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub policy: PolicyKind,
    pub passed: usize,
    pub total: usize,
    pub allowed_failures: usize,
    pub bound: f64,
    /// Worst measured statistic over the battery.
    pub worst: f64,
}

impl PropertyCheck {
    pub fn pass(&self) -> bool {
        self.total - self.passed <= self.allowed_failures
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReport {
    pub runs: Vec<BatteryRun>,
    pub properties: Vec<PropertyCheck>,
    /// `max r(T)` over the battery, per policy.
    pub eps_hat: Vec<(PolicyKind, f64)>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyCheck::pass)
    }

    pub fn eps_hat(&self, policy: PolicyKind) -> Option<f64> {
        self.eps_hat.iter().find(|(p, _)| *p == policy).map(|&(_, e)| e)
    }

    pub fn property(&self, name: &str, policy: PolicyKind) -> Option<&PropertyCheck> {
        self.properties.iter().find(|p| p.name == name && p.policy == policy)
    }

    /// Checkpoint rows of every trace, prefixed with the policy and game.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,game_id,step,i,j,payoff,g,gmax,r,gap1,gap2\n");
        for run in &self.runs {
            for c in &run.trace.checkpoints {
                writeln!(
                    out,
                    "{},{},{}",
                    run.policy.name(),
                    run.game_id,
                    checkpoint_row(c, &run.trace.base, run.value)
                )
                .expect("string write");
            }
        }
        out
    }

    /// One line per property.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (p, e) in &self.eps_hat {
            writeln!(out, "eps_hat {} {e:.6}", p.name()).expect("string write");
        }
        for p in &self.properties {
            writeln!(
                out,
                "{} {} {} {}/{} bound={:.6} worst={:.6}",
                if p.pass() { "PASS" } else { "FAIL" },
                p.policy.name(),
                p.name,
                p.passed,
                p.total,
                p.bound,
                p.worst
            )
            .expect("string write");
        }
        out
    }
}

/// Self-play of every policy on every battery matrix, followed by the property
/// checks. Plain batteries check regret, the frequency/average distance and the
/// equilibrium gaps over the final decade; error batteries check the payoff
/// band over the final decade and the existence of an equilibrium onset.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport> {
    cfg.validate()?;
    let checkpoints = log_checkpoints(cfg.horizon);
    let mut cells = Vec::new();
    for (k, &policy) in cfg.policies.iter().enumerate() {
        for game_id in 0..cfg.games {
            cells.push((k, policy, game_id));
        }
    }
    let runs = par::map(&cells, |&(k, policy, game_id)| -> Result<BatteryRun> {
        let matrix = cfg.matrix(game_id);
        let value = crate::solver::solve_matrix(&matrix).value;
        let pc = PolicyConfig::new(policy, cfg.gamma)?;
        let mut p1 = pc.learner(matrix.rows());
        let mut p2 = pc.learner(matrix.cols());
        let mut rng = derived_rng(cfg.seed, &[PLAY_KEY, game_id as u64, k as u64]);
        let opts = PlayOptions::checkpoints(checkpoints.clone());
        let trace = match &cfg.error {
            None => play_repeated(&matrix, &mut p1, &mut p2, cfg.horizon, &mut rng, &opts)?,
            Some(e) => {
                let model = ErrorModel {
                    base: matrix.clone(),
                    eta: e.eta,
                    onset: e.onset,
                    perturbation: e.perturbation,
                    seed: derive_seed(cfg.seed, &[NOISE_KEY, game_id as u64, k as u64]),
                };
                play_with_error(&model, &mut p1, &mut p2, cfg.horizon, &mut rng, &opts)?
            }
        };
        Ok(BatteryRun {
            policy,
            game_id,
            value,
            trace,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let eps_hat: Vec<(PolicyKind, f64)> = cfg
        .policies
        .iter()
        .map(|&p| {
            let e = runs
                .iter()
                .filter(|r| r.policy == p)
                .map(BatteryRun::regret)
                .fold(f64::NEG_INFINITY, f64::max);
            (p, e)
        })
        .collect();
    let mut properties = Vec::new();
    let eps = cfg.gamma + cfg.slack;
    for &policy in &cfg.policies {
        let mine: Vec<&BatteryRun> = runs.iter().filter(|r| r.policy == policy).collect();
        let mut check = |name: &'static str, bound: f64, stat: &dyn Fn(&BatteryRun) -> f64| {
            let stats: Vec<f64> = mine.iter().map(|r| stat(r)).collect();
            properties.push(PropertyCheck {
                name,
                policy,
                passed: stats.iter().filter(|&&s| s <= bound).count(),
                total: stats.len(),
                allowed_failures: cfg.allowed_failures(),
                bound,
                worst: stats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        };
        match &cfg.error {
            None => {
                check("regret", eps, &BatteryRun::regret);
                check("frequency_distance", cfg.distance_tolerance, &|r| r.trace.stats.strategy_distance());
                check("equilibrium_gap", 4.0 * eps + cfg.delta, &|r| {
                    r.trace
                        .final_decade()
                        .map(|c| {
                            let (g1, g2) = c.nash_gaps(&r.trace.base);
                            g1.max(g2)
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                });
            }
            Some(e) => {
                let eta = e.eta;
                check("payoff_band", eta + cfg.gamma + cfg.slack, &|r| {
                    r.trace
                        .final_decade()
                        .map(|c| (c.average_payoff() - r.value).abs())
                        .fold(f64::NEG_INFINITY, f64::max)
                });
                let eps_hat = cfg.eps_hat.unwrap_or_else(|| {
                    eps_hat.iter().find(|(p, _)| *p == policy).map(|&(_, e)| e).unwrap_or(eps)
                });
                let c = if eps_hat > 0.0 { eta / eps_hat } else { 0.0 };
                let bound = 4.0 * (c + 1.0) * eps_hat + cfg.delta;
                // 0 when an onset exists, 1 otherwise
                check("equilibrium_onset", 0.0, &|r| {
                    match check_eps_equilibrium_onset(&r.trace, &r.trace.base, eps_hat, cfg.delta, c) {
                        Some(_) => 0.0,
                        None => 1.0,
                    }
                });
                if let Some(p) = properties.last_mut() {
                    p.bound = bound;
                }
            }
        }
    }
    Ok(BatteryReport {
        runs,
        properties,
        eps_hat,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub depth: usize,
    pub value: f64,
    pub exploitability: f64,
    pub eps: f64,
    pub delta: f64,
    /// Band reports at the final-decade checkpoints.
    pub bands: Vec<(u64, BandReport)>,
}

impl AuditReport {
    /// `2 D^2 eps + delta`.
    pub fn bound(&self) -> f64 {
        2.0 * (self.depth * self.depth) as f64 * self.eps + self.delta
    }

    pub fn within_bound(&self) -> bool {
        self.exploitability <= self.bound()
    }

    pub fn violations(&self) -> usize {
        self.bands.iter().map(|(_, b)| b.violations()).sum()
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "value {}", self.value).expect("string write");
        for (t, band) in &self.bands {
            for (d, audited, inside) in band.by_depth() {
                writeln!(out, "band t={t} depth={d} inside={inside}/{audited}").expect("string write");
            }
            if let Some(w) = band.worst() {
                writeln!(
                    out,
                    "worst t={t} node={} depth={} mean={:.6} value={:.6} half_width={:.6}",
                    w.node, w.depth, w.mean, w.value, w.half_width
                )
                .expect("string write");
            }
        }
        writeln!(
            out,
            "exploitability {:.6} bound {:.6} {}",
            self.exploitability,
            self.bound(),
            if self.within_bound() { "within" } else { "exceeded" }
        )
        .expect("string write");
        writeln!(out, "violations {}", self.violations()).expect("string write");
        out
    }
}

/// Runs the engine and audits the mean payoffs of every visited state against
/// their bands at the final-decade checkpoints of a log grid.
pub fn run_audit(game: &GameSpec, engine: EngineConfig, iterations: u64, eps: f64, delta: f64) -> Result<AuditReport> {
    let values = backward_induction(game);
    let from = iterations.div_ceil(10);
    let checkpoints: Vec<u64> = log_checkpoints(iterations).into_iter().filter(|&t| t >= from).collect();
    let mut bands = Vec::new();
    let result = run_with_checkpoints(game, engine, iterations, &checkpoints, |t, tree| {
        bands.push((t, audit_payoff_bands(game, &values, &tree.node_stats(), eps, delta)));
    })?;
    let exploitability = exploitability_with_value(game, values.root_value(), &result.profile.profile.p1)?;
    Ok(AuditReport {
        depth: game.depth(),
        value: values.root_value(),
        exploitability,
        eps,
        delta,
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RetVal;

    #[test]
    fn log_grid() {
        assert_eq!(log_checkpoints(1), vec![1]);
        assert_eq!(log_checkpoints(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(log_checkpoints(300), vec![1, 2, 5, 10, 20, 50, 100, 200, 300]);
        assert!(log_checkpoints(0).is_empty());
    }

    fn tiny_sweep() -> SweepConfig {
        SweepConfig {
            depth: 2,
            branching: 2,
            gammas: vec![0.1],
            variants: vec![Variant::Rm, Variant::Exp3m],
            games: 2,
            runs: 2,
            iterations: 200,
            checkpoints: log_checkpoints(200),
            seed: 7,
        }
    }

    #[test]
    fn sweep_rows_and_determinism() {
        let cfg = tiny_sweep();
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2 * cfg.checkpoints.len());
        assert!(a.rows.iter().all(|r| r.exploitability >= -1e-12));
        assert_eq!(a.to_csv(), run_sweep(&cfg).unwrap().to_csv());
        assert_eq!(a.means().len(), 2 * cfg.checkpoints.len());
        assert_eq!(a.game_means(Variant::Rm, 0.1, 200).len(), 2);
    }

    #[test]
    fn single_iteration_sweep_is_defined() {
        let cfg = SweepConfig {
            games: 1,
            runs: 1,
            iterations: 1,
            checkpoints: vec![1],
            variants: vec![Variant::Rm],
            ..tiny_sweep()
        };
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].exploitability.is_finite());
    }

    #[test]
    fn sweep_validation() {
        let bad = [
            SweepConfig { games: 0, ..tiny_sweep() },
            SweepConfig { gammas: vec![1.0], ..tiny_sweep() },
            SweepConfig { checkpoints: vec![10, 5], ..tiny_sweep() },
            SweepConfig { checkpoints: vec![500], ..tiny_sweep() },
        ];
        for cfg in bad {
            assert!(run_sweep(&cfg).is_err());
        }
    }

    #[test]
    fn worstcase_on_binary_matrices() {
        let cfg = WorstCaseConfig {
            depth: 1,
            branching: 2,
            utilities: vec![0.0, 1.0],
            budget: None,
            variants: vec![Variant::Rm, Variant::Rmm],
            gamma: 0.05,
            eval_iterations: 200,
            eval_runs: 3,
            seed: 1,
        };
        let report = run_worstcase(&cfg).unwrap();
        assert_eq!(report.total, 16);
        assert_eq!(report.scores.len(), 16);
        // the two constant games cannot be exploited
        for (idx, means) in &report.scores {
            if *idx == 0 || *idx == 15 {
                assert!(means.iter().all(|m| m.abs() < 1e-12));
            }
        }
        for w in &report.worst {
            let floor = gamma_mixed_floor(&w.game, 0.05).unwrap();
            assert_eq!(w.floor, floor);
            assert!(w.mean_exploitability >= 0.0);
        }
        assert_eq!(run_worstcase(&cfg).unwrap().worst, report.worst);
    }

    #[test]
    fn matching_pennies_floor() {
        let g = GameSpec::from_matrix(&MatrixGame::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        // uniform is optimal, so mixing in more uniform changes nothing
        assert!(gamma_mixed_floor(&g, 0.05).unwrap().abs() < 1e-9);
        let skew = GameSpec::from_matrix(&MatrixGame::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap()).unwrap();
        // equilibrium row strategy is pure on row 2 (value 0); mixing puts 0.025 on row 1,
        // which the column player ignores, so the floor stays 0
        assert!(gamma_mixed_floor(&skew, 0.05).unwrap().abs() < 1e-9);
    }

    #[test]
    fn small_battery_reports_all_properties() {
        let cfg = BatteryConfig::standard(vec![PolicyKind::RegretMatching, PolicyKind::Exp3], 3, 2000, 5);
        let report = run_battery(&cfg).unwrap();
        assert_eq!(report.runs.len(), 6);
        assert_eq!(report.properties.len(), 6);
        assert_eq!(report.eps_hat.len(), 2);
        let csv = report.to_csv();
        assert!(csv.starts_with("policy,game_id,step,"));
        assert!(report.summary().contains("eps_hat rm"));
        assert_eq!(report, run_battery(&cfg).unwrap());
    }

    #[test]
    fn fixed_matrix_battery() {
        let pennies = MatrixGame::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let cfg = BatteryConfig {
            matrix: Some(pennies.clone()),
            ..BatteryConfig::standard(vec![PolicyKind::RegretMatching], 4, 20_000, 1)
        };
        let report = run_battery(&cfg).unwrap();
        assert!(report.runs.iter().all(|r| r.trace.base == pennies && r.value == 0.5));
        assert!(report.passed(), "{}", report.summary());
        // different games use different play streams
        assert_ne!(report.runs[0].trace.stats, report.runs[1].trace.stats);
    }

    #[test]
    fn zero_error_battery_matches_plain() {
        let plain = BatteryConfig::standard(vec![PolicyKind::RegretMatching], 2, 500, 3);
        let zero = BatteryConfig {
            error: Some(ErrorSpec {
                eta: 0.0,
                onset: 0,
                perturbation: Perturbation::UniformNoise { initial: 0.0 },
            }),
            ..plain.clone()
        };
        let a = run_battery(&plain).unwrap();
        let b = run_battery(&zero).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn scripted_audit_has_no_violations() {
        let g = generate_random_game(&RandomGameParams::uniform(2, 2, 3)).unwrap();
        let profile = backward_induction(&g).equilibrium_profile(&g);
        let engine = EngineConfig::scripted(profile, RetVal::Sample, 4);
        let report = run_audit(&g, engine, 20_000, 0.0, 0.05).unwrap();
        assert_eq!(report.violations(), 0);
        assert!(report.within_bound());
        assert!(report.summary().contains("violations 0"));
    }
}
