//! Selection policies for a single decision point.
//!
//! Regret matching keeps cumulative regrets and is mixed with uniform
//! exploration externally ([`mix_exploration`]). Exp3 keeps importance-weighted
//! reward sums and carries its exploration term internally, so it must never be
//! mixed a second time.
//!
//! The [`Learner`] trait drives these rules in repeated matrix games; the
//! exploration wrappers implement uniform exploration that leaves the wrapped
//! learner untouched on exploring steps.

use rand::{Rng, RngCore};

use crate::error::{invalid, Error, Result};
use crate::strategy::{sample_index, MixedStrategy};

/// Which selection rule a node or player uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    RegretMatching,
    Exp3,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RegretMatching => "rm",
            PolicyKind::Exp3 => "exp3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Exploration rate, strictly inside `(0, 1)`.
    pub gamma: f64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(PolicyConfig { kind, gamma })
    }

    pub fn regret_matching(gamma: f64) -> Result<Self> {
        Self::new(PolicyKind::RegretMatching, gamma)
    }

    pub fn exp3(gamma: f64) -> Result<Self> {
        Self::new(PolicyKind::Exp3, gamma)
    }

    /// A fresh repeated-game learner over `k` actions.
    pub fn learner(&self, k: usize) -> Box<dyn Learner + Send> {
        match self.kind {
            PolicyKind::RegretMatching => Box::new(RegretMatcher::new(k, self.gamma)),
            PolicyKind::Exp3 => Box::new(Exp3Learner::new(k, self.gamma)),
        }
    }
}

/// Elementwise `gamma / k + (1 - gamma) * base`.
pub fn mix_exploration(base: &[f64], gamma: f64) -> MixedStrategy {
    let mut out = base.to_vec();
    mix_in_place(&mut out, gamma);
    MixedStrategy::from_vec_unchecked(out)
}

pub(crate) fn mix_in_place(probs: &mut [f64], gamma: f64) {
    let floor = gamma / probs.len() as f64;
    for p in probs.iter_mut() {
        *p = floor + (1.0 - gamma) * *p;
    }
}

fn add_assign(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    Ok(())
}

fn average_of(strategy_sum: &[f64], iterations: u64) -> Result<MixedStrategy> {
    if iterations == 0 {
        return Err(Error::NoIterations);
    }
    Ok(MixedStrategy::from_weights(strategy_sum))
}

/// Cumulative regrets of one player at one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretMatchingState {
    regrets: Vec<f64>,
    strategy_sum: Vec<f64>,
    iterations: u64,
}

impl RegretMatchingState {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "regret matching needs at least one action");
        RegretMatchingState {
            regrets: vec![0.0; k],
            strategy_sum: vec![0.0; k],
            iterations: 0,
        }
    }

    pub fn with_regrets(regrets: Vec<f64>) -> Self {
        let k = regrets.len();
        RegretMatchingState {
            regrets,
            ..Self::new(k)
        }
    }

    pub fn num_actions(&self) -> usize {
        self.regrets.len()
    }

    pub fn regrets(&self) -> &[f64] {
        &self.regrets
    }

    pub fn strategy_sum(&self) -> &[f64] {
        &self.strategy_sum
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Positive regrets normalized, or uniform when none is positive. This is the
    /// unmixed strategy.
    pub fn strategy(&self) -> MixedStrategy {
        let mut out = vec![0.0; self.regrets.len()];
        self.fill_strategy(&mut out);
        MixedStrategy::from_vec_unchecked(out)
    }

    pub(crate) fn fill_strategy(&self, out: &mut [f64]) {
        let total: f64 = self.regrets.iter().map(|r| r.max(0.0)).sum();
        if total > 0.0 {
            for (o, r) in out.iter_mut().zip(&self.regrets) {
                *o = r.max(0.0) / total;
            }
        } else {
            out.fill(1.0 / self.regrets.len() as f64);
        }
    }

    /// Adds `alternative_values[i] - realized` to every regret and records the
    /// strategy that was actually played.
    pub fn update(&mut self, alternative_values: &[f64], realized: f64, played: &[f64]) -> Result<()> {
        check_len(self.regrets.len(), alternative_values.len())?;
        check_len(self.regrets.len(), played.len())?;
        for (r, x) in self.regrets.iter_mut().zip(alternative_values) {
            *r += x - realized;
        }
        add_assign(&mut self.strategy_sum, played);
        self.iterations += 1;
        Ok(())
    }

    pub fn average_strategy(&self) -> Result<MixedStrategy> {
        average_of(&self.strategy_sum, self.iterations)
    }
}

/// Importance-weighted reward sums of one player at one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State {
    reward_sums: Vec<f64>,
    visit_counts: Vec<u64>,
    strategy_sum: Vec<f64>,
    iterations: u64,
}

impl Exp3State {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "exp3 needs at least one action");
        Exp3State {
            reward_sums: vec![0.0; k],
            visit_counts: vec![0; k],
            strategy_sum: vec![0.0; k],
            iterations: 0,
        }
    }

    pub fn with_reward_sums(reward_sums: Vec<f64>) -> Self {
        let k = reward_sums.len();
        Exp3State {
            reward_sums,
            ..Self::new(k)
        }
    }

    pub fn num_actions(&self) -> usize {
        self.reward_sums.len()
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    pub fn strategy_sum(&self) -> &[f64] {
        &self.strategy_sum
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Sampling distribution with `eta = gamma / k`; exploration is included.
    pub fn strategy(&self, gamma: f64) -> MixedStrategy {
        let mut out = vec![0.0; self.reward_sums.len()];
        self.fill_strategy(gamma, &mut out);
        MixedStrategy::from_vec_unchecked(out)
    }

    pub(crate) fn fill_strategy(&self, gamma: f64, out: &mut [f64]) {
        let k = self.reward_sums.len() as f64;
        let eta = gamma / k;
        // weights are shifted by the maximum so the largest exponent is exactly 0
        let max = self
            .reward_sums
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, x) in out.iter_mut().zip(&self.reward_sums) {
            *o = (eta * (x - max)).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o = (1.0 - gamma) * *o / total + gamma / k;
        }
    }

    /// `x[chosen] += payoff / prob_used`.
    pub fn update(&mut self, chosen: usize, payoff: f64, prob_used: f64, played: &[f64]) -> Result<()> {
        check_len(self.reward_sums.len(), played.len())?;
        if chosen >= self.reward_sums.len() {
            return Err(invalid(format!("action {chosen} out of range")));
        }
        if prob_used.is_nan() || prob_used <= 0.0 {
            return Err(invalid(format!("sampling probability must be positive, got {prob_used}")));
        }
        self.reward_sums[chosen] += payoff / prob_used;
        self.visit_counts[chosen] += 1;
        add_assign(&mut self.strategy_sum, played);
        self.iterations += 1;
        Ok(())
    }

    pub fn average_strategy(&self) -> Result<MixedStrategy> {
        average_of(&self.strategy_sum, self.iterations)
    }
}

/// Per-node, per-player selection state inside the search tree.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyState {
    RegretMatching(RegretMatchingState),
    Exp3(Exp3State),
    /// Plays a fixed distribution and never learns.
    Fixed {
        strategy: MixedStrategy,
        strategy_sum: Vec<f64>,
        iterations: u64,
    },
}

impl PolicyState {
    pub fn new(kind: PolicyKind, k: usize) -> Self {
        match kind {
            PolicyKind::RegretMatching => PolicyState::RegretMatching(RegretMatchingState::new(k)),
            PolicyKind::Exp3 => PolicyState::Exp3(Exp3State::new(k)),
        }
    }

    pub fn fixed(strategy: MixedStrategy) -> Self {
        let k = strategy.len();
        PolicyState::Fixed {
            strategy,
            strategy_sum: vec![0.0; k],
            iterations: 0,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            PolicyState::RegretMatching(s) => s.num_actions(),
            PolicyState::Exp3(s) => s.num_actions(),
            PolicyState::Fixed { strategy, .. } => strategy.len(),
        }
    }

    /// Writes the distribution actions are sampled from, exploration included.
    pub fn fill_sampling(&self, gamma: f64, out: &mut [f64]) {
        match self {
            PolicyState::RegretMatching(s) => {
                s.fill_strategy(out);
                mix_in_place(out, gamma);
            }
            PolicyState::Exp3(s) => s.fill_strategy(gamma, out),
            PolicyState::Fixed { strategy, .. } => out.copy_from_slice(strategy),
        }
    }

    pub fn sampling_strategy(&self, gamma: f64) -> MixedStrategy {
        let mut out = vec![0.0; self.num_actions()];
        self.fill_sampling(gamma, &mut out);
        MixedStrategy::from_vec_unchecked(out)
    }

    /// Applies one update. `alternatives[a]` is the payoff the player would have
    /// received with action `a`; only regret matching reads entries other than
    /// `chosen`. `played` is the distribution `chosen` was drawn from.
    pub(crate) fn update(&mut self, chosen: usize, alternatives: &[f64], played: &[f64]) -> Result<()> {
        let realized = alternatives[chosen];
        match self {
            PolicyState::RegretMatching(s) => s.update(alternatives, realized, played),
            PolicyState::Exp3(s) => s.update(chosen, realized, played[chosen], played),
            PolicyState::Fixed {
                strategy_sum,
                iterations,
                ..
            } => {
                add_assign(strategy_sum, played);
                *iterations += 1;
                Ok(())
            }
        }
    }

    pub fn average_strategy(&self) -> Result<MixedStrategy> {
        match self {
            PolicyState::RegretMatching(s) => s.average_strategy(),
            PolicyState::Exp3(s) => s.average_strategy(),
            PolicyState::Fixed {
                strategy_sum,
                iterations,
                ..
            } => average_of(strategy_sum, *iterations),
        }
    }
}

/// One decision of a repeated-game learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    /// The distribution `action` was drawn from.
    pub probs: MixedStrategy,
    /// Whether an exploration wrapper took this step over.
    pub explored: bool,
}

/// A player in a repeated matrix game.
///
/// `update` receives the payoff of every own action against the opponent's
/// realized action. Full-information learners use the whole vector, bandit
/// learners only `payoffs[choice.action]`.
pub trait Learner {
    fn num_actions(&self) -> usize;

    /// The distribution the next action would be drawn from.
    fn strategy(&self) -> MixedStrategy;

    fn choose(&mut self, rng: &mut dyn RngCore) -> Choice {
        let probs = self.strategy();
        let action = sample_index(&probs, rng);
        Choice {
            action,
            probs,
            explored: false,
        }
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()>;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }

    fn strategy(&self) -> MixedStrategy {
        (**self).strategy()
    }

    fn choose(&mut self, rng: &mut dyn RngCore) -> Choice {
        (**self).choose(rng)
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()> {
        (**self).update(choice, payoffs)
    }
}

/// Regret matching mixed with `gamma`-uniform exploration, full-information feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretMatcher {
    pub state: RegretMatchingState,
    pub gamma: f64,
}

impl RegretMatcher {
    pub fn new(k: usize, gamma: f64) -> Self {
        RegretMatcher {
            state: RegretMatchingState::new(k),
            gamma,
        }
    }
}

impl Learner for RegretMatcher {
    fn num_actions(&self) -> usize {
        self.state.num_actions()
    }

    fn strategy(&self) -> MixedStrategy {
        mix_exploration(&self.state.strategy(), self.gamma)
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()> {
        check_len(self.num_actions(), payoffs.len())?;
        self.state.update(payoffs, payoffs[choice.action], &choice.probs)
    }
}

/// Exp3 with bandit feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Learner {
    pub state: Exp3State,
    pub gamma: f64,
}

impl Exp3Learner {
    pub fn new(k: usize, gamma: f64) -> Self {
        Exp3Learner {
            state: Exp3State::new(k),
            gamma,
        }
    }
}

impl Learner for Exp3Learner {
    fn num_actions(&self) -> usize {
        self.state.num_actions()
    }

    fn strategy(&self) -> MixedStrategy {
        self.state.strategy(self.gamma)
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()> {
        check_len(self.num_actions(), payoffs.len())?;
        let a = choice.action;
        self.state.update(a, payoffs[a], choice.probs[a], &choice.probs)
    }
}

/// Always plays the same distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedLearner(pub MixedStrategy);

impl Learner for FixedLearner {
    fn num_actions(&self) -> usize {
        self.0.len()
    }

    fn strategy(&self) -> MixedStrategy {
        self.0.clone()
    }

    fn update(&mut self, _choice: &Choice, _payoffs: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// With probability `gamma` plays uniformly and skips the inner update;
/// otherwise delegates to the inner learner.
#[derive(Debug, Clone)]
pub struct GuaranteedExploration<L> {
    inner: L,
    gamma: f64,
    pending: Option<Choice>,
    explored_steps: u64,
    steps: u64,
}

impl<L: Learner> GuaranteedExploration<L> {
    pub fn new(inner: L, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(GuaranteedExploration {
            inner,
            gamma,
            pending: None,
            explored_steps: 0,
            steps: 0,
        })
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn explored_steps(&self) -> u64 {
        self.explored_steps
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

impl<L: Learner> Learner for GuaranteedExploration<L> {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn strategy(&self) -> MixedStrategy {
        mix_exploration(&self.inner.strategy(), self.gamma)
    }

    fn choose(&mut self, rng: &mut dyn RngCore) -> Choice {
        self.steps += 1;
        let probs = self.strategy();
        if rng.random::<f64>() < self.gamma {
            self.explored_steps += 1;
            self.pending = None;
            Choice {
                action: rng.random_range(0..self.num_actions()),
                probs,
                explored: true,
            }
        } else {
            let inner = self.inner.choose(rng);
            let action = inner.action;
            self.pending = Some(inner);
            Choice {
                action,
                probs,
                explored: false,
            }
        }
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()> {
        match self.pending.take() {
            Some(inner) if !choice.explored => self.inner.update(&inner, payoffs),
            _ => Ok(()),
        }
    }
}

/// Exploration times of [`ScheduledExploration`].
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `t = 2, 4, 8, ...`
    PowersOfTwo,
    /// An explicit strictly increasing list of step numbers (1-based).
    Times(Vec<u64>),
}

/// Explores uniformly exactly at the scheduled steps without touching the inner
/// learner; behaves as the inner learner everywhere else.
#[derive(Debug, Clone)]
pub struct ScheduledExploration<L> {
    inner: L,
    schedule: Schedule,
    next_pos: usize,
    next_time: Option<u64>,
    step: u64,
    pending: Option<Choice>,
}

impl<L: Learner> ScheduledExploration<L> {
    pub fn new(inner: L, schedule: Schedule) -> Result<Self> {
        let next_time = match &schedule {
            Schedule::PowersOfTwo => Some(2),
            Schedule::Times(times) => {
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("exploration schedule must be strictly increasing"));
                }
                if times.first() == Some(&0) {
                    return Err(invalid("steps are numbered from 1"));
                }
                times.first().copied()
            }
        };
        Ok(ScheduledExploration {
            inner,
            schedule,
            next_pos: 1,
            next_time,
            step: 0,
            pending: None,
        })
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    fn advance(&mut self) {
        self.next_time = match &self.schedule {
            Schedule::PowersOfTwo => self.next_time.and_then(|t| t.checked_mul(2)),
            Schedule::Times(times) => {
                let t = times.get(self.next_pos).copied();
                self.next_pos += 1;
                t
            }
        };
    }
}

impl<L: Learner> Learner for ScheduledExploration<L> {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn strategy(&self) -> MixedStrategy {
        if self.next_time == Some(self.step + 1) {
            MixedStrategy::uniform(self.num_actions())
        } else {
            self.inner.strategy()
        }
    }

    fn choose(&mut self, rng: &mut dyn RngCore) -> Choice {
        self.step += 1;
        if self.next_time == Some(self.step) {
            self.advance();
            self.pending = None;
            let k = self.num_actions();
            Choice {
                action: rng.random_range(0..k),
                probs: MixedStrategy::uniform(k),
                explored: true,
            }
        } else {
            let choice = self.inner.choose(rng);
            self.pending = Some(choice.clone());
            choice
        }
    }

    fn update(&mut self, choice: &Choice, payoffs: &[f64]) -> Result<()> {
        match self.pending.take() {
            Some(inner) if !choice.explored => self.inner.update(&inner, payoffs),
            _ => Ok(()),
        }
    }
}
