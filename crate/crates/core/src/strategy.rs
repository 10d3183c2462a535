//! Mixed and behavioral strategies.

use std::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{GameSpec, NodeId};

/// Tolerance on the total mass of a probability vector.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// The two players. Player one is the row (maximizing) player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// A probability distribution over a finite action set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    /// Validates non-negativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty action set".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("mass {total}")));
        }
        Ok(MixedStrategy(probs))
    }

    /// Wraps a vector the caller has already normalized.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        MixedStrategy(probs)
    }

    /// Normalizes non-negative weights; zero total mass yields the uniform strategy.
    pub fn from_weights(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            MixedStrategy(weights.iter().map(|w| w / total).collect())
        } else {
            Self::uniform(weights.len())
        }
    }

    pub fn uniform(k: usize) -> Self {
        MixedStrategy(vec![1.0 / k as f64; k])
    }

    pub fn pure(k: usize, action: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[action] = 1.0;
        MixedStrategy(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Draws an action index by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.0, rng)
    }
}

impl Deref for MixedStrategy {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Samples an index from a probability slice. Rounding slack falls on the last
/// action with positive mass.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// A behavioral strategy of one player: one distribution per inner state,
/// indexed by [`NodeId`]. Terminal slots stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStrategy {
    per_node: Vec<Option<MixedStrategy>>,
}

impl BehaviorStrategy {
    pub fn empty(game: &GameSpec) -> Self {
        BehaviorStrategy {
            per_node: vec![None; game.num_nodes()],
        }
    }

    /// The uniform strategy of `player` at every inner state.
    pub fn uniform(game: &GameSpec, player: Player) -> Self {
        Self::from_fn(game, |_, rows, cols| {
            MixedStrategy::uniform(match player {
                Player::One => rows,
                Player::Two => cols,
            })
        })
    }

    /// Builds a strategy by calling `f(node, rows, cols)` at every inner state.
    pub fn from_fn(
        game: &GameSpec,
        mut f: impl FnMut(NodeId, usize, usize) -> MixedStrategy,
    ) -> Self {
        let mut s = Self::empty(game);
        for id in game.inner_nodes() {
            let (rows, cols) = game.actions(id);
            s.per_node[id] = Some(f(id, rows, cols));
        }
        s
    }

    pub fn get(&self, node: NodeId) -> Option<&MixedStrategy> {
        self.per_node.get(node).and_then(Option::as_ref)
    }

    pub fn set(&mut self, node: NodeId, strategy: MixedStrategy) {
        self.per_node[node] = Some(strategy);
    }

    /// Strategy at `node`, checked against the expected action count.
    pub(crate) fn require(&self, player: Player, node: NodeId, k: usize) -> Result<&[f64]> {
        let s = self.get(node).ok_or(Error::MissingStrategy {
            player: player.number(),
            node,
        })?;
        if s.len() != k {
            return Err(Error::StrategyShape {
                node,
                expected: k,
                found: s.len(),
            });
        }
        Ok(s.probs())
    }

    /// Mixes every node's distribution with the uniform one:
    /// `gamma / k + (1 - gamma) * sigma`.
    pub fn mix_uniform(&self, gamma: f64) -> Self {
        BehaviorStrategy {
            per_node: self
                .per_node
                .iter()
                .map(|s| s.as_ref().map(|s| crate::policy::mix_exploration(s, gamma)))
                .collect(),
        }
    }
}

/// Strategies for both players.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub p1: BehaviorStrategy,
    pub p2: BehaviorStrategy,
}

impl Profile {
    pub fn uniform(game: &GameSpec) -> Self {
        Profile {
            p1: BehaviorStrategy::uniform(game, Player::One),
            p2: BehaviorStrategy::uniform(game, Player::Two),
        }
    }

    pub fn player(&self, player: Player) -> &BehaviorStrategy {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
        }
    }
}
