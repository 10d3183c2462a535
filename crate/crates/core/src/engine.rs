//! The simultaneous-move MCTS simulation loop.
//!
//! One simulation walks the tree from the root. A node that still has joint
//! actions never selected before expands one of them (chosen uniformly among
//! the remaining ones), rolls out uniformly from the new leaf, updates its own
//! policies and returns. Otherwise both players select with their policies, the
//! simulation recurses, and the node's reward sum `X`, visit count `n` and
//! policies are updated on the way back.
//!
//! Tree nodes are stored by game [`NodeId`]: a state is in the tree iff its
//! slot is occupied.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::game::{GameSpec, NodeId};
use crate::policy::{PolicyConfig, PolicyKind, PolicyState};
use crate::rng::{rng_from_seed, SimRng};
use crate::solver::NodeStat;
use crate::strategy::{BehaviorStrategy, MixedStrategy, Player, Profile};

/// Value sent back to the parent after a node is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RetVal {
    /// The simulation's own outcome `u1`.
    Sample,
    /// The node's running mean `X / n`.
    Mean,
}

/// How a sibling child enters the regret update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CounterfactualMode {
    /// The child's mean `X / n`.
    ChildMean,
    /// The child's raw reward sum `X`.
    ChildSum,
}

/// The four named search variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Rm,
    Rmm,
    Exp3,
    Exp3m,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rm, Variant::Rmm, Variant::Exp3, Variant::Exp3m];

    pub fn kind(self) -> PolicyKind {
        match self {
            Variant::Rm | Variant::Rmm => PolicyKind::RegretMatching,
            Variant::Exp3 | Variant::Exp3m => PolicyKind::Exp3,
        }
    }

    pub fn retval(self) -> RetVal {
        match self {
            Variant::Rm | Variant::Exp3 => RetVal::Sample,
            Variant::Rmm | Variant::Exp3m => RetVal::Mean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rm => "rm",
            Variant::Rmm => "rmm",
            Variant::Exp3 => "exp3",
            Variant::Exp3m => "exp3m",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown policy variant '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub retval: RetVal,
    pub policies: [PolicyConfig; 2],
    pub counterfactual: CounterfactualMode,
    /// When set, both players play these fixed strategies instead of learning.
    pub scripted: Option<Arc<Profile>>,
    pub seed: u64,
}

impl EngineConfig {
    /// Both players use the same rule and exploration rate.
    pub fn variant(variant: Variant, gamma: f64, seed: u64) -> Result<Self> {
        let policy = PolicyConfig::new(variant.kind(), gamma)?;
        Ok(EngineConfig {
            retval: variant.retval(),
            policies: [policy, policy],
            counterfactual: CounterfactualMode::ChildMean,
            scripted: None,
            seed,
        })
    }

    /// Plays `profile` at every state; learning is switched off.
    pub fn scripted(profile: Profile, retval: RetVal, seed: u64) -> Self {
        let policy = PolicyConfig {
            kind: PolicyKind::RegretMatching,
            gamma: 0.5,
        };
        EngineConfig {
            retval,
            policies: [policy, policy],
            counterfactual: CounterfactualMode::ChildMean,
            scripted: Some(Arc::new(profile)),
            seed,
        }
    }
}

/// `u1` for [`RetVal::Sample`], `X / n` for [`RetVal::Mean`].
pub fn retval(u1: f64, reward_sum: f64, visits: u64, variant: RetVal) -> Result<f64> {
    if visits == 0 {
        return Err(Error::NoIterations);
    }
    Ok(match variant {
        RetVal::Sample => u1,
        RetVal::Mean => reward_sum / visits as f64,
    })
}

/// Search statistics of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Cumulative reward `X` of player one.
    pub reward_sum: f64,
    /// Visit count `n`.
    pub visits: u64,
    /// Policy updates applied at this node (expansion and selection phases).
    pub updates: u64,
    /// Row-major `t_ij` over the updates.
    pub joint_counts: Vec<u64>,
    /// Marginal `t_i` (player one) and `t_j` (player two).
    pub action_counts: [Vec<u64>; 2],
    /// `None` for terminals.
    pub policies: Option<[PolicyState; 2]>,
    unexpanded: Vec<u32>,
}

impl TreeNode {
    pub fn mean(&self) -> Option<f64> {
        (self.visits > 0).then(|| self.reward_sum / self.visits as f64)
    }

    /// Joint actions not selected yet, as row-major indices.
    pub fn unexpanded(&self) -> &[u32] {
        &self.unexpanded
    }

    pub fn policy(&self, player: Player) -> Option<&PolicyState> {
        self.policies.as_ref().map(|p| &p[player.index()])
    }
}

/// An SM-MCTS search tree over a borrowed game.
#[derive(Debug, Clone)]
pub struct SearchTree<'g> {
    game: &'g GameSpec,
    cfg: EngineConfig,
    nodes: Vec<Option<TreeNode>>,
    size: usize,
    simulations: u64,
    buf: Vec<f64>,
    spare: Vec<Vec<f64>>,
}

impl<'g> SearchTree<'g> {
    /// A tree holding only the root.
    pub fn new(game: &'g GameSpec, cfg: EngineConfig) -> Self {
        let mut tree = SearchTree {
            game,
            cfg,
            nodes: vec![None; game.num_nodes()],
            size: 0,
            simulations: 0,
            buf: Vec::new(),
            spare: Vec::new(),
        };
        tree.insert(game.root());
        tree
    }

    pub fn game(&self) -> &'g GameSpec {
        self.game
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes[id].as_ref()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes[id].is_some()
    }

    /// Number of states in the tree.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn simulations(&self) -> u64 {
        self.simulations
    }

    /// Whether every state of the game has been added.
    pub fn is_complete(&self) -> bool {
        self.size == self.game.num_nodes()
    }

    pub fn root_mean(&self) -> Option<f64> {
        self.node(self.game.root()).and_then(TreeNode::mean)
    }

    /// `(node, X, n)` for every state in the tree.
    pub fn node_stats(&self) -> Vec<NodeStat> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(node, n)| {
                n.as_ref().map(|n| NodeStat {
                    node,
                    reward_sum: n.reward_sum,
                    visits: n.visits,
                })
            })
            .collect()
    }

    fn insert(&mut self, id: NodeId) {
        let (m, n) = self.game.actions(id);
        let policies = (!self.game.is_terminal(id)).then(|| match &self.cfg.scripted {
            Some(profile) => [
                PolicyState::fixed(scripted_strategy(&profile.p1, id, m)),
                PolicyState::fixed(scripted_strategy(&profile.p2, id, n)),
            ],
            None => [
                PolicyState::new(self.cfg.policies[0].kind, m),
                PolicyState::new(self.cfg.policies[1].kind, n),
            ],
        });
        self.nodes[id] = Some(TreeNode {
            reward_sum: 0.0,
            visits: 0,
            updates: 0,
            joint_counts: vec![0; m * n],
            action_counts: [vec![0; m], vec![0; n]],
            policies,
            unexpanded: (0..(m * n) as u32).collect(),
        });
        self.size += 1;
    }

    /// Runs one simulation from the root and returns its outcome for player one.
    pub fn run_simulation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.simulations += 1;
        self.simulate(self.game.root(), rng)
    }

    fn simulate<R: Rng + ?Sized>(&mut self, h: NodeId, rng: &mut R) -> f64 {
        let game = self.game;
        if let Some(u) = game.utility(h) {
            return u;
        }
        let (m, n) = game.actions(h);
        let node = self.nodes[h].as_mut().expect("simulation only visits tree nodes");
        if !node.unexpanded.is_empty() {
            let pick = rng.random_range(0..node.unexpanded.len());
            let joint = node.unexpanded.swap_remove(pick) as usize;
            let (i, j) = (joint / n, joint % n);
            let child = game.child(h, i, j);
            self.insert(child);
            let u = rollout(game, child, rng);
            let c = self.nodes[child].as_mut().expect("just inserted");
            c.reward_sum += u;
            c.visits += 1;
            let (x, cn) = (c.reward_sum, c.visits);
            let (p1, p2) = self.sampling(h, m, n);
            self.update(h, i, j, u, &p1, &p2);
            self.recycle(p1, p2);
            return retval(u, x, cn, self.cfg.retval).expect("child visited");
        }
        let (p1, p2) = self.sampling(h, m, n);
        let i = crate::strategy::sample_index(&p1, rng);
        let j = crate::strategy::sample_index(&p2, rng);
        let u = self.simulate(game.child(h, i, j), rng);
        let node = self.nodes[h].as_mut().expect("tree node");
        node.reward_sum += u;
        node.visits += 1;
        let (x, hn) = (node.reward_sum, node.visits);
        self.update(h, i, j, u, &p1, &p2);
        self.recycle(p1, p2);
        retval(u, x, hn, self.cfg.retval).expect("node visited")
    }

    fn sampling(&mut self, h: NodeId, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut p1 = self.spare.pop().unwrap_or_default();
        let mut p2 = self.spare.pop().unwrap_or_default();
        p1.resize(m, 0.0);
        p2.resize(n, 0.0);
        let policies = self.nodes[h].as_ref().and_then(|n| n.policies.as_ref()).expect("inner");
        policies[0].fill_sampling(self.cfg.policies[0].gamma, &mut p1);
        policies[1].fill_sampling(self.cfg.policies[1].gamma, &mut p2);
        (p1, p2)
    }

    fn recycle(&mut self, mut p1: Vec<f64>, mut p2: Vec<f64>) {
        p1.clear();
        p2.clear();
        self.spare.push(p1);
        self.spare.push(p2);
    }

    /// Counterfactual payoffs of `player` at `h` given the opponent's sampled
    /// action. The entry of the selected action is the realized outcome; every
    /// other entry comes from the sibling child's statistics, or equals the
    /// realized outcome when that child has not been visited. Player two's
    /// entries are `1 - x`.
    pub fn counterfactual_vector(
        &self,
        h: NodeId,
        player: Player,
        opponent_action: usize,
        realized_u1: f64,
        selected: usize,
    ) -> Vec<f64> {
        let mut out = Vec::new();
        self.fill_counterfactual(h, player, opponent_action, realized_u1, selected, &mut out);
        out
    }

    fn fill_counterfactual(
        &self,
        h: NodeId,
        player: Player,
        opponent_action: usize,
        realized_u1: f64,
        selected: usize,
        out: &mut Vec<f64>,
    ) {
        let (m, n) = self.game.actions(h);
        let k = match player {
            Player::One => m,
            Player::Two => n,
        };
        out.clear();
        for a in 0..k {
            let (i, j) = match player {
                Player::One => (a, opponent_action),
                Player::Two => (opponent_action, a),
            };
            let x = if a == selected {
                realized_u1
            } else {
                let child = self.game.child(h, i, j);
                match self.nodes[child].as_ref() {
                    Some(c) if c.visits > 0 => match self.cfg.counterfactual {
                        CounterfactualMode::ChildMean => c.reward_sum / c.visits as f64,
                        CounterfactualMode::ChildSum => match player {
                            Player::One => c.reward_sum,
                            Player::Two => 1.0 - (c.visits as f64 - c.reward_sum),
                        },
                    },
                    _ => realized_u1,
                }
            };
            out.push(match player {
                Player::One => x,
                Player::Two => 1.0 - x,
            });
        }
    }

    fn update(&mut self, h: NodeId, i: usize, j: usize, u: f64, p1: &[f64], p2: &[f64]) {
        let mut buf = std::mem::take(&mut self.buf);
        self.fill_counterfactual(h, Player::One, j, u, i, &mut buf);
        let node = self.nodes[h].as_mut().expect("tree node");
        let policies = node.policies.as_mut().expect("inner");
        policies[0].update(i, &buf, p1).expect("sizes match");
        self.fill_counterfactual(h, Player::Two, i, u, j, &mut buf);
        let node = self.nodes[h].as_mut().expect("tree node");
        let policies = node.policies.as_mut().expect("inner");
        policies[1].update(j, &buf, p2).expect("sizes match");
        let n = node.action_counts[1].len();
        node.joint_counts[i * n + j] += 1;
        node.action_counts[0][i] += 1;
        node.action_counts[1][j] += 1;
        node.updates += 1;
        self.buf = buf;
    }

    /// Per-state strategy extracted from the search statistics. States that are
    /// not in the tree or were never updated get the uniform strategy and are
    /// listed in [`ExtractedProfile::filled`].
    pub fn extract_profile(&self, kind: ProfileKind) -> ExtractedProfile {
        let game = self.game;
        let mut filled = Vec::new();
        let mut p1 = BehaviorStrategy::empty(game);
        let mut p2 = BehaviorStrategy::empty(game);
        for id in game.inner_nodes() {
            let (m, n) = game.actions(id);
            match self.nodes[id].as_ref().filter(|node| node.updates > 0) {
                Some(node) => {
                    let (s1, s2) = match kind {
                        ProfileKind::EmpiricalFrequencies => (
                            frequencies(&node.action_counts[0], node.updates),
                            frequencies(&node.action_counts[1], node.updates),
                        ),
                        ProfileKind::AverageStrategy => {
                            let pol = node.policies.as_ref().expect("inner");
                            (
                                pol[0].average_strategy().expect("updated"),
                                pol[1].average_strategy().expect("updated"),
                            )
                        }
                    };
                    p1.set(id, s1);
                    p2.set(id, s2);
                }
                None => {
                    filled.push(id);
                    p1.set(id, MixedStrategy::uniform(m));
                    p2.set(id, MixedStrategy::uniform(n));
                }
            }
        }
        ExtractedProfile {
            profile: Profile { p1, p2 },
            filled,
        }
    }

    /// Strategy of player one only, empirical frequencies. Cheaper than a full
    /// profile when only exploitability is needed.
    pub fn empirical_strategy(&self, player: Player) -> BehaviorStrategy {
        let game = self.game;
        BehaviorStrategy::from_fn(game, |id, m, n| {
            let k = match player {
                Player::One => m,
                Player::Two => n,
            };
            match self.nodes[id].as_ref().filter(|node| node.updates > 0) {
                Some(node) => frequencies(&node.action_counts[player.index()], node.updates),
                None => MixedStrategy::uniform(k),
            }
        })
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            simulations: self.simulations,
            tree_size: self.size,
            root_mean: self.root_mean(),
            visits: self
                .nodes
                .iter()
                .enumerate()
                .filter_map(|(id, n)| n.as_ref().map(|n| (id, n.visits)))
                .collect(),
        }
    }
}

fn scripted_strategy(strategy: &BehaviorStrategy, id: NodeId, k: usize) -> MixedStrategy {
    strategy
        .get(id)
        .filter(|s| s.len() == k)
        .cloned()
        .unwrap_or_else(|| MixedStrategy::uniform(k))
}

fn frequencies(counts: &[u64], total: u64) -> MixedStrategy {
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    MixedStrategy::from_weights(&weights)
}

/// Plays uniformly random joint actions from `state` to a terminal.
pub fn rollout<R: Rng + ?Sized>(game: &GameSpec, state: NodeId, rng: &mut R) -> f64 {
    let mut h = state;
    loop {
        if let Some(u) = game.utility(h) {
            return u;
        }
        let (m, n) = game.actions(h);
        let joint = rng.random_range(0..m * n);
        h = game.children(h)[joint];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Action counts `t_i / t`.
    EmpiricalFrequencies,
    /// Policy averages of the emitted sampling distributions.
    AverageStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedProfile {
    pub profile: Profile,
    /// Inner states that received the uniform fill-in.
    pub filled: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub simulations: u64,
    pub tree_size: usize,
    pub root_mean: Option<f64>,
    /// `(node, n)` for every state in the tree.
    pub visits: Vec<(NodeId, u64)>,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunResult<'g> {
    pub tree: SearchTree<'g>,
    pub profile: ExtractedProfile,
    pub diagnostics: Diagnostics,
}

/// Runs `iterations` simulations with a generator seeded from `cfg.seed`.
pub fn run<'g>(game: &'g GameSpec, cfg: EngineConfig, iterations: u64) -> Result<RunResult<'g>> {
    run_with_checkpoints(game, cfg, iterations, &[], |_, _| {})
}

/// Like [`run`], calling `on_checkpoint(t, tree)` after simulation `t` for every
/// `t` in `checkpoints`.
pub fn run_with_checkpoints<'g>(
    game: &'g GameSpec,
    cfg: EngineConfig,
    iterations: u64,
    checkpoints: &[u64],
    mut on_checkpoint: impl FnMut(u64, &SearchTree<'g>),
) -> Result<RunResult<'g>> {
    if iterations == 0 {
        return Err(Error::NoIterations);
    }
    let mut rng: SimRng = rng_from_seed(cfg.seed);
    let mut tree = SearchTree::new(game, cfg);
    let mut next = checkpoints.iter().copied().filter(|&c| c <= iterations).peekable();
    for t in 1..=iterations {
        tree.run_simulation(&mut rng);
        while next.peek() == Some(&t) {
            next.next();
            on_checkpoint(t, &tree);
        }
    }
    let profile = tree.extract_profile(ProfileKind::EmpiricalFrequencies);
    let diagnostics = tree.diagnostics();
    Ok(RunResult {
        tree,
        profile,
        diagnostics,
    })
}
