//! Zero-sum simultaneous-move games with perfect information.
//!
//! A game is an explicit tree of stacked matrix games. Every inner state holds
//! an `m x n` grid of successors; terminals carry player one's utility in
//! `[0, 1]` and player two receives `1 - u`.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::strategy::{Player, Profile};

/// Index of a state inside [`GameSpec`]. The root is always `0` and ids follow
/// pre-order, so terminals are numbered left to right.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Terminal {
        utility: f64,
    },
    Inner {
        rows: usize,
        cols: usize,
        /// Row-major: the successor for joint action `(i, j)` is `children[i * cols + j]`.
        children: Vec<NodeId>,
    },
}

/// Owned recursive description of a game tree, used to build a [`GameSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeSpec {
    Terminal(f64),
    Inner {
        rows: usize,
        cols: usize,
        /// Row-major, `rows * cols` entries.
        children: Vec<TreeSpec>,
    },
}

/// An immutable, validated game tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    nodes: Vec<Node>,
    depths: Vec<usize>,
    terminals: Vec<NodeId>,
    depth: usize,
}

impl GameSpec {
    /// Builds and validates a game. The depth is that of the deepest inner state,
    /// counting the root as depth 1.
    pub fn from_tree(tree: &TreeSpec) -> Result<Self> {
        if matches!(tree, TreeSpec::Terminal(_)) {
            return Err(Error::TerminalRoot);
        }
        let mut game = GameSpec {
            nodes: Vec::new(),
            depths: Vec::new(),
            terminals: Vec::new(),
            depth: 0,
        };
        game.push(tree, 1)?;
        Ok(game)
    }

    fn push(&mut self, tree: &TreeSpec, depth: usize) -> Result<NodeId> {
        let id = self.nodes.len();
        match tree {
            TreeSpec::Terminal(u) => {
                if !(0.0..=1.0).contains(u) {
                    return Err(Error::UtilityOutOfRange { node: id, value: *u });
                }
                self.nodes.push(Node::Terminal { utility: *u });
                self.depths.push(depth);
                self.terminals.push(id);
            }
            TreeSpec::Inner {
                rows,
                cols,
                children,
            } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::EmptyActionSet {
                        node: id,
                        rows: *rows,
                        cols: *cols,
                    });
                }
                if children.len() != rows * cols {
                    return Err(Error::ChildCount {
                        node: id,
                        expected: rows * cols,
                        found: children.len(),
                    });
                }
                self.depth = self.depth.max(depth);
                self.nodes.push(Node::Inner {
                    rows: *rows,
                    cols: *cols,
                    children: Vec::new(),
                });
                self.depths.push(depth);
                let ids = children
                    .iter()
                    .map(|c| self.push(c, depth + 1))
                    .collect::<Result<Vec<_>>>()?;
                if let Node::Inner { children, .. } = &mut self.nodes[id] {
                    *children = ids;
                }
            }
        }
        Ok(id)
    }

    /// A depth-1 game consisting of a single matrix.
    pub fn from_matrix(matrix: &MatrixGame) -> Result<Self> {
        Self::from_tree(&TreeSpec::Inner {
            rows: matrix.rows(),
            cols: matrix.cols(),
            children: matrix.entries().iter().map(|&u| TreeSpec::Terminal(u)).collect(),
        })
    }

    pub fn to_tree(&self) -> TreeSpec {
        self.subtree(self.root())
    }

    fn subtree(&self, id: NodeId) -> TreeSpec {
        match &self.nodes[id] {
            Node::Terminal { utility } => TreeSpec::Terminal(*utility),
            Node::Inner {
                rows,
                cols,
                children,
            } => TreeSpec::Inner {
                rows: *rows,
                cols: *cols,
                children: children.iter().map(|&c| self.subtree(c)).collect(),
            },
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    /// Maximal depth `D` of an inner state (root at depth 1).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_inner(&self) -> usize {
        self.nodes.len() - self.terminals.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    /// Depth of a state; terminals sit one below their parent.
    pub fn node_depth(&self, id: NodeId) -> usize {
        self.depths[id]
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        matches!(self.nodes[id], Node::Terminal { .. })
    }

    /// Utility of a terminal, `None` for inner states.
    pub fn utility(&self, id: NodeId) -> Option<f64> {
        match self.nodes[id] {
            Node::Terminal { utility } => Some(utility),
            Node::Inner { .. } => None,
        }
    }

    /// Action counts `(m, n)`; `(0, 0)` for terminals.
    pub fn actions(&self, id: NodeId) -> (usize, usize) {
        match self.nodes[id] {
            Node::Inner { rows, cols, .. } => (rows, cols),
            Node::Terminal { .. } => (0, 0),
        }
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.nodes[id] {
            Node::Inner { children, .. } => children,
            Node::Terminal { .. } => &[],
        }
    }

    /// Successor under joint action `(i, j)`.
    pub fn child(&self, id: NodeId, i: usize, j: usize) -> NodeId {
        match &self.nodes[id] {
            Node::Inner { cols, children, .. } => children[i * cols + j],
            Node::Terminal { .. } => panic!("terminal node {id} has no children"),
        }
    }

    pub fn inner_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&id| !self.is_terminal(id))
    }

    /// Terminal ids in left-to-right order.
    pub fn terminals(&self) -> &[NodeId] {
        &self.terminals
    }

    pub fn terminal_utilities(&self) -> Vec<f64> {
        self.terminals
            .iter()
            .map(|&z| self.utility(z).expect("terminal"))
            .collect()
    }

    /// Same tree shape with new terminal utilities (left-to-right order).
    pub fn with_terminal_utilities(&self, utilities: &[f64]) -> Result<Self> {
        if utilities.len() != self.terminals.len() {
            return Err(Error::LengthMismatch {
                expected: self.terminals.len(),
                found: utilities.len(),
            });
        }
        let mut game = self.clone();
        for (&z, &u) in self.terminals.iter().zip(utilities) {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::UtilityOutOfRange { node: z, value: u });
            }
            game.nodes[z] = Node::Terminal { utility: u };
        }
        Ok(game)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GameFile {
            depth: self.depth,
            root: NodeRepr::from(&self.to_tree()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        let game = Self::from_tree(&file.root.try_into()?)?;
        if game.depth != file.depth {
            return Err(Error::DepthMismatch {
                declared: file.depth,
                actual: game.depth,
            });
        }
        Ok(game)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    depth: usize,
    root: NodeRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Terminal {
        terminal: f64,
    },
    Inner {
        rows: usize,
        cols: usize,
        children: Vec<Vec<NodeRepr>>,
    },
}

impl From<&TreeSpec> for NodeRepr {
    fn from(tree: &TreeSpec) -> Self {
        match tree {
            TreeSpec::Terminal(u) => NodeRepr::Terminal { terminal: *u },
            TreeSpec::Inner {
                rows,
                cols,
                children,
            } => NodeRepr::Inner {
                rows: *rows,
                cols: *cols,
                children: children
                    .chunks(*cols)
                    .map(|row| row.iter().map(NodeRepr::from).collect())
                    .collect(),
            },
        }
    }
}

impl TryFrom<NodeRepr> for TreeSpec {
    type Error = Error;

    fn try_from(repr: NodeRepr) -> Result<Self> {
        match repr {
            NodeRepr::Terminal { terminal } => Ok(TreeSpec::Terminal(terminal)),
            NodeRepr::Inner {
                rows,
                cols,
                children,
            } => {
                let found: usize = children.iter().map(Vec::len).sum();
                if children.len() != rows || children.iter().any(|r| r.len() != cols) {
                    return Err(Error::ChildCount {
                        node: 0,
                        expected: rows * cols,
                        found,
                    });
                }
                let children = children
                    .into_iter()
                    .flatten()
                    .map(TreeSpec::try_from)
                    .collect::<Result<Vec<_>>>()?;
                Ok(TreeSpec::Inner {
                    rows,
                    cols,
                    children,
                })
            }
        }
    }
}

/// A single-stage game; `payoff[i][j]` is player one's payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatrixGame {
    /// Entries must lie in `[0, 1]`.
    pub fn new(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self::from_rows_unbounded(payoff)?;
        if let Some((idx, &v)) = m
            .entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::UtilityOutOfRange { node: idx, value: v });
        }
        Ok(m)
    }

    /// Accepts any finite entries. Used for value matrices and shifted games.
    pub fn from_rows_unbounded(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let rows = payoff.len();
        let cols = payoff.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyActionSet { node: 0, rows, cols });
        }
        if payoff.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged payoff matrix"));
        }
        let entries: Vec<f64> = payoff.into_iter().flatten().collect();
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite payoff"));
        }
        Ok(MatrixGame {
            rows,
            cols,
            entries,
        })
    }

    pub(crate) fn from_flat(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        MatrixGame {
            rows,
            cols,
            entries,
        }
    }

    /// Uniform `[0, 1)` entries.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let entries = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        Self::from_flat(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `a * M + b` elementwise.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self::from_flat(
            self.rows,
            self.cols,
            self.entries.iter().map(|v| a * v + b).collect(),
        )
    }

    /// `sigma1^T M sigma2`.
    pub fn expected(&self, sigma1: &[f64], sigma2: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| sigma1[i] * self.row(i).iter().zip(sigma2).map(|(a, q)| a * q).sum::<f64>())
            .sum()
    }

    /// Best pure reply value of player one against `sigma2`.
    pub fn best_row_value(&self, sigma2: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(sigma2).map(|(a, q)| a * q).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best pure reply value of player two (minimizing player one's payoff).
    pub fn best_col_value(&self, sigma1: &[f64]) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| sigma1[i] * self.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Where terminal utilities of a generated game come from.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySource {
    Uniform,
    Discrete(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGameParams {
    pub depth: usize,
    /// Actions per player at every inner state.
    pub branching: usize,
    pub utilities: UtilitySource,
    pub seed: u64,
}

impl RandomGameParams {
    pub fn uniform(depth: usize, branching: usize, seed: u64) -> Self {
        RandomGameParams {
            depth,
            branching,
            utilities: UtilitySource::Uniform,
            seed,
        }
    }
}

/// Complete uniform tree with `branching` actions per player and utilities drawn
/// left to right from a stream seeded by `params.seed`.
pub fn generate_random_game(params: &RandomGameParams) -> Result<GameSpec> {
    if params.depth == 0 || params.branching == 0 {
        return Err(invalid("depth and branching must be at least 1"));
    }
    if let UtilitySource::Discrete(values) = &params.utilities {
        validate_utility_set(values)?;
    }
    let mut rng = rng_from_seed(params.seed);
    let mut draw = || match &params.utilities {
        UtilitySource::Uniform => rng.random::<f64>(),
        UtilitySource::Discrete(values) => values[rng.random_range(0..values.len())],
    };
    let tree = uniform_tree(params.depth, params.branching, &mut draw);
    GameSpec::from_tree(&tree)
}

fn uniform_tree(depth: usize, branching: usize, leaf: &mut impl FnMut() -> f64) -> TreeSpec {
    if depth == 0 {
        return TreeSpec::Terminal(leaf());
    }
    TreeSpec::Inner {
        rows: branching,
        cols: branching,
        children: (0..branching * branching)
            .map(|_| uniform_tree(depth - 1, branching, leaf))
            .collect(),
    }
}

fn validate_utility_set(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(invalid("utility set is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("utility {v} outside [0, 1]")));
    }
    Ok(())
}

/// Number of inner states and terminals of a complete uniform tree.
pub fn uniform_tree_size(depth: usize, branching: usize) -> (usize, usize) {
    let fan = branching * branching;
    let inner = (0..depth).map(|d| fan.pow(d as u32)).sum();
    (inner, fan.pow(depth as u32))
}

/// Seeded subsample request for [`enumerate_small_games`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleBudget {
    pub games: u64,
    pub seed: u64,
}

/// A lazy stream over utility assignments of a fixed tree shape.
#[derive(Debug, Clone)]
pub struct GameStream {
    template: GameSpec,
    utilities: Vec<f64>,
    total: u64,
    order: StreamOrder,
    pos: usize,
    next_full: u64,
}

#[derive(Debug, Clone)]
enum StreamOrder {
    Full,
    Sampled(Vec<u64>),
}

impl GameStream {
    /// Size of the full assignment space `|U|^terminals`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of games this stream yields.
    pub fn len(&self) -> u64 {
        match &self.order {
            StreamOrder::Full => self.total,
            StreamOrder::Sampled(idx) => idx.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The assignment with the given index: base-`|U|` digits, most significant
    /// digit on the leftmost terminal.
    pub fn game_at(&self, index: u64) -> GameSpec {
        let base = self.utilities.len() as u64;
        let t = self.template.terminals().len();
        let mut digits = vec![0.0; t];
        let mut rest = index;
        for slot in digits.iter_mut().rev() {
            *slot = self.utilities[(rest % base) as usize];
            rest /= base;
        }
        self.template
            .with_terminal_utilities(&digits)
            .expect("utilities validated")
    }

    /// Every index this stream yields, in order.
    pub fn indices(&self) -> Vec<u64> {
        match &self.order {
            StreamOrder::Full => (0..self.total).collect(),
            StreamOrder::Sampled(idx) => idx.clone(),
        }
    }

    /// Remaining `(index, game)` pairs.
    pub fn indexed(self) -> impl Iterator<Item = (u64, GameSpec)> {
        let mut stream = self;
        std::iter::from_fn(move || {
            let idx = stream.next_index()?;
            Some((idx, stream.game_at(idx)))
        })
    }

    fn next_index(&mut self) -> Option<u64> {
        match &self.order {
            StreamOrder::Full => {
                if self.next_full >= self.total {
                    return None;
                }
                self.next_full += 1;
                Some(self.next_full - 1)
            }
            StreamOrder::Sampled(idx) => {
                let i = *idx.get(self.pos)?;
                self.pos += 1;
                Some(i)
            }
        }
    }
}

impl Iterator for GameStream {
    type Item = GameSpec;

    fn next(&mut self) -> Option<GameSpec> {
        let idx = self.next_index()?;
        Some(self.game_at(idx))
    }
}

/// Streams every assignment of `utilities` to the terminals of the complete
/// `depth`/`branching` tree, or a seeded subsample without replacement.
pub fn enumerate_small_games(
    depth: usize,
    branching: usize,
    utilities: &[f64],
    budget: Option<SampleBudget>,
) -> Result<GameStream> {
    validate_utility_set(utilities)?;
    let template = generate_random_game(&RandomGameParams {
        depth,
        branching,
        utilities: UtilitySource::Discrete(vec![utilities[0]]),
        seed: 0,
    })?;
    let t = template.terminals().len() as u32;
    let total = (utilities.len() as u64)
        .checked_pow(t)
        .ok_or_else(|| invalid("assignment space does not fit in 64 bits"))?;
    let order = match budget {
        None => StreamOrder::Full,
        Some(SampleBudget { games: 0, .. }) => return Err(invalid("sampling budget must be positive")),
        Some(b) if b.games >= total => StreamOrder::Full,
        Some(SampleBudget { games, seed }) => {
            let total_usize = usize::try_from(total)
                .map_err(|_| invalid("assignment space too large to subsample"))?;
            let mut rng = rng_from_seed(seed);
            let mut picks: Vec<u64> = index::sample(&mut rng, total_usize, games as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            picks.sort_unstable();
            StreamOrder::Sampled(picks)
        }
    };
    Ok(GameStream {
        template,
        utilities: utilities.to_vec(),
        total,
        order,
        pos: 0,
        next_full: 0,
    })
}

/// `sum_z pi(z) u1(z)` by one weighted walk from the root.
pub fn expected_utility(game: &GameSpec, profile: &Profile) -> Result<f64> {
    subgame_utility(game, profile, game.root())
}

/// Expected utility of the subgame rooted at `node`.
pub fn subgame_utility(game: &GameSpec, profile: &Profile, node: NodeId) -> Result<f64> {
    match game.node(node) {
        Node::Terminal { utility } => Ok(*utility),
        Node::Inner { rows, cols, children } => {
            let s1 = profile.p1.require(Player::One, node, *rows)?;
            let s2 = profile.p2.require(Player::Two, node, *cols)?;
            let mut total = 0.0;
            for i in 0..*rows {
                if s1[i] == 0.0 {
                    continue;
                }
                for j in 0..*cols {
                    let w = s1[i] * s2[j];
                    if w > 0.0 {
                        total += w * subgame_utility(game, profile, children[i * cols + j])?;
                    }
                }
            }
            Ok(total)
        }
    }
}

/// Plays one episode under `profile` and returns the terminal utility.
pub fn sample_outcome<R: Rng + ?Sized>(game: &GameSpec, profile: &Profile, rng: &mut R) -> Result<f64> {
    let mut node = game.root();
    loop {
        match game.node(node) {
            Node::Terminal { utility } => return Ok(*utility),
            Node::Inner { rows, cols, .. } => {
                let i = crate::strategy::sample_index(profile.p1.require(Player::One, node, *rows)?, rng);
                let j = crate::strategy::sample_index(profile.p2.require(Player::Two, node, *cols)?, rng);
                node = game.child(node, i, j);
            }
        }
    }
}
