//! Exact solutions: matrix games, subgame values, best responses and
//! exploitability.

mod simplex;

use crate::error::Result;
use crate::game::{GameSpec, MatrixGame, Node, NodeId};
use crate::strategy::{BehaviorStrategy, MixedStrategy, Player, Profile};

/// Bound on both equilibrium gaps of every returned [`MatrixSolution`].
pub const CERTIFICATE_TOLERANCE: f64 = 1e-8;

/// A certified equilibrium of a matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSolution {
    pub value: f64,
    pub strategy_p1: MixedStrategy,
    pub strategy_p2: MixedStrategy,
}

impl MatrixSolution {
    /// `(u(br, s2) - v, v - u(s1, br))`; both are at most the certificate tolerance.
    pub fn gaps(&self, matrix: &MatrixGame) -> (f64, f64) {
        (
            matrix.best_row_value(&self.strategy_p2) - self.value,
            self.value - matrix.best_col_value(&self.strategy_p1),
        )
    }
}

/// Maximin solution via the simplex method. Entries may be any finite reals.
pub fn solve_matrix(matrix: &MatrixGame) -> MatrixSolution {
    let (m, n) = (matrix.rows(), matrix.cols());
    let min = matrix.entries().iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let shifted: Vec<f64> = matrix.entries().iter().map(|v| v + shift).collect();
    let lp = simplex::solve_positive(m, n, &shifted);
    let s1 = MixedStrategy::from_weights(&lp.x);
    let s2 = MixedStrategy::from_weights(&lp.y);
    // the midpoint of the two best-response values is exact up to the certificate
    let upper = matrix.best_row_value(&s2);
    let lower = matrix.best_col_value(&s1);
    let value = 0.5 * (upper + lower);
    let solution = MatrixSolution {
        value,
        strategy_p1: s1,
        strategy_p2: s2,
    };
    debug_assert!({
        let (g1, g2) = solution.gaps(matrix);
        g1 <= CERTIFICATE_TOLERANCE && g2 <= CERTIFICATE_TOLERANCE
    });
    solution
}

/// Subgame values and equilibrium strategies at every state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTree {
    values: Vec<f64>,
    solutions: Vec<Option<MatrixSolution>>,
}

impl ValueTree {
    pub fn value(&self, node: NodeId) -> f64 {
        self.values[node]
    }

    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Local equilibrium of the child-value matrix at an inner state.
    pub fn solution(&self, node: NodeId) -> Option<&MatrixSolution> {
        self.solutions[node].as_ref()
    }

    /// The matrix of child values at an inner state.
    pub fn child_matrix(&self, game: &GameSpec, node: NodeId) -> MatrixGame {
        let (m, n) = game.actions(node);
        MatrixGame::from_flat(m, n, game.children(node).iter().map(|&c| self.values[c]).collect())
    }

    /// The subgame-perfect equilibrium assembled from the local solutions.
    pub fn equilibrium_profile(&self, game: &GameSpec) -> Profile {
        Profile {
            p1: BehaviorStrategy::from_fn(game, |id, _, _| {
                self.solutions[id].as_ref().expect("inner").strategy_p1.clone()
            }),
            p2: BehaviorStrategy::from_fn(game, |id, _, _| {
                self.solutions[id].as_ref().expect("inner").strategy_p2.clone()
            }),
        }
    }
}

/// Values every state bottom-up: each inner value is the value of the matrix of
/// its children's values.
pub fn backward_induction(game: &GameSpec) -> ValueTree {
    let n = game.num_nodes();
    let mut values = vec![0.0; n];
    let mut solutions = vec![None; n];
    // children always have larger ids than their parent
    for id in (0..n).rev() {
        match game.node(id) {
            Node::Terminal { utility } => values[id] = *utility,
            Node::Inner { rows, cols, children } => {
                let matrix = MatrixGame::from_flat(*rows, *cols, children.iter().map(|&c| values[c]).collect());
                let sol = solve_matrix(&matrix);
                values[id] = sol.value;
                solutions[id] = Some(sol);
            }
        }
    }
    ValueTree { values, solutions }
}

/// Value of a best response and the pure responder strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Player one's expected utility when the responder best-responds.
    pub value: f64,
    pub responder: BehaviorStrategy,
}

/// Best response of the opponent of `fixed_player` against `strategy`.
///
/// Player two's response minimizes player one's utility. Ties go to the lowest
/// action index.
pub fn best_response(game: &GameSpec, fixed_player: Player, strategy: &BehaviorStrategy) -> Result<BestResponse> {
    let n = game.num_nodes();
    let mut values = vec![0.0; n];
    let mut responder = BehaviorStrategy::empty(game);
    for id in (0..n).rev() {
        match game.node(id) {
            Node::Terminal { utility } => values[id] = *utility,
            Node::Inner { rows, cols, children } => {
                let (rows, cols) = (*rows, *cols);
                let (value, action, k) = match fixed_player {
                    Player::One => {
                        let s1 = strategy.require(Player::One, id, rows)?;
                        let (j, v) = arg_best((0..cols).map(|j| {
                            (0..rows).map(|i| s1[i] * values[children[i * cols + j]]).sum::<f64>()
                        }), |a, b| a < b);
                        (v, j, cols)
                    }
                    Player::Two => {
                        let s2 = strategy.require(Player::Two, id, cols)?;
                        let (i, v) = arg_best((0..rows).map(|i| {
                            (0..cols).map(|j| s2[j] * values[children[i * cols + j]]).sum::<f64>()
                        }), |a, b| a > b);
                        (v, i, rows)
                    }
                };
                values[id] = value;
                responder.set(id, MixedStrategy::pure(k, action));
            }
        }
    }
    Ok(BestResponse {
        value: values[game.root()],
        responder,
    })
}

fn arg_best(values: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, f64::NAN);
    for (idx, v) in values.enumerate() {
        if idx == 0 || better(v, best.1) {
            best = (idx, v);
        }
    }
    best
}

/// `v(root) - u(strategy, br)`: how much a best-responding player two gains
/// against player one's strategy.
pub fn exploitability(game: &GameSpec, strategy_p1: &BehaviorStrategy) -> Result<f64> {
    exploitability_with_value(game, backward_induction(game).root_value(), strategy_p1)
}

/// [`exploitability`] with a precomputed game value.
pub fn exploitability_with_value(game: &GameSpec, root_value: f64, strategy_p1: &BehaviorStrategy) -> Result<f64> {
    Ok(root_value - best_response(game, Player::One, strategy_p1)?.value)
}

/// Both unilateral-deviation gains of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashGapReport {
    pub utility: f64,
    /// `u(br, s2) - u(s1, s2)`
    pub gain_p1: f64,
    /// `u(s1, s2) - u(s1, br)`
    pub gain_p2: f64,
    pub eps: f64,
    pub is_eps_ne: bool,
}

impl NashGapReport {
    pub fn max_gain(&self) -> f64 {
        self.gain_p1.max(self.gain_p2)
    }
}

pub fn check_eps_ne(game: &GameSpec, profile: &Profile, eps: f64) -> Result<NashGapReport> {
    let utility = crate::game::expected_utility(game, profile)?;
    let br1 = best_response(game, Player::Two, &profile.p2)?.value;
    let br2 = best_response(game, Player::One, &profile.p1)?.value;
    let gain_p1 = br1 - utility;
    let gain_p2 = utility - br2;
    Ok(NashGapReport {
        utility,
        gain_p1,
        gain_p2,
        eps,
        is_eps_ne: gain_p1 <= eps && gain_p2 <= eps,
    })
}

/// Running statistics of one search-tree node, as consumed by
/// [`audit_payoff_bands`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStat {
    pub node: NodeId,
    pub reward_sum: f64,
    pub visits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEntry {
    pub node: NodeId,
    pub depth: usize,
    pub visits: u64,
    pub mean: f64,
    pub value: f64,
    pub half_width: f64,
    pub inside: bool,
}

impl BandEntry {
    /// Distance beyond the band edge; non-positive inside.
    pub fn excess(&self) -> f64 {
        (self.mean - self.value).abs() - self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub eps: f64,
    pub delta: f64,
    pub entries: Vec<BandEntry>,
    /// Inner states without visits; they are not audited.
    pub unvisited: Vec<NodeId>,
}

impl BandReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| !e.inside).count()
    }

    pub fn worst(&self) -> Option<&BandEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.excess().total_cmp(&b.excess()))
    }

    /// `(depth, audited, inside)` per depth level.
    pub fn by_depth(&self) -> Vec<(usize, usize, usize)> {
        let max_depth = self.entries.iter().map(|e| e.depth).max().unwrap_or(0);
        (1..=max_depth)
            .map(|d| {
                let at: Vec<_> = self.entries.iter().filter(|e| e.depth == d).collect();
                (d, at.len(), at.iter().filter(|e| e.inside).count())
            })
            .filter(|(_, n, _)| *n > 0)
            .collect()
    }
}

/// Checks every visited inner state's mean payoff `X / n` against the open band
/// `v(h) +- ((1 + D - d) * eps + delta)` for a state at depth `d`.
pub fn audit_payoff_bands(
    game: &GameSpec,
    values: &ValueTree,
    stats: &[NodeStat],
    eps: f64,
    delta: f64,
) -> BandReport {
    let big_d = game.depth();
    let mut entries = Vec::new();
    let mut unvisited = Vec::new();
    for s in stats.iter().filter(|s| !game.is_terminal(s.node)) {
        if s.visits == 0 {
            unvisited.push(s.node);
            continue;
        }
        let depth = game.node_depth(s.node);
        let mean = s.reward_sum / s.visits as f64;
        let value = values.value(s.node);
        let half_width = (1 + big_d - depth) as f64 * eps + delta;
        entries.push(BandEntry {
            node: s.node,
            depth,
            visits: s.visits,
            mean,
            value,
            half_width,
            inside: (mean - value).abs() < half_width,
        });
    }
    BandReport {
        eps,
        delta,
        entries,
        unvisited,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_game, RandomGameParams, TreeSpec};
    use approx::assert_abs_diff_eq;

    fn appendix() -> MatrixGame {
        MatrixGame::new(vec![vec![0.4, 0.5], vec![0.6, 0.5]]).unwrap()
    }

    fn certified(m: &MatrixGame, s: &MatrixSolution) {
        let (g1, g2) = s.gaps(m);
        assert!(g1 <= CERTIFICATE_TOLERANCE && g2 <= CERTIFICATE_TOLERANCE, "{g1} {g2}");
    }

    #[test]
    fn appendix_value() {
        let m = appendix();
        let s = solve_matrix(&m);
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-12);
        certified(&m, &s);
    }

    #[test]
    fn matching_pennies() {
        let m = MatrixGame::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = solve_matrix(&m);
        assert_abs_diff_eq!(s.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.strategy_p1[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.strategy_p2[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_and_rectangular_matrices_certify() {
        for rows in [
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.0, 1.0, 0.5]],
            vec![vec![0.0], vec![1.0], vec![0.5]],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.5, 1.0], vec![0.5, 0.5, 0.5], vec![1.0, 0.5, 0.0]],
        ] {
            let m = MatrixGame::new(rows).unwrap();
            certified(&m, &solve_matrix(&m));
        }
    }

    #[test]
    fn appendix_best_responses() {
        let g = GameSpec::from_matrix(&appendix()).unwrap();
        let fixed2 = BehaviorStrategy::from_fn(&g, |_, _, n| MixedStrategy::pure(n, 0));
        let fixed1 = BehaviorStrategy::from_fn(&g, |_, m, _| MixedStrategy::pure(m, 0));
        let br = best_response(&g, Player::Two, &fixed2).unwrap();
        assert_abs_diff_eq!(br.value, 0.6, epsilon = 1e-12);
        assert_eq!(br.responder.get(0).unwrap().probs(), &[0.0, 1.0]);
        let br = best_response(&g, Player::One, &fixed1).unwrap();
        assert_abs_diff_eq!(br.value, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(exploitability(&g, &fixed1).unwrap(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn best_response_ties_pick_lowest_index() {
        let m = MatrixGame::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let g = GameSpec::from_matrix(&m).unwrap();
        let br = best_response(&g, Player::One, &BehaviorStrategy::uniform(&g, Player::One)).unwrap();
        assert_eq!(br.responder.get(0).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn appendix_eps_ne() {
        let g = GameSpec::from_matrix(&appendix()).unwrap();
        let p = Profile {
            p1: BehaviorStrategy::from_fn(&g, |_, m, _| MixedStrategy::pure(m, 0)),
            p2: BehaviorStrategy::from_fn(&g, |_, _, n| MixedStrategy::pure(n, 0)),
        };
        assert!(check_eps_ne(&g, &p, 0.2 + 1e-12).unwrap().is_eps_ne);
        assert!(!check_eps_ne(&g, &p, 0.19).unwrap().is_eps_ne);
    }

    #[test]
    fn uniform_is_equilibrium_of_matching_pennies() {
        let m = MatrixGame::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = GameSpec::from_matrix(&m).unwrap();
        let r = check_eps_ne(&g, &Profile::uniform(&g), 1e-12).unwrap();
        assert!(r.is_eps_ne);
    }

    #[test]
    fn constant_game_values() {
        let g = generate_random_game(&RandomGameParams::uniform(3, 2, 1)).unwrap();
        let c = vec![0.3; g.terminals().len()];
        let g = g.with_terminal_utilities(&c).unwrap();
        let vt = backward_induction(&g);
        for id in g.inner_nodes() {
            assert_abs_diff_eq!(vt.value(id), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn equilibrium_profile_is_unexploitable() {
        for seed in 0..20 {
            let g = generate_random_game(&RandomGameParams::uniform(3, 3, seed)).unwrap();
            let vt = backward_induction(&g);
            let ne = vt.equilibrium_profile(&g);
            let report = check_eps_ne(&g, &ne, 1e-8).unwrap();
            assert!(report.is_eps_ne, "{report:?}");
            assert_abs_diff_eq!(report.utility, vt.root_value(), epsilon = 1e-8);
            let e = exploitability(&g, &ne.p1).unwrap();
            assert!(e.abs() <= 1e-8);
        }
    }

    #[test]
    fn recursion_is_consistent_at_every_node() {
        let g = generate_random_game(&RandomGameParams::uniform(3, 2, 4)).unwrap();
        let vt = backward_induction(&g);
        for id in g.inner_nodes() {
            let v = solve_matrix(&vt.child_matrix(&g, id)).value;
            assert_eq!(v, vt.value(id));
        }
    }

    #[test]
    fn band_half_width_at_leaf_depth() {
        let g = GameSpec::from_tree(&TreeSpec::Inner {
            rows: 1,
            cols: 1,
            children: vec![TreeSpec::Terminal(0.5)],
        })
        .unwrap();
        let vt = backward_induction(&g);
        let stats = [NodeStat {
            node: 0,
            reward_sum: 0.58,
            visits: 1,
        }];
        let r = audit_payoff_bands(&g, &vt, &stats, 0.05, 0.04);
        assert_abs_diff_eq!(r.entries[0].half_width, 0.09, epsilon = 1e-15);
        assert!(r.entries[0].inside);
        let r = audit_payoff_bands(&g, &vt, &stats, 0.03, 0.04);
        assert_eq!(r.violations(), 1);
        assert_eq!(r.worst().unwrap().node, 0);
    }
}
