#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use smmcts::engine::SearchTree;
use smmcts::MatrixGame;

const TOL: f64 = 1e-9;

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Solves `sum_{r in s} w_r a(r, c) = v` for every `c` in `t`, `sum w = 1`.
fn bordered(a: impl Fn(usize, usize) -> f64, s: &[usize], t: &[usize]) -> Option<(Vec<f64>, f64)> {
    let k = s.len();
    let mut lhs = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (row, &c) in t.iter().enumerate() {
        for (col, &r) in s.iter().enumerate() {
            lhs[(row, col)] = a(r, c);
        }
        lhs[(row, k)] = -1.0;
    }
    for col in 0..k {
        lhs[(k, col)] = 1.0;
    }
    rhs[k] = 1.0;
    let sol = lhs.lu().solve(&rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some((sol.iter().take(k).copied().collect(), sol[k]))
}

/// Game value by enumerating square supports. Every matrix game has an extreme
/// equilibrium on a square submatrix whose bordered system is nonsingular, so
/// some candidate always survives the feasibility checks.
pub fn support_enumeration_value(m: &MatrixGame) -> f64 {
    let (rows, cols) = (m.rows(), m.cols());
    for k in 1..=rows.min(cols) {
        for s in subsets(rows, k) {
            for t in subsets(cols, k) {
                let Some((x, v)) = bordered(|r, c| m.get(r, c), &s, &t) else { continue };
                let Some((y, w)) = bordered(|c, r| m.get(r, c), &t, &s) else { continue };
                if x.iter().chain(&y).any(|&p| p < -TOL) || (v - w).abs() > 1e-7 {
                    continue;
                }
                let mut full_x = vec![0.0; rows];
                for (&r, &p) in s.iter().zip(&x) {
                    full_x[r] = p;
                }
                let mut full_y = vec![0.0; cols];
                for (&c, &p) in t.iter().zip(&y) {
                    full_y[c] = p;
                }
                let col_ok = (0..cols).all(|c| (0..rows).map(|r| full_x[r] * m.get(r, c)).sum::<f64>() >= v - 1e-7);
                let row_ok = (0..rows).all(|r| (0..cols).map(|c| full_y[c] * m.get(r, c)).sum::<f64>() <= v + 1e-7);
                if col_ok && row_ok {
                    return v;
                }
            }
        }
    }
    panic!("no equilibrium support found for {m:?}");
}

/// Checks the per-node bookkeeping of a search tree. Returns a description of
/// the first broken identity.
///
/// - an inner child reached by joint action `ij` has `t_ij = 1 + updates`
/// - a terminal child keeps `n = 1`
/// - an inner state has `n = selections + [not root]`, where selections are
///   updates minus expansions
/// - `X / n` lies in `[0, 1]`
pub fn check_conservation(tree: &SearchTree<'_>) -> Result<(), String> {
    let game = tree.game();
    for id in 0..game.num_nodes() {
        let Some(node) = tree.node(id) else { continue };
        if let Some(mean) = node.mean() {
            if !(-TOL..=1.0 + TOL).contains(&mean) {
                return Err(format!("node {id}: mean {mean} outside [0, 1]"));
            }
        }
        if game.is_terminal(id) {
            if node.visits != 1 {
                return Err(format!("terminal {id}: n = {}", node.visits));
            }
            continue;
        }
        let (m, n) = game.actions(id);
        let expansions = (m * n - node.unexpanded().len()) as u64;
        let selections = node.updates - expansions;
        let expected = selections + u64::from(id != game.root());
        if node.visits != expected {
            return Err(format!("node {id}: n = {} but expected {expected}", node.visits));
        }
        if node.joint_counts.iter().sum::<u64>() != node.updates {
            return Err(format!("node {id}: joint counts do not sum to updates"));
        }
        for i in 0..m {
            for j in 0..n {
                let c = game.child(id, i, j);
                let t = node.joint_counts[i * n + j];
                match tree.node(c) {
                    None if t != 0 => return Err(format!("child {c} missing but t_ij = {t}")),
                    None => {}
                    Some(_) if game.is_terminal(c) => {}
                    Some(child) if t != 1 + child.updates => {
                        return Err(format!("child {c}: t_ij = {t}, updates = {}", child.updates))
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(())
}
