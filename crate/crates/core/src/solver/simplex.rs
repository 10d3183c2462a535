//! Dense tableau simplex for the matrix-game LP.
//!
//! With `B > 0` the column player's program is
//! `max sum(y)  s.t.  B y <= 1, y >= 0`; its optimum is `1 / value(B)` and the
//! row player's strategy is read off the slack columns of the objective row.
//! The slack basis is feasible from the start, so no phase one is needed.
//! Bland's rule prevents cycling on degenerate matrices.

const PIVOT_EPS: f64 = 1e-12;

pub(crate) struct LpSolution {
    /// Unnormalized column weights `y`.
    pub y: Vec<f64>,
    /// Unnormalized row weights (the duals).
    pub x: Vec<f64>,
}

/// Solves the program for a strictly positive `m x n` matrix given row-major.
pub(crate) fn solve_positive(rows: usize, cols: usize, b: &[f64]) -> LpSolution {
    debug_assert!(b.iter().all(|&v| v > 0.0));
    let width = cols + rows + 1;
    // rows 0..m are constraints, row m is the objective
    let mut t = vec![0.0; (rows + 1) * width];
    for i in 0..rows {
        let r = &mut t[i * width..(i + 1) * width];
        r[..cols].copy_from_slice(&b[i * cols..(i + 1) * cols]);
        r[cols + i] = 1.0;
        r[width - 1] = 1.0;
    }
    for j in 0..cols {
        t[rows * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    loop {
        let obj = &t[rows * width..];
        let Some(enter) = (0..width - 1).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = t[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[i * width + width - 1] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS
                            || ((ratio - lr).abs() <= PIVOT_EPS && basis[i] < basis[li])
                        {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // bounded because every column of B is positive
        let (pr, _) = leave.expect("matrix-game LP is bounded");
        pivot(&mut t, width, pr, enter);
        basis[pr] = enter;
    }

    let mut y = vec![0.0; cols];
    for (i, &var) in basis.iter().enumerate() {
        if var < cols {
            y[var] = t[i * width + width - 1].max(0.0);
        }
    }
    let x = (0..rows)
        .map(|i| t[rows * width + cols + i].max(0.0))
        .collect();
    LpSolution { y, x }
}

fn pivot(t: &mut [f64], width: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for v in &mut t[pr * width..(pr + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = t[pr * width..(pr + 1) * width].to_vec();
    let n_rows = t.len() / width;
    for r in 0..n_rows {
        if r == pr {
            continue;
        }
        let f = t[r * width + pc];
        if f != 0.0 {
            for (v, pv) in t[r * width..(r + 1) * width].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            t[r * width + pc] = 0.0;
        }
    }
}
