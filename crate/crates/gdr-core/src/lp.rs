//! Minimal dense phase-one simplex for small feasibility problems.
//!
//! Decides whether `{ x >= 0 : A x = b }` is non-empty by minimizing the sum
//! of artificial variables with Bland's rule (to rule out cycling). Problem
//! sizes here are tiny (tens of rows and columns), so a dense tableau is fine.

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-7;

/// Returns true iff `A x = b` has a solution with `x >= 0`.
pub fn standard_form_feasible(a: &[Vec<f64>], b: &[f64]) -> bool {
    let m = a.len();
    if m == 0 {
        return true;
    }
    let n = a[0].len();

    // Tableau: columns [x (n) | artificials (m) | rhs], one row per constraint
    // plus the phase-one objective row.
    let mut tab = vec![vec![0.0f64; n + m + 1]; m + 1];
    for (i, row) in a.iter().enumerate() {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for (j, &v) in row.iter().enumerate() {
            tab[i][j] = flip * v;
        }
        tab[i][n + i] = 1.0;
        tab[i][n + m] = flip * b[i];
    }
    // Objective row: reduced costs of minimizing the artificial sum, with the
    // artificial basis already priced out.
    for j in 0..n {
        let col_sum: f64 = (0..m).map(|i| tab[i][j]).sum();
        tab[m][j] = -col_sum;
    }
    tab[m][n + m] = -(0..m).map(|i| tab[i][n + m]).sum::<f64>();

    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering column = lowest index with negative reduced cost.
        let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -PIVOT_TOL) else {
            break;
        };
        // Ratio test, ties broken by lowest basis index.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][enter] > PIVOT_TOL {
                let ratio = tab[i][n + m] / tab[i][enter];
                if ratio < best - PIVOT_TOL
                    || (ratio < best + PIVOT_TOL
                        && leave.map(|l| basis[i] < basis[l]).unwrap_or(true))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Unbounded phase-one objective cannot happen (bounded below by 0),
            // but bail out defensively as infeasible-by-noise.
            return false;
        };

        let pivot = tab[leave][enter];
        for v in tab[leave].iter_mut() {
            *v /= pivot;
        }
        for i in 0..=m {
            if i != leave {
                let factor = tab[i][enter];
                if factor != 0.0 {
                    for j in 0..n + m + 1 {
                        tab[i][j] -= factor * tab[leave][j];
                    }
                }
            }
        }
        basis[leave] = enter;
    }

    // Optimal artificial sum is -tab[m][rhs].
    -tab[m][n + m] <= FEAS_TOL
}
