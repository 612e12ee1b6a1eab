//! Dense linear assignment by shortest augmenting paths (Jonker–Volgenant
//! family, following Crouse's formulation). Exact, `O(n³)`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

const NONE: usize = usize::MAX;

/// Minimum-cost assignment on a square cost matrix; returns the column for each row.
pub fn solve_min_cost(cost: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::Shape(format!(
            "assignment cost must be square, got {}x{}",
            n,
            cost.ncols()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("assignment cost has non-finite entries".into()));
    }

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut seen_row = vec![false; n];
    let mut seen_col = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for cur_row in 0..n {
        shortest.fill(f64::INFINITY);
        path.fill(NONE);
        seen_row.fill(false);
        seen_col.fill(false);
        remaining.clear();
        remaining.extend(0..n);

        let mut i = cur_row;
        let mut min_val = 0.0;
        let mut sink = NONE;
        while sink == NONE {
            seen_row[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = NONE;
            for (pos, &j) in remaining.iter().enumerate() {
                let reduced = min_val + cost[(i, j)] - u[i] - v[j];
                if reduced < shortest[j] {
                    path[j] = i;
                    shortest[j] = reduced;
                }
                // strict comparison: ties go to the lowest column index
                if shortest[j] < lowest {
                    lowest = shortest[j];
                    index = pos;
                }
            }
            if index == NONE {
                return Err(Error::Numerical("assignment problem is infeasible".into()));
            }
            min_val = lowest;
            let j = remaining.remove(index);
            seen_col[j] = true;
            if row4col[j] == NONE {
                sink = j;
            } else {
                i = row4col[j];
            }
        }

        u[cur_row] += min_val;
        for r in 0..n {
            if seen_row[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..n {
            if seen_col[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }
    Ok(col4row)
}
