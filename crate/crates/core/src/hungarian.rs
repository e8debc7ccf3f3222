//! Dense rectangular linear assignment (Hungarian / Jonker-Volgenant style
//! shortest augmenting paths with potentials), O(n²m).

/// Minimum-cost assignment of every row to a distinct column.
///
/// `costs` is row-major with `rows ≤ cols`. Returns the column for each row.
/// Ties are resolved deterministically by scan order.
pub fn solve(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let m = costs[0].len();
    assert!(m >= n, "assignment needs rows ≤ cols");
    debug_assert!(costs.iter().all(|r| r.len() == m));

    // 1-based potentials; p[j] is the row assigned to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Solves a possibly wide-or-tall matrix; returns `(row, col)` pairs covering
/// `min(rows, cols)` entries.
pub fn solve_rect(costs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        solve(costs).into_iter().enumerate().collect()
    } else {
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| costs[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = solve(&t)
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}
