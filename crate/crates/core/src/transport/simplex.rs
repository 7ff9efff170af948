//! Transportation simplex on a spanning-tree basis.
//!
//! The basis is always a spanning tree over the `m` supply nodes and `n`
//! demand nodes with exactly `m + n - 1` cells, zero-flow cells included, so
//! the returned plan is a vertex of the transportation polytope. Pricing is
//! Dantzig's rule; after a run of degenerate pivots it switches to Bland's
//! rule until the objective moves again, which rules out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Consecutive zero-step pivots tolerated before falling back to Bland's rule.
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub pivots: usize,
    pub degenerate_pivots: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    /// Basic cells `(row, col, flow)`, `m + n - 1` of them.
    pub basis: Vec<(usize, usize, f64)>,
    pub stats: SolveStats,
}

struct Problem<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
}

impl Problem<'_> {
    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }
}

/// Greedy least-cost start. Each step closes exactly one row or column (the
/// last closes both), which yields a spanning tree.
fn initial_basis(p: &Problem, supply: &[f64], demand: &[f64]) -> Vec<(usize, usize, f64)> {
    let (m, n) = (p.m, p.n);
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_open = vec![true; m];
    let mut col_open = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);

    let mut cells: Vec<usize> = (0..m * n).collect();
    cells.sort_by(|&a, &b| p.cost[a].total_cmp(&p.cost[b]).then(a.cmp(&b)));

    let mut basis = Vec::with_capacity(m + n - 1);
    for cell in cells {
        let (i, j) = (cell / n, cell % n);
        if !row_open[i] || !col_open[j] {
            continue;
        }
        let x = s[i].min(d[j]);
        s[i] -= x;
        d[j] -= x;
        basis.push((i, j, x));
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        let close_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            s[i] <= d[j]
        };
        if close_row {
            row_open[i] = false;
            rows_left -= 1;
        } else {
            col_open[j] = false;
            cols_left -= 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);
    basis
}

/// Tree bookkeeping rebuilt after every pivot: node potentials plus a
/// parent pointer (basis index) and depth per node, rooted at row 0.
/// Nodes `0..m` are rows, `m..m+n` are columns.
struct Tree {
    potential: Vec<f64>,
    parent_edge: Vec<usize>,
    parent_node: Vec<usize>,
    depth: Vec<usize>,
}

fn build_tree(p: &Problem, basis: &[(usize, usize, f64)]) -> Tree {
    let nodes = p.m + p.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push(k);
        adj[p.m + j].push(k);
    }
    let mut t = Tree {
        potential: vec![0.0; nodes],
        parent_edge: vec![usize::MAX; nodes],
        parent_node: vec![usize::MAX; nodes],
        depth: vec![usize::MAX; nodes],
    };
    t.depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &k in &adj[u] {
            let (i, j, _) = basis[k];
            let (row, col) = (i, p.m + j);
            let v = if u == row { col } else { row };
            if t.depth[v] != usize::MAX {
                continue;
            }
            // u_i + v_j = c_ij on basic cells.
            t.potential[v] = p.c(i, j) - t.potential[u];
            t.depth[v] = t.depth[u] + 1;
            t.parent_edge[v] = k;
            t.parent_node[v] = u;
            queue.push_back(v);
        }
    }
    t
}

/// Basis indices on the tree path from `from` to `to`, in walking order.
fn tree_path(t: &Tree, mut from: usize, mut to: usize) -> Vec<usize> {
    let mut head = Vec::new();
    let mut tail = Vec::new();
    while t.depth[from] > t.depth[to] {
        head.push(t.parent_edge[from]);
        from = t.parent_node[from];
    }
    while t.depth[to] > t.depth[from] {
        tail.push(t.parent_edge[to]);
        to = t.parent_node[to];
    }
    while from != to {
        head.push(t.parent_edge[from]);
        from = t.parent_node[from];
        tail.push(t.parent_edge[to]);
        to = t.parent_node[to];
    }
    head.extend(tail.into_iter().rev());
    head
}

/// Solves `min Σ c_ij T_ij` s.t. row sums = `supply`, column sums = `demand`,
/// `T ≥ 0`. `cost` is row-major `m × n`. Marginals must be nonnegative with
/// equal totals.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Solution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    if cost.len() != m * n {
        return Err(Error::dim(format!(
            "cost matrix has {} entries, expected {m}x{n}",
            cost.len()
        )));
    }
    if supply.iter().chain(demand).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Infeasible("marginals must be finite and nonnegative".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Infeasible("costs must be finite".into()));
    }
    let (ts, td): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (ts - td).abs() > 1e-9 * ts.max(td).max(1.0) {
        return Err(Error::Infeasible(format!(
            "supply total {ts} differs from demand total {td}"
        )));
    }

    let p = Problem { m, n, cost };
    let mut basis = initial_basis(&p, supply, demand);
    let mut is_basic = vec![false; m * n];
    for &(i, j, _) in &basis {
        is_basic[i * n + j] = true;
    }

    let cmax = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let tol = 1e-12 * cmax.max(f64::MIN_POSITIVE);
    let max_pivots = 50 * (m * n + m + n) + 1000;
    let mut stats = SolveStats {
        pivots: 0,
        degenerate_pivots: 0,
    };
    let mut streak = 0usize;

    loop {
        let tree = build_tree(&p, &basis);
        let (u, v) = tree.potential.split_at(m);
        let bland = streak >= DEGENERATE_STREAK;

        let mut entering = None;
        let mut best = -tol;
        'scan: for i in 0..m {
            let row = &cost[i * n..(i + 1) * n];
            for (j, &c) in row.iter().enumerate() {
                if is_basic[i * n + j] {
                    continue;
                }
                let r = c - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        stats.pivots += 1;
        if stats.pivots > max_pivots {
            return Err(Error::Infeasible(format!(
                "transportation simplex did not converge in {max_pivots} pivots"
            )));
        }

        // Cycle: entering cell (+), then the tree path column ej → row ei
        // alternating −, +, −, ..., ending with − at row ei.
        let path = tree_path(&tree, m + ej, ei);
        let mut leave_pos = usize::MAX;
        let mut theta = f64::INFINITY;
        let mut leave_key = usize::MAX;
        for (pos, &k) in path.iter().enumerate().step_by(2) {
            let (i, j, f) = basis[k];
            let key = i * n + j;
            if f < theta || (f == theta && key < leave_key) {
                theta = f;
                leave_pos = pos;
                leave_key = key;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[k].2 -= theta;
            } else {
                basis[k].2 += theta;
            }
        }
        let leave = path[leave_pos];
        let (li, lj, _) = basis[leave];
        is_basic[li * n + lj] = false;
        is_basic[ei * n + ej] = true;
        basis[leave] = (ei, ej, theta);

        if theta == 0.0 {
            stats.degenerate_pivots += 1;
            streak += 1;
        } else {
            streak = 0;
        }
    }

    Ok(Solution { basis, stats })
}
