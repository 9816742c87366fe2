//! Transportation simplex on the complete bipartite graph.
//!
//! A basis is a spanning tree with `m + n - 1` cells. Entering cells are
//! chosen by Bland's rule (lowest cell index with negative reduced cost) and
//! leaving cells by lowest index among the minimum-ratio candidates, which
//! rules out cycling on degenerate instances.

use std::collections::VecDeque;

use ndarray::Array2;

use super::{TransportPlan, TransportProblem};
use crate::error::{Error, Result};

struct Basis {
    m: usize,
    n: usize,
    flow: Vec<f64>,
    basic: Vec<bool>,
    cells: Vec<usize>,
}

impl Basis {
    /// North-west corner rule; always yields a staircase spanning tree.
    fn northwest(prob: &TransportProblem) -> Self {
        let (m, n) = prob.shape();
        let mut supply = prob.mu().to_vec();
        let mut demand = prob.nu().to_vec();
        let mut flow = vec![0.0; m * n];
        let mut basic = vec![false; m * n];
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]).max(0.0);
            let cell = i * n + j;
            flow[cell] = x;
            basic[cell] = true;
            cells.push(cell);
            supply[i] -= x;
            demand[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // The last cell absorbs rounding; keep it nonnegative.
        let last = *cells.last().expect("nonempty basis");
        flow[last] = flow[last].max(0.0);
        Self {
            m,
            n,
            flow,
            basic,
            cells,
        }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for &cell in &self.cells {
            let (i, j) = (cell / self.n, cell % self.n);
            adj[i].push((self.m + j, cell));
            adj[self.m + j].push((i, cell));
        }
        adj
    }
}

/// Row and column potentials with `u_i + v_j = c_ij` on basic cells.
fn potentials(basis: &Basis, cost: &Array2<f64>, adj: &[Vec<(usize, usize)>]) -> Vec<f64> {
    let total = basis.m + basis.n;
    let mut pot = vec![0.0; total];
    let mut seen = vec![false; total];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &(w, cell) in &adj[v] {
            if seen[w] {
                continue;
            }
            let c = cost[[cell / basis.n, cell % basis.n]];
            pot[w] = c - pot[v];
            seen[w] = true;
            queue.push_back(w);
        }
    }
    pot
}

/// Tree path from `from` to `to` as a list of cells, starting at `to`'s end.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &(w, cell) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, cell));
                queue.push_back(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while let Some((prev, cell)) = parent[cur] {
        path.push(cell);
        cur = prev;
    }
    path
}

/// Solves the transport problem exactly; output is deterministic.
pub fn solve_ot(prob: &TransportProblem) -> Result<TransportPlan> {
    let (m, n) = prob.shape();
    let cost = prob.cost();
    let scale = cost.iter().fold(1.0f64, |a, &c| a.max(c));
    let tol = 1e-12 * scale;
    let mut basis = Basis::northwest(prob);
    let max_iter = 50 * (m * n) + 1000;
    let mut iter = 0;
    loop {
        let adj = basis.adjacency();
        let pot = potentials(&basis, cost, &adj);
        let entering = (0..m * n).find(|&cell| {
            let (i, j) = (cell / n, cell % n);
            !basis.basic[cell] && cost[[i, j]] - pot[i] - pot[m + j] < -tol
        });
        let Some(enter) = entering else { break };
        iter += 1;
        if iter > max_iter {
            return Err(Error::Solver(format!(
                "network simplex exceeded {max_iter} pivots"
            )));
        }
        let (ei, ej) = (enter / n, enter % n);
        // Cycle: entering cell (+), then the tree path from column ej back to
        // row ei, alternating -, +, -, ...
        let path = tree_path(&adj, ei, m + ej);
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for &cell in path.iter().step_by(2) {
            let f = basis.flow[cell];
            if f < theta || (f == theta && cell < leave) {
                theta = f;
                leave = cell;
            }
        }
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis.flow[cell] = (basis.flow[cell] - theta).max(0.0);
            } else {
                basis.flow[cell] += theta;
            }
        }
        basis.flow[enter] = theta;
        basis.flow[leave] = 0.0;
        basis.basic[leave] = false;
        basis.basic[enter] = true;
        let slot = basis
            .cells
            .iter()
            .position(|&c| c == leave)
            .expect("leaving cell is basic");
        basis.cells[slot] = enter;
    }
    let entries = Array2::from_shape_vec((m, n), basis.flow).expect("shape matches");
    let value = (&entries * cost).sum();
    Ok(TransportPlan { entries, value })
}
