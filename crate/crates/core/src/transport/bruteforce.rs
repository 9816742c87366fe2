use ndarray::Array2;

use super::{TransportPlan, TransportProblem};
use crate::error::{Error, Result};

/// Largest `m * n` accepted by [`ot_bruteforce`].
pub const BRUTEFORCE_CAP: usize = 16;

/// Exact optimum by enumerating every basic feasible solution.
///
/// A basis of the transportation polytope is a spanning tree of the
/// bipartite graph `K_{m,n}`; its flows are forced by peeling leaves. Every
/// `(m + n - 1)`-subset of cells is tried. Test oracle only.
pub fn ot_bruteforce(prob: &TransportProblem) -> Result<TransportPlan> {
    let (m, n) = prob.shape();
    if m * n > BRUTEFORCE_CAP {
        return Err(Error::InstanceTooLarge {
            what: "brute-force transport",
            size: m * n,
            cap: BRUTEFORCE_CAP,
        });
    }
    let k = m + n - 1;
    let mut best: Option<TransportPlan> = None;
    let mut subset = Vec::with_capacity(k);
    enumerate(0, m * n, k, &mut subset, &mut |cells| {
        if let Some(flow) = tree_flows(prob, cells) {
            let value = (&flow * prob.cost()).sum();
            if best.as_ref().map_or(true, |b| value < b.value) {
                best = Some(TransportPlan {
                    entries: flow,
                    value,
                });
            }
        }
    });
    best.ok_or_else(|| Error::Solver("no basic feasible solution found".into()))
}

fn enumerate(
    start: usize,
    total: usize,
    k: usize,
    subset: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if subset.len() == k {
        visit(subset);
        return;
    }
    let needed = k - subset.len();
    for cell in start..=total - needed {
        subset.push(cell);
        enumerate(cell + 1, total, k, subset, visit);
        subset.pop();
    }
}

/// Flows of the basis `cells`, or `None` if it is not a spanning tree or
/// the forced flows are negative.
fn tree_flows(prob: &TransportProblem, cells: &[usize]) -> Option<Array2<f64>> {
    let (m, n) = prob.shape();
    // Union-find to reject cycles; k = m + n - 1 acyclic edges span.
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &cell in cells {
        let (a, b) = (find(&mut parent, cell / n), find(&mut parent, m + cell % n));
        if a == b {
            return None;
        }
        parent[a] = b;
    }
    let mut residual: Vec<f64> = prob.mu().iter().chain(prob.nu()).copied().collect();
    let mut degree = vec![0usize; m + n];
    for &cell in cells {
        degree[cell / n] += 1;
        degree[m + cell % n] += 1;
    }
    let mut alive = vec![true; cells.len()];
    let mut flow = Array2::zeros((m, n));
    for _ in 0..cells.len() {
        let (e, leaf) = cells.iter().enumerate().find_map(|(e, &cell)| {
            if !alive[e] {
                return None;
            }
            let (r, c) = (cell / n, m + cell % n);
            if degree[r] == 1 {
                Some((e, r))
            } else if degree[c] == 1 {
                Some((e, c))
            } else {
                None
            }
        })?;
        let cell = cells[e];
        let (r, c) = (cell / n, m + cell % n);
        let other = if leaf == r { c } else { r };
        let x = residual[leaf];
        if x < -1e-12 {
            return None;
        }
        flow[[cell / n, cell % n]] = x.max(0.0);
        residual[leaf] = 0.0;
        residual[other] -= x;
        degree[r] -= 1;
        degree[c] -= 1;
        alive[e] = false;
    }
    Some(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_row_has_unique_plan() {
        let prob =
            TransportProblem::new(vec![1.0], vec![0.2, 0.3, 0.5], array![[1.0, 2.0, 3.0]])
                .unwrap();
        let plan = ot_bruteforce(&prob).unwrap();
        assert_eq!(plan.entries, array![[0.2, 0.3, 0.5]]);
        assert!((plan.value - 2.3).abs() < 1e-12);
    }

    #[test]
    fn too_large() {
        let prob = TransportProblem::new(
            vec![0.2; 5],
            vec![0.25; 4],
            Array2::zeros((5, 4)),
        )
        .unwrap();
        assert!(matches!(
            ot_bruteforce(&prob),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
