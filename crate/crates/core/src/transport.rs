//! Exact type-`l` Wasserstein distances between finite distributions.
//!
//! [`wasserstein`] solves the transportation LP with the transportation
//! simplex method (northwest-corner start, potentials for pricing, pivots
//! along the unique basis cycle). The entering cell has the most negative
//! reduced cost; after a long run of degenerate pivots the solver falls back
//! to Bland's rule until the objective moves again. [`dist_to_support`] is the closed form when only the target
//! support is fixed: every atom ships to its nearest support point.

use crate::distribution::{DiscreteDistribution, Metric, Partition};
use crate::error::{Error, Result};
use crate::geometry::distance_matrix;

/// A coupling of two distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Row-major `n x m` flows.
    pub matrix: Vec<Vec<f64>>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
}

impl TransportPlan {
    /// Largest marginal violation.
    pub fn marginal_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (row, p) in self.matrix.iter().zip(&self.row_marginals) {
            err = err.max((row.iter().sum::<f64>() - p).abs());
        }
        for (j, q) in self.col_marginals.iter().enumerate() {
            let col: f64 = self.matrix.iter().map(|r| r[j]).sum();
            err = err.max((col - q).abs());
        }
        err
    }

    pub fn positive_entries(&self) -> usize {
        self.matrix.iter().flatten().filter(|&&x| x > 0.0).count()
    }
}

#[derive(Debug, Clone)]
pub struct Transport {
    /// `(sum_ij pi_ij ||xi_i - zeta_j||^l)^(1/l)` at the optimal plan.
    pub value: f64,
    pub plan: TransportPlan,
    pub pivots: usize,
}

/// Optimal transport between `p` and `q`.
pub fn wasserstein(p: &DiscreteDistribution, q: &DiscreteDistribution, metric: &Metric) -> Result<Transport> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let costs = distance_matrix(p.points(), q.points(), metric)?;
    let n = p.len();
    let m = q.len();
    let cost: Vec<f64> = (0..n).flat_map(|i| costs.row(i).to_vec()).collect();
    let mut solver = TransportSimplex::new(p.weights(), q.weights(), cost);
    let pivots = solver.solve();
    let total = solver.objective();
    let matrix = (0..n).map(|i| (0..m).map(|j| solver.flow(i, j)).collect()).collect();
    Ok(Transport {
        value: metric.root(total),
        plan: TransportPlan { matrix, row_marginals: p.weights().to_vec(), col_marginals: q.weights().to_vec() },
        pivots,
    })
}

/// Transportation simplex on a dense `n x m` cost matrix.
///
/// The basis always holds exactly `n + m - 1` cells forming a spanning tree
/// of the bipartite row/column graph; degenerate basic cells carry zero flow.
struct TransportSimplex {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    flow: Vec<f64>,
    basic: Vec<bool>,
    /// Basic cells incident to each node; rows are nodes `0..n`, columns `n..n+m`.
    adj: Vec<Vec<usize>>,
}

impl TransportSimplex {
    fn new(supply: &[f64], demand: &[f64], cost: Vec<f64>) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut s =
            Self { n, m, cost, flow: vec![0.0; n * m], basic: vec![false; n * m], adj: vec![Vec::new(); n + m] };
        s.northwest_corner(supply, demand);
        s
    }

    fn cell(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    fn flow(&self, i: usize, j: usize) -> f64 {
        self.flow[self.cell(i, j)]
    }

    fn objective(&self) -> f64 {
        self.flow.iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn add_basic(&mut self, c: usize) {
        self.basic[c] = true;
        let (i, j) = (c / self.m, c % self.m);
        self.adj[i].push(c);
        self.adj[self.n + j].push(c);
    }

    fn remove_basic(&mut self, c: usize) {
        self.basic[c] = false;
        let (i, j) = (c / self.m, c % self.m);
        self.adj[i].retain(|&x| x != c);
        self.adj[self.n + j].retain(|&x| x != c);
    }

    /// Staircase from `(0, 0)` to `(n-1, m-1)`: exactly `n + m - 1` cells.
    fn northwest_corner(&mut self, supply: &[f64], demand: &[f64]) {
        let (mut a, mut b) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = if i == self.n - 1 && j == self.m - 1 {
                // Absorb rounding residue so the last cell closes both sums.
                a[i].max(b[j]).max(0.0)
            } else {
                a[i].min(b[j]).max(0.0)
            };
            let c = self.cell(i, j);
            self.flow[c] = x;
            self.add_basic(c);
            a[i] -= x;
            b[j] -= x;
            if i == self.n - 1 && j == self.m - 1 {
                break;
            }
            if i == self.n - 1 {
                j += 1;
            } else if j == self.m - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.n + self.m];
        let mut stack = vec![0usize];
        pot[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &c in &self.adj[node] {
                let (i, j) = (c / self.m, c % self.m);
                let other = if node < self.n { self.n + j } else { i };
                if pot[other].is_nan() {
                    pot[other] = self.cost[c] - pot[node];
                    stack.push(other);
                }
            }
        }
        let v = pot.split_off(self.n);
        (pot, v)
    }

    /// Basic cells on the tree path from row `i` to column `j`, in order.
    fn tree_path(&self, i: usize, j: usize) -> Vec<usize> {
        let target = self.n + j;
        let mut via = vec![usize::MAX; self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &c in &self.adj[node] {
                let (r, k) = (c / self.m, c % self.m);
                let other = if node < self.n { self.n + k } else { r };
                if !seen[other] {
                    seen[other] = true;
                    via[other] = c;
                    stack.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let c = via[node];
            path.push(c);
            let (r, k) = (c / self.m, c % self.m);
            node = if node < self.n { self.n + k } else { r };
        }
        path.reverse();
        path
    }

    /// Runs pivots until every reduced cost is nonnegative; returns the count.
    fn solve(&mut self) -> usize {
        let scale = self.cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        let tol = 1e-12 * (1.0 + scale);
        let mut pivots = 0;
        let mut degenerate_streak = 0;
        loop {
            let (u, v) = self.potentials();
            let reduced = |c: usize| self.cost[c] - u[c / self.m] - v[c % self.m];
            let candidates = (0..self.n * self.m).filter(|&c| !self.basic[c] && reduced(c) < -tol);
            // Most negative reduced cost, switching to the lowest index after a
            // long run of zero-step pivots so that cycling cannot occur.
            let entering = if degenerate_streak > self.n + self.m {
                candidates.min()
            } else {
                candidates.min_by(|&a, &b| reduced(a).total_cmp(&reduced(b)).then(a.cmp(&b)))
            };
            let Some(enter) = entering else { return pivots };
            let (i, j) = (enter / self.m, enter % self.m);
            // Cycle: +enter, then alternating -, + along the path row i -> column j.
            let path = self.tree_path(i, j);
            let leave = path
                .iter()
                .step_by(2)
                .copied()
                .min_by(|&a, &b| self.flow[a].total_cmp(&self.flow[b]).then(a.cmp(&b)))
                .expect("cycle has a decreasing cell");
            let theta = self.flow[leave];
            degenerate_streak = if theta > 0.0 { 0 } else { degenerate_streak + 1 };
            self.flow[enter] = theta;
            for (k, &c) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[c] = (self.flow[c] - theta).max(0.0);
                } else {
                    self.flow[c] += theta;
                }
            }
            self.flow[leave] = 0.0;
            self.remove_basic(leave);
            self.add_basic(enter);
            pivots += 1;
        }
    }
}

/// Closed-form distance to the best distribution supported on a fixed set.
#[derive(Debug, Clone)]
pub struct SupportFit {
    pub value: f64,
    /// Index into the support of each atom's nearest point.
    pub labels: Vec<usize>,
    /// Support indices that received at least one atom, ascending.
    pub kept: Vec<usize>,
    /// Cells over the atoms, aligned with `kept`.
    pub partition: Partition,
    /// Kept support points weighted by the mass they receive.
    pub reduced: DiscreteDistribution,
}

/// Distance from `p` to the closest distribution supported on `support`.
///
/// Each atom moves to its nearest support point (ties go to the lowest
/// index). Support points that attract no atom are dropped from `reduced`.
pub fn dist_to_support(p: &DiscreteDistribution, support: &[Vec<f64>], metric: &Metric) -> Result<SupportFit> {
    if support.is_empty() {
        return Err(Error::Empty("support set"));
    }
    if let Some(s) = support.iter().find(|s| s.len() != p.dim()) {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: s.len() });
    }
    let mut labels = Vec::with_capacity(p.len());
    let mut total = 0.0;
    for (x, w) in p.points().iter().zip(p.weights()) {
        let (best, cost) = nearest(x, support, metric);
        labels.push(best);
        total += w * cost;
    }
    let (kept, partition, reduced) = regroup(p, support, &labels)?;
    Ok(SupportFit { value: metric.root(total), labels, kept, partition, reduced })
}

/// Index and powered distance of the nearest center, lowest index on ties.
pub(crate) fn nearest(x: &[f64], centers: &[Vec<f64>], metric: &Metric) -> (usize, f64) {
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = metric.cost(x, c);
        if d < best_cost {
            best_cost = d;
            best = j;
        }
    }
    (best, best_cost)
}

pub(crate) fn regroup(
    p: &DiscreteDistribution,
    support: &[Vec<f64>],
    labels: &[usize],
) -> Result<(Vec<usize>, Partition, DiscreteDistribution)> {
    let mut cells = vec![Vec::new(); support.len()];
    for (i, &l) in labels.iter().enumerate() {
        cells[l].push(i);
    }
    let kept: Vec<usize> = (0..support.len()).filter(|&j| !cells[j].is_empty()).collect();
    let points: Vec<Vec<f64>> = kept.iter().map(|&j| support[j].clone()).collect();
    let weights: Vec<f64> = kept.iter().map(|&j| cells[j].iter().map(|&i| p.weights()[i]).sum()).collect();
    let cells: Vec<Vec<usize>> = kept.iter().map(|&j| std::mem::take(&mut cells[j])).collect();
    let partition = Partition::new(cells, p.len())?;
    let reduced = DiscreteDistribution::new(points, weights)?;
    Ok((kept, partition, reduced))
}
