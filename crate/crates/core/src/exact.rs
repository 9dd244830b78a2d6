//! Exact reduction by enumeration, and export of the mixed-integer models in
//! CPLEX-LP text.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::distribution::{DiscreteDistribution, Metric, Norm, Partition, ReductionResult};
use crate::error::{Error, Result};
use crate::geometry::{cell_cost, centroid_best_effort, centroid_is_exact, distance_matrix};
use crate::heuristics::{
    k_means_with_tol, local_search, result_from_indices, KMeansInit, LocalSearchInit, SwapStrategy,
};
use crate::numfmt::format_g17;

pub const DEFAULT_BUDGET: u64 = 10_000_000;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DISCRETE_EXACT: &str = "discrete-exact";
pub const CONTINUOUS_EXACT: &str = "continuous-exact";

/// `C(n, k)` as a float (saturates to infinity).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Stirling number of the second kind `S(n, k)` as a float.
pub fn stirling2(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut row = vec![0.0; k + 1];
    row[0] = 1.0;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = j as f64 * row[j] + row[j - 1];
        }
        row[0] = 0.0;
    }
    row[k]
}

fn check_m(p: &DiscreteDistribution, m: usize) -> Result<()> {
    if m < 1 || m > p.len() {
        return Err(Error::OutOfRange(format!("m = {m} must lie in 1..={}", p.len())));
    }
    Ok(())
}

fn check_budget(required: f64, budget: u64) -> Result<()> {
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(())
}

/// Best `m`-subset of the atoms as support set.
///
/// Depth-first search over index subsets in lexicographic order, seeded with
/// a local-search incumbent and pruned by two lower bounds. Among subsets of
/// equal value the lexicographically smallest wins.
pub fn discrete_exact(p: &DiscreteDistribution, m: usize, metric: &Metric, budget: u64) -> Result<ReductionResult> {
    check_m(p, m)?;
    let n = p.len();
    check_budget(binomial(n, m), budget)?;
    let dm = distance_matrix(p.points(), p.points(), metric)?;
    let pw = p.weights();
    let cost: Vec<Vec<f64>> = (0..n).map(|j| dm.row(j).iter().zip(pw).map(|(d, w)| w * d).collect()).collect();
    let mut suffix_min = vec![vec![f64::INFINITY; n]; n + 1];
    for j in (0..n).rev() {
        for i in 0..n {
            suffix_min[j][i] = cost[j][i].min(suffix_min[j + 1][i]);
        }
    }

    let seed = local_search(p, m, metric, LocalSearchInit::MostFrequent, SwapStrategy::BestFit, 0.0)?;
    let mut incumbent = seed.support_indices.unwrap_or_default();
    for j in 0..n {
        if incumbent.len() == m {
            break;
        }
        if !incumbent.contains(&j) {
            incumbent.push(j);
        }
    }
    incumbent.sort_unstable();
    let best = (0..n).map(|i| incumbent.iter().map(|&j| cost[j][i]).fold(f64::INFINITY, f64::min)).sum();

    let mut search = SubsetSearch {
        cost: &cost,
        suffix_min: &suffix_min,
        n,
        m,
        best,
        best_set: incumbent,
        chosen: Vec::with_capacity(m),
        nodes: 0,
        leaves: 0,
    };
    search.descend(0, &vec![f64::INFINITY; n]);
    let SubsetSearch { best_set, nodes, leaves, .. } = search;
    result_from_indices(p, &best_set, metric, DISCRETE_EXACT, nodes, leaves)
}

struct SubsetSearch<'a> {
    cost: &'a [Vec<f64>],
    suffix_min: &'a [Vec<f64>],
    n: usize,
    m: usize,
    best: f64,
    best_set: Vec<usize>,
    chosen: Vec<usize>,
    nodes: usize,
    leaves: usize,
}

impl SubsetSearch<'_> {
    fn offer(&mut self, value: f64, last: usize) {
        let better = value < self.best
            || (value == self.best && self.chosen.iter().copied().chain([last]).lt(self.best_set.iter().copied()));
        if better {
            self.best = value;
            self.best_set = self.chosen.iter().copied().chain([last]).collect();
        }
    }

    fn descend(&mut self, start: usize, current: &[f64]) {
        let n = self.n;
        let remaining = self.m - self.chosen.len();
        if remaining == 1 {
            for j in start..n {
                self.leaves += 1;
                let row = &self.cost[j];
                let mut total = 0.0;
                let mut cut = false;
                for i in 0..n {
                    total += current[i].min(row[i]);
                    if total > self.best {
                        cut = true;
                        break;
                    }
                }
                if !cut {
                    self.offer(total, j);
                }
            }
            return;
        }
        let mut next = vec![0.0; n];
        for j in start..=n - remaining {
            self.nodes += 1;
            for i in 0..n {
                next[i] = current[i].min(self.cost[j][i]);
            }
            let later = &self.suffix_min[j + 1];
            let bound: f64 = (0..n).map(|i| next[i].min(later[i])).sum();
            if bound > self.best {
                continue;
            }
            let picks = remaining - 1;
            if picks >= 2 {
                let total: f64 = next.iter().sum();
                let mut gains: Vec<f64> =
                    (j + 1..n).map(|c| (0..n).map(|i| (next[i] - self.cost[c][i]).max(0.0)).sum()).collect();
                gains.sort_unstable_by(|a, b| b.total_cmp(a));
                let top: f64 = gains.iter().take(picks).sum();
                if total - top - 1e-9 * total > self.best {
                    continue;
                }
            }
            self.chosen.push(j);
            self.descend(j + 1, &next);
            self.chosen.pop();
        }
    }
}

/// Cell costs with memoization over member sets.
struct CellCosts<'a> {
    p: &'a DiscreteDistribution,
    metric: &'a Metric,
    tol: f64,
    exact: bool,
    memo: HashMap<Vec<u64>, f64>,
}

impl<'a> CellCosts<'a> {
    fn new(p: &'a DiscreteDistribution, metric: &'a Metric, tol: f64) -> Self {
        let exact = centroid_is_exact(metric, p.dim());
        CellCosts { p, metric, tol, exact, memo: HashMap::new() }
    }

    /// Cost and center of one cell. For iterative centroids the best atom of
    /// the cell is also tried, so the cost never exceeds the discrete one.
    fn solve(&self, members: &[usize]) -> Result<(f64, Vec<f64>)> {
        let pts: Vec<Vec<f64>> = members.iter().map(|&i| self.p.point(i).to_vec()).collect();
        let ws: Vec<f64> = members.iter().map(|&i| self.p.weights()[i]).collect();
        if pts.len() == 1 {
            return Ok((0.0, pts[0].clone()));
        }
        let center = centroid_best_effort(&pts, &ws, self.metric, self.tol)?;
        let mut best = (cell_cost(&pts, &ws, &center, self.metric), center);
        if !self.exact {
            for atom in &pts {
                let c = cell_cost(&pts, &ws, atom, self.metric);
                if c < best.0 {
                    best = (c, atom.clone());
                }
            }
        }
        Ok(best)
    }

    fn cost(&mut self, members: &[usize]) -> Result<f64> {
        if members.len() == 1 {
            return Ok(0.0);
        }
        let mut key = vec![0u64; self.p.len().div_ceil(64)];
        for &i in members {
            key[i / 64] |= 1 << (i % 64);
        }
        if let Some(&c) = self.memo.get(&key) {
            return Ok(c);
        }
        let c = self.solve(members)?.0;
        self.memo.insert(key, c);
        Ok(c)
    }
}

fn partition_result(
    p: &DiscreteDistribution,
    cells: Vec<Vec<usize>>,
    costs: &CellCosts,
    metric: &Metric,
    iterations: usize,
    evaluations: usize,
) -> Result<ReductionResult> {
    let mut support = Vec::with_capacity(cells.len());
    let mut weights = Vec::with_capacity(cells.len());
    let mut total = 0.0;
    for cell in &cells {
        let (c, center) = costs.solve(cell)?;
        total += c;
        support.push(center);
        weights.push(cell.iter().map(|&i| p.weights()[i]).sum());
    }
    Ok(ReductionResult {
        support,
        weights,
        partition: Partition::new(cells, p.len())?,
        value: metric.root(total),
        algorithm: CONTINUOUS_EXACT.to_string(),
        iterations,
        evaluations,
        support_indices: None,
    })
}

/// Best distribution with at most `m` atoms anywhere in space.
///
/// Enumerates partitions into exactly `m` nonempty cells as restricted-growth
/// strings, pruning partial partitions whose cost already exceeds the
/// incumbent. One-dimensional inputs use a dynamic program over intervals of
/// the sorted atoms instead, which needs no budget.
///
/// For iterative centroids two partitions count as tied when they differ by
/// less than `10 * tol`; the lexicographically smaller string is kept.
pub fn continuous_exact(
    p: &DiscreteDistribution,
    m: usize,
    metric: &Metric,
    tol: f64,
    budget: u64,
) -> Result<ReductionResult> {
    check_m(p, m)?;
    let n = p.len();
    let mut costs = CellCosts::new(p, metric, tol);
    if m == n {
        let cells = (0..n).map(|i| vec![i]).collect();
        return partition_result(p, cells, &costs, metric, 1, n);
    }
    if m == 1 {
        return partition_result(p, vec![(0..n).collect()], &costs, metric, 1, 1);
    }
    if p.dim() == 1 {
        return interval_partition(p, m, metric, costs);
    }
    check_budget(stirling2(n, m), budget)?;

    let heuristic = k_means_with_tol(p, m, metric, KMeansInit::Seed(0), 1_000, tol)?;
    let margin = if costs.exact { 0.0 } else { 10.0 * tol };
    let mut search = PartitionSearch {
        n,
        m,
        margin,
        best: metric.power(heuristic.value) * (1.0 + 1e-9) + margin + f64::MIN_POSITIVE,
        best_cells: None,
        blocks: Vec::with_capacity(m),
        block_cost: Vec::with_capacity(m),
        nodes: 0,
        leaves: 0,
    };
    search.descend(0, &mut costs)?;
    let cells = match search.best_cells.take() {
        Some(cells) => cells,
        // The heuristic bound was never met; fall back to its partition.
        None => heuristic.partition.cells().to_vec(),
    };
    partition_result(p, cells, &costs, metric, search.nodes, search.leaves)
}

struct PartitionSearch {
    n: usize,
    m: usize,
    margin: f64,
    best: f64,
    best_cells: Option<Vec<Vec<usize>>>,
    blocks: Vec<Vec<usize>>,
    block_cost: Vec<f64>,
    nodes: usize,
    leaves: usize,
}

impl PartitionSearch {
    fn slack(&self) -> f64 {
        if self.margin > 0.0 {
            self.margin
        } else {
            1e-12 * (1.0 + self.best.abs())
        }
    }

    fn descend(&mut self, i: usize, costs: &mut CellCosts) -> Result<()> {
        self.nodes += 1;
        if i == self.n {
            if self.blocks.len() == self.m {
                self.leaves += 1;
                let value: f64 = self.block_cost.iter().sum();
                let improves = match self.best_cells {
                    None => value <= self.best,
                    Some(_) => value < self.best - self.slack(),
                };
                if improves {
                    self.best = value;
                    self.best_cells = Some(self.blocks.clone());
                }
            }
            return Ok(());
        }
        let open = self.blocks.len();
        let atoms_left = self.n - i - 1;
        if atoms_left >= self.m - open {
            for b in 0..open {
                self.blocks[b].push(i);
                let old = self.block_cost[b];
                let new = costs.cost(&self.blocks[b])?;
                self.block_cost[b] = new;
                let partial: f64 = self.block_cost.iter().sum();
                if partial <= self.best + self.slack() {
                    self.descend(i + 1, costs)?;
                }
                self.block_cost[b] = old;
                self.blocks[b].pop();
            }
        }
        if open < self.m {
            self.blocks.push(vec![i]);
            self.block_cost.push(0.0);
            self.descend(i + 1, costs)?;
            self.blocks.pop();
            self.block_cost.pop();
        }
        Ok(())
    }
}

/// Optimal cells on the line are intervals of the sorted atoms.
fn interval_partition(
    p: &DiscreteDistribution,
    m: usize,
    metric: &Metric,
    mut costs: CellCosts,
) -> Result<ReductionResult> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.point(a)[0].total_cmp(&p.point(b)[0]).then(a.cmp(&b)));
    let mut interval = vec![vec![f64::NAN; n + 1]; n];
    let mut evaluations = 0;
    let mut block = |a: usize, b: usize, costs: &mut CellCosts| -> Result<f64> {
        if interval[a][b].is_nan() {
            evaluations += 1;
            let mut members = order[a..b].to_vec();
            members.sort_unstable();
            interval[a][b] = costs.cost(&members)?;
        }
        Ok(interval[a][b])
    };
    // best[k][i]: k+1 intervals covering the first i sorted atoms.
    let mut best = vec![vec![f64::INFINITY; n + 1]; m];
    let mut cut = vec![vec![0usize; n + 1]; m];
    for (i, slot) in best[0].iter_mut().enumerate().skip(1) {
        *slot = block(0, i, &mut costs)?;
    }
    for k in 1..m {
        for i in k + 1..=n {
            for j in k..i {
                let v = best[k - 1][j] + block(j, i, &mut costs)?;
                if v < best[k][i] {
                    best[k][i] = v;
                    cut[k][i] = j;
                }
            }
        }
    }
    let mut bounds = vec![n];
    let mut i = n;
    for k in (1..m).rev() {
        i = cut[k][i];
        bounds.push(i);
    }
    bounds.push(0);
    bounds.reverse();
    let mut cells: Vec<Vec<usize>> = bounds
        .windows(2)
        .map(|w| {
            let mut c = order[w[0]..w[1]].to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    cells.sort_by_key(|c| c[0]);
    partition_result(p, cells, &costs, metric, m, evaluations)
}

/// Relation of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// A coefficient applied to a named variable.
pub type Term = (f64, String);

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Variable range; infinite ends are omitted from the text.
#[derive(Debug, Clone, PartialEq)]
pub struct VarBound {
    pub var: String,
    pub lower: f64,
    pub upper: f64,
}

/// A mixed-integer linear model ready for LP-text rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    /// Leading comment lines.
    pub comments: Vec<String>,
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint>,
    /// Continuous variables with their ranges.
    pub bounds: Vec<VarBound>,
    pub binaries: Vec<String>,
    pub big_m: Option<f64>,
}

fn number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format_g17(x)
    }
}

const TERMS_PER_LINE: usize = 6;

fn write_expr(out: &mut String, terms: &[Term], unit_coefficients: bool) {
    for (k, (c, v)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() && *c != 0.0 { "-" } else { "+" };
        let mag = c.abs();
        if k == 0 {
            if sign == "-" {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if unit_coefficients && mag == 1.0 {
            let _ = write!(out, " {v}");
        } else {
            let _ = write!(out, " {} {v}", number(mag));
        }
    }
}

impl MilpModel {
    /// CPLEX-LP rendering with LF line endings.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "\\ {c}");
        }
        out.push_str("Minimize\n obj:");
        write_expr(&mut out, &self.objective, false);
        out.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(out, " {}:", c.name);
            write_expr(&mut out, &c.terms, true);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), number(c.rhs));
        }
        out.push_str("Bounds\n");
        for b in &self.bounds {
            match (b.lower.is_finite(), b.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", number(b.lower), b.var, number(b.upper));
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", b.var, number(b.lower));
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", b.var, number(b.upper));
                }
                (false, false) => {
                    let _ = writeln!(out, " {} free", b.var);
                }
            }
        }
        if !self.binaries.is_empty() {
            out.push_str("Binaries\n");
            for chunk in self.binaries.chunks(TERMS_PER_LINE) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }

    /// Objective value at the given assignment; absent variables count as 0.
    pub fn objective_value(&self, values: &HashMap<String, f64>) -> f64 {
        self.objective.iter().map(|(c, v)| c * values.get(v).copied().unwrap_or(0.0)).sum()
    }

    /// Largest violation of any constraint or bound at the assignment.
    pub fn violation(&self, values: &HashMap<String, f64>) -> f64 {
        let get = |v: &str| values.get(v).copied().unwrap_or(0.0);
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.terms.iter().map(|(a, v)| a * get(v)).sum();
            match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self.bounds.iter().map(|b| {
            let x = get(&b.var);
            (b.lower - x).max(x - b.upper).max(0.0)
        });
        let binaries = self.binaries.iter().map(|v| {
            let x = get(v);
            x.min((1.0 - x).abs()).abs()
        });
        rows.chain(bounds).chain(binaries).fold(0.0, f64::max)
    }

    /// Names of all declared variables, in declaration order.
    pub fn variables(&self) -> Vec<&str> {
        self.bounds.iter().map(|b| b.var.as_str()).chain(self.binaries.iter().map(String::as_str)).collect()
    }
}

fn describe(metric: &Metric) -> String {
    let norm = match metric.norm() {
        Norm::L1 => "1-norm",
        Norm::L2 => "2-norm",
        Norm::LInf => "inf-norm",
    };
    format!("order {} Wasserstein distance, {norm}", number(metric.order()))
}

/// Discrete reduction as a MILP: `pi_i_j` moves atom `i` to atom `j`,
/// `lambda_j` keeps atom `j`. Indices in names are 1-based.
pub fn export_milp_discrete(p: &DiscreteDistribution, m: usize, metric: &Metric) -> Result<MilpModel> {
    check_m(p, m)?;
    let n = p.len();
    let pi = |i: usize, j: usize| format!("pi_{}_{}", i + 1, j + 1);
    let lambda = |j: usize| format!("lambda_{}", j + 1);
    let mut objective = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            objective.push((p.weights()[i] * metric.cost(p.point(i), p.point(j)), pi(i, j)));
        }
    }
    let mut constraints = Vec::with_capacity(n * n + n + 1);
    for i in 0..n {
        constraints.push(Constraint {
            name: format!("assign_{}", i + 1),
            terms: (0..n).map(|j| (1.0, pi(i, j))).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for i in 0..n {
        for j in 0..n {
            constraints.push(Constraint {
                name: format!("open_{}_{}", i + 1, j + 1),
                terms: vec![(1.0, pi(i, j)), (-1.0, lambda(j))],
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }
    constraints.push(Constraint {
        name: "count".to_string(),
        terms: (0..n).map(|j| (1.0, lambda(j))).collect(),
        sense: Sense::Eq,
        rhs: m as f64,
    });
    let bounds = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| VarBound { var: pi(i, j), lower: 0.0, upper: f64::INFINITY })
        .collect();
    Ok(MilpModel {
        comments: vec![
            format!("Discrete scenario reduction: n = {n}, m = {m}, {}", describe(metric)),
            "Objective rows are weighted by the atom probabilities; uniform input gives 1/n.".to_string(),
        ],
        objective,
        constraints,
        bounds,
        binaries: (0..n).map(lambda).collect(),
        big_m: None,
    })
}

/// Continuous reduction for order 1 under the 1-norm or the max-norm as a
/// MILP: `pi_i_j` assigns atom `i` to center `j`, `zeta_j_k` are center
/// coordinates, `c_i` the transport cost of atom `i` and `phi_i_j_k` the
/// norm epigraph variables.
pub fn export_milp_continuous(p: &DiscreteDistribution, m: usize, metric: &Metric) -> Result<MilpModel> {
    check_m(p, m)?;
    if metric.order() != 1.0 || metric.norm() == Norm::L2 {
        return Err(Error::UnsupportedMetric(format!(
            "the continuous model is linear only for order 1 with the 1-norm or inf-norm; \
             order {} with the {} norm needs a mixed-integer conic solver",
            number(metric.order()),
            metric.norm()
        )));
    }
    let n = p.len();
    let d = p.dim();
    let linf = metric.norm() == Norm::LInf;
    let big_m = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| metric.cost(p.point(i), p.point(j)))
        .fold(0.0, f64::max);
    let pi = |i: usize, j: usize| format!("pi_{}_{}", i + 1, j + 1);
    let c = |i: usize| format!("c_{}", i + 1);
    let zeta = |j: usize, k: usize| format!("zeta_{}_{}", j + 1, k + 1);
    let phi = |i: usize, j: usize, k: usize| format!("phi_{}_{}_{}", i + 1, j + 1, if linf { 1 } else { k + 1 });

    let objective = (0..n).map(|i| (p.weights()[i], c(i))).collect();
    let mut constraints = Vec::new();
    for i in 0..n {
        constraints.push(Constraint {
            name: format!("assign_{}", i + 1),
            terms: (0..m).map(|j| (1.0, pi(i, j))).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for i in 0..n {
        for j in 0..m {
            let tag = format!("{}_{}", i + 1, j + 1);
            for k in 0..d {
                let x = p.point(i)[k];
                constraints.push(Constraint {
                    name: format!("above_{tag}_{}", k + 1),
                    terms: vec![(1.0, phi(i, j, k)), (1.0, zeta(j, k))],
                    sense: Sense::Ge,
                    rhs: x,
                });
                constraints.push(Constraint {
                    name: format!("below_{tag}_{}", k + 1),
                    terms: vec![(1.0, phi(i, j, k)), (-1.0, zeta(j, k))],
                    sense: Sense::Ge,
                    rhs: -x,
                });
            }
            let mut terms: Vec<Term> =
                if linf { vec![(1.0, phi(i, j, 0))] } else { (0..d).map(|k| (1.0, phi(i, j, k))).collect() };
            terms.push((-1.0, c(i)));
            terms.push((big_m, pi(i, j)));
            constraints.push(Constraint { name: format!("link_{tag}"), terms, sense: Sense::Le, rhs: big_m });
        }
    }
    let mut bounds: Vec<VarBound> = (0..n).map(|i| VarBound { var: c(i), lower: 0.0, upper: f64::INFINITY }).collect();
    for j in 0..m {
        for k in 0..d {
            let (lo, hi) =
                p.points().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[k]), hi.max(x[k])));
            bounds.push(VarBound { var: zeta(j, k), lower: lo, upper: hi });
        }
    }
    let phi_per_pair = if linf { 1 } else { d };
    for i in 0..n {
        for j in 0..m {
            for k in 0..phi_per_pair {
                bounds.push(VarBound { var: phi(i, j, k), lower: 0.0, upper: f64::INFINITY });
            }
        }
    }
    let binaries = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| pi(i, j)).collect();
    Ok(MilpModel {
        comments: vec![
            format!("Continuous scenario reduction: n = {n}, m = {m}, d = {d}, {}", describe(metric)),
            format!("Big-M is the support diameter {}; objective rows use the atom probabilities.", number(big_m)),
        ],
        objective,
        constraints,
        bounds,
        binaries,
        big_m: Some(big_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::uniform(xs.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    fn brute_discrete(p: &DiscreteDistribution, m: usize, metric: &Metric) -> f64 {
        let n = p.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let cost: f64 = (0..n)
                .map(|i| {
                    let d = (0..n)
                        .filter(|j| mask >> j & 1 == 1)
                        .map(|j| metric.cost(p.point(i), p.point(j)))
                        .fold(f64::INFINITY, f64::min);
                    p.weights()[i] * d
                })
                .sum();
            best = best.min(cost);
        }
        metric.root(best)
    }

    #[test]
    fn counting() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(201, 4), 65_998_350.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(stirling2(4, 2), 7.0);
        assert_eq!(stirling2(9, 3), 3025.0);
        assert_eq!(stirling2(5, 5), 1.0);
    }

    #[test]
    fn two_antipodal_points() {
        let p = DiscreteDistribution::uniform(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let r = discrete_exact(&p, 1, &Metric::l2_euclidean(), DEFAULT_BUDGET).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.support_indices.as_deref(), Some(&[0][..]));
    }

    #[test]
    fn m_equals_n_is_free() {
        let p = line(&[0.0, 1.0, 4.0]);
        let m = Metric::l1(Norm::L1);
        assert_eq!(discrete_exact(&p, 3, &m, DEFAULT_BUDGET).unwrap().value, 0.0);
        assert_eq!(continuous_exact(&p, 3, &m, DEFAULT_TOL, DEFAULT_BUDGET).unwrap().value, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let p = line(&(0..30).map(f64::from).collect::<Vec<_>>());
        match discrete_exact(&p, 10, &Metric::l1(Norm::L1), 1000) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, binomial(30, 10));
                assert_eq!(budget, 1000);
            }
            other => panic!("{other:?}"),
        }
        let q = DiscreteDistribution::uniform((0..20).map(|i| vec![i as f64, 0.5 * i as f64]).collect()).unwrap();
        assert!(matches!(
            continuous_exact(&q, 4, &Metric::l2_euclidean(), DEFAULT_TOL, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn discrete_matches_brute_force() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64 * 1.7).sin() * 3.0, (i as f64 * 0.9).cos()]).collect();
        let p = DiscreteDistribution::from_masses(pts, &[1.0, 2.0, 1.0, 3.0, 1.0, 1.0, 2.0, 1.0, 1.0]).unwrap();
        for metric in [Metric::l1(Norm::L1), Metric::l2_euclidean(), Metric::l1(Norm::LInf)] {
            for m in 1..=9 {
                let r = discrete_exact(&p, m, &metric, DEFAULT_BUDGET).unwrap();
                let b = brute_discrete(&p, m, &metric);
                assert!((r.value - b).abs() <= 1e-12 * (1.0 + b), "m={m}: {} vs {b}", r.value);
                r.check(&p).unwrap();
            }
        }
    }

    #[test]
    fn ties_go_to_the_smallest_subset() {
        let p = line(&[0.0, 1.0, 2.0, 3.0]);
        let r = discrete_exact(&p, 1, &Metric::l1(Norm::L1), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.support_indices.as_deref(), Some(&[1][..]));
    }

    #[test]
    fn continuous_on_the_line() {
        let p = line(&[0.0, 0.1, 10.0, 10.1]);
        let r = continuous_exact(&p, 2, &Metric::l2_euclidean(), DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
        assert!((r.value - 0.05).abs() < 1e-12);
        assert_eq!(r.partition.cells(), &[vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn interval_program_agrees_with_enumeration() {
        // Embedding the line in the plane forces the general enumeration.
        let xs = [0.3, -1.2, 2.5, 0.9, 4.0, 3.1, -0.4];
        let p1 = line(&xs);
        let p2 = DiscreteDistribution::uniform(xs.iter().map(|x| vec![*x, 0.0]).collect()).unwrap();
        for metric in [Metric::l2_euclidean(), Metric::l1(Norm::L1)] {
            for m in 1..=7 {
                let a = continuous_exact(&p1, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
                let b = continuous_exact(&p2, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
                assert!((a.value - b.value).abs() < 1e-12, "m={m}: {} vs {}", a.value, b.value);
                a.check(&p1).unwrap();
            }
        }
    }

    #[test]
    fn continuous_never_exceeds_discrete() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![(i as f64).sin(), (2.0 * i as f64).cos()]).collect();
        let p = DiscreteDistribution::uniform(pts).unwrap();
        for metric in [Metric::l2_euclidean(), Metric::l1(Norm::L2), Metric::l1(Norm::LInf)] {
            for m in 1..=7 {
                let c = continuous_exact(&p, m, &metric, DEFAULT_TOL, DEFAULT_BUDGET).unwrap();
                let d = discrete_exact(&p, m, &metric, DEFAULT_BUDGET).unwrap();
                assert!(c.value <= d.value + 1e-12, "m={m}");
            }
        }
    }

    #[test]
    fn discrete_model_structure() {
        let p = line(&[0.0, 2.0]);
        let model = export_milp_discrete(&p, 1, &Metric::l1(Norm::L1)).unwrap();
        assert_eq!(model.bounds.len(), 4);
        assert_eq!(model.binaries, vec!["lambda_1", "lambda_2"]);
        let lp = model.to_lp();
        assert!(lp.contains(" count: lambda_1 + lambda_2 = 1\n"), "{lp}");
        assert!(!lp.contains('\r'));

        let values: HashMap<String, f64> =
            [("lambda_1", 1.0), ("pi_1_1", 1.0), ("pi_2_1", 1.0)].map(|(k, v)| (k.to_string(), v)).into();
        assert_eq!(model.violation(&values), 0.0);
        assert_eq!(model.objective_value(&values), 1.0);
    }

    #[test]
    fn continuous_model_structure() {
        let p = line(&[0.0, 3.0]);
        let model = export_milp_continuous(&p, 1, &Metric::l1(Norm::L1)).unwrap();
        assert_eq!(model.big_m, Some(3.0));
        assert_eq!(model.constraints.len(), 2 * (2 + 1) + 2);

        let single = line(&[1.5]);
        let model = export_milp_continuous(&single, 1, &Metric::l1(Norm::LInf)).unwrap();
        let values: HashMap<String, f64> = [("pi_1_1", 1.0), ("zeta_1_1", 1.5)].map(|(k, v)| (k.to_string(), v)).into();
        assert_eq!(model.violation(&values), 0.0);
        assert_eq!(model.objective_value(&values), 0.0);

        assert!(matches!(export_milp_continuous(&p, 1, &Metric::l2_euclidean()), Err(Error::UnsupportedMetric(_))));
        assert!(export_milp_continuous(&p, 1, &Metric::l1(Norm::L2)).is_err());
    }

    #[test]
    fn every_variable_is_declared_once() {
        let p = DiscreteDistribution::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        for model in [
            export_milp_discrete(&p, 2, &Metric::l1(Norm::L1)).unwrap(),
            export_milp_continuous(&p, 2, &Metric::l1(Norm::L1)).unwrap(),
            export_milp_continuous(&p, 2, &Metric::l1(Norm::LInf)).unwrap(),
        ] {
            let declared = model.variables();
            let unique: std::collections::HashSet<_> = declared.iter().collect();
            assert_eq!(unique.len(), declared.len());
            for c in &model.constraints {
                for (_, v) in &c.terms {
                    assert!(unique.contains(&v.as_str()), "{v} undeclared");
                }
            }
        }
    }

    #[test]
    fn negative_coordinates_render() {
        let p = line(&[-1.5, 0.25]);
        let lp = export_milp_continuous(&p, 1, &Metric::l1(Norm::L1)).unwrap().to_lp();
        assert!(lp.contains(" above_1_1_1: phi_1_1_1 + zeta_1_1 >= -1.5\n"), "{lp}");
        assert!(lp.contains(" below_1_1_1: phi_1_1_1 - zeta_1_1 >= 1.5\n"), "{lp}");
        assert!(lp.contains(" -1.5 <= zeta_1_1 <= 0.25\n"), "{lp}");
    }
}
