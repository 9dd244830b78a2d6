#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scenred::{DiscreteDistribution, Metric, Norm};

/// Transport cost by enumerating every basic feasible solution: each basis
/// of the transportation polytope is a spanning tree of the complete
/// bipartite graph on rows and columns.
pub fn brute_force_transport(p: &DiscreteDistribution, q: &DiscreteDistribution, metric: &Metric) -> f64 {
    let (n, m) = (p.len(), q.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let cost: Vec<f64> = cells.iter().map(|&(i, j)| metric.cost(p.point(i), q.point(j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(n + m - 1);
    let mut parent: Vec<usize> = (0..n + m).collect();
    enumerate_trees(&cells, 0, &mut chosen, &mut parent, n + m - 1, &mut |tree| {
        if let Some(flows) = tree_flows(tree, &cells, p.weights(), q.weights()) {
            let c: f64 = tree.iter().zip(&flows).map(|(&k, f)| cost[k] * f).sum();
            best = best.min(c);
        }
    });
    metric.root(best)
}

fn find(parent: &[usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

fn enumerate_trees(
    cells: &[(usize, usize)],
    start: usize,
    chosen: &mut Vec<usize>,
    parent: &mut Vec<usize>,
    size: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == size {
        visit(chosen);
        return;
    }
    let n_rows = parent.len() - cells.iter().map(|c| c.1).max().unwrap() - 1;
    for k in start..cells.len() {
        if cells.len() - k < size - chosen.len() {
            break;
        }
        let (i, j) = cells[k];
        let (a, b) = (find(parent, i), find(parent, n_rows + j));
        if a == b {
            continue;
        }
        let saved = parent.clone();
        parent[a] = b;
        chosen.push(k);
        enumerate_trees(cells, k + 1, chosen, parent, size, visit);
        chosen.pop();
        *parent = saved;
    }
}

/// Flows on a spanning tree by peeling leaves; `None` if any is negative.
fn tree_flows(tree: &[usize], cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut supply: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree = vec![0usize; supply.len()];
    for &k in tree {
        degree[cells[k].0] += 1;
        degree[n + cells[k].1] += 1;
    }
    let mut flows = vec![f64::NAN; tree.len()];
    let mut done = vec![false; tree.len()];
    for _ in 0..tree.len() {
        let (slot, leaf) = tree.iter().enumerate().filter(|(s, _)| !done[*s]).find_map(|(s, &k)| {
            let (i, j) = (cells[k].0, n + cells[k].1);
            if degree[i] == 1 {
                Some((s, i))
            } else if degree[j] == 1 {
                Some((s, j))
            } else {
                None
            }
        })?;
        let k = tree[slot];
        let (i, j) = (cells[k].0, n + cells[k].1);
        let other = if leaf == i { j } else { i };
        let f = supply[leaf];
        if f < -1e-12 {
            return None;
        }
        flows[slot] = f;
        supply[other] -= f;
        supply[leaf] = 0.0;
        degree[i] -= 1;
        degree[j] -= 1;
        done[slot] = true;
    }
    Some(flows)
}

/// Weights `k_i / den` with positive integers summing to `den`.
pub fn rational_weights(rng: &mut ChaCha8Rng, n: usize, max_den: usize) -> Vec<f64> {
    let den = rng.random_range(n..=max_den.max(n));
    let mut parts = vec![1usize; n];
    for _ in 0..den - n {
        parts[rng.random_range(0..n)] += 1;
    }
    parts.iter().map(|&k| k as f64 / den as f64).collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn random_norm(rng: &mut ChaCha8Rng) -> Norm {
    [Norm::L1, Norm::L2, Norm::LInf][rng.random_range(0..3)]
}

pub fn line(xs: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::uniform(xs.iter().map(|x| vec![*x]).collect()).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The two golden LP exports: (fixture file, rendered text).
pub fn golden_exports() -> Vec<(&'static str, String)> {
    use scenred::exact::{export_milp_continuous, export_milp_discrete};
    use scenred::limits::gen_kappa_tight;
    let metric = Metric::l1(Norm::L1);
    let cross = gen_kappa_tight(1, 4, 1, None, None).unwrap();
    let pair = line(&[0.0, 3.0]);
    vec![
        ("kappa1_4_1_discrete.lp", export_milp_discrete(&cross, 1, &metric).unwrap().to_lp()),
        ("two_atom_continuous.lp", export_milp_continuous(&pair, 1, &metric).unwrap().to_lp()),
    ]
}
