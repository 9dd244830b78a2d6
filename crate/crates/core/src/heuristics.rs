//! Reduction heuristics: greedy forward selection, generalized k-means, swap
//! local search, and the continuous polish of a discrete solution.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distribution::{DiscreteDistribution, Metric, ReductionResult};
use crate::error::{Error, Result};
use crate::geometry::{centroid_best_effort, distance_matrix, DistanceMatrix};
use crate::transport::{dist_to_support, nearest};

pub const DUPACOVA: &str = "dupacova";
pub const KMEANS: &str = "kmeans";
pub const LOCAL_SEARCH: &str = "local-search";
pub const POLISH: &str = "continuous-polish";

/// Centroid tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-10;

fn check_m(p: &DiscreteDistribution, m: usize) -> Result<()> {
    if m < 1 || m > p.len() {
        return Err(Error::OutOfRange(format!("m = {m} must lie in 1..={}", p.len())));
    }
    Ok(())
}

/// Builds a result from an explicit support set via the nearest-point
/// assignment. Support points that attract no atom are dropped.
pub fn result_from_support(
    p: &DiscreteDistribution,
    support: &[Vec<f64>],
    metric: &Metric,
    algorithm: &str,
    iterations: usize,
    evaluations: usize,
    support_indices: Option<&[usize]>,
) -> Result<ReductionResult> {
    let fit = dist_to_support(p, support, metric)?;
    let support_indices = support_indices.map(|idx| fit.kept.iter().map(|&k| idx[k]).collect());
    let (points, weights) = fit.reduced.into_parts();
    Ok(ReductionResult {
        support: points,
        weights,
        partition: fit.partition,
        value: fit.value,
        algorithm: algorithm.to_string(),
        iterations,
        evaluations,
        support_indices,
    })
}

pub(crate) fn result_from_indices(
    p: &DiscreteDistribution,
    indices: &[usize],
    metric: &Metric,
    algorithm: &str,
    iterations: usize,
    evaluations: usize,
) -> Result<ReductionResult> {
    let support: Vec<Vec<f64>> = indices.iter().map(|&i| p.point(i).to_vec()).collect();
    result_from_support(p, &support, metric, algorithm, iterations, evaluations, Some(indices))
}

/// Atom-to-atom powered distances; rows are symmetric for every norm.
fn atom_costs(p: &DiscreteDistribution, metric: &Metric) -> Result<DistanceMatrix> {
    distance_matrix(p.points(), p.points(), metric)
}

/// Greedy forward selection: grow the reduced set one atom at a time, each
/// time adding the atom that minimizes the distance to the enlarged set.
///
/// Keeps the running nearest-distance of every atom, so each candidate costs
/// `O(n)`. Ties go to the lowest atom index.
pub fn dupacova_greedy(p: &DiscreteDistribution, m: usize, metric: &Metric) -> Result<ReductionResult> {
    Ok(dupacova_trace(p, m, metric)?.0)
}

/// [`dupacova_greedy`] plus the running distance after each selection.
pub fn dupacova_trace(p: &DiscreteDistribution, m: usize, metric: &Metric) -> Result<(ReductionResult, Vec<f64>)> {
    check_m(p, m)?;
    let n = p.len();
    let w = p.weights();
    let dm = atom_costs(p, metric)?;
    let mut current = vec![f64::INFINITY; n];
    let mut chosen = Vec::with_capacity(m);
    let mut in_set = vec![false; n];
    let mut trace = Vec::with_capacity(m);
    let mut evaluations = 0;
    for _ in 0..m {
        let mut best = usize::MAX;
        let mut best_cost = f64::INFINITY;
        for j in (0..n).filter(|&j| !in_set[j]) {
            let row = dm.row(j);
            let cost: f64 = (0..n).map(|i| w[i] * current[i].min(row[i])).sum();
            evaluations += 1;
            if cost < best_cost {
                best_cost = cost;
                best = j;
            }
        }
        in_set[best] = true;
        chosen.push(best);
        for (c, &d) in current.iter_mut().zip(dm.row(best)) {
            *c = c.min(d);
        }
        trace.push(metric.root(best_cost));
    }
    let result = result_from_indices(p, &chosen, metric, DUPACOVA, m, evaluations)?;
    Ok((result, trace))
}

/// Starting centers for [`k_means_generalized`].
#[derive(Debug, Clone)]
pub enum KMeansInit {
    Points(Vec<Vec<f64>>),
    /// Uniformly random `m`-subset of the atoms.
    Seed(u64),
}

/// Seeded uniform `m`-subset of `0..n`, ascending.
pub fn random_subset(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Lloyd-style alternation generalized to order `l` and any supported norm.
///
/// Assigns atoms to their nearest center (lowest index on ties), moves each
/// center to its cell's centroid, and stops once no coordinate moves by
/// 1e-12 or more. A center that loses all its atoms is reseeded with the atom
/// farthest from its own center.
pub fn k_means_generalized(
    p: &DiscreteDistribution,
    m: usize,
    metric: &Metric,
    init: KMeansInit,
    max_iter: usize,
) -> Result<ReductionResult> {
    k_means_with_tol(p, m, metric, init, max_iter, DEFAULT_TOL)
}

pub fn k_means_with_tol(
    p: &DiscreteDistribution,
    m: usize,
    metric: &Metric,
    init: KMeansInit,
    max_iter: usize,
    tol: f64,
) -> Result<ReductionResult> {
    check_m(p, m)?;
    let mut centers = match init {
        KMeansInit::Points(c) => {
            if c.len() != m {
                return Err(Error::precondition(format!("{} initial centers for m = {m}", c.len())));
            }
            if let Some(bad) = c.iter().find(|c| c.len() != p.dim()) {
                return Err(Error::DimensionMismatch { expected: p.dim(), found: bad.len() });
            }
            c
        }
        KMeansInit::Seed(seed) => random_subset(p.len(), m, seed).iter().map(|&i| p.point(i).to_vec()).collect(),
    };
    let (iterations, evaluations) = lloyd(p, metric, &mut centers, max_iter, tol)?;
    result_from_support(p, &centers, metric, KMEANS, iterations, evaluations, None)
}

/// Runs the alternation in place; returns (iterations, assignment passes).
fn lloyd(
    p: &DiscreteDistribution,
    metric: &Metric,
    centers: &mut [Vec<f64>],
    max_iter: usize,
    tol: f64,
) -> Result<(usize, usize)> {
    let n = p.len();
    let m = centers.len();
    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            let (j, d) = nearest(p.point(i), centers, metric);
            labels[i] = j;
            dist[i] = d;
        }
        let mut counts = vec![0usize; m];
        labels.iter().for_each(|&l| counts[l] += 1);
        let mut reseeded = vec![false; n];
        for j in 0..m {
            if counts[j] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| !reseeded[i] && counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = donor {
                counts[labels[i]] -= 1;
                counts[j] = 1;
                labels[i] = j;
                dist[i] = 0.0;
                reseeded[i] = true;
                centers[j] = p.point(i).to_vec();
            }
        }
        let mut shift: f64 = 0.0;
        for (j, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
            let mass: f64 = members.iter().map(|&i| p.weights()[i]).sum();
            if members.is_empty() || mass <= 0.0 {
                continue;
            }
            let pts: Vec<Vec<f64>> = members.iter().map(|&i| p.point(i).to_vec()).collect();
            let ws: Vec<f64> = members.iter().map(|&i| p.weights()[i]).collect();
            let next = centroid_best_effort(&pts, &ws, metric, tol)?;
            for (a, b) in center.iter().zip(&next) {
                shift = shift.max((a - b).abs());
            }
            *center = next;
        }
        if shift < 1e-12 {
            break;
        }
    }
    Ok((iterations, iterations))
}

/// Starting set for [`local_search`].
#[derive(Debug, Clone, Default)]
pub enum LocalSearchInit {
    /// Explicit atom indices.
    Indices(Vec<usize>),
    /// Uniformly random `m`-subset of the atoms.
    Seed(u64),
    /// The `m` heaviest atoms, lowest index first among equal weights.
    #[default]
    MostFrequent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapStrategy {
    /// Scan every swap and apply the best one.
    #[default]
    BestFit,
    /// Apply the first improving swap in (incoming atom, outgoing atom) order.
    FirstFit,
}

/// Indices of the `m` heaviest atoms, ascending.
pub fn most_frequent(p: &DiscreteDistribution, m: usize) -> Vec<usize> {
    let w = p.weights();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let mut top = order[..m].to_vec();
    top.sort_unstable();
    top
}

/// Single-swap local search over `m`-subsets of the atoms.
///
/// With `epsilon = 0` any strict improvement is accepted. With
/// `epsilon > 0` a swap must cut the current distance by at least the
/// fraction `epsilon / ((n - m) m)` of its value, which bounds the number of
/// swaps polynomially.
pub fn local_search(
    p: &DiscreteDistribution,
    m: usize,
    metric: &Metric,
    init: LocalSearchInit,
    strategy: SwapStrategy,
    epsilon: f64,
) -> Result<ReductionResult> {
    check_m(p, m)?;
    if !(epsilon >= 0.0) {
        return Err(Error::OutOfRange(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let n = p.len();
    let mut set = match init {
        LocalSearchInit::Indices(idx) => {
            let mut idx = idx;
            idx.sort_unstable();
            idx.dedup();
            if idx.len() != m || idx.iter().any(|&i| i >= n) {
                return Err(Error::precondition(format!("initial set must be {m} distinct atom indices below {n}")));
            }
            idx
        }
        LocalSearchInit::Seed(seed) => random_subset(n, m, seed),
        LocalSearchInit::MostFrequent => most_frequent(p, m),
    };
    let dm = atom_costs(p, metric)?;
    let w = p.weights();
    let mut in_set = vec![false; n];
    set.iter().for_each(|&i| in_set[i] = true);

    let mut near = vec![0.0; n];
    let mut near_at = vec![0usize; n];
    let mut second = vec![0.0; n];
    let refresh = |set: &[usize], near: &mut [f64], near_at: &mut [usize], second: &mut [f64]| {
        for i in 0..n {
            let (mut b1, mut b2, mut at) = (f64::INFINITY, f64::INFINITY, usize::MAX);
            for &j in set {
                let d = dm.get(i, j);
                if d < b1 {
                    b2 = b1;
                    b1 = d;
                    at = j;
                } else if d < b2 {
                    b2 = d;
                }
            }
            near[i] = b1;
            near_at[i] = at;
            second[i] = b2;
        }
    };
    refresh(&set, &mut near, &mut near_at, &mut second);
    let mut cost: f64 = (0..n).map(|i| w[i] * near[i]).sum();
    let mut evaluations = 1;
    let mut iterations = 0;
    let factor = if n > m { epsilon / ((n - m) * m) as f64 } else { 0.0 };

    let accepts = |old: f64, new: f64| -> bool {
        if !(new < old) {
            return false;
        }
        if epsilon == 0.0 {
            return true;
        }
        let (vo, vn) = (metric.root(old), metric.root(new));
        vo - vn >= factor * vo
    };

    loop {
        let mut chosen: Option<(usize, usize, f64)> = None;
        'scan: for incoming in (0..n).filter(|&z| !in_set[z]) {
            let row = dm.row(incoming);
            for &outgoing in &set {
                let swapped: f64 = (0..n)
                    .map(|i| {
                        let keep = if near_at[i] == outgoing { second[i] } else { near[i] };
                        w[i] * keep.min(row[i])
                    })
                    .sum();
                evaluations += 1;
                match strategy {
                    SwapStrategy::BestFit => {
                        if chosen.is_none_or(|(_, _, c)| swapped < c) {
                            chosen = Some((incoming, outgoing, swapped));
                        }
                    }
                    SwapStrategy::FirstFit => {
                        if accepts(cost, swapped) {
                            chosen = Some((incoming, outgoing, swapped));
                            break 'scan;
                        }
                    }
                }
            }
        }
        match chosen {
            Some((incoming, outgoing, swapped)) if accepts(cost, swapped) => {
                in_set[outgoing] = false;
                in_set[incoming] = true;
                set.retain(|&j| j != outgoing);
                set.push(incoming);
                set.sort_unstable();
                refresh(&set, &mut near, &mut near_at, &mut second);
                cost = (0..n).map(|i| w[i] * near[i]).sum();
                iterations += 1;
            }
            _ => break,
        }
    }
    result_from_indices(p, &set, metric, LOCAL_SEARCH, iterations, evaluations)
}

/// Moves every support point to the centroid of its cell and iterates to a
/// fixed point (k-means warm-started at `result`). Never returns a worse value
/// than the input.
pub fn continuous_polish(
    result: &ReductionResult,
    p: &DiscreteDistribution,
    metric: &Metric,
    tol: f64,
) -> Result<ReductionResult> {
    if result.partition.n() != p.len() {
        return Err(Error::precondition("result does not belong to this distribution"));
    }
    let mut centers = result.support.clone();
    let (iterations, evaluations) = lloyd(p, metric, &mut centers, 1_000, tol)?;
    let polished = result_from_support(p, &centers, metric, POLISH, iterations, evaluations, None)?;
    if polished.value <= result.value {
        Ok(polished)
    } else {
        let mut kept = result.clone();
        kept.algorithm = POLISH.to_string();
        Ok(kept)
    }
}
