//! Ground-norm costs, cost matrices and the per-cell centroid solvers.
//!
//! The centroid of a cell is the minimizer of `sum_i w_i ||xi_i - zeta||^l`.
//! For `l = 2` under the Euclidean norm it is the weighted mean; for `l = 1`
//! it is a geometric median of the cell under the chosen norm. Everything else
//! falls back to a subgradient method.

use crate::distribution::{Metric, Norm};
use crate::error::{Error, Result};

/// Iteration cap used by [`centroid`] for its iterative routes.
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// `||a - b||_p^l`.
pub fn powered_distance(a: &[f64], b: &[f64], metric: &Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(metric.cost(a, b))
}

/// Row-major matrix of powered distances `||a_i - b_j||^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: Vec<f64>,
    rows: usize,
    cols: usize,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

pub fn distance_matrix(a: &[Vec<f64>], b: &[Vec<f64>], metric: &Metric) -> Result<DistanceMatrix> {
    let dim = a.first().or(b.first()).map_or(0, Vec::len);
    for p in a.iter().chain(b) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
    }
    let mut entries = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            entries.push(metric.cost(x, y));
        }
    }
    Ok(DistanceMatrix { entries, rows: a.len(), cols: b.len(), metric: *metric })
}

/// `sum_i w_i ||xi_i - center||^l`.
pub fn cell_cost(points: &[Vec<f64>], weights: &[f64], center: &[f64], metric: &Metric) -> f64 {
    points.iter().zip(weights).map(|(p, w)| w * metric.cost(p, center)).sum()
}

pub fn mean_point(points: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let first = points.first().ok_or(Error::Empty("mean of no points"))?;
    check_cell(points, weights)?;
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; first.len()];
    for (p, w) in points.iter().zip(weights) {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += w * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    Ok(mean)
}

fn check_cell(points: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("cell has no points"));
    }
    if points.len() != weights.len() {
        return Err(Error::precondition("points and weights differ in length"));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::precondition("weights must be nonnegative with positive sum"));
    }
    Ok(())
}

/// Weighted geometric median: a minimizer of `sum_i w_i ||xi_i - zeta||_p`.
///
/// The 1-norm case is the lower weighted coordinatewise median and is exact.
/// The Euclidean case runs Weiszfeld's iteration with the Vardi-Zhang step at
/// data points; the returned point is within `tol` of the optimal objective.
/// The max-norm case uses subgradient descent with diminishing steps.
///
/// Geometric medians need not be unique (e.g. an even number of collinear
/// points); the returned one is deterministic.
pub fn geometric_median(
    points: &[Vec<f64>],
    weights: &[f64],
    metric: &Metric,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if metric.order() != 1.0 {
        return Err(Error::UnsupportedMetric(format!("geometric median needs order 1, got {}", metric.order())));
    }
    if !(tol > 0.0) {
        return Err(Error::precondition("tolerance must be positive"));
    }
    check_cell(points, weights)?;
    if points[0].len() == 1 {
        return Ok(coordinatewise_median(points, weights));
    }
    match metric.norm() {
        Norm::L1 => Ok(coordinatewise_median(points, weights)),
        Norm::L2 => weiszfeld(points, weights, tol, max_iter),
        Norm::LInf => subgradient_descent(points, weights, metric, tol, max_iter),
    }
}

fn coordinatewise_median(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut order: Vec<usize> = (0..points.len()).collect();
    (0..dim)
        .map(|k| {
            order.sort_by(|&a, &b| points[a][k].total_cmp(&points[b][k]).then(a.cmp(&b)));
            let mut acc = 0.0;
            for &i in &order {
                acc += weights[i];
                if acc >= 0.5 * total {
                    return points[i][k];
                }
            }
            points[*order.last().unwrap()][k]
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Weiszfeld iteration for the weighted Euclidean median.
fn weiszfeld(points: &[Vec<f64>], weights: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let dim = points[0].len();
    let objective = |z: &[f64]| -> f64 { points.iter().zip(weights).map(|(p, w)| w * euclid(p, z)).sum() };

    // A data point is optimal iff the pull of the others does not exceed its weight.
    for (k, pk) in points.iter().enumerate() {
        let mut pull = vec![0.0; dim];
        let mut own = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            let d = euclid(p, pk);
            if d == 0.0 {
                own += w;
                continue;
            }
            for t in 0..dim {
                pull[t] += w * (p[t] - pk[t]) / d;
            }
        }
        let r = pull.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r <= own {
            return Ok(points[k].clone());
        }
    }

    let mut z = mean_point(points, weights)?;
    let mut fz = objective(&z);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut grad = vec![0.0; dim];
        let mut coincident = 0.0;
        let mut reach: f64 = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            let d = euclid(p, &z);
            reach = reach.max(d);
            if d == 0.0 {
                coincident += w;
                continue;
            }
            for t in 0..dim {
                num[t] += w * p[t] / d;
                grad[t] += w * (z[t] - p[t]) / d;
            }
            den += w / d;
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        // f(z) - f* <= |grad| * |z - z*| and z* lies in the hull of the points.
        residual = (gnorm - coincident).max(0.0) * reach;
        if residual <= tol {
            return Ok(z);
        }
        let target: Vec<f64> = num.iter().map(|x| x / den).collect();
        let next = if coincident > 0.0 {
            // Vardi-Zhang step away from a non-optimal data point.
            let r = gnorm;
            let eta = (coincident / r).min(1.0);
            target.iter().zip(&z).map(|(t, zz)| (1.0 - eta) * t + eta * zz).collect()
        } else {
            target
        };
        let mut fnext = objective(&next);
        if fnext > fz {
            // Monotone in exact arithmetic; a rise means we are at rounding level.
            return Ok(z);
        }
        // Near a data point the plain step shrinks geometrically; keep
        // doubling it while the objective still drops.
        let mut next = next;
        let dir: Vec<f64> = next.iter().zip(&z).map(|(a, b)| a - b).collect();
        let mut t = 2.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = objective(&trial);
            if !(ft < fnext) {
                break;
            }
            next = trial;
            fnext = ft;
            t *= 2.0;
        }
        z = next;
        fz = fnext;
    }
    Err(Error::NonConvergence { best: z, residual, iterations: max_iter })
}

/// Subgradient of `||x||_p^l` at `x`.
fn norm_power_subgradient(x: &[f64], metric: &Metric, out: &mut [f64]) {
    let nrm = metric.norm().of_diff(x, &vec![0.0; x.len()]);
    out.iter_mut().for_each(|o| *o = 0.0);
    if nrm == 0.0 {
        return;
    }
    let scale = metric.order() * nrm.powf(metric.order() - 1.0);
    match metric.norm() {
        Norm::L1 => {
            for (o, v) in out.iter_mut().zip(x) {
                *o = scale * v.signum() * (*v != 0.0) as u8 as f64;
            }
        }
        Norm::L2 => {
            for (o, v) in out.iter_mut().zip(x) {
                *o = scale * v / nrm;
            }
        }
        Norm::LInf => {
            let k = x
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(k, _)| k)
                .unwrap();
            out[k] = scale * x[k].signum();
        }
    }
}

/// Subgradient descent with diminishing normalized steps on
/// `sum_i w_i ||xi_i - zeta||^l`, started at the weighted mean. Returns the
/// best iterate once the best objective stops improving by more than `tol`
/// over a window of iterations.
fn subgradient_descent(
    points: &[Vec<f64>],
    weights: &[f64],
    metric: &Metric,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let dim = points[0].len();
    let objective = |z: &[f64]| cell_cost(points, weights, z, metric);
    let mut z = mean_point(points, weights)?;
    let mut best = z.clone();
    let mut fbest = objective(&z);
    // Atoms are natural candidates and make the result never worse than the
    // best discrete choice.
    for p in points {
        let f = objective(p);
        if f < fbest {
            fbest = f;
            best = p.clone();
            z = p.clone();
        }
    }
    let spread = points.iter().map(|p| euclid(p, &best)).fold(0.0, f64::max);
    if spread == 0.0 {
        return Ok(best);
    }
    let window = 500.min(max_iter.max(1));
    let mut window_start = fbest;
    let mut g = vec![0.0; dim];
    let mut gi = vec![0.0; dim];
    let mut diff = vec![0.0; dim];
    for k in 0..max_iter {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (p, &w) in points.iter().zip(weights) {
            for t in 0..dim {
                diff[t] = z[t] - p[t];
            }
            norm_power_subgradient(&diff, metric, &mut gi);
            for t in 0..dim {
                g[t] += w * gi[t];
            }
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            return Ok(z);
        }
        let step = 0.5 * spread / ((k + 1) as f64).sqrt();
        for t in 0..dim {
            z[t] -= step * g[t] / gn;
        }
        let f = objective(&z);
        if f < fbest {
            fbest = f;
            best.clone_from(&z);
        }
        if (k + 1) % window == 0 {
            if window_start - fbest <= tol {
                return Ok(best);
            }
            window_start = fbest;
        }
    }
    Err(Error::NonConvergence { best, residual: window_start - fbest, iterations: max_iter })
}

/// Golden-section search for a convex function on `[lo, hi]`.
fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// Minimizer of the cell cost `sum_i w_i ||xi_i - zeta||^l`.
pub fn centroid(points: &[Vec<f64>], weights: &[f64], metric: &Metric, tol: f64) -> Result<Vec<f64>> {
    check_cell(points, weights)?;
    let dim = points[0].len();
    let l = metric.order();
    if l == 2.0 && (metric.norm() == Norm::L2 || dim == 1) {
        return mean_point(points, weights);
    }
    if l == 1.0 {
        return geometric_median(points, weights, metric, tol, DEFAULT_MAX_ITER);
    }
    if dim == 1 {
        let (lo, hi) =
            points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        let x = golden_section(lo, hi, |z| cell_cost(points, weights, &[z], metric));
        return Ok(vec![x]);
    }
    subgradient_descent(points, weights, metric, tol, DEFAULT_MAX_ITER)
}

/// [`centroid`], falling back to the best iterate when an iterative route
/// runs out of iterations.
pub(crate) fn centroid_best_effort(
    points: &[Vec<f64>],
    weights: &[f64],
    metric: &Metric,
    tol: f64,
) -> Result<Vec<f64>> {
    match centroid(points, weights, metric, tol) {
        Err(Error::NonConvergence { best, .. }) => Ok(best),
        other => other,
    }
}

/// Whether [`centroid`] is exact (closed form) for this metric and dimension.
pub fn centroid_is_exact(metric: &Metric, dim: usize) -> bool {
    let l = metric.order();
    (l == 2.0 && (metric.norm() == Norm::L2 || dim == 1)) || (l == 1.0 && (metric.norm() == Norm::L1 || dim == 1))
}

/// A valid (not necessarily smallest) Euclidean ball enclosing the points:
/// centered at their mean, radius the largest distance to it.
pub fn enclosing_ball(points: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    if points.is_empty() {
        return Err(Error::Empty("enclosing ball of no points"));
    }
    let w = vec![1.0; points.len()];
    let center = mean_point(points, &w)?;
    let radius = points.iter().map(|p| euclid(p, &center)).fold(0.0, f64::max);
    Ok((center, radius))
}
