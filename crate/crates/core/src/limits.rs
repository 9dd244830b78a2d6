//! Worst-case bounds, tight and adversarial instance generators, and the
//! Gaussian sampling experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::distribution::{DiscreteDistribution, Metric};
use crate::error::{Error, Result};
use crate::geometry::enclosing_ball;
use crate::heuristics::{k_means_generalized, KMeansInit};

/// Closed-form limits for reducing `n` equally likely atoms to `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub m: usize,
    pub l: u32,
    /// `m / n`.
    pub reduction_factor: f64,
    /// Worst-case type-2 distance over the unit ball, `sqrt((n-m)/(n-1))`.
    /// Also an upper bound for type 1.
    pub c_upper: f64,
    /// Lower bound on the worst-case type-1 distance.
    pub c1_lower: f64,
    /// Worst-case ratio of the discrete to the continuous reduction.
    pub kappa_upper: f64,
    /// Best-case guarantee on that ratio over all instances.
    pub kappa_lower: f64,
}

pub fn limit_bounds(n: usize, m: usize, l: u32) -> Result<BoundReport> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::OutOfRange(format!("need 1 <= m <= n, got n = {n}, m = {m}")));
    }
    if l != 1 && l != 2 {
        return Err(Error::OutOfRange(format!("order must be 1 or 2, got {l}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let (c_upper, c1_lower) = if n == 1 {
        (0.0, 0.0)
    } else {
        (((nf - mf) / (nf - 1.0)).sqrt(), ((nf - mf) * (nf - mf + 1.0) / (nf * (nf - 1.0))).sqrt())
    };
    let (kappa_upper, kappa_lower) = if m == n {
        (1.0, 1.0)
    } else if l == 2 {
        let lower = if m == n - 1 { 2f64.sqrt() } else { 1.0 };
        (2f64.sqrt(), lower)
    } else {
        let upper = if m == 1 {
            2.0 * (1.0 - 1.0 / nf)
        } else if m == n - 1 {
            1.0
        } else {
            2.0
        };
        (upper, 1.0)
    };
    Ok(BoundReport { n, m, l, reduction_factor: mf / nf, c_upper, c1_lower, kappa_upper, kappa_lower })
}

/// Smallest `m` whose worst-case guarantee `r * sqrt((n-m)/(n-1))` meets
/// `target`, with `r` the radius of a ball enclosing the atoms.
pub fn a_priori_m(p: &DiscreteDistribution, target: f64, l: u32) -> Result<usize> {
    if !(target > 0.0) {
        return Err(Error::OutOfRange(format!("target must be positive, got {target}")));
    }
    let (_, r) = enclosing_ball(p.points())?;
    a_priori_m_for_radius(p.len(), r, target, l)
}

/// [`a_priori_m`] given the enclosing radius directly.
pub fn a_priori_m_for_radius(n: usize, radius: f64, target: f64, l: u32) -> Result<usize> {
    for m in 1..=n {
        if radius * limit_bounds(n, m, l)?.c_upper <= target {
            return Ok(m);
        }
    }
    Ok(n)
}

/// `n` unit vectors with pairwise inner products `-1/(n-1)` (a regular
/// simplex centered at the origin), written in `d >= n - 1` coordinates.
pub fn gen_worst_case(n: usize, d: usize) -> Result<DiscreteDistribution> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("need at least 2 atoms, got {n}")));
    }
    if d + 1 < n {
        return Err(Error::OutOfRange(format!("dimension {d} is below n - 1 = {}", n - 1)));
    }
    let nf = n as f64;
    let x = ((nf - 1.0) / nf).sqrt();
    let y = -1.0 / (nf * (nf - 1.0)).sqrt();
    let full: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| if k == i { x } else { y }).collect()).collect();
    let points = if d >= n {
        full.into_iter()
            .map(|mut v| {
                v.resize(d, 0.0);
                v
            })
            .collect()
    } else {
        let basis = complement_basis(n);
        full.iter().map(|v| basis.iter().map(|b| b.iter().zip(v).map(|(a, c)| a * c).sum()).collect()).collect()
    };
    DiscreteDistribution::uniform(points)
}

/// Gram-Schmidt on `e_k - e_n`, `k = 1..n-1`: an orthonormal basis of the
/// hyperplane orthogonal to the all-ones vector.
fn complement_basis(n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v[n - 1] = -1.0;
        for b in &basis {
            let dot: f64 = b.iter().zip(&v).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(x, bb)| *x -= dot * bb);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
}

/// Default separation for [`gen_kappa_tight`].
pub fn default_separation(l: u32, n: usize, m: usize) -> f64 {
    if l == 2 {
        3.0 * ((n - m + 1) as f64).sqrt()
    } else {
        2.0 * n as f64 + 3.0
    }
}

/// Instances on which the discrete reduction is worse than the continuous
/// one by the largest possible factor.
///
/// Order 2: `n - m + 1` atoms on the unit circle summing to zero (antipodal
/// pairs, plus an equilateral triangle when the count is odd), followed by
/// `m - 1` isolated atoms `(1 + i M) e_1`. Order 1: `m` copies of the
/// cross-polytope `{±e_1, ..., ±e_k}`, `k = n / (2m)`, the `j`-th shifted by
/// `j M e_1` for `j = 0..m`.
///
/// `d` and `big_m` default to the smallest valid dimension and to
/// [`default_separation`].
pub fn gen_kappa_tight(
    l: u32,
    n: usize,
    m: usize,
    d: Option<usize>,
    big_m: Option<f64>,
) -> Result<DiscreteDistribution> {
    if m == 0 || m > n {
        return Err(Error::OutOfRange(format!("need 1 <= m <= n, got n = {n}, m = {m}")));
    }
    let sep = big_m.unwrap_or_else(|| default_separation(l, n, m));
    match l {
        2 => {
            if m == n {
                return Err(Error::precondition("order 2 needs m <= n - 1"));
            }
            let d = d.unwrap_or(2);
            if d < 2 {
                return Err(Error::precondition(format!("order 2 needs d >= 2, got {d}")));
            }
            let count = n - m + 1;
            if !(sep > 2.0 * (count as f64).sqrt()) {
                return Err(Error::precondition(format!("separation {sep} must exceed 2 sqrt({count})")));
            }
            let unit = |a: f64, b: f64| {
                let mut v = vec![0.0; d];
                v[0] = a;
                v[1] = b;
                v
            };
            let mut points = Vec::with_capacity(n);
            let pairs = count / 2 - usize::from(count % 2 == 1);
            let k = pairs.max(1) as f64;
            if count == 2 {
                points.push(unit(1.0, 0.0));
                points.push(unit(-1.0, 0.0));
            } else if count.is_multiple_of(2) {
                for i in 0..pairs {
                    let t = std::f64::consts::PI * i as f64 / k;
                    points.push(unit(t.cos(), t.sin()));
                    points.push(unit(-t.cos(), -t.sin()));
                }
            } else {
                for i in 0..pairs {
                    let t = std::f64::consts::PI * (i as f64 + 0.5) / k;
                    points.push(unit(t.cos(), t.sin()));
                    points.push(unit(-t.cos(), -t.sin()));
                }
                let h = 3f64.sqrt() / 2.0;
                points.push(unit(1.0, 0.0));
                points.push(unit(-0.5, h));
                points.push(unit(-0.5, -h));
            }
            for i in 1..m {
                points.push(unit(1.0 + i as f64 * sep, 0.0));
            }
            DiscreteDistribution::uniform(points)
        }
        1 => {
            if !n.is_multiple_of(2 * m) {
                return Err(Error::precondition(format!("n = {n} is not divisible by 2m = {}", 2 * m)));
            }
            let k = n / (2 * m);
            let d = d.unwrap_or(k);
            if d < k {
                return Err(Error::precondition(format!("order 1 needs d >= {k}, got {d}")));
            }
            if !(sep > 2.0 * n as f64 + 2.0) {
                return Err(Error::precondition(format!("separation {sep} must exceed 2n + 2")));
            }
            let mut points = Vec::with_capacity(n);
            for j in 0..m {
                let shift = j as f64 * sep;
                for i in 0..k {
                    for sign in [1.0, -1.0] {
                        let mut v = vec![0.0; d];
                        v[i] = sign;
                        v[0] += shift;
                        points.push(v);
                    }
                }
            }
            DiscreteDistribution::uniform(points)
        }
        _ => Err(Error::OutOfRange(format!("order must be 1 or 2, got {l}"))),
    }
}

/// Instance families on which a heuristic fails badly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversarialFamily {
    /// Four tight clusters at `±e_1`, `±e_2` and one atom at the origin,
    /// which the greedy forward selection picks first.
    Dupacova,
    /// Two clusters at `-e_1` and `0` with `2z` and `z` atoms and one atom at
    /// `+e_1`, which defeats k-means from a poor start.
    KMeans,
}

/// `z` atoms on a line through `center` along `e_1`, spacing `eps / (4z)`.
fn cluster(center: &[f64], z: usize, eps: f64, out: &mut Vec<Vec<f64>>) {
    let step = eps / (4.0 * z as f64);
    let mid = (z as f64 - 1.0) / 2.0;
    for t in 0..z {
        let mut v = center.to_vec();
        v[0] += (t as f64 - mid) * step;
        out.push(v);
    }
}

/// Adversarial instance with clusters of radius below `eps`.
///
/// The greedy family lists the clusters at `+e_1, -e_1, +e_2, -e_2` (each
/// `z` atoms) and then the origin, `n = 4z + 1`. The k-means family lists
/// `2z` atoms near `-e_1`, `z` atoms near `0` and then `+e_1`,
/// `n = 3z + 1`.
pub fn gen_adversarial(family: AdversarialFamily, z: usize, eps: f64, d: usize) -> Result<DiscreteDistribution> {
    if z == 0 {
        return Err(Error::precondition("z must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::precondition(format!("eps must be positive, got {eps}")));
    }
    let axis = |k: usize, s: f64| {
        let mut v = vec![0.0; d];
        v[k] = s;
        v
    };
    let mut points = Vec::new();
    match family {
        AdversarialFamily::Dupacova => {
            if d < 2 {
                return Err(Error::precondition(format!("greedy family needs d >= 2, got {d}")));
            }
            if eps >= 0.5 {
                return Err(Error::precondition(format!("greedy family needs eps < 1/2, got {eps}")));
            }
            for (k, s) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
                cluster(&axis(k, s), z, eps, &mut points);
            }
            points.push(vec![0.0; d]);
        }
        AdversarialFamily::KMeans => {
            if d < 1 {
                return Err(Error::precondition("k-means family needs d >= 1"));
            }
            if eps >= 0.25 {
                return Err(Error::precondition(format!("k-means family needs eps < 1/4, got {eps}")));
            }
            cluster(&axis(0, -1.0), 2 * z, eps, &mut points);
            cluster(&vec![0.0; d], z, eps, &mut points);
            points.push(axis(0, 1.0));
        }
    }
    DiscreteDistribution::uniform(points)
}

/// One aggregated cell of the sampling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub d: usize,
    pub m: usize,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub c: f64,
    pub seed: u64,
    /// k-means restarts per sample; the reduction is a heuristic upper
    /// estimate of the optimal continuous distance.
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,m,mean_ratio,std_ratio,trials\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.d,
                r.m,
                crate::format_g17(r.mean_ratio),
                crate::format_g17(r.std_ratio),
                r.trials
            ));
        }
        out
    }

    pub fn row(&self, d: usize, m: usize) -> Option<&ExperimentRow> {
        self.rows.iter().find(|r| r.d == d && r.m == m)
    }
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sub-seed for one `(d, trial)` sample, independent of evaluation order.
pub fn trial_seed(seed: u64, d: usize, trial: usize) -> u64 {
    mix(mix(mix(seed) ^ d as u64) ^ trial as u64)
}

pub const DEFAULT_RESTARTS: usize = 10;

/// Ratio of the type-2 reduction distance of `n` Gaussian samples to the
/// worst-case bound, averaged over trials, for each dimension and `m`.
///
/// Samples are drawn from `N(0, s^2 I)` with `s = 1 / (sqrt(d - 1) + c)`.
/// The distance is the best of `restarts` seeded k-means runs.
pub fn normal_experiment(
    n: usize,
    m_list: &[usize],
    d_list: &[usize],
    c: f64,
    trials: usize,
    seed: u64,
    restarts: usize,
) -> Result<ExperimentTable> {
    if trials == 0 || restarts == 0 {
        return Err(Error::precondition("trials and restarts must be positive"));
    }
    if n < 2 {
        return Err(Error::precondition("need at least two samples"));
    }
    if let Some(&m) = m_list.iter().find(|&&m| m == 0 || m > n) {
        return Err(Error::OutOfRange(format!("m = {m} must lie in 1..={n}")));
    }
    if d_list.contains(&0) {
        return Err(Error::OutOfRange("dimensions must be positive".into()));
    }
    if !(c > 0.0) {
        return Err(Error::OutOfRange(format!("c must be positive, got {c}")));
    }
    let metric = Metric::l2_euclidean();
    let mut rows = Vec::with_capacity(d_list.len() * m_list.len());
    for &d in d_list {
        let sigma = 1.0 / ((d as f64 - 1.0).sqrt() + c);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::precondition(e.to_string()))?;
        let mut ratios = vec![Vec::with_capacity(trials); m_list.len()];
        for trial in 0..trials {
            let sub = trial_seed(seed, d, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(sub);
            let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect();
            let p = DiscreteDistribution::uniform(points)?;
            for (slot, &m) in m_list.iter().enumerate() {
                let bound = limit_bounds(n, m, 2)?.c_upper;
                let mut best = f64::INFINITY;
                for r in 0..restarts {
                    let init = KMeansInit::Seed(mix(sub ^ (r as u64 + 1)));
                    best = best.min(k_means_generalized(&p, m, &metric, init, 1_000)?.value);
                }
                ratios[slot].push(if bound > 0.0 { best / bound } else { 0.0 });
            }
        }
        for (slot, &m) in m_list.iter().enumerate() {
            let v = &ratios[slot];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(ExperimentRow { d, m, mean_ratio: mean, std_ratio: std, trials });
        }
    }
    Ok(ExperimentTable { config: ExperimentConfig { n, c, seed, restarts }, rows })
}
