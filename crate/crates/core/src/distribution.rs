//! Shared value types: distributions, metrics, partitions and reduction results.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance for checks that are exact up to representation error.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for sums accumulated in floating point.
pub const SUM_TOL: f64 = 1e-9;

/// A finitely supported probability distribution on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteDistribution {
    /// Builds a distribution, rejecting anything that fails [`validate`] with
    /// default options.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let verdict = validate(&points, &weights, ValidationOptions::default());
        if !verdict.is_empty() {
            return Err(Error::InvalidDistribution(join_violations(&verdict)));
        }
        Ok(Self { points, weights, dim })
    }

    /// Uniform weights `1/n` on the given atoms.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        let weights = vec![1.0 / n as f64; n];
        Self::new(points, weights)
    }

    /// Normalizes nonnegative masses (e.g. pixel counts) to probabilities.
    pub fn from_masses(points: Vec<Vec<f64>>, masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidDistribution("masses must be nonnegative with positive total".into()));
        }
        let weights = masses.iter().map(|m| m / total).collect();
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        is_uniform(&self.weights, EXACT_TOL)
    }

    pub fn is_distinct(&self) -> bool {
        first_coincidence(&self.points).is_none()
    }

    pub fn validate(&self, opts: ValidationOptions) -> Vec<Violation> {
        validate(&self.points, &self.weights, opts)
    }

    /// Errors unless the distribution is uniform on distinct atoms, the
    /// setting in which the worst-case bounds are stated.
    pub fn require_empirical(&self) -> Result<()> {
        let verdict = self.validate(ValidationOptions::empirical());
        if verdict.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(join_violations(&verdict)))
        }
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.points, self.weights)
    }
}

/// Which optional properties [`validate`] should insist on.
#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    pub require_uniform: bool,
    pub require_distinct: bool,
    /// Allowed deviation of the weight total from 1, and of each weight
    /// from `1/n` when uniformity is required.
    pub weight_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { require_uniform: false, require_distinct: false, weight_tol: EXACT_TOL }
    }
}

impl ValidationOptions {
    pub fn empirical() -> Self {
        Self { require_uniform: true, require_distinct: true, ..Self::default() }
    }
}

/// One failed invariant. Atom indices in messages are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    ZeroDimension,
    DimensionMismatch { atom: usize, expected: usize, found: usize },
    NonFinite { atom: usize },
    WeightCount { points: usize, weights: usize },
    NegativeWeight { atom: usize, weight: f64 },
    WeightSum { sum: f64 },
    NotUniform { atom: usize, weight: f64 },
    Coincident { first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "distribution has no atoms"),
            Violation::ZeroDimension => write!(f, "atoms have dimension 0"),
            Violation::DimensionMismatch { atom, expected, found } => {
                write!(f, "atom {} has dimension {found}, expected {expected}", atom + 1)
            }
            Violation::NonFinite { atom } => write!(f, "atom {} has a non-finite coordinate", atom + 1),
            Violation::WeightCount { points, weights } => {
                write!(f, "{points} atoms but {weights} weights")
            }
            Violation::NegativeWeight { atom, weight } => {
                write!(f, "weight of atom {} is {weight}", atom + 1)
            }
            Violation::WeightSum { sum } => write!(f, "weights sum to {sum}"),
            Violation::NotUniform { atom, weight } => {
                write!(f, "weight of atom {} is {weight}, not uniform", atom + 1)
            }
            Violation::Coincident { first, second } => {
                write!(f, "atoms {} and {} coincide", first + 1, second + 1)
            }
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks every distribution invariant and returns the list of violations;
/// an empty list means valid.
pub fn validate(points: &[Vec<f64>], weights: &[f64], opts: ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    if points.is_empty() {
        out.push(Violation::Empty);
        return out;
    }
    let dim = points[0].len();
    if dim == 0 {
        out.push(Violation::ZeroDimension);
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            out.push(Violation::DimensionMismatch { atom: i, expected: dim, found: p.len() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite { atom: i });
        }
    }
    if weights.len() != points.len() {
        out.push(Violation::WeightCount { points: points.len(), weights: weights.len() });
    }
    for (i, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) || !w.is_finite() {
            out.push(Violation::NegativeWeight { atom: i, weight: w });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > opts.weight_tol {
        out.push(Violation::WeightSum { sum });
    }
    if opts.require_uniform && !weights.is_empty() {
        let target = 1.0 / weights.len() as f64;
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, &w)| (w - target).abs() > opts.weight_tol) {
            out.push(Violation::NotUniform { atom: i, weight: w });
        }
    }
    if opts.require_distinct {
        if let Some((first, second)) = first_coincidence(points) {
            out.push(Violation::Coincident { first, second });
        }
    }
    out
}

fn is_uniform(weights: &[f64], tol: f64) -> bool {
    let target = 1.0 / weights.len() as f64;
    weights.iter().all(|w| (w - target).abs() <= tol)
}

fn first_coincidence(points: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut best: Option<(usize, usize)> = None;
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            let pair = (w[0].min(w[1]), w[0].max(w[1]));
            if best.is_none_or(|b| pair < b) {
                best = Some(pair);
            }
        }
    }
    best
}

/// Ground norm on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl Norm {
    pub fn of_diff(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Norm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Norm::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Norm::LInf => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "1",
            Norm::L2 => "2",
            Norm::LInf => "inf",
        })
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Norm::L1),
            "2" => Ok(Norm::L2),
            "inf" | "Inf" | "infinity" => Ok(Norm::LInf),
            other => Err(Error::OutOfRange(format!("unknown norm {other:?}, expected 1, 2 or inf"))),
        }
    }
}

/// Wasserstein order `l >= 1` together with the ground norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metric {
    order: f64,
    norm: Norm,
}

impl Metric {
    pub fn new(order: f64, norm: Norm) -> Result<Self> {
        if !(order >= 1.0) || !order.is_finite() {
            return Err(Error::OutOfRange(format!("Wasserstein order must be >= 1, got {order}")));
        }
        Ok(Self { order, norm })
    }

    /// Type-1 distance under the given norm.
    pub fn l1(norm: Norm) -> Self {
        Self { order: 1.0, norm }
    }

    /// Type-2 distance under the Euclidean norm (the k-means setting).
    pub fn l2_euclidean() -> Self {
        Self { order: 2.0, norm: Norm::L2 }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// `||a - b||^l`.
    pub fn cost(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.order == 2.0 && self.norm == Norm::L2 {
            return a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        }
        let d = self.norm.of_diff(a, b);
        self.power(d)
    }

    pub fn power(&self, d: f64) -> f64 {
        if self.order == 1.0 {
            d
        } else if self.order == 2.0 {
            d * d
        } else {
            d.powf(self.order)
        }
    }

    /// Inverse of [`Metric::power`]: turns an `l`-th power cost into a distance.
    pub fn root(&self, cost: f64) -> f64 {
        let cost = cost.max(0.0);
        if self.order == 1.0 {
            cost
        } else if self.order == 2.0 {
            cost.sqrt()
        } else {
            cost.powf(1.0 / self.order)
        }
    }
}

/// Disjoint nonempty cells covering `0..n`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn new(cells: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::precondition("partition cell is empty"));
            }
            for &i in cell {
                if i >= n || seen[i] {
                    return Err(Error::precondition(format!("index {i} is out of range or appears twice")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::precondition("partition does not cover every index"));
        }
        Ok(Self { cells, n })
    }

    /// Groups indices by label; labels must be `0..m` and every label used.
    pub fn from_labels(labels: &[usize], m: usize) -> Result<Self> {
        let mut cells = vec![Vec::new(); m];
        for (i, &l) in labels.iter().enumerate() {
            if l >= m {
                return Err(Error::precondition(format!("label {l} out of range 0..{m}")));
            }
            cells[l].push(i);
        }
        Self::new(cells, labels.len())
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell index of every element.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (j, cell) in self.cells.iter().enumerate() {
            for &i in cell {
                labels[i] = j;
            }
        }
        labels
    }
}

/// Output of every reducer.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionResult {
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub partition: Partition,
    /// Attained Wasserstein distance to the input distribution.
    pub value: f64,
    pub algorithm: String,
    pub iterations: usize,
    /// Objective (distance) evaluations performed.
    pub evaluations: usize,
    /// Atom indices of the support when it is a subset of the input support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_indices: Option<Vec<usize>>,
}

impl ReductionResult {
    /// The reduced distribution `sum_j q_j delta_{zeta_j}`.
    pub fn reduced(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(self.support.clone(), self.weights.clone())
    }

    /// Checks the structural invariants against the source distribution.
    pub fn check(&self, dist: &DiscreteDistribution) -> Result<()> {
        let m = self.partition.len();
        if self.support.len() != m || self.weights.len() != m {
            return Err(Error::precondition("support, weights and partition disagree in size"));
        }
        if self.partition.n() != dist.len() {
            return Err(Error::precondition("partition does not index the source atoms"));
        }
        for (cell, &q) in self.partition.cells().iter().zip(&self.weights) {
            let mass: f64 = cell.iter().map(|&i| dist.weights()[i]).sum();
            if (mass - q).abs() > EXACT_TOL {
                return Err(Error::precondition(format!("cell mass {mass} differs from weight {q}")));
            }
        }
        if !(self.value >= 0.0) {
            return Err(Error::precondition("negative value"));
        }
        Ok(())
    }
}
