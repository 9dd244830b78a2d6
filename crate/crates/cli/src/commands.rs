use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use scenred::exact::{
    continuous_exact, discrete_exact, export_milp_continuous, export_milp_discrete, DEFAULT_BUDGET, DEFAULT_TOL,
};
use scenred::heuristics::{dupacova_greedy, k_means_with_tol, local_search, KMeansInit, LocalSearchInit, SwapStrategy};
use scenred::limits::{
    gen_adversarial, gen_kappa_tight, gen_worst_case, limit_bounds, normal_experiment, AdversarialFamily,
    DEFAULT_RESTARTS,
};
use scenred::quantize::{quantize_image, ImageRaster, PaletteAlgorithm, QuantizeOptions};
use scenred::transport::wasserstein;
use scenred::{format_g17, DiscreteDistribution, Metric, Norm, ReductionResult};
use serde::Serialize;

use crate::file::{read_distribution, write_distribution};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "scenred", version, about = "Wasserstein scenario reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wasserstein distance between two distribution files.
    Distance(DistanceArgs),
    /// Reduce a distribution to at most `m` atoms.
    Reduce(ReduceArgs),
    /// Closed-form worst-case bounds for uniform distributions.
    Bounds(BoundsArgs),
    /// Write a generated instance.
    Gen(GenArgs),
    /// Write a mixed-integer model of the reduction in LP format.
    ExportMilp(ExportArgs),
    /// Color-quantize a PPM image.
    Quantize(QuantizeArgs),
    /// Sampling experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Wasserstein order.
    #[arg(long = "l", default_value_t = 1.0)]
    pub order: f64,
    /// Ground norm: 1, 2 or inf.
    #[arg(long, default_value = "2")]
    pub norm: Norm,
}

impl MetricArgs {
    fn metric(&self) -> Result<Metric, CliError> {
        Ok(Metric::new(self.order, self.norm)?)
    }
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    pub p: PathBuf,
    #[arg(long)]
    pub q: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Write the positive entries of an optimal plan as CSV.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReduceAlgorithm {
    Dupacova,
    Kmeans,
    /// Local search from a seeded random subset.
    Local,
    /// Local search from the greedy selection.
    LocalWarm,
    ExactDiscrete,
    ExactContinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    BestFit,
    FirstFit,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub algo: ReduceAlgorithm,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative improvement threshold for local search.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Strategy::BestFit)]
    pub strategy: Strategy,
    /// Enumeration budget for the exact algorithms.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Tolerance for iterative centroids.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Iteration cap for k-means.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Result JSON; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long = "l", default_value_t = 2)]
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    WorstCase,
    Kappa2,
    Kappa1,
    DupacovaAdv,
    KmeansAdv,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Number of atoms (worst-case, kappa families).
    #[arg(long)]
    pub n: Option<usize>,
    /// Target support size (kappa families).
    #[arg(long)]
    pub m: Option<usize>,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Separation between groups (kappa families).
    #[arg(long)]
    pub big_m: Option<f64>,
    /// Atoms per cluster (adversarial families).
    #[arg(long)]
    pub z: Option<usize>,
    /// Cluster radius (adversarial families).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Distribution file; JSON on standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Formulation {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub formulation: Formulation,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub colors: usize,
    #[arg(long, default_value = "loc1")]
    pub algo: PaletteAlgorithm,
    /// Colors kept by the median-cut pre-reduction.
    #[arg(long, default_value_t = 64)]
    pub pre: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Gap report JSON; standard output when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Reduction distance of Gaussian samples against the worst case.
    Normal(NormalArgs),
}

#[derive(Debug, Args)]
pub struct NormalArgs {
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, default_value_t = 2.97)]
    pub c: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// CSV table; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Distance(a) => distance(a),
        Command::Reduce(a) => reduce(a),
        Command::Bounds(a) => bounds(a),
        Command::Gen(a) => generate(a),
        Command::ExportMilp(a) => export(a),
        Command::Quantize(a) => quantize(a),
        Command::Experiment(ExperimentCommand::Normal(a)) => experiment(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data");
    s.push('\n');
    s
}

fn distance(a: DistanceArgs) -> Result<(), CliError> {
    let metric = a.metric.metric()?;
    let p = read_distribution(&a.p)?;
    let q = read_distribution(&a.q)?;
    let t = wasserstein(&p, &q, &metric)?;
    if let Some(path) = &a.plan {
        let mut csv = String::from("source,target,mass\n");
        for (i, row) in t.plan.matrix.iter().enumerate() {
            for (j, &mass) in row.iter().enumerate() {
                if mass > 0.0 {
                    let _ = writeln!(csv, "{i},{j},{}", format_g17(mass));
                }
            }
        }
        std::fs::write(path, csv).map_err(|e| CliError::io(path, e))?;
    }
    emit(None, &format!("{}\n", format_g17(t.value)))
}

#[derive(Serialize)]
struct ReduceOutput<'a> {
    m: usize,
    l: f64,
    norm: Norm,
    seed: u64,
    #[serde(flatten)]
    result: &'a ReductionResult,
}

fn reduce(a: ReduceArgs) -> Result<(), CliError> {
    let metric = a.metric.metric()?;
    let p = read_distribution(&a.input)?;
    let strategy = match a.strategy {
        Strategy::BestFit => SwapStrategy::BestFit,
        Strategy::FirstFit => SwapStrategy::FirstFit,
    };
    let result = match a.algo {
        ReduceAlgorithm::Dupacova => dupacova_greedy(&p, a.m, &metric)?,
        ReduceAlgorithm::Kmeans => k_means_with_tol(&p, a.m, &metric, KMeansInit::Seed(a.seed), a.max_iter, a.tol)?,
        ReduceAlgorithm::Local => local_search(&p, a.m, &metric, LocalSearchInit::Seed(a.seed), strategy, a.epsilon)?,
        ReduceAlgorithm::LocalWarm => {
            let greedy = dupacova_greedy(&p, a.m, &metric)?;
            let init = LocalSearchInit::Indices(greedy.support_indices.unwrap_or_default());
            local_search(&p, a.m, &metric, init, strategy, a.epsilon)?
        }
        ReduceAlgorithm::ExactDiscrete => discrete_exact(&p, a.m, &metric, a.budget)?,
        ReduceAlgorithm::ExactContinuous => continuous_exact(&p, a.m, &metric, a.tol, a.budget)?,
    };
    let out = ReduceOutput { m: a.m, l: metric.order(), norm: metric.norm(), seed: a.seed, result: &result };
    emit(a.out.as_deref(), &to_json(&out))
}

fn bounds(a: BoundsArgs) -> Result<(), CliError> {
    emit(None, &to_json(&limit_bounds(a.n, a.m, a.order)?))
}

fn need<T>(value: Option<T>, flag: &str, family: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for family {family}")))
}

fn generate(a: GenArgs) -> Result<(), CliError> {
    let dist: DiscreteDistribution = match a.family {
        Family::WorstCase => {
            let n = need(a.n, "n", "worst-case")?;
            gen_worst_case(n, a.d.unwrap_or(n))?
        }
        Family::Kappa2 | Family::Kappa1 => {
            let (l, name) = if a.family == Family::Kappa2 { (2, "kappa2") } else { (1, "kappa1") };
            let n = need(a.n, "n", name)?;
            let m = need(a.m, "m", name)?;
            gen_kappa_tight(l, n, m, a.d, a.big_m)?
        }
        Family::DupacovaAdv | Family::KmeansAdv => {
            let (family, name, d) = if a.family == Family::DupacovaAdv {
                (AdversarialFamily::Dupacova, "dupacova-adv", 2)
            } else {
                (AdversarialFamily::KMeans, "kmeans-adv", 1)
            };
            let z = need(a.z, "z", name)?;
            let eps = need(a.eps, "eps", name)?;
            gen_adversarial(family, z, eps, a.d.unwrap_or(d))?
        }
    };
    match &a.out {
        Some(path) => write_distribution(path, &dist),
        None => emit(None, &crate::file::to_json(&dist)),
    }
}

fn export(a: ExportArgs) -> Result<(), CliError> {
    let metric = a.metric.metric()?;
    let p = read_distribution(&a.input)?;
    let model = match a.formulation {
        Formulation::Discrete => export_milp_discrete(&p, a.m, &metric)?,
        Formulation::Continuous => export_milp_continuous(&p, a.m, &metric)?,
    };
    emit(a.out.as_deref(), &model.to_lp())
}

fn quantize(a: QuantizeArgs) -> Result<(), CliError> {
    let image = ImageRaster::open(&a.image)?;
    let mut options = QuantizeOptions::new(a.colors, a.algo, a.pre);
    options.budget = a.budget;
    let q = quantize_image(&image, &options)?;
    let file = File::create(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    q.image.write_ppm(BufWriter::new(file))?;
    emit(a.report.as_deref(), &to_json(&q.report))
}

fn experiment(a: NormalArgs) -> Result<(), CliError> {
    let table = normal_experiment(a.n, &a.m, &a.d, a.c, a.trials, a.seed, a.restarts)?;
    emit(a.out.as_deref(), &table.to_csv())
}
