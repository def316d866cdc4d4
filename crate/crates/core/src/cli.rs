//! Command-line interface. Exit codes: 0 success, 1 usage, 2 validation,
//! 3 capacity.

use crate::bounds::{
    chi_square_smooth_bound, multivariate_smooth_bound, normal_smooth_bound, wasserstein_bound, BoundReport,
    MomentProfile, TestFunctionBudget,
};
use crate::contraction::influence_profile;
use crate::diagnose::DiagnoseSpec;
use crate::error::Error;
use crate::kernel::{generate_family, read_kernel_file, write_kernel_file, Family, KernelFamilySpec, SymmetricKernel};
use crate::moments::{exact_rademacher_distribution, gaussian_fourth_moment, gaussian_moments_by_quadrature, MomentEstimate, MAX_ENUMERATION_DIM, MAX_QUADRATURE_DIM};
use crate::report::{Report, RunManifest};
use crate::simulate::{
    ks_chi2, ks_normal, sample_sums, sample_vector_sums, write_raw_samples, Law, SampleConfig, SampleSummary,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "homsum", version, about = "Homogeneous sums: kernels, contraction norms, bounds and simulation")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate, inspect or normalize kernel files.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Evaluate an approximation bound.
    Bound {
        #[command(subcommand)]
        target: BoundTarget,
    },
    /// Sample homogeneous sums and report moments and Kolmogorov distances.
    Simulate(SimulateArgs),
    /// Run a diagnostic described by a spec file.
    Diagnose {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum KernelAction {
    Generate {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// N, or m for disjoint_pairs.
        #[arg(short = 'N', long = "m", alias = "N", short_alias = 'm')]
        size: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Inspect {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Normalize {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct MomentArgs {
    /// Input law; also supplies the moment profile unless --profile is given.
    #[arg(long, default_value = "gaussian")]
    law: String,
    /// beta3,beta4
    #[arg(long)]
    profile: Option<String>,
    /// Monte Carlo sample count when exact moments are unavailable.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Rescale kernels to the required variance instead of rejecting them.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BoundTarget {
    Normal {
        #[arg(long)]
        kernel: PathBuf,
        /// a,b,B3
        #[arg(long, default_value = "0,0,1")]
        budget: String,
        #[command(flatten)]
        common: MomentArgs,
    },
    Chi2 {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        nu: u32,
        /// a,b,B3
        #[arg(long, default_value = "0,0,1")]
        budget: String,
        #[command(flatten)]
        common: MomentArgs,
    },
    Wasserstein {
        #[arg(long)]
        kernel: PathBuf,
        #[command(flatten)]
        common: MomentArgs,
    },
    Multi {
        #[arg(long, required = true)]
        kernel: Vec<PathBuf>,
        /// B2m,B3m
        #[arg(long, default_value = "1,1")]
        budget: String,
        #[command(flatten)]
        common: MomentArgs,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, required = true)]
    kernel: Vec<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    law: String,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also report the distance to the centered chi-square with this many degrees.
    #[arg(long)]
    nu: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw samples, kernel after kernel, in the flat binary format.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
}

/// A failed invocation with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self { code: e.exit_code(), message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { code: 1, message: message.into() }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments and runs the command. Help and version requests are
/// returned as `Ok` with their text.
pub fn run<I, T>(args: I) -> CliResult<Option<String>>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Some(e.to_string())),
                _ => Err(usage(e.to_string().trim_start_matches("error: ").to_string())),
            };
        }
    };
    match cli.command {
        Command::Kernel { action } => kernel(action),
        Command::Bound { target } => bound(target),
        Command::Simulate(args) => simulate(args),
        Command::Diagnose { spec, workers, out } => diagnose(&spec, workers, out.as_deref()),
    }
}

fn emit<T: Serialize>(report: &Report<T>, out: Option<&Path>) -> CliResult<Option<String>> {
    let text = report.to_text();
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::from(Error::Io(format!("{}: {e}", p.display()))))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn parse_list(s: &str, want: usize, what: &str) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("{what}: expected {want} comma-separated numbers, got `{s}`")))?;
    if v.len() != want {
        return Err(usage(format!("{what}: expected {want} comma-separated numbers, got `{s}`")));
    }
    Ok(v)
}

fn parse_law(s: &str) -> CliResult<Law> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

#[derive(Serialize)]
struct KernelSummary {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    entries: usize,
    squared_norm: f64,
    variance: f64,
    max_influence: f64,
    argmax_influence: usize,
    min_influence: f64,
    influence_sum: f64,
}

fn summarize(f: &SymmetricKernel) -> KernelSummary {
    let inf = influence_profile(f);
    KernelSummary {
        d: f.order(),
        n: f.dim(),
        entries: f.nnz(),
        squared_norm: f.squared_norm(),
        variance: f.variance(),
        max_influence: inf.max,
        argmax_influence: inf.argmax(),
        min_influence: inf.values.iter().copied().fold(f64::INFINITY, f64::min),
        influence_sum: inf.sum,
    }
}

fn kernel(action: KernelAction) -> CliResult<Option<String>> {
    match action {
        KernelAction::Generate { family, order, size, sigma2, seed, out } => {
            let family: Family = family.parse().map_err(|e: Error| usage(e.to_string()))?;
            let spec = KernelFamilySpec { family, order, size, sigma2, seed, density: 0.5 };
            let f = generate_family(&spec)?;
            write_kernel_file(&f, &out)?;
            Ok(None)
        }
        KernelAction::Inspect { kernel, out } => {
            let f = read_kernel_file(&kernel)?;
            let manifest = RunManifest::new("kernel inspect").param("kernel", &kernel);
            emit(&Report::new(manifest, summarize(&f)), out.as_deref())
        }
        KernelAction::Normalize { kernel, sigma2, out } => {
            let f = read_kernel_file(&kernel)?.normalize_to_variance(sigma2)?;
            write_kernel_file(&f, &out)?;
            Ok(None)
        }
    }
}

struct Moments {
    eq3: Option<MomentEstimate>,
    eq4: MomentEstimate,
    source: String,
}

/// Third/fourth moments of `Q_d(X)`: exact where possible, else Monte Carlo.
fn moments_under(f: &SymmetricKernel, law: Law, cfg: &SampleConfig, need_third: bool) -> CliResult<Moments> {
    let mut sampled: Option<SampleSummary> = None;
    let mut mc = |k: usize| -> CliResult<MomentEstimate> {
        if sampled.is_none() {
            sampled = Some(sample_sums(f, law, cfg)?);
        }
        Ok(sampled.as_ref().expect("sampled").moment(k))
    };
    let (eq3, eq4) = match law {
        Law::Rademacher if f.dim() <= MAX_ENUMERATION_DIM => {
            let dist = exact_rademacher_distribution(f)?;
            (Some(MomentEstimate::exact(dist.moment(3))), MomentEstimate::exact(dist.moment(4)))
        }
        Law::Gaussian if f.dim() <= MAX_QUADRATURE_DIM => {
            let m = gaussian_moments_by_quadrature(f, 4)?;
            (Some(MomentEstimate::exact(m[2])), MomentEstimate::exact(m[3]))
        }
        _ => {
            // The Gaussian identity needs unit variance: evaluate on f/σ and rescale by σ⁴.
            let s2 = f.variance();
            let identity = match law {
                Law::Gaussian => f.normalize_to_variance(1.0).and_then(|g| gaussian_fourth_moment(&g)).ok(),
                _ => None,
            };
            let eq4 = match identity {
                Some(v) => MomentEstimate::exact(v * s2 * s2),
                None => mc(4)?,
            };
            let eq3 = if need_third { Some(mc(3)?) } else { None };
            (eq3, eq4)
        }
    };
    let source = if sampled.is_some() {
        format!("monte_carlo(n={}, seed={})", cfg.n, cfg.seed)
    } else {
        "exact".to_string()
    };
    Ok(Moments { eq3: if need_third { eq3 } else { None }, eq4, source })
}

#[derive(Serialize)]
struct BoundOutput {
    moment_source: Option<String>,
    bound: BoundReport,
}

fn load(path: &Path, normalize: bool, sigma2: f64) -> CliResult<SymmetricKernel> {
    let f = read_kernel_file(path)?;
    Ok(if normalize { f.normalize_to_variance(sigma2)? } else { f })
}

fn bound(target: BoundTarget) -> CliResult<Option<String>> {
    let (name, common) = match &target {
        BoundTarget::Normal { common, .. } => ("bound normal", common),
        BoundTarget::Chi2 { common, .. } => ("bound chi2", common),
        BoundTarget::Wasserstein { common, .. } => ("bound wasserstein", common),
        BoundTarget::Multi { common, .. } => ("bound multi", common),
    };
    let law = parse_law(&common.law)?;
    let profile = match &common.profile {
        Some(p) => {
            let v = parse_list(p, 2, "--profile")?;
            MomentProfile::new(v[0], v[1])?
        }
        None => MomentProfile::from_law(law),
    };
    let cfg = SampleConfig::new(common.n, common.seed).with_workers(common.workers);
    let mut manifest = RunManifest::new(name)
        .param("law", law)
        .param("profile", profile)
        .param("n", common.n)
        .param("normalize", common.normalize)
        .with_seed(common.seed);
    let output = match &target {
        BoundTarget::Normal { kernel, budget, .. } => {
            let b = parse_list(budget, 3, "--budget")?;
            let budget = TestFunctionBudget::new(b[0], b[1], b[2]);
            let f = load(kernel, common.normalize, 1.0)?;
            crate::moments::require_unit_variance(&f)?;
            let m = moments_under(&f, law, &cfg, false)?;
            manifest = manifest.param("kernel", kernel).param("budget", budget);
            BoundOutput { moment_source: Some(m.source), bound: normal_smooth_bound(&f, &profile, &budget, m.eq4)? }
        }
        BoundTarget::Chi2 { kernel, nu, budget, .. } => {
            let b = parse_list(budget, 3, "--budget")?;
            let budget = TestFunctionBudget::new(b[0], b[1], b[2]);
            if *nu == 0 {
                return Err(Error::InvalidDegrees(0).into());
            }
            let f = load(kernel, common.normalize, 2.0 * *nu as f64)?;
            if f.order() % 2 == 1 {
                return Err(Error::OddOrder(f.order()).into());
            }
            let m = moments_under(&f, law, &cfg, true)?;
            manifest = manifest.param("kernel", kernel).param("budget", budget).param("nu", nu);
            let eq3 = m.eq3.expect("third moment requested");
            BoundOutput {
                moment_source: Some(m.source),
                bound: chi_square_smooth_bound(&f, &profile, &budget, *nu, eq3, m.eq4)?,
            }
        }
        BoundTarget::Wasserstein { kernel, .. } => {
            let f = load(kernel, common.normalize, 1.0)?;
            crate::moments::require_unit_variance(&f)?;
            let m = moments_under(&f, law, &cfg, false)?;
            manifest = manifest.param("kernel", kernel);
            BoundOutput { moment_source: Some(m.source), bound: wasserstein_bound(&f, &profile, m.eq4)? }
        }
        BoundTarget::Multi { kernel, budget, .. } => {
            let b = parse_list(budget, 2, "--budget")?;
            let budget = TestFunctionBudget::multivariate(b[0], b[1]);
            let ks = kernel.iter().map(|k| load(k, common.normalize, 1.0)).collect::<CliResult<Vec<_>>>()?;
            manifest = manifest.param("kernels", kernel).param("budget", budget);
            BoundOutput { moment_source: None, bound: multivariate_smooth_bound(&ks, &profile, &budget)? }
        }
    };
    emit(&Report::new(manifest, output), common.out.as_deref())
}

#[derive(Serialize)]
struct MarginalOutput {
    kernel: PathBuf,
    variance_target: f64,
    summary: SampleSummary,
    ks_normal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_chi2: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput {
    marginals: Vec<MarginalOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    second_moments: Option<Vec<Vec<MomentEstimate>>>,
}

fn simulate(a: SimulateArgs) -> CliResult<Option<String>> {
    let law = parse_law(&a.law)?;
    let kernels = a.kernel.iter().map(|p| read_kernel_file(p)).collect::<Result<Vec<_>, _>>()?;
    let cfg = SampleConfig::new(a.n, a.seed).with_workers(a.workers);
    let (summaries, second) = if kernels.len() == 1 {
        (vec![sample_sums(&kernels[0], law, &cfg)?], None)
    } else {
        let v = sample_vector_sums(&kernels, law, &cfg)?;
        (v.marginals, Some(v.second_moments))
    };
    if let Some(path) = &a.dump_samples {
        let all: Vec<f64> = summaries.iter().flat_map(|s| s.samples.iter().copied()).collect();
        write_raw_samples(path, &all)?;
    }
    let mut marginals = Vec::new();
    for ((path, f), summary) in a.kernel.iter().zip(&kernels).zip(summaries) {
        let ks_chi2 = a.nu.map(|nu| ks_chi2(&summary, nu)).transpose()?;
        marginals.push(MarginalOutput {
            kernel: path.clone(),
            variance_target: f.variance(),
            ks_normal: ks_normal(&summary),
            ks_chi2,
            summary,
        });
    }
    let manifest = RunManifest::new("simulate")
        .param("kernels", &a.kernel)
        .param("law", law)
        .param("n", a.n)
        .param("nu", a.nu)
        .with_seed(a.seed);
    emit(&Report::new(manifest, SimulateOutput { marginals, second_moments: second }), a.out.as_deref())
}

fn diagnose(path: &Path, workers: usize, out: Option<&Path>) -> CliResult<Option<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::from(Error::Io(format!("{}: {e}", path.display()))))?;
    let spec: DiagnoseSpec = serde_json::from_str(&text).map_err(|e| CliError::from(Error::InvalidSpec(e.to_string())))?;
    let mut run_spec = spec.clone();
    run_spec.set_workers(workers);
    let report = run_spec.run()?;
    let manifest = RunManifest::new("diagnose").param("spec", &spec).param("spec_file", path);
    emit(&Report::new(manifest, report), out)
}
