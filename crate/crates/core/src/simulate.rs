//! Seeded Monte Carlo sampling of homogeneous sums.
//!
//! Draw `t` uses a ChaCha8 generator keyed by the master seed on stream `t`,
//! so every sample is a pure function of `(seed, t)`. Batches run on a rayon
//! pool of the requested size and are concatenated in draw order, which makes
//! summaries independent of the worker count.

use crate::error::{Error, Result};
use crate::kernel::SymmetricKernel;
use crate::moments::MomentEstimate;
use crate::numeric::{normal_cdf, Compensated};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

/// Centered, unit-variance input laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Law {
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    UniformUnitVariance,
    /// `Exp(1) − 1`.
    ShiftedExponential,
    /// `√((1−p)/p)` with probability `p`, `−√(p/(1−p))` otherwise.
    TwoPoint(f64),
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Law::TwoPoint(p) if !(p > 0.0 && p < 1.0) => {
                Err(Error::ParameterOutOfRange(format!("two_point probability {p}")))
            }
            _ => Ok(()),
        }
    }

    /// `E|X|³`.
    pub fn abs_third_moment(&self) -> f64 {
        match *self {
            Law::Gaussian => 2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            Law::Rademacher => 1.0,
            Law::UniformUnitVariance => 0.75 * 3f64.sqrt(),
            Law::ShiftedExponential => 12.0 / std::f64::consts::E - 2.0,
            Law::TwoPoint(p) => ((1.0 - p).powi(2) + p * p) / (p * (1.0 - p)).sqrt(),
        }
    }

    /// `E X³`.
    pub fn third_moment(&self) -> f64 {
        match *self {
            Law::ShiftedExponential => 2.0,
            Law::TwoPoint(p) => (1.0 - 2.0 * p) / (p * (1.0 - p)).sqrt(),
            _ => 0.0,
        }
    }

    /// `E X⁴`.
    pub fn fourth_moment(&self) -> f64 {
        match *self {
            Law::Gaussian => 3.0,
            Law::Rademacher => 1.0,
            Law::UniformUnitVariance => 1.8,
            Law::ShiftedExponential => 9.0,
            Law::TwoPoint(p) => ((1.0 - p).powi(3) + p.powi(3)) / (p * (1.0 - p)),
        }
    }

    /// `E|X|^q` for `q ∈ {2, 3, 4}`.
    pub fn abs_moment(&self, q: u32) -> Result<f64> {
        match q {
            2 => Ok(1.0),
            3 => Ok(self.abs_third_moment()),
            4 => Ok(self.fourth_moment()),
            _ => Err(Error::ParameterOutOfRange(format!("absolute moment of order {q}"))),
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) {
        match *self {
            Law::Gaussian => x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            Law::Rademacher => {
                for chunk in x.chunks_mut(64) {
                    let bits = rng.next_u64();
                    for (k, v) in chunk.iter_mut().enumerate() {
                        *v = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
                    }
                }
            }
            Law::UniformUnitVariance => {
                let s = 3f64.sqrt();
                x.iter_mut().for_each(|v| *v = (2.0 * rng.random::<f64>() - 1.0) * s);
            }
            Law::ShiftedExponential => {
                x.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(Exp1) - 1.0)
            }
            Law::TwoPoint(p) => {
                let hi = ((1.0 - p) / p).sqrt();
                let lo = -(p / (1.0 - p)).sqrt();
                x.iter_mut().for_each(|v| *v = if rng.random::<f64>() < p { hi } else { lo });
            }
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Gaussian => f.write_str("gaussian"),
            Law::Rademacher => f.write_str("rademacher"),
            Law::UniformUnitVariance => f.write_str("uniform"),
            Law::ShiftedExponential => f.write_str("shifted_exponential"),
            Law::TwoPoint(p) => write!(f, "two_point:{p}"),
        }
    }
}

impl std::str::FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let law = match s {
            "gaussian" => Law::Gaussian,
            "rademacher" => Law::Rademacher,
            "uniform" | "uniform_unit_variance" => Law::UniformUnitVariance,
            "shifted_exponential" => Law::ShiftedExponential,
            _ => match s.strip_prefix("two_point:") {
                Some(p) => Law::TwoPoint(
                    p.parse().map_err(|_| Error::Parse(format!("bad two_point probability `{p}`")))?,
                ),
                None => return Err(Error::Parse(format!("unknown law `{s}`"))),
            },
        };
        law.validate()?;
        Ok(law)
    }
}

impl TryFrom<String> for Law {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Law> for String {
    fn from(l: Law) -> String {
        l.to_string()
    }
}

fn default_batch() -> usize {
    4096
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub n: usize,
    pub seed: u64,
    /// Thread count; 0 selects the available parallelism.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl SampleConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, workers: 0, batch_size: default_batch() }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Runs `job` on a pool with `workers` threads (0 = default).
pub(crate) fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Per-kernel samples in draw order; every draw shares one input vector.
fn draw(kernels: &[&SymmetricKernel], law: Law, config: &SampleConfig) -> Result<Vec<Vec<f64>>> {
    law.validate()?;
    if config.batch_size == 0 {
        return Err(Error::ParameterOutOfRange("batch size must be positive".into()));
    }
    let dim = kernels.iter().map(|k| k.dim()).max().unwrap_or(0);
    let proto = ChaCha8Rng::seed_from_u64(config.seed);
    let batches: Vec<(usize, usize)> = (0..config.n)
        .step_by(config.batch_size)
        .map(|s| (s, (s + config.batch_size).min(config.n)))
        .collect();
    let blocks: Vec<Vec<Vec<f64>>> = with_pool(config.workers, || {
        batches
            .par_iter()
            .map(|&(start, end)| {
                let mut out = vec![Vec::with_capacity(end - start); kernels.len()];
                let mut x = vec![0.0; dim];
                for t in start..end {
                    let mut rng = proto.clone();
                    rng.set_stream(t as u64);
                    law.fill(&mut rng, &mut x);
                    for (o, k) in out.iter_mut().zip(kernels) {
                        o.push(k.evaluate_sum_padded(&x));
                    }
                }
                out
            })
            .collect()
    })?;
    let mut samples = vec![Vec::with_capacity(config.n); kernels.len()];
    for block in blocks {
        for (s, b) in samples.iter_mut().zip(block) {
            s.extend(b);
        }
    }
    Ok(samples)
}

/// Empirical moments and the sample itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    /// Raw moments `E[Q^k]`, `k = 1..=4`.
    pub moments: Vec<MomentEstimate>,
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(skip)]
    pub sorted: Vec<f64>,
}

impl SampleSummary {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let moments = (1..=4).map(|k| mean_with_se(samples.iter().map(|x| x.powi(k)))).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Self { n: samples.len(), moments, samples, sorted }
    }

    /// `E[Q^k]` for `k = 1..=4`.
    pub fn moment(&self, k: usize) -> MomentEstimate {
        self.moments[k - 1]
    }

    /// `E|Q|^q` with its standard error.
    pub fn abs_moment(&self, q: f64) -> MomentEstimate {
        mean_with_se(self.samples.iter().map(|x| x.abs().powf(q)))
    }
}

fn mean_with_se(values: impl Iterator<Item = f64> + Clone) -> MomentEstimate {
    let mut acc = Compensated::new();
    let mut n = 0usize;
    for v in values.clone() {
        acc.add(v);
        n += 1;
    }
    if n == 0 {
        return MomentEstimate { value: f64::NAN, std_error: f64::NAN };
    }
    let mean = acc.value() / n as f64;
    let mut ss = Compensated::new();
    for v in values {
        ss.add((v - mean) * (v - mean));
    }
    let se = if n > 1 { (ss.value() / (n - 1) as f64 / n as f64).sqrt() } else { f64::INFINITY };
    MomentEstimate { value: mean, std_error: se }
}

pub fn sample_sums(f: &SymmetricKernel, law: Law, config: &SampleConfig) -> Result<SampleSummary> {
    let mut s = draw(&[f], law, config)?;
    Ok(SampleSummary::from_samples(s.pop().expect("one kernel")))
}

/// Joint samples of several homogeneous sums driven by the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorSummary {
    pub marginals: Vec<SampleSummary>,
    /// Empirical `E[Q_i Q_j]`.
    pub second_moments: Vec<Vec<MomentEstimate>>,
}

impl VectorSummary {
    pub fn samples(&self) -> Vec<&[f64]> {
        self.marginals.iter().map(|m| m.samples.as_slice()).collect()
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let cov = |a: usize, b: usize| {
            self.second_moments[a][b].value
                - self.marginals[a].moment(1).value * self.marginals[b].moment(1).value
        };
        cov(i, j) / (cov(i, i) * cov(j, j)).sqrt()
    }
}

pub fn sample_vector_sums(kernels: &[SymmetricKernel], law: Law, config: &SampleConfig) -> Result<VectorSummary> {
    if kernels.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let refs: Vec<&SymmetricKernel> = kernels.iter().collect();
    let samples = draw(&refs, law, config)?;
    let m = samples.len();
    let mut second = vec![vec![MomentEstimate::exact(0.0); m]; m];
    for i in 0..m {
        for j in i..m {
            let e = mean_with_se(samples[i].iter().zip(&samples[j]).map(|(a, b)| a * b));
            second[i][j] = e;
            second[j][i] = e;
        }
    }
    let marginals = samples.into_iter().map(SampleSummary::from_samples).collect();
    Ok(VectorSummary { marginals, second_moments: second })
}

/// Exact one-sample Kolmogorov statistic of a sorted sample against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // Ties form one jump of the empirical CDF.
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = cdf(sorted[i]);
        worst = worst.max((t - i as f64 / n).abs()).max(((j + 1) as f64 / n - t).abs());
        i = j + 1;
    }
    worst
}

pub fn ks_normal(summary: &SampleSummary) -> f64 {
    ks_statistic(&summary.sorted, normal_cdf)
}

pub fn ks_chi2(summary: &SampleSummary, nu: u32) -> Result<f64> {
    centered_chi2_cdf(0.0, nu)?;
    Ok(ks_statistic(&summary.sorted, |x| centered_chi2_cdf(x, nu).expect("validated")))
}

/// `P(χ²_ν − ν ≤ x)`.
pub fn centered_chi2_cdf(x: f64, nu: u32) -> Result<f64> {
    if nu == 0 {
        return Err(Error::InvalidDegrees(nu));
    }
    let v = nu as f64;
    if x <= -v {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_lr(v / 2.0, (x + v) / 2.0))
}

/// Dvoretzky–Kiefer–Wolfowitz half-width at confidence `1 − alpha`.
pub fn dkw_band(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// `n` draws of a centered Gaussian vector with covariance `v` (per-coordinate vectors).
pub fn sample_gaussian_vector(v: &DMatrix<f64>, config: &SampleConfig) -> Result<Vec<Vec<f64>>> {
    let m = v.nrows();
    if m == 0 || v.ncols() != m {
        return Err(Error::InvalidCovariance("covariance must be square and non-empty".into()));
    }
    let eig = SymmetricEigen::new(v.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(Error::InvalidCovariance("covariance has a negative eigenvalue".into()));
    }
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let proto = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = vec![Vec::with_capacity(config.n); m];
    let mut g = vec![0.0; m];
    for t in 0..config.n {
        let mut rng = proto.clone();
        rng.set_stream(t as u64);
        Law::Gaussian.fill(&mut rng, &mut g);
        for (i, o) in out.iter_mut().enumerate() {
            o.push((0..m).map(|k| root[(i, k)] * g[k]).sum());
        }
    }
    Ok(out)
}

/// Two-sample Kolmogorov distance between joint (orthant) CDFs, evaluated at
/// the pooled sample points. Each sample is truncated to `max_points` draws.
pub fn joint_ks_two_sample(a: &[&[f64]], b: &[&[f64]], max_points: usize) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let na = a[0].len().min(max_points);
    let nb = b[0].len().min(max_points);
    if na == 0 || nb == 0 {
        return Ok(0.0);
    }
    let point = |s: &[&[f64]], t: usize| -> Vec<f64> { s.iter().map(|c| c[t]).collect() };
    let below = |s: &[&[f64]], count: usize, z: &[f64]| {
        (0..count).filter(|&t| s.iter().zip(z).all(|(c, &zk)| c[t] <= zk)).count() as f64 / count as f64
    };
    let mut worst: f64 = 0.0;
    for z in (0..na).map(|t| point(a, t)).chain((0..nb).map(|t| point(b, t))) {
        worst = worst.max((below(a, na, &z) - below(b, nb, &z)).abs());
    }
    Ok(worst)
}

const RAW_MAGIC: &[u8; 8] = b"HSUMRAW1";

/// Writes samples as `magic (8 bytes) | count (u64 LE) | f64 LE …`.
pub fn write_raw_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 8 * samples.len());
    buf.extend_from_slice(RAW_MAGIC);
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_raw_samples(path: &Path) -> Result<Vec<f64>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 16 || &buf[..8] != RAW_MAGIC {
        return Err(Error::Parse("not a raw sample file".into()));
    }
    let count = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    if buf.len() != 16 + 8 * count {
        return Err(Error::Parse("raw sample file length does not match its header".into()));
    }
    Ok(buf[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}
