//! Convergence diagnostics over kernel sequences and universality experiments.
//!
//! A finite sweep "converges" for a statistic when the values decrease
//! strictly (each step by more than the tolerance) and the terminal value is
//! below a threshold. Verdicts are recomputed from the stored criteria alone,
//! see [`VerdictReport::recompute`].

use crate::bounds::{normal_smooth_bound, BoundReport, CovarianceSpec, MomentProfile, TestFunctionBudget};
use crate::contraction::{chi_square_defect, contraction_norm, crux_gap, influence_profile};
use crate::error::{Error, Result};
use crate::kernel::{generate_family, Family, KernelFamilySpec, SymmetricKernel};
use crate::moments::{
    exact_rademacher_distribution, gaussian_cross_moment, gaussian_fourth_moment, MomentEstimate,
    MAX_ENUMERATION_DIM, SE_SLACK,
};
use crate::simulate::{
    dkw_band, joint_ks_two_sample, ks_chi2, ks_normal, sample_gaussian_vector, sample_sums,
    sample_vector_sums, Law, SampleConfig,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TREND_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Confidence level of the DKW band used for cross-law agreement.
pub const DKW_ALPHA: f64 = 0.01;
/// Tolerance on `max |E[QᵢQⱼ] − V(i,j)|`.
pub const COVARIANCE_TOLERANCE: f64 = 1e-9;
/// Points per sample in the joint two-sample KS statistic.
pub const JOINT_KS_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Target {
    Normal,
    Chi2 { nu: u32 },
}

fn default_target() -> Target {
    Target::Normal
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_sample() -> SampleConfig {
    SampleConfig::new(10_000, 0)
}

/// A kernel family swept over increasing size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub family: Family,
    pub order: usize,
    pub sweep: Vec<usize>,
    #[serde(default = "default_target")]
    pub target: Target,
    #[serde(default)]
    pub laws: Vec<Law>,
    #[serde(default = "default_sample")]
    pub sample: SampleConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Seed for `random_sparse` kernels.
    #[serde(default)]
    pub kernel_seed: u64,
}

impl SequenceSpec {
    pub fn new(family: Family, order: usize, sweep: Vec<usize>) -> Self {
        Self {
            family,
            order,
            sweep,
            target: Target::Normal,
            laws: Vec::new(),
            sample: default_sample(),
            threshold: DEFAULT_THRESHOLD,
            kernel_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() || self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("sweep must be non-empty and strictly increasing".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidSpec(format!("threshold {}", self.threshold)));
        }
        if let Target::Chi2 { nu: 0 } = self.target {
            return Err(Error::InvalidDegrees(0));
        }
        Ok(())
    }

    fn variance(&self) -> f64 {
        match self.target {
            Target::Normal => 1.0,
            Target::Chi2 { nu } => 2.0 * nu as f64,
        }
    }

    fn kernel(&self, size: usize) -> Result<SymmetricKernel> {
        let spec = KernelFamilySpec {
            family: self.family,
            order: self.order,
            size,
            sigma2: self.variance(),
            seed: self.kernel_seed,
            density: 0.5,
        };
        generate_family(&spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decreasing,
    Stagnant,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    Undefined,
}

/// One verdict input together with the numbers it is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Criterion {
    /// Strict decrease along the sweep, optionally with a terminal threshold.
    Trend { statistic: String, values: Vec<f64>, tolerance: f64, threshold: Option<f64>, trend: Trend, passed: Option<bool> },
    /// `value ≤ threshold + slack·std_error`.
    Threshold { statistic: String, value: f64, std_error: f64, threshold: f64, passed: Option<bool> },
    /// `max − min ≤ band` across compared values.
    Agreement { statistic: String, values: Vec<f64>, band: f64, passed: Option<bool> },
}

impl Criterion {
    fn trend(statistic: impl Into<String>, values: Vec<f64>, threshold: Option<f64>) -> Self {
        Criterion::Trend { statistic: statistic.into(), values, tolerance: TREND_TOLERANCE, threshold, trend: Trend::Undefined, passed: None }
    }

    fn threshold(statistic: impl Into<String>, estimate: MomentEstimate, threshold: f64) -> Self {
        Criterion::Threshold { statistic: statistic.into(), value: estimate.value, std_error: estimate.std_error, threshold, passed: None }
    }

    pub fn statistic(&self) -> &str {
        match self {
            Criterion::Trend { statistic, .. }
            | Criterion::Threshold { statistic, .. }
            | Criterion::Agreement { statistic, .. } => statistic,
        }
    }

    /// Re-evaluates the rule; `None` when a trend has a single point.
    fn evaluate(&mut self) -> Option<bool> {
        match self {
            Criterion::Trend { values, tolerance, threshold, trend, passed, .. } => {
                *trend = if values.len() < 2 {
                    Trend::Undefined
                } else if values.windows(2).all(|w| w[1] < w[0] - *tolerance) {
                    Trend::Decreasing
                } else {
                    Trend::Stagnant
                };
                *passed = match trend {
                    Trend::Undefined => None,
                    Trend::Stagnant => Some(false),
                    Trend::Decreasing => Some(threshold.is_none_or(|t| *values.last().expect("points") < t)),
                };
                *passed
            }
            Criterion::Threshold { value, std_error, threshold, passed, .. } => {
                *passed = Some(*value <= *threshold + SE_SLACK * *std_error);
                *passed
            }
            Criterion::Agreement { values, band, passed, .. } => {
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                *passed = Some(hi - lo <= *band);
                *passed
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub diagnostic: String,
    pub sizes: Vec<usize>,
    /// Statistics per sweep point, keyed by stable names.
    pub points: Vec<BTreeMap<String, f64>>,
    pub criteria: Vec<Criterion>,
    pub flagged: Vec<String>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundReport>,
}

impl VerdictReport {
    fn new(diagnostic: &str, sizes: Vec<usize>, points: Vec<BTreeMap<String, f64>>, criteria: Vec<Criterion>) -> Self {
        let mut r = Self { diagnostic: diagnostic.into(), sizes, points, criteria, flagged: Vec::new(), verdict: Verdict::Undefined, bounds: Vec::new() };
        let (verdict, flagged) = r.recompute();
        r.verdict = verdict;
        r.flagged = flagged;
        r
    }

    /// Verdict and flagged statistics derived from the criteria only.
    pub fn recompute(&self) -> (Verdict, Vec<String>) {
        let mut criteria = self.criteria.clone();
        let outcomes: Vec<Option<bool>> = criteria.iter_mut().map(Criterion::evaluate).collect();
        let flagged: Vec<String> = criteria
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| **o == Some(false))
            .map(|(c, _)| c.statistic().to_string())
            .collect();
        let verdict = if outcomes.is_empty() || outcomes.iter().any(Option::is_none) {
            Verdict::Undefined
        } else if flagged.is_empty() {
            Verdict::Positive
        } else {
            Verdict::Negative
        };
        (verdict, flagged)
    }

    /// Values of a per-point statistic across the sweep.
    pub fn series(&self, name: &str) -> Vec<f64> {
        self.points.iter().map(|p| p.get(name).copied().unwrap_or(f64::NAN)).collect()
    }

    fn evaluated(mut self) -> Self {
        for c in &mut self.criteria {
            c.evaluate();
        }
        self
    }
}

fn column(points: &[BTreeMap<String, f64>], name: &str) -> Vec<f64> {
    points.iter().map(|p| p[name]).collect()
}

/// Fourth-moment and contraction statistics along a sweep with normal target.
pub fn fourth_moment_diagnostic(spec: &SequenceSpec) -> Result<VerdictReport> {
    spec.validate()?;
    if spec.target != Target::Normal {
        return Err(Error::InvalidSpec("fourth-moment diagnostic needs a normal target".into()));
    }
    let d = spec.order;
    let mut points = Vec::new();
    for &size in &spec.sweep {
        let f = spec.kernel(size)?;
        let mut p = BTreeMap::new();
        let ef4 = gaussian_fourth_moment(&f)?;
        p.insert("fourth_moment".into(), ef4);
        p.insert("fourth_moment_excess".into(), (ef4 - 3.0).abs());
        for r in 1..d {
            p.insert(format!("contraction_norm_r{r}"), contraction_norm(&f, r)?);
        }
        p.insert("max_influence".into(), influence_profile(&f).max);
        if d >= 2 {
            let (lhs, rhs) = crux_gap(&f)?;
            p.insert("crux_contraction".into(), lhs);
            p.insert("crux_influence".into(), rhs);
        }
        points.push(p);
    }
    let t = Some(spec.threshold);
    let mut criteria = vec![Criterion::trend("fourth_moment_excess", column(&points, "fourth_moment_excess"), t)];
    for r in 1..d {
        let name = format!("contraction_norm_r{r}");
        criteria.push(Criterion::trend(name.clone(), column(&points, &name), t));
    }
    criteria.push(Criterion::trend("max_influence", column(&points, "max_influence"), t));
    Ok(VerdictReport::new("fourth_moment", spec.sweep.clone(), points, criteria).evaluated())
}

/// Chi-square defect and off-critical contraction norms along a sweep.
pub fn chi_square_diagnostic(spec: &SequenceSpec, nu: u32) -> Result<VerdictReport> {
    if nu == 0 {
        return Err(Error::InvalidDegrees(nu));
    }
    let d = spec.order;
    if d == 0 || d % 2 == 1 {
        return Err(Error::OddOrder(d));
    }
    let spec = SequenceSpec { target: Target::Chi2 { nu }, ..spec.clone() };
    spec.validate()?;
    let mut points = Vec::new();
    for &size in &spec.sweep {
        let f = spec.kernel(size)?;
        let mut p = BTreeMap::new();
        p.insert("chi_square_defect".into(), chi_square_defect(&f)?);
        for r in (1..d).filter(|&r| 2 * r != d) {
            p.insert(format!("contraction_norm_r{r}"), contraction_norm(&f, r)?);
        }
        p.insert("max_influence".into(), influence_profile(&f).max);
        points.push(p);
    }
    let t = Some(spec.threshold);
    let mut criteria = vec![Criterion::trend("chi_square_defect", column(&points, "chi_square_defect"), t)];
    for r in (1..d).filter(|&r| 2 * r != d) {
        let name = format!("contraction_norm_r{r}");
        criteria.push(Criterion::trend(name.clone(), column(&points, &name), t));
    }
    Ok(VerdictReport::new("chi_square", spec.sweep.clone(), points, criteria).evaluated())
}

/// Fourth moment of `Q_d(X)` under `law`: exact for Gaussian inputs (when the
/// contraction norms are computable) and Rademacher inputs with `N ≤ 22`,
/// otherwise the Monte Carlo estimate.
pub fn fourth_moment_under(f: &SymmetricKernel, law: Law, mc: MomentEstimate) -> Result<MomentEstimate> {
    match law {
        Law::Gaussian => match gaussian_fourth_moment(f) {
            Ok(v) => Ok(MomentEstimate::exact(v)),
            Err(Error::MaterializationTooLarge { .. }) => Ok(mc),
            Err(e) => Err(e),
        },
        Law::Rademacher if f.dim() <= MAX_ENUMERATION_DIM => {
            Ok(MomentEstimate::exact(exact_rademacher_distribution(f)?.moment(4)))
        }
        _ => Ok(mc),
    }
}

/// Checks the two de Jong assumptions for one kernel and pairs them with the
/// empirical distance and the smooth-test bound.
pub fn de_jong_report(f: &SymmetricKernel, law: Law, config: &SampleConfig, threshold: f64) -> Result<VerdictReport> {
    let summary = sample_sums(f, law, config)?;
    let ef4 = fourth_moment_under(f, law, summary.moment(4))?;
    let inf = influence_profile(f);
    let mut p = BTreeMap::new();
    p.insert("fourth_moment".into(), ef4.value);
    p.insert("fourth_moment_std_error".into(), ef4.std_error);
    p.insert("empirical_fourth_moment".into(), summary.moment(4).value);
    p.insert("empirical_fourth_moment_std_error".into(), summary.moment(4).std_error);
    p.insert("max_influence".into(), inf.max);
    p.insert("ks_normal".into(), ks_normal(&summary));
    p.insert("dkw_band".into(), dkw_band(config.n, DKW_ALPHA));
    let excess = MomentEstimate { value: (ef4.value - 3.0).abs(), std_error: ef4.std_error };
    let criteria = vec![
        Criterion::threshold("fourth_moment_excess", excess, threshold),
        Criterion::threshold("max_influence", MomentEstimate::exact(inf.max), threshold),
    ];
    let mut report = VerdictReport::new("de_jong", vec![f.dim()], vec![p], criteria).evaluated();
    if f.order() >= 2 {
        let bound = normal_smooth_bound(f, &MomentProfile::from_law(law), &TestFunctionBudget::new(0.0, 0.0, 1.0), ef4)?;
        report.bounds.push(bound);
    }
    Ok(report)
}

/// Empirical KS to the target for several input laws along a sweep.
pub fn universality_experiment(spec: &SequenceSpec) -> Result<VerdictReport> {
    spec.validate()?;
    if spec.laws.len() < 2 {
        return Err(Error::InvalidSpec("universality needs at least two laws".into()));
    }
    let mut points = Vec::new();
    for &size in &spec.sweep {
        let f = spec.kernel(size)?;
        let mut p = BTreeMap::new();
        for law in &spec.laws {
            let s = sample_sums(&f, *law, &spec.sample)?;
            let ks = match spec.target {
                Target::Normal => ks_normal(&s),
                Target::Chi2 { nu } => ks_chi2(&s, nu)?,
            };
            p.insert(format!("ks_{law}"), ks);
            p.insert(format!("second_moment_{law}"), s.moment(2).value);
        }
        p.insert("max_influence".into(), influence_profile(&f).max);
        points.push(p);
    }
    let mut criteria: Vec<Criterion> =
        spec.laws.iter().map(|l| Criterion::trend(format!("ks_{l}"), column(&points, &format!("ks_{l}")), None)).collect();
    let last = points.last().expect("non-empty sweep");
    criteria.push(Criterion::Agreement {
        statistic: "terminal_ks_agreement".into(),
        values: spec.laws.iter().map(|l| last[&format!("ks_{l}")]).collect(),
        band: 3.0 * dkw_band(spec.sample.n, DKW_ALPHA),
        passed: None,
    });
    Ok(VerdictReport::new("universality", spec.sweep.clone(), points, criteria).evaluated())
}

/// Cross moments against `V`, contraction norms and the `Δ` trend along a
/// sweep of kernel vectors, with a joint empirical KS against `N_m(0, V)`.
pub fn multivariate_diagnostic(
    sweep: &[Vec<SymmetricKernel>],
    v: &[Vec<f64>],
    law: Law,
    config: &SampleConfig,
    threshold: f64,
) -> Result<VerdictReport> {
    CovarianceSpec::from_matrix(v)?;
    let m = v.len();
    if sweep.is_empty() || sweep.iter().any(|ks| ks.len() != m) {
        return Err(Error::InvalidCovariance(format!("every sweep point needs {m} kernels")));
    }
    let vmat = DMatrix::from_fn(m, m, |i, j| v[i][j]);
    let reference = sample_gaussian_vector(&vmat, &SampleConfig { seed: config.seed ^ 0x5eed, ..*config })?;
    let reference: Vec<&[f64]> = reference.iter().map(Vec::as_slice).collect();
    let mut points = Vec::new();
    let mut sizes = Vec::new();
    for kernels in sweep {
        let mut p = BTreeMap::new();
        let mut residual: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                residual = residual.max((gaussian_cross_moment(&kernels[i], &kernels[j]) - v[i][j]).abs());
            }
        }
        p.insert("covariance_residual".into(), residual);
        let mut max_norm: f64 = 0.0;
        for k in kernels {
            for r in 1..k.order() {
                max_norm = max_norm.max(contraction_norm(k, r)?);
            }
        }
        p.insert("max_contraction_norm".into(), max_norm);
        let normalized = kernels.iter().all(|k| (k.variance() - 1.0).abs() <= 1e-9);
        if normalized {
            let report = crate::bounds::multivariate_smooth_bound(
                kernels,
                &MomentProfile::from_law(law),
                &TestFunctionBudget::multivariate(1.0, 0.0),
            )?;
            let max_delta = report.delta.iter().flatten().flatten().copied().fold(0.0, f64::max);
            p.insert("max_delta".into(), max_delta);
        }
        p.insert("max_influence".into(), kernels.iter().map(|k| influence_profile(k).max).fold(0.0, f64::max));
        let joint = sample_vector_sums(kernels, law, config)?;
        p.insert("joint_ks".into(), joint_ks_two_sample(&joint.samples(), &reference, JOINT_KS_POINTS)?);
        sizes.push(kernels.iter().map(|k| k.dim()).max().unwrap_or(0));
        points.push(p);
    }
    let residual = column(&points, "covariance_residual").into_iter().fold(0.0, f64::max);
    let mut criteria = vec![
        Criterion::threshold("covariance_residual", MomentEstimate::exact(residual), COVARIANCE_TOLERANCE),
        Criterion::trend("max_contraction_norm", column(&points, "max_contraction_norm"), Some(threshold)),
    ];
    if points.iter().all(|p| p.contains_key("max_delta")) {
        criteria.push(Criterion::trend("max_delta", column(&points, "max_delta"), Some(threshold)));
    }
    Ok(VerdictReport::new("multivariate", sizes, points, criteria).evaluated())
}

fn default_copies() -> usize {
    2
}

fn default_law() -> Law {
    Law::Gaussian
}

/// Diagnostic specification file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "diagnostic", rename_all = "snake_case")]
pub enum DiagnoseSpec {
    FourthMoment(SequenceSpec),
    ChiSquare(SequenceSpec),
    Universality(SequenceSpec),
    DeJong {
        kernel: KernelFamilySpec,
        #[serde(default = "default_law")]
        law: Law,
        #[serde(default = "default_sample")]
        sample: SampleConfig,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// `copies` kernels of one family per sweep point, on disjoint index
    /// blocks when `disjoint` is set.
    Multivariate {
        family: Family,
        order: usize,
        sweep: Vec<usize>,
        #[serde(default = "default_copies")]
        copies: usize,
        #[serde(default)]
        disjoint: bool,
        covariance: Vec<Vec<f64>>,
        #[serde(default = "default_law")]
        law: Law,
        #[serde(default = "default_sample")]
        sample: SampleConfig,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

impl DiagnoseSpec {
    pub fn set_workers(&mut self, workers: usize) {
        match self {
            DiagnoseSpec::FourthMoment(s) | DiagnoseSpec::ChiSquare(s) | DiagnoseSpec::Universality(s) => {
                s.sample.workers = workers
            }
            DiagnoseSpec::DeJong { sample, .. } | DiagnoseSpec::Multivariate { sample, .. } => sample.workers = workers,
        }
    }

    pub fn run(&self) -> Result<VerdictReport> {
        match self {
            DiagnoseSpec::FourthMoment(s) => fourth_moment_diagnostic(s),
            DiagnoseSpec::ChiSquare(s) => match s.target {
                Target::Chi2 { nu } => chi_square_diagnostic(s, nu),
                Target::Normal => Err(Error::InvalidSpec("chi-square diagnostic needs a chi2 target".into())),
            },
            DiagnoseSpec::Universality(s) => universality_experiment(s),
            DiagnoseSpec::DeJong { kernel, law, sample, threshold } => {
                de_jong_report(&generate_family(kernel)?, *law, sample, *threshold)
            }
            DiagnoseSpec::Multivariate { family, order, sweep, copies, disjoint, covariance, law, sample, threshold } => {
                if *copies == 0 || sweep.is_empty() || sweep.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSpec("need copies >= 1 and a strictly increasing sweep".into()));
                }
                let mut points = Vec::new();
                for &size in sweep {
                    let base = generate_family(&KernelFamilySpec::new(*family, *order, size))?;
                    let n = base.dim();
                    let dim = if *disjoint { n * copies } else { n };
                    let ks = (0..*copies)
                        .map(|c| base.embed(if *disjoint { c * n } else { 0 }, dim))
                        .collect::<Result<Vec<_>>>()?;
                    points.push(ks);
                }
                multivariate_diagnostic(&points, covariance, *law, sample, *threshold)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_undefined() {
        let r = fourth_moment_diagnostic(&SequenceSpec::new(Family::DisjointPairs, 2, vec![10])).unwrap();
        assert_eq!(r.verdict, Verdict::Undefined);
        assert_eq!(r.points.len(), 1);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let s = SequenceSpec::new(Family::DisjointPairs, 2, vec![10, 10]);
        assert!(matches!(fourth_moment_diagnostic(&s), Err(Error::InvalidSpec(_))));
        let s = SequenceSpec::new(Family::Constant, 2, vec![10, 20]);
        assert_eq!(chi_square_diagnostic(&s, 0), Err(Error::InvalidDegrees(0)));
        let s = SequenceSpec::new(Family::Walsh, 3, vec![10, 20]);
        assert_eq!(chi_square_diagnostic(&s, 1), Err(Error::OddOrder(3)));
    }

    #[test]
    fn criterion_rules() {
        let mut c = Criterion::trend("x", vec![1.0, 1.0], None);
        assert_eq!(c.evaluate(), Some(false));
        let mut c = Criterion::trend("x", vec![1.0, 0.5, 0.04], Some(0.05));
        assert_eq!(c.evaluate(), Some(true));
        let mut c = Criterion::trend("x", vec![1.0, 0.5, 0.06], Some(0.05));
        assert_eq!(c.evaluate(), Some(false));
        let mut c = Criterion::threshold("y", MomentEstimate { value: 0.06, std_error: 0.01 }, 0.05);
        assert_eq!(c.evaluate(), Some(true));
    }
}
