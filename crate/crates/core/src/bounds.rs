//! Explicit approximation bounds: `T₁…T₄`, `C*`, the invariance-principle
//! term, the normal, chi-square and Wasserstein smooth-test bounds, and the
//! multivariate bounds built on `Δᵢⱼ`.

use crate::contraction::{
    chi_square_constant, chi_square_defect, contraction_norm, influence_profile,
    symmetrized_contraction_norm,
};
use crate::error::{Error, Result};
use crate::kernel::SymmetricKernel;
use crate::moments::{gaussian_fourth_moment, require_unit_variance, MomentEstimate, NORMALIZATION_TOL};
use crate::numeric::{binomial, check_order, factorial};
use crate::simulate::Law;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Smoothness budget of the test function.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunctionBudget {
    /// `|φ′(0)|`
    pub a: f64,
    /// `|φ″(0)|`
    pub b: f64,
    /// `‖φ‴‖∞`
    pub b3: f64,
    /// `‖φ″‖∞`, multivariate normalization.
    #[serde(default)]
    pub b2m: f64,
    /// `‖φ‴‖∞`, multivariate normalization.
    #[serde(default)]
    pub b3m: f64,
}

impl TestFunctionBudget {
    pub fn new(a: f64, b: f64, b3: f64) -> Self {
        Self { a, b, b3, b2m: 0.0, b3m: 0.0 }
    }

    pub fn multivariate(b2m: f64, b3m: f64) -> Self {
        Self { b2m, b3m, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.b3, self.b2m, self.b3m];
        if all.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::ParameterOutOfRange(format!("budget fields must be finite and >= 0: {all:?}")))
        }
    }
}

/// Moment data of the input sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    /// `sup E|X_i|³`
    pub beta3: f64,
    /// `sup E X_i⁴`
    pub beta4: f64,
}

impl MomentProfile {
    pub fn new(beta3: f64, beta4: f64) -> Result<Self> {
        if !(beta3 >= 1.0 && beta4 >= 1.0 && beta3.is_finite() && beta4.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "moment profile needs beta3, beta4 >= 1, got ({beta3}, {beta4})"
            )));
        }
        Ok(Self { beta3, beta4 })
    }

    pub fn from_law(law: Law) -> Self {
        Self { beta3: law.abs_third_moment(), beta4: law.fourth_moment() }
    }

    /// `α = max{3, β₄}`.
    pub fn alpha(&self) -> f64 {
        self.beta4.max(3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    UpperBound,
    MonteCarlo,
}

/// A value with its exactness flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub value: f64,
    pub exactness: Exactness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Normal,
    Chi2,
    Wasserstein,
    Multivariate,
    ConvexSets,
}

/// Evaluated bound with every component needed to recompute its total.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: Option<BoundKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_exactness: Option<Exactness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t3_exactness: Option<Exactness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance: Option<f64>,
    /// `√((d−1)/(3d))`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_factor: Option<f64>,
    /// `max{√(2π/ν), 1/ν + 2/ν²}`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub influence_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_influence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq3: Option<MomentEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq4: Option<MomentEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_exactness: Option<Exactness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_sum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_influence_sum: Option<f64>,
    /// `[Σ_j (16√2β)^{(d_j−1)/3} d_j!]³`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_b2m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_rank: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension_m: Option<usize>,
    pub total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_std_error: Option<f64>,
    pub applicable: bool,
}

impl BoundReport {
    /// Recombines the stored components; `None` if a component is missing or
    /// the bound is inapplicable.
    pub fn recompute_total(&self) -> Option<f64> {
        match self.kind? {
            BoundKind::Normal => Some(
                self.invariance?
                    + self.c_star? * self.variance_factor? * (self.moment_term? + self.influence_term?),
            ),
            BoundKind::Chi2 => Some(
                self.invariance?
                    + self.prefactor? * self.variance_factor? * (self.moment_term? + self.influence_term?),
            ),
            BoundKind::Wasserstein => wasserstein_from_components(self.b1?, self.b2?),
            BoundKind::Multivariate => Some(self.budget_b2m? * self.delta_sum? + self.invariance?),
            BoundKind::ConvexSets => {
                let m = self.dimension_m? as f64;
                let inner = match self.b_rank {
                    None => self.b1? + self.b2?,
                    Some(b) => b * b * self.b1? + b * b * b * self.b2?,
                };
                Some(8.0 * inner.powf(0.25) * m.powf(3.0 / 8.0))
            }
        }
    }

    fn finish(mut self) -> Self {
        self.total = self.recompute_total();
        self.applicable = self.total.is_some();
        self
    }
}

/// `C* = 4√2(1+5^{3d/2})·max{(3/2)b + (B₃/3)(2√2/√π), 2a + B₃/3}`.
pub fn c_star(budget: &TestFunctionBudget, d: usize) -> f64 {
    let lead = 4.0 * SQRT_2 * (1.0 + 5f64.powf(1.5 * d as f64));
    let first = 1.5 * budget.b + budget.b3 / 3.0 * (2.0 * SQRT_2 / PI.sqrt());
    let second = 2.0 * budget.a + budget.b3 / 3.0;
    lead * first.max(second)
}

fn variance_factor(d: usize) -> f64 {
    ((d as f64 - 1.0) / (3.0 * d as f64)).sqrt()
}

/// Weight of `‖f⋆̃_r f‖²` in `T₁²`: `d²·(r−1)!²·binom(d−1,r−1)⁴·(2d−2r)!`.
fn t1_weight(d: usize, r: usize) -> f64 {
    let b = binomial(d - 1, r - 1);
    let fr = factorial(r - 1);
    (d * d) as f64 * fr * fr * b * b * b * b * factorial(2 * d - 2 * r)
}

/// Symmetrized norm, or the unsymmetrized one when materialization is too large.
fn norm_or_upper(f: &SymmetricKernel, r: usize) -> Result<(f64, bool)> {
    match symmetrized_contraction_norm(f, r) {
        Ok(v) => Ok((v, true)),
        Err(Error::MaterializationTooLarge { .. }) => Ok((contraction_norm(f, r)?, false)),
        Err(e) => Err(e),
    }
}

fn require_order_at_least_two(d: usize) -> Result<()> {
    check_order(d)?;
    if d < 2 {
        return Err(Error::ParameterOutOfRange("order must be at least 2".into()));
    }
    Ok(())
}

pub fn t1(f: &SymmetricKernel) -> Result<Evaluated> {
    require_unit_variance(f)?;
    let d = f.order();
    require_order_at_least_two(d)?;
    let mut sum = 0.0;
    let mut exact = true;
    for r in 1..d {
        let (s, ok) = norm_or_upper(f, r)?;
        exact &= ok;
        sum += t1_weight(d, r) * s * s;
    }
    let exactness = if exact { Exactness::Exact } else { Exactness::UpperBound };
    Ok(Evaluated { value: sum.sqrt(), exactness })
}

/// `T₁⁺`: `T₁` with unsymmetrized contraction norms.
pub fn t1_upper(f: &SymmetricKernel) -> Result<f64> {
    require_unit_variance(f)?;
    let d = f.order();
    require_order_at_least_two(d)?;
    let mut sum = 0.0;
    for r in 1..d {
        let s = contraction_norm(f, r)?;
        sum += t1_weight(d, r) * s * s;
    }
    Ok(sum.sqrt())
}

pub fn t2(f: &SymmetricKernel, ef4: f64) -> Result<f64> {
    require_unit_variance(f)?;
    let d = f.order();
    require_order_at_least_two(d)?;
    Ok(variance_factor(d) * (ef4 - 3.0).abs().sqrt())
}

fn require_two_nu(f: &SymmetricKernel, nu: u32) -> Result<()> {
    if nu == 0 {
        return Err(Error::InvalidDegrees(nu));
    }
    let target = 2.0 * nu as f64;
    let v = f.variance();
    if !((v - target).abs() <= NORMALIZATION_TOL * target) {
        return Err(Error::NotNormalizedToTwoNu { expected: target, got: v });
    }
    Ok(())
}

fn require_even(d: usize) -> Result<()> {
    if d == 0 || d % 2 == 1 {
        return Err(Error::OddOrder(d));
    }
    Ok(())
}

/// `T₃ = [4d!·‖f − (d!²/(4(d/2)!³))·f⋆̃_{d/2}f‖² + Σ_{r≠d/2} T₁-terms]^{1/2}`.
pub fn t3(f: &SymmetricKernel, nu: u32) -> Result<Evaluated> {
    let d = f.order();
    require_even(d)?;
    check_order(d)?;
    require_two_nu(f, nu)?;
    // f − κ·S = −κ·(S − c_d f) with κ = 1/c_d.
    let kappa = 1.0 / chi_square_constant(d)?;
    let defect = chi_square_defect(f)?;
    let mut sum = 4.0 * factorial(d) * kappa * kappa * defect * defect;
    let mut exact = true;
    for r in (1..d).filter(|&r| 2 * r != d) {
        let (s, ok) = norm_or_upper(f, r)?;
        exact &= ok;
        sum += t1_weight(d, r) * s * s;
    }
    let exactness = if exact { Exactness::Exact } else { Exactness::UpperBound };
    Ok(Evaluated { value: sum.sqrt(), exactness })
}

/// `T₄ = √(((d−1)/(3d))·|E F⁴ − 12 E F³ − 12ν² + 48ν|)`.
pub fn t4(ef3: f64, ef4: f64, nu: u32, d: usize) -> Result<f64> {
    require_even(d)?;
    if nu == 0 {
        return Err(Error::InvalidDegrees(nu));
    }
    Ok(variance_factor(d) * chi_square_moment_gap(ef3, ef4, nu).sqrt())
}

fn chi_square_moment_gap(ef3: f64, ef4: f64, nu: u32) -> f64 {
    let v = nu as f64;
    (ef4 - 12.0 * ef3 - 12.0 * v * v + 48.0 * v).abs()
}

/// `B₃·(30β₃)^d·d!·√(max_i Inf_i(f))`.
pub fn invariance_bound(f: &SymmetricKernel, beta3: f64, b3: f64) -> Result<f64> {
    check_order(f.order())?;
    Ok(invariance_term(f.order(), beta3, b3, influence_profile(f).max))
}

fn invariance_term(d: usize, beta: f64, b3: f64, max_inf: f64) -> f64 {
    b3 * (30.0 * beta).powi(d as i32) * factorial(d) * max_inf.sqrt()
}

/// `4√2·144^{d−1/2}·α^{d/2}·√d·d!·(max Inf)^{1/4}`.
fn normal_influence_term(d: usize, alpha: f64, max_inf: f64) -> f64 {
    let df = d as f64;
    4.0 * SQRT_2 * 144f64.powf(df - 0.5) * alpha.powf(df / 2.0) * df.sqrt() * factorial(d) * max_inf.powf(0.25)
}

fn moment_annotation(report: &mut BoundReport, eq3: Option<MomentEstimate>, eq4: MomentEstimate) {
    let exact = eq4.is_exact() && eq3.is_none_or(|e| e.is_exact());
    report.eq3 = eq3;
    report.eq4 = Some(eq4);
    report.moment_exactness = Some(if exact { Exactness::Exact } else { Exactness::MonteCarlo });
}

/// Standard error of `√|x|` propagated by the delta method (`√se` at 0).
fn sqrt_abs_se(x: f64, se: f64) -> f64 {
    if se == 0.0 {
        0.0
    } else if x == 0.0 {
        se.sqrt()
    } else {
        se / (2.0 * x.abs().sqrt())
    }
}

/// Gaussian-side quantities `T₁`, `T₂` attached to normal reports when computable.
fn attach_t1_t2(report: &mut BoundReport, f: &SymmetricKernel) -> Result<()> {
    let t = t1(f)?;
    report.t1 = Some(t.value);
    report.t1_exactness = Some(t.exactness);
    report.t2 = match gaussian_fourth_moment(f) {
        Ok(ef4) => Some(t2(f, ef4)?),
        Err(Error::MaterializationTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(())
}

/// Smooth-test normal bound:
/// `B(30β)^d d!√maxInf + C*·√((d−1)/(3d))·[√|E Q⁴ − 3| + 4√2·144^{d−1/2}α^{d/2}√d d!·maxInf^{1/4}]`.
pub fn normal_smooth_bound(
    f: &SymmetricKernel,
    profile: &MomentProfile,
    budget: &TestFunctionBudget,
    eq4x: MomentEstimate,
) -> Result<BoundReport> {
    require_unit_variance(f)?;
    budget.validate()?;
    let d = f.order();
    require_order_at_least_two(d)?;
    let max_inf = influence_profile(f).max;
    let mut r = BoundReport {
        kind: Some(BoundKind::Normal),
        order: Some(d),
        c_star: Some(c_star(budget, d)),
        invariance: Some(invariance_term(d, profile.beta4, budget.b3, max_inf)),
        variance_factor: Some(variance_factor(d)),
        moment_term: Some((eq4x.value - 3.0).abs().sqrt()),
        influence_term: Some(normal_influence_term(d, profile.alpha(), max_inf)),
        max_influence: Some(max_inf),
        ..BoundReport::default()
    };
    moment_annotation(&mut r, None, eq4x);
    attach_t1_t2(&mut r, f)?;
    r.total_std_error = Some(
        r.c_star.unwrap_or(0.0) * variance_factor(d) * sqrt_abs_se(eq4x.value - 3.0, eq4x.std_error),
    );
    Ok(r.finish())
}

/// `4(B₁+B₂)^{1/3}` when `B₁+B₂ ≤ 3/(4√2)`, otherwise inapplicable.
pub fn wasserstein_from_components(b1: f64, b2: f64) -> Option<f64> {
    let s = b1 + b2;
    (s <= 3.0 / (4.0 * SQRT_2)).then(|| 4.0 * s.cbrt())
}

pub fn wasserstein_bound(f: &SymmetricKernel, profile: &MomentProfile, eq4x: MomentEstimate) -> Result<BoundReport> {
    require_unit_variance(f)?;
    let d = f.order();
    require_order_at_least_two(d)?;
    let max_inf = influence_profile(f).max;
    let moment_term = (eq4x.value - 3.0).abs().sqrt();
    let influence_term = normal_influence_term(d, profile.alpha(), max_inf);
    let b1 = 2.0 * invariance_term(d, profile.beta4, 1.0, max_inf);
    let b2 = 12.0 * SQRT_2 * (1.0 + 5f64.powf(1.5 * d as f64)) * variance_factor(d) * (moment_term + influence_term);
    let mut r = BoundReport {
        kind: Some(BoundKind::Wasserstein),
        order: Some(d),
        variance_factor: Some(variance_factor(d)),
        moment_term: Some(moment_term),
        influence_term: Some(influence_term),
        max_influence: Some(max_inf),
        b1: Some(b1),
        b2: Some(b2),
        ..BoundReport::default()
    };
    moment_annotation(&mut r, None, eq4x);
    Ok(r.finish())
}

/// `max{√(2π/ν), 1/ν + 2/ν²}`.
pub fn chi_square_prefactor(nu: u32) -> f64 {
    let v = nu as f64;
    (2.0 * PI / v).sqrt().max(1.0 / v + 2.0 / (v * v))
}

/// Smooth-test chi-square bound with target `Z_ν`.
pub fn chi_square_smooth_bound(
    f: &SymmetricKernel,
    profile: &MomentProfile,
    budget: &TestFunctionBudget,
    nu: u32,
    eq3x: MomentEstimate,
    eq4x: MomentEstimate,
) -> Result<BoundReport> {
    let d = f.order();
    require_even(d)?;
    check_order(d)?;
    require_two_nu(f, nu)?;
    budget.validate()?;
    let max_inf = influence_profile(f).max;
    let (df, v, alpha) = (d as f64, nu as f64, profile.alpha());
    let influence_term = 4.0
        * df.sqrt()
        * factorial(d)
        * (SQRT_2 * 144f64.powf(df - 0.5) * alpha.powf(df / 2.0)
            + v.sqrt() * (2.0 * SQRT_2).powf(1.5 * (2.0 * df - 1.0)) * alpha.powf(1.5 * df))
        * max_inf.powf(0.25);
    let gap = chi_square_moment_gap(eq3x.value, eq4x.value, nu);
    let mut r = BoundReport {
        kind: Some(BoundKind::Chi2),
        order: Some(d),
        nu: Some(nu),
        invariance: Some(invariance_term(d, profile.beta4, budget.b3, max_inf)),
        variance_factor: Some(variance_factor(d)),
        prefactor: Some(chi_square_prefactor(nu)),
        moment_term: Some(gap.sqrt()),
        influence_term: Some(influence_term),
        max_influence: Some(max_inf),
        ..BoundReport::default()
    };
    moment_annotation(&mut r, Some(eq3x), eq4x);
    if let Ok(t) = t3(f, nu) {
        r.t3 = Some(t.value);
        r.t3_exactness = Some(t.exactness);
    }
    let gap_se = (eq4x.std_error.powi(2) + 144.0 * eq3x.std_error.powi(2)).sqrt();
    r.total_std_error = Some(chi_square_prefactor(nu) * variance_factor(d) * sqrt_abs_se(gap, gap_se));
    Ok(r.finish())
}

/// `Δᵢⱼ` for `d_i ≤ d_j`.
pub fn delta_ij(fi: &SymmetricKernel, fj: &SymmetricKernel) -> Result<f64> {
    let (di, dj) = (fi.order(), fj.order());
    if di > dj {
        return Err(Error::OrderMismatch { di, dj });
    }
    check_order(dj)?;
    require_unit_variance(fi)?;
    require_unit_variance(fj)?;
    let mut sum = 0.0;
    for r in 1..di {
        let coeff = factorial(r - 1)
            * binomial(di - 1, r - 1)
            * binomial(dj - 1, r - 1)
            * factorial(di + dj - 2 * r).sqrt();
        sum += coeff * (contraction_norm(fi, di - r)? + contraction_norm(fj, dj - r)?);
    }
    let mut delta = dj as f64 / SQRT_2 * sum;
    if di < dj {
        delta += (factorial(dj) * binomial(dj, di) * contraction_norm(fj, dj - di)?).sqrt();
    }
    Ok(delta)
}

struct MultiParts {
    delta: Vec<Vec<f64>>,
    c_influence_sum: f64,
    max_influence: f64,
    chain_factor: f64,
}

fn multi_parts(kernels: &[SymmetricKernel], beta3: f64) -> Result<MultiParts> {
    if kernels.is_empty() {
        return Err(Error::ParameterOutOfRange("at least one kernel is required".into()));
    }
    for k in kernels {
        require_unit_variance(k)?;
        check_order(k.order())?;
    }
    let m = kernels.len();
    let mut delta = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let (a, b) = if kernels[i].order() <= kernels[j].order() { (i, j) } else { (j, i) };
            let v = delta_ij(&kernels[a], &kernels[b])?;
            delta[i][j] = v;
            delta[j][i] = v;
        }
    }
    let profiles: Vec<_> = kernels.iter().map(influence_profile).collect();
    let n = kernels.iter().map(|k| k.dim()).max().unwrap_or(0);
    let c_influence_sum = (0..n)
        .map(|i| profiles.iter().map(|p| p.values.get(i).copied().unwrap_or(0.0)).fold(0.0, f64::max))
        .sum();
    let max_influence = profiles.iter().map(|p| p.max).fold(0.0, f64::max);
    let base = 16.0 * SQRT_2 * beta3;
    let chain: f64 = kernels
        .iter()
        .map(|k| base.powf((k.order() as f64 - 1.0) / 3.0) * factorial(k.order()))
        .sum();
    Ok(MultiParts { delta, c_influence_sum, max_influence, chain_factor: chain.powi(3) })
}

/// `ΣΔᵢᵢ + 2Σ_{i<j}Δᵢⱼ`.
fn delta_total(delta: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, row) in delta.iter().enumerate() {
        s += row[i];
        s += 2.0 * row[i + 1..].iter().sum::<f64>();
    }
    s
}

fn multi_invariance(p: &MultiParts, beta3: f64, b3m: f64) -> f64 {
    p.c_influence_sum * b3m * (beta3 + (8.0 / PI).sqrt()) * p.chain_factor * p.max_influence.sqrt()
}

/// Smooth multivariate bound
/// `‖φ″‖(ΣΔᵢᵢ + 2Σ_{i<j}Δᵢⱼ) + C‖φ‴‖(β + √(8/π))[Σ_j (16√2β)^{(d_j−1)/3} d_j!]³√(max Inf)`.
pub fn multivariate_smooth_bound(
    kernels: &[SymmetricKernel],
    profile: &MomentProfile,
    budget: &TestFunctionBudget,
) -> Result<BoundReport> {
    budget.validate()?;
    let p = multi_parts(kernels, profile.beta3)?;
    let r = BoundReport {
        kind: Some(BoundKind::Multivariate),
        delta_sum: Some(delta_total(&p.delta)),
        invariance: Some(multi_invariance(&p, profile.beta3, budget.b3m)),
        budget_b2m: Some(budget.b2m),
        c_influence_sum: Some(p.c_influence_sum),
        max_influence: Some(p.max_influence),
        chain_factor: Some(p.chain_factor),
        delta: Some(p.delta),
        dimension_m: Some(kernels.len()),
        ..BoundReport::default()
    };
    Ok(r.finish())
}

/// Target covariance for the convex-sets bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSpec {
    Identity { m: usize },
    /// `V = B Λ Bᵀ` with `k` positive eigenvalues; `b = max |(Λ^{−1/2}Bᵀ)ᵢⱼ|`.
    Rank { k: usize, lambda: Vec<f64>, basis: Vec<Vec<f64>>, b: f64 },
}

impl CovarianceSpec {
    /// Classifies a covariance matrix given row by row.
    pub fn from_matrix(v: &[Vec<f64>]) -> Result<Self> {
        let m = v.len();
        if m == 0 || v.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidCovariance("matrix must be square and non-empty".into()));
        }
        let mat = DMatrix::from_fn(m, m, |i, j| v[i][j]);
        if (&mat - mat.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
        }
        if (&mat - DMatrix::identity(m, m)).amax() <= 1e-12 {
            return Ok(CovarianceSpec::Identity { m });
        }
        let eig = SymmetricEigen::new(mat);
        let top = eig.eigenvalues.amax();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * top.max(1.0)) {
            return Err(Error::InvalidCovariance("matrix has a negative eigenvalue".into()));
        }
        let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 1e-10 * top).collect();
        if keep.is_empty() {
            return Err(Error::InvalidCovariance("matrix is zero".into()));
        }
        let lambda: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
        let basis: Vec<Vec<f64>> =
            (0..m).map(|row| keep.iter().map(|&c| eig.eigenvectors[(row, c)]).collect()).collect();
        let mut b: f64 = 0.0;
        for (c, l) in lambda.iter().enumerate() {
            for row in &basis {
                b = b.max((row[c] / l.sqrt()).abs());
            }
        }
        Ok(CovarianceSpec::Rank { k: keep.len(), lambda, basis, b })
    }

    pub fn dimension(&self) -> usize {
        match self {
            CovarianceSpec::Identity { m } => *m,
            CovarianceSpec::Rank { basis, .. } => basis.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let CovarianceSpec::Rank { k, lambda, basis, b } = self else {
            return Ok(());
        };
        let bad = |s: &str| Err(Error::InvalidCovariance(s.into()));
        if lambda.len() != *k || basis.iter().any(|r| r.len() != *k) || *k == 0 || *k > basis.len() {
            return bad("rank data dimensions are inconsistent");
        }
        if lambda.iter().any(|&l| !(l > 0.0)) || !(*b >= 0.0) {
            return bad("eigenvalues must be positive and b nonnegative");
        }
        for p in 0..*k {
            for q in 0..*k {
                let dot: f64 = basis.iter().map(|r| r[p] * r[q]).sum();
                if (dot - if p == q { 1.0 } else { 0.0 }).abs() > 1e-9 {
                    return bad("basis columns are not orthonormal");
                }
            }
        }
        Ok(())
    }
}

/// Kolmogorov-type bound over convex sets: `8(B₁+B₂)^{1/4}m^{3/8}` for identity
/// covariance, `8(b²B₁ + b³B₂)^{1/4}m^{3/8}` in the rank-`k` case.
pub fn convex_sets_bound(
    kernels: &[SymmetricKernel],
    profile: &MomentProfile,
    covariance: &CovarianceSpec,
) -> Result<BoundReport> {
    covariance.validate()?;
    if covariance.dimension() != kernels.len() {
        return Err(Error::InvalidCovariance(format!(
            "covariance has dimension {} for {} kernels",
            covariance.dimension(),
            kernels.len()
        )));
    }
    let p = multi_parts(kernels, profile.beta3)?;
    let b1 = 0.5 * delta_total(&p.delta);
    let b2 = multi_invariance(&p, profile.beta3, 1.0);
    let b_rank = match covariance {
        CovarianceSpec::Identity { .. } => None,
        CovarianceSpec::Rank { b, .. } => Some(*b),
    };
    let r = BoundReport {
        kind: Some(BoundKind::ConvexSets),
        b1: Some(b1),
        b2: Some(b2),
        b_rank,
        c_influence_sum: Some(p.c_influence_sum),
        max_influence: Some(p.max_influence),
        chain_factor: Some(p.chain_factor),
        delta: Some(p.delta),
        dimension_m: Some(kernels.len()),
        ..BoundReport::default()
    };
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{generate_family, Family, KernelFamilySpec};

    fn fam(family: Family, d: usize, n: usize) -> SymmetricKernel {
        generate_family(&KernelFamilySpec::new(family, d, n)).unwrap()
    }

    #[test]
    fn c_star_examples() {
        assert_eq!(c_star(&TestFunctionBudget::new(0.0, 0.0, 0.0), 2), 0.0);
        let want = 4.0 * SQRT_2 * 126.0 * (2.0 * SQRT_2 / PI.sqrt());
        assert!((c_star(&TestFunctionBudget::new(0.0, 0.0, 3.0), 2) - want).abs() < 1e-9);
        let one = c_star(&TestFunctionBudget::new(0.0, 0.0, 1.0), 3);
        assert!((c_star(&TestFunctionBudget::new(0.0, 0.0, 2.0), 3) - 2.0 * one).abs() < 1e-9 * one);
    }

    #[test]
    fn t1_t2_fixtures() {
        let p2 = fam(Family::SinglePair, 2, 2);
        assert!((t1(&p2).unwrap().value - 1.0).abs() < 1e-12);
        assert!((t2(&p2, 9.0).unwrap() - 1.0).abs() < 1e-12);
        for m in [4usize, 100] {
            let f = fam(Family::DisjointPairs, 2, m);
            let want = 1.0 / (m as f64).sqrt();
            assert!((t1(&f).unwrap().value - want).abs() < 1e-12);
            assert!((t2(&f, 3.0 + 6.0 / m as f64).unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(t2(&p2, 3.0).unwrap(), 0.0);
        assert!(matches!(t1(&p2.scaled(3.0)), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn t1_falls_back_to_upper_bound() {
        let f = fam(Family::DisjointPairs, 2, 3000);
        // Arity-2 contractions are symmetric, so d = 2 stays exact at any size.
        assert_eq!(t1(&f).unwrap().exactness, Exactness::Exact);
        let w = fam(Family::Walsh, 3, 300);
        let t = t1(&w).unwrap();
        assert_eq!(t.exactness, Exactness::UpperBound);
        assert!((t.value - t1_upper(&w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn t4_vanishes_on_chi_square_moments() {
        assert_eq!(t4(8.0, 60.0, 1, 2).unwrap(), 0.0);
        assert_eq!(t4(8.0, 60.0, 1, 3), Err(Error::OddOrder(3)));
    }

    #[test]
    fn invariance_examples() {
        let unit = SymmetricKernel::new(1, 1, [([1], 1.0)]).unwrap();
        assert!((invariance_bound(&unit, 1.0, 1.0).unwrap() - 30.0).abs() < 1e-12);
        let c3 = fam(Family::Constant, 2, 3);
        let want = 3600.0 * 2.0 * (1.0f64 / 6.0).sqrt();
        assert!((invariance_bound(&c3, 2.0, 1.0).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn prefactor_at_one_degree_is_three() {
        assert_eq!(chi_square_prefactor(1), 3.0);
        assert!((chi_square_prefactor(8) - (2.0 * PI / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn delta_for_disjoint_pairs() {
        for m in [4usize, 100, 2500] {
            let f = fam(Family::DisjointPairs, 2, m);
            let want = SQRT_2 / (m as f64).sqrt();
            assert!((delta_ij(&f, &f).unwrap() - want).abs() < 1e-9);
        }
        let w2 = fam(Family::Walsh, 2, 6);
        let w4 = fam(Family::Walsh, 4, 8);
        assert!(matches!(delta_ij(&w4, &w2), Err(Error::OrderMismatch { di: 4, dj: 2 })));
        let with_indicator = delta_ij(&w2, &w4).unwrap();
        let n2 = contraction_norm(&w4, 2).unwrap();
        assert!(with_indicator > (24.0 * 6.0 * n2).sqrt());
    }

    #[test]
    fn wasserstein_boundary() {
        let edge = 3.0 / (4.0 * SQRT_2);
        assert_eq!(wasserstein_from_components(edge, 0.0), Some(4.0 * edge.cbrt()));
        assert_eq!(wasserstein_from_components(edge, 1e-9), None);
        let p2 = fam(Family::SinglePair, 2, 2);
        let r = wasserstein_bound(&p2, &MomentProfile::from_law(Law::Gaussian), MomentEstimate::exact(9.0)).unwrap();
        assert!(!r.applicable && r.total.is_none());
    }

    #[test]
    fn multivariate_two_copies() {
        let f = fam(Family::DisjointPairs, 2, 100);
        let ks = vec![f.clone(), f];
        let r = multivariate_smooth_bound(&ks, &MomentProfile::from_law(Law::Rademacher), &TestFunctionBudget::multivariate(1.0, 1.0)).unwrap();
        for row in r.delta.as_ref().unwrap() {
            for v in row {
                assert!((v - SQRT_2 / 10.0).abs() < 1e-12);
            }
        }
        assert!((r.c_influence_sum.unwrap() - 0.5).abs() < 1e-14);
        let zero = multivariate_smooth_bound(&ks, &MomentProfile::from_law(Law::Rademacher), &TestFunctionBudget::multivariate(0.0, 0.0)).unwrap();
        assert_eq!(zero.total, Some(0.0));
    }

    #[test]
    fn covariance_rank_one() {
        let spec = CovarianceSpec::from_matrix(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let CovarianceSpec::Rank { k, lambda, b, .. } = &spec else { panic!("expected rank data") };
        assert_eq!(*k, 1);
        assert!((lambda[0] - 2.0).abs() < 1e-12);
        assert!((b - 0.5).abs() < 1e-12);
        assert_eq!(CovarianceSpec::from_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), CovarianceSpec::Identity { m: 2 });
        assert!(CovarianceSpec::from_matrix(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(CovarianceSpec::from_matrix(&[vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
    }
}
