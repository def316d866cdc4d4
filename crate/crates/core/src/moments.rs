//! Exact and reference moments: Hermite polynomials, chi-square target
//! moments, Gaussian chaos moments from contraction norms, exact Rademacher
//! laws by enumeration, and exact low-order Gaussian moments by quadrature.

use crate::contraction::{symmetrized_contraction_norm_with_cap, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::kernel::SymmetricKernel;
use crate::numeric::{binomial, factorial, Compensated};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Relative tolerance for the unit-variance precondition.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Number of standard errors tolerated before a Monte Carlo comparison fails.
pub const SE_SLACK: f64 = 5.0;

/// A moment value, exact (`std_error = 0`) or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl MomentEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    pub fn is_exact(&self) -> bool {
        self.std_error == 0.0
    }
}

/// Probabilists' Hermite polynomial, `H_{q+1}(x) = x·H_q(x) − q·H_{q−1}(x)`.
pub fn hermite(q: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return prev;
    }
    for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(E Z², E Z³, E Z⁴)` for the centered chi-square `Z_ν = Σ_{i≤ν}(G_i² − 1)`.
pub fn chi_square_moments(nu: u32) -> Result<(f64, f64, f64)> {
    if nu == 0 {
        return Err(Error::InvalidDegrees(nu));
    }
    let v = nu as f64;
    Ok((2.0 * v, 8.0 * v, 12.0 * v * v + 48.0 * v))
}

pub fn gaussian_second_moment(f: &SymmetricKernel) -> f64 {
    f.variance()
}

/// `E[Q(f_i)·Q(f_j)]` under Gaussian inputs: zero across orders, else
/// `d!·Σ_{ordered} f_i f_j`.
pub fn gaussian_cross_moment(fi: &SymmetricKernel, fj: &SymmetricKernel) -> f64 {
    if fi.order() != fj.order() {
        return 0.0;
    }
    let (a, b) = (fi.values(), fj.values());
    let (mut p, mut q) = (0, 0);
    let mut acc = Compensated::new();
    while p < a.len() && q < b.len() {
        match fi.cmp_entries(p, fj, q) {
            Ordering::Less => p += 1,
            Ordering::Greater => q += 1,
            Ordering::Equal => {
                acc.add(a[p] * b[q]);
                p += 1;
                q += 1;
            }
        }
    }
    let df = factorial(fi.order());
    df * df * acc.value()
}

pub(crate) fn require_unit_variance(f: &SymmetricKernel) -> Result<()> {
    let v = f.variance();
    if !((v - 1.0).abs() <= NORMALIZATION_TOL) {
        return Err(Error::NotNormalized(v));
    }
    Ok(())
}

/// Weight of `‖f⋆̃_r f‖²` in `E[F⁴] − 3`:
/// `3d·r!(r−1)!·binom(d,r)²·binom(d−1,r−1)²·(2d−2r)!`.
pub fn fourth_cumulant_weight(d: usize, r: usize) -> f64 {
    let b1 = binomial(d, r);
    let b2 = binomial(d - 1, r - 1);
    3.0 * d as f64 * factorial(r) * factorial(r - 1) * b1 * b1 * b2 * b2 * factorial(2 * d - 2 * r)
}

/// `E[Q_d(G)⁴]` for a unit-variance kernel from symmetrized contraction norms.
pub fn gaussian_fourth_moment(f: &SymmetricKernel) -> Result<f64> {
    gaussian_fourth_moment_with_cap(f, DEFAULT_CAP)
}

pub fn gaussian_fourth_moment_with_cap(f: &SymmetricKernel, cap: usize) -> Result<f64> {
    require_unit_variance(f)?;
    crate::numeric::check_order(f.order())?;
    let d = f.order();
    let mut acc = Compensated::new();
    for r in 1..d {
        let s = symmetrized_contraction_norm_with_cap(f, r, cap)?;
        acc.add(fourth_cumulant_weight(d, r) * s * s);
    }
    Ok(3.0 + acc.value())
}

/// A finitely supported law: ascending atoms with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub atoms: Vec<(f64, f64)>,
}

impl ExactDistribution {
    pub fn moment(&self, k: i32) -> f64 {
        compensated(self.atoms.iter().map(|&(x, p)| p * x.powi(k)))
    }

    pub fn abs_moment(&self, q: f64) -> f64 {
        compensated(self.atoms.iter().map(|&(x, p)| p * x.abs().powf(q)))
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        compensated(self.atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1)).min(1.0)
    }

    /// Kolmogorov distance to a continuous CDF.
    pub fn kolmogorov_distance(&self, target: impl Fn(f64) -> f64) -> f64 {
        let mut below = 0.0;
        let mut worst: f64 = 0.0;
        for &(x, p) in &self.atoms {
            let t = target(x);
            worst = worst.max((t - below).abs());
            below += p;
            worst = worst.max((below - t).abs());
        }
        worst
    }
}

fn compensated(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Compensated::new();
    values.for_each(|v| acc.add(v));
    acc.value()
}

/// Largest `N` for which sign patterns are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 22;

/// Exact law of `Q_d(N, f, ε)` for i.i.d. Rademacher signs.
pub fn exact_rademacher_distribution(f: &SymmetricKernel) -> Result<ExactDistribution> {
    let n = f.dim();
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationTooLarge(n));
    }
    let masks: Vec<u32> = f
        .entries()
        .map(|(t, _)| t.iter().fold(0u32, |m, &i| m | 1 << (i - 1)))
        .collect();
    let coeffs = f.values();
    let scale = factorial(f.order());
    let patterns = 1u32 << n;
    let mut values: Vec<f64> = (0..patterns)
        .map(|p| {
            // Bit k set means ε_{k+1} = −1.
            let mut acc = 0.0;
            for (&m, &v) in masks.iter().zip(coeffs) {
                acc += if (p & m).count_ones() % 2 == 0 { v } else { -v };
            }
            scale * acc
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let spread = values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * spread.max(1.0);
    let weight = 1.0 / patterns as f64;
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut count = 0u64;
    let mut anchor = values[0];
    for &x in &values {
        if x - anchor > tol {
            atoms.push((anchor, count as f64 * weight));
            anchor = x;
            count = 0;
        }
        count += 1;
    }
    atoms.push((anchor, count as f64 * weight));
    Ok(ExactDistribution { atoms })
}

/// Largest `N` for the `3^N`-node product quadrature.
pub const MAX_QUADRATURE_DIM: usize = 13;

/// `E[Q_d(G)^k]` for `k = 1..=max_order ≤ 5`, exact up to rounding.
///
/// `Q^k` has degree at most `k` in each variable, and the 3-point
/// Gauss–Hermite rule integrates polynomials of degree ≤ 5 exactly.
pub fn gaussian_moments_by_quadrature(f: &SymmetricKernel, max_order: usize) -> Result<Vec<f64>> {
    let n = f.dim();
    if max_order == 0 || max_order > 5 {
        return Err(Error::ParameterOutOfRange(format!("moment order {max_order} outside 1..=5")));
    }
    if n > MAX_QUADRATURE_DIM {
        return Err(Error::EnumerationTooLarge(n));
    }
    let root3 = 3f64.sqrt();
    let nodes = [0.0, root3, -root3];
    let weights = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
    let mut digits = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut acc = vec![Compensated::new(); max_order];
    loop {
        let mut w = 1.0;
        for (xi, &dg) in x.iter_mut().zip(&digits) {
            *xi = nodes[dg];
            w *= weights[dg];
        }
        let q = f.evaluate_sum_padded(&x);
        let mut pow = 1.0;
        for a in acc.iter_mut() {
            pow *= q;
            a.add(w * pow);
        }
        // Odometer increment over {0,1,2}^N.
        let mut k = 0;
        while k < n && digits[k] == 2 {
            digits[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
        digits[k] += 1;
    }
    Ok(acc.iter().map(Compensated::value).collect())
}

/// Outcome of a hypercontractivity comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypercontractivityCheck {
    pub holds: bool,
    pub bound: f64,
    /// `bound − moment_q`; negative values are tolerated up to the statistical allowance.
    pub slack: f64,
}

/// `E|Q|^q ≤ γ^d·(2√(q−1))^{qd}·E[Q²]^{q/2}` for inputs with `E|X|^q ≤ γ`.
/// Estimated moments are allowed [`SE_SLACK`] standard errors.
pub fn hypercontractivity_check(
    moment_q: MomentEstimate,
    moment_2: f64,
    q: f64,
    d: usize,
    gamma: f64,
) -> HypercontractivityCheck {
    let qd = q * d as f64;
    let bound = gamma.powi(d as i32) * (2.0 * (q - 1.0).sqrt()).powf(qd) * moment_2.powf(q / 2.0);
    finish_check(moment_q, bound)
}

/// Gaussian chaos version: `E|F|^q ≤ (q−1)^{qd/2}·E[F²]^{q/2}`.
pub fn gaussian_hypercontractivity_check(
    moment_q: MomentEstimate,
    moment_2: f64,
    q: f64,
    d: usize,
) -> HypercontractivityCheck {
    let bound = (q - 1.0).powf(q * d as f64 / 2.0) * moment_2.powf(q / 2.0);
    finish_check(moment_q, bound)
}

fn finish_check(m: MomentEstimate, bound: f64) -> HypercontractivityCheck {
    let slack = bound - m.value;
    HypercontractivityCheck { holds: slack >= -SE_SLACK * m.std_error, bound, slack }
}

/// Bound on `|E Q_d(X)^l − E Q_d(Y)^l|` for laws matching up to second moments:
/// `c_{d,l,m,α}·M^{l−1}·max{maxInf^{1/2}, maxInf^{l/2−1}}`.
pub fn moment_transfer_bound(d: usize, l: usize, m: usize, alpha: f64, big_m: f64, max_inf: f64) -> Result<f64> {
    const K: usize = 2;
    let bad = |s: String| Err(Error::ParameterOutOfRange(s));
    if d == 0 {
        return bad("order must be at least 1".into());
    }
    if m <= K || l <= K || l > m {
        return bad(format!("need 2 < l <= m, got l={l}, m={m}"));
    }
    if !(alpha >= 1.0) || !(big_m >= 1.0) || !(0.0..=1.0).contains(&max_inf) {
        return bad(format!("alpha={alpha}, M={big_m}, maxInf={max_inf}"));
    }
    let (df, lf) = (d as f64, l as f64);
    let c = 2f64.powi(l as i32 + 1) / factorial(d - 1)
        * alpha.powf(df * lf / m as f64)
        * (2.0 * (lf - 1.0).sqrt()).powf((2.0 * df - 1.0) * lf)
        * factorial(d).powi(l as i32 - 1);
    let inf = max_inf.powf((K as f64 - 1.0) / 2.0).max(max_inf.powf(lf / 2.0 - 1.0));
    Ok(c * big_m.powi((l - K + 1) as i32) * inf)
}
