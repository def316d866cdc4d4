//! Contractions `f⋆_r f`, their symmetrizations and norms, influences, and the
//! chi-square defect.
//!
//! Two norm paths exist. The Gram path evaluates
//! `‖f⋆_r f‖² = Σ_{a,b∈[N]^r} ⟨f(a,·), f(b,·)⟩²` from sparse slices and never
//! builds the output. The materialized path fills a dense array over
//! `[N]^{2d−2r}` and is required for symmetrized quantities.

use crate::error::{Error, Result};
use crate::kernel::SymmetricKernel;
use crate::numeric::{factorial, Compensated};
use std::collections::BTreeMap;

/// Default limit on the number of values in a materialized tensor.
pub const DEFAULT_CAP: usize = 10_000_000;

/// Upper limit on `d!·nnz`, the size of the ordered expansion.
const MAX_ORDERED: f64 = 2e8;

/// Dense Gram matrices are used up to this many distinct prefixes.
const DENSE_GRAM_PREFIXES: usize = 2048;

/// Dense function on `[N]^arity`, row-major with the first coordinate most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionTensor {
    arity: usize,
    dim: usize,
    values: Vec<f64>,
    symmetric: bool,
}

impl ContractionTensor {
    pub fn new(arity: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = dense_len(dim, arity, usize::MAX)?;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(Self { arity, dim, values, symmetric: arity <= 1 })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a 1-based multi-index.
    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.arity {
            return Err(Error::DimensionMismatch { expected: self.arity, got: idx.len() });
        }
        let mut flat = 0usize;
        for &i in idx {
            if i == 0 || i > self.dim {
                return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
            }
            flat = flat * self.dim + (i - 1);
        }
        Ok(self.values[flat])
    }

    pub fn squared_frobenius(&self) -> f64 {
        let mut acc = Compensated::new();
        for &v in &self.values {
            acc.add(v * v);
        }
        acc.value()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_frobenius().sqrt()
    }
}

fn dense_len(dim: usize, arity: usize, cap: usize) -> Result<usize> {
    let total = (dim as u128).checked_pow(arity as u32).unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::MaterializationTooLarge { values: total, cap });
    }
    Ok(total as usize)
}

fn check_rank(f: &SymmetricKernel, r: usize) -> Result<()> {
    if r > f.order() {
        return Err(Error::RankOutOfRange { r, d: f.order() });
    }
    Ok(())
}

/// All permutations of `0..k` (Heap's algorithm).
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..k).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; k];
    let mut i = 1;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Ordered-tuple expansion split at position `r`: `(prefix key, suffix key, value)`
/// with base-`N` keys over 0-based coordinates, sorted by the requested side.
struct Expansion {
    triples: Vec<(u128, u128, f64)>,
}

impl Expansion {
    fn build(f: &SymmetricKernel, r: usize) -> Result<Self> {
        let d = f.order();
        let n = f.dim() as u128;
        let longest = r.max(d - r) as u32;
        if (f.dim() as f64).powi(longest as i32) >= 2f64.powi(126) {
            return Err(Error::MaterializationTooLarge { values: u128::MAX, cap: DEFAULT_CAP });
        }
        let count = factorial(d) * f.nnz() as f64;
        if count > MAX_ORDERED {
            return Err(Error::MaterializationTooLarge { values: count as u128, cap: MAX_ORDERED as usize });
        }
        let perms = permutations(d);
        let mut triples = Vec::with_capacity(count as usize);
        let mut ordered = vec![0u32; d];
        for (t, v) in f.entries() {
            for p in &perms {
                for (slot, &src) in ordered.iter_mut().zip(p) {
                    *slot = t[src] - 1;
                }
                let pre = ordered[..r].iter().fold(0u128, |acc, &i| acc * n + i as u128);
                let suf = ordered[r..].iter().fold(0u128, |acc, &i| acc * n + i as u128);
                triples.push((pre, suf, v));
            }
        }
        Ok(Self { triples })
    }

    fn sort_by_prefix(&mut self) {
        self.triples.sort_by_key(|t| (t.0, t.1));
    }

    fn sort_by_suffix(&mut self) {
        self.triples.sort_by_key(|t| (t.1, t.0));
    }
}

/// Groups consecutive items sharing a key.
fn groups<T, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<&[T]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || key(&items[i]) != key(&items[start]) {
            if i > start {
                out.push(&items[start..i]);
            }
            start = i;
        }
    }
    out
}

/// Materializes `f⋆_r f` on `[N]^{2d−2r}` (a scalar when `r = d`).
pub fn contract(f: &SymmetricKernel, r: usize) -> Result<ContractionTensor> {
    contract_with_cap(f, r, DEFAULT_CAP)
}

pub fn contract_with_cap(f: &SymmetricKernel, r: usize, cap: usize) -> Result<ContractionTensor> {
    check_rank(f, r)?;
    let d = f.order();
    let arity = 2 * (d - r);
    let len = dense_len(f.dim(), arity, cap)?;
    if r == d {
        return ContractionTensor::new(0, f.dim(), vec![f.squared_norm()]);
    }
    let stride = (f.dim() as u128).pow((d - r) as u32);
    let mut values = vec![0.0; len];
    let mut exp = Expansion::build(f, r)?;
    exp.sort_by_prefix();
    for g in groups(&exp.triples, |t| t.0) {
        for &(_, s1, v1) in g {
            let base = s1 * stride;
            for &(_, s2, v2) in g {
                values[(base + s2) as usize] += v1 * v2;
            }
        }
    }
    let mut t = ContractionTensor::new(arity, f.dim(), values)?;
    // For arity 2 the result is Mᵀ M for the unfolding M, hence symmetric.
    t.symmetric = arity <= 2;
    Ok(t)
}

/// `‖f⋆_r f‖_{2d−2r}` through the Gram identity, without materializing the output.
pub fn contraction_norm(f: &SymmetricKernel, r: usize) -> Result<f64> {
    Ok(contraction_norm_sq(f, r)?.sqrt())
}

fn contraction_norm_sq(f: &SymmetricKernel, r: usize) -> Result<f64> {
    check_rank(f, r)?;
    let d = f.order();
    if r == 0 || r == d {
        let s = f.squared_norm();
        return Ok(s * s);
    }
    let mut exp = Expansion::build(f, r)?;
    // Label prefixes densely in sorted order.
    exp.sort_by_prefix();
    let prefix_groups = groups(&exp.triples, |t| t.0);
    let prefixes: Vec<u128> = prefix_groups.iter().map(|g| g[0].0).collect();
    let p = prefixes.len();
    exp.sort_by_suffix();
    let label = |key: u128| prefixes.binary_search(&key).expect("prefix present") as u32;
    let by_suffix: Vec<Vec<(u32, f64)>> = groups(&exp.triples, |t| t.1)
        .into_iter()
        .map(|g| g.iter().map(|&(a, _, v)| (label(a), v)).collect())
        .collect();

    let mut acc = Compensated::new();
    if p <= DENSE_GRAM_PREFIXES {
        let mut gram = vec![0.0; p * p];
        for list in &by_suffix {
            for &(a, va) in list {
                let row = a as usize * p;
                for &(b, vb) in list {
                    gram[row + b as usize] += va * vb;
                }
            }
        }
        for g in gram {
            acc.add(g * g);
        }
    } else {
        let mut gram: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for list in &by_suffix {
            for &(a, va) in list {
                for &(b, vb) in list {
                    *gram.entry((a, b)).or_insert(0.0) += va * vb;
                }
            }
        }
        for g in gram.values() {
            acc.add(g * g);
        }
    }
    Ok(acc.value())
}

/// Averages a tensor over all permutations of its coordinates.
pub fn symmetrize(t: &ContractionTensor) -> ContractionTensor {
    if t.symmetric {
        return t.clone();
    }
    let orbits = Orbits::accumulate(t);
    let mut values = vec![0.0; t.values.len()];
    let mut coords = vec![0usize; t.arity];
    for (flat, v) in values.iter_mut().enumerate() {
        let rep = orbits.representative(flat, &mut coords);
        *v = orbits.sums[rep] / orbits.counts[rep] as f64;
    }
    ContractionTensor { arity: t.arity, dim: t.dim, values, symmetric: true }
}

/// Orbit sums of a tensor under coordinate permutations, keyed by the flat
/// index of the sorted multi-index.
struct Orbits {
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl Orbits {
    fn accumulate(t: &ContractionTensor) -> Self {
        let mut o = Self { dim: t.dim, sums: vec![0.0; t.values.len()], counts: vec![0; t.values.len()] };
        let mut coords = vec![0usize; t.arity];
        for (flat, &v) in t.values.iter().enumerate() {
            let rep = o.representative(flat, &mut coords);
            o.sums[rep] += v;
            o.counts[rep] += 1;
        }
        o
    }

    fn representative(&self, mut flat: usize, coords: &mut [usize]) -> usize {
        for c in coords.iter_mut().rev() {
            *c = flat % self.dim;
            flat /= self.dim;
        }
        coords.sort_unstable();
        coords.iter().fold(0, |acc, &c| acc * self.dim + c)
    }

    fn squared_norm(&self) -> f64 {
        let mut acc = Compensated::new();
        for (s, &c) in self.sums.iter().zip(&self.counts) {
            if c > 0 {
                acc.add(s * s / c as f64);
            }
        }
        acc.value()
    }
}

/// `‖f⋆̃_r f‖_{2d−2r}`. Arities 0 and 2 are symmetric already and use the Gram path.
pub fn symmetrized_contraction_norm(f: &SymmetricKernel, r: usize) -> Result<f64> {
    symmetrized_contraction_norm_with_cap(f, r, DEFAULT_CAP)
}

pub fn symmetrized_contraction_norm_with_cap(f: &SymmetricKernel, r: usize, cap: usize) -> Result<f64> {
    check_rank(f, r)?;
    if 2 * (f.order() - r) <= 2 {
        return contraction_norm(f, r);
    }
    let t = contract_with_cap(f, r, cap)?;
    Ok(Orbits::accumulate(&t).squared_norm().sqrt())
}

/// `c_d = 4·(d/2)!³ / d!²`.
pub fn chi_square_constant(d: usize) -> Result<f64> {
    if d % 2 == 1 || d == 0 {
        return Err(Error::OddOrder(d));
    }
    let h = factorial(d / 2);
    Ok(4.0 * h * h * h / (factorial(d) * factorial(d)))
}

/// `‖f⋆̃_{d/2} f − c_d·f‖_d` over all of `[N]^d`.
pub fn chi_square_defect(f: &SymmetricKernel) -> Result<f64> {
    chi_square_defect_with_cap(f, DEFAULT_CAP)
}

pub fn chi_square_defect_with_cap(f: &SymmetricKernel, cap: usize) -> Result<f64> {
    let d = f.order();
    let cd = chi_square_constant(d)?;
    let s = symmetrize(&contract_with_cap(f, d / 2, cap)?);
    let mut diff = s.values;
    let n = f.dim();
    for (t, v) in f.entries() {
        for p in permutations(d) {
            let flat = p.iter().fold(0usize, |acc, &k| acc * n + (t[k] as usize - 1));
            diff[flat] -= cd * v;
        }
    }
    Ok(diff.iter().fold(Compensated::new(), |mut acc, &x| {
        acc.add(x * x);
        acc
    })
    .value()
    .sqrt())
}

/// Per-index influences `Inf_i(f) = (1/(d−1)!)·Σ f²(i, i₂, …, i_d)` over ordered tails.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceProfile {
    pub values: Vec<f64>,
    pub max: f64,
    pub sum: f64,
}

impl InfluenceProfile {
    /// Index (1-based) of the largest influence; the first one on ties.
    pub fn argmax(&self) -> usize {
        self.values.iter().position(|&v| v == self.max).map_or(1, |i| i + 1)
    }
}

pub fn influence_profile(f: &SymmetricKernel) -> InfluenceProfile {
    // Each canonical tuple containing i accounts for (d−1)! ordered tails.
    let mut values = vec![0.0; f.dim()];
    for (t, v) in f.entries() {
        for &i in t {
            values[i as usize - 1] += v * v;
        }
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let sum = values.iter().fold(Compensated::new(), |mut acc, &x| {
        acc.add(x);
        acc
    });
    InfluenceProfile { values, max, sum: sum.value() }
}

/// `(‖f⋆_{d−1} f‖², ((d−1)!·max_i Inf_i(f))²)`; the first dominates the second.
pub fn crux_gap(f: &SymmetricKernel) -> Result<(f64, f64)> {
    let d = f.order();
    if d < 2 {
        return Err(Error::ParameterOutOfRange("crux gap needs d >= 2".into()));
    }
    let lhs = contraction_norm_sq(f, d - 1)?;
    let rhs = factorial(d - 1) * influence_profile(f).max;
    Ok((lhs, rhs * rhs))
}
