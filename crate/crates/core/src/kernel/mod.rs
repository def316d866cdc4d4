//! Symmetric kernels on `[N]^d` vanishing on diagonals, stored in sparse
//! canonical form (strictly increasing 1-based tuples).

mod family;
mod file;

pub use family::{generate_family, Family, KernelFamilySpec, MAX_DENSE_ENTRIES};
pub use file::{read_kernel, read_kernel_file, write_kernel, write_kernel_file};

use crate::error::{Error, Result};
use crate::numeric::{factorial, Compensated};
use std::cmp::Ordering;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    order: usize,
    dim: usize,
    // Flattened canonical tuples, `order` indices per entry, sorted lexicographically.
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SymmetricKernel {
    /// Builds a kernel from canonical entries. Zero coefficients are dropped.
    pub fn new<I, T>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: AsRef<[usize]>,
    {
        if order == 0 {
            return Err(Error::ParameterOutOfRange("order must be at least 1".into()));
        }
        if dim < order {
            return Err(Error::ParameterOutOfRange(format!(
                "dimension {dim} is smaller than order {order}"
            )));
        }
        if dim > u32::MAX as usize {
            return Err(Error::ParameterOutOfRange(format!("dimension {dim} too large")));
        }
        let mut staged: Vec<(Vec<u32>, f64)> = Vec::new();
        for (tuple, value) in entries {
            let tuple = tuple.as_ref();
            if tuple.len() != order {
                return Err(Error::DimensionMismatch { expected: order, got: tuple.len() });
            }
            for &i in tuple {
                if i == 0 || i > dim {
                    return Err(Error::IndexOutOfRange { index: i, dim });
                }
            }
            if tuple.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::NonCanonicalTuple(tuple.to_vec()));
            }
            if !value.is_finite() {
                return Err(Error::ParameterOutOfRange(format!(
                    "non-finite coefficient at {tuple:?}"
                )));
            }
            staged.push((tuple.iter().map(|&i| i as u32).collect(), value));
        }
        staged.sort_by(|a, b| a.0.cmp(&b.0));
        for w in staged.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateTuple(w[0].0.iter().map(|&i| i as usize).collect()));
            }
        }
        let mut indices = Vec::with_capacity(staged.len() * order);
        let mut values = Vec::with_capacity(staged.len());
        for (t, v) in staged {
            if v != 0.0 {
                indices.extend_from_slice(&t);
                values.push(v);
            }
        }
        Ok(Self { order, dim, indices, values })
    }

    /// The empty kernel.
    pub fn zero(order: usize, dim: usize) -> Result<Self> {
        Self::new(order, dim, std::iter::empty::<(Vec<usize>, f64)>())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored canonical entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Canonical entries in lexicographic order, 1-based.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = (&[u32], f64)> + '_ {
        self.indices.chunks_exact(self.order).zip(self.values.iter().copied())
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    fn lookup(&self, sorted: &[u32]) -> Option<f64> {
        let d = self.order;
        let (mut lo, mut hi) = (0, self.values.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.indices[mid * d..(mid + 1) * d].cmp(sorted) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(self.values[mid]),
            }
        }
        None
    }

    /// Value of the symmetric extension at an arbitrary 1-based tuple.
    pub fn evaluate(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order {
            return Err(Error::DimensionMismatch { expected: self.order, got: idx.len() });
        }
        let mut sorted = Vec::with_capacity(idx.len());
        for &i in idx {
            if i == 0 || i > self.dim {
                return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
            }
            sorted.push(i as u32);
        }
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Ok(0.0);
        }
        Ok(self.lookup(&sorted).unwrap_or(0.0))
    }

    /// `‖f‖²_d`, the sum of `f²` over all ordered tuples.
    pub fn squared_norm(&self) -> f64 {
        let mut acc = Compensated::new();
        for &v in &self.values {
            acc.add(v * v);
        }
        factorial(self.order) * acc.value()
    }

    /// `d!·‖f‖²_d`, the second moment of the homogeneous sum under
    /// unit-variance inputs.
    pub fn variance(&self) -> f64 {
        factorial(self.order) * self.squared_norm()
    }

    /// `Q_d(N, f, x) = d!·Σ_{i₁<…<i_d} f(i)·x_{i₁}⋯x_{i_d}`.
    pub fn evaluate_sum(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.evaluate_sum_padded(x))
    }

    /// As [`evaluate_sum`](Self::evaluate_sum) for inputs at least `dim` long;
    /// trailing coordinates are ignored.
    pub fn evaluate_sum_padded(&self, x: &[f64]) -> f64 {
        assert!(x.len() >= self.dim);
        let d = self.order;
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let mut p = v;
            for &i in &self.indices[k * d..(k + 1) * d] {
                p *= x[i as usize - 1];
            }
            acc += p;
        }
        factorial(d) * acc
    }

    /// Multiplies every coefficient by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        if lambda == 0.0 {
            out.indices.clear();
            out.values.clear();
        }
        out
    }

    /// Rescales to `d!·‖g‖²_d = sigma2`.
    pub fn normalize_to_variance(&self, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("target variance {sigma2}")));
        }
        let var = self.variance();
        if self.is_zero() || var == 0.0 {
            return Err(Error::ZeroKernel);
        }
        Ok(self.scaled((sigma2 / var).sqrt()))
    }

    /// Shifts all indices by `offset` inside a larger index set `[dim]`.
    pub fn embed(&self, offset: usize, dim: usize) -> Result<Self> {
        if self.dim + offset > dim {
            return Err(Error::DimensionMismatch { expected: self.dim + offset, got: dim });
        }
        let mut out = self.clone();
        out.dim = dim;
        out.indices.iter_mut().for_each(|i| *i += offset as u32);
        Ok(out)
    }

    /// Compares canonical tuples of two kernels; used for sparse inner products.
    pub(crate) fn cmp_entries(&self, a: usize, other: &Self, b: usize) -> Ordering {
        let d = self.order;
        self.indices[a * d..(a + 1) * d].cmp(&other.indices[b * d..(b + 1) * d])
    }
}

/// Iterates over all strictly increasing `k`-tuples of `1..=n`.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut c: Vec<usize> = (1..=k).collect();
    loop {
        f(&c);
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> SymmetricKernel {
        SymmetricKernel::new(2, 2, [([1, 2], 0.5)]).unwrap()
    }

    #[test]
    fn rejects_diagonal_and_unsorted_tuples() {
        assert_eq!(
            SymmetricKernel::new(2, 2, [([1, 1], 0.5)]),
            Err(Error::NonCanonicalTuple(vec![1, 1]))
        );
        assert!(matches!(
            SymmetricKernel::new(2, 3, [([2, 1], 0.5)]),
            Err(Error::NonCanonicalTuple(_))
        ));
        assert!(matches!(
            SymmetricKernel::new(2, 3, [([1, 4], 0.5)]),
            Err(Error::IndexOutOfRange { index: 4, dim: 3 })
        ));
        assert!(matches!(
            SymmetricKernel::new(2, 3, [([1, 2], 0.5), ([1, 2], 1.0)]),
            Err(Error::DuplicateTuple(_))
        ));
    }

    #[test]
    fn symmetric_extension() {
        let f = SymmetricKernel::new(3, 4, [([1, 2, 3], 0.3), ([2, 3, 4], -0.7)]).unwrap();
        assert_eq!(f.nnz(), 2);
        assert_eq!(f.evaluate(&[3, 1, 2]).unwrap(), 0.3);
        assert_eq!(f.evaluate(&[4, 2, 3]).unwrap(), -0.7);
        assert_eq!(f.evaluate(&[1, 2, 4]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[2, 2, 3]).unwrap(), 0.0);
        assert!(f.evaluate(&[0, 1, 2]).is_err());
        assert_eq!(p2().evaluate(&[2, 1]).unwrap(), 0.5);
        assert_eq!(p2().evaluate(&[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn norms_and_sums() {
        let f = p2();
        assert_eq!(f.squared_norm(), 0.5);
        assert_eq!(f.variance(), 1.0);
        assert_eq!(f.evaluate_sum(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(f.evaluate_sum(&[1.0, -1.0]).unwrap(), -1.0);
        assert_eq!(f.evaluate_sum(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(f.evaluate_sum(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(SymmetricKernel::zero(3, 5).unwrap().squared_norm(), 0.0);
    }

    #[test]
    fn normalization() {
        let c3 = SymmetricKernel::new(2, 3, [([1, 2], 1.0), ([1, 3], 1.0), ([2, 3], 1.0)]).unwrap();
        let g = c3.scaled(2.0).normalize_to_variance(1.0).unwrap();
        for (_, v) in g.entries() {
            assert!((v - 12f64.sqrt().recip()).abs() < 1e-15);
        }
        assert_eq!(p2().normalize_to_variance(1.0).unwrap(), p2());
        assert_eq!(
            SymmetricKernel::zero(2, 3).unwrap().normalize_to_variance(1.0),
            Err(Error::ZeroKernel)
        );
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]);
    }
}
