use super::{for_each_combination, SymmetricKernel};
use crate::error::{Error, Result};
use crate::numeric::binomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Named kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One canonical tuple `(1,…,d)`; `P2` for `d = 2`, size 2.
    SinglePair,
    /// `d = 2`, every off-diagonal pair of `[N]` carries the same value.
    Constant,
    /// `d = 2`, `N = 2m`, pairs `(2k−1, 2k)`; size is `m`.
    DisjointPairs,
    /// Tuples `{1,…,d−1,i}` for `i ≥ d`: `X₁⋯X_{d−1}·ΣX_i/√(N−d+1)`.
    Walsh,
    /// Each canonical tuple kept with probability `density`, Gaussian values.
    RandomSparse,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown family `{s}`")))
    }
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_density() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamilySpec {
    pub family: Family,
    pub order: usize,
    /// `N`, or `m` for `disjoint_pairs`.
    pub size: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_density")]
    pub density: f64,
}

impl KernelFamilySpec {
    pub fn new(family: Family, order: usize, size: usize) -> Self {
        Self { family, order, size, sigma2: 1.0, seed: 0, density: 0.5 }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Largest number of canonical tuples a dense family may enumerate.
pub const MAX_DENSE_ENTRIES: usize = 5_000_000;

pub fn generate_family(spec: &KernelFamilySpec) -> Result<SymmetricKernel> {
    let bad = |msg: String| Err(Error::UnsupportedFamilyParameters(msg));
    let d = spec.order;
    let n = spec.size;
    if d == 0 {
        return bad("order must be at least 1".into());
    }
    if !(spec.sigma2 > 0.0) || !spec.sigma2.is_finite() {
        return bad(format!("target variance {}", spec.sigma2));
    }
    let raw = match spec.family {
        Family::SinglePair => {
            if n < d {
                return bad(format!("single_pair needs N >= d, got N={n}, d={d}"));
            }
            let t: Vec<usize> = (1..=d).collect();
            SymmetricKernel::new(d, n, [(t, 1.0)])?
        }
        Family::Constant => {
            if d != 2 || n < 2 {
                return bad(format!("constant needs d=2 and N>=2, got d={d}, N={n}"));
            }
            let pairs = n as u128 * (n as u128 - 1) / 2;
            if pairs > MAX_DENSE_ENTRIES as u128 {
                return Err(Error::MaterializationTooLarge { values: pairs, cap: MAX_DENSE_ENTRIES });
            }
            let mut entries = Vec::with_capacity(pairs as usize);
            for_each_combination(n, 2, |c| entries.push((c.to_vec(), 1.0)));
            SymmetricKernel::new(2, n, entries)?
        }
        Family::DisjointPairs => {
            if d != 2 || n == 0 {
                return bad(format!("disjoint_pairs needs d=2 and m>=1, got d={d}, m={n}"));
            }
            SymmetricKernel::new(2, 2 * n, (1..=n).map(|k| ([2 * k - 1, 2 * k], 1.0)))?
        }
        Family::Walsh => {
            if n <= d {
                return bad(format!("walsh needs N > d, got N={n}, d={d}"));
            }
            let entries = (d..=n).map(|i| {
                let mut t: Vec<usize> = (1..d).collect();
                t.push(i);
                (t, 1.0)
            });
            SymmetricKernel::new(d, n, entries)?
        }
        Family::RandomSparse => {
            if n < d {
                return bad(format!("random_sparse needs N >= d, got N={n}, d={d}"));
            }
            if !(spec.density > 0.0 && spec.density <= 1.0) {
                return bad(format!("density {} outside (0, 1]", spec.density));
            }
            if binomial(n, d) > MAX_DENSE_ENTRIES as f64 {
                return Err(Error::MaterializationTooLarge { values: binomial(n, d) as u128, cap: MAX_DENSE_ENTRIES });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut entries = Vec::new();
            for_each_combination(n, d, |c| {
                let keep = rng.random::<f64>() < spec.density;
                let v: f64 = rng.sample(StandardNormal);
                if keep {
                    entries.push((c.to_vec(), v));
                }
            });
            if entries.is_empty() {
                entries.push(((1..=d).collect(), 1.0));
            }
            SymmetricKernel::new(d, n, entries)?
        }
    };
    raw.normalize_to_variance(spec.sigma2)
}
