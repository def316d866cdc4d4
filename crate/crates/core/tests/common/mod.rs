//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code; kernels are only read through
//! their canonical entries.
#![allow(dead_code)]

use homsum::SymmetricKernel;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A kernel spelled out on all of `[N]^d`, zero-based, row-major.
pub struct Dense {
    pub d: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn flat(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflat(mut k: usize, n: usize, len: usize) -> Vec<usize> {
    let mut idx = vec![0; len];
    for slot in idx.iter_mut().rev() {
        *slot = k % n;
        k /= n;
    }
    idx
}

impl Dense {
    pub fn from_kernel(f: &SymmetricKernel) -> Self {
        let (d, n) = (f.order(), f.dim());
        let mut data = vec![0.0; n.pow(d as u32)];
        let perms = permutations(d);
        for (t, v) in f.entries() {
            for p in &perms {
                let idx: Vec<usize> = p.iter().map(|&k| t[k] as usize - 1).collect();
                data[flat(&idx, n)] = v;
            }
        }
        Self { d, n, data }
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `(f⋆_r f)(a, b) = Σ_c f(a, c)·f(b, c)` on `[N]^{2d−2r}`.
    pub fn contract(&self, r: usize) -> Dense {
        let (n, k) = (self.n, self.d - r);
        let outer = n.pow(k as u32);
        let inner = n.pow(r as u32);
        let mut data = vec![0.0; outer * outer];
        for a in 0..outer {
            for b in 0..outer {
                let mut s = 0.0;
                for c in 0..inner {
                    s += self.data[a * inner + c] * self.data[b * inner + c];
                }
                data[a * outer + b] = s;
            }
        }
        Dense { d: 2 * k, n, data }
    }

    /// Average over all permutations of the coordinates.
    pub fn symmetrize(&self) -> Dense {
        let perms = permutations(self.d);
        let mut data = vec![0.0; self.data.len()];
        for (k, slot) in data.iter_mut().enumerate() {
            let idx = unflat(k, self.n, self.d);
            let mut s = 0.0;
            for p in &perms {
                let j: Vec<usize> = p.iter().map(|&q| idx[q]).collect();
                s += self.data[flat(&j, self.n)];
            }
            *slot = s / perms.len() as f64;
        }
        Dense { d: self.d, n: self.n, data }
    }

    /// `Q(x) = Σ over ordered tuples of f(i)·x_{i₁}⋯x_{i_d}`.
    pub fn homogeneous_sum(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, &v) in self.data.iter().enumerate() {
            if v != 0.0 {
                s += v * unflat(k, self.n, self.d).iter().map(|&i| x[i]).product::<f64>();
            }
        }
        s
    }

    /// Sparse list of nonzero entries for faster repeated evaluation.
    pub fn support(&self) -> Vec<(Vec<usize>, f64)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (unflat(k, self.n, self.d), v))
            .collect()
    }
}

pub fn eval_support(support: &[(Vec<usize>, f64)], x: &[f64]) -> f64 {
    support.iter().map(|(i, v)| v * i.iter().map(|&k| x[k]).product::<f64>()).sum()
}

/// All `2^N` sign vectors, each Q value with probability `2^{−N}`.
pub fn rademacher_values(f: &SymmetricKernel) -> Vec<f64> {
    let dense = Dense::from_kernel(f);
    let support = dense.support();
    let n = f.dim();
    (0u64..1 << n)
        .map(|mask| {
            let x: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            eval_support(&support, &x)
        })
        .collect()
}

pub fn mean_power(values: &[f64], k: i32) -> f64 {
    values.iter().map(|v| v.powi(k)).sum::<f64>() / values.len() as f64
}

/// Gauss–Hermite rule for the standard normal weight via Golub–Welsch:
/// eigen-decomposition of the Jacobi matrix with off-diagonals √k.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(points, points);
    for k in 1..points {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..points).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
    (nodes, weights)
}

/// `E[Q^k]` under Gaussian inputs by tensor-product quadrature; exact when
/// each variable appears with degree below `2·points`.
pub fn gaussian_moment_by_tensor_rule(f: &SymmetricKernel, k: i32, points: usize) -> f64 {
    let (nodes, weights) = gauss_hermite(points);
    let support = Dense::from_kernel(f).support();
    let n = f.dim();
    let total = points.pow(n as u32);
    let mut acc = 0.0;
    let mut x = vec![0.0; n];
    for code in 0..total {
        let mut c = code;
        let mut w = 1.0;
        for xi in x.iter_mut() {
            let q = c % points;
            c /= points;
            *xi = nodes[q];
            w *= weights[q];
        }
        acc += w * eval_support(&support, &x).powi(k);
    }
    acc
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(G₁G₂ ≤ z) = ∫₀^∞ 2φ(u)·Φ(z/u) du`, composite Simpson on `[0, 12]`.
pub fn product_normal_cdf(z: f64) -> f64 {
    let (a, b, m) = (1e-12, 12.0, 40_000usize);
    let h = (b - a) / m as f64;
    let g = |u: f64| 2.0 * phi(u) * normal_cdf(z / u);
    let mut s = g(a) + g(b);
    for i in 1..m {
        let u = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(u);
    }
    s * h / 3.0
}

/// `sup_z |P(G₁G₂ ≤ z) − Φ(z)|` over a fine grid.
pub fn product_normal_ks() -> f64 {
    (-4000..=4000)
        .map(|k| {
            let z = k as f64 * 1e-3;
            (product_normal_cdf(z) - normal_cdf(z)).abs()
        })
        .fold(0.0, f64::max)
}

/// Random kernel with Gaussian values on a random subset of canonical tuples.
pub fn random_kernel(rng: &mut ChaCha8Rng, d: usize, n: usize, density: f64) -> SymmetricKernel {
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut t: Vec<usize> = (1..=d).collect();
    loop {
        if rng.random::<f64>() < density {
            entries.push((t.clone(), rng.sample(StandardNormal)));
        }
        // Next combination in lexicographic order.
        let mut i = d;
        while i > 0 && t[i - 1] == n - d + i {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        t[i - 1] += 1;
        for j in i..d {
            t[j] = t[j - 1] + 1;
        }
    }
    if entries.is_empty() {
        entries.push(((1..=d).collect(), 1.0));
    }
    SymmetricKernel::new(d, n, entries).expect("valid random kernel")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
