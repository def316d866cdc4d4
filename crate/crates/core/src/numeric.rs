//! Small numeric helpers shared across modules.

use crate::error::{Error, Result};

/// Largest order for which factorial-weighted formulas are evaluated.
pub const MAX_ORDER: usize = 12;

pub fn factorial(n: usize) -> f64 {
    statrs::function::factorial::factorial(n as u64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    statrs::function::factorial::binomial(n as u64, k as u64)
}

pub(crate) fn check_order(d: usize) -> Result<()> {
    if d == 0 || d > MAX_ORDER {
        return Err(Error::ParameterOutOfRange(format!(
            "order {d} outside 1..={MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Compensated::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
