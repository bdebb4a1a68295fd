//! Truncated power series in the coupling constant.

use serde::{Deserialize, Serialize};

/// Coefficients `c_0 ... c_R` of a power series truncated at order `R`.
/// All arithmetic truncates consistently at the shorter order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeries {
    pub coefficients: Vec<f64>,
}

impl std::fmt::Debug for LambdaSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LambdaSeries{:?}", self.coefficients)
    }
}

impl LambdaSeries {
    pub fn zero(order: usize) -> Self {
        LambdaSeries {
            coefficients: vec![0.0; order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coefficients[0] = 1.0;
        s
    }

    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        assert!(!coefficients.is_empty());
        LambdaSeries { coefficients }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, r: usize) -> f64 {
        self.coefficients.get(r).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        LambdaSeries {
            coefficients: (0..=order)
                .map(|r| self.coefficients[r] + other.coefficients[r])
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        LambdaSeries {
            coefficients: (0..=order)
                .map(|r| self.coefficients[r] - other.coefficients[r])
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        LambdaSeries {
            coefficients: self.coefficients.iter().map(|c| a * c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order().min(other.order());
        let mut coefficients = vec![0.0; order + 1];
        for (r, c) in coefficients.iter_mut().enumerate() {
            for j in 0..=r {
                *c += self.coefficients[j] * other.coefficients[r - j];
            }
        }
        LambdaSeries { coefficients }
    }

    /// Integer power, truncated at this series' order.
    pub fn pow(&self, n: usize) -> Self {
        let mut acc = Self::one(self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Series division; the divisor must have constant term 1 (partition
    /// function series always do).
    pub fn div(&self, other: &Self) -> Self {
        assert!(
            (other.coefficients[0] - 1.0).abs() < 1e-9,
            "series division requires unit constant term, got {}",
            other.coefficients[0]
        );
        let order = self.order().min(other.order());
        let mut q = vec![0.0; order + 1];
        for r in 0..=order {
            let mut acc = self.coefficients[r];
            for j in 0..r {
                acc -= q[j] * other.coefficients[r - j];
            }
            q[r] = acc / other.coefficients[0];
        }
        LambdaSeries { coefficients: q }
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * lambda + c)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let order = self.order().min(other.order());
        (0..=order)
            .map(|r| (self.coefficients[r] - other.coefficients[r]).abs())
            .fold(0.0, f64::max)
    }
}
