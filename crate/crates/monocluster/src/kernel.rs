//! Translation-invariant covariance kernel with smooth momentum cutoffs:
//!
//! ```text
//! C(x,y) = ∫ d^d p / (2π)^d  e^{i p (x-y)}  e^{-p^2} / (p^2 + 1)
//! ```
//!
//! The integrand decays super-exponentially, so the momentum integral is
//! truncated at |p_i| <= 8 and evaluated by panelled Gauss-Legendre product
//! quadrature. Values are cached per quantized separation: the expansion asks
//! for the same lattice separations over and over.

use crate::quad::{adaptive_simpson, gauss_legendre_on};
use std::collections::HashMap;
use std::sync::RwLock;
use thiserror::Error;

/// Momentum truncation radius. exp(-64) leaves the tail far below 1e-12.
const P_MAX: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("dimension must be >= 1, got {0}")]
    BadDimension(usize),
    #[error("estimated quadrature tail error {0:e} exceeds 1e-12")]
    TailTooLarge(f64),
}

pub struct Kernel {
    dim: usize,
    quad_order: usize,
    /// per-axis momentum nodes and weights on [-P_MAX, P_MAX]
    p_nodes: Vec<f64>,
    p_weights: Vec<f64>,
    cache: RwLock<HashMap<Vec<i64>, f64>>,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("dim", &self.dim)
            .field("axis_nodes", &self.p_nodes.len())
            .finish()
    }
}

/// Analytic bound on the neglected momentum tail `∫_{|p| > P_MAX}`.
///
/// The integrand is below e^{-p^2}, and in d dimensions the region outside the
/// cube [-R,R]^d is covered by 2d slabs {|p_i| > R}, each of which integrates
/// to (√π)^{d-1} · ∫_R^∞ e^{-t^2} dt <= (√π)^{d-1} e^{-R^2} / (2R).
/// Panelled Gauss-Legendre rule on [-P_MAX, P_MAX] with `order` points per
/// unit panel.
fn axis_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let panels = (2.0 * P_MAX) as usize;
    for j in 0..panels {
        let a = -P_MAX + j as f64;
        let (x, w) = gauss_legendre_on(a, a + 1.0, order);
        nodes.extend(x);
        weights.extend(w);
    }
    (nodes, weights)
}

fn tail_bound(dim: usize) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let slab = sqrt_pi.powi(dim as i32 - 1) * (-P_MAX * P_MAX).exp() / (2.0 * P_MAX);
    (2 * dim) as f64 * slab / (2.0 * std::f64::consts::PI).powi(dim as i32)
}

impl Kernel {
    /// Kernel for the single-slice propagator above. `quad_order` is the
    /// Gauss-Legendre order per unit momentum panel (16 panels per axis).
    pub fn make_slice_kernel(dim: usize, quad_order: usize) -> Result<Kernel, KernelError> {
        if dim == 0 {
            return Err(KernelError::BadDimension(dim));
        }
        if quad_order == 0 {
            return Err(KernelError::TailTooLarge(f64::INFINITY));
        }
        let tb = tail_bound(dim);
        if tb > 1e-12 {
            return Err(KernelError::TailTooLarge(tb));
        }
        let (p_nodes, p_weights) = axis_rule(quad_order);
        Ok(Kernel {
            dim,
            quad_order,
            p_nodes,
            p_weights,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Separations are quantized to 2^-20 for the cache key; lattice
    /// separations (integers plus fixed node offsets) are exact under this.
    fn quantize(sep: &[f64]) -> Vec<i64> {
        sep.iter().map(|&s| (s * 1048576.0).round() as i64).collect()
    }

    fn integrate(&self, sep: &[f64]) -> f64 {
        // product quadrature of cos(p·s) e^{-p^2}/(p^2+1); the oscillation
        // rate grows with the separation, so large separations get a finer
        // per-panel rule
        let smax = sep.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let (fine_nodes, fine_weights);
        let (nodes, weights) = if smax <= 4.0 {
            (&self.p_nodes, &self.p_weights)
        } else {
            let order = self.quad_order + smax.ceil() as usize;
            let rule = axis_rule(order);
            fine_nodes = rule.0;
            fine_weights = rule.1;
            (&fine_nodes, &fine_weights)
        };
        let n = nodes.len();
        let mut total = 0.0;
        let mut idx = vec![0usize; self.dim];
        'outer: loop {
            let mut phase = 0.0;
            let mut p2 = 0.0;
            let mut w = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                let p = nodes[i];
                phase += p * sep[axis];
                p2 += p * p;
                w *= weights[i];
            }
            total += w * phase.cos() * (-p2).exp() / (p2 + 1.0);
            for axis in 0..self.dim {
                idx[axis] += 1;
                if idx[axis] < n {
                    continue 'outer;
                }
                idx[axis] = 0;
            }
            break;
        }
        total / (2.0 * std::f64::consts::PI).powi(self.dim as i32)
    }

    /// Evaluate on a separation vector, consulting the cache.
    pub fn eval_sep(&self, sep: &[f64]) -> f64 {
        assert_eq!(sep.len(), self.dim);
        let key = Self::quantize(sep);
        if let Some(&v) = self.cache.read().unwrap().get(&key) {
            return v;
        }
        let v = self.integrate(sep);
        self.cache.write().unwrap().insert(key, v);
        v
    }

    /// C(x, y).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sep: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.eval_sep(&sep)
    }

    /// Fitted decay constant: max over a sampled grid of separations with
    /// |s| <= radius of |C(s)| (1 + |s|)^r. Monotone nondecreasing in radius.
    pub fn fit_decay_constant(&self, r: u32, radius: f64) -> f64 {
        assert!(radius >= 1.0, "radius must be >= 1");
        // half-integer grid along the positive orthant; C is even in s
        let steps = (2.0 * radius) as i64;
        let mut best = 0.0f64;
        let mut idx = vec![0i64; self.dim];
        'outer: loop {
            let sep: Vec<f64> = idx.iter().map(|&i| i as f64 * 0.5).collect();
            let norm = sep.iter().map(|s| s * s).sum::<f64>().sqrt();
            if norm <= radius {
                let v = self.eval_sep(&sep).abs() * (1.0 + norm).powi(r as i32);
                best = best.max(v);
            }
            for axis in 0..self.dim {
                idx[axis] += 1;
                if idx[axis] <= steps {
                    continue 'outer;
                }
                idx[axis] = 0;
            }
            break;
        }
        best
    }
}

/// Independent oracle for the d=1 kernel: adaptive quadrature of the momentum
/// integral, no tabulation or caching involved.
pub fn slice_kernel_1d_oracle(sep: f64) -> f64 {
    let f = move |p: f64| (p * sep).cos() * (-p * p).exp() / (p * p + 1.0);
    adaptive_simpson(&f, -P_MAX, P_MAX, 1e-14) / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimension() {
        assert!(matches!(
            Kernel::make_slice_kernel(0, 16),
            Err(KernelError::BadDimension(0))
        ));
    }

    #[test]
    fn matches_adaptive_oracle_at_origin_and_beyond() {
        let k = Kernel::make_slice_kernel(1, 16).unwrap();
        for sep in [0.0, 0.5, 1.0, 2.5, 7.0] {
            let got = k.eval_sep(&[sep]);
            let want = slice_kernel_1d_oracle(sep);
            assert!(
                (got - want).abs() < 1e-12,
                "sep {sep}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn symmetry() {
        let k = Kernel::make_slice_kernel(2, 10).unwrap();
        for sep in [[0.3, -1.2], [2.0, 0.7], [-0.4, 0.9]] {
            let neg: Vec<f64> = sep.iter().map(|s| -s).collect();
            assert!((k.eval_sep(&sep) - k.eval_sep(&neg)).abs() < 1e-15);
        }
    }

    #[test]
    fn rapid_decay() {
        let k = Kernel::make_slice_kernel(1, 16).unwrap();
        let ratio = k.eval_sep(&[10.0]).abs() / k.eval_sep(&[0.0]).abs();
        assert!(ratio < 1e-3, "decay ratio {ratio}");
    }

    #[test]
    fn decay_constant_properties() {
        let k = Kernel::make_slice_kernel(1, 16).unwrap();
        // r = 0 reduces to the sup norm, attained at the origin
        let k10 = k.fit_decay_constant(0, 20.0);
        assert!((k10 - k.eval_sep(&[0.0]).abs()).abs() < 1e-15);
        // monotone in r
        assert!(k.fit_decay_constant(2, 20.0) <= k.fit_decay_constant(4, 20.0));
        // r = 6: finite, stable within 1% on radius doubling
        let a = k.fit_decay_constant(6, 20.0);
        let b = k.fit_decay_constant(6, 40.0);
        assert!(a.is_finite() && a > 0.0);
        assert!((b - a) / a < 0.01, "K1(6): {a} -> {b}");
    }

    #[test]
    fn decay_constant_converges_for_all_orders() {
        let k = Kernel::make_slice_kernel(1, 16).unwrap();
        for r in 1..=8 {
            let a = k.fit_decay_constant(r, 15.0);
            let b = k.fit_decay_constant(r, 30.0);
            assert!(a.is_finite());
            assert!((b - a) / a < 0.01, "K1({r}) drifted: {a} -> {b}");
        }
    }

    #[test]
    fn gram_matrices_positive_semidefinite() {
        use rand::{Rng, SeedableRng};
        let k = Kernel::make_slice_kernel(1, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let n = rng.gen_range(5..=40);
            let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let mut m = nalgebra::DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = k.eval_sep(&[pts[i] - pts[j]]);
                }
            }
            let eig = m.symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "gram min eigenvalue {min}");
        }
    }
}
