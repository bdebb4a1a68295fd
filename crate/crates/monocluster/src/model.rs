//! The discretized interacting model: a finite window of the extended
//! lattice, the covariance kernel, an even interaction polynomial, source
//! insertions, and the per-cell quadrature nodes that stand in for the
//! spatial integrals.

use crate::kernel::Kernel;
use crate::lattice::{cell_of_point, Cell, MayerBox, Window};
use crate::polymer::Polymer;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("interaction degree must be even and >= 2, got {0}")]
    OddDegree(usize),
    #[error("interaction leading coefficient must be positive, got {0}")]
    BadLeadingCoefficient(f64),
    #[error("source {0:?} lies outside the window")]
    SourceOutsideWindow(Vec<f64>),
    #[error("dimension mismatch: window is {expected}-dimensional, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A real polynomial in one variable, coefficients indexed by power.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Interaction polynomial: even degree, positive leading coefficient.
    pub fn interaction(mut coeffs: Vec<f64>) -> Result<Self, ModelError> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        let degree = coeffs.len().saturating_sub(1);
        if degree < 2 || degree % 2 != 0 {
            return Err(ModelError::OddDegree(degree));
        }
        let lead = *coeffs.last().unwrap();
        if lead <= 0.0 {
            return Err(ModelError::BadLeadingCoefficient(lead));
        }
        Ok(Polynomial { coeffs })
    }

    /// The standard quartic x^4.
    pub fn quartic() -> Self {
        Polynomial::interaction(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Half the degree (the "m" of a degree-2m interaction).
    pub fn half_degree(&self) -> usize {
        self.degree() / 2
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Monomials (power, coefficient) with nonzero coefficient.
    pub fn monomials(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(d, &c)| (d, c))
    }

    /// Max absolute coefficient.
    pub fn coefficient_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// sup over x of |P(x)| / (1 + x^{2m}), by dense grid search plus the
    /// asymptotic value (the leading coefficient).
    pub fn growth_bound(&self) -> f64 {
        let mut best = *self.coeffs.last().unwrap();
        let deg = self.degree() as i32;
        let mut x = -30.0;
        while x <= 30.0 {
            best = best.max(self.eval(x).abs() / (1.0 + x.powi(deg)));
            x += 1e-3;
        }
        best
    }

    /// min over x of P(x) (finite: even degree, positive leading
    /// coefficient), by grid search over the region where the leading term
    /// cannot dominate.
    pub fn min_value(&self) -> f64 {
        let mut best = f64::INFINITY;
        let mut x = -30.0;
        while x <= 30.0 {
            best = best.min(self.eval(x));
            x += 1e-3;
        }
        best
    }
}

/// The finite surrogate of the interacting model.
#[derive(Debug, Clone)]
pub struct DiscretizedModel {
    pub window: Window,
    pub kernel: Arc<Kernel>,
    /// per-axis quadrature nodes inside each unit cell (1 = cell centers)
    pub nodes_per_cell: usize,
    pub interaction: Polynomial,
    pub coupling: f64,
    /// source insertion points, all at copy 0
    pub sources: Vec<Vec<f64>>,
}

impl DiscretizedModel {
    pub fn new(
        window: Window,
        kernel: Arc<Kernel>,
        nodes_per_cell: usize,
        interaction: Polynomial,
        coupling: f64,
        sources: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        assert!(nodes_per_cell >= 1);
        assert!(coupling >= 0.0, "coupling must be nonnegative");
        let dim = kernel.dim();
        for x in &sources {
            if x.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            if !window.contains_cell(&cell_of_point(x)) {
                return Err(ModelError::SourceOutsideWindow(x.clone()));
            }
        }
        Ok(DiscretizedModel {
            window,
            kernel,
            nodes_per_cell,
            interaction,
            coupling,
            sources,
        })
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Quadrature nodes of a unit cell: the per-axis tensor grid of midpoints
    /// (i + 1/2)/n, in lexicographic order.
    pub fn nodes(&self, cell: &Cell) -> Vec<Vec<f64>> {
        let n = self.nodes_per_cell;
        let d = cell.dim();
        let mut out = Vec::with_capacity(n.pow(d as u32));
        let mut idx = vec![0usize; d];
        'outer: loop {
            out.push(
                idx.iter()
                    .zip(&cell.0)
                    .map(|(&i, &c)| c as f64 + (i as f64 + 0.5) / n as f64)
                    .collect(),
            );
            for axis in 0..d {
                idx[axis] += 1;
                if idx[axis] < n {
                    continue 'outer;
                }
                idx[axis] = 0;
            }
            break;
        }
        out
    }

    /// Quadrature weight per node: the unit cell volume split evenly.
    pub fn node_weight(&self) -> f64 {
        (self.nodes_per_cell as f64).powi(-(self.dim() as i32))
    }

    /// Number of sources.
    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    pub fn source_box(&self, i: usize) -> MayerBox {
        MayerBox::new(cell_of_point(&self.sources[i]), 0)
    }

    /// The ground polymer spanned by the source cells.
    pub fn source_polymer(&self) -> Polymer {
        Polymer::from_sources(&self.sources)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_validation() {
        assert!(matches!(
            Polynomial::interaction(vec![0.0, 1.0]),
            Err(ModelError::OddDegree(1))
        ));
        assert!(matches!(
            Polynomial::interaction(vec![0.0, 0.0, 0.0, 0.0, -1.0]),
            Err(ModelError::BadLeadingCoefficient(_))
        ));
        let p = Polynomial::quartic();
        assert_eq!(p.degree(), 4);
        assert_eq!(p.half_degree(), 2);
        assert_eq!(p.eval(2.0), 16.0);
    }

    #[test]
    fn quartic_growth_and_minimum() {
        let p = Polynomial::quartic();
        assert!((p.growth_bound() - 1.0).abs() < 1e-9);
        assert!(p.min_value().abs() < 1e-9);
        // double well x^4 - 2x^2 has minimum -1 at x = ±1
        let w = Polynomial::interaction(vec![0.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
        assert!((w.min_value() + 1.0).abs() < 1e-5);
    }

    #[test]
    fn node_grids() {
        let k = Arc::new(Kernel::make_slice_kernel(1, 8).unwrap());
        let w = Window::hypercube(1, 2, 1);
        let m = DiscretizedModel::new(w, k, 2, Polynomial::quartic(), 0.1, vec![]).unwrap();
        assert_eq!(m.nodes(&Cell::new(vec![1])), vec![vec![1.25], vec![1.75]]);
        assert_eq!(m.node_weight(), 0.5);
    }

    #[test]
    fn source_validation() {
        let k = Arc::new(Kernel::make_slice_kernel(1, 8).unwrap());
        let w = Window::hypercube(1, 2, 1);
        assert!(matches!(
            DiscretizedModel::new(
                w.clone(),
                k.clone(),
                1,
                Polynomial::quartic(),
                0.0,
                vec![vec![5.5]]
            ),
            Err(ModelError::SourceOutsideWindow(_))
        ));
        let m = DiscretizedModel::new(
            w,
            k,
            1,
            Polynomial::quartic(),
            0.0,
            vec![vec![0.5], vec![1.5]],
        )
        .unwrap();
        assert_eq!(m.source_box(1), MayerBox::new(Cell::new(vec![1]), 0));
        assert_eq!(m.source_polymer().len(), 2);
    }
}
