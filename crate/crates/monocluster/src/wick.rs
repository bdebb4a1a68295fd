//! Gaussian moment machinery: field insertion sites, monomial terms with
//! scalar coefficients, Wick moments as perfect-matching sums, and the
//! second-order derivation operator attached to a link.

use crate::graph::Link;
use crate::lattice::{cell_of_point, Cell, MayerBox};
use crate::model::DiscretizedModel;
use std::collections::BTreeMap;

/// A field insertion: either one of the model's external sources (copy 0) or
/// a quadrature node of a box. Ordered so that terms can be merged by their
/// sorted site lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Source(usize),
    Node { cell: Cell, copy: u32, node: usize },
}

impl Site {
    pub fn mayer_box(&self, model: &DiscretizedModel) -> MayerBox {
        match self {
            Site::Source(i) => MayerBox::new(cell_of_point(&model.sources[*i]), 0),
            Site::Node { cell, copy, .. } => MayerBox::new(cell.clone(), *copy),
        }
    }

    pub fn position(&self, model: &DiscretizedModel) -> Vec<f64> {
        match self {
            Site::Source(i) => model.sources[*i].clone(),
            Site::Node { cell, node, .. } => model.nodes(cell)[*node].clone(),
        }
    }
}

/// A scalar multiple of a monomial in the field variables.
#[derive(Debug, Clone)]
pub struct Term {
    pub coef: f64,
    /// kept sorted so equal monomials merge
    pub sites: Vec<Site>,
}

impl Term {
    pub fn new(coef: f64, mut sites: Vec<Site>) -> Self {
        sites.sort();
        Term { coef, sites }
    }
}

/// Merge terms sharing the same monomial.
pub fn merge_terms(terms: Vec<Term>) -> Vec<Term> {
    let mut map: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
    for t in terms {
        *map.entry(t.sites).or_insert(0.0) += t.coef;
    }
    map.into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(sites, coef)| Term { coef, sites })
        .collect()
}

/// Gaussian moment of a site list: the sum over perfect matchings of the
/// product of pair covariances. Zero for odd lists.
pub fn wick_moment(sites: &[Site], cov: &mut dyn FnMut(&Site, &Site) -> f64) -> f64 {
    let n = sites.len();
    if n % 2 != 0 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = cov(&sites[i], &sites[j]);
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
        }
    }
    let alive: Vec<usize> = (0..n).collect();
    pairings(&alive, &matrix, n)
}

fn pairings(alive: &[usize], matrix: &[f64], n: usize) -> f64 {
    if alive.is_empty() {
        return 1.0;
    }
    let first = alive[0];
    let mut total = 0.0;
    for (pos, &j) in alive.iter().enumerate().skip(1) {
        let c = matrix[first * n + j];
        if c == 0.0 {
            continue;
        }
        let rest: Vec<usize> = alive[1..]
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != pos - 1)
            .map(|(_, &v)| v)
            .collect();
        total += c * pairings(&rest, matrix, n);
    }
    total
}

/// Apply the derivation operator of a link to a sum of terms.
///
/// The operator is the sum over one site in each endpoint box of the kernel
/// value between their positions times the second derivative in those two
/// field variables; by the product rule this removes an ordered pair of
/// matching sites from each monomial.
pub fn apply_derivation(model: &DiscretizedModel, link: &Link, terms: &[Term]) -> Vec<Term> {
    let mut out = Vec::new();
    for t in terms {
        let in_a: Vec<usize> = (0..t.sites.len())
            .filter(|&i| t.sites[i].mayer_box(model) == link.a)
            .collect();
        let in_b: Vec<usize> = (0..t.sites.len())
            .filter(|&i| t.sites[i].mayer_box(model) == link.b)
            .collect();
        for &i in &in_a {
            for &j in &in_b {
                if i == j {
                    continue;
                }
                let c = model
                    .kernel
                    .eval(&t.sites[i].position(model), &t.sites[j].position(model));
                let sites: Vec<Site> = t
                    .sites
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, s)| s.clone())
                    .collect();
                out.push(Term::new(t.coef * c, sites));
            }
        }
    }
    merge_terms(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::lattice::Window;
    use crate::model::Polynomial;
    use std::sync::Arc;

    fn model() -> DiscretizedModel {
        let k = Arc::new(Kernel::make_slice_kernel(1, 12).unwrap());
        DiscretizedModel::new(
            Window::hypercube(1, 2, 1),
            k,
            1,
            Polynomial::quartic(),
            0.1,
            vec![vec![0.5], vec![1.5]],
        )
        .unwrap()
    }

    fn node(c: i64, k: u32) -> Site {
        Site::Node {
            cell: Cell::new(vec![c]),
            copy: k,
            node: 0,
        }
    }

    #[test]
    fn wick_small_cases() {
        let ones = &mut |_: &Site, _: &Site| 1.0;
        assert_eq!(wick_moment(&[], ones), 1.0);
        assert_eq!(wick_moment(&[node(0, 0)], ones), 0.0);
        assert_eq!(wick_moment(&[node(0, 0), node(1, 0)], ones), 1.0);
        // 4 points with unit covariances: 3 perfect matchings
        let four = vec![node(0, 0), node(0, 0), node(0, 0), node(0, 0)];
        assert_eq!(wick_moment(&four, ones), 3.0);
        // 6 points: 15
        let six = vec![node(0, 0); 6];
        assert_eq!(wick_moment(&six, ones), 15.0);
    }

    #[test]
    fn wick_matches_gauss_hermite_quartic_moment() {
        // E[phi^4] for a centered Gaussian of variance v is 3 v^2
        let m = model();
        let v = m.kernel.eval_sep(&[0.0]);
        let sites = vec![node(0, 0); 4];
        let mut cov = |a: &Site, b: &Site| m.kernel.eval(&a.position(&m), &b.position(&m));
        let got = wick_moment(&sites, &mut cov);
        assert!((got - 3.0 * v * v).abs() < 1e-12);
        // independent quadrature oracle
        let (x, w) = crate::quad::gauss_hermite(40);
        let s = v.sqrt();
        let mut quad = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let phi = 2.0f64.sqrt() * s * xi;
            quad += wi * phi.powi(4);
        }
        quad /= std::f64::consts::PI.sqrt();
        assert!((got - quad).abs() < 1e-9, "{got} vs {quad}");
    }

    #[test]
    fn merge_collapses_duplicates() {
        let t1 = Term::new(2.0, vec![node(0, 0), node(1, 0)]);
        let t2 = Term::new(3.0, vec![node(1, 0), node(0, 0)]);
        let merged = merge_terms(vec![t1, t2]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].coef, 5.0);
    }

    #[test]
    fn derivation_contracts_matching_pairs() {
        let m = model();
        let link = Link::new(
            MayerBox::new(Cell::new(vec![0]), 0),
            MayerBox::new(Cell::new(vec![1]), 0),
        );
        // phi(0)^2 phi(1): one site in cell 1, two in cell 0 -> 2 terms
        // merging into one with coefficient 2 C(node0, node1)
        let t = Term::new(1.0, vec![node(0, 0), node(0, 0), node(1, 0)]);
        let out = apply_derivation(&m, &link, &[t]);
        assert_eq!(out.len(), 1);
        let c = m.kernel.eval(&[0.5], &[1.5]);
        assert!((out[0].coef - 2.0 * c).abs() < 1e-15);
        assert_eq!(out[0].sites, vec![node(0, 0)]);
        // no matching sites: derivation annihilates the term
        let t = Term::new(1.0, vec![node(0, 0), node(0, 0)]);
        assert!(apply_derivation(&m, &link, &[t]).is_empty());
    }

    #[test]
    fn derivation_on_sources() {
        let m = model();
        let link = Link::new(
            MayerBox::new(Cell::new(vec![0]), 0),
            MayerBox::new(Cell::new(vec![1]), 0),
        );
        let t = Term::new(1.0, vec![Site::Source(0), Site::Source(1)]);
        let out = apply_derivation(&m, &link, &[t]);
        assert_eq!(out.len(), 1);
        let c = m.kernel.eval(&m.sources[0], &m.sources[1]);
        assert!((out[0].coef - c).abs() < 1e-15);
        assert!(out[0].sites.is_empty());
    }
}
