//! Truncated coupling-constant series for every Gaussian integral the
//! expansion manipulates: partition functions, the source generating
//! function, the interpolated link-differentiated integrals, their simplex
//! integrals, and the assembled normalized correlation functions.

use crate::graph::{enumerate, extension_links, ClusterGraph, Link};
use crate::interp::{covint, m_empty, omega_product, HVector};
use crate::lattice::{Cell, MayerBox};
use crate::model::DiscretizedModel;
use crate::quad::gauss_legendre_on;
use crate::series::LambdaSeries;
use crate::wick::{apply_derivation, merge_terms, wick_moment, Site, Term};
use std::collections::BTreeMap;
use thiserror::Error;

/// Cap on Wick problem size; (budget-1)!! matchings is the cost driver.
pub const DEFAULT_BUDGET: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("wick problem of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: usize, budget: usize },
    #[error("nonfinite value in the interpolation-parameter integrand")]
    NonFiniteIntegrand,
}

fn factorial(r: usize) -> f64 {
    (1..=r).map(|k| k as f64).product()
}

/// All single-vertex choices over the given interaction boxes: one quadrature
/// node and one monomial of the interaction, with coefficient weight x
/// monomial coefficient and the monomial's degree-many repeated sites.
fn vertex_options(model: &DiscretizedModel, boxes: &[MayerBox]) -> Vec<(f64, Vec<Site>)> {
    let w = model.node_weight();
    let mut out = Vec::new();
    for b in boxes {
        let node_count = model.nodes(&b.cell).len();
        for node in 0..node_count {
            for (deg, a) in model.interaction.monomials() {
                let site = Site::Node {
                    cell: b.cell.clone(),
                    copy: b.copy,
                    node,
                };
                out.push((w * a, vec![site; deg]));
            }
        }
    }
    out
}

/// Terms of (sum of vertices)^r times the base monomial, merged.
fn interaction_power_terms(
    model: &DiscretizedModel,
    boxes: &[MayerBox],
    r: usize,
    base: &[Site],
    budget: usize,
) -> Result<Vec<Term>, EngineError> {
    let options = vertex_options(model, boxes);
    let mut terms = vec![Term::new(1.0, base.to_vec())];
    for _ in 0..r {
        let mut next = Vec::new();
        for t in &terms {
            for (c, extra) in &options {
                let mut sites = t.sites.clone();
                sites.extend(extra.iter().cloned());
                if sites.len() > budget {
                    return Err(EngineError::BudgetExceeded {
                        points: sites.len(),
                        budget,
                    });
                }
                next.push(Term::new(t.coef * c, sites));
            }
        }
        terms = merge_terms(next);
    }
    Ok(terms)
}

/// λ-series of a link-differentiated Gaussian integral:
/// coefficient r is (-1)^r/r! times the Wick evaluation of the derivated
/// product of base insertions and r interaction vertices, under the
/// covariance C(x,x') times the given box matrix.
pub fn series_core(
    model: &DiscretizedModel,
    links: &[Link],
    matrix: &dyn Fn(&MayerBox, &MayerBox) -> f64,
    interaction_boxes: &[MayerBox],
    include_sources: bool,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let base: Vec<Site> = if include_sources {
        (0..model.source_count()).map(Site::Source).collect()
    } else {
        Vec::new()
    };
    let mut coefficients = Vec::with_capacity(order + 1);
    for r in 0..=order {
        let mut terms = interaction_power_terms(model, interaction_boxes, r, &base, budget)?;
        for l in links {
            terms = apply_derivation(model, l, &terms);
        }
        let mut sum = 0.0;
        for t in &terms {
            let mut cov = |a: &Site, b: &Site| {
                let m = matrix(&a.mayer_box(model), &b.mayer_box(model));
                if m == 0.0 {
                    0.0
                } else {
                    m * model.kernel.eval(&a.position(model), &b.position(model))
                }
            };
            sum += t.coef * wick_moment(&t.sites, &mut cov);
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        coefficients.push(sign / factorial(r) * sum);
    }
    Ok(LambdaSeries::from_coefficients(coefficients))
}

/// Series of the full generating integral on the whole window (all copies,
/// base-matrix covariance, sources included).
pub fn h_series(
    model: &DiscretizedModel,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    series_core(
        model,
        &[],
        &m_empty,
        &model.window.boxes(),
        true,
        order,
        budget,
    )
}

/// Series of the unnormalized correlation numerator: sources and interaction
/// on the copy-0 layer only, plain kernel covariance.
pub fn su_series(
    model: &DiscretizedModel,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let boxes: Vec<MayerBox> = model
        .window
        .cells()
        .iter()
        .map(|c| MayerBox::new(c.clone(), 0))
        .collect();
    series_core(model, &[], &|_, _| 1.0, &boxes, true, order, budget)
}

/// Partition-function series of a cell region with free boundary covariance.
pub fn z_series(
    model: &DiscretizedModel,
    cells: &[Cell],
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let boxes: Vec<MayerBox> = cells.iter().map(|c| MayerBox::new(c.clone(), 0)).collect();
    series_core(model, &[], &|_, _| 1.0, &boxes, false, order, budget)
}

/// Partition-function series of one isolated cell.
pub fn z0_series(
    model: &DiscretizedModel,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    z_series(model, &[Cell::new(vec![0; model.dim()])], order, budget)
}

/// Series of the interpolated, link-differentiated integral for a graph and
/// parameter vector: the omega prefactor times the derivated Gaussian
/// integral with the interpolated covariance, interaction over the whole
/// window.
pub fn r_series(
    model: &DiscretizedModel,
    g: &ClusterGraph,
    h: &HVector,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let prefactor = omega_product(g, h);
    if prefactor == 0.0 {
        return Ok(LambdaSeries::zero(order));
    }
    let s = series_core(
        model,
        g.links(),
        &|b, b2| covint(g, h, b, b2),
        &model.window.boxes(),
        true,
        order,
        budget,
    )?;
    Ok(s.scale(prefactor))
}

/// Integrate a series-valued function over the open parameter simplex
/// 1 > h_1 > ... > h_p > 0 via the substitution h_q = s_1 s_2 ... s_q, whose
/// Jacobian is prod_j s_j^(p-j), with tensor Gauss-Legendre on (0,1)^p.
pub fn simplex_integrate(
    p: usize,
    quad_order: usize,
    order: usize,
    f: &mut dyn FnMut(&HVector) -> Result<LambdaSeries, EngineError>,
) -> Result<LambdaSeries, EngineError> {
    if p == 0 {
        return f(&HVector::new(vec![]));
    }
    let (nodes, weights) = gauss_legendre_on(0.0, 1.0, quad_order);
    let mut total = LambdaSeries::zero(order);
    let mut idx = vec![0usize; p];
    'outer: loop {
        let mut h = Vec::with_capacity(p);
        let mut weight = 1.0;
        let mut running = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            let s = nodes[i];
            running *= s;
            h.push(running);
            weight *= weights[i] * s.powi((p - 1 - j) as i32);
        }
        let value = f(&HVector::new(h))?;
        if value.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(EngineError::NonFiniteIntegrand);
        }
        total = total.add(&value.scale(weight));
        for axis in 0..p {
            idx[axis] += 1;
            if idx[axis] < quad_order {
                continue 'outer;
            }
            idx[axis] = 0;
        }
        break;
    }
    Ok(total)
}

/// Simplex integral of the graph's interpolated series at trailing parameter
/// zero — one summand of the expansion identity's right-hand side.
pub fn r_simplex_series(
    model: &DiscretizedModel,
    g: &ClusterGraph,
    order: usize,
    quad_order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    simplex_integrate(g.len(), quad_order, order, &mut |prefix| {
        r_series(model, g, &prefix.extended(0.0), order, budget)
    })
}

/// The window-independent amplitude of a graph: like `r_simplex_series` but
/// with covariance restricted to the final cluster and interaction over the
/// final cluster only.
pub fn a0_series(
    model: &DiscretizedModel,
    g: &ClusterGraph,
    order: usize,
    quad_order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let cluster_boxes: Vec<MayerBox> = g.cluster().boxes().cloned().collect();
    simplex_integrate(g.len(), quad_order, order, &mut |prefix| {
        let h = prefix.extended(0.0);
        let prefactor = omega_product(g, &h);
        if prefactor == 0.0 {
            return Ok(LambdaSeries::zero(order));
        }
        let s = series_core(
            model,
            g.links(),
            &|b, b2| {
                if g.cluster().contains(b) && g.cluster().contains(b2) {
                    covint(g, &h, b, b2)
                } else {
                    0.0
                }
            },
            &cluster_boxes,
            true,
            order,
            budget,
        )?;
        Ok(s.scale(prefactor))
    })
}

/// Outcome of comparing two series coefficientwise.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub lhs: LambdaSeries,
    pub rhs: LambdaSeries,
    pub max_absolute_deviation: f64,
    pub max_relative_deviation: f64,
}

fn compare(lhs: LambdaSeries, rhs: LambdaSeries) -> IdentityReport {
    let mut abs = 0.0f64;
    let mut rel = 0.0f64;
    for r in 0..=lhs.order().min(rhs.order()) {
        let d = (lhs.coefficient(r) - rhs.coefficient(r)).abs();
        let scale = lhs.coefficient(r).abs().max(rhs.coefficient(r).abs());
        abs = abs.max(d);
        rel = rel.max(d / scale.max(1e-9));
    }
    IdentityReport {
        lhs,
        rhs,
        max_absolute_deviation: abs,
        max_relative_deviation: rel,
    }
}

/// The central identity: the direct generating series equals the sum over
/// all cluster-graphs of their simplex-integrated interpolated series.
pub fn expansion_identity_check(
    model: &DiscretizedModel,
    order: usize,
    p_max: usize,
    quad_order: usize,
    budget: usize,
) -> Result<IdentityReport, EngineError> {
    let lhs = h_series(model, order, budget)?;
    let mut rhs = LambdaSeries::zero(order);
    for g in enumerate(&model.window, &model.source_polymer(), p_max) {
        if !g.contributes() {
            continue;
        }
        rhs = rhs.add(&r_simplex_series(model, &g, order, quad_order, budget)?);
    }
    Ok(compare(lhs, rhs))
}

/// One interpolation step: lowering the last parameter to zero is
/// compensated by integrating over all one-link extensions with doubled
/// trailing parameter.
pub fn fundamental_step_check(
    model: &DiscretizedModel,
    g: &ClusterGraph,
    h_prefix: &[f64],
    order: usize,
    quad_order: usize,
    budget: usize,
) -> Result<f64, EngineError> {
    assert_eq!(h_prefix.len(), g.len());
    let h_m = h_prefix.last().copied().unwrap_or(1.0);
    let mut with_last = h_prefix.to_vec();
    with_last.push(h_m);
    let lhs = r_series(model, g, &HVector::new(with_last), order, budget)?;

    let mut with_zero = h_prefix.to_vec();
    with_zero.push(0.0);
    let mut rhs = r_series(model, g, &HVector::new(with_zero), order, budget)?;

    let (nodes, weights) = gauss_legendre_on(0.0, h_m, quad_order);
    for l in extension_links(g.cluster(), &model.window) {
        let mut links = g.links().to_vec();
        links.push(l);
        let extended = ClusterGraph::new(g.source().clone(), links)
            .expect("extension links are valid by construction");
        for (t, w) in nodes.iter().zip(&weights) {
            let mut h = h_prefix.to_vec();
            h.push(*t);
            h.push(*t);
            let inner = r_series(model, &extended, &HVector::new(h), order, budget)?;
            rhs = rhs.add(&inner.scale(*w));
        }
    }
    Ok(lhs.max_abs_diff(&rhs))
}

/// Deviation between the full-window generating series and the product of
/// the copy-0 numerator with the per-box normalizations of the upper copies.
pub fn factorization_check(
    model: &DiscretizedModel,
    order: usize,
    budget: usize,
) -> Result<f64, EngineError> {
    let lhs = h_series(model, order, budget)?;
    let su = su_series(model, order, budget)?;
    let z0 = z0_series(model, order, budget)?;
    let copies = model.window.copy_ceiling as usize * model.window.volume();
    Ok(lhs.max_abs_diff(&su.mul(&z0.pow(copies))))
}

/// Normalized correlation series assembled graph-by-graph from the
/// window-independent amplitudes and the boundary partition functions.
pub fn schwinger_series(
    model: &DiscretizedModel,
    order: usize,
    p_max: usize,
    quad_order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let ceiling = model.window.copy_ceiling as i64;
    let z_lambda = z_series(model, model.window.cells(), order, budget)?;
    let z0 = z0_series(model, order, budget)?;
    let mut z_cache: BTreeMap<Vec<Cell>, LambdaSeries> = BTreeMap::new();

    let mut total = LambdaSeries::zero(order);
    for g in enumerate(&model.window, &model.source_polymer(), p_max) {
        if !g.contributes() {
            continue;
        }
        let a0 = a0_series(model, &g, order, quad_order, budget)?;
        // cells whose column is saturated have no interacting roof box left
        let saturated: Vec<Cell> = model
            .window
            .cells()
            .iter()
            .filter(|c| g.cluster().altitude(c) >= ceiling)
            .cloned()
            .collect();
        let open: Vec<Cell> = model
            .window
            .cells()
            .iter()
            .filter(|c| g.cluster().altitude(c) < ceiling)
            .cloned()
            .collect();
        let z_open = z_cache
            .entry(open.clone())
            .or_insert_with(|| z_series(model, &open, order, budget).expect("budget checked"))
            .clone();
        let numerator = a0.mul(&z_open).mul(&z0.pow(saturated.len()));
        let denominator = z0.pow(g.cluster().len()).mul(&z_lambda);
        total = total.add(&numerator.div(&denominator));
    }
    Ok(total)
}

/// Direct normalized correlation series: the generating series divided by
/// the window partition function and the upper-copy normalizations.
pub fn schwinger_direct(
    model: &DiscretizedModel,
    order: usize,
    budget: usize,
) -> Result<LambdaSeries, EngineError> {
    let h = h_series(model, order, budget)?;
    let z_lambda = z_series(model, model.window.cells(), order, budget)?;
    let z0 = z0_series(model, order, budget)?;
    let copies = model.window.copy_ceiling as usize * model.window.volume();
    Ok(h.div(&z_lambda.mul(&z0.pow(copies))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::lattice::Window;
    use crate::model::Polynomial;
    use crate::quad::gauss_hermite;
    use std::sync::Arc;

    fn kernel() -> Arc<Kernel> {
        Arc::new(Kernel::make_slice_kernel(1, 12).unwrap())
    }

    fn two_cell_model(sources: Vec<Vec<f64>>) -> DiscretizedModel {
        DiscretizedModel::new(
            Window::hypercube(1, 2, 1),
            kernel(),
            1,
            Polynomial::quartic(),
            0.0,
            sources,
        )
        .unwrap()
    }

    #[test]
    fn h_series_order_zero_is_free_two_point() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let h = h_series(&m, 0, DEFAULT_BUDGET).unwrap();
        let c = m.kernel.eval(&[0.5], &[1.5]);
        assert!((h.coefficient(0) - c).abs() < 1e-15);
    }

    #[test]
    fn z0_first_coefficient() {
        let m = two_cell_model(vec![]);
        let z0 = z0_series(&m, 1, DEFAULT_BUDGET).unwrap();
        let v = m.kernel.eval_sep(&[0.0]);
        assert_eq!(z0.coefficient(0), 1.0);
        assert!((z0.coefficient(1) + 3.0 * v * v).abs() < 1e-12);
    }

    #[test]
    fn z0_matches_gauss_hermite_oracle() {
        let m = two_cell_model(vec![]);
        let z0 = z0_series(&m, 4, 16).unwrap();
        let v = m.kernel.eval_sep(&[0.0]);
        let (x, w) = gauss_hermite(60);
        let lambda = 0.01;
        let mut oracle = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let phi = (2.0 * v).sqrt() * xi;
            oracle += wi * (-lambda * phi.powi(4)).exp();
        }
        oracle /= std::f64::consts::PI.sqrt();
        assert!(
            (z0.eval(lambda) - oracle).abs() < 1e-9,
            "{} vs {}",
            z0.eval(lambda),
            oracle
        );
    }

    #[test]
    fn h_series_with_no_sources_is_decoupled_pair() {
        let k = kernel();
        let m = DiscretizedModel::new(
            Window::hypercube(1, 1, 1),
            k,
            1,
            Polynomial::quartic(),
            0.0,
            vec![],
        )
        .unwrap();
        let h = h_series(&m, 1, DEFAULT_BUDGET).unwrap();
        let z0 = z0_series(&m, 1, DEFAULT_BUDGET).unwrap();
        assert!((h.coefficient(1) - 2.0 * z0.coefficient(1)).abs() < 1e-12);
    }

    #[test]
    fn r_series_at_unit_parameter_is_h_series() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let g = ClusterGraph::empty(m.source_polymer());
        let r = r_series(&m, &g, &HVector::new(vec![1.0]), 2, DEFAULT_BUDGET).unwrap();
        let h = h_series(&m, 2, DEFAULT_BUDGET).unwrap();
        assert!(r.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn r_series_at_zero_keeps_cluster_coupling() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let g = ClusterGraph::empty(m.source_polymer());
        let r = r_series(&m, &g, &HVector::new(vec![0.0]), 0, DEFAULT_BUDGET).unwrap();
        let c = m.kernel.eval(&[0.5], &[1.5]);
        assert!((r.coefficient(0) - c).abs() < 1e-15);
    }

    #[test]
    fn zero_prefactor_graph_gives_zero_series() {
        // a vertical link never contributes
        let m = two_cell_model(vec![vec![0.5]]);
        let g = ClusterGraph::new(
            m.source_polymer(),
            vec![Link::new(
                MayerBox::new(Cell::new(vec![0]), 0),
                MayerBox::new(Cell::new(vec![0]), 1),
            )],
        )
        .unwrap();
        let r = r_series(
            &m,
            &g,
            &HVector::new(vec![0.5, 0.5]),
            1,
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert_eq!(r, LambdaSeries::zero(1));
    }

    #[test]
    fn budget_guard_triggers() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        assert!(matches!(
            h_series(&m, 2, 6),
            Err(EngineError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn fundamental_step_base_case() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let g = ClusterGraph::empty(m.source_polymer());
        let dev = fundamental_step_check(&m, &g, &[], 1, 24, DEFAULT_BUDGET).unwrap();
        assert!(dev <= 1e-8, "deviation {dev}");
    }

    #[test]
    fn expansion_identity_small() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let report = expansion_identity_check(&m, 1, 1, 12, DEFAULT_BUDGET).unwrap();
        assert!(
            report.max_relative_deviation <= 1e-6,
            "{:?}",
            report
        );
    }

    #[test]
    fn factorization_small() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let dev = factorization_check(&m, 2, DEFAULT_BUDGET).unwrap();
        assert!(dev <= 1e-10, "deviation {dev}");
    }

    #[test]
    fn a0_order_zero_single_cell_sources() {
        let m = two_cell_model(vec![vec![0.25], vec![0.75]]);
        let g = ClusterGraph::empty(m.source_polymer());
        let a0 = a0_series(&m, &g, 0, 8, DEFAULT_BUDGET).unwrap();
        let c = m.kernel.eval(&[0.25], &[0.75]);
        assert!((a0.coefficient(0) - c).abs() < 1e-15);
    }

    #[test]
    fn a0_is_window_independent() {
        let sources = vec![vec![0.5], vec![1.5]];
        let small = two_cell_model(sources.clone());
        let big = DiscretizedModel::new(
            Window::hypercube(1, 4, 2),
            kernel(),
            1,
            Polynomial::quartic(),
            0.0,
            sources,
        )
        .unwrap();
        for g in enumerate(&small.window, &small.source_polymer(), 1) {
            if !g.contributes() {
                continue;
            }
            let a = a0_series(&small, &g, 1, 10, DEFAULT_BUDGET).unwrap();
            let b = a0_series(&big, &g, 1, 10, DEFAULT_BUDGET).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-10);
        }
    }

    #[test]
    fn simplex_quadrature_stable_under_doubling() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        for g in enumerate(&m.window, &m.source_polymer(), 2) {
            if !g.contributes() || g.len() == 0 {
                continue;
            }
            let a = r_simplex_series(&m, &g, 1, 8, DEFAULT_BUDGET).unwrap();
            let b = r_simplex_series(&m, &g, 1, 16, DEFAULT_BUDGET).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-10, "unstable on {g:?}");
        }
    }

    #[test]
    fn schwinger_assembly_matches_direct_division() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let assembled = schwinger_series(&m, 1, 1, 12, DEFAULT_BUDGET).unwrap();
        let direct = schwinger_direct(&m, 1, DEFAULT_BUDGET).unwrap();
        let report = compare(direct, assembled);
        assert!(
            report.max_relative_deviation <= 1e-6,
            "{:?}",
            report
        );
    }

    #[test]
    fn schwinger_order_zero_is_free_two_point() {
        let m = two_cell_model(vec![vec![0.5], vec![1.5]]);
        let s = schwinger_series(&m, 0, 0, 8, DEFAULT_BUDGET).unwrap();
        let c = m.kernel.eval(&[0.5], &[1.5]);
        assert!((s.coefficient(0) - c).abs() < 1e-12);
    }
}
