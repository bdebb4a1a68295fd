//! Interpolated covariance matrices on the extended lattice: the base matrix,
//! the truncation operation, the closed-form entry formula, the convex
//! recursion that generates it, omega link weights, and the restriction to the
//! final cluster.

use crate::graph::{ClusterGraph, LinkKind};
use crate::lattice::{MayerBox, Window};
use crate::polymer::{Polymer, Region};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Decreasing interpolation parameters `(h_1, ..., h_{p+1})`.
///
/// Conventions `h_0 = 1` and `1/h_{-1} = 0` are built into the accessors. The
/// sequence must be nonincreasing within [0, 1]; the last entry may be 0 or
/// may repeat its predecessor (the two endpoint forms the expansion uses).
#[derive(Debug, Clone, PartialEq)]
pub struct HVector(Vec<f64>);

impl HVector {
    pub fn new(values: Vec<f64>) -> Self {
        for w in values.windows(2) {
            assert!(w[0] >= w[1], "h parameters must be nonincreasing: {values:?}");
        }
        if let Some(&first) = values.first() {
            assert!((0.0..=1.0).contains(&first), "h parameters must lie in [0,1]");
        }
        assert!(values.last().map_or(true, |&v| v >= 0.0));
        HVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `h_j` for `0 <= j <= len`; `h_0 = 1`.
    pub fn val(&self, j: i64) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.0[(j - 1) as usize]
        }
    }

    /// `1/h_j` for `-1 <= j <= len`; `1/h_{-1} = 0`.
    pub fn inv(&self, j: i64) -> f64 {
        if j == -1 {
            0.0
        } else {
            1.0 / self.val(j)
        }
    }

    /// Drop the last parameter (for the recursion to the shorter graph).
    pub fn shorter(&self) -> HVector {
        HVector(self.0[..self.0.len() - 1].to_vec())
    }

    /// Append a parameter.
    pub fn extended(&self, v: f64) -> HVector {
        let mut out = self.0.clone();
        out.push(v);
        HVector::new(out)
    }
}

/// Base matrix entry: full coupling on the copy-0 layer, identity above.
pub fn m_empty(b: &MayerBox, b2: &MayerBox) -> f64 {
    if b.copy == 0 && b2.copy == 0 {
        1.0
    } else if b.copy == b2.copy {
        if b.cell == b2.cell {
            1.0
        } else {
            0.0
        }
    } else {
        0.0
    }
}

/// Closed-form interpolated entry for a graph of length p and h of length p+1.
///
/// The value is `h_{sν} (1/h_{iν} - 1/h_{sμ})` when `sμ < iν`, expressed as a
/// pair of ratios so the decoupled endpoint `h_{p+1} = 0` stays finite.
pub fn covint(g: &ClusterGraph, h: &HVector, b: &MayerBox, b2: &MayerBox) -> f64 {
    debug_assert_eq!(h.len(), g.len() + 1);
    if b == b2 {
        return 1.0;
    }
    let cutoff = g.len() as i64 + 1;
    let smu = g.smu(b, b2, cutoff);
    let inu = g.inu(b, b2, cutoff);
    if smu >= inu {
        return 0.0;
    }
    let snu = g.snu(b, b2, cutoff);
    // sμ < iν <= sν, so h_{sν}/h_{iν} degenerates to 1 exactly when sν = iν
    let lead = if snu == inu {
        1.0
    } else {
        h.val(snu) / h.val(inu)
    };
    let tail = if smu == -1 { 0.0 } else { h.val(snu) / h.val(smu) };
    lead - tail
}

/// A symmetric matrix over an explicit ordered box support.
#[derive(Debug, Clone)]
pub struct InterpolationMatrix {
    support: Vec<MayerBox>,
    index: BTreeMap<MayerBox, usize>,
    pub entries: DMatrix<f64>,
}

impl InterpolationMatrix {
    fn from_fn(support: Vec<MayerBox>, f: impl Fn(&MayerBox, &MayerBox) -> f64) -> Self {
        let n = support.len();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(&support[i], &support[j]);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        let index = support
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, b)| (b, i))
            .collect();
        InterpolationMatrix {
            support,
            index,
            entries,
        }
    }

    pub fn support(&self) -> &[MayerBox] {
        &self.support
    }

    pub fn get(&self, b: &MayerBox, b2: &MayerBox) -> f64 {
        self.entries[(self.index[b], self.index[b2])]
    }

    /// Minimum eigenvalue of the symmetric matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// The base matrix on a support.
pub fn matrix_empty(support: Vec<MayerBox>) -> InterpolationMatrix {
    InterpolationMatrix::from_fn(support, m_empty)
}

/// Closed-form interpolated matrix on a support.
pub fn closed_form_matrix(
    g: &ClusterGraph,
    h: &HVector,
    support: Vec<MayerBox>,
) -> InterpolationMatrix {
    InterpolationMatrix::from_fn(support, |b, b2| covint(g, h, b, b2))
}

/// The truncation: keep entries inside the polymer, fully couple its roof,
/// decouple its sky, and zero everything across regions.
pub fn truncate(m: &InterpolationMatrix, p: &Polymer) -> InterpolationMatrix {
    InterpolationMatrix::from_fn(m.support.to_vec(), |b, b2| {
        match (p.region_of(b), p.region_of(b2)) {
            (Region::Cluster, Region::Cluster) => m.get(b, b2),
            (Region::Roof, Region::Roof) => 1.0,
            (Region::Sky, Region::Sky) => {
                if b == b2 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    })
}

/// Matrix built by the convex recursion: each link mixes the previous matrix
/// with its truncation at the grown polymer, starting from the base matrix.
pub fn recursive_matrix(
    g: &ClusterGraph,
    h: &HVector,
    support: Vec<MayerBox>,
) -> InterpolationMatrix {
    assert_eq!(h.len(), g.len() + 1);
    // length-(-1) graph: the base matrix itself
    let mut m = matrix_empty(support);
    // step i in 0..=p mixes with ratio h_{i+1}/h_i at polymer Γ_i
    for i in 0..=g.len() {
        let stage = g.stage(i as i64);
        let t = truncate(&m, &stage);
        let ratio = h.val(i as i64 + 1) / h.val(i as i64);
        let n = m.entries.nrows();
        let mut mixed = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                mixed[(r, c)] = ratio * m.entries[(r, c)] + (1.0 - ratio) * t.entries[(r, c)];
            }
        }
        m = InterpolationMatrix {
            support: m.support,
            index: m.index,
            entries: mixed,
        };
    }
    m
}

/// Max entrywise deviation between the closed form and the recursion on a
/// support covering the cluster, its roof and a sky margin.
pub fn recursion_check(g: &ClusterGraph, h: &HVector, support: Vec<MayerBox>) -> f64 {
    let a = closed_form_matrix(g, h, support.clone());
    let b = recursive_matrix(g, h, support);
    (a.entries - b.entries).abs().max()
}

/// The omega weight of link `q` (1-based), computed from the truncated
/// indices of the graph prefix `(l_1, ..., l_{q-1})`.
pub fn omega(g: &ClusterGraph, h: &HVector, q: usize) -> f64 {
    assert!(q >= 1 && q <= g.len());
    let l = &g.links()[q - 1];
    let cutoff = q as i64 - 1;
    let smu = g.smu(&l.a, &l.b, cutoff);
    match g.kinds()[q - 1] {
        LinkKind::ClusterRoof => {
            let inu = g.inu(&l.a, &l.b, cutoff);
            if smu >= inu {
                0.0
            } else {
                h.inv(inu) - h.inv(smu)
            }
        }
        LinkKind::RoofRoof => -h.inv(smu),
    }
}

/// Product of all link weights.
pub fn omega_product(g: &ClusterGraph, h: &HVector) -> f64 {
    (1..=g.len()).map(|q| omega(g, h, q)).product()
}

/// The restriction: the interpolated matrix with trailing parameter 0,
/// supported on the final cluster only.
pub fn restrict(g: &ClusterGraph, h_prefix: &HVector) -> InterpolationMatrix {
    assert_eq!(h_prefix.len(), g.len());
    let h = h_prefix.extended(0.0);
    let support: Vec<MayerBox> = g.cluster().boxes().cloned().collect();
    InterpolationMatrix::from_fn(support, |b, b2| covint(g, &h, b, b2))
}

/// Restricted entry without materializing a matrix: zero unless both boxes
/// lie in the final cluster.
pub fn restricted_entry(g: &ClusterGraph, h_full: &HVector, b: &MayerBox, b2: &MayerBox) -> f64 {
    if g.cluster().contains(b) && g.cluster().contains(b2) {
        covint(g, h_full, b, b2)
    } else {
        0.0
    }
}

/// Default support for matrix checks: every window box plus the roof layer
/// above the window and a sky margin row.
pub fn support_with_margin(window: &Window, margin_copies: u32) -> Vec<MayerBox> {
    let mut out = Vec::new();
    for c in window.cells() {
        for k in 0..=(window.copy_ceiling + margin_copies) {
            out.push(MayerBox::new(c.clone(), k));
        }
    }
    out
}
