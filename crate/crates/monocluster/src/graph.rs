//! Cluster-graphs: ordered link sequences growing a polymer from the source
//! boxes, their conception/creation indices, the sigma map, and exhaustive
//! enumeration inside a window.

use crate::lattice::{Cell, MayerBox, Window};
use crate::polymer::Polymer;
use serde::Serialize;
use thiserror::Error;

/// Kind of a link, decided during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinkKind {
    /// One endpoint in the current cluster, the other in its roof.
    ClusterRoof,
    /// Both endpoints in the roof, not both in the copy-0 layer.
    RoofRoof,
}

/// An unordered pair of distinct boxes. Endpoints are stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Link {
    pub a: MayerBox,
    pub b: MayerBox,
}

impl Link {
    pub fn new(x: MayerBox, y: MayerBox) -> Self {
        assert_ne!(x, y, "link endpoints must be distinct");
        if x <= y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    pub fn endpoints(&self) -> [&MayerBox; 2] {
        [&self.a, &self.b]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("link {index} satisfies neither growth condition: {detail}")]
    InvalidLink { index: usize, detail: String },
}

/// Signalled when the sigma map is undefined; such graphs carry weight zero.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("graph is non-contributing: sigma({link_index}) = -1")]
pub struct NonContributing {
    pub link_index: usize,
}

/// A validated cluster-graph: source polymer, ordered links, and the cached
/// stage polymers `Γ_0 ⊆ Γ_1 ⊆ ... ⊆ Γ_p`.
#[derive(Debug, Clone)]
pub struct ClusterGraph {
    source: Polymer,
    links: Vec<Link>,
    kinds: Vec<LinkKind>,
    /// stages[i] = Γ_i, so stages has length p+1.
    stages: Vec<Polymer>,
}

impl ClusterGraph {
    /// Validates the link sequence against the evolving stage polymers.
    ///
    /// A link must join the cluster to its roof, or two roof boxes not both at
    /// copy 0. Each stage must remain a polymer and strictly grow.
    pub fn new(source: Polymer, links: Vec<Link>) -> Result<Self, GraphError> {
        let mut stages = vec![source.clone()];
        let mut kinds = Vec::with_capacity(links.len());
        for (idx, l) in links.iter().enumerate() {
            let prev = stages.last().unwrap();
            let a_in = prev.contains(&l.a);
            let b_in = prev.contains(&l.b);
            let a_roof = prev.in_roof(&l.a);
            let b_roof = prev.in_roof(&l.b);
            let kind = if (a_in && b_roof) || (b_in && a_roof) {
                LinkKind::ClusterRoof
            } else if a_roof && b_roof {
                if l.a.is_ground() && l.b.is_ground() {
                    return Err(GraphError::InvalidLink {
                        index: idx,
                        detail: format!(
                            "roof-roof link {:?}-{:?} has both endpoints at copy 0",
                            l.a, l.b
                        ),
                    });
                }
                LinkKind::RoofRoof
            } else {
                return Err(GraphError::InvalidLink {
                    index: idx,
                    detail: format!(
                        "endpoints {:?} (cluster={a_in}, roof={a_roof}) and {:?} \
                         (cluster={b_in}, roof={b_roof}) fit neither condition",
                        l.a, l.b
                    ),
                });
            };
            let next = prev
                .with_boxes(&[l.a.clone(), l.b.clone()])
                .map_err(|e| GraphError::InvalidLink {
                    index: idx,
                    detail: e.to_string(),
                })?;
            debug_assert!(next.len() > prev.len(), "each link must add a box");
            stages.push(next);
            kinds.push(kind);
        }
        Ok(ClusterGraph {
            source,
            links,
            kinds,
            stages,
        })
    }

    pub fn empty(source: Polymer) -> Self {
        ClusterGraph::new(source, Vec::new()).unwrap()
    }

    /// Number of links p.
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn kinds(&self) -> &[LinkKind] {
        &self.kinds
    }

    pub fn source(&self) -> &Polymer {
        &self.source
    }

    /// Stage polymer `Γ_i` for `-1 <= i <= p`; `Γ_{-1}` is empty.
    pub fn stage(&self, i: i64) -> Polymer {
        if i < 0 {
            Polymer::empty()
        } else {
            self.stages[i as usize].clone()
        }
    }

    /// The final polymer `Γ_p`.
    pub fn cluster(&self) -> &Polymer {
        self.stages.last().unwrap()
    }

    fn in_roof_at(&self, i: i64, b: &MayerBox) -> bool {
        if i < 0 {
            // W(Γ_{-1}) = W(∅) is the whole copy-0 layer
            b.is_ground()
        } else {
            self.stages[i as usize].in_roof(b)
        }
    }

    fn in_cluster_at(&self, i: i64, b: &MayerBox) -> bool {
        i >= 0 && self.stages[i as usize].contains(b)
    }

    /// Truncated conception index: first stage `-1 <= i <= cutoff-1` at which
    /// `b` lies in the roof, or `cutoff` if none. `cutoff = p+1` gives the
    /// full-graph index.
    pub fn conception_index(&self, b: &MayerBox, cutoff: i64) -> i64 {
        debug_assert!((0..=self.len() as i64 + 1).contains(&cutoff));
        (-1..cutoff)
            .find(|&i| self.in_roof_at(i, b))
            .unwrap_or(cutoff)
    }

    /// Truncated creation index: first stage at which `b` lies in the cluster.
    pub fn creation_index(&self, b: &MayerBox, cutoff: i64) -> i64 {
        debug_assert!((0..=self.len() as i64 + 1).contains(&cutoff));
        (-1..cutoff)
            .find(|&i| self.in_cluster_at(i, b))
            .unwrap_or(cutoff)
    }

    pub fn mu(&self, b: &MayerBox) -> i64 {
        self.conception_index(b, self.len() as i64 + 1)
    }

    pub fn nu(&self, b: &MayerBox) -> i64 {
        self.creation_index(b, self.len() as i64 + 1)
    }

    /// max of the two conception indices at the given cutoff.
    pub fn smu(&self, b: &MayerBox, b2: &MayerBox, cutoff: i64) -> i64 {
        self.conception_index(b, cutoff)
            .max(self.conception_index(b2, cutoff))
    }

    /// max of the two creation indices at the given cutoff.
    pub fn snu(&self, b: &MayerBox, b2: &MayerBox, cutoff: i64) -> i64 {
        self.creation_index(b, cutoff)
            .max(self.creation_index(b2, cutoff))
    }

    /// min of the two creation indices at the given cutoff.
    pub fn inu(&self, b: &MayerBox, b2: &MayerBox, cutoff: i64) -> i64 {
        self.creation_index(b, cutoff)
            .min(self.creation_index(b2, cutoff))
    }

    /// True iff the omega weight of link `q` (1-based) is structurally
    /// nonzero, i.e. nonzero for every admissible parameter vector.
    pub fn link_contributes(&self, q: usize) -> bool {
        let l = &self.links[q - 1];
        let cutoff = q as i64 - 1;
        match self.kinds[q - 1] {
            LinkKind::ClusterRoof => self.smu(&l.a, &l.b, cutoff) < self.inu(&l.a, &l.b, cutoff),
            // sμ = -1 would make the weight -1/h_{-1} = 0
            LinkKind::RoofRoof => self.smu(&l.a, &l.b, cutoff) >= 0,
        }
    }

    /// True iff no link weight is structurally zero.
    pub fn contributes(&self) -> bool {
        (1..=self.len()).all(|q| self.link_contributes(q))
    }

    /// The sigma map: for each link `q`, the larger conception
    /// index of the two roof boxes of `W(Γ_{q-1})` over the link's cells.
    /// Guarantees `0 <= sigma(q) < q`; signals when undefined.
    pub fn sigma_map(&self) -> Result<Vec<i64>, NonContributing> {
        let mut out = Vec::with_capacity(self.len());
        for q in 1..=self.len() {
            let l = &self.links[q - 1];
            let prev = &self.stages[q - 1];
            let rb = prev.roof_box(&l.a.cell);
            let rb2 = prev.roof_box(&l.b.cell);
            let s = self.mu(&rb).max(self.mu(&rb2));
            if s < 0 {
                return Err(NonContributing { link_index: q });
            }
            debug_assert!(s < q as i64);
            out.push(s);
        }
        Ok(out)
    }

    /// Conception/creation tables over `Γ_p ∪ W(Γ_p)` restricted to a cell support.
    pub fn index_table(&self, support: &[Cell]) -> IndexTable {
        let mut entries = Vec::new();
        for b in self.cluster().boxes() {
            entries.push((b.clone(), self.mu(b), self.nu(b)));
        }
        for b in self.cluster().roof(support) {
            let (m, n) = (self.mu(&b), self.nu(&b));
            entries.push((b, m, n));
        }
        IndexTable { entries }
    }
}

/// Flat conception/creation index table for inspection and reports.
#[derive(Debug, Clone, Serialize)]
pub struct IndexTable {
    pub entries: Vec<(MayerBox, i64, i64)>,
}

/// Candidate links that can extend `current` inside `window`: cluster-roof
/// pairs and roof-roof pairs (not both at copy 0), both endpoints in the
/// window. Sorted; deterministic.
pub fn extension_links(current: &Polymer, window: &Window) -> Vec<Link> {
    let roof: Vec<MayerBox> = window
        .cells()
        .iter()
        .map(|c| current.roof_box(c))
        .filter(|b| window.contains_box(b))
        .collect();
    let mut out = Vec::new();
    for b in current.boxes() {
        if !window.contains_box(b) {
            continue;
        }
        for r in &roof {
            out.push(Link::new(b.clone(), r.clone()));
        }
    }
    for (i, r) in roof.iter().enumerate() {
        for r2 in &roof[i + 1..] {
            if r.is_ground() && r2.is_ground() {
                continue;
            }
            out.push(Link::new(r.clone(), r2.clone()));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Every valid cluster-graph with `0 <= p <= p_max` whose final polymer lies
/// inside the window's box set, in depth-first lexicographic order on link
/// sequences. Non-contributing graphs are included; callers that assemble
/// weighted sums may skip them since their weight vanishes identically.
pub fn enumerate(window: &Window, source: &Polymer, p_max: usize) -> Vec<ClusterGraph> {
    assert!(
        source.boxes().all(|b| b.is_ground() && window.contains_box(b)),
        "sources must lie in the window's copy-0 layer"
    );
    let mut out = Vec::new();
    let root = ClusterGraph::empty(source.clone());
    let mut stack = vec![root];
    while let Some(g) = stack.pop() {
        if g.len() < p_max {
            let candidates = extension_links(g.cluster(), window);
            // push in reverse so the stack pops in lexicographic order
            for l in candidates.into_iter().rev() {
                let mut links = g.links().to_vec();
                links.push(l);
                if let Ok(ext) = ClusterGraph::new(source.clone(), links) {
                    if ext.cluster().boxes().all(|b| window.contains_box(b)) {
                        stack.push(ext);
                    }
                }
            }
        }
        out.push(g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cell;

    fn bx(c: i64, k: u32) -> MayerBox {
        MayerBox::new(Cell::new(vec![c]), k)
    }

    fn src(cells: &[i64]) -> Polymer {
        Polymer::new(cells.iter().map(|&c| bx(c, 0))).unwrap()
    }

    #[test]
    fn validate_examples() {
        let g0 = src(&[0]);
        // cluster-roof: b in Γ_0, b' in the copy-0 roof layer
        let g = ClusterGraph::new(g0.clone(), vec![Link::new(bx(0, 0), bx(1, 0))]).unwrap();
        assert_eq!(g.kinds(), &[LinkKind::ClusterRoof]);
        // both endpoints in the copy-0 roof: rejected
        let err = ClusterGraph::new(g0.clone(), vec![Link::new(bx(1, 0), bx(2, 0))]).unwrap_err();
        assert!(matches!(err, GraphError::InvalidLink { index: 0, .. }));
        // roof-roof with one endpoint above copy 0
        let g = ClusterGraph::new(g0, vec![Link::new(bx(0, 1), bx(1, 0))]).unwrap();
        assert_eq!(g.kinds(), &[LinkKind::RoofRoof]);
    }

    #[test]
    fn empty_graph_indices() {
        let g = ClusterGraph::empty(src(&[0]));
        // conception: -1 in the ground layer, 0 just above the source, 1 in the sky
        assert_eq!(g.conception_index(&bx(5, 0), 1), -1);
        assert_eq!(g.conception_index(&bx(0, 1), 1), 0);
        assert_eq!(g.conception_index(&bx(0, 3), 1), 1);
        // creation: 0 on the source, 1 elsewhere
        assert_eq!(g.creation_index(&bx(0, 0), 1), 0);
        assert_eq!(g.creation_index(&bx(1, 0), 1), 1);
        assert_eq!(g.creation_index(&bx(0, 2), 1), 1);
    }

    #[test]
    fn mu_strictly_below_nu_on_cluster_and_roof() {
        let w = Window::hypercube(1, 2, 2);
        for g in enumerate(&w, &src(&[0]), 3) {
            let support: Vec<Cell> = w.cells().to_vec();
            for (b, m, n) in g.index_table(&support).entries {
                assert!(m < n, "mu < nu violated at {b:?} in {g:?}");
            }
        }
    }

    #[test]
    fn stage_monotonicity_and_growth() {
        let w = Window::hypercube(1, 2, 2);
        for g in enumerate(&w, &src(&[0]), 3) {
            for i in 1..=g.len() {
                let prev = g.stage(i as i64 - 1);
                let cur = g.stage(i as i64);
                assert!(cur.len() > prev.len());
                // new boxes lie in the previous roof
                for b in cur.boxes() {
                    if !prev.contains(b) {
                        assert!(prev.in_roof(b));
                    }
                }
            }
            assert!(g.cluster().len() >= g.len());
        }
    }

    #[test]
    fn enumerate_counts() {
        let w = Window::hypercube(1, 2, 1);
        let graphs = enumerate(&w, &src(&[0]), 0);
        assert_eq!(graphs.len(), 1);

        // brute-force oracle for p = 1: all unordered box pairs in a margin,
        // kept iff they validate and stay inside the window
        let graphs = enumerate(&w, &src(&[0]), 1);
        let mut all_boxes = Vec::new();
        for c in -1..3 {
            for k in 0..4 {
                all_boxes.push(bx(c, k));
            }
        }
        let mut count = 1; // the empty graph
        for i in 0..all_boxes.len() {
            for j in i + 1..all_boxes.len() {
                let link = Link::new(all_boxes[i].clone(), all_boxes[j].clone());
                if let Ok(g) = ClusterGraph::new(src(&[0]), vec![link]) {
                    if g.cluster().boxes().all(|b| w.contains_box(b)) {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(graphs.len(), count);
        assert!(graphs.iter().all(|g| g.len() <= 1));
    }

    #[test]
    fn enumerate_is_deterministic() {
        let w = Window::hypercube(1, 2, 1);
        let a: Vec<_> = enumerate(&w, &src(&[0]), 2)
            .iter()
            .map(|g| g.links().to_vec())
            .collect();
        let b: Vec<_> = enumerate(&w, &src(&[0]), 2)
            .iter()
            .map(|g| g.links().to_vec())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn sigma_map_examples() {
        let g0 = src(&[0]);
        // roof-roof first link: sigma(1) = max of the conception indices = 0
        let g = ClusterGraph::new(g0.clone(), vec![Link::new(bx(0, 1), bx(1, 0))]).unwrap();
        assert_eq!(g.sigma_map().unwrap(), vec![0]);
        // sigma(q) < q for everything enumerable in a small window
        let w = Window::hypercube(1, 3, 2);
        for g in enumerate(&w, &g0, 3) {
            if let Ok(sigma) = g.sigma_map() {
                for (q0, s) in sigma.iter().enumerate() {
                    assert!((0..(q0 as i64 + 1)).contains(s));
                }
            }
        }
    }

    #[test]
    fn vertical_links_are_non_contributing() {
        // a vertical cluster-roof link shares its cell with the roof box;
        // no stage roof can contain both endpoints, so its weight vanishes
        let g0 = src(&[0]);
        let g = ClusterGraph::new(g0, vec![Link::new(bx(0, 0), bx(0, 1))]).unwrap();
        assert_eq!(g.kinds(), &[LinkKind::ClusterRoof]);
        assert!(!g.contributes());
    }
}
