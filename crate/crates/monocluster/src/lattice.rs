//! Unit-box discretization of space and its extension by copy indices.
//!
//! A [`Cell`] is the lower corner of a unit hypercube of the spatial grid; a
//! [`MayerBox`] pairs a cell with a copy index, giving one box of the extended
//! lattice on which polymers and cluster-graphs live. A [`Window`] is a finite
//! set of cells together with a copy ceiling.

use serde::{Deserialize, Serialize};

/// Lower corner of a unit box `∏ [k_i, k_i+1)` of the spatial grid.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub Vec<i64>);

impl std::fmt::Debug for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cell{:?}", self.0)
    }
}

impl Cell {
    pub fn new(coords: Vec<i64>) -> Self {
        Cell(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Center of the unit box, the default quadrature node.
    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|&k| k as f64 + 0.5).collect()
    }
}

/// The unique cell whose half-open unit box contains `x`.
pub fn cell_of_point(x: &[f64]) -> Cell {
    Cell(x.iter().map(|&v| v.floor() as i64).collect())
}

/// Euclidean set distance between the closed unit boxes of two cells.
///
/// Zero for equal or adjacent cells; per axis the gap is `|Δk| - 1` when the
/// coordinates differ by more than one.
pub fn cell_distance(a: &Cell, b: &Cell) -> f64 {
    assert_eq!(a.dim(), b.dim(), "cell dimension mismatch");
    let mut s = 0.0;
    for (&ka, &kb) in a.0.iter().zip(&b.0) {
        let gap = (ka - kb).abs() - 1;
        if gap > 0 {
            s += (gap as f64) * (gap as f64);
        }
    }
    s.sqrt()
}

/// One box of the extended lattice: a cell plus a copy index.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MayerBox {
    pub cell: Cell,
    pub copy: u32,
}

impl std::fmt::Debug for MayerBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:?},{})", self.cell.0, self.copy)
    }
}

impl MayerBox {
    pub fn new(cell: Cell, copy: u32) -> Self {
        MayerBox { cell, copy }
    }

    /// True iff this box lies in the copy-0 layer.
    pub fn is_ground(&self) -> bool {
        self.copy == 0
    }
}

/// Box containing the pair `(x, k)`.
pub fn box_of_point(x: &[f64], k: u32) -> MayerBox {
    MayerBox::new(cell_of_point(x), k)
}

/// A finite window: an ordered set of cells plus a copy ceiling `N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    cells: Vec<Cell>,
    pub copy_ceiling: u32,
}

impl Window {
    /// Window from an explicit cell list. Cells are sorted and deduplicated
    /// so enumeration order is deterministic.
    pub fn new(mut cells: Vec<Cell>, copy_ceiling: u32) -> Self {
        cells.sort();
        cells.dedup();
        Window { cells, copy_ceiling }
    }

    /// Hypercube window `[0, side)^dim` with copy ceiling `n`.
    pub fn hypercube(dim: usize, side: i64, copy_ceiling: u32) -> Self {
        assert!(dim >= 1 && side >= 1);
        let mut cells = Vec::new();
        let mut coords = vec![0i64; dim];
        loop {
            cells.push(Cell(coords.clone()));
            let mut axis = 0;
            loop {
                coords[axis] += 1;
                if coords[axis] < side {
                    break;
                }
                coords[axis] = 0;
                axis += 1;
                if axis == dim {
                    return Window::new(cells, copy_ceiling);
                }
            }
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn volume(&self) -> usize {
        self.cells.len()
    }

    pub fn contains_cell(&self, c: &Cell) -> bool {
        self.cells.binary_search(c).is_ok()
    }

    pub fn contains_box(&self, b: &MayerBox) -> bool {
        b.copy <= self.copy_ceiling && self.contains_cell(&b.cell)
    }

    /// All boxes of the window, in lexicographic (cell, copy) order.
    /// Exactly `volume() * (copy_ceiling + 1)` of them.
    pub fn boxes(&self) -> Vec<MayerBox> {
        let mut out = Vec::with_capacity(self.cells.len() * (self.copy_ceiling as usize + 1));
        for c in &self.cells {
            for k in 0..=self.copy_ceiling {
                out.push(MayerBox::new(c.clone(), k));
            }
        }
        out
    }
}
