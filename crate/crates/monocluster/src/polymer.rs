//! Polymers: finite, downward-closed box sets with their altitude, roof and
//! sky decomposition of the extended lattice.

use crate::lattice::{cell_of_point, Cell, MayerBox};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolymerError {
    #[error("box set is not downward closed: contains {missing:?}'s column top but not {missing:?}")]
    NotDownwardClosed { missing: MayerBox },
}

/// Region of the lattice relative to a polymer: the polymer itself, the layer
/// just above its altitude, or everything higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Cluster,
    Roof,
    Sky,
}

/// A finite, downward-closed set of boxes.
///
/// Downward closure means that `(Δ,k)` in the set forces `(Δ,k')` in the set
/// for every `0 <= k' <= k`; such a set is determined by its altitude map.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Polymer {
    boxes: BTreeSet<MayerBox>,
    /// Altitude per occupied cell (top copy index); absent cells have altitude -1.
    altitude: BTreeMap<Cell, u32>,
}

impl std::fmt::Debug for Polymer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Polymer{:?}", self.boxes)
    }
}

impl Polymer {
    /// The empty polymer.
    pub fn empty() -> Self {
        Polymer::default()
    }

    /// Builds a polymer, rejecting sets that are not downward closed.
    pub fn new<I: IntoIterator<Item = MayerBox>>(boxes: I) -> Result<Self, PolymerError> {
        let boxes: BTreeSet<MayerBox> = boxes.into_iter().collect();
        let mut altitude: BTreeMap<Cell, u32> = BTreeMap::new();
        for b in &boxes {
            let a = altitude.entry(b.cell.clone()).or_insert(b.copy);
            *a = (*a).max(b.copy);
        }
        for (cell, &top) in &altitude {
            for k in 0..top {
                let below = MayerBox::new(cell.clone(), k);
                if !boxes.contains(&below) {
                    return Err(PolymerError::NotDownwardClosed { missing: below });
                }
            }
        }
        Ok(Polymer { boxes, altitude })
    }

    /// Copy-0 polymer over the cells containing at least one source point.
    pub fn from_sources(sources: &[Vec<f64>]) -> Self {
        let boxes: BTreeSet<MayerBox> = sources
            .iter()
            .map(|x| MayerBox::new(cell_of_point(x), 0))
            .collect();
        let altitude = boxes.iter().map(|b| (b.cell.clone(), 0)).collect();
        Polymer { boxes, altitude }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, b: &MayerBox) -> bool {
        self.boxes.contains(b)
    }

    pub fn boxes(&self) -> impl Iterator<Item = &MayerBox> {
        self.boxes.iter()
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.altitude.keys()
    }

    /// Top copy index over `c`, or -1 if no box of the polymer sits there.
    pub fn altitude(&self, c: &Cell) -> i64 {
        self.altitude.get(c).map_or(-1, |&k| k as i64)
    }

    /// Highest altitude over any cell, or -1 for the empty polymer.
    pub fn max_altitude(&self) -> i64 {
        self.altitude.values().map(|&k| k as i64).max().unwrap_or(-1)
    }

    /// The roof box over `c`: one copy above the altitude.
    pub fn roof_box(&self, c: &Cell) -> MayerBox {
        MayerBox::new(c.clone(), (self.altitude(c) + 1) as u32)
    }

    /// Roof restricted to a cell support: exactly one box per support cell.
    pub fn roof(&self, support: &[Cell]) -> Vec<MayerBox> {
        support.iter().map(|c| self.roof_box(c)).collect()
    }

    pub fn in_roof(&self, b: &MayerBox) -> bool {
        b.copy as i64 == self.altitude(&b.cell) + 1
    }

    /// The region of a box: exactly one of cluster / roof / sky.
    pub fn region_of(&self, b: &MayerBox) -> Region {
        if self.contains(b) {
            Region::Cluster
        } else if self.in_roof(b) {
            Region::Roof
        } else {
            Region::Sky
        }
    }

    /// Union with the boxes of a link; fails if the result is not a polymer.
    pub fn with_boxes(&self, extra: &[MayerBox]) -> Result<Polymer, PolymerError> {
        Polymer::new(self.boxes.iter().cloned().chain(extra.iter().cloned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cell;

    fn bx(c: i64, k: u32) -> MayerBox {
        MayerBox::new(Cell::new(vec![c]), k)
    }

    #[test]
    fn altitude_cases() {
        let empty = Polymer::empty();
        assert_eq!(empty.altitude(&Cell::new(vec![3])), -1);
        let p = Polymer::new([bx(0, 0), bx(0, 1)]).unwrap();
        assert_eq!(p.altitude(&Cell::new(vec![0])), 1);
        assert_eq!(p.altitude(&Cell::new(vec![1])), -1);
    }

    #[test]
    fn downward_closure_rejected_not_repaired() {
        let err = Polymer::new([bx(0, 1)]).unwrap_err();
        assert_eq!(err, PolymerError::NotDownwardClosed { missing: bx(0, 0) });
    }

    #[test]
    fn roof_examples() {
        let cells = [Cell::new(vec![0]), Cell::new(vec![1])];
        let empty = Polymer::empty();
        assert_eq!(empty.roof(&cells), vec![bx(0, 0), bx(1, 0)]);
        let p = Polymer::new([bx(0, 0)]).unwrap();
        assert_eq!(p.roof(&cells), vec![bx(0, 1), bx(1, 0)]);
        assert_eq!(p.roof(&cells).len(), cells.len());
    }

    #[test]
    fn region_partition() {
        let p = Polymer::new([bx(0, 0)]).unwrap();
        assert_eq!(p.region_of(&bx(0, 0)), Region::Cluster);
        assert_eq!(p.region_of(&bx(0, 1)), Region::Roof);
        assert_eq!(p.region_of(&bx(0, 5)), Region::Sky);
        // each box falls in exactly one region of the partition
        for c in 0..3 {
            for k in 0..5 {
                let b = bx(c, k);
                let kinds = [p.contains(&b), p.in_roof(&b)];
                assert!(kinds.iter().filter(|&&x| x).count() <= 1);
            }
        }
    }

    #[test]
    fn source_polymer() {
        let p = Polymer::from_sources(&[vec![0.25], vec![0.75]]);
        assert_eq!(p.len(), 1);
        let p = Polymer::from_sources(&[vec![0.5], vec![3.5]]);
        assert_eq!(
            p.boxes().cloned().collect::<Vec<_>>(),
            vec![bx(0, 0), bx(3, 0)]
        );
        assert!(Polymer::from_sources(&[]).is_empty());
    }

    #[test]
    fn altitude_determines_polymer() {
        let p = Polymer::new([bx(0, 0), bx(0, 1), bx(2, 0)]).unwrap();
        let rebuilt: Vec<MayerBox> = p
            .cells()
            .flat_map(|c| (0..=p.altitude(c) as u32).map(|k| MayerBox::new(c.clone(), k)))
            .collect();
        assert_eq!(Polymer::new(rebuilt).unwrap(), p);
    }
}
