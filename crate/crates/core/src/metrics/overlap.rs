//! Dice and IoU.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::OverlapScalar;
use crate::volume::Volume;

/// Voxel counts of two sets and of their intersection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub a: u64,
    pub b: u64,
    pub intersection: u64,
}

impl OverlapCounts {
    pub fn of(a: &Volume<bool>, b: &Volume<bool>) -> Result<Self> {
        a.grid().ensure_same(b.grid())?;
        let (a, b) = (a.data(), b.data());
        Ok(Self::from_fn(a.len(), |i| a[i], |i| b[i]))
    }

    /// Counts of the sets `{i : a(i)}` and `{i : b(i)}` over `0..len`.
    pub fn from_fn(len: usize, a: impl Fn(usize) -> bool, b: impl Fn(usize) -> bool) -> Self {
        let mut c = OverlapCounts::default();
        for i in 0..len {
            let (x, y) = (a(i), b(i));
            c.a += x as u64;
            c.b += y as u64;
            c.intersection += (x && y) as u64;
        }
        c
    }

    pub fn union(&self) -> u64 {
        self.a + self.b - self.intersection
    }

    /// `2|A∩B| / (|A|+|B|)`, 1 when both sets are empty.
    pub fn dice<S: OverlapScalar>(&self) -> S {
        if self.a + self.b == 0 {
            return S::ratio(1, 1);
        }
        S::ratio(2 * self.intersection, self.a + self.b)
    }

    /// `|A∩B| / |A∪B|`, 1 when both sets are empty.
    pub fn iou<S: OverlapScalar>(&self) -> S {
        if self.union() == 0 {
            return S::ratio(1, 1);
        }
        S::ratio(self.intersection, self.union())
    }
}

pub fn dice<S: OverlapScalar>(a: &Volume<bool>, b: &Volume<bool>) -> Result<S> {
    Ok(OverlapCounts::of(a, b)?.dice())
}

pub fn iou<S: OverlapScalar>(a: &Volume<bool>, b: &Volume<bool>) -> Result<S> {
    Ok(OverlapCounts::of(a, b)?.iou())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use num_rational::Ratio;

    fn cube(dims: [usize; 3], lo: [usize; 3], side: usize) -> Volume<bool> {
        let g = Grid::new(dims, [1.0; 3]).unwrap();
        Volume::from_fn(g, |c| (0..3).all(|a| c[a] >= lo[a] && c[a] < lo[a] + side))
    }

    #[test]
    fn identical_and_disjoint() {
        let a = cube([6, 6, 6], [0, 0, 0], 3);
        let b = cube([6, 6, 6], [3, 3, 3], 3);
        assert_eq!(dice::<f64>(&a, &a).unwrap(), 1.0);
        assert_eq!(iou::<f64>(&a, &a).unwrap(), 1.0);
        assert_eq!(dice::<f64>(&a, &b).unwrap(), 0.0);
        assert_eq!(iou::<f64>(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn offset_cubes() {
        let a = cube([5, 3, 3], [0, 0, 0], 3);
        let b = cube([5, 3, 3], [1, 0, 0], 3);
        let c = OverlapCounts::of(&a, &b).unwrap();
        assert_eq!((c.a, c.b, c.intersection), (27, 27, 18));
        assert_eq!(c.dice::<Ratio<u64>>(), Ratio::new(2, 3));
        assert_eq!(c.iou::<Ratio<u64>>(), Ratio::new(1, 2));
        assert!((c.dice::<f32>() - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn both_empty_is_one() {
        let e = cube([3, 3, 3], [0, 0, 0], 0);
        assert_eq!(dice::<Ratio<u64>>(&e, &e).unwrap(), Ratio::new(1, 1));
        assert_eq!(iou::<f64>(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = cube([3, 3, 3], [0, 0, 0], 1);
        let b = cube([3, 3, 4], [0, 0, 0], 1);
        assert!(dice::<f64>(&a, &b).is_err());
    }
}
