//! Connected component labelling.

use serde::{Deserialize, Serialize};

use super::{Bounds, Grid, Volume, Voxel};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[isize; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &FULL_OFFSETS,
        }
    }
}

pub(crate) const FACE_OFFSETS: [[isize; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub(crate) const FULL_OFFSETS: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut n = 0;
    let mut z = -1;
    while z <= 1 {
        let mut y = -1;
        while y <= 1 {
            let mut x = -1;
            while x <= 1 {
                if !(x == 0 && y == 0 && z == 0) {
                    out[n] = [x, y, z];
                    n += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub voxels: usize,
    /// Mean voxel coordinate.
    pub centroid: [f64; 3],
    pub bounds: Bounds,
}

/// Labelled components. Ids run `1..=count()`, ordered by the smallest
/// linear voxel index of each component.
#[derive(Clone, Debug)]
pub struct ComponentSet {
    pub labels: Volume<u32>,
    pub stats: Vec<ComponentStats>,
}

impl ComponentSet {
    pub fn count(&self) -> usize {
        self.stats.len()
    }

    /// Linear voxel indices of every component, indexed by `id - 1`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.stats.iter().map(|s| Vec::with_capacity(s.voxels)).collect();
        for (i, &l) in self.labels.data().iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

pub fn connected_components<T: Voxel>(mask: &Volume<T>, connectivity: Connectivity) -> ComponentSet {
    let data = mask.data();
    connected_components_where(mask.grid(), connectivity, |i| data[i].is_foreground())
}

/// Components of the voxels for which `is_fg(linear index)` holds.
pub fn connected_components_where(
    grid: &Grid,
    connectivity: Connectivity,
    is_fg: impl Fn(usize) -> bool,
) -> ComponentSet {
    let mut labels = vec![0u32; grid.len()];
    let mut stats = Vec::new();
    let mut stack = Vec::new();
    let offsets = connectivity.offsets();
    for seed in 0..grid.len() {
        if labels[seed] != 0 || !is_fg(seed) {
            continue;
        }
        let id = stats.len() as u32 + 1;
        labels[seed] = id;
        stack.push(seed);
        let first = grid.coords(seed);
        let mut bounds = Bounds::point(first);
        let mut sum = [0u64; 3];
        let mut count = 0usize;
        while let Some(i) = stack.pop() {
            let c = grid.coords(i);
            count += 1;
            for a in 0..3 {
                sum[a] += c[a] as u64;
            }
            bounds.include(c);
            for d in offsets {
                if let Some(n) = grid.offset(c, *d) {
                    if labels[n] == 0 && is_fg(n) {
                        labels[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        let centroid = [0, 1, 2].map(|a| sum[a] as f64 / count as f64);
        stats.push(ComponentStats {
            voxels: count,
            centroid,
            bounds,
        });
    }
    ComponentSet {
        labels: Volume::from_parts(*grid, labels),
        stats,
    }
}

/// Mean of the voxel index triples.
pub fn center_of_mass<F: Real>(voxels: &[[usize; 3]]) -> Result<[F; 3]> {
    if voxels.is_empty() {
        return Err(Error::EmptyInput("center of mass of an empty component"));
    }
    let mut sum = [0u64; 3];
    for v in voxels {
        for a in 0..3 {
            sum[a] += v[a] as u64;
        }
    }
    let n = F::from_usize_lossy(voxels.len());
    Ok(sum.map(|s| F::from_u64(s).unwrap_or_else(F::nan) / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(dims: [usize; 3], on: &[[usize; 3]]) -> Volume<bool> {
        let g = Grid::new(dims, [1.0; 3]).unwrap();
        let mut v = Volume::filled(g, false);
        for &c in on {
            v.set(c, true);
        }
        v
    }

    fn cube(origin: [usize; 3], side: usize) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for x in 0..side {
            for y in 0..side {
                for z in 0..side {
                    out.push([origin[0] + x, origin[1] + y, origin[2] + z]);
                }
            }
        }
        out
    }

    #[test]
    fn empty_mask() {
        let m = mask([4, 4, 4], &[]);
        assert_eq!(connected_components(&m, Connectivity::Six).count(), 0);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count(), 0);
    }

    #[test]
    fn separated_cubes() {
        let mut on = cube([0, 0, 0], 2);
        on.extend(cube([4, 0, 0], 2));
        let m = mask([6, 3, 3], &on);
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let cs = connected_components(&m, conn);
            assert_eq!(cs.count(), 2);
            assert_eq!(cs.stats[0].voxels, 8);
            assert_eq!(cs.stats[0].centroid, [0.5, 0.5, 0.5]);
            assert_eq!(cs.stats[1].centroid, [4.5, 0.5, 0.5]);
        }
    }

    #[test]
    fn corner_touch() {
        let m = mask([2, 2, 2], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count(), 1);
        assert_eq!(connected_components(&m, Connectivity::Six).count(), 2);
    }

    #[test]
    fn ids_follow_first_voxel() {
        // The later-seeded component extends before the first one in z but
        // its smallest linear index comes second.
        let m = mask([4, 1, 3], &[[3, 0, 0], [1, 0, 2], [0, 0, 2]]);
        let cs = connected_components(&m, Connectivity::Six);
        assert_eq!(cs.labels.get([3, 0, 0]), 1);
        assert_eq!(cs.labels.get([0, 0, 2]), 2);
    }

    #[test]
    fn com_examples() {
        assert_eq!(center_of_mass::<f64>(&[[2, 3, 4]]).unwrap(), [2.0, 3.0, 4.0]);
        assert_eq!(center_of_mass::<f64>(&cube([0, 0, 0], 3)).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(center_of_mass::<f32>(&[[0, 0, 0], [0, 2, 0]]).unwrap(), [0.0, 1.0, 0.0]);
        assert!(center_of_mass::<f64>(&[]).is_err());
    }
}
