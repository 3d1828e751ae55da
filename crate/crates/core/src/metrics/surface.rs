//! Average symmetric surface distance.
//!
//! The surface of a mask is its foreground voxels with at least one face
//! neighbour that is background or outside the volume. ASSD is the mean of
//! the two directed averages of nearest-surface distances, in mm.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::volume::{squared_distance_to_features, Bounds, Grid, Volume};

const FACES: [[isize; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub fn assd<F: Real>(a: &Volume<bool>, b: &Volume<bool>) -> Result<F> {
    a.grid().ensure_same(b.grid())?;
    let (Some(ba), Some(bb)) = (a.foreground_bounds(), b.foreground_bounds()) else {
        return Err(Error::Undefined("ASSD needs two non-empty masks".into()));
    };
    let region = union_bounds(ba, bb).padded(1, a.dims());
    let (da, db) = (a.data(), b.data());
    assd_in(a.grid(), region, |i| da[i], |i| db[i])
}

pub(crate) fn union_bounds(mut a: Bounds, b: Bounds) -> Bounds {
    a.include(b.min);
    a.include(b.max);
    a
}

/// ASSD between the sets `a` and `b`, both contained in `region`, which must
/// include one voxel of margin around them wherever the grid allows.
pub(crate) fn assd_in<F: Real>(
    grid: &Grid,
    region: Bounds,
    a: impl Fn(usize) -> bool,
    b: impl Fn(usize) -> bool,
) -> Result<F> {
    let size = [0, 1, 2].map(|k| region.max[k] - region.min[k] + 1);
    let n: usize = size.iter().product();
    let mut la = vec![false; n];
    let mut lb = vec![false; n];
    let mut l = 0;
    for z in region.min[2]..=region.max[2] {
        for y in region.min[1]..=region.max[1] {
            for x in region.min[0]..=region.max[0] {
                let g = grid.index([x, y, z]);
                la[l] = a(g);
                lb[l] = b(g);
                l += 1;
            }
        }
    }
    let sa = surface(&la, size);
    let sb = surface(&lb, size);
    if !sa.iter().any(|&s| s) || !sb.iter().any(|&s| s) {
        return Err(Error::Undefined("ASSD needs two non-empty masks".into()));
    }
    let spacing = grid.spacing.map(F::from_f64_lossy);
    let ab = directed_mean(&sa, &squared_distance_to_features(&sb, size, spacing));
    let ba = directed_mean(&sb, &squared_distance_to_features(&sa, size, spacing));
    Ok((ab + ba) / (F::one() + F::one()))
}

// Voxels outside the local box count as background: the box carries a
// margin, so anything beyond it is background or beyond the volume edge.
fn surface(mask: &[bool], size: [usize; 3]) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for z in 0..size[2] {
        for y in 0..size[1] {
            for x in 0..size[0] {
                let i = x + size[0] * (y + size[1] * z);
                if !mask[i] {
                    continue;
                }
                let c = [x as isize, y as isize, z as isize];
                out[i] = FACES.iter().any(|d| {
                    let n = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
                    if (0..3).any(|k| n[k] < 0 || n[k] >= size[k] as isize) {
                        return true;
                    }
                    !mask[n[0] as usize + size[0] * (n[1] as usize + size[1] * n[2] as usize)]
                });
            }
        }
    }
    out
}

fn directed_mean<F: Real>(from: &[bool], sq_dist: &[F]) -> F {
    let mut sum = F::zero();
    let mut count = 0usize;
    for (s, d) in from.iter().zip(sq_dist) {
        if *s {
            sum = sum + d.sqrt();
            count += 1;
        }
    }
    sum / F::from_usize_lossy(count)
}

/// Surface voxel coordinates of a mask.
pub fn surface_voxels(mask: &Volume<bool>) -> Vec<[usize; 3]> {
    let s = surface(mask.data(), mask.dims());
    s.iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| mask.grid().coords(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(dims: [usize; 3], spacing: [f64; 3], on: &[[usize; 3]]) -> Volume<bool> {
        let g = Grid::new(dims, spacing).unwrap();
        let mut v = Volume::filled(g, false);
        for &c in on {
            v.set(c, true);
        }
        v
    }

    #[test]
    fn identical_is_zero() {
        let a = points([4, 4, 4], [1.0; 3], &[[1, 1, 1], [1, 2, 1], [2, 2, 2]]);
        assert_eq!(assd::<f64>(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_voxels() {
        let a = points([1, 1, 3], [1.0; 3], &[[0, 0, 0]]);
        let b = points([1, 1, 3], [1.0; 3], &[[0, 0, 2]]);
        assert_eq!(assd::<f64>(&a, &b).unwrap(), 2.0);
        let a = points([1, 1, 3], [0.75, 0.75, 1.65], &[[0, 0, 0]]);
        let b = points([1, 1, 3], [0.75, 0.75, 1.65], &[[0, 0, 2]]);
        assert!((assd::<f64>(&a, &b).unwrap() - 3.3).abs() < 1e-12);
        assert!((assd::<f32>(&a, &b).unwrap() - 3.3).abs() < 1e-5);
    }

    #[test]
    fn empty_is_undefined() {
        let a = points([2, 2, 2], [1.0; 3], &[[0, 0, 0]]);
        let e = points([2, 2, 2], [1.0; 3], &[]);
        assert!(matches!(assd::<f64>(&a, &e), Err(Error::Undefined(_))));
        assert!(assd::<f64>(&e, &a).is_err());
    }

    #[test]
    fn interior_voxels_are_not_surface() {
        let g = Grid::new([5, 5, 5], [1.0; 3]).unwrap();
        let m = Volume::from_fn(g, |c| c.iter().all(|&v| (1..=3).contains(&v)));
        assert_eq!(surface_voxels(&m).len(), 26);
        let full = Volume::filled(g, true);
        assert_eq!(surface_voxels(&full).len(), 125 - 27);
    }
}
