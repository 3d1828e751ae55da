//! Binary morphology with cubic structuring elements, and hole filling.

use super::components::FACE_OFFSETS;
use super::{Bounds, Grid, Volume};

/// How voxels outside the volume are treated by erosion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    Background,
    Foreground,
}

/// Erosion by a `(2r+1)³` cube.
pub fn erode(mask: &Volume<bool>, radius: usize, boundary: BoundaryPolicy) -> Volume<bool> {
    separable(mask, radius, true, boundary == BoundaryPolicy::Foreground)
}

/// Dilation by a `(2r+1)³` cube.
pub fn dilate(mask: &Volume<bool>, radius: usize) -> Volume<bool> {
    separable(mask, radius, false, false)
}

/// Dilation followed by erosion, computed on a copy padded by `radius`
/// background voxels so the result always contains `mask` and nothing
/// grows towards the volume edge.
pub fn closing(mask: &Volume<bool>, radius: usize) -> Volume<bool> {
    if radius == 0 {
        return mask.clone();
    }
    let r = radius as i64;
    let grid = *mask.grid();
    let size = grid.dims.map(|d| d + 2 * radius);
    let padded = mask.extract([-r; 3], size, false);
    let closed = erode(&dilate(&padded, radius), radius, BoundaryPolicy::Background);
    let mut out = closed.extract([r; 3], grid.dims, false);
    out.grid = grid;
    out
}

// One pass per axis; each output voxel looks at the 2r+1 window along the
// axis and keeps either "all set" (erosion) or "any set" (dilation).
// Dilation never sees outside voxels as set.
fn separable(mask: &Volume<bool>, radius: usize, erosion: bool, outside: bool) -> Volume<bool> {
    if radius == 0 {
        return mask.clone();
    }
    let grid = *mask.grid();
    let mut cur = mask.data().to_vec();
    let mut next = vec![false; cur.len()];
    let strides = grid.strides();
    let r = radius as isize;
    for axis in 0..3 {
        let n = grid.dims[axis];
        let stride = strides[axis];
        let mut prefix = vec![0usize; n + 1];
        for start in line_starts(&grid, axis) {
            for i in 0..n {
                prefix[i + 1] = prefix[i] + cur[start + i * stride] as usize;
            }
            for i in 0..n as isize {
                let lo = i - r;
                let hi = i + r;
                let clo = lo.max(0) as usize;
                let chi = hi.min(n as isize - 1) as usize;
                let set = prefix[chi + 1] - prefix[clo];
                let clipped = lo < 0 || hi > n as isize - 1;
                let window_len = chi + 1 - clo;
                next[start + i as usize * stride] = if erosion {
                    set == window_len && (!clipped || outside)
                } else {
                    set > 0
                };
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Volume::from_parts(grid, cur)
}

fn line_starts(grid: &Grid, axis: usize) -> Vec<usize> {
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = Vec::with_capacity(grid.dims[a] * grid.dims[b]);
    for j in 0..grid.dims[b] {
        for i in 0..grid.dims[a] {
            let mut c = [0usize; 3];
            c[a] = i;
            c[b] = j;
            out.push(grid.index(c));
        }
    }
    out
}

/// Background voxels that are not 6-connected to the volume boundary become
/// foreground.
pub fn fill_holes(mask: &Volume<bool>) -> Volume<bool> {
    let grid = *mask.grid();
    let data = mask.data();
    let full = Bounds {
        min: [0; 3],
        max: grid.dims.map(|d| d - 1),
    };
    let mut out = data.to_vec();
    for i in hole_voxels(&grid, full, |i| data[i]) {
        out[i] = true;
    }
    Volume::from_parts(grid, out)
}

/// Linear indices of the holes of the set `is_fg`, searched inside `region`.
///
/// `region` must contain the bounding box of the set grown by one voxel
/// (clipped to the grid); background reachable from its faces is outside.
pub fn hole_voxels(grid: &Grid, region: Bounds, is_fg: impl Fn(usize) -> bool) -> Vec<usize> {
    let size = [0, 1, 2].map(|a| region.max[a] - region.min[a] + 1);
    let local =
        |c: [usize; 3]| (c[0] - region.min[0]) + size[0] * ((c[1] - region.min[1]) + size[1] * (c[2] - region.min[2]));
    let mut outside = vec![false; size.iter().product()];
    let mut stack = Vec::new();
    for z in region.min[2]..=region.max[2] {
        for y in region.min[1]..=region.max[1] {
            for x in region.min[0]..=region.max[0] {
                let c = [x, y, z];
                let on_face = (0..3).any(|a| c[a] == region.min[a] || c[a] == region.max[a]);
                if on_face && !is_fg(grid.index(c)) {
                    let l = local(c);
                    if !outside[l] {
                        outside[l] = true;
                        stack.push(c);
                    }
                }
            }
        }
    }
    while let Some(c) = stack.pop() {
        for d in &FACE_OFFSETS {
            let mut n = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let v = c[a] as isize + d[a];
                if v < region.min[a] as isize || v > region.max[a] as isize {
                    inside = false;
                    break;
                }
                n[a] = v as usize;
            }
            if !inside {
                continue;
            }
            let l = local(n);
            if !outside[l] && !is_fg(grid.index(n)) {
                outside[l] = true;
                stack.push(n);
            }
        }
    }
    let mut holes = Vec::new();
    for z in region.min[2]..=region.max[2] {
        for y in region.min[1]..=region.max[1] {
            for x in region.min[0]..=region.max[0] {
                let c = [x, y, z];
                let g = grid.index(c);
                if !outside[local(c)] && !is_fg(g) {
                    holes.push(g);
                }
            }
        }
    }
    holes
}
