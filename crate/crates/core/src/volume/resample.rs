//! Resampling onto a new voxel spacing.
//!
//! Grids are aligned at the physical corner of the volume: output voxel `o`
//! along an axis has its centre at `(o + 0.5)·new_spacing` mm from the corner,
//! which is continuous input index `(o + 0.5)·new/old − 0.5`.

use serde::{Deserialize, Serialize};

use super::{Grid, Volume, Voxel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Trilinear,
}

/// Resample to `new_spacing`; output dims are `round(dims·spacing/new)`,
/// at least 1.
pub fn resample<T: Voxel>(vol: &Volume<T>, new_spacing: [f64; 3], mode: Interpolation) -> Result<Volume<T>> {
    let g = vol.grid();
    let mut dims = [0usize; 3];
    for a in 0..3 {
        if !(new_spacing[a] > 0.0) || !new_spacing[a].is_finite() {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive, got {new_spacing:?}"
            )));
        }
        dims[a] = ((g.dims[a] as f64 * g.spacing[a] / new_spacing[a]).round() as usize).max(1);
    }
    resample_to_dims(vol, new_spacing, dims, mode)
}

/// Resample onto an explicit output grid sharing the input's corner.
pub fn resample_to_dims<T: Voxel>(
    vol: &Volume<T>,
    new_spacing: [f64; 3],
    dims: [usize; 3],
    mode: Interpolation,
) -> Result<Volume<T>> {
    if mode == Interpolation::Trilinear && T::IS_LABEL {
        return Err(Error::InterpolationOnLabels);
    }
    let src = *vol.grid();
    let mut out_grid = Grid {
        dims,
        spacing: new_spacing,
        orientation: src.orientation,
        origin: src.origin,
    };
    out_grid.validate()?;
    if dims == src.dims && new_spacing == src.spacing {
        return Ok(vol.clone());
    }
    // Move the origin from the old first-voxel centre to the new one.
    for (a, code) in src.orientation.codes().iter().enumerate() {
        let d = code.direction();
        let shift = 0.5 * (new_spacing[a] - src.spacing[a]);
        for k in 0..3 {
            out_grid.origin[k] += shift * d[k];
        }
    }

    let positions: [Vec<f64>; 3] = [0, 1, 2].map(|a| {
        (0..dims[a])
            .map(|o| (o as f64 + 0.5) * new_spacing[a] / src.spacing[a] - 0.5)
            .collect()
    });
    let data = vol.data();
    let strides = src.strides();
    let out = match mode {
        Interpolation::Nearest => {
            let idx: [Vec<usize>; 3] = [0, 1, 2].map(|a| {
                positions[a]
                    .iter()
                    .map(|&x| nearest_index(x, src.dims[a]) * strides[a])
                    .collect()
            });
            let mut out = Vec::with_capacity(out_grid.len());
            for &z in &idx[2] {
                for &y in &idx[1] {
                    for &x in &idx[0] {
                        out.push(data[x + y + z]);
                    }
                }
            }
            out
        }
        Interpolation::Trilinear => {
            let taps: [Vec<(usize, usize, f64)>; 3] = [0, 1, 2].map(|a| {
                positions[a]
                    .iter()
                    .map(|&x| {
                        let (i0, i1, w) = linear_taps(x, src.dims[a]);
                        (i0 * strides[a], i1 * strides[a], w)
                    })
                    .collect()
            });
            let mut out = Vec::with_capacity(out_grid.len());
            for &(z0, z1, wz) in &taps[2] {
                for &(y0, y1, wy) in &taps[1] {
                    for &(x0, x1, wx) in &taps[0] {
                        let at = |x: usize, y: usize, z: usize| data[x + y + z].to_f64();
                        let c00 = at(x0, y0, z0) * (1.0 - wx) + at(x1, y0, z0) * wx;
                        let c10 = at(x0, y1, z0) * (1.0 - wx) + at(x1, y1, z0) * wx;
                        let c01 = at(x0, y0, z1) * (1.0 - wx) + at(x1, y0, z1) * wx;
                        let c11 = at(x0, y1, z1) * (1.0 - wx) + at(x1, y1, z1) * wx;
                        let c0 = c00 * (1.0 - wy) + c10 * wy;
                        let c1 = c01 * (1.0 - wy) + c11 * wy;
                        out.push(T::from_f64(c0 * (1.0 - wz) + c1 * wz));
                    }
                }
            }
            out
        }
    };
    Ok(Volume::from_parts(out_grid, out))
}

// Ties between two centres go to the higher index: the half-open input cell
// [i, i+1) mm containing the sample point wins.
fn nearest_index(x: f64, n: usize) -> usize {
    let i = (x + 0.5 + 1e-9).floor();
    i.clamp(0.0, (n - 1) as f64) as usize
}

fn linear_taps(x: f64, n: usize) -> (usize, usize, f64) {
    let x = x.clamp(0.0, (n - 1) as f64);
    let i0 = x.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, x - i0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(dims: [usize; 3], spacing: [f64; 3]) -> Volume<u16> {
        let g = Grid::new(dims, spacing).unwrap();
        Volume::from_fn(g, |c| (1 + c[0] + 4 * c[1] + 16 * c[2]) as u16)
    }

    #[test]
    fn identity_spacing() {
        let v = labels([4, 3, 2], [1.0, 2.0, 3.0]);
        assert_eq!(resample(&v, [1.0, 2.0, 3.0], Interpolation::Nearest).unwrap(), v);
    }

    #[test]
    fn constant_stays_constant() {
        let g = Grid::new([5, 4, 3], [1.0; 3]).unwrap();
        let v = Volume::filled(g, 2.5f32);
        for sp in [[0.7, 1.3, 2.0], [3.0, 0.5, 1.1]] {
            let r = resample(&v, sp, Interpolation::Trilinear).unwrap();
            assert!(r.data().iter().all(|&x| (x - 2.5).abs() < 1e-6));
            let n = resample(&v, sp, Interpolation::Nearest).unwrap();
            assert!(n.data().iter().all(|&x| x == 2.5));
        }
    }

    #[test]
    fn trilinear_rejected_on_labels() {
        let v = labels([2, 2, 2], [1.0; 3]);
        assert!(matches!(
            resample(&v, [0.5; 3], Interpolation::Trilinear),
            Err(Error::InterpolationOnLabels)
        ));
    }

    // Brute force: for each output voxel centre, scan every input centre and
    // keep the closest; ties prefer the larger index per axis.
    fn brute_nearest(v: &Volume<u16>, new_spacing: [f64; 3], dims: [usize; 3]) -> Vec<u16> {
        let g = v.grid();
        let mut out = Vec::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = [x, y, z];
                    let mut best = (f64::INFINITY, [0usize; 3]);
                    for i in 0..v.len() {
                        let c = g.coords(i);
                        let d: f64 = (0..3)
                            .map(|a| {
                                let t = (p[a] as f64 + 0.5) * new_spacing[a] - (c[a] as f64 + 0.5) * g.spacing[a];
                                t * t
                            })
                            .sum();
                        if d < best.0 - 1e-12 || ((d - best.0).abs() <= 1e-12 && c > best.1) {
                            best = (d, c);
                        }
                    }
                    out.push(v.get(best.1));
                }
            }
        }
        out
    }

    #[test]
    fn downsample_matches_brute_force() {
        let v = labels([4, 4, 4], [1.0; 3]);
        let r = resample(&v, [2.0; 3], Interpolation::Nearest).unwrap();
        assert_eq!(r.dims(), [2, 2, 2]);
        assert_eq!(r.data(), brute_nearest(&v, [2.0; 3], [2, 2, 2]).as_slice());
        // Label set never grows.
        assert!(r.data().iter().all(|x| v.data().contains(x)));
    }

    #[test]
    fn upsample_matches_brute_force() {
        let v = labels([3, 2, 2], [1.5, 1.0, 2.0]);
        let r = resample(&v, [0.75, 0.6, 1.65], Interpolation::Nearest).unwrap();
        assert_eq!(r.data(), brute_nearest(&v, [0.75, 0.6, 1.65], r.dims()).as_slice());
    }

    #[test]
    fn physical_extent_preserved() {
        let v = labels([7, 5, 3], [0.9, 1.1, 1.65]);
        let sp = [0.75, 0.75, 1.0];
        let r = resample(&v, sp, Interpolation::Nearest).unwrap();
        for a in 0..3 {
            let before = v.dims()[a] as f64 * v.spacing()[a];
            let after = r.dims()[a] as f64 * sp[a];
            assert!((before - after).abs() <= sp[a]);
        }
    }
}
