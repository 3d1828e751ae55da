//! Dense voxel volumes and the operations every other module builds on.
//!
//! Storage order is NIfTI order: axis 0 varies fastest, so the linear index
//! of `[x, y, z]` is `x + dims[0] * (y + dims[1] * z)`.

mod components;
mod edt;
mod morphology;
pub mod nifti;
mod orientation;
mod resample;

pub use components::{
    center_of_mass, connected_components, connected_components_where, ComponentSet, ComponentStats, Connectivity,
};
pub(crate) use components::{FACE_OFFSETS, FULL_OFFSETS};
pub use edt::squared_distance_to_features;
pub use morphology::{closing, dilate, erode, fill_holes, hole_voxels, BoundaryPolicy};
pub use orientation::{reorient, AxisCode, Orientation};
pub use resample::{resample, resample_to_dims, Interpolation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a volume.
pub trait Voxel: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    /// Label-like voxels (codes and ids) may only be resampled with
    /// nearest-neighbour interpolation.
    const IS_LABEL: bool;
    const NIFTI_DATATYPE: nifti::Datatype;

    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;

    fn is_foreground(self) -> bool {
        self != Self::default()
    }
}

macro_rules! int_voxel {
    ($t:ty, $dt:expr) => {
        impl Voxel for $t {
            const IS_LABEL: bool = true;
            const NIFTI_DATATYPE: nifti::Datatype = $dt;

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn from_f64(v: f64) -> Self {
                v.round() as $t
            }
        }
    };
}

int_voxel!(u8, nifti::Datatype::U8);
int_voxel!(u16, nifti::Datatype::U16);
int_voxel!(u32, nifti::Datatype::U32);
int_voxel!(i16, nifti::Datatype::I16);
int_voxel!(i32, nifti::Datatype::I32);

impl Voxel for bool {
    const IS_LABEL: bool = true;
    const NIFTI_DATATYPE: nifti::Datatype = nifti::Datatype::U8;

    fn to_f64(self) -> f64 {
        if self {
            1.0
        } else {
            0.0
        }
    }

    fn from_f64(v: f64) -> Self {
        v != 0.0
    }
}

impl Voxel for f32 {
    const IS_LABEL: bool = false;
    const NIFTI_DATATYPE: nifti::Datatype = nifti::Datatype::F32;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Voxel for f64 {
    const IS_LABEL: bool = false;
    const NIFTI_DATATYPE: nifti::Datatype = nifti::Datatype::F64;

    fn to_f64(self) -> f64 {
        self
    }

    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Geometry of a voxel grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Millimetres per voxel along each stored axis.
    pub spacing: [f64; 3],
    pub orientation: Orientation,
    /// RAS world position (mm) of the centre of voxel `[0, 0, 0]`.
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let grid = Grid {
            dims,
            spacing,
            orientation: Orientation::CANONICAL,
            origin: [0.0; 3],
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidVolume(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive and finite, got {:?}",
                self.spacing
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.dims[0], self.dims[0] * self.dims[1]]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Linear index of `c + delta`, or `None` when it leaves the grid.
    #[inline]
    pub fn offset(&self, c: [usize; 3], delta: [isize; 3]) -> Option<usize> {
        let mut n = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as isize + delta[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            n[a] = v as usize;
        }
        Some(self.index(n))
    }

    pub fn on_boundary(&self, c: [usize; 3]) -> bool {
        (0..3).any(|a| c[a] == 0 || c[a] + 1 == self.dims[a])
    }

    /// World (RAS, mm) position of a voxel centre.
    pub fn world(&self, c: [usize; 3]) -> [f64; 3] {
        let mut w = self.origin;
        for (a, code) in self.orientation.codes().iter().enumerate() {
            let d = code.direction();
            for k in 0..3 {
                w[k] += c[a] as f64 * self.spacing[a] * d[k];
            }
        }
        w
    }

    /// 4×4 voxel-to-world matrix, row major.
    pub fn affine(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (a, code) in self.orientation.codes().iter().enumerate() {
            let d = code.direction();
            for k in 0..3 {
                m[k][a] = self.spacing[a] * d[k];
            }
        }
        for k in 0..3 {
            m[k][3] = self.origin[k];
        }
        m[3][3] = 1.0;
        m
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self.orientation == other.orientation
            && (0..3).all(|a| (self.spacing[a] - other.spacing[a]).abs() <= 1e-6 * self.spacing[a])
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} {:?} {} vs {:?} {:?} {}",
                self.dims, self.spacing, self.orientation, other.dims, other.spacing, other.orientation
            )))
        }
    }
}

/// Inclusive axis-aligned voxel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl Bounds {
    pub fn point(c: [usize; 3]) -> Self {
        Bounds { min: c, max: c }
    }

    pub fn include(&mut self, c: [usize; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(c[a]);
            self.max[a] = self.max[a].max(c[a]);
        }
    }

    pub fn contains(&self, c: [f64; 3]) -> bool {
        (0..3).all(|a| c[a] >= self.min[a] as f64 && c[a] <= self.max[a] as f64)
    }

    /// Grow by `margin` voxels, clipped to `dims`.
    pub fn padded(&self, margin: usize, dims: [usize; 3]) -> Bounds {
        let mut b = *self;
        for a in 0..3 {
            b.min[a] = b.min[a].saturating_sub(margin);
            b.max[a] = (b.max[a] + margin).min(dims[a] - 1);
        }
        b
    }
}

/// A dense 3D volume of one voxel kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    grid: Grid,
    data: Vec<T>,
}

impl<T: Voxel> Volume<T> {
    /// Canonically oriented volume with its origin at zero.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<T>) -> Result<Self> {
        Self::with_grid(Grid::new(dims, spacing)?, data)
    }

    pub fn with_grid(grid: Grid, data: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(Error::InvalidVolume(format!(
                "buffer holds {} voxels, dims {:?} need {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        Ok(Volume { grid, data })
    }

    pub fn filled(grid: Grid, value: T) -> Self {
        Volume {
            data: vec![value; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(f([x, y, z]));
                }
            }
        }
        Volume { grid, data }
    }

    pub(crate) fn from_parts(grid: Grid, data: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), data.len());
        Volume { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn orientation(&self) -> Orientation {
        self.grid.orientation
    }

    pub fn origin(&self) -> [f64; 3] {
        self.grid.origin
    }

    pub fn set_orientation(&mut self, o: Orientation) {
        self.grid.orientation = o;
    }

    pub fn set_origin(&mut self, origin: [f64; 3]) {
        self.grid.origin = origin;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, c: [usize; 3]) -> T {
        self.data[self.grid.index(c)]
    }

    pub fn set(&mut self, c: [usize; 3], v: T) {
        let i = self.grid.index(c);
        self.data[i] = v;
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Binary mask of voxels satisfying `pred`.
    pub fn mask_where(&self, pred: impl Fn(T) -> bool) -> Volume<bool> {
        self.map(pred)
    }

    pub fn count_where(&self, pred: impl Fn(T) -> bool) -> usize {
        self.data.iter().filter(|&&v| pred(v)).count()
    }

    /// Copy of the window starting at `origin` (may be negative) with
    /// `size` voxels; positions outside the volume read as `fill`.
    pub fn extract(&self, origin: [i64; 3], size: [usize; 3], fill: T) -> Volume<T> {
        let mut grid = self.grid;
        grid.dims = size;
        grid.origin = shifted_origin(&self.grid, origin);
        let mut out = vec![fill; size.iter().product()];
        for z in 0..size[2] {
            let sz = origin[2] + z as i64;
            if sz < 0 || sz >= self.grid.dims[2] as i64 {
                continue;
            }
            for y in 0..size[1] {
                let sy = origin[1] + y as i64;
                if sy < 0 || sy >= self.grid.dims[1] as i64 {
                    continue;
                }
                let x0 = (-origin[0]).max(0) as usize;
                let x1 = ((self.grid.dims[0] as i64 - origin[0]).min(size[0] as i64)).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                let src = self
                    .grid
                    .index([(origin[0] + x0 as i64) as usize, sy as usize, sz as usize]);
                let dst = x0 + size[0] * (y + size[1] * z);
                out[dst..dst + (x1 - x0)].copy_from_slice(&self.data[src..src + (x1 - x0)]);
            }
        }
        Volume { grid, data: out }
    }

    pub fn foreground_bounds(&self) -> Option<Bounds> {
        let mut b: Option<Bounds> = None;
        for (i, v) in self.data.iter().enumerate() {
            if v.is_foreground() {
                let c = self.grid.coords(i);
                match &mut b {
                    Some(b) => b.include(c),
                    None => b = Some(Bounds::point(c)),
                }
            }
        }
        b
    }
}

fn shifted_origin(grid: &Grid, origin: [i64; 3]) -> [f64; 3] {
    let mut w = grid.origin;
    for (a, code) in grid.orientation.codes().iter().enumerate() {
        let d = code.direction();
        for k in 0..3 {
            w[k] += origin[a] as f64 * grid.spacing[a] * d[k];
        }
    }
    w
}

impl Volume<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}
