//! Anatomical axis codes and reorientation.
//!
//! A code names the direction a stored axis *points to*: index growth along
//! an axis coded `P` moves the voxel towards posterior. World space follows
//! the NIfTI RAS+ convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Grid, Volume, Voxel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisCode {
    L,
    R,
    A,
    P,
    S,
    I,
}

impl AxisCode {
    /// World axis index in RAS space: 0 = left/right, 1 = posterior/anterior,
    /// 2 = inferior/superior.
    pub fn world_axis(self) -> usize {
        match self {
            AxisCode::L | AxisCode::R => 0,
            AxisCode::P | AxisCode::A => 1,
            AxisCode::I | AxisCode::S => 2,
        }
    }

    /// +1 when the code points along the positive RAS direction.
    pub fn sign(self) -> f64 {
        match self {
            AxisCode::R | AxisCode::A | AxisCode::S => 1.0,
            _ => -1.0,
        }
    }

    pub fn from_world(axis: usize, positive: bool) -> AxisCode {
        match (axis, positive) {
            (0, true) => AxisCode::R,
            (0, false) => AxisCode::L,
            (1, true) => AxisCode::A,
            (1, false) => AxisCode::P,
            (_, true) => AxisCode::S,
            (_, false) => AxisCode::I,
        }
    }

    /// Unit vector of this direction in RAS world coordinates.
    pub fn direction(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.world_axis()] = self.sign();
        v
    }

    fn letter(self) -> char {
        match self {
            AxisCode::L => 'L',
            AxisCode::R => 'R',
            AxisCode::A => 'A',
            AxisCode::P => 'P',
            AxisCode::S => 'S',
            AxisCode::I => 'I',
        }
    }

    fn from_letter(c: char) -> Option<AxisCode> {
        Some(match c.to_ascii_uppercase() {
            'L' => AxisCode::L,
            'R' => AxisCode::R,
            'A' => AxisCode::A,
            'P' => AxisCode::P,
            'S' => AxisCode::S,
            'I' => AxisCode::I,
            _ => return None,
        })
    }
}

/// Axis codes of the three stored axes, e.g. `PIR`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Orientation([AxisCode; 3]);

impl Orientation {
    /// Axis 0 anterior→posterior, axis 1 superior→inferior, axis 2 left→right.
    pub const CANONICAL: Orientation = Orientation([AxisCode::P, AxisCode::I, AxisCode::R]);

    pub fn new(codes: [AxisCode; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for c in codes {
            let w = c.world_axis();
            if seen[w] {
                return Err(Error::InvalidOrientation(format!(
                    "{} uses an anatomical axis twice",
                    Orientation(codes)
                )));
            }
            seen[w] = true;
        }
        Ok(Orientation(codes))
    }

    pub fn codes(&self) -> [AxisCode; 3] {
        self.0
    }

    pub fn is_canonical(&self) -> bool {
        *self == Self::CANONICAL
    }

    /// For each axis of `self`, the axis of `other` that shares its
    /// anatomical axis and whether the two point in opposite directions.
    fn mapping_from(&self, other: &Orientation) -> [(usize, bool); 3] {
        let mut out = [(0, false); 3];
        for (t, code) in self.0.iter().enumerate() {
            let s = other
                .0
                .iter()
                .position(|c| c.world_axis() == code.world_axis())
                .expect("validated orientations cover every anatomical axis");
            out[t] = (s, other.0[s] != *code);
        }
        out
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Self::CANONICAL
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            write!(f, "{}", c.letter())?;
        }
        Ok(())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s.trim().chars().collect();
        if letters.len() != 3 {
            return Err(Error::InvalidOrientation(format!("expected 3 axis codes, got {s:?}")));
        }
        let mut codes = [AxisCode::P; 3];
        for (slot, c) in codes.iter_mut().zip(letters) {
            *slot = AxisCode::from_letter(c)
                .ok_or_else(|| Error::InvalidOrientation(format!("unknown axis code {c:?} in {s:?}")))?;
        }
        Orientation::new(codes)
    }
}

impl TryFrom<String> for Orientation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Orientation> for String {
    fn from(o: Orientation) -> String {
        o.to_string()
    }
}

/// Permute and flip `vol` so that its axes follow `target`.
///
/// Pure index shuffling: the voxel multiset is unchanged and the world
/// position of every voxel is preserved.
pub fn reorient<T: Voxel>(vol: &Volume<T>, target: Orientation) -> Volume<T> {
    let src = vol.grid();
    if src.orientation == target {
        return vol.clone();
    }
    let map = target.mapping_from(&src.orientation);
    let mut dims = [0usize; 3];
    let mut spacing = [0.0; 3];
    for t in 0..3 {
        dims[t] = src.dims[map[t].0];
        spacing[t] = src.spacing[map[t].0];
    }

    // World position of the new first voxel.
    let mut first = [0usize; 3];
    for &(s, flip) in &map {
        if flip {
            first[s] = src.dims[s] - 1;
        }
    }
    let origin = src.world(first);

    // Source linear strides of each target axis, signed for flips.
    let src_strides = src.strides();
    let mut base = 0isize;
    let mut step = [0isize; 3];
    for t in 0..3 {
        let (s, flip) = map[t];
        let stride = src_strides[s] as isize;
        if flip {
            base += (src.dims[s] as isize - 1) * stride;
            step[t] = -stride;
        } else {
            step[t] = stride;
        }
    }

    let src_data = vol.data();
    let mut data = Vec::with_capacity(vol.len());
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let row = base + z as isize * step[2] + y as isize * step[1];
            for x in 0..dims[0] {
                data.push(src_data[(row + x as isize * step[0]) as usize]);
            }
        }
    }
    let grid = Grid {
        dims,
        spacing,
        orientation: target,
        origin,
    };
    Volume::from_parts(grid, data)
}
