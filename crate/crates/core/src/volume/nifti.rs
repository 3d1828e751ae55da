//! Single-file NIfTI-1 (`.nii`, `.nii.gz`) reading and writing.
//!
//! Only 3D images are supported. Orientation is taken from the sform when
//! present, else the qform, else the pixdim diagonal (read as RAS).

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{AxisCode, Grid, Orientation, Volume, Voxel};
use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Datatype {
    U8,
    I8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::U8 => 2,
            Datatype::I16 => 4,
            Datatype::I32 => 8,
            Datatype::F32 => 16,
            Datatype::F64 => 64,
            Datatype::I8 => 256,
            Datatype::U16 => 512,
            Datatype::U32 => 768,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Datatype::U8,
            4 => Datatype::I16,
            8 => Datatype::I32,
            16 => Datatype::F32,
            64 => Datatype::F64,
            256 => Datatype::I8,
            512 => Datatype::U16,
            768 => Datatype::U32,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::U8 | Datatype::I8 => 1,
            Datatype::I16 | Datatype::U16 => 2,
            Datatype::I32 | Datatype::U32 | Datatype::F32 => 4,
            Datatype::F64 => 8,
        }
    }

    pub fn is_integer(self) -> bool {
        !matches!(self, Datatype::F32 | Datatype::F64)
    }
}

/// Header fields this crate reads or writes.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub dims: [usize; 3],
    pub datatype: Datatype,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
}

impl Header {
    /// Voxel-to-world matrix selected by the usual sform > qform > pixdim
    /// precedence.
    pub fn affine(&self) -> [[f64; 4]; 3] {
        if self.sform_code > 0 {
            return self.srow.map(|r| r.map(|v| v as f64));
        }
        if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(|v| v as f64);
            let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
            let rot = [
                [
                    a * a + b * b - c * c - d * d,
                    2.0 * (b * c - a * d),
                    2.0 * (b * d + a * c),
                ],
                [
                    2.0 * (b * c + a * d),
                    a * a + c * c - b * b - d * d,
                    2.0 * (c * d - a * b),
                ],
                [
                    2.0 * (b * d - a * c),
                    2.0 * (c * d + a * b),
                    a * a + d * d - b * b - c * c,
                ],
            ];
            let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
            let scale = [
                self.pixdim[1] as f64,
                self.pixdim[2] as f64,
                self.pixdim[3] as f64 * qfac,
            ];
            let mut m = [[0.0; 4]; 3];
            for r in 0..3 {
                for col in 0..3 {
                    m[r][col] = rot[r][col] * scale[col];
                }
                m[r][3] = self.qoffset[r] as f64;
            }
            return m;
        }
        let mut m = [[0.0; 4]; 3];
        for a in 0..3 {
            m[a][a] = self.pixdim[a + 1] as f64;
        }
        m
    }
}

/// Axis codes of the voxel axes of an affine: each column is assigned the
/// world axis of its largest component.
pub fn orientation_from_affine(m: &[[f64; 4]; 3]) -> Result<Orientation> {
    let mut codes = [AxisCode::R; 3];
    for (col, code) in codes.iter_mut().enumerate() {
        let column = [m[0][col], m[1][col], m[2][col]];
        let (w, v) = column
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(w, v)| (w, *v))
            .unwrap();
        if v == 0.0 {
            return Err(Error::Nifti(format!("affine column {col} is zero")));
        }
        *code = AxisCode::from_world(w, v > 0.0);
    }
    Orientation::new(codes).map_err(|_| Error::Nifti("affine maps two voxel axes onto one world axis".into()))
}

// f32 header values are widened through their shortest decimal form so that
// 1.65 written as f32 reads back as the f64 1.65.
fn widen(v: f32) -> f64 {
    format!("{v}").parse().unwrap_or(v as f64)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Nifti(format!("{}: corrupt gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<(Header, bool)> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Nifti(format!(
            "file has {} bytes, shorter than a header",
            bytes.len()
        )));
    }
    let big = if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        false
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        true
    } else {
        return Err(Error::Nifti("sizeof_hdr is not 348".into()));
    };
    if &bytes[344..348] != b"n+1\0" {
        return Err(Error::Nifti("not a single-file NIfTI-1 image (bad magic)".into()));
    }
    let i16_at = |o: usize| {
        if big {
            BigEndian::read_i16(&bytes[o..])
        } else {
            LittleEndian::read_i16(&bytes[o..])
        }
    };
    let f32_at = |o: usize| {
        if big {
            BigEndian::read_f32(&bytes[o..])
        } else {
            LittleEndian::read_f32(&bytes[o..])
        }
    };

    let dim: Vec<i16> = (0..8).map(|i| i16_at(40 + 2 * i)).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::Nifti(format!("dim[0] = {ndim} is invalid")));
    }
    for (i, &d) in dim.iter().enumerate().take(ndim as usize + 1).skip(4) {
        if d > 1 {
            return Err(Error::Nifti(format!("only 3D images are supported, dim[{i}] = {d}")));
        }
    }
    let mut dims = [1usize; 3];
    for a in 0..(ndim as usize).min(3) {
        let d = dim[a + 1];
        if d < 1 {
            return Err(Error::Nifti(format!("dim[{}] = {d} is not positive", a + 1)));
        }
        dims[a] = d as usize;
    }
    let code = i16_at(70);
    let datatype =
        Datatype::from_code(code).ok_or_else(|| Error::Nifti(format!("unsupported datatype code {code}")))?;
    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f32_at(76 + 4 * i);
    }
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = f32_at(280 + 16 * r + 4 * c);
        }
    }
    let header = Header {
        dims,
        datatype,
        pixdim,
        vox_offset: f32_at(108),
        scl_slope: f32_at(112),
        scl_inter: f32_at(116),
        qform_code: i16_at(252),
        sform_code: i16_at(254),
        quatern: [f32_at(256), f32_at(260), f32_at(264)],
        qoffset: [f32_at(268), f32_at(272), f32_at(276)],
        srow,
    };
    Ok((header, big))
}

/// Read a 3D image, converting voxels to `T`.
///
/// Label element types reject images whose (scaled) values are not
/// integers.
pub fn read_nifti<T: Voxel>(path: impl AsRef<Path>) -> Result<Volume<T>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Nifti(msg) => Error::Nifti(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode<T: Voxel>(bytes: &[u8]) -> Result<Volume<T>> {
    let (h, big) = parse_header(bytes)?;
    let offset = (h.vox_offset.max(HEADER_SIZE as f32)) as usize;
    let n: usize = h.dims.iter().product();
    let size = h.datatype.size();
    let end = offset + n * size;
    if bytes.len() < end {
        return Err(Error::Nifti(format!(
            "truncated: voxel data needs {end} bytes, file has {}",
            bytes.len()
        )));
    }
    let raw = &bytes[offset..end];
    let scaled = h.scl_slope != 0.0 && h.scl_slope.is_finite() && !(h.scl_slope == 1.0 && h.scl_inter == 0.0);
    let (slope, inter) = (h.scl_slope as f64, h.scl_inter as f64);
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let b = &raw[i * size..(i + 1) * size];
        let mut v = read_value(h.datatype, b, big);
        if scaled {
            v = v * slope + inter;
        }
        if T::IS_LABEL && v.fract() != 0.0 {
            return Err(Error::Nifti(format!("non-integer value {v} in a label image")));
        }
        data.push(T::from_f64(v));
    }

    let affine = h.affine();
    let orientation = orientation_from_affine(&affine)?;
    let mut spacing = [0.0; 3];
    for a in 0..3 {
        let p = h.pixdim[a + 1].abs();
        spacing[a] = if p > 0.0 {
            widen(p)
        } else {
            (0..3).map(|r| affine[r][a] * affine[r][a]).sum::<f64>().sqrt()
        };
    }
    let origin = [0, 1, 2].map(|r| widen(affine[r][3] as f32));
    let grid = Grid {
        dims: h.dims,
        spacing,
        orientation,
        origin,
    };
    Volume::with_grid(grid, data)
}

fn read_value(dt: Datatype, b: &[u8], big: bool) -> f64 {
    macro_rules! rd {
        ($f:ident) => {
            if big {
                BigEndian::$f(b) as f64
            } else {
                LittleEndian::$f(b) as f64
            }
        };
    }
    match dt {
        Datatype::U8 => b[0] as f64,
        Datatype::I8 => b[0] as i8 as f64,
        Datatype::I16 => rd!(read_i16),
        Datatype::U16 => rd!(read_u16),
        Datatype::I32 => rd!(read_i32),
        Datatype::U32 => rd!(read_u32),
        Datatype::F32 => rd!(read_f32),
        Datatype::F64 => rd!(read_f64),
    }
}

/// Little-endian encoding of `vol` with matching sform and qform.
pub fn encode<T: Voxel>(vol: &Volume<T>) -> Vec<u8> {
    let g = vol.grid();
    let dt = T::NIFTI_DATATYPE;
    let mut h = vec![0u8; DATA_OFFSET];
    LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[39] = 0; // dim_info
    let dim: [i16; 8] = [3, g.dims[0] as i16, g.dims[1] as i16, g.dims[2] as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[70..], dt.code());
    LittleEndian::write_i16(&mut h[72..], (dt.size() * 8) as i16);

    let affine = g.affine();
    let (quatern, qfac) = quaternion_of(g.orientation);
    let pixdim = [
        qfac,
        g.spacing[0] as f32,
        g.spacing[1] as f32,
        g.spacing[2] as f32,
        1.0,
        0.0,
        0.0,
        0.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut h[108..], DATA_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..], 1.0);
    LittleEndian::write_f32(&mut h[116..], 0.0);
    h[123] = 2 | 8; // xyzt_units: mm, s
    LittleEndian::write_i16(&mut h[252..], 1);
    LittleEndian::write_i16(&mut h[254..], 1);
    for (i, q) in quatern.iter().enumerate() {
        LittleEndian::write_f32(&mut h[256 + 4 * i..], *q);
    }
    for r in 0..3 {
        LittleEndian::write_f32(&mut h[268 + 4 * r..], affine[r][3] as f32);
        for c in 0..4 {
            LittleEndian::write_f32(&mut h[280 + 16 * r + 4 * c..], affine[r][c] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");

    let mut out = h;
    out.reserve(vol.len() * dt.size());
    for &v in vol.data() {
        write_value(&mut out, dt, v.to_f64());
    }
    out
}

fn write_value(out: &mut Vec<u8>, dt: Datatype, v: f64) {
    let mut buf = [0u8; 8];
    let n = dt.size();
    match dt {
        Datatype::U8 => buf[0] = v as u8,
        Datatype::I8 => buf[0] = v as i8 as u8,
        Datatype::I16 => LittleEndian::write_i16(&mut buf, v as i16),
        Datatype::U16 => LittleEndian::write_u16(&mut buf, v as u16),
        Datatype::I32 => LittleEndian::write_i32(&mut buf, v as i32),
        Datatype::U32 => LittleEndian::write_u32(&mut buf, v as u32),
        Datatype::F32 => LittleEndian::write_f32(&mut buf, v as f32),
        Datatype::F64 => LittleEndian::write_f64(&mut buf, v),
    }
    out.extend_from_slice(&buf[..n]);
}

// Quaternion (b, c, d) and qfac of the signed permutation matrix of an
// orientation.
fn quaternion_of(o: Orientation) -> ([f32; 3], f32) {
    let mut r = [[0.0f64; 3]; 3];
    for (col, code) in o.codes().iter().enumerate() {
        let d = code.direction();
        for row in 0..3 {
            r[row][col] = d[row];
        }
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let qfac = if det < 0.0 { -1.0 } else { 1.0 };
    if qfac < 0.0 {
        for row in r.iter_mut() {
            row[2] = -row[2];
        }
    }
    let trace = r[0][0] + r[1][1] + r[2][2];
    let (a, b, c, d);
    if trace > -0.5 {
        let s = (trace + 1.0).sqrt() * 2.0;
        a = 0.25 * s;
        b = (r[2][1] - r[1][2]) / s;
        c = (r[0][2] - r[2][0]) / s;
        d = (r[1][0] - r[0][1]) / s;
    } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
        let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
        a = (r[2][1] - r[1][2]) / s;
        b = 0.25 * s;
        c = (r[0][1] + r[1][0]) / s;
        d = (r[0][2] + r[2][0]) / s;
    } else if r[1][1] > r[2][2] {
        let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
        a = (r[0][2] - r[2][0]) / s;
        b = (r[0][1] + r[1][0]) / s;
        c = 0.25 * s;
        d = (r[1][2] + r[2][1]) / s;
    } else {
        let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
        a = (r[1][0] - r[0][1]) / s;
        b = (r[0][2] + r[2][0]) / s;
        c = (r[1][2] + r[2][1]) / s;
        d = 0.25 * s;
    }
    // NIfTI stores only b, c, d with a >= 0.
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    ([(b * sign) as f32, (c * sign) as f32, (d * sign) as f32], qfac as f32)
}

/// Write `vol`; a `.gz` suffix selects gzip compression.
pub fn write_nifti<T: Voxel>(vol: &Volume<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(vol);
    let gz = path.extension().is_some_and(|e| e == "gz");
    let payload = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    std::fs::write(path, payload).map_err(|e| Error::io(path, e))
}
