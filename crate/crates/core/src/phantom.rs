//! Procedural spine phantoms and the corruption models behind the oracle
//! predictors.
//!
//! Geometry is built in millimetres in the canonical orientation: axis 0
//! runs anterior to posterior, axis 1 superior to inferior, axis 2 left to
//! right. Vertebra `k` occupies one pitch starting at
//! `top_margin + (k-1)·pitch`: a corpus of height `pitch - disc` followed by
//! its disc.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assembly::Cutout;
use crate::error::{Error, Result};
use crate::labels::{self, SemanticLabel, ENDPLATE_BASE, IVD_BASE};
use crate::pipeline::{CutoutPredictor, PatchPrediction, SemanticPredictor};
use crate::volume::{erode, BoundaryPolicy, Grid, Volume, FULL_OFFSETS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub n_vertebrae: u32,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Corpus semi-axes (anterior-posterior, left-right), mm.
    pub corpus_radii_mm: [f64; 2],
    pub disc_thickness_mm: f64,
    pub pitch_mm: f64,
    pub canal_radius_mm: f64,
    pub cord_radius_mm: f64,
    /// Tube radius of the arch, also the half thickness of the pedicles.
    pub arch_tube_mm: f64,
    pub spinous_length_mm: f64,
    pub articular_length_mm: f64,
    pub costal_length_mm: f64,
    /// Half width of the spinous, articular and costal boxes.
    pub process_half_width_mm: f64,
    pub top_margin_mm: f64,
    pub sacrum_height_mm: f64,
    /// Amplitude of the sagittal curve of the spine, mm.
    pub curvature_mm: f64,
    /// Relative per-vertebra variation of the corpus radii.
    pub size_variation: f64,
    pub include_sacrum: bool,
    /// 1-based pairs `(k, k+1)` whose disc is replaced by bone.
    pub fuse_pairs: Vec<(u32, u32)>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            n_vertebrae: 7,
            dims: [256, 384, 64],
            spacing: [0.75, 0.75, 1.65],
            corpus_radii_mm: [14.0, 18.0],
            disc_thickness_mm: 6.0,
            pitch_mm: 20.0,
            canal_radius_mm: 7.0,
            cord_radius_mm: 4.0,
            arch_tube_mm: 3.0,
            spinous_length_mm: 22.0,
            articular_length_mm: 5.0,
            costal_length_mm: 16.0,
            process_half_width_mm: 2.5,
            top_margin_mm: 12.0,
            sacrum_height_mm: 24.0,
            curvature_mm: 3.0,
            size_variation: 0.1,
            include_sacrum: true,
            fuse_pairs: Vec::new(),
            seed: 0,
        }
    }
}

/// Ground truth of one phantom.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub intensity: Volume<f32>,
    pub semantic: Volume<u16>,
    pub instance: Volume<u16>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(3..=24).contains(&self.n_vertebrae) {
            return bad(format!("n_vertebrae must be in 3..=24, got {}", self.n_vertebrae));
        }
        Grid::new(self.dims, self.spacing)?;
        let positive = [
            ("corpus_radii_mm[0]", self.corpus_radii_mm[0]),
            ("corpus_radii_mm[1]", self.corpus_radii_mm[1]),
            ("disc_thickness_mm", self.disc_thickness_mm),
            ("pitch_mm", self.pitch_mm),
            ("canal_radius_mm", self.canal_radius_mm),
            ("cord_radius_mm", self.cord_radius_mm),
            ("arch_tube_mm", self.arch_tube_mm),
            ("spinous_length_mm", self.spinous_length_mm),
            ("articular_length_mm", self.articular_length_mm),
            ("costal_length_mm", self.costal_length_mm),
            ("process_half_width_mm", self.process_half_width_mm),
            ("top_margin_mm", self.top_margin_mm),
            ("sacrum_height_mm", self.sacrum_height_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.curvature_mm >= 0.0) || !(0.0..0.5).contains(&self.size_variation) {
            return bad("curvature_mm must be >= 0 and size_variation in [0, 0.5)".into());
        }
        if self.disc_thickness_mm >= self.pitch_mm {
            return bad("disc thickness must be smaller than the pitch".into());
        }
        if self.cord_radius_mm >= self.canal_radius_mm {
            return bad("cord radius must be smaller than the canal radius".into());
        }
        let mut used = std::collections::HashSet::new();
        for &(a, b) in &self.fuse_pairs {
            if b != a + 1 || a < 1 || b > self.n_vertebrae {
                return bad(format!("fuse pair ({a}, {b}) is not two adjacent vertebrae"));
            }
            if !used.insert(a) || !used.insert(b) {
                return bad(format!("vertebra of fuse pair ({a}, {b}) is fused twice"));
            }
        }
        Ok(())
    }

    fn fused_below(&self, k: u32) -> bool {
        self.fuse_pairs.iter().any(|&(a, _)| a == k)
    }
}

#[derive(Clone, Copy, Debug)]
enum Row {
    Empty,
    /// Corpus of vertebra `k` (1-based); `endplate` holds the instance id
    /// when this row is an endplate layer.
    Corpus {
        k: u32,
        endplate: Option<u16>,
    },
    Disc {
        k: u32,
    },
    /// Bone replacing the disc of a fused pair, owned by `owner`.
    Bridge {
        k: u32,
        owner: u32,
    },
    Sacrum {
        t: f64,
    },
}

struct Layout<'a> {
    spec: &'a PhantomSpec,
    rows: Vec<Row>,
    ap0: f64,
    lr0: f64,
    phase: f64,
    scale: Vec<f64>,
    a_max: f64,
    /// Corpus centre along axis 1, per vertebra, mm.
    yc: Vec<f64>,
    canal_end: f64,
}

impl Layout<'_> {
    fn offset(&self, y: f64) -> f64 {
        self.spec.curvature_mm * (2.0 * PI * y / 250.0 + self.phase).sin()
    }

    fn corpus_half_height(&self) -> f64 {
        0.5 * (self.spec.pitch_mm - self.spec.disc_thickness_mm)
    }

    fn canal_center(&self, y: f64) -> f64 {
        self.ap0 + self.offset(y) + self.a_max + 0.5 + self.spec.canal_radius_mm
    }

    fn arch_radius(&self) -> f64 {
        self.spec.canal_radius_mm + self.spec.arch_tube_mm + 0.5
    }

    fn radii(&self, k: u32) -> [f64; 2] {
        let s = self.scale[k as usize - 1];
        [self.spec.corpus_radii_mm[0] * s, self.spec.corpus_radii_mm[1] * s]
    }

    // Cross-section radii of the corpus ends, used for discs and bridges.
    fn end_radii(&self, k: u32) -> [f64; 2] {
        let next = (k + 1).min(self.spec.n_vertebrae);
        let (a, b) = (self.radii(k), self.radii(next));
        let s = 0.75f64.sqrt();
        [a[0].min(b[0]) * s, a[1].min(b[1]) * s]
    }

    fn row_label(&self, row: Row, x: f64, y: f64, z: f64) -> Option<(u16, u16)> {
        let inside = |r: [f64; 2]| {
            let dx = (x - self.ap0 - self.offset(y)) / r[0];
            let dz = (z - self.lr0) / r[1];
            dx * dx + dz * dz <= 1.0
        };
        match row {
            Row::Empty => None,
            Row::Corpus { k, endplate } => {
                let h = self.corpus_half_height();
                let t = (y - self.yc[k as usize - 1]) / (2.0 * h);
                let s = (1.0 - t * t).max(0.0).sqrt();
                let r = self.radii(k);
                inside([r[0] * s, r[1] * s]).then_some(match endplate {
                    Some(id) => (labels::ENDPLATE, id),
                    None => (labels::CORPUS, k as u16),
                })
            }
            Row::Disc { k } => inside(self.end_radii(k)).then_some((labels::IVD, (IVD_BASE + k) as u16)),
            Row::Bridge { k, owner } => inside(self.end_radii(k)).then_some((labels::CORPUS, owner as u16)),
            Row::Sacrum { t } => {
                let r = self.end_radii(self.spec.n_vertebrae);
                let f = 1.0 - 0.5 * t;
                inside([r[0] * f, r[1] * f]).then_some((labels::SACRUM, 0))
            }
        }
    }

    fn canal_label(&self, x: f64, y: f64, z: f64) -> Option<u16> {
        if y > self.canal_end {
            return None;
        }
        let dx = x - self.canal_center(y);
        let dz = z - self.lr0;
        let d2 = dx * dx + dz * dz;
        if d2 <= self.spec.cord_radius_mm.powi(2) {
            Some(labels::SPINAL_CORD)
        } else if d2 <= self.spec.canal_radius_mm.powi(2) {
            Some(labels::SPINAL_CANAL)
        } else {
            None
        }
    }

    fn part_label(&self, k: u32, x: f64, y: f64, z: f64) -> Option<u16> {
        let sp = self.spec;
        let yc = self.yc[k as usize - 1];
        let dx = x - self.canal_center(yc);
        let dy = y - yc;
        let dz = z - self.lr0;
        let tube = sp.arch_tube_mm;
        let r = self.arch_radius();
        let w = sp.process_half_width_mm;
        let left = dz < 0.0;
        let adz = dz.abs();
        if dx >= 0.0 {
            let rho = (dx * dx + dz * dz).sqrt();
            if (rho - r).powi(2) + dy * dy <= tube * tube {
                return Some(SemanticLabel::Arcus.code());
            }
        }
        let pedicle_front = -(self.a_max + 0.5 + sp.canal_radius_mm);
        if (pedicle_front..=0.0).contains(&dx) && (adz - r).abs() <= 0.8 * tube && dy.abs() <= tube {
            return Some(SemanticLabel::Arcus.code());
        }
        if (r + 0.5 * tube..=r + tube + sp.spinous_length_mm).contains(&dx) && adz <= w && dy.abs() <= 0.8 * tube {
            return Some(SemanticLabel::SpinousProcess.code());
        }
        let diag = r * std::f64::consts::FRAC_1_SQRT_2;
        if (dx - diag).abs() <= 0.8 * w && (adz - diag).abs() <= 0.8 * w {
            if (-tube - sp.articular_length_mm..=-tube + 1.0).contains(&dy) {
                return Some(if left { 6 } else { 7 });
            }
            if (tube - 1.0..=tube + sp.articular_length_mm).contains(&dy) {
                return Some(if left { 4 } else { 5 });
            }
        }
        if dx.abs() <= w && (r + tube - 1.0..=r + tube + sp.costal_length_mm).contains(&adz) && dy.abs() <= w {
            return Some(if left { 8 } else { 9 });
        }
        None
    }

    fn parts_reach(&self) -> f64 {
        let sp = self.spec;
        (sp.arch_tube_mm + sp.articular_length_mm).max(sp.process_half_width_mm)
    }
}

fn plan<'a>(spec: &'a PhantomSpec, rng: &mut ChaCha8Rng) -> Result<Layout<'a>> {
    let extent = [0, 1, 2].map(|a| spec.dims[a] as f64 * spec.spacing[a]);
    let phase = rng.random_range(0.0..2.0 * PI);
    let scale: Vec<f64> = (0..spec.n_vertebrae)
        .map(|_| 1.0 + spec.size_variation * rng.random_range(-1.0..=1.0))
        .collect();
    let a_max = spec.corpus_radii_mm[0] * (1.0 + spec.size_variation);
    let b_max = spec.corpus_radii_mm[1] * (1.0 + spec.size_variation);
    let arch_r = spec.canal_radius_mm + spec.arch_tube_mm + 0.5;
    let reach_back = a_max + 0.5 + spec.canal_radius_mm + arch_r + spec.arch_tube_mm + spec.spinous_length_mm;
    let span_ap = a_max + reach_back + 2.0 * spec.curvature_mm;
    let half_lr = b_max.max(arch_r + spec.arch_tube_mm + spec.costal_length_mm);
    let n = spec.n_vertebrae as f64;
    let h = 0.5 * (spec.pitch_mm - spec.disc_thickness_mm);
    let parts = (spec.arch_tube_mm + spec.articular_length_mm).max(spec.process_half_width_mm);
    let bottom = if spec.include_sacrum {
        spec.top_margin_mm + n * spec.pitch_mm + spec.sacrum_height_mm
    } else {
        spec.top_margin_mm + n * spec.pitch_mm - spec.disc_thickness_mm
    }
    .max(spec.top_margin_mm + (n - 1.0) * spec.pitch_mm + h + parts);
    if span_ap > extent[0] - 2.0
        || 2.0 * half_lr > extent[2] - 1.0
        || bottom > extent[1] - 1.0
        || spec.top_margin_mm + h < parts
    {
        return Err(Error::InvalidSpec(format!(
            "{} vertebrae need about {:.1} x {:.1} x {:.1} mm, the volume is {:.1} x {:.1} x {:.1} mm",
            spec.n_vertebrae,
            span_ap,
            bottom,
            2.0 * half_lr,
            extent[0],
            extent[1],
            extent[2]
        )));
    }
    let ap0 = 0.5 * (extent[0] - reach_back + a_max);
    let yc: Vec<f64> = (0..spec.n_vertebrae)
        .map(|k| spec.top_margin_mm + k as f64 * spec.pitch_mm + h)
        .collect();

    let sy = spec.spacing[1];
    let mut rows = vec![Row::Empty; spec.dims[1]];
    let mut corpus_rows: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut disc_rows: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let sacrum_top = spec.top_margin_mm + n * spec.pitch_mm;
    for (j, row) in rows.iter_mut().enumerate() {
        let y = (j as f64 + 0.5) * sy;
        let rel = y - spec.top_margin_mm;
        if rel < 0.0 {
            continue;
        }
        let k = (rel / spec.pitch_mm).floor() as u32 + 1;
        if k <= spec.n_vertebrae {
            let within = rel - (k - 1) as f64 * spec.pitch_mm;
            if within < spec.pitch_mm - spec.disc_thickness_mm {
                *row = Row::Corpus { k, endplate: None };
                corpus_rows.entry(k).or_default().push(j);
            } else if k < spec.n_vertebrae || spec.include_sacrum {
                *row = Row::Disc { k };
                disc_rows.entry(k).or_default().push(j);
            }
        } else if spec.include_sacrum && y < sacrum_top + spec.sacrum_height_mm {
            *row = Row::Sacrum {
                t: (y - sacrum_top) / spec.sacrum_height_mm,
            };
        }
    }
    for k in 1..=spec.n_vertebrae {
        let cr = corpus_rows.get(&k).map(Vec::len).unwrap_or(0);
        if cr < 3 {
            return Err(Error::InvalidSpec(format!(
                "vertebra {k} corpus spans {cr} rows; at least 3 are needed at this spacing"
            )));
        }
    }
    for (&k, d) in &disc_rows {
        if spec.fused_below(k) {
            let half = d.len().div_ceil(2);
            for (i, &j) in d.iter().enumerate() {
                rows[j] = Row::Bridge {
                    k,
                    owner: if i < half { k } else { k + 1 },
                };
            }
            continue;
        }
        let first = corpus_rows[&k].last().copied().unwrap();
        rows[first] = Row::Corpus {
            k,
            endplate: Some((ENDPLATE_BASE + k) as u16),
        };
        if k < spec.n_vertebrae {
            let next = corpus_rows[&(k + 1)][0];
            rows[next] = Row::Corpus {
                k: k + 1,
                endplate: Some((ENDPLATE_BASE + k) as u16),
            };
        }
    }
    let canal_end = if spec.include_sacrum {
        sacrum_top + spec.sacrum_height_mm
    } else {
        bottom
    };
    Ok(Layout {
        spec,
        rows,
        ap0,
        lr0: 0.5 * extent[2],
        phase,
        scale,
        a_max,
        yc,
        canal_end,
    })
}

const INTENSITY: [f32; 15] = [
    0.05, 0.55, 0.5, 0.5, 0.48, 0.48, 0.48, 0.48, 0.45, 0.45, 0.3, 0.85, 0.95, 0.65, 0.5,
];

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = plan(spec, &mut rng)?;
    let grid = Grid::new(spec.dims, spec.spacing)?;
    let [d0, d1, d2] = spec.dims;
    let sp = spec.spacing;
    let reach = layout.parts_reach();
    let mut semantic = vec![0u16; grid.len()];
    let mut instance = vec![0u16; grid.len()];
    for z in 0..d2 {
        let zm = (z as f64 + 0.5) * sp[2];
        for y in 0..d1 {
            let ym = (y as f64 + 0.5) * sp[1];
            let row = layout.rows[y];
            let near: Vec<u32> = (1..=spec.n_vertebrae)
                .filter(|&k| (ym - layout.yc[k as usize - 1]).abs() <= reach + 1.0)
                .collect();
            let base = d0 * (y + d1 * z);
            for x in 0..d0 {
                let xm = (x as f64 + 0.5) * sp[0];
                let hit = layout
                    .row_label(row, xm, ym, zm)
                    .or_else(|| layout.canal_label(xm, ym, zm).map(|c| (c, 0)))
                    .or_else(|| {
                        near.iter()
                            .find_map(|&k| layout.part_label(k, xm, ym, zm).map(|c| (c, k as u16)))
                    });
                if let Some((s, i)) = hit {
                    semantic[base + x] = s;
                    instance[base + x] = i;
                }
            }
        }
    }
    let noise = Normal::new(0.0f32, 0.02).expect("valid normal");
    let intensity: Vec<f32> = semantic
        .iter()
        .map(|&s| INTENSITY[s as usize] + noise.sample(&mut rng))
        .collect();
    Ok(Phantom {
        intensity: Volume::with_grid(grid, intensity)?,
        semantic: Volume::with_grid(grid, semantic)?,
        instance: Volume::with_grid(grid, instance)?,
    })
}

/// Corruptions applied by the oracle predictors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Chance that one label is eroded.
    pub p_erosion: f64,
    pub erosion_radius: usize,
    /// Chance that one connected region of one label is removed.
    pub p_labeldrop: f64,
    /// Per-label overrides of `p_labeldrop`, keyed by label value.
    pub p_labeldrop_by_label: BTreeMap<u16, f64>,
    /// Chance that the whole volume is downsampled by 2 and upsampled back.
    pub p_downup: f64,
    /// Maximum shift of each label, mm along every axis.
    pub boundary_jitter_mm: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            p_erosion: 0.1,
            erosion_radius: 1,
            p_labeldrop: 0.1,
            p_labeldrop_by_label: BTreeMap::new(),
            p_downup: 0.1,
            boundary_jitter_mm: 0.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// No corruption at all.
    pub fn none() -> Self {
        NoiseSpec {
            p_erosion: 0.0,
            p_labeldrop: 0.0,
            p_downup: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_erosion, self.p_labeldrop, self.p_downup]
            .into_iter()
            .chain(self.p_labeldrop_by_label.values().copied());
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("probability {p} is outside [0, 1]")));
            }
        }
        if !(self.boundary_jitter_mm >= 0.0) || !self.boundary_jitter_mm.is_finite() {
            return Err(Error::InvalidSpec("boundary_jitter_mm must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.p_erosion == 0.0
            && self.p_labeldrop == 0.0
            && self.p_labeldrop_by_label.values().all(|&p| p == 0.0)
            && self.p_downup == 0.0
            && self.boundary_jitter_mm == 0.0
    }

    fn labeldrop(&self, label: u16) -> f64 {
        self.p_labeldrop_by_label
            .get(&label)
            .copied()
            .unwrap_or(self.p_labeldrop)
    }
}

/// Corrupt a semantic mask; see [`corrupt_labels`].
pub fn corrupt_semantic(gt: &Volume<u16>, noise: &NoiseSpec) -> Volume<u16> {
    corrupt_labels(gt, noise, 0)
}

/// Apply, in order: label drop per 26-connected region of every label,
/// erosion per label, per-label shift, and whole-volume down/up sampling.
/// Removed voxels become background and shifted voxels only land on
/// background, so no label is ever invented. `salt` decorrelates calls that
/// share one `NoiseSpec`.
pub fn corrupt_labels(gt: &Volume<u16>, noise: &NoiseSpec, salt: u64) -> Volume<u16> {
    if noise.is_identity() {
        return gt.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let grid = *gt.grid();
    let mut out = gt.clone();

    let members = label_members(out.data());
    for (&label, idx) in &members {
        let p = noise.labeldrop(label);
        if p == 0.0 {
            continue;
        }
        for region in regions(&grid, out.data(), label, idx) {
            if rng.random_bool(p) {
                let d = out.data_mut();
                for i in region {
                    d[i] = 0;
                }
            }
        }
    }

    if noise.p_erosion > 0.0 {
        for label in label_members(out.data()).into_keys() {
            if !rng.random_bool(noise.p_erosion) {
                continue;
            }
            let Some(bounds) = out.mask_where(|v| v == label).foreground_bounds() else {
                continue;
            };
            let margin = noise.erosion_radius + 1;
            let b = bounds.padded(margin, grid.dims);
            let origin = b.min.map(|v| v as i64);
            let size = [0, 1, 2].map(|a| b.max[a] - b.min[a] + 1);
            let local = out.extract(origin, size, 0).mask_where(|v| v == label);
            let kept = erode(&local, noise.erosion_radius, BoundaryPolicy::Background);
            for (li, (&was, &now)) in local.data().iter().zip(kept.data()).enumerate() {
                if was && !now {
                    let c = local.grid().coords(li);
                    out.set([c[0] + b.min[0], c[1] + b.min[1], c[2] + b.min[2]], 0);
                }
            }
        }
    }

    if noise.boundary_jitter_mm > 0.0 {
        let max = grid.spacing.map(|s| (noise.boundary_jitter_mm / s).floor() as i64);
        for (label, idx) in label_members(out.data()) {
            let shift = max.map(|m| if m > 0 { rng.random_range(-m..=m) } else { 0 });
            if shift == [0; 3] {
                continue;
            }
            let d = out.data_mut();
            for &i in &idx {
                d[i] = 0;
            }
            for &i in &idx {
                let c = grid.coords(i);
                let t = [0, 1, 2].map(|a| c[a] as i64 + shift[a]);
                if (0..3).all(|a| t[a] >= 0 && t[a] < grid.dims[a] as i64) {
                    let j = grid.index(t.map(|v| v as usize));
                    if d[j] == 0 {
                        d[j] = label;
                    }
                }
            }
        }
    }

    if noise.p_downup > 0.0 && rng.random_bool(noise.p_downup) {
        let src = out.clone();
        out = Volume::from_fn(grid, |c| src.get(c.map(|v| v & !1)));
    }
    out
}

fn label_members(data: &[u16]) -> BTreeMap<u16, Vec<usize>> {
    let mut m: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (i, &v) in data.iter().enumerate() {
        if v != 0 {
            m.entry(v).or_default().push(i);
        }
    }
    m
}

// 26-connected regions of `label`, ordered by smallest voxel index.
fn regions(grid: &Grid, data: &[u16], label: u16, idx: &[usize]) -> Vec<Vec<usize>> {
    let mut seen: HashSet<usize> = HashSet::with_capacity(idx.len());
    let mut out = Vec::new();
    for &seed in idx {
        if !seen.insert(seed) {
            continue;
        }
        let mut region = vec![seed];
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            let c = grid.coords(i);
            for d in &FULL_OFFSETS {
                if let Some(n) = grid.offset(c, *d) {
                    if data[n] == label && seen.insert(n) {
                        region.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        out.push(region);
    }
    out
}

/// Semantic oracle: returns the ground truth of each requested patch,
/// corrupted by `noise` (salted with the patch origin).
#[derive(Clone, Debug)]
pub struct OracleSemanticPredictor {
    pub gt: Volume<u16>,
    pub noise: NoiseSpec,
}

impl SemanticPredictor for OracleSemanticPredictor {
    fn name(&self) -> String {
        "oracle-semantic".into()
    }

    fn predict_patch(&self, patch: &Volume<f32>, origin: [usize; 3]) -> Result<PatchPrediction> {
        let o = origin.map(|v| v as i64);
        let labels = self.gt.extract(o, patch.dims(), 0);
        let salt = origin[0] as u64 | (origin[1] as u64) << 21 | (origin[2] as u64) << 42;
        Ok(PatchPrediction::Labels(corrupt_labels(&labels, &self.noise, salt)))
    }
}

/// Instance oracle: for each cutout, labels the ground-truth vertebra whose
/// centroid is vertically closest to the cutout centre (2) and its upper (1)
/// and lower (3) neighbours, restricted to the window, then corrupts the
/// three labels.
#[derive(Clone, Debug)]
pub struct OracleInstancePredictor {
    gt: Volume<u16>,
    noise: NoiseSpec,
    /// Axis-1 centroid of every vertebra id, indexed by id.
    centroid_y: Vec<Option<f64>>,
}

impl OracleInstancePredictor {
    pub fn new(gt_instance: Volume<u16>, noise: NoiseSpec) -> Self {
        let mut sum = vec![0f64; 100];
        let mut count = vec![0u64; 100];
        let g = *gt_instance.grid();
        for (i, &v) in gt_instance.data().iter().enumerate() {
            if (1..=labels::MAX_VERTEBRAE as u16).contains(&v) {
                sum[v as usize] += g.coords(i)[1] as f64;
                count[v as usize] += 1;
            }
        }
        let centroid_y = (0..100)
            .map(|v| (count[v] > 0).then(|| sum[v] / count[v] as f64))
            .collect();
        OracleInstancePredictor {
            gt: gt_instance,
            noise,
            centroid_y,
        }
    }
}

impl CutoutPredictor for OracleInstancePredictor {
    fn name(&self) -> String {
        "oracle-instance".into()
    }

    fn predict_cutout(&self, _semantic: &Volume<u16>, cutout: &Cutout) -> Result<Volume<u8>> {
        let window = self.gt.extract(cutout.origin, cutout.size, 0);
        let mut present = [false; 100];
        for &v in window.data() {
            if (1..100).contains(&v) {
                present[v as usize] = true;
            }
        }
        let center = (1..100usize)
            .filter(|&v| present[v])
            .filter_map(|v| self.centroid_y[v].map(|y| (v, (y - cutout.center[1]).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(v, _)| v as u16);
        let Some(c) = center else {
            return Ok(window.map(|_| 0u8));
        };
        let labels = window.map(|v| {
            if v == 0 || v >= 100 {
                0u16
            } else if v + 1 == c {
                1
            } else if v == c {
                2
            } else if v == c + 1 {
                3
            } else {
                0
            }
        });
        let corrupted = corrupt_labels(&labels, &self.noise, cutout.index as u64 + 1);
        Ok(corrupted.map(|v| v as u8))
    }
}
