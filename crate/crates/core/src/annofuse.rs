//! Merging annotation sources into one 14-label semantic mask.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels;
use crate::volume::{closing, hole_voxels, Volume, FACE_OFFSETS};

/// Three aligned sources: `base` carries corpus, disc, canal and sacrum,
/// `substructures` the nine remaining vertebra substructure codes, and
/// `cord` a binary cord mask.
#[derive(Clone, Debug)]
pub struct AnnotationSources {
    pub base: Volume<u16>,
    pub substructures: Volume<u16>,
    pub cord: Volume<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSummary {
    /// Output voxel count per label name.
    pub label_counts: BTreeMap<String, usize>,
    /// Substructure voxels dropped because the base already labelled them.
    pub substructure_rejected: usize,
    /// Canal voxels turned into cord.
    pub cord_over_canal: usize,
    /// Cord voxels dropped because another structure was already there.
    pub cord_rejected: usize,
    pub endplate_voxels: usize,
    /// Cord voxels adjacent to a synthesized endplate, a sign of
    /// overlapping sources.
    pub endplate_cord_contacts: usize,
}

fn check_codes(vol: &Volume<u16>, allowed: impl Fn(u16) -> bool, what: &str) -> Result<()> {
    match vol.data().iter().find(|&&v| v != 0 && !allowed(v)) {
        Some(v) => Err(Error::InvalidLabel(format!("{what} source contains code {v}"))),
        None => Ok(()),
    }
}

/// Base labels first, substructures only onto background, cord onto
/// background or canal.
pub fn merge_sources(src: &AnnotationSources) -> Result<(Volume<u16>, FusionSummary)> {
    src.base.grid().ensure_same(src.substructures.grid())?;
    src.base.grid().ensure_same(src.cord.grid())?;
    check_codes(&src.base, |v| v <= labels::MAX_CODE, "base")?;
    check_codes(&src.substructures, |v| v <= labels::MAX_CODE, "substructure")?;
    let mut out = src.base.clone();
    let mut summary = FusionSummary::default();
    let d = out.data_mut();
    for (o, &s) in d.iter_mut().zip(src.substructures.data()) {
        if s == 0 {
            continue;
        }
        if *o == 0 {
            *o = s;
        } else {
            summary.substructure_rejected += 1;
        }
    }
    for (o, &c) in d.iter_mut().zip(src.cord.data()) {
        if !c {
            continue;
        }
        match *o {
            0 => *o = labels::SPINAL_CORD,
            labels::SPINAL_CANAL => {
                *o = labels::SPINAL_CORD;
                summary.cord_over_canal += 1;
            }
            labels::SPINAL_CORD => {}
            _ => summary.cord_rejected += 1,
        }
    }
    summary.label_counts = label_counts(&out);
    Ok((out, summary))
}

fn label_counts(v: &Volume<u16>) -> BTreeMap<String, usize> {
    let mut counts = [0usize; labels::MAX_CODE as usize + 1];
    for &x in v.data() {
        if let Some(c) = counts.get_mut(x as usize) {
            *c += 1;
        }
    }
    labels::SemanticLabel::ALL
        .iter()
        .skip(1)
        .filter(|l| counts[l.code() as usize] > 0)
        .map(|l| (l.name().to_string(), counts[l.code() as usize]))
        .collect()
}

/// Background voxels inside the holes of the 3×3×3 closing of corpus ∪ disc
/// that face both a corpus and a disc voxel (6-neighbourhood) become
/// endplate. Nothing else changes.
pub fn synthesize_endplates(mask: &Volume<u16>) -> Volume<u16> {
    let grid = *mask.grid();
    let d = mask.data();
    let union = mask.mask_where(|v| v == labels::CORPUS || v == labels::IVD);
    let Some(b) = union.foreground_bounds() else {
        return mask.clone();
    };
    let closed = closing(&union, 1);
    let cd = closed.data();
    // Holes of the closed union, plus its closing-added voxels.
    let region = b.padded(2, grid.dims);
    let mut candidates = hole_voxels(&grid, region, |i| cd[i]);
    candidates.extend((0..grid.len()).filter(|&i| cd[i] && !union.data()[i]));
    let mut out = mask.clone();
    for i in candidates {
        if d[i] != 0 {
            continue;
        }
        let c = grid.coords(i);
        let (mut corpus, mut disc) = (false, false);
        for off in &FACE_OFFSETS {
            if let Some(n) = grid.offset(c, *off) {
                corpus |= d[n] == labels::CORPUS;
                disc |= d[n] == labels::IVD;
            }
        }
        if corpus && disc {
            out.data_mut()[i] = labels::ENDPLATE;
        }
    }
    out
}

/// Merge, then synthesize endplates last.
pub fn fuse(src: &AnnotationSources) -> Result<(Volume<u16>, FusionSummary)> {
    let (merged, mut summary) = merge_sources(src)?;
    let out = synthesize_endplates(&merged);
    let grid = *out.grid();
    let (m, o) = (merged.data(), out.data());
    summary.endplate_voxels = o.iter().filter(|&&v| v == labels::ENDPLATE).count();
    summary.endplate_cord_contacts = (0..grid.len())
        .filter(|&i| o[i] == labels::ENDPLATE && m[i] == 0)
        .filter(|&i| {
            let c = grid.coords(i);
            FACE_OFFSETS
                .iter()
                .filter_map(|off| grid.offset(c, *off))
                .any(|n| o[n] == labels::SPINAL_CORD)
        })
        .count();
    summary.label_counts = label_counts(&out);
    Ok((out, summary))
}
