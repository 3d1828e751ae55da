//! Consistency between the semantic and the instance mask.
//!
//! After [`enforce_consistency`] a voxel carries an instance id exactly when
//! its semantic code is a vertebra substructure, endplate or disc, and the id
//! kind matches the code (vertebra ids on substructures, `200+k` on
//! endplates, `100+k` on discs).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assembly::{nearest_above, vertebra_anchor_heights};
use crate::error::Result;
use crate::labels::{self, InstanceKind, ENDPLATE_BASE, IVD_BASE};
use crate::volume::{connected_components_where, hole_voxels, Bounds, Connectivity, Grid, Volume, FULL_OFFSETS};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrphanAssignment {
    pub size: usize,
    pub id: u16,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Semantic and instance voxels added by hole filling.
    pub holes_filled: usize,
    /// Instance voxels cleared because the semantic code takes no id.
    pub zeroed: usize,
    /// Instance voxels cleared because the id kind contradicts the code.
    pub kind_mismatch: usize,
    pub orphans_assigned: Vec<OrphanAssignment>,
    /// Semantic voxels cleared because no instance could take them.
    pub orphans_removed: usize,
    pub passes: usize,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.holes_filled == 0
            && self.zeroed == 0
            && self.kind_mismatch == 0
            && self.orphans_assigned.is_empty()
            && self.orphans_removed == 0
    }
}

fn id_kind(id: u16) -> Option<InstanceKind> {
    labels::classify_instance_id(id as u32).ok().map(|i| i.kind)
}

/// True iff instance-relevant semantic voxels and nonzero instance voxels
/// coincide.
pub fn foreground_equal(semantic: &Volume<u16>, instance: &Volume<u16>) -> Result<bool> {
    semantic.grid().ensure_same(instance.grid())?;
    Ok(semantic
        .data()
        .iter()
        .zip(instance.data())
        .all(|(&s, &i)| labels::is_instance_relevant(s) == (i != 0)))
}

/// Fill holes, clear ids the semantic mask does not support, and hand
/// every unlabelled substructure, disc or endplate component to the
/// neighbouring instance of the same kind with the most touching voxels
/// (26-neighbourhood, ties to the smaller id). Disc and endplate
/// components touching no instance of their kind fall back to the
/// nearest-vertebra-above rule; vertebra components touching no vertebra
/// are removed from the semantic mask. Passes repeat until nothing
/// changes, which makes the operation idempotent.
pub fn enforce_consistency(semantic: &mut Volume<u16>, instance: &mut Volume<u16>) -> Result<ConsistencyReport> {
    semantic.grid().ensure_same(instance.grid())?;
    let mut report = ConsistencyReport::default();
    for _ in 0..16 {
        report.passes += 1;
        if !one_pass(semantic, instance, &mut report) {
            break;
        }
    }
    debug_assert!(foreground_equal(semantic, instance).unwrap_or(false));
    Ok(report)
}

// Returns whether anything changed.
fn one_pass(semantic: &mut Volume<u16>, instance: &mut Volume<u16>, report: &mut ConsistencyReport) -> bool {
    let grid = *semantic.grid();
    let mut changes = fill_label_holes(&grid, semantic.data_mut(), |_| true);
    let sem = semantic.data().to_vec();
    changes += fill_label_holes(&grid, instance.data_mut(), |i| labels::is_instance_relevant(sem[i]));
    report.holes_filled += changes;

    let inst = instance.data_mut();
    for (i, &s) in sem.iter().enumerate() {
        let id = inst[i];
        if id == 0 {
            continue;
        }
        if !labels::is_instance_relevant(s) {
            inst[i] = 0;
            report.zeroed += 1;
            changes += 1;
        } else if id_kind(id) != labels::instance_kind_of(s) {
            inst[i] = 0;
            report.kind_mismatch += 1;
            changes += 1;
        }
    }

    let anchors = vertebra_anchor_heights(semantic, instance);
    let snapshot = instance.data().to_vec();
    for (kind, base) in [
        (InstanceKind::Vertebra, None),
        (InstanceKind::Endplate, Some(ENDPLATE_BASE)),
        (InstanceKind::Ivd, Some(IVD_BASE)),
    ] {
        let orphans = connected_components_where(&grid, Connectivity::TwentySix, |i| {
            snapshot[i] == 0 && labels::instance_kind_of(sem[i]) == Some(kind)
        });
        for (stats, voxels) in orphans.stats.iter().zip(orphans.members()) {
            let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
            for &i in &voxels {
                let c = grid.coords(i);
                for d in &FULL_OFFSETS {
                    if let Some(n) = grid.offset(c, *d) {
                        let id = snapshot[n];
                        if id != 0 && id_kind(id) == Some(kind) {
                            *counts.entry(id).or_default() += 1;
                        }
                    }
                }
            }
            let best = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&id, _)| id);
            let id = best.or_else(|| {
                let base = base?;
                (!anchors.is_empty()).then(|| (base + nearest_above(&anchors, stats.centroid[1]).0 as u32) as u16)
            });
            changes += voxels.len();
            match id {
                Some(id) => {
                    let inst = instance.data_mut();
                    for &i in &voxels {
                        inst[i] = id;
                    }
                    report
                        .orphans_assigned
                        .push(OrphanAssignment { size: voxels.len(), id });
                }
                None => {
                    let s = semantic.data_mut();
                    for &i in &voxels {
                        s[i] = 0;
                    }
                    report.orphans_removed += voxels.len();
                }
            }
        }
    }
    changes > 0
}

// For every nonzero value, fills the holes of its mask into voxels that are
// zero and accepted by `may_fill`. Returns the number of voxels filled.
fn fill_label_holes(grid: &Grid, data: &mut [u16], may_fill: impl Fn(usize) -> bool) -> usize {
    let mut bounds: BTreeMap<u16, Bounds> = BTreeMap::new();
    for (i, &v) in data.iter().enumerate() {
        if v != 0 {
            let c = grid.coords(i);
            bounds
                .entry(v)
                .and_modify(|b| b.include(c))
                .or_insert_with(|| Bounds::point(c));
        }
    }
    let mut filled = 0;
    for (label, b) in bounds {
        let region = b.padded(1, grid.dims);
        let holes = hole_voxels(grid, region, |i| data[i] == label);
        for i in holes {
            if data[i] == 0 && may_fill(i) {
                data[i] = label;
                filled += 1;
            }
        }
    }
    filled
}
