//! One-to-one instance matching at IoU ≥ 0.5.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::labels::{classify_instance_id, InstanceKind};
use crate::volume::Volume;

pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: u32,
    pub reference: u32,
    pub iou: f64,
    pub intersection: u64,
    pub pred_voxels: u64,
    pub ref_voxels: u64,
}

impl MatchedPair {
    pub fn dice(&self) -> f64 {
        2.0 * self.intersection as f64 / (self.pred_voxels + self.ref_voxels) as f64
    }

    fn union(&self) -> u64 {
        self.pred_voxels + self.ref_voxels - self.intersection
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMatching {
    /// True positives, in descending IoU order.
    pub pairs: Vec<MatchedPair>,
    /// False positives.
    pub unmatched_pred: Vec<u32>,
    /// False negatives.
    pub unmatched_ref: Vec<u32>,
    pub threshold: f64,
}

impl InstanceMatching {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_pred.len()
    }

    pub fn fn_(&self) -> usize {
        self.unmatched_ref.len()
    }
}

fn keep(id: u16, kind: Option<InstanceKind>) -> bool {
    if id == 0 {
        return false;
    }
    match kind {
        None => true,
        Some(k) => classify_instance_id(id as u32).is_ok_and(|c| c.kind == k),
    }
}

/// Match instance ids of `pred` and `reference`, optionally restricted to
/// one id range.
///
/// A pair is a candidate when `IoU ≥ 0.5`, tested exactly as
/// `2·|P∩R| ≥ |P∪R|`. Candidates are taken greedily by descending IoU
/// (ties by ascending pred id, then ref id); above 0.5 each instance has at
/// most one candidate, so the greedy order only matters at exactly 0.5.
pub fn match_instances(
    pred: &Volume<u16>,
    reference: &Volume<u16>,
    kind: Option<InstanceKind>,
) -> Result<InstanceMatching> {
    pred.grid().ensure_same(reference.grid())?;
    let mut pred_sizes: BTreeMap<u32, u64> = BTreeMap::new();
    let mut ref_sizes: BTreeMap<u32, u64> = BTreeMap::new();
    let mut inter: HashMap<(u32, u32), u64> = HashMap::new();
    for (&p, &r) in pred.data().iter().zip(reference.data()) {
        let kp = keep(p, kind);
        let kr = keep(r, kind);
        if kp {
            *pred_sizes.entry(p as u32).or_default() += 1;
        }
        if kr {
            *ref_sizes.entry(r as u32).or_default() += 1;
        }
        if kp && kr {
            *inter.entry((p as u32, r as u32)).or_default() += 1;
        }
    }
    let mut candidates: Vec<MatchedPair> = inter
        .into_iter()
        .map(|((p, r), i)| {
            let (ps, rs) = (pred_sizes[&p], ref_sizes[&r]);
            MatchedPair {
                pred: p,
                reference: r,
                iou: i as f64 / (ps + rs - i) as f64,
                intersection: i,
                pred_voxels: ps,
                ref_voxels: rs,
            }
        })
        .filter(|c| 2 * c.intersection >= c.union())
        .collect();
    candidates.sort_by(|a, b| {
        // Exact comparison of the two IoU fractions.
        let lhs = a.intersection as u128 * b.union() as u128;
        let rhs = b.intersection as u128 * a.union() as u128;
        rhs.cmp(&lhs)
            .then(a.pred.cmp(&b.pred))
            .then(a.reference.cmp(&b.reference))
    });
    let mut pairs = Vec::new();
    let mut used_pred = std::collections::HashSet::new();
    let mut used_ref = std::collections::HashSet::new();
    for c in candidates {
        if used_pred.contains(&c.pred) || used_ref.contains(&c.reference) {
            continue;
        }
        used_pred.insert(c.pred);
        used_ref.insert(c.reference);
        pairs.push(c);
    }
    Ok(InstanceMatching {
        unmatched_pred: pred_sizes.keys().copied().filter(|p| !used_pred.contains(p)).collect(),
        unmatched_ref: ref_sizes.keys().copied().filter(|r| !used_ref.contains(r)).collect(),
        pairs,
        threshold: IOU_THRESHOLD,
    })
}
