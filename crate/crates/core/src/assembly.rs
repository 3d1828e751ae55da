//! Vertebra instance assembly from per-cutout three-class predictions.
//!
//! One cutout is placed on every corpus centroid. The instance predictor
//! labels the vertebra at the centre of each cutout (2) and its upper (1) and
//! lower (3) neighbours, so inner vertebrae are seen up to three times. The
//! predictions of one vertebra form a group; groups are finalized in order of
//! decreasing inter-prediction Dice and fused by majority vote.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{self, ENDPLATE_BASE, IVD_BASE, MAX_VERTEBRAE};
use crate::pipeline::CutoutPredictor;
use crate::volume::{connected_components_where, Bounds, Connectivity, Grid, Volume};

pub const DEFAULT_CUTOUT_SIZE: [usize; 3] = [248, 304, 64];

/// Sorted, duplicate-free linear voxel indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VoxelSet(Vec<usize>);

impl VoxelSet {
    pub fn from_sorted(v: Vec<usize>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        VoxelSet(v)
    }

    pub fn from_unsorted(mut v: Vec<usize>) -> Self {
        v.sort_unstable();
        v.dedup();
        VoxelSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn intersection_len(&self, other: &VoxelSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Dice overlap; two empty sets score 1.
    pub fn dice(&self, other: &VoxelSet) -> f64 {
        let total = self.len() + other.len();
        if total == 0 {
            return 1.0;
        }
        2.0 * self.intersection_len(other) as f64 / total as f64
    }

    pub fn centroid(&self, grid: &Grid) -> Option<[f64; 3]> {
        if self.is_empty() {
            return None;
        }
        let mut s = [0f64; 3];
        for &i in &self.0 {
            let c = grid.coords(i);
            for a in 0..3 {
                s[a] += c[a] as f64;
            }
        }
        Some(s.map(|v| v / self.len() as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusCenter {
    /// Mean voxel coordinate of the corpus component.
    pub centroid: [f64; 3],
    pub voxels: usize,
}

/// Centroids of the 26-connected corpus components, top to bottom.
/// Components smaller than `min_volume_fraction` times the median component
/// volume are discarded.
pub fn find_corpus_centers(semantic: &Volume<u16>, min_volume_fraction: f64) -> Vec<CorpusCenter> {
    let d = semantic.data();
    let cs = connected_components_where(semantic.grid(), Connectivity::TwentySix, |i| d[i] == labels::CORPUS);
    if cs.count() == 0 {
        return Vec::new();
    }
    let mut sizes: Vec<usize> = cs.stats.iter().map(|s| s.voxels).collect();
    sizes.sort_unstable();
    let n = sizes.len();
    let median = if n % 2 == 1 {
        sizes[n / 2] as f64
    } else {
        0.5 * (sizes[n / 2 - 1] + sizes[n / 2]) as f64
    };
    let mut out: Vec<CorpusCenter> = cs
        .stats
        .iter()
        .filter(|s| s.voxels as f64 >= min_volume_fraction * median)
        .map(|s| CorpusCenter {
            centroid: s.centroid,
            voxels: s.voxels,
        })
        .collect();
    out.sort_by(|a, b| a.centroid[1].total_cmp(&b.centroid[1]));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutout {
    /// Position in top-to-bottom centroid order, from 0.
    pub index: usize,
    /// Corpus centroid, voxel coordinates.
    pub center: [f64; 3],
    /// Window corner; negative or past-the-end parts are background.
    pub origin: [i64; 3],
    pub size: [usize; 3],
    /// Axes on which the window was shifted to stay inside the volume.
    pub shifted: [bool; 3],
    /// Axes on which the volume is smaller than the window.
    pub padded: [bool; 3],
}

impl Cutout {
    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| {
            let v = c[a] as i64;
            v >= self.origin[a] && v < self.origin[a] + self.size[a] as i64
        })
    }
}

/// One window per centre, centred on the rounded centroid. Windows are
/// shifted inside the volume when it is large enough along an axis and
/// padded with background otherwise.
pub fn make_cutouts(centers: &[CorpusCenter], dims: [usize; 3], size: [usize; 3]) -> Vec<Cutout> {
    centers
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let mut origin = [0i64; 3];
            let mut shifted = [false; 3];
            let mut padded = [false; 3];
            for a in 0..3 {
                let nominal = c.centroid[a].round() as i64 - (size[a] / 2) as i64;
                if dims[a] >= size[a] {
                    let o = nominal.clamp(0, (dims[a] - size[a]) as i64);
                    shifted[a] = o != nominal;
                    origin[a] = o;
                } else {
                    padded[a] = true;
                    origin[a] = nominal;
                }
            }
            Cutout {
                index,
                center: c.centroid,
                origin,
                size,
                shifted,
                padded,
            }
        })
        .collect()
}

/// The three masks of one cutout mapped to volume space.
#[derive(Clone, Debug, Default)]
pub struct CutoutPrediction {
    pub cutout_index: usize,
    /// Above, centre and below.
    pub masks: [VoxelSet; 3],
}

/// Map a window prediction (values 0..=3) into volume space.
pub fn to_volume_space(cutout: &Cutout, labels: &Volume<u8>, dims: [usize; 3]) -> Result<CutoutPrediction> {
    if labels.dims() != cutout.size {
        return Err(Error::Predictor(format!(
            "cutout {} prediction has dims {:?}, expected {:?}",
            cutout.index,
            labels.dims(),
            cutout.size
        )));
    }
    let mut masks: [Vec<usize>; 3] = Default::default();
    let lg = labels.grid();
    // Volume-space indices increase with local indices, so lists stay sorted.
    for (li, &v) in labels.data().iter().enumerate() {
        if v == 0 {
            continue;
        }
        if v > 3 {
            return Err(Error::Predictor(format!(
                "cutout {} prediction contains label {v}; only 0..=3 are allowed",
                cutout.index
            )));
        }
        let c = lg.coords(li);
        let g = [0, 1, 2].map(|a| cutout.origin[a] + c[a] as i64);
        if (0..3).all(|a| g[a] >= 0 && (g[a] as usize) < dims[a]) {
            let i = g[0] as usize + dims[0] * (g[1] as usize + dims[1] * g[2] as usize);
            masks[v as usize - 1].push(i);
        }
    }
    Ok(CutoutPrediction {
        cutout_index: cutout.index,
        masks: masks.map(VoxelSet::from_sorted),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingRule {
    /// Predictions are grouped by mutual Dice overlap.
    Spatial,
    /// Group `k` takes label 2 of cutout `k`, label 1 of cutout `k+1` and
    /// label 3 of cutout `k-1`.
    Index,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSource {
    pub cutout: usize,
    /// 1 = above, 2 = centre, 3 = below.
    pub label: u8,
}

#[derive(Clone, Debug)]
pub struct VertebraGroup {
    /// Top-down position, from 1.
    pub target_index: usize,
    pub predictions: Vec<VoxelSet>,
    pub sources: Vec<PredictionSource>,
    /// Mean pairwise Dice; 1 for a single prediction.
    pub agreement: f64,
}

fn mean_pairwise_dice(masks: &[&VoxelSet]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            if masks[i].is_empty() && masks[j].is_empty() {
                continue;
            }
            sum += masks[i].dice(masks[j]);
            n += 1;
        }
    }
    if n == 0 {
        1.0
    } else {
        sum / n as f64
    }
}

/// Gather the predictions of each vertebra.
///
/// With [`GroupingRule::Spatial`] every non-empty mask joins the group
/// whose members it overlaps best (Dice at least `min_dice`, at most one
/// mask per cutout per group) or opens a new group; groups are then
/// numbered by centroid height. This survives fused corpora, where one
/// cutout sits between two vertebrae and the index arithmetic breaks.
pub fn collect_groups(
    predictions: &[CutoutPrediction],
    grid: &Grid,
    rule: GroupingRule,
    min_dice: f64,
) -> Vec<VertebraGroup> {
    match rule {
        GroupingRule::Index => collect_by_index(predictions),
        GroupingRule::Spatial => collect_spatial(predictions, grid, min_dice),
    }
}

fn collect_by_index(predictions: &[CutoutPrediction]) -> Vec<VertebraGroup> {
    let n = predictions.len();
    let mut groups = Vec::new();
    // Slot t covers vertebra t-1 in cutout order, so slot 0 is the vertebra
    // above the first corpus and slot n+1 the one below the last.
    for t in 0..n + 2 {
        let mut slots: Vec<(PredictionSource, &VoxelSet)> = Vec::new();
        if t >= 1 && t <= n {
            slots.push((
                PredictionSource {
                    cutout: t - 1,
                    label: 2,
                },
                &predictions[t - 1].masks[1],
            ));
        }
        if t < n {
            slots.push((PredictionSource { cutout: t, label: 1 }, &predictions[t].masks[0]));
        }
        if t >= 2 && t - 2 < n {
            slots.push((
                PredictionSource {
                    cutout: t - 2,
                    label: 3,
                },
                &predictions[t - 2].masks[2],
            ));
        }
        let all: Vec<&VoxelSet> = slots.iter().map(|s| s.1).collect();
        let agreement = mean_pairwise_dice(&all);
        let kept: Vec<_> = slots.into_iter().filter(|s| !s.1.is_empty()).collect();
        if kept.is_empty() {
            continue;
        }
        groups.push(VertebraGroup {
            target_index: 0,
            sources: kept.iter().map(|s| s.0.clone()).collect(),
            predictions: kept.into_iter().map(|s| s.1.clone()).collect(),
            agreement,
        });
    }
    for (i, g) in groups.iter_mut().enumerate() {
        g.target_index = i + 1;
    }
    groups
}

fn collect_spatial(predictions: &[CutoutPrediction], grid: &Grid, min_dice: f64) -> Vec<VertebraGroup> {
    let mut groups: Vec<(Vec<PredictionSource>, Vec<VoxelSet>)> = Vec::new();
    for p in predictions {
        for (l, mask) in p.masks.iter().enumerate() {
            if mask.is_empty() {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (gi, (sources, members)) in groups.iter().enumerate() {
                if sources.iter().any(|s| s.cutout == p.cutout_index) {
                    continue;
                }
                let d = members.iter().map(|m| m.dice(mask)).fold(0.0, f64::max);
                if d >= min_dice && best.is_none_or(|(_, b)| d > b) {
                    best = Some((gi, d));
                }
            }
            let source = PredictionSource {
                cutout: p.cutout_index,
                label: l as u8 + 1,
            };
            match best {
                Some((gi, _)) => {
                    groups[gi].0.push(source);
                    groups[gi].1.push(mask.clone());
                }
                None => groups.push((vec![source], vec![mask.clone()])),
            }
        }
    }
    let mut keyed: Vec<(f64, VertebraGroup)> = groups
        .into_iter()
        .map(|(sources, predictions)| {
            let refs: Vec<&VoxelSet> = predictions.iter().collect();
            let agreement = mean_pairwise_dice(&refs);
            let ys: f64 = predictions.iter().filter_map(|m| m.centroid(grid)).map(|c| c[1]).sum();
            let y = ys / predictions.len() as f64;
            (
                y,
                VertebraGroup {
                    target_index: 0,
                    predictions,
                    sources,
                    agreement,
                },
            )
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut g))| {
            g.target_index = i + 1;
            g
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconcileReport {
    /// Finalization order as target indices.
    pub order: Vec<usize>,
    /// Voxels a group voted for that an earlier group had claimed.
    pub conflict_voxels: usize,
    /// Groups whose vote came out empty and fell back to the union.
    pub union_fallbacks: Vec<usize>,
}

/// Fuse every group by a `⌈k/2⌉`-of-`k` vote, finalizing groups by
/// decreasing agreement (ties: smaller target index first) and skipping
/// voxels already claimed. Instances are numbered top-down by centroid.
pub fn reconcile(groups: &[VertebraGroup], grid: &Grid) -> Result<(Volume<u16>, ReconcileReport)> {
    let mut order: Vec<&VertebraGroup> = groups.iter().collect();
    order.sort_by(|a, b| {
        b.agreement
            .total_cmp(&a.agreement)
            .then(a.target_index.cmp(&b.target_index))
    });
    let fused: Vec<Vec<usize>> = order.par_iter().map(|g| vote(&g.predictions)).collect();
    let mut owner = vec![0u32; grid.len()];
    let mut report = ReconcileReport::default();
    let mut finals: Vec<(usize, Vec<usize>)> = Vec::new();
    for (g, votes) in order.iter().zip(fused) {
        report.order.push(g.target_index);
        let slot = finals.len() as u32 + 1;
        let mut mine = Vec::with_capacity(votes.len());
        for &i in &votes {
            if owner[i] == 0 {
                owner[i] = slot;
                mine.push(i);
            } else {
                report.conflict_voxels += 1;
            }
        }
        if mine.is_empty() {
            let union =
                VoxelSet::from_unsorted(g.predictions.iter().flat_map(|p| p.indices().iter().copied()).collect());
            for &i in union.indices() {
                if owner[i] == 0 {
                    owner[i] = slot;
                    mine.push(i);
                }
            }
            if !mine.is_empty() {
                report.union_fallbacks.push(g.target_index);
            }
        }
        if !mine.is_empty() {
            finals.push((g.target_index, mine));
        }
    }
    if finals.len() > MAX_VERTEBRAE as usize {
        return Err(Error::InvalidInstanceId(finals.len() as u32));
    }
    let mut ranked: Vec<(f64, usize, usize)> = finals
        .iter()
        .enumerate()
        .map(|(slot, (t, m))| {
            let y = m.iter().map(|&i| grid.coords(i)[1] as f64).sum::<f64>() / m.len() as f64;
            (y, *t, slot)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ids = vec![0u16; finals.len()];
    for (rank, &(_, _, slot)) in ranked.iter().enumerate() {
        ids[slot] = rank as u16 + 1;
    }
    let data = owner
        .into_iter()
        .map(|s| if s == 0 { 0 } else { ids[s as usize - 1] })
        .collect();
    Ok((Volume::with_grid(*grid, data)?, report))
}

fn vote(predictions: &[VoxelSet]) -> Vec<usize> {
    let k = predictions.len();
    let need = k.div_ceil(2);
    if k == 1 {
        return predictions[0].indices().to_vec();
    }
    let mut all: Vec<usize> = predictions.iter().flat_map(|p| p.indices().iter().copied()).collect();
    all.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j] == all[i] {
            j += 1;
        }
        if j - i >= need {
            out.push(all[i]);
        }
        i = j;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscAssignment {
    pub id: u16,
    pub voxels: usize,
    /// No vertebra corpus lies above; the topmost vertebra was used.
    pub no_vertebra_above: bool,
}

/// Give every 26-connected IVD and endplate component of `semantic` the id
/// `100 + k` or `200 + k`, where `k` is the vertebra whose corpus centroid
/// is the closest one strictly above the component centroid. Returns the
/// combined instance mask.
pub fn assign_disc_endplate_instances(
    semantic: &Volume<u16>,
    vertebrae: &Volume<u16>,
) -> Result<(Volume<u16>, Vec<DiscAssignment>)> {
    semantic.grid().ensure_same(vertebrae.grid())?;
    let anchors = vertebra_anchor_heights(semantic, vertebrae);
    let mut out = vertebrae.clone();
    let mut report = Vec::new();
    if anchors.is_empty() {
        return Ok((out, report));
    }
    let sem = semantic.data();
    for (code, base) in [(labels::IVD, IVD_BASE), (labels::ENDPLATE, ENDPLATE_BASE)] {
        let cs = connected_components_where(semantic.grid(), Connectivity::TwentySix, |i| sem[i] == code);
        let members = cs.members();
        for (stats, voxels) in cs.stats.iter().zip(members) {
            let (k, flagged) = nearest_above(&anchors, stats.centroid[1]);
            let id = (base + k as u32) as u16;
            let d = out.data_mut();
            for i in voxels {
                d[i] = id;
            }
            report.push(DiscAssignment {
                id,
                voxels: stats.voxels,
                no_vertebra_above: flagged,
            });
        }
    }
    Ok((out, report))
}

/// Axis-1 height of every vertebra id present: the centroid of its corpus
/// voxels, or of all its voxels when it has no corpus.
pub(crate) fn vertebra_anchor_heights(semantic: &Volume<u16>, vertebrae: &Volume<u16>) -> Vec<(u16, f64)> {
    let max = MAX_VERTEBRAE as usize + 1;
    let mut corpus = vec![(0f64, 0u64); max];
    let mut any = vec![(0f64, 0u64); max];
    let g = vertebrae.grid();
    for (i, (&v, &s)) in vertebrae.data().iter().zip(semantic.data()).enumerate() {
        if v == 0 || v as usize >= max {
            continue;
        }
        let y = g.coords(i)[1] as f64;
        any[v as usize].0 += y;
        any[v as usize].1 += 1;
        if s == labels::CORPUS {
            corpus[v as usize].0 += y;
            corpus[v as usize].1 += 1;
        }
    }
    (1..max)
        .filter_map(|v| {
            let (s, n) = if corpus[v].1 > 0 { corpus[v] } else { any[v] };
            (n > 0).then(|| (v as u16, s / n as f64))
        })
        .collect()
}

pub(crate) fn nearest_above(anchors: &[(u16, f64)], y: f64) -> (u16, bool) {
    let above = anchors
        .iter()
        .filter(|a| a.1 < y)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    match above {
        Some(a) => (a.0, false),
        None => {
            let top = anchors
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("anchors not empty");
            (top.0, true)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub cutout_size: [usize; 3],
    pub min_volume_fraction: f64,
    pub grouping: GroupingRule,
    /// Minimum Dice for a mask to join an existing group (spatial rule).
    pub min_group_dice: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            cutout_size: DEFAULT_CUTOUT_SIZE,
            min_volume_fraction: 0.1,
            grouping: GroupingRule::Spatial,
            min_group_dice: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub target_index: usize,
    pub agreement: f64,
    pub sources: Vec<PredictionSource>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub cutouts: Vec<Cutout>,
    pub groups: Vec<GroupSummary>,
    pub reconcile: ReconcileReport,
    pub discs: Vec<DiscAssignment>,
    pub warnings: Vec<String>,
}

/// Full instance phase on a semantic mask. Intensities are never consulted.
pub fn assemble(
    semantic: &Volume<u16>,
    predictor: &dyn CutoutPredictor,
    config: &AssemblyConfig,
) -> Result<(Volume<u16>, AssemblyReport)> {
    let grid = *semantic.grid();
    let mut report = AssemblyReport::default();
    let centers = find_corpus_centers(semantic, config.min_volume_fraction);
    if centers.is_empty() {
        report
            .warnings
            .push("semantic mask has no corpus voxels; instance mask is empty".into());
        return Ok((Volume::filled(grid, 0), report));
    }
    let cutouts = make_cutouts(&centers, grid.dims, config.cutout_size);
    let predictions: Vec<CutoutPrediction> = cutouts
        .par_iter()
        .map(|c| {
            let window = semantic.extract(c.origin, c.size, 0);
            let labels = predictor.predict_cutout(&window, c)?;
            to_volume_space(c, &labels, grid.dims)
        })
        .collect::<Result<_>>()?;
    for p in &predictions {
        if p.masks[1].is_empty() {
            report
                .warnings
                .push(format!("cutout {} has an empty centre prediction", p.cutout_index));
        }
    }
    let groups = collect_groups(&predictions, &grid, config.grouping, config.min_group_dice);
    let (vertebrae, rec) = reconcile(&groups, &grid)?;
    let (instance, discs) = assign_disc_endplate_instances(semantic, &vertebrae)?;
    for d in discs.iter().filter(|d| d.no_vertebra_above) {
        report
            .warnings
            .push(format!("component given id {} has no vertebra above it", d.id));
    }
    report.cutouts = cutouts;
    report.groups = groups
        .iter()
        .map(|g| GroupSummary {
            target_index: g.target_index,
            agreement: g.agreement,
            sources: g.sources.clone(),
        })
        .collect();
    report.reconcile = rec;
    report.discs = discs;
    Ok((instance, report))
}

/// Bounding box of a voxel set.
pub fn voxel_bounds(set: &VoxelSet, grid: &Grid) -> Option<Bounds> {
    let mut it = set.indices().iter();
    let mut b = Bounds::point(grid.coords(*it.next()?));
    for &i in it {
        b.include(grid.coords(i));
    }
    Some(b)
}
