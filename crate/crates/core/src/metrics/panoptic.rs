//! Recognition, segmentation and panoptic quality.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::InstanceMatching;
use super::surface::{assd_in, union_bounds};
use crate::error::Result;
use crate::scalar::Real;
use crate::volume::{Bounds, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanopticScores<F> {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub rq: F,
    pub sq: F,
    pub pq: F,
}

/// `RQ = TP / (TP + FP/2 + FN/2)`, `SQ` = mean IoU of the true positives
/// (0 without any), `PQ = SQ·RQ`. With no instances on either side all
/// three are 1.
pub fn panoptic_scores<F: Real>(tp_ious: &[F], fp: usize, fn_: usize) -> PanopticScores<F> {
    let tp = tp_ious.len();
    let (rq, sq) = if tp + fp + fn_ == 0 {
        (F::one(), F::one())
    } else if tp == 0 {
        (F::zero(), F::zero())
    } else {
        let half = F::from_f64_lossy(0.5);
        let n = F::from_usize_lossy(tp);
        let rq = n / (n + half * F::from_usize_lossy(fp) + half * F::from_usize_lossy(fn_));
        let sq = tp_ious.iter().copied().sum::<F>() / n;
        (rq, sq)
    };
    PanopticScores {
        tp,
        fp,
        fn_,
        rq,
        sq,
        pq: sq * rq,
    }
}

/// Panoptic scores plus instance-wise DSC and ASSD averaged over the true
/// positive pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanopticEntry<F> {
    #[serde(flatten)]
    pub scores: PanopticScores<F>,
    /// Mean Dice of the matched pairs; follows the SQ convention when
    /// there are none.
    pub dsc: F,
    /// Mean ASSD (mm) of the matched pairs, undefined without any.
    pub assd: Option<F>,
}

pub fn panoptic<F: Real>(
    matching: &InstanceMatching,
    pred: &Volume<u16>,
    reference: &Volume<u16>,
) -> Result<PanopticEntry<F>> {
    pred.grid().ensure_same(reference.grid())?;
    let ious: Vec<F> = matching.pairs.iter().map(|p| F::from_f64_lossy(p.iou)).collect();
    let scores = panoptic_scores(&ious, matching.fp(), matching.fn_());
    if matching.pairs.is_empty() {
        return Ok(PanopticEntry {
            dsc: scores.sq,
            assd: None,
            scores,
        });
    }
    let n = F::from_usize_lossy(matching.pairs.len());
    let dsc = matching.pairs.iter().map(|p| F::from_f64_lossy(p.dice())).sum::<F>() / n;

    let pb = id_bounds(pred);
    let rb = id_bounds(reference);
    let grid = *pred.grid();
    let (pd, rd) = (pred.data(), reference.data());
    let distances: Vec<F> = matching
        .pairs
        .par_iter()
        .map(|p| {
            let region =
                union_bounds(pb[p.pred as usize].unwrap(), rb[p.reference as usize].unwrap()).padded(1, grid.dims);
            let (a, b) = (p.pred as u16, p.reference as u16);
            assd_in(&grid, region, |i| pd[i] == a, |i| rd[i] == b)
        })
        .collect::<Result<_>>()?;
    Ok(PanopticEntry {
        scores,
        dsc,
        assd: Some(distances.into_iter().sum::<F>() / n),
    })
}

/// Bounding box of every label value, indexed by value.
pub(crate) fn id_bounds(vol: &Volume<u16>) -> Vec<Option<Bounds>> {
    let mut out: Vec<Option<Bounds>> = Vec::new();
    let g = vol.grid();
    for (i, &v) in vol.data().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let v = v as usize;
        if out.len() <= v {
            out.resize(v + 1, None);
        }
        let c = g.coords(i);
        match &mut out[v] {
            Some(b) => b.include(c),
            slot => *slot = Some(Bounds::point(c)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::match_instances;
    use crate::volume::Grid;

    #[test]
    fn fixture_two_tp() {
        let s = panoptic_scores(&[0.8f64, 0.6], 1, 1);
        assert!((s.rq - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.sq - 0.7).abs() < 1e-12);
        assert!((s.pq - 0.7 * 2.0 / 3.0).abs() < 1e-12);
        assert!((s.pq - 0.4667).abs() < 1e-4);
    }

    #[test]
    fn no_true_positives() {
        let s = panoptic_scores::<f64>(&[], 2, 3);
        assert_eq!((s.rq, s.sq, s.pq), (0.0, 0.0, 0.0));
    }

    #[test]
    fn perfect() {
        let s = panoptic_scores(&[1.0f32; 5], 0, 0);
        assert_eq!((s.rq, s.sq, s.pq), (1.0, 1.0, 1.0));
    }

    #[test]
    fn entry_on_identical_masks() {
        let g = Grid::new([8, 3, 3], [1.0; 3]).unwrap();
        let v = Volume::from_fn(g, |c| (c[0] / 4) as u16 + 1);
        let m = match_instances(&v, &v, None).unwrap();
        let e = panoptic::<f64>(&m, &v, &v).unwrap();
        assert_eq!(e.scores.pq, 1.0);
        assert_eq!(e.dsc, 1.0);
        assert_eq!(e.assd, Some(0.0));
    }
}
