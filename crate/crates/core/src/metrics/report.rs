//! Per-volume evaluation report with the structure and metric names of the
//! published result tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{match_instances, MatchedPair};
use super::overlap::OverlapCounts;
use super::panoptic::panoptic;
use super::surface::{assd_in, union_bounds};
use crate::error::{Error, Result};
use crate::labels::{self, InstanceKind};
use crate::volume::{Bounds, Volume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub structure: String,
    #[serde(rename = "DSC")]
    pub dsc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstructureMetrics {
    pub structure: String,
    #[serde(rename = "DSC")]
    pub dsc: f64,
    /// `None` when either side has no voxels of the structure.
    #[serde(rename = "ASSD")]
    pub assd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub structure: String,
    #[serde(rename = "DSC")]
    pub dsc: f64,
    #[serde(rename = "RQ")]
    pub rq: f64,
    #[serde(rename = "SQ")]
    pub sq: f64,
    #[serde(rename = "PQ")]
    pub pq: f64,
    #[serde(rename = "ASSD")]
    pub assd: Option<f64>,
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<u32>,
    pub unmatched_ref: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub global: Vec<GlobalMetrics>,
    pub substructures: Vec<SubstructureMetrics>,
    /// Empty when no instance masks were evaluated.
    pub instance: Vec<InstanceMetrics>,
}

/// One flattened `section,structure,metric,value` row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub section: String,
    pub structure: String,
    pub metric: String,
    pub value: Option<f64>,
}

type CodeSet = &'static [u16];

pub const GLOBAL_STRUCTURES: [(&str, CodeSet); 4] = [
    ("vertebra", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]),
    ("ivd", &[labels::IVD]),
    ("spinal_canal", &[labels::SPINAL_CANAL]),
    ("spinal_cord", &[labels::SPINAL_CORD]),
];

pub const SUBSTRUCTURES: [(&str, CodeSet); 6] = [
    ("arcus", &[2]),
    ("spinous_process", &[3]),
    ("articular_inferior", &[4, 5]),
    ("articular_superior", &[6, 7]),
    ("costal_process", &[8, 9]),
    ("corpus", &[labels::CORPUS]),
];

pub const INSTANCE_STRUCTURES: [(&str, InstanceKind); 2] =
    [("vertebra", InstanceKind::Vertebra), ("ivd", InstanceKind::Ivd)];

fn member_table(codes: CodeSet) -> [bool; 65536] {
    let mut t = [false; 65536];
    for &c in codes {
        t[c as usize] = true;
    }
    t
}

fn bounds_where(vol: &Volume<u16>, table: &[bool; 65536]) -> Option<Bounds> {
    let mut b: Option<Bounds> = None;
    let g = vol.grid();
    for (i, &v) in vol.data().iter().enumerate() {
        if table[v as usize] {
            let c = g.coords(i);
            match &mut b {
                Some(b) => b.include(c),
                None => b = Some(Bounds::point(c)),
            }
        }
    }
    b
}

/// Evaluate one predicted volume against its reference.
pub fn evaluate(
    pred: &Volume<u16>,
    reference: &Volume<u16>,
    instances: Option<(&Volume<u16>, &Volume<u16>)>,
) -> Result<EvaluationReport> {
    pred.grid().ensure_same(reference.grid())?;
    let (pd, rd) = (pred.data(), reference.data());
    let global = GLOBAL_STRUCTURES
        .par_iter()
        .map(|(name, codes)| {
            let t = member_table(codes);
            let c = OverlapCounts::from_fn(pd.len(), |i| t[pd[i] as usize], |i| t[rd[i] as usize]);
            GlobalMetrics {
                structure: name.to_string(),
                dsc: c.dice(),
            }
        })
        .collect();
    let substructures = SUBSTRUCTURES
        .par_iter()
        .map(|(name, codes)| {
            let t = member_table(codes);
            let c = OverlapCounts::from_fn(pd.len(), |i| t[pd[i] as usize], |i| t[rd[i] as usize]);
            let assd = match (bounds_where(pred, &t), bounds_where(reference, &t)) {
                (Some(a), Some(b)) => {
                    let region = union_bounds(a, b).padded(1, pred.dims());
                    Some(assd_in::<f64>(
                        pred.grid(),
                        region,
                        |i| t[pd[i] as usize],
                        |i| t[rd[i] as usize],
                    )?)
                }
                _ => None,
            };
            Ok(SubstructureMetrics {
                structure: name.to_string(),
                dsc: c.dice(),
                assd,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut instance = Vec::new();
    if let Some((pi, ri)) = instances {
        if !pi.grid().same_as(pred.grid()) || !ri.grid().same_as(pred.grid()) {
            return Err(Error::GridMismatch(
                "instance masks do not share the semantic grid".into(),
            ));
        }
        for (name, kind) in INSTANCE_STRUCTURES {
            let m = match_instances(pi, ri, Some(kind))?;
            let e = panoptic::<f64>(&m, pi, ri)?;
            instance.push(InstanceMetrics {
                structure: name.to_string(),
                dsc: e.dsc,
                rq: e.scores.rq,
                sq: e.scores.sq,
                pq: e.scores.pq,
                assd: e.assd,
                tp: e.scores.tp,
                fp: e.scores.fp,
                fn_: e.scores.fn_,
                pairs: m.pairs,
                unmatched_pred: m.unmatched_pred,
                unmatched_ref: m.unmatched_ref,
            });
        }
    }
    Ok(EvaluationReport {
        global,
        substructures,
        instance,
    })
}

impl EvaluationReport {
    pub fn rows(&self) -> Vec<MetricRow> {
        let row = |section: &str, structure: &str, metric: &str, value: Option<f64>| MetricRow {
            section: section.into(),
            structure: structure.into(),
            metric: metric.into(),
            value,
        };
        let mut out = Vec::new();
        for g in &self.global {
            out.push(row("global", &g.structure, "DSC", Some(g.dsc)));
        }
        for s in &self.substructures {
            out.push(row("substructures", &s.structure, "DSC", Some(s.dsc)));
            out.push(row("substructures", &s.structure, "ASSD", s.assd));
        }
        for i in &self.instance {
            for (metric, v) in [
                ("DSC", Some(i.dsc)),
                ("RQ", Some(i.rq)),
                ("SQ", Some(i.sq)),
                ("PQ", Some(i.pq)),
                ("ASSD", i.assd),
            ] {
                out.push(row("instance", &i.structure, metric, v));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows())
    }
}

pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("section,structure,metric,value\n");
    for r in rows {
        let v = r.value.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.section, r.structure, r.metric, v));
    }
    s
}
