//! Semantic label codes and the instance id scheme.
//!
//! Vertebrae carry ids `1..=99` counted from the top, the disc below
//! vertebra `k` carries `100 + k` and the endplate group below vertebra `k`
//! carries `200 + k`. Spinal canal, cord and sacrum have no instance id.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u16)]
pub enum SemanticLabel {
    Background = 0,
    Corpus = 1,
    Arcus = 2,
    SpinousProcess = 3,
    ArticularInferiorLeft = 4,
    ArticularInferiorRight = 5,
    ArticularSuperiorLeft = 6,
    ArticularSuperiorRight = 7,
    CostalProcessLeft = 8,
    CostalProcessRight = 9,
    Endplate = 10,
    Ivd = 11,
    SpinalCanal = 12,
    SpinalCord = 13,
    Sacrum = 14,
}

/// Structural grouping of a semantic label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Background,
    VertebraSubstructure,
    Disc,
    SingleInstance,
}

impl SemanticLabel {
    pub const ALL: [SemanticLabel; 15] = [
        SemanticLabel::Background,
        SemanticLabel::Corpus,
        SemanticLabel::Arcus,
        SemanticLabel::SpinousProcess,
        SemanticLabel::ArticularInferiorLeft,
        SemanticLabel::ArticularInferiorRight,
        SemanticLabel::ArticularSuperiorLeft,
        SemanticLabel::ArticularSuperiorRight,
        SemanticLabel::CostalProcessLeft,
        SemanticLabel::CostalProcessRight,
        SemanticLabel::Endplate,
        SemanticLabel::Ivd,
        SemanticLabel::SpinalCanal,
        SemanticLabel::SpinalCord,
        SemanticLabel::Sacrum,
    ];

    pub const fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::InvalidLabel(format!("semantic code {code} is outside 0..=14")))
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticLabel::Background => "background",
            SemanticLabel::Corpus => "corpus",
            SemanticLabel::Arcus => "arcus",
            SemanticLabel::SpinousProcess => "spinous_process",
            SemanticLabel::ArticularInferiorLeft => "articular_inferior_left",
            SemanticLabel::ArticularInferiorRight => "articular_inferior_right",
            SemanticLabel::ArticularSuperiorLeft => "articular_superior_left",
            SemanticLabel::ArticularSuperiorRight => "articular_superior_right",
            SemanticLabel::CostalProcessLeft => "costal_process_left",
            SemanticLabel::CostalProcessRight => "costal_process_right",
            SemanticLabel::Endplate => "endplate",
            SemanticLabel::Ivd => "ivd",
            SemanticLabel::SpinalCanal => "spinal_canal",
            SemanticLabel::SpinalCord => "spinal_cord",
            SemanticLabel::Sacrum => "sacrum",
        }
    }

    pub fn kind(self) -> LabelKind {
        match self.code() {
            0 => LabelKind::Background,
            1..=10 => LabelKind::VertebraSubstructure,
            11 => LabelKind::Disc,
            _ => LabelKind::SingleInstance,
        }
    }
}

impl fmt::Display for SemanticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemanticLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidLabel(format!("unknown structure name {s:?}")))
    }
}

pub const CORPUS: u16 = SemanticLabel::Corpus.code();
pub const ENDPLATE: u16 = SemanticLabel::Endplate.code();
pub const IVD: u16 = SemanticLabel::Ivd.code();
pub const SPINAL_CANAL: u16 = SemanticLabel::SpinalCanal.code();
pub const SPINAL_CORD: u16 = SemanticLabel::SpinalCord.code();
pub const SACRUM: u16 = SemanticLabel::Sacrum.code();
pub const MAX_CODE: u16 = SACRUM;

/// Codes 1 to 10, the union of which is "vertebra" in global metrics.
pub fn vertebra_substructure_codes() -> std::ops::RangeInclusive<u16> {
    1..=ENDPLATE
}

pub fn is_vertebra_substructure(code: u16) -> bool {
    (1..=ENDPLATE).contains(&code)
}

/// Semantic codes whose voxels carry an instance id: vertebra
/// substructures (including endplates) and discs.
pub fn is_instance_relevant(code: u16) -> bool {
    (1..=IVD).contains(&code)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Vertebra,
    Ivd,
    Endplate,
}

/// A decoded instance id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct InstanceId {
    pub kind: InstanceKind,
    /// Vertical position of the owning vertebra, 1 = most superior.
    pub order: u32,
}

impl InstanceId {
    pub fn vertebra(k: u32) -> Self {
        InstanceId {
            kind: InstanceKind::Vertebra,
            order: k,
        }
    }

    pub fn ivd(k: u32) -> Self {
        InstanceId {
            kind: InstanceKind::Ivd,
            order: k,
        }
    }

    pub fn endplate(k: u32) -> Self {
        InstanceId {
            kind: InstanceKind::Endplate,
            order: k,
        }
    }

    pub fn value(self) -> u32 {
        match self.kind {
            InstanceKind::Vertebra => self.order,
            InstanceKind::Ivd => IVD_BASE + self.order,
            InstanceKind::Endplate => ENDPLATE_BASE + self.order,
        }
    }
}

pub const IVD_BASE: u32 = 100;
pub const ENDPLATE_BASE: u32 = 200;
pub const MAX_VERTEBRAE: u32 = 99;

pub fn classify_instance_id(value: u32) -> Result<InstanceId> {
    match value {
        1..=99 => Ok(InstanceId::vertebra(value)),
        101..=199 => Ok(InstanceId::ivd(value - IVD_BASE)),
        201..=299 => Ok(InstanceId::endplate(value - ENDPLATE_BASE)),
        _ => Err(Error::InvalidInstanceId(value)),
    }
}

/// The instance kind a semantic code belongs to, if any.
pub fn instance_kind_of(code: u16) -> Option<InstanceKind> {
    match code {
        ENDPLATE => Some(InstanceKind::Endplate),
        IVD => Some(InstanceKind::Ivd),
        c if is_vertebra_substructure(c) => Some(InstanceKind::Vertebra),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub code: u16,
    pub name: String,
    pub kind: LabelKind,
}

/// The `labels.json` document shipped next to every written mask.
pub fn label_map() -> Vec<LabelEntry> {
    SemanticLabel::ALL
        .iter()
        .map(|l| LabelEntry {
            code: l.code(),
            name: l.name().to_string(),
            kind: l.kind(),
        })
        .collect()
}

pub fn label_map_json() -> String {
    serde_json::to_string_pretty(&label_map()).expect("label map serializes")
}
