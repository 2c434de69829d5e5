//! Dataset ingestion: recording manifests, WAV audio, heart-state annotation
//! tracks and externally produced embeddings, plus band-limited resampling.

mod annotation;
mod embeddings;
mod labels;
mod manifest;
mod resample;
mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PcgError, Result};

pub use annotation::{
    count_contiguous_cycles, extract_s1_onsets, load_segmentation, write_segmentation, HeartState,
    Interval, SegmentationTrack,
};
pub use embeddings::{load_embeddings, write_embeddings, Embedding};
pub use labels::{label_map, load_labels, write_labels, LabelRecord, LABELS_HEADER};
pub use manifest::{load_manifest, resolve_path, write_manifest, MANIFEST_HEADER};
pub use resample::{resample, resample_to_len};
pub use wav::{load_wav, wav_info, write_wav, WavEncoding};

/// A mono waveform with real-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(PcgError::InvalidConfig(
                "sample_rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(PcgError::Other(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Murmur label of one recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Present,
    Absent,
    Unknown,
}

impl Label {
    /// `Some(1)` for murmur present, `Some(0)` for absent.
    pub fn as_binary(self) -> Option<u8> {
        match self {
            Label::Present => Some(1),
            Label::Absent => Some(0),
            Label::Unknown => None,
        }
    }

    pub fn from_binary(v: u8) -> Self {
        if v == 1 {
            Label::Present
        } else {
            Label::Absent
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "Present" => Ok(Label::Present),
            "Absent" => Ok(Label::Absent),
            "Unknown" => Ok(Label::Unknown),
            other => Err(format!("unknown label token `{other}`")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Present => "Present",
            Label::Absent => "Absent",
            Label::Unknown => "Unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    Neonate,
    Infant,
    Child,
    Adolescent,
    Unlabeled,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] = [
        AgeGroup::Neonate,
        AgeGroup::Infant,
        AgeGroup::Child,
        AgeGroup::Adolescent,
        AgeGroup::Unlabeled,
    ];

    fn parse(s: &str) -> std::result::Result<Option<Self>, String> {
        Ok(Some(match s.trim() {
            "" | "nan" | "NA" => return Ok(None),
            "Neonate" => AgeGroup::Neonate,
            "Infant" => AgeGroup::Infant,
            "Child" => AgeGroup::Child,
            "Adolescent" => AgeGroup::Adolescent,
            "Unlabeled" => AgeGroup::Unlabeled,
            other => return Err(format!("unknown age_group token `{other}`")),
        }))
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    fn parse(s: &str) -> std::result::Result<Option<Self>, String> {
        match s.trim() {
            "" | "nan" | "NA" => Ok(None),
            "Female" => Ok(Some(Sex::Female)),
            "Male" => Ok(Some(Sex::Male)),
            other => Err(format!("unknown sex token `{other}`")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub recording_id: String,
    pub patient_id: String,
    pub wav_path: String,
    pub seg_path: Option<String>,
    pub label: Label,
    pub age_group: Option<AgeGroup>,
    pub sex: Option<Sex>,
}
