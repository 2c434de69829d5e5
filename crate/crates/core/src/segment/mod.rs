//! Splitting recordings into equal-length chunks.
//!
//! Two methods are supported:
//!
//! * **Fixed** windows of `seconds × sample_rate` samples. A trailing
//!   remainder survives only when it holds strictly more than 65% of a full
//!   window; it is then padded with its own median.
//! * **Cycle** normalization: groups of `n_cycles` consecutive S1→S1 heart
//!   cycles, each group time-stretched (pitch preserved) to the same sample
//!   count. Groups with fewer cycles are dropped. Inter-onset gaps are not
//!   checked, so a missing S1 annotation yields one long cycle that is
//!   compressed along with its neighbours.

pub mod vocoder;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{resample_to_len, Waveform};
use crate::error::{PcgError, Result};
use crate::util::median;

/// Remainder blocks must hold strictly more than this fraction of a window.
pub const REMAINDER_KEEP_FRACTION: f64 = 0.65;
/// Cycles longer than this are reported (not filtered).
pub const LONG_CYCLE_WARN_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMethod {
    Fixed,
    Cycle,
}

impl FromStr for SegmentMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(SegmentMethod::Fixed),
            "cycle" => Ok(SegmentMethod::Cycle),
            other => Err(format!("unknown method `{other}` (fixed|cycle)")),
        }
    }
}

impl fmt::Display for SegmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentMethod::Fixed => "fixed",
            SegmentMethod::Cycle => "cycle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub method: SegmentMethod,
    /// Target chunk duration in seconds.
    pub seconds: f64,
    pub sample_rate: u32,
    /// Heart cycles per chunk (cycle method only).
    pub n_cycles: usize,
}

impl SegmentConfig {
    pub fn fixed(seconds: f64, sample_rate: u32) -> Self {
        SegmentConfig {
            method: SegmentMethod::Fixed,
            seconds,
            sample_rate,
            n_cycles: 10,
        }
    }

    pub fn cycle(n_cycles: usize, seconds: f64, sample_rate: u32) -> Self {
        SegmentConfig {
            method: SegmentMethod::Cycle,
            seconds,
            sample_rate,
            n_cycles,
        }
    }

    /// Samples per chunk: `round(seconds × sample_rate)`.
    pub fn chunk_len(&self) -> usize {
        (self.seconds * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.seconds.is_nan()
            || self.seconds <= 0.0
            || self.sample_rate == 0
            || self.chunk_len() < 1
        {
            return Err(PcgError::InvalidConfig(format!(
                "seconds × sample_rate must be at least 1 (seconds = {}, sample_rate = {})",
                self.seconds, self.sample_rate
            )));
        }
        if self.method == SegmentMethod::Cycle && self.n_cycles == 0 {
            return Err(PcgError::InvalidConfig(
                "n_cycles must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Identity of the recording a chunk is cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkOrigin {
    pub recording_id: String,
    pub patient_id: String,
}

impl ChunkOrigin {
    pub fn new(recording_id: impl Into<String>, patient_id: impl Into<String>) -> Self {
        ChunkOrigin {
            recording_id: recording_id.into(),
            patient_id: patient_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub recording_id: String,
    pub patient_id: String,
    pub index: usize,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub method: SegmentMethod,
    /// `(start, end)` in seconds of the original recording.
    pub source_span: (f64, f64),
    pub padded: bool,
    /// Duration ratio of a cycle chunk (target over source, times the rate
    /// ratio).
    pub stretch_factor: Option<f64>,
}

impl Chunk {
    pub fn chunk_id(&self) -> String {
        format!("{}_{}_{:03}", self.recording_id, self.method, self.index)
    }

    pub fn waveform(&self) -> Waveform {
        Waveform {
            samples: self.samples.clone(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Inputs of the cycle stretch-factor formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchSpec {
    pub target_duration: f64,
    pub cycle_duration: f64,
    pub target_sr: f64,
    pub original_sr: f64,
}

/// `(target_duration / cycle_duration) × (target_sr / original_sr)`.
pub fn compute_stretch_factor(s: &StretchSpec) -> f64 {
    (s.target_duration / s.cycle_duration) * (s.target_sr / s.original_sr)
}

/// Time-stretches to exactly `target_len` samples, keeping pitch.
pub fn stretch_to_length(w: &Waveform, target_len: usize) -> Result<Waveform> {
    Ok(Waveform {
        samples: vocoder::stretch(&w.samples, target_len)?,
        sample_rate: w.sample_rate,
    })
}

pub fn chunk_fixed(w: &Waveform, cfg: &SegmentConfig, origin: &ChunkOrigin) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    if w.sample_rate != cfg.sample_rate {
        return Err(PcgError::InvalidConfig(format!(
            "waveform is {} Hz but segmentation expects {} Hz",
            w.sample_rate, cfg.sample_rate
        )));
    }
    let len = cfg.chunk_len();
    let sr = w.sample_rate as f64;
    let n_full = w.len() / len;
    let remainder = w.len() - n_full * len;

    let make = |index: usize, samples: Vec<f64>, start: usize, end: usize, padded: bool| Chunk {
        recording_id: origin.recording_id.clone(),
        patient_id: origin.patient_id.clone(),
        index,
        samples,
        sample_rate: w.sample_rate,
        method: SegmentMethod::Fixed,
        source_span: (start as f64 / sr, end as f64 / sr),
        padded,
        stretch_factor: None,
    };

    let mut chunks: Vec<Chunk> = (0..n_full)
        .map(|i| {
            let (a, b) = (i * len, (i + 1) * len);
            make(i, w.samples[a..b].to_vec(), a, b, false)
        })
        .collect();

    if remainder as f64 > REMAINDER_KEEP_FRACTION * len as f64 {
        let start = n_full * len;
        let tail = &w.samples[start..];
        let mut samples = tail.to_vec();
        samples.resize(len, median(tail));
        chunks.push(make(n_full, samples, start, w.len(), true));
    }
    Ok(chunks)
}

pub fn chunk_cycles(
    w: &Waveform,
    s1_onsets: &[f64],
    cfg: &SegmentConfig,
    origin: &ChunkOrigin,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    if let Some(pair) = s1_onsets.windows(2).find(|p| p[1] <= p[0]) {
        return Err(PcgError::InvalidConfig(format!(
            "S1 onsets must be strictly increasing ({} then {})",
            pair[0], pair[1]
        )));
    }
    let n = cfg.n_cycles;
    if s1_onsets.len() < n + 1 {
        return Ok(Vec::new());
    }
    let target_len = cfg.chunk_len();
    let src_sr = w.sample_rate as f64;
    let n_groups = (s1_onsets.len() - 1) / n;
    let mut chunks = Vec::with_capacity(n_groups);

    for g in 0..n_groups {
        let onsets = &s1_onsets[g * n..=(g + 1) * n];
        let (start, end) = (onsets[0], onsets[n]);
        for c in onsets.windows(2) {
            if c[1] - c[0] > LONG_CYCLE_WARN_SECONDS {
                log::warn!(
                    "{}: cycle {:.3}-{:.3} s lasts {:.2} s (missing S1 annotation?)",
                    origin.recording_id,
                    c[0],
                    c[1],
                    c[1] - c[0]
                );
            }
        }
        let i0 = ((start * src_sr).round().max(0.0) as usize).min(w.len());
        let i1 = ((end * src_sr).round().max(0.0) as usize).min(w.len());
        if i1 < i0 + 2 {
            log::warn!(
                "{}: cycle group {:.3}-{:.3} s lies outside the audio; skipped",
                origin.recording_id,
                start,
                end
            );
            continue;
        }
        let mut segment = w.samples[i0..i1].to_vec();
        if w.sample_rate != cfg.sample_rate {
            let n_out = (segment.len() as f64 * cfg.sample_rate as f64 / src_sr)
                .round()
                .max(2.0) as usize;
            segment = resample_to_len(&segment, n_out);
        }
        let samples = if segment.len() >= vocoder::MIN_INPUT {
            vocoder::stretch(&segment, target_len)?
        } else {
            log::warn!(
                "{}: {}-sample cycle group too short for the phase vocoder; interpolating",
                origin.recording_id,
                segment.len()
            );
            resample_to_len(&segment, target_len)
        };
        let factor = compute_stretch_factor(&StretchSpec {
            target_duration: cfg.seconds,
            cycle_duration: end - start,
            target_sr: cfg.sample_rate as f64,
            original_sr: src_sr,
        });
        chunks.push(Chunk {
            recording_id: origin.recording_id.clone(),
            patient_id: origin.patient_id.clone(),
            index: chunks.len(),
            samples,
            sample_rate: cfg.sample_rate,
            method: SegmentMethod::Cycle,
            source_span: (start, end),
            padded: false,
            stretch_factor: Some(factor),
        });
    }
    Ok(chunks)
}
