use std::path::Path;

use crate::error::{PcgError, Result};
use crate::util::write_atomic;

/// Heart-cycle state codes used by the annotation TSV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum HeartState {
    Unannotated = 0,
    S1 = 1,
    Systole = 2,
    S2 = 3,
    Diastole = 4,
}

impl HeartState {
    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            0 => HeartState::Unannotated,
            1 => HeartState::S1,
            2 => HeartState::Systole,
            3 => HeartState::S2,
            4 => HeartState::Diastole,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub onset: f64,
    pub offset: f64,
    pub state: HeartState,
}

/// Annotated state intervals, sorted by onset and non-overlapping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentationTrack {
    intervals: Vec<Interval>,
}

// Touching intervals in the text files may differ in the last printed digit.
const OVERLAP_EPS: f64 = 1e-9;

impl SegmentationTrack {
    /// Sorts by onset and validates ordering and non-overlap.
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            if !(iv.onset.is_finite() && iv.offset.is_finite()) || iv.onset >= iv.offset {
                return Err(PcgError::Other(format!(
                    "interval onset {} must precede offset {}",
                    iv.onset, iv.offset
                )));
            }
        }
        intervals.sort_by(|a, b| a.onset.total_cmp(&b.onset));
        for w in intervals.windows(2) {
            if w[0].offset > w[1].onset + OVERLAP_EPS {
                return Err(PcgError::Other(format!(
                    "overlapping intervals [{}, {}] and [{}, {}]",
                    w[0].onset, w[0].offset, w[1].onset, w[1].offset
                )));
            }
        }
        Ok(SegmentationTrack { intervals })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Parses a three-column (onset, offset, state) annotation file.
pub fn load_segmentation(path: &Path) -> Result<SegmentationTrack> {
    let text = std::fs::read_to_string(path).map_err(|e| PcgError::io(path, e))?;
    let mut intervals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(PcgError::parse(
                path,
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PcgError::parse(path, line_no, format!("non-numeric {what} `{s}`")))
        };
        let onset = num(fields[0], "onset")?;
        let offset = num(fields[1], "offset")?;
        let state = fields[2]
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0)
            .and_then(|v| HeartState::from_code(v as i64))
            .ok_or_else(|| {
                PcgError::parse(path, line_no, format!("state `{}` outside 0..4", fields[2]))
            })?;
        intervals.push(Interval {
            onset,
            offset,
            state,
        });
    }
    SegmentationTrack::new(intervals).map_err(|e| PcgError::parse(path, 0, e.to_string()))
}

pub fn write_segmentation(path: &Path, track: &SegmentationTrack) -> Result<()> {
    let mut out = String::new();
    for iv in track.intervals() {
        out.push_str(&format!(
            "{:.6}\t{:.6}\t{}\n",
            iv.onset,
            iv.offset,
            iv.state.code()
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Onset times (seconds) of every S1 interval, in increasing order.
pub fn extract_s1_onsets(track: &SegmentationTrack) -> Vec<f64> {
    track
        .intervals()
        .iter()
        .filter(|iv| iv.state == HeartState::S1)
        .map(|iv| iv.onset)
        .collect()
}

/// Counts S1→S1 cycles whose span is covered by annotated intervals with no
/// unannotated interval or time gap in between.
pub fn count_contiguous_cycles(track: &SegmentationTrack) -> usize {
    let ivs = track.intervals();
    let mut count = 0;
    let mut open = false;
    let mut prev_offset: Option<f64> = None;
    for iv in ivs {
        let gap = prev_offset.is_some_and(|p| iv.onset > p + 1e-6);
        if iv.state == HeartState::Unannotated || gap {
            open = false;
        }
        if iv.state == HeartState::S1 {
            if open {
                count += 1;
            }
            open = true;
        }
        prev_offset = Some(iv.offset);
    }
    count
}
