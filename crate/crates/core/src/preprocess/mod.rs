//! Bandpass filtering and amplitude normalization.
//!
//! Filtering is applied forward and backward (zero net phase) so S1/S2
//! events stay aligned with their annotations. Edges are extended by odd
//! reflection and each section starts from its steady-state response to the
//! first sample.

mod butterworth;

pub use butterworth::{design_bandpass, BandpassSpec, FilterCoefficients, Section};

use crate::dataset::Waveform;
use crate::error::{PcgError, Result};

/// Edge padding used by [`filter_zero_phase`]: three times the number of
/// poles.
pub fn pad_length(coeffs: &FilterCoefficients) -> usize {
    3 * 2 * coeffs.sections.len()
}

pub fn filter_zero_phase(coeffs: &FilterCoefficients, w: &Waveform) -> Result<Waveform> {
    let pad = pad_length(coeffs);
    let x = &w.samples;
    if x.len() <= pad {
        return Err(PcgError::InputTooShort {
            what: "zero-phase filter",
            required: pad + 1,
            actual: x.len(),
        });
    }
    let n = x.len();

    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = steady_state(coeffs);
    let mut y = sos_filter(coeffs, &ext, &zi, ext[0]);
    y.reverse();
    let first = y[0];
    let mut y = sos_filter(coeffs, &y, &zi, first);
    y.reverse();

    Ok(Waveform {
        samples: y[pad..pad + n].to_vec(),
        sample_rate: w.sample_rate,
    })
}

/// Per-section transposed-direct-form-II states for a unit step that has
/// been applied forever, already scaled by the DC gain of earlier sections.
fn steady_state(coeffs: &FilterCoefficients) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    coeffs
        .sections
        .iter()
        .map(|s| {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
            let z1 = dc - b0;
            let z2 = b2 - a2 * dc;
            let state = [scale * z1, scale * z2];
            scale *= dc;
            state
        })
        .collect()
}

fn sos_filter(coeffs: &FilterCoefficients, x: &[f64], zi: &[[f64; 2]], x0: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    for (s, z) in coeffs.sections.iter().zip(zi) {
        let [b0, b1, b2] = s.b;
        let [a1, a2] = s.a;
        let (mut z1, mut z2) = (z[0] * x0, z[1] * x0);
        for v in y.iter_mut() {
            let input = *v;
            let out = b0 * input + z1;
            z1 = b1 * input - a1 * out + z2;
            z2 = b2 * input - a2 * out;
            *v = out;
        }
    }
    y
}

/// Maps samples to `[0, 1]`; a constant signal maps to 0.5 everywhere.
pub fn minmax_normalize(w: &Waveform) -> Waveform {
    Waveform {
        samples: minmax(&w.samples),
        sample_rate: w.sample_rate,
    }
}

pub(crate) fn minmax(x: &[f64]) -> Vec<f64> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if x.is_empty() || hi <= lo {
        return vec![0.5; x.len()];
    }
    let range = hi - lo;
    x.iter().map(|&v| (v - lo) / range).collect()
}

/// Bandpass (zero-phase) followed by min-max normalization.
pub fn preprocess(w: &Waveform, spec: &BandpassSpec) -> Result<Waveform> {
    if spec.sample_rate != w.sample_rate {
        return Err(PcgError::InvalidConfig(format!(
            "filter designed for {} Hz applied to {} Hz audio",
            spec.sample_rate, w.sample_rate
        )));
    }
    let coeffs = design_bandpass(spec)?;
    let filtered = filter_zero_phase(&coeffs, w)?;
    Ok(minmax_normalize(&filtered))
}
