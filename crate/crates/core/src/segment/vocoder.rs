//! Phase-vocoder time-scale modification.
//!
//! Hann analysis/synthesis windows with 75% overlap. The STFT is centered
//! (reflect padding of half a window), magnitudes are linearly interpolated
//! between analysis frames and phases are advanced by each bin's measured
//! instantaneous frequency, which keeps pitch fixed while duration changes.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PcgError, Result};

pub const DEFAULT_WINDOW: usize = 1024;
pub const MIN_WINDOW: usize = 64;

/// Analysis window for an input of `len` samples: 1024, or the largest power
/// of two not exceeding half the input. `None` when that would be smaller
/// than [`MIN_WINDOW`].
pub fn window_for(len: usize) -> Option<usize> {
    if len >= 2 * DEFAULT_WINDOW {
        return Some(DEFAULT_WINDOW);
    }
    let half = len / 2;
    if half < MIN_WINDOW {
        return None;
    }
    Some(1usize << (usize::BITS - 1 - half.leading_zeros()))
}

/// Smallest input length [`stretch`] accepts.
pub const MIN_INPUT: usize = 2 * MIN_WINDOW;

/// Time-stretches `x` to exactly `target_len` samples without changing
/// pitch.
pub fn stretch(x: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n_fft = window_for(x.len()).ok_or(PcgError::InputTooShort {
        what: "phase vocoder",
        required: MIN_INPUT,
        actual: x.len(),
    })?;
    if target_len == 0 {
        return Err(PcgError::InvalidConfig(
            "target length must be positive".into(),
        ));
    }
    let hop = n_fft / 4;
    let rate = x.len() as f64 / target_len as f64;

    let window = hann(n_fft);
    let (fft, ifft) = plans(n_fft);
    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        fft.get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len())
    ];
    let n_bins = n_fft / 2 + 1;

    // Centered analysis frames, kept as magnitude and phase. Two real
    // frames share one complex transform.
    let pad = n_fft / 2;
    let padded = reflect_pad(x, pad);
    let n_frames = 1 + (padded.len() - n_fft) / hop;
    let frame =
        |f: usize| -> Option<&[f64]> { (f < n_frames).then(|| &padded[f * hop..f * hop + n_fft]) };
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut mags: Vec<Vec<f64>> = Vec::with_capacity(n_frames + 2);
    let mut phases: Vec<Vec<f64>> = Vec::with_capacity(n_frames + 2);
    for f in (0..n_frames).step_by(2) {
        let (a, b) = (frame(f).unwrap_or(&[]), frame(f + 1));
        for (j, v) in buf.iter_mut().enumerate() {
            *v = Complex64::new(a[j] * window[j], b.map_or(0.0, |b| b[j] * window[j]));
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let (mut ma, mut pa) = (Vec::with_capacity(n_bins), Vec::with_capacity(n_bins));
        let (mut mb, mut pb) = (Vec::with_capacity(n_bins), Vec::with_capacity(n_bins));
        for k in 0..n_bins {
            let z = buf[k];
            let zc = buf[(n_fft - k) % n_fft].conj();
            let ca = (z + zc) * 0.5;
            let cb = (z - zc) * Complex64::new(0.0, -0.5);
            ma.push(ca.norm_sqr().sqrt());
            pa.push(ca.arg());
            mb.push(cb.norm_sqr().sqrt());
            pb.push(cb.arg());
        }
        mags.push(ma);
        phases.push(pa);
        if b.is_some() {
            mags.push(mb);
            phases.push(pb);
        }
    }
    // Interpolation past the last frame sees silence.
    mags.push(vec![0.0; n_bins]);
    phases.push(vec![0.0; n_bins]);

    let phase_advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * PI * k as f64 * hop as f64 / n_fft as f64)
        .collect();

    // Synthesis half-spectra.
    let mut spectra: Vec<Vec<Complex64>> = Vec::new();
    let mut phase = phases[0].clone();
    let mut t = 0.0;
    while t < n_frames as f64 {
        let i = (t.floor() as usize).min(n_frames - 1);
        let alpha = t - i as f64;
        let (m0, m1) = (&mags[i], &mags[i + 1]);
        spectra.push(
            (0..n_bins)
                .map(|k| Complex64::from_polar((1.0 - alpha) * m0[k] + alpha * m1[k], phase[k]))
                .collect(),
        );
        let (p0, p1) = (&phases[i], &phases[i + 1]);
        for k in 0..n_bins {
            let mut dphi = p1[k] - p0[k] - phase_advance[k];
            dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
            phase[k] += phase_advance[k] + dphi;
        }
        t += rate;
    }

    // Weighted overlap-add; the inverse of `A + iB` yields frame `A` in the
    // real part and frame `B` in the imaginary part.
    let out_len = n_fft + hop * (spectra.len() - 1);
    let mut y = vec![0.0; out_len];
    let mut wsum = vec![0.0; out_len];
    let i = Complex64::new(0.0, 1.0);
    for f in (0..spectra.len()).step_by(2) {
        let a = &spectra[f];
        let b = spectra.get(f + 1);
        for k in 0..n_fft {
            let (ak, bk) = if k == 0 || k == n_fft / 2 {
                // These bins of a real frame are real.
                (
                    Complex64::new(a[k].re, 0.0),
                    Complex64::new(b.map_or(0.0, |b| b[k].re), 0.0),
                )
            } else if k < n_bins {
                (a[k], b.map_or(Complex64::new(0.0, 0.0), |b| b[k]))
            } else {
                (
                    a[n_fft - k].conj(),
                    b.map_or(Complex64::new(0.0, 0.0), |b| b[n_fft - k].conj()),
                )
            };
            buf[k] = ak + i * bk;
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let scale = 1.0 / n_fft as f64;
        for (g, part) in [(f, false), (f + 1, true)] {
            if part && b.is_none() {
                break;
            }
            let off = g * hop;
            for j in 0..n_fft {
                let v = if part { buf[j].im } else { buf[j].re };
                y[off + j] += v * scale * window[j];
                wsum[off + j] += window[j] * window[j];
            }
        }
    }

    for (v, w) in y.iter_mut().zip(&wsum) {
        if *w > 1e-10 {
            *v /= w;
        }
    }

    let mut out: Vec<f64> = y.into_iter().skip(pad).take(target_len).collect();
    if out.len() < target_len {
        let edge = out.last().copied().unwrap_or(0.0);
        out.resize(target_len, edge);
    }
    Ok(out)
}

/// Forward and inverse plans, cached per thread.
fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    thread_local! {
        static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn hann(n: usize) -> Vec<f64> {
    // Periodic form, so 75%-overlapped squares sum to a constant.
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i.min(n - 1)]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| x[n - 1 - i.min(n - 1)]));
    out
}
