//! STFT and mel-spectrogram front end.
//!
//! Frames are Hann-windowed and not centered, so an input of `L` samples
//! yields `floor((L - fft_size) / hop_length) + 1` frames. The mel filterbank
//! uses the Slaney mel scale (linear below 1 kHz, logarithmic above) with
//! area-normalized triangles. Spectrogram values are power in dB relative to
//! the spectrogram's own maximum, floored at `log_floor_db`.
//!
//! The fixed-window preset pairs 352 mel bands with a 512-point FFT (257
//! bins). At 4 kHz every triangle still spans a bin, but at higher sample
//! rates some filters cover no bin and stay zero;
//! [`MelFilterbank::empty_rows`] reports how many.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dataset::{Embedding, Waveform};
use crate::error::{PcgError, Result};
use crate::segment::SegmentMethod;

/// Pooled per-band statistics share the embedding file format.
pub type FeatureVector = Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_mels: usize,
    pub fft_size: usize,
    pub hop_length: usize,
    pub sample_rate: u32,
    #[serde(default)]
    pub fmin: f64,
    /// Defaults to Nyquist.
    #[serde(default)]
    pub fmax: Option<f64>,
    #[serde(default = "default_floor")]
    pub log_floor_db: f64,
}

fn default_floor() -> f64 {
    -80.0
}

impl FeatureConfig {
    /// Fixed-window front end: 352 mel bands, FFT 512, hop 352.
    pub fn fixed_mode(sample_rate: u32) -> Self {
        Self::with(352, 512, 352, sample_rate)
    }

    /// Cycle-normalized front end: 128 mel bands, FFT 1152, hop 288.
    pub fn cycle_mode(sample_rate: u32) -> Self {
        Self::with(128, 1152, 288, sample_rate)
    }

    pub fn for_method(method: SegmentMethod, sample_rate: u32) -> Self {
        match method {
            SegmentMethod::Fixed => Self::fixed_mode(sample_rate),
            SegmentMethod::Cycle => Self::cycle_mode(sample_rate),
        }
    }

    fn with(n_mels: usize, fft_size: usize, hop_length: usize, sample_rate: u32) -> Self {
        FeatureConfig {
            n_mels,
            fft_size,
            hop_length,
            sample_rate,
            fmin: 0.0,
            fmax: None,
            log_floor_db: default_floor(),
        }
    }

    pub fn fmax(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PcgError::InvalidConfig(m));
        if self.n_mels == 0 || self.fft_size == 0 || self.hop_length == 0 || self.sample_rate == 0 {
            return bad("n_mels, fft_size, hop_length and sample_rate must be positive".into());
        }
        if self.hop_length > self.fft_size {
            return bad(format!(
                "hop_length {} exceeds fft_size {}",
                self.hop_length, self.fft_size
            ));
        }
        let nyq = self.sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax() && self.fmax() <= nyq) {
            return bad(format!(
                "need 0 <= fmin < fmax <= {nyq} Hz, got {} and {}",
                self.fmin,
                self.fmax()
            ));
        }
        Ok(())
    }

    /// Frame count for an input of `len` samples, `None` when shorter than
    /// one FFT.
    pub fn n_frames(&self, len: usize) -> Option<usize> {
        (len >= self.fft_size).then(|| (len - self.fft_size) / self.hop_length + 1)
    }
}

const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = 15.0;
const LIN_STEP: f64 = 200.0 / 3.0;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / LIN_STEP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * LIN_STEP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// Triangular mel filters, `n_mels × (fft_size / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
    /// Center frequency of every filter in Hz.
    pub centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn empty_rows(&self) -> usize {
        self.weights
            .axis_iter(Axis(0))
            .filter(|row| row.iter().all(|&w| w == 0.0))
            .count()
    }
}

pub fn mel_filterbank(cfg: &FeatureConfig) -> Result<MelFilterbank> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let nyq = cfg.sample_rate as f64 / 2.0;
    let fft_freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * nyq / (n_bins - 1) as f64)
        .collect();
    let (mel_lo, mel_hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax()));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();

    let mut weights = Array2::<f64>::zeros((cfg.n_mels, n_bins));
    for m in 0..cfg.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        for (k, &f) in fft_freqs.iter().enumerate() {
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            let w = rising.min(falling).max(0.0);
            weights[[m, k]] = w * norm;
        }
    }
    Ok(MelFilterbank {
        weights,
        centers: edges[1..=cfg.n_mels].to_vec(),
    })
}

/// Reusable STFT + mel front end for one [`FeatureConfig`].
pub struct MelExtractor {
    cfg: FeatureConfig,
    filterbank: MelFilterbank,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl MelExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        let filterbank = mel_filterbank(&cfg)?;
        let empty = filterbank.empty_rows();
        if empty > 0 {
            log::debug!(
                "{empty} of {} mel filters cover no FFT bin (fft_size {})",
                cfg.n_mels,
                cfg.fft_size
            );
        }
        Ok(MelExtractor {
            window: hann(cfg.fft_size),
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_size),
            filterbank,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn magnitude(&self, x: &[f64]) -> Result<Array2<f64>> {
        stft_with(
            x,
            self.cfg.fft_size,
            self.cfg.hop_length,
            &self.window,
            &*self.fft,
        )
    }

    pub fn compute(&self, w: &Waveform) -> Result<MelSpectrogram> {
        if w.sample_rate != self.cfg.sample_rate {
            return Err(PcgError::InvalidConfig(format!(
                "features configured for {} Hz, got {} Hz audio",
                self.cfg.sample_rate, w.sample_rate
            )));
        }
        let power = self.magnitude(&w.samples)?.mapv(|m| m * m);
        let mel = self.filterbank.weights.dot(&power);
        let peak = mel.iter().cloned().fold(0.0f64, f64::max);
        let floor = self.cfg.log_floor_db;
        let values = if peak > 0.0 {
            mel.mapv(|p| {
                if p > 0.0 {
                    (10.0 * (p / peak).log10()).max(floor)
                } else {
                    floor
                }
            })
        } else {
            Array2::from_elem(mel.raw_dim(), floor)
        };
        Ok(MelSpectrogram {
            values,
            config: self.cfg,
        })
    }
}

/// Hann-windowed, non-centered STFT magnitude, `(fft_size / 2 + 1) × frames`.
pub fn stft_magnitude(x: &[f64], fft_size: usize, hop_length: usize) -> Result<Array2<f64>> {
    if fft_size == 0 || hop_length == 0 {
        return Err(PcgError::InvalidConfig(
            "fft_size and hop_length must be positive".into(),
        ));
    }
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    stft_with(x, fft_size, hop_length, &hann(fft_size), &*fft)
}

fn stft_with(
    x: &[f64],
    fft_size: usize,
    hop: usize,
    window: &[f64],
    fft: &dyn Fft<f64>,
) -> Result<Array2<f64>> {
    if x.len() < fft_size {
        return Err(PcgError::InputTooShort {
            what: "STFT",
            required: fft_size,
            actual: x.len(),
        });
    }
    let n_frames = (x.len() - fft_size) / hop + 1;
    let n_bins = fft_size / 2 + 1;
    let mut out = Array2::<f64>::zeros((n_bins, n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for f in 0..n_frames {
        let frame = &x[f * hop..f * hop + fft_size];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..n_bins {
            out[[k, f]] = buf[k].norm();
        }
    }
    Ok(out)
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// dB-scaled mel spectrogram, `n_mels × n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Array2<f64>,
    pub config: FeatureConfig,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

pub fn mel_spectrogram(w: &Waveform, cfg: &FeatureConfig) -> Result<MelSpectrogram> {
    MelExtractor::new(*cfg)?.compute(w)
}

/// Per-band temporal mean followed by per-band (population) standard
/// deviation: `2 × n_mels` values.
pub fn pool_features(m: &MelSpectrogram) -> Result<Vec<f64>> {
    let n = m.n_frames();
    if n < 2 {
        return Err(PcgError::InputTooShort {
            what: "feature pooling (frames)",
            required: 2,
            actual: n,
        });
    }
    let means: Vec<f64> = m
        .values
        .axis_iter(Axis(0))
        .map(|row| row.sum() / n as f64)
        .collect();
    let stds: Vec<f64> = m
        .values
        .axis_iter(Axis(0))
        .zip(&means)
        .map(|(row, &mu)| (row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    Ok(means.into_iter().chain(stds).collect())
}
