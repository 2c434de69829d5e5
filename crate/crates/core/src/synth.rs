//! Synthetic phonocardiograms with ground-truth annotations.
//!
//! Each heart cycle carries an S1 burst (30–45 Hz) at its start and an S2
//! burst (50–70 Hz) at 35% of the cycle, both Gaussian-enveloped. Murmur
//! recordings add 100–400 Hz band-limited noise across systole. Annotation
//! coverage follows a block model: cycles are grouped into blocks and only a
//! leading run of each block is annotated, so unannotated stretches are
//! contiguous.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_manifest, write_segmentation, write_wav, AgeGroup, HeartState, Interval, Label,
    RecordingMeta, SegmentationTrack, WavEncoding, Waveform,
};
use crate::error::{PcgError, Result};
use crate::preprocess::{design_bandpass, filter_zero_phase, BandpassSpec};
use crate::util::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub duration: f64,
    pub heart_rate_bpm: f64,
    /// Each cycle's period is scaled by `1 + jitter · U[-1, 1]`.
    pub jitter: f64,
    pub murmur: bool,
    /// Murmur level relative to the noise floor.
    pub murmur_snr_db: f64,
    pub annotation_coverage: f64,
    /// Cycles per coverage block.
    pub coverage_block: usize,
    /// White-noise level relative to a unit-amplitude S1 burst.
    pub noise_floor_db: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate: 4000,
            duration: 30.0,
            heart_rate_bpm: 72.0,
            jitter: 0.05,
            murmur: false,
            murmur_snr_db: 20.0,
            annotation_coverage: 1.0,
            coverage_block: 8,
            noise_floor_db: -30.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PcgError::InvalidConfig(m));
        if !(30.0..=220.0).contains(&self.heart_rate_bpm) {
            return bad(format!(
                "heart_rate_bpm must lie in [30, 220], got {}",
                self.heart_rate_bpm
            ));
        }
        if !(0.0..=1.0).contains(&self.annotation_coverage) {
            return bad(format!(
                "annotation_coverage must lie in [0, 1], got {}",
                self.annotation_coverage
            ));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return bad(format!("jitter must lie in [0, 0.5), got {}", self.jitter));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.sample_rate < 2000 {
            return bad(format!(
                "sample_rate must be at least 2000 Hz, got {}",
                self.sample_rate
            ));
        }
        if self.coverage_block == 0 {
            return bad("coverage_block must be positive".into());
        }
        Ok(())
    }
}

/// Generated audio plus everything needed to check it.
#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub waveform: Waveform,
    pub track: SegmentationTrack,
    pub label: Label,
    /// Start time of every generated cycle.
    pub cycle_onsets: Vec<f64>,
    /// Envelope center of every generated S1 burst.
    pub s1_centers: Vec<f64>,
    /// Which cycles carry annotations.
    pub annotated: Vec<bool>,
}

struct Cycle {
    onset: f64,
    period: f64,
}

impl Cycle {
    fn s1_duration(&self) -> f64 {
        (0.15 * self.period).min(0.1)
    }
    fn s2_onset(&self) -> f64 {
        self.onset + 0.35 * self.period
    }
    fn s2_duration(&self) -> f64 {
        (0.12 * self.period).min(0.08)
    }
}

/// Annotated flags for `n` cycles: block `j` spanning cycles
/// `[s, e)` annotates its first `round(c·e) − round(c·s)` cycles, so the
/// total is `round(c·n)`.
pub fn coverage_pattern(n: usize, coverage: f64, block: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(n);
    let block = block.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let a =
            (coverage * end as f64).round() as usize - (coverage * start as f64).round() as usize;
        out.extend((start..end).map(|i| i - start < a));
        start = end;
    }
    out
}

fn add_burst(x: &mut [f64], sr: f64, onset: f64, duration: f64, freq: f64, amp: f64) {
    let center = onset + duration / 2.0;
    let sigma = duration / 6.0;
    let i0 = (onset * sr).floor().max(0.0) as usize;
    let i1 = (((onset + duration) * sr).ceil() as usize).min(x.len());
    for (i, v) in x.iter_mut().enumerate().take(i1).skip(i0) {
        let t = i as f64 / sr - center;
        *v += amp
            * (-0.5 * (t / sigma).powi(2)).exp()
            * (2.0 * std::f64::consts::PI * freq * t).cos();
    }
}

pub fn generate_recording(cfg: &SynthConfig) -> Result<SynthRecording> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration * sr).round() as usize;
    let base_period = 60.0 / cfg.heart_rate_bpm;

    let mut cycles = Vec::new();
    let mut t = 0.0;
    loop {
        let period = base_period * (1.0 + cfg.jitter * rng.random_range(-1.0..=1.0));
        let c = Cycle { onset: t, period };
        if c.onset + c.s1_duration() > cfg.duration {
            break;
        }
        t += period;
        cycles.push(c);
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise_std = 10f64.powf(cfg.noise_floor_db / 20.0);
    let mut x: Vec<f64> = (0..n)
        .map(|_| noise_std * normal.sample(&mut rng))
        .collect();

    let s1_freq = rng.random_range(30.0..=45.0);
    let s2_freq = rng.random_range(50.0..=70.0);
    let mut s1_centers = Vec::with_capacity(cycles.len());
    for c in &cycles {
        let amp1 = 1.0 + 0.1 * rng.random_range(-1.0..=1.0);
        let amp2 = 0.6 + 0.1 * rng.random_range(-1.0..=1.0);
        add_burst(&mut x, sr, c.onset, c.s1_duration(), s1_freq, amp1);
        add_burst(&mut x, sr, c.s2_onset(), c.s2_duration(), s2_freq, amp2);
        s1_centers.push(c.onset + c.s1_duration() / 2.0);
    }

    if cfg.murmur {
        add_murmur(
            &mut x,
            sr,
            &cycles,
            noise_std * 10f64.powf(cfg.murmur_snr_db / 20.0),
            &mut rng,
        )?;
    }

    let annotated = coverage_pattern(cycles.len(), cfg.annotation_coverage, cfg.coverage_block);
    let track = annotate(&cycles, &annotated, cfg.duration)?;
    Ok(SynthRecording {
        waveform: Waveform::new(x, cfg.sample_rate)?,
        track,
        label: if cfg.murmur {
            Label::Present
        } else {
            Label::Absent
        },
        cycle_onsets: cycles.iter().map(|c| c.onset).collect(),
        s1_centers,
        annotated,
    })
}

/// Band-limited noise scaled to `rms` inside each systole, with short
/// raised-cosine edges.
fn add_murmur(
    x: &mut [f64],
    sr: f64,
    cycles: &[Cycle],
    rms: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..x.len()).map(|_| normal.sample(rng)).collect();
    let spec = BandpassSpec {
        low_cut: 100.0,
        high_cut: 400.0,
        order: 4,
        sample_rate: sr as u32,
    };
    let band =
        filter_zero_phase(&design_bandpass(&spec)?, &Waveform::new(white, sr as u32)?)?.samples;
    let band_rms = (band.iter().map(|v| v * v).sum::<f64>() / band.len() as f64).sqrt();
    let gain = if band_rms > 0.0 { rms / band_rms } else { 0.0 };

    for c in cycles {
        let start = c.onset + c.s1_duration();
        let end = c.s2_onset();
        let i0 = (start * sr).round() as usize;
        let i1 = ((end * sr).round() as usize).min(x.len());
        if i1 <= i0 + 2 {
            continue;
        }
        let len = i1 - i0;
        let edge = (len / 10).max(1);
        for k in 0..len {
            let taper = if k < edge {
                0.5 - 0.5 * (std::f64::consts::PI * k as f64 / edge as f64).cos()
            } else if k >= len - edge {
                0.5 - 0.5 * (std::f64::consts::PI * (len - 1 - k) as f64 / edge as f64).cos()
            } else {
                1.0
            };
            x[i0 + k] += gain * taper * band[i0 + k];
        }
    }
    Ok(())
}

fn annotate(cycles: &[Cycle], annotated: &[bool], duration: f64) -> Result<SegmentationTrack> {
    let mut ivs = Vec::new();
    let mut push = |onset: f64, offset: f64, state| {
        let offset = offset.min(duration);
        if offset > onset {
            ivs.push(Interval {
                onset,
                offset,
                state,
            });
        }
    };
    for (i, c) in cycles.iter().enumerate() {
        let end = cycles.get(i + 1).map_or(duration, |n| n.onset);
        if !annotated[i] {
            push(c.onset, end, HeartState::Unannotated);
            continue;
        }
        let s1_end = c.onset + c.s1_duration();
        let s2_end = c.s2_onset() + c.s2_duration();
        push(c.onset, s1_end, HeartState::S1);
        push(s1_end, c.s2_onset(), HeartState::Systole);
        if c.s2_onset() < duration {
            push(c.s2_onset(), s2_end, HeartState::S2);
        }
        if s2_end < duration {
            push(s2_end, end, HeartState::Diastole);
        }
    }
    SegmentationTrack::new(ivs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_patients: usize,
    pub recordings_per_patient: usize,
    pub positive_fraction: f64,
    /// Per-recording heart rate is the template rate scaled by
    /// `1 + bpm_spread · U[-1, 1]`.
    pub bpm_spread: f64,
    pub seed: u64,
    pub template: SynthConfig,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_patients: 40,
            recordings_per_patient: 2,
            positive_fraction: 0.2,
            bpm_spread: 0.1,
            seed: 0,
            template: SynthConfig::default(),
        }
    }
}

pub const SITES: [&str; 4] = ["AV", "PV", "TV", "MV"];

/// Writes `{recording_id}.wav`, `{recording_id}.tsv` and `manifest.csv`
/// into `out_dir` and returns the manifest rows.
pub fn generate_dataset(out_dir: &Path, spec: &DatasetSpec) -> Result<Vec<RecordingMeta>> {
    if spec.n_patients < 2 {
        return Err(PcgError::InvalidConfig("need at least 2 patients".into()));
    }
    if !(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0) {
        return Err(PcgError::InvalidConfig(format!(
            "positive_fraction must lie in (0, 1), got {}",
            spec.positive_fraction
        )));
    }
    if spec.recordings_per_patient == 0 || spec.recordings_per_patient > SITES.len() {
        return Err(PcgError::InvalidConfig(format!(
            "recordings_per_patient must lie in 1..={}",
            SITES.len()
        )));
    }
    spec.template.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| PcgError::io(out_dir, e))?;

    let n_pos = (spec.n_patients as f64 * spec.positive_fraction).round() as usize;
    let mut order: Vec<usize> = (0..spec.n_patients).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[b"positives"]));
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut positive = vec![false; spec.n_patients];
    for &p in &order[..n_pos] {
        positive[p] = true;
    }

    let mut rows = Vec::new();
    for (p, &murmur) in positive.iter().enumerate() {
        let patient_id = (50001 + p).to_string();
        for (r, site) in SITES.iter().enumerate().take(spec.recordings_per_patient) {
            let seed = derive_seed(
                spec.seed,
                &[
                    b"recording",
                    &(p as u64).to_le_bytes(),
                    &(r as u64).to_le_bytes(),
                ],
            );
            let mut rec_rng = ChaCha8Rng::seed_from_u64(seed);
            let bpm_scale = 1.0 + spec.bpm_spread * rec_rng.random_range(-1.0..=1.0);
            let cfg = SynthConfig {
                murmur,
                heart_rate_bpm: (spec.template.heart_rate_bpm * bpm_scale).clamp(30.0, 220.0),
                seed,
                ..spec.template
            };
            let rec = generate_recording(&cfg)?;
            let recording_id = format!("{patient_id}_{site}");
            let wav_name = format!("{recording_id}.wav");
            let seg_name = format!("{recording_id}.tsv");
            write_wav(
                &out_dir.join(&wav_name),
                &rec.waveform,
                WavEncoding::Float32,
            )?;
            write_segmentation(&out_dir.join(&seg_name), &rec.track)?;
            rows.push(RecordingMeta {
                recording_id,
                patient_id: patient_id.clone(),
                wav_path: wav_name,
                seg_path: Some(seg_name),
                label: rec.label,
                age_group: Some(AgeGroup::Child),
                sex: None,
            });
        }
    }
    write_manifest(&out_dir.join("manifest.csv"), &rows)?;
    Ok(rows)
}
