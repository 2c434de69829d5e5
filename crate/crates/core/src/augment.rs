//! Training-time augmentation: random muting and pitch shifting on the
//! waveform, time/frequency masking on the mel spectrogram.
//!
//! Each method is gated independently. Generators are derived per chunk from
//! the global seed and the chunk id, so results do not depend on processing
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::resample_to_len;
use crate::error::{PcgError, Result};
use crate::features::MelSpectrogram;
use crate::segment::{vocoder, Chunk};
use crate::util::{derive_seed, median};

/// Shortest chunk [`pitch_shift`] accepts.
pub const MIN_PITCH_SHIFT_LEN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub probability_each: f64,
    pub max_mute_fraction: f64,
    pub max_semitones: f64,
    pub max_mask_area_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            probability_each: 0.6,
            max_mute_fraction: 0.25,
            max_semitones: 1.0,
            max_mask_area_fraction: 0.25,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PcgError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        unit("probability_each", self.probability_each)?;
        unit("max_mute_fraction", self.max_mute_fraction)?;
        unit("max_mask_area_fraction", self.max_mask_area_fraction)?;
        if !(self.max_semitones >= 0.0 && self.max_semitones.is_finite()) {
            return Err(PcgError::InvalidConfig(format!(
                "max_semitones must be a non-negative number, got {}",
                self.max_semitones
            )));
        }
        Ok(())
    }
}

/// Generator for one chunk, independent of every other chunk's draws.
pub fn chunk_rng(seed: u64, chunk_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"augment", chunk_id.as_bytes()]))
}

/// Replaces one contiguous run of up to `max_fraction × L` samples with the
/// chunk median.
pub fn mute_random<R: Rng + ?Sized>(chunk: &Chunk, max_fraction: f64, rng: &mut R) -> Chunk {
    let n = chunk.samples.len();
    // (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let len = ((u * max_fraction * n as f64).ceil() as usize).min(n);
    let start = rng.random_range(0..=n - len);
    let mut out = chunk.clone();
    if len > 0 {
        let fill = median(&chunk.samples);
        out.samples[start..start + len].fill(fill);
    }
    out
}

/// Pitch shift by a random offset in `[-max_semitones, max_semitones]`.
pub fn pitch_shift<R: Rng + ?Sized>(
    chunk: &Chunk,
    max_semitones: f64,
    rng: &mut R,
) -> Result<Chunk> {
    let s = if max_semitones > 0.0 {
        rng.random_range(-max_semitones..=max_semitones)
    } else {
        0.0
    };
    pitch_shift_by(chunk, s)
}

/// Raises pitch by `semitones` (negative lowers it) while keeping the chunk
/// length: the signal is resampled to `L / ratio` samples and then
/// time-stretched back to `L`.
pub fn pitch_shift_by(chunk: &Chunk, semitones: f64) -> Result<Chunk> {
    let n = chunk.samples.len();
    if n < MIN_PITCH_SHIFT_LEN {
        return Err(PcgError::InputTooShort {
            what: "pitch shift",
            required: MIN_PITCH_SHIFT_LEN,
            actual: n,
        });
    }
    let mut out = chunk.clone();
    if semitones == 0.0 {
        return Ok(out);
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let squeezed_len = ((n as f64 / ratio).round() as usize).max(vocoder::MIN_INPUT);
    let squeezed = resample_to_len(&chunk.samples, squeezed_len);
    out.samples = vocoder::stretch(&squeezed, n)?;
    Ok(out)
}

/// One time mask (contiguous frames, every band) and one frequency mask
/// (contiguous bands, every frame). Each width is at most half the area
/// budget along its axis, so the union stays within `max_area_fraction`.
pub fn spec_mask<R: Rng + ?Sized>(
    m: &MelSpectrogram,
    max_area_fraction: f64,
    rng: &mut R,
) -> MelSpectrogram {
    let (n_mels, n_frames) = m.values.dim();
    let mut out = m.clone();
    if n_mels == 0 || n_frames == 0 {
        return out;
    }
    let fill = m.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_t = (0.5 * max_area_fraction * n_frames as f64).floor() as usize;
    let max_f = (0.5 * max_area_fraction * n_mels as f64).floor() as usize;

    let t = rng.random_range(0..=max_t);
    let t0 = rng.random_range(0..=n_frames - t);
    let f = rng.random_range(0..=max_f);
    let f0 = rng.random_range(0..=n_mels - f);

    out.values.slice_mut(ndarray::s![.., t0..t0 + t]).fill(fill);
    out.values.slice_mut(ndarray::s![f0..f0 + f, ..]).fill(fill);
    out
}

/// Applies muting and then pitch shifting, each with probability
/// `probability_each`. Both gates are always drawn so the generator advances
/// identically regardless of outcome.
pub fn augment_chunk<R: Rng + ?Sized>(
    chunk: &Chunk,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Chunk> {
    let mute = rng.random::<f64>() < cfg.probability_each;
    let pitch = rng.random::<f64>() < cfg.probability_each;
    let mut out = if mute {
        mute_random(chunk, cfg.max_mute_fraction, rng)
    } else {
        chunk.clone()
    };
    if pitch {
        out = pitch_shift(&out, cfg.max_semitones, rng)?;
    }
    Ok(out)
}

/// Spectrogram masking under the same per-method probability.
pub fn augment_spectrogram<R: Rng + ?Sized>(
    m: &MelSpectrogram,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> MelSpectrogram {
    if rng.random::<f64>() < cfg.probability_each {
        spec_mask(m, cfg.max_mask_area_fraction, rng)
    } else {
        m.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureConfig;
    use crate::segment::SegmentMethod;
    use crate::util::test_support::{dominant_frequency, tone};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn chunk(samples: Vec<f64>) -> Chunk {
        Chunk {
            recording_id: "r".into(),
            patient_id: "p".into(),
            index: 0,
            sample_rate: 4000,
            method: SegmentMethod::Fixed,
            source_span: (0.0, samples.len() as f64 / 4000.0),
            padded: false,
            stretch_factor: None,
            samples,
        }
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn mute_zero_fraction_is_identity() {
        let c = chunk(ramp(1000));
        let mut rng = chunk_rng(1, "x");
        assert_eq!(mute_random(&c, 0.0, &mut rng), c);
    }

    #[test]
    fn mute_constant_is_fixed_point() {
        let c = chunk(vec![0.5; 1000]);
        let mut rng = chunk_rng(2, "x");
        assert_eq!(mute_random(&c, 0.25, &mut rng), c);
    }

    #[test]
    fn pitch_identity_path() {
        let c = chunk(tone(200.0, 4000, 8000, 1.0));
        let out = pitch_shift_by(&c, 0.0).unwrap();
        assert_eq!(out, c);
        let mut rng = chunk_rng(3, "x");
        assert_eq!(pitch_shift(&c, 0.0, &mut rng).unwrap(), c);
    }

    #[test]
    fn pitch_up_one_semitone() {
        let c = chunk(tone(200.0, 4000, 8000, 1.0));
        let out = pitch_shift_by(&c, 1.0).unwrap();
        assert_eq!(out.samples.len(), 8000);
        let expected = 200.0 * 2f64.powf(1.0 / 12.0);
        let f = dominant_frequency(&out.samples, 4000);
        assert!((f / expected - 1.0).abs() < 0.02, "{f} vs {expected}");
    }

    #[test]
    fn pitch_down_one_semitone() {
        let c = chunk(tone(200.0, 4000, 8000, 1.0));
        let out = pitch_shift_by(&c, -1.0).unwrap();
        let expected = 200.0 * 2f64.powf(-1.0 / 12.0);
        let f = dominant_frequency(&out.samples, 4000);
        assert!((f / expected - 1.0).abs() < 0.02, "{f} vs {expected}");
    }

    #[test]
    fn pitch_rejects_short_chunk() {
        let c = chunk(vec![0.1; 2047]);
        assert!(matches!(
            pitch_shift_by(&c, 1.0),
            Err(PcgError::InputTooShort { .. })
        ));
    }

    fn spectrogram(values: Array2<f64>) -> MelSpectrogram {
        MelSpectrogram {
            values,
            config: FeatureConfig::cycle_mode(4000),
        }
    }

    #[test]
    fn mask_trivial_cases() {
        let m = spectrogram(Array2::from_shape_fn((16, 20), |(i, j)| {
            (i * 20 + j) as f64
        }));
        let mut rng = chunk_rng(4, "x");
        assert_eq!(spec_mask(&m, 0.0, &mut rng), m);
        let flat = spectrogram(Array2::from_elem((16, 20), -80.0));
        assert_eq!(spec_mask(&flat, 0.25, &mut rng), flat);
    }

    #[test]
    fn probability_zero_is_identity() {
        let c = chunk(ramp(4000));
        let cfg = AugmentConfig {
            probability_each: 0.0,
            ..Default::default()
        };
        for seed in 0..10 {
            let mut rng = chunk_rng(seed, "x");
            assert_eq!(augment_chunk(&c, &cfg, &mut rng).unwrap(), c);
        }
    }

    #[test]
    fn probability_one_changes_signal() {
        let c = chunk(tone(120.0, 4000, 8000, 1.0));
        let cfg = AugmentConfig {
            probability_each: 1.0,
            ..Default::default()
        };
        for seed in 0..5 {
            let mut rng = chunk_rng(seed, "x");
            let out = augment_chunk(&c, &cfg, &mut rng).unwrap();
            assert_eq!(out.samples.len(), c.samples.len());
            assert_ne!(out.samples, c.samples);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let c = chunk(tone(90.0, 4000, 6000, 0.7));
        let cfg = AugmentConfig::default();
        let a = augment_chunk(&c, &cfg, &mut chunk_rng(9, "abc")).unwrap();
        let b = augment_chunk(&c, &cfg, &mut chunk_rng(9, "abc")).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        let bad = AugmentConfig {
            probability_each: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentConfig {
            max_semitones: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mute_is_one_short_median_run(seed in any::<u64>(), n in 4usize..3000) {
            let c = chunk(ramp(n));
            let out = mute_random(&c, 0.25, &mut chunk_rng(seed, "m"));
            prop_assert_eq!(out.samples.len(), n);
            let fill = median(&c.samples);
            let diff: Vec<usize> = (0..n).filter(|&i| out.samples[i] != c.samples[i]).collect();
            prop_assert!(diff.len() <= (0.25 * n as f64).ceil() as usize);
            if let (Some(&a), Some(&b)) = (diff.first(), diff.last()) {
                // Changed samples form one run (possibly containing an
                // unchanged sample that already equals the median).
                for i in a..=b {
                    prop_assert_eq!(out.samples[i], fill);
                }
            }
        }

        #[test]
        fn mask_area_bound(seed in any::<u64>(), mels in 1usize..64, frames in 1usize..64) {
            let m = spectrogram(Array2::from_shape_fn((mels, frames), |(i, j)| (i + j) as f64 + 1.0));
            let out = spec_mask(&m, 0.25, &mut chunk_rng(seed, "k"));
            let masked = out.values.iter().zip(m.values.iter()).filter(|(a, b)| a != b).count();
            let fill_count = out.values.iter().filter(|&&v| v == 1.0).count();
            prop_assert!(fill_count as f64 <= 0.25 * (mels * frames) as f64 + 1.0);
            prop_assert!(masked as f64 <= 0.25 * (mels * frames) as f64);
        }

        #[test]
        fn pitch_preserves_length(seed in any::<u64>(), n in 2048usize..9000) {
            let c = chunk(tone(150.0, 4000, n, 1.0));
            let out = pitch_shift(&c, 1.0, &mut chunk_rng(seed, "p")).unwrap();
            prop_assert_eq!(out.samples.len(), n);
            prop_assert!(out.samples.iter().all(|v| v.is_finite()));
        }
    }
}
