use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{PcgError, Result};
use crate::eval::Aggregation;
use crate::features::FeatureConfig;
use crate::knn::KnnConfig;
use crate::preprocess::BandpassSpec;
use crate::segment::{SegmentConfig, SegmentMethod};
use crate::util::sha256_hex;

/// Named parameter sets for the two front ends and two windowing modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 8 s windows at 4 kHz; 352 mels, FFT 512, hop 352; k = 5.
    CnnFixed,
    /// 10 cycles stretched to 8 s at 4 kHz; 128 mels, FFT 1152, hop 288; k = 7.
    CnnCycle,
    /// 7 s windows at 16 kHz; k = 5.
    BeatsFixed,
    /// 12 cycles stretched to 7 s at 16 kHz; k = 7.
    BeatsCycle,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::CnnFixed,
        Preset::CnnCycle,
        Preset::BeatsFixed,
        Preset::BeatsCycle,
    ];

    pub fn method(self) -> SegmentMethod {
        match self {
            Preset::CnnFixed | Preset::BeatsFixed => SegmentMethod::Fixed,
            Preset::CnnCycle | Preset::BeatsCycle => SegmentMethod::Cycle,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::CnnFixed => "cnn-fixed",
            Preset::CnnCycle => "cnn-cycle",
            Preset::BeatsFixed => "beats-fixed",
            Preset::BeatsCycle => "beats-cycle",
        })
    }
}

impl FromStr for Preset {
    type Err = PcgError;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| {
                PcgError::InvalidConfig(format!(
                    "unknown preset `{s}` (cnn-fixed, cnn-cycle, beats-fixed, beats-cycle)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    pub work_dir: PathBuf,
    /// Externally computed chunk embeddings; replaces pooled mel features.
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassSettings {
    pub low_cut: f64,
    pub high_cut: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSettings {
    pub method: SegmentMethod,
    pub seconds: f64,
    pub sample_rate: u32,
    pub n_cycles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSettings {
    pub enabled: bool,
    pub probability_each: f64,
    pub max_mute_fraction: f64,
    pub max_semitones: f64,
    pub max_mask_area_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSettings {
    pub n_mels: usize,
    pub fft_size: usize,
    pub hop_length: usize,
    pub fmin: f64,
    pub fmax: Option<f64>,
    pub log_floor_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSettings {
    pub n_folds: usize,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSettings {
    /// Drop recordings labeled `Unknown` on load.
    pub exclude_unknown: bool,
}

/// Every effective parameter of a pipeline run. Sample rates of the filter
/// and the feature front end follow `segment.sample_rate`; the augmentation
/// seed is the root `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub preset: Preset,
    pub seed: u64,
    pub paths: Paths,
    pub dataset: DatasetSettings,
    pub bandpass: BandpassSettings,
    pub segment: SegmentSettings,
    pub augment: AugmentSettings,
    pub features: FeatureSettings,
    pub knn: KnnConfig,
    pub cv: CvSettings,
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        let (method, seconds, sample_rate, n_cycles) = match preset {
            Preset::CnnFixed => (SegmentMethod::Fixed, 8.0, 4000, 10),
            Preset::CnnCycle => (SegmentMethod::Cycle, 8.0, 4000, 10),
            Preset::BeatsFixed => (SegmentMethod::Fixed, 7.0, 16000, 12),
            Preset::BeatsCycle => (SegmentMethod::Cycle, 7.0, 16000, 12),
        };
        let fc = FeatureConfig::for_method(method, sample_rate);
        let knn = match method {
            SegmentMethod::Fixed => KnnConfig::fixed_mode(),
            SegmentMethod::Cycle => KnnConfig::cycle_mode(),
        };
        let bp = BandpassSpec::with_defaults(sample_rate);
        let aug = AugmentConfig::default();
        PipelineConfig {
            preset,
            seed: 0,
            paths: Paths {
                manifest: None,
                work_dir: PathBuf::from("work"),
                embeddings: None,
            },
            dataset: DatasetSettings {
                exclude_unknown: true,
            },
            bandpass: BandpassSettings {
                low_cut: bp.low_cut,
                high_cut: bp.high_cut,
                order: bp.order,
            },
            segment: SegmentSettings {
                method,
                seconds,
                sample_rate,
                n_cycles,
            },
            augment: AugmentSettings {
                enabled: true,
                probability_each: aug.probability_each,
                max_mute_fraction: aug.max_mute_fraction,
                max_semitones: aug.max_semitones,
                max_mask_area_fraction: aug.max_mask_area_fraction,
            },
            features: FeatureSettings {
                n_mels: fc.n_mels,
                fft_size: fc.fft_size,
                hop_length: fc.hop_length,
                fmin: fc.fmin,
                fmax: fc.fmax,
                log_floor_db: fc.log_floor_db,
            },
            knn,
            cv: CvSettings {
                n_folds: 10,
                aggregation: Aggregation::PerChunk,
            },
        }
    }

    /// Parses a TOML document layered over its `preset` (default
    /// `cnn-fixed`). Only keys present in the document override the preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| PcgError::InvalidConfig(e.to_string()))?;
        let preset = match user.get("preset") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => {
                return Err(PcgError::InvalidConfig(format!(
                    "preset: expected a string, got {other}"
                )))
            }
            None => Preset::CnnFixed,
        };
        let mut base = toml::Table::try_from(Self::preset(preset))
            .map_err(|e| PcgError::Other(format!("serializing preset: {e}")))?;
        merge(&mut base, user, "")?;
        let cfg: PipelineConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| PcgError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PcgError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            PcgError::InvalidConfig(m) => {
                PcgError::InvalidConfig(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes to TOML")
    }

    pub fn bandpass_spec(&self) -> BandpassSpec {
        BandpassSpec {
            low_cut: self.bandpass.low_cut,
            high_cut: self.bandpass.high_cut,
            order: self.bandpass.order,
            sample_rate: self.segment.sample_rate,
        }
    }

    pub fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            method: self.segment.method,
            seconds: self.segment.seconds,
            sample_rate: self.segment.sample_rate,
            n_cycles: self.segment.n_cycles,
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            probability_each: self.augment.probability_each,
            max_mute_fraction: self.augment.max_mute_fraction,
            max_semitones: self.augment.max_semitones,
            max_mask_area_fraction: self.augment.max_mask_area_fraction,
            seed: self.seed,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            n_mels: self.features.n_mels,
            fft_size: self.features.fft_size,
            hop_length: self.features.hop_length,
            sample_rate: self.segment.sample_rate,
            fmin: self.features.fmin,
            fmax: self.features.fmax,
            log_floor_db: self.features.log_floor_db,
        }
    }

    /// Checks every section, prefixing messages with the section name.
    pub fn validate(&self) -> Result<()> {
        let at = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                PcgError::InvalidConfig(m) => PcgError::InvalidConfig(format!("{section}: {m}")),
                other => other,
            })
        };
        at("bandpass", self.bandpass_spec().validate())?;
        at("segment", self.segment_config().validate())?;
        at("augment", self.augment_config().validate())?;
        at("features", self.feature_config().validate())?;
        at("knn", self.knn.validate())?;
        if self.cv.n_folds < 2 {
            return Err(PcgError::InvalidConfig(format!(
                "cv.n_folds: need at least 2, got {}",
                self.cv.n_folds
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("configuration serializes to JSON"))
    }
}

fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str) -> Result<()> {
    for (key, value) in user {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path)?,
            (Some(toml::Value::Table(_)), other) => {
                return Err(PcgError::InvalidConfig(format!(
                    "{path}: expected a table, got {other}"
                )))
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    Ok(())
}
