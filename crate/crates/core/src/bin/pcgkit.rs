use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pcgkit::eval::Aggregation;
use pcgkit::features::FeatureConfig;
use pcgkit::pipeline::{self, Layout, PipelineConfig, Preset};
use pcgkit::segment::SegmentMethod;
use pcgkit::synth::{DatasetSpec, SynthConfig};
use pcgkit::{PcgError, Result};

/// Phonocardiogram preprocessing, segmentation and murmur-classification
/// evaluation.
#[derive(Parser, Debug)]
#[command(name = "pcgkit", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file (layered over its preset).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter preset when no configuration file is given.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Work directory for intermediate and final artifacts.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Root seed for folds and augmentation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dataset manifest CSV.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a manifest and print dataset statistics.
    Ingest {
        /// Keep recordings labeled Unknown.
        #[arg(long)]
        include_unknown: bool,
    },
    /// Bandpass-filter and normalize every usable recording.
    Preprocess {
        /// Lower passband edge in Hz.
        #[arg(long)]
        low_cut: Option<f64>,
        /// Upper passband edge in Hz.
        #[arg(long)]
        high_cut: Option<f64>,
        /// Butterworth prototype order.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Cut preprocessed recordings into chunks.
    Segment(SegmentArgs),
    /// Pooled mel-spectrogram features for every chunk.
    Featurize {
        /// Mel front end of the given windowing mode (band count, FFT size,
        /// hop).
        #[arg(long)]
        mode: Option<SegmentMethod>,
        #[command(flatten)]
        augment: AugmentArgs,
    },
    /// Use externally computed chunk embeddings as features.
    EmbedImport {
        /// CSV of `id,v0,...` rows keyed by chunk id.
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// k-NN model fitting and prediction.
    #[command(subcommand)]
    Knn(KnnCommand),
    /// Patient-grouped cross-validation.
    #[command(subcommand)]
    Cv(CvCommand),
    /// Synthetic dataset generation.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Print the cross-validation summary table.
    Report {
        /// Report JSON (defaults to cv/report.json in the work directory).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run every stage from the configuration.
    Run(AugmentArgs),
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// fixed or cycle.
    #[arg(long)]
    method: Option<SegmentMethod>,
    /// Chunk duration in seconds.
    #[arg(long)]
    seconds: Option<f64>,
    /// Heart cycles per chunk.
    #[arg(long = "cycles", alias = "n-cycles")]
    n_cycles: Option<usize>,
    /// Sample rate of the emitted chunks.
    #[arg(long)]
    sample_rate: Option<u32>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Per-method augmentation probability.
    #[arg(long)]
    augment_prob: Option<f64>,
    /// Disable augmentation.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Subcommand, Debug)]
enum KnnCommand {
    /// Store labeled training vectors as a model.
    Fit {
        /// Feature CSV (defaults to the work directory's features).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Label CSV keyed by id.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Number of neighbors.
        #[arg(long)]
        k: Option<usize>,
        /// Positive-fraction decision threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Model CSV path (defaults to knn/model.csv in the work directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score query vectors against a fitted model.
    Predict {
        /// Model CSV path (defaults to knn/model.csv in the work directory).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Feature CSV of queries.
        #[arg(long)]
        queries: PathBuf,
        /// Predictions CSV (defaults to knn/predictions.csv in the work directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CvCommand {
    /// Fold, fit, score and report.
    Run {
        /// Number of patient-grouped folds.
        #[arg(long)]
        folds: Option<usize>,
        /// Number of neighbors.
        #[arg(long)]
        k: Option<usize>,
        /// per_chunk or per_recording_mean_score.
        #[arg(long)]
        aggregation: Option<Aggregation>,
        /// Ignore augmented training vectors.
        #[arg(long)]
        no_augment: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Write synthetic recordings, annotations and a manifest.
    Generate {
        #[arg(long, default_value_t = 40)]
        patients: usize,
        /// Fraction of patients with a murmur.
        #[arg(long, default_value_t = 0.2)]
        positive_frac: f64,
        /// Fraction of cycles that carry segmentation annotations.
        #[arg(long, default_value_t = 1.0)]
        coverage: f64,
        #[arg(long, default_value_t = 2)]
        recordings_per_patient: usize,
        /// Recording length in seconds.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        /// Signal-to-noise ratio of the additive noise.
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 4000)]
        sample_rate: u32,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json(v: &impl Serialize) {
    match serde_json::to_string_pretty(v) {
        Ok(s) => println!("{s}"),
        Err(e) => log::error!("cannot render summary: {e}"),
    }
}

fn resolve_config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match (&g.config, &g.preset) {
        (Some(path), _) => PipelineConfig::load(path)?,
        (None, Some(p)) => PipelineConfig::preset(p.parse::<Preset>()?),
        (None, None) => PipelineConfig::preset(Preset::CnnFixed),
    };
    if let Some(d) = &g.work_dir {
        cfg.paths.work_dir = d.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(m) = &g.manifest {
        cfg.paths.manifest = Some(m.clone());
    }
    Ok(cfg)
}

fn apply_augment(cfg: &mut PipelineConfig, a: &AugmentArgs) {
    if let Some(p) = a.augment_prob {
        cfg.augment.probability_each = p;
    }
    if a.no_augment {
        cfg.augment.enabled = false;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    match cli.command {
        Command::Ingest { include_unknown } => {
            if include_unknown {
                cfg.dataset.exclude_unknown = false;
            }
            cfg.validate()?;
            println!("{}", pipeline::ingest(&cfg)?);
        }
        Command::Preprocess {
            low_cut,
            high_cut,
            order,
        } => {
            if let Some(v) = low_cut {
                cfg.bandpass.low_cut = v;
            }
            if let Some(v) = high_cut {
                cfg.bandpass.high_cut = v;
            }
            if let Some(v) = order {
                cfg.bandpass.order = v;
            }
            cfg.validate()?;
            print_json(&pipeline::preprocess(&cfg)?);
        }
        Command::Segment(a) => {
            if let Some(m) = a.method {
                cfg.segment.method = m;
            }
            if let Some(s) = a.seconds {
                cfg.segment.seconds = s;
            }
            if let Some(n) = a.n_cycles {
                cfg.segment.n_cycles = n;
            }
            if let Some(sr) = a.sample_rate {
                cfg.segment.sample_rate = sr;
            }
            cfg.validate()?;
            print_json(&pipeline::segment(&cfg)?);
        }
        Command::Featurize { mode, augment } => {
            if let Some(m) = mode {
                let f = FeatureConfig::for_method(m, cfg.segment.sample_rate);
                cfg.features.n_mels = f.n_mels;
                cfg.features.fft_size = f.fft_size;
                cfg.features.hop_length = f.hop_length;
            }
            apply_augment(&mut cfg, &augment);
            cfg.validate()?;
            print_json(&pipeline::featurize(&cfg)?);
        }
        Command::EmbedImport { embeddings } => {
            cfg.validate()?;
            print_json(&pipeline::embed_import(&cfg, &embeddings)?);
        }
        Command::Knn(KnnCommand::Fit {
            embeddings,
            labels,
            k,
            threshold,
            out,
        }) => {
            if let Some(k) = k {
                cfg.knn.k = k;
            }
            if let Some(t) = threshold {
                cfg.knn.threshold = t;
            }
            cfg.validate()?;
            let layout = Layout::new(&cfg);
            let features = embeddings.unwrap_or_else(|| layout.features_csv());
            let labels = labels.unwrap_or_else(|| layout.labels_csv());
            let out = out.unwrap_or_else(|| layout.knn_dir().join("model.csv"));
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| PcgError::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            print_json(&pipeline::knn_fit(&cfg, &features, &labels, &out)?);
        }
        Command::Knn(KnnCommand::Predict {
            model,
            queries,
            out,
        }) => {
            let layout = Layout::new(&cfg);
            let model = model.unwrap_or_else(|| layout.knn_dir().join("model.csv"));
            let out = out.unwrap_or_else(|| layout.knn_dir().join("predictions.csv"));
            print_json(&pipeline::knn_predict(&cfg, &model, &queries, &out)?);
        }
        Command::Cv(CvCommand::Run {
            folds,
            k,
            aggregation,
            no_augment,
        }) => {
            if let Some(f) = folds {
                cfg.cv.n_folds = f;
            }
            if let Some(k) = k {
                cfg.knn.k = k;
            }
            if let Some(a) = aggregation {
                cfg.cv.aggregation = a;
            }
            if no_augment {
                cfg.augment.enabled = false;
            }
            cfg.validate()?;
            pipeline::cv(&cfg)?;
            print!(
                "{}",
                pipeline::render_report(&Layout::new(&cfg).cv_dir().join("report.json"))?
            );
        }
        Command::Synth(SynthCommand::Generate {
            patients,
            positive_frac,
            coverage,
            recordings_per_patient,
            duration,
            snr_db,
            sample_rate,
            out,
        }) => {
            let spec = DatasetSpec {
                n_patients: patients,
                recordings_per_patient,
                positive_fraction: positive_frac,
                seed: cfg.seed,
                template: SynthConfig {
                    sample_rate,
                    duration,
                    murmur_snr_db: snr_db,
                    annotation_coverage: coverage,
                    ..SynthConfig::default()
                },
                ..DatasetSpec::default()
            };
            print_json(&pipeline::synth_generate(&out, &spec)?);
        }
        Command::Report { input } => {
            let input = input.unwrap_or_else(|| Layout::new(&cfg).cv_dir().join("report.json"));
            print!("{}", pipeline::render_report(&input)?);
        }
        Command::Run(a) => {
            apply_augment(&mut cfg, &a);
            let (summary, _) = pipeline::run_all(&cfg)?;
            print_json(&summary);
            print!(
                "{}",
                pipeline::render_report(&Layout::new(&cfg).cv_dir().join("report.json"))?
            );
        }
        Command::ShowConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PCGKIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
