use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::PipelineConfig;
use super::layout::Layout;
use super::record::{FileDigest, RunRecord};
use crate::augment::{augment_chunk, augment_spectrogram, chunk_rng};
use crate::dataset::{
    count_contiguous_cycles, extract_s1_onsets, label_map, load_embeddings, load_labels,
    load_manifest, load_segmentation, load_wav, resample, resolve_path, wav_info, write_embeddings,
    write_labels, write_wav, Embedding, Label, LabelRecord, RecordingMeta, WavEncoding, Waveform,
};
use crate::error::{PcgError, Result};
use crate::eval::{
    make_folds, patient_labels, run_cv, write_confusion_csv, write_folds_csv, write_report_json,
    CvReport, CvSample,
};
use crate::features::{pool_features, MelExtractor};
use crate::knn::{load_model, save_model};
use crate::preprocess::{minmax_normalize, preprocess as bandpass_and_normalize};
use crate::segment::{chunk_cycles, chunk_fixed, Chunk, ChunkOrigin, SegmentMethod};
use crate::synth::{generate_dataset, DatasetSpec};
use crate::util::{ensure_dir, write_atomic};

fn manifest_path(cfg: &PipelineConfig) -> Result<&Path> {
    let path = cfg.paths.manifest.as_deref().ok_or_else(|| {
        PcgError::InvalidConfig("paths.manifest is required for this stage".into())
    })?;
    if !path.is_file() {
        return Err(PcgError::InvalidConfig(format!(
            "paths.manifest: {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn usable_rows(cfg: &PipelineConfig) -> Result<(PathBuf, Vec<RecordingMeta>)> {
    let manifest = manifest_path(cfg)?.to_path_buf();
    let rows = load_manifest(&manifest, cfg.dataset.exclude_unknown)?;
    Ok((manifest, rows))
}

fn binary_label(label: Label) -> Option<u8> {
    label.as_binary()
}

/// Dataset statistics gathered by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub total: usize,
    pub unknown_excluded: usize,
    pub usable: usize,
    pub positive: usize,
    pub negative: usize,
    pub patients: usize,
    pub with_segmentation: usize,
    /// Σ (S1 onsets − 1) over annotated usable recordings.
    pub labeled_cycles: usize,
    /// Cycles whose whole span is annotated without gaps.
    pub contiguous_cycles: usize,
    pub total_duration_s: f64,
    /// Audio covered by complete `n_cycles` groups.
    pub cycle_usable_duration_s: f64,
    pub cycle_usable_fraction: f64,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} total / {} usable / {} positive / {} negative ({} Unknown excluded)",
            self.total, self.usable, self.positive, self.negative, self.unknown_excluded
        )?;
        writeln!(f, "{} patients", self.patients)?;
        if self.with_segmentation > 0 {
            writeln!(
                f,
                "{} complete S1 to S1 cycles ({} fully annotated) in {} annotated recordings",
                self.labeled_cycles, self.contiguous_cycles, self.with_segmentation
            )?;
        }
        write!(
            f,
            "cycle-mode usable audio: {:.1}% ({:.1} of {:.1} s)",
            100.0 * self.cycle_usable_fraction,
            self.cycle_usable_duration_s,
            self.total_duration_s
        )
    }
}

pub fn ingest(cfg: &PipelineConfig) -> Result<IngestReport> {
    let manifest = manifest_path(cfg)?;
    let all = load_manifest(manifest, false)?;
    let usable: Vec<&RecordingMeta> = all.iter().filter(|r| r.label != Label::Unknown).collect();
    let positive = usable.iter().filter(|r| r.label == Label::Present).count();
    let patients: BTreeSet<&str> = usable.iter().map(|r| r.patient_id.as_str()).collect();
    let n = cfg.segment.n_cycles;

    let mut report = IngestReport {
        total: all.len(),
        unknown_excluded: all.len() - usable.len(),
        usable: usable.len(),
        positive,
        negative: usable.len() - positive,
        patients: patients.len(),
        with_segmentation: 0,
        labeled_cycles: 0,
        contiguous_cycles: 0,
        total_duration_s: 0.0,
        cycle_usable_duration_s: 0.0,
        cycle_usable_fraction: 0.0,
    };
    let mut inputs = vec![FileDigest::of(manifest)?];
    for r in &usable {
        let wav = resolve_path(manifest, &r.wav_path);
        let (sr, len) = wav_info(&wav)?;
        let duration = len as f64 / sr as f64;
        report.total_duration_s += duration;
        let Some(seg) = &r.seg_path else { continue };
        let seg_path = resolve_path(manifest, seg);
        let track = load_segmentation(&seg_path)?;
        inputs.push(FileDigest::of(&seg_path)?);
        report.with_segmentation += 1;
        let onsets = extract_s1_onsets(&track);
        report.labeled_cycles += onsets.len().saturating_sub(1);
        report.contiguous_cycles += count_contiguous_cycles(&track);
        for g in 0..onsets.len().saturating_sub(1) / n {
            let (a, b) = (onsets[g * n], onsets[(g + 1) * n]);
            report.cycle_usable_duration_s += (b.min(duration) - a.max(0.0)).max(0.0);
        }
    }
    if report.total_duration_s > 0.0 {
        report.cycle_usable_fraction = report.cycle_usable_duration_s / report.total_duration_s;
    }
    let layout = Layout::new(cfg);
    RunRecord::new("ingest", cfg, inputs, vec![], &report).write(&layout)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub recordings: usize,
    pub skipped_too_short: usize,
    pub resampled: usize,
}

/// Resample to the configured rate, bandpass and min-max normalize every
/// usable recording.
pub fn preprocess(cfg: &PipelineConfig) -> Result<PreprocessSummary> {
    let (manifest, rows) = usable_rows(cfg)?;
    let layout = Layout::new(cfg);
    ensure_dir(&layout.preprocessed_dir())?;
    let spec = cfg.bandpass_spec();
    let mut summary = PreprocessSummary {
        recordings: 0,
        skipped_too_short: 0,
        resampled: 0,
    };
    let mut inputs = vec![FileDigest::of(&manifest)?];
    let mut outputs = Vec::new();
    for r in rows.iter().filter(|r| binary_label(r.label).is_some()) {
        let path = resolve_path(&manifest, &r.wav_path);
        inputs.push(FileDigest::of(&path)?);
        let mut w = load_wav(&path)?;
        if w.sample_rate != spec.sample_rate {
            w = resample(&w, spec.sample_rate);
            summary.resampled += 1;
        }
        let out = match bandpass_and_normalize(&w, &spec) {
            Ok(out) => out,
            Err(PcgError::InputTooShort { .. }) => {
                log::warn!("{}: too short to filter; skipped", r.recording_id);
                summary.skipped_too_short += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let dest = layout.preprocessed_wav(&r.recording_id);
        write_wav(&dest, &out, WavEncoding::Float32)?;
        outputs.push(FileDigest::of(&dest)?);
        summary.recordings += 1;
    }
    RunRecord::new("preprocess", cfg, inputs, outputs, &summary).write(&layout)?;
    Ok(summary)
}

/// One row of the chunk index.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ChunkIndexRow {
    pub chunk_id: String,
    pub recording_id: String,
    pub patient_id: String,
    pub method: SegmentMethod,
    pub start_s: f64,
    pub end_s: f64,
    pub padded: bool,
    pub label: u8,
}

pub const CHUNK_INDEX_HEADER: &str =
    "chunk_id,recording_id,patient_id,method,start_s,end_s,padded,label";

pub fn read_chunk_index(path: &Path) -> Result<Vec<ChunkIndexRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => PcgError::io(path, io),
        other => PcgError::parse(path, 0, format!("{other:?}")),
    })?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| PcgError::parse(path, i + 2, e.to_string())))
        .collect()
}

fn write_chunk_index(path: &Path, rows: &[ChunkIndexRow]) -> Result<()> {
    let mut out = format!("{CHUNK_INDEX_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:?},{:?},{},{}\n",
            r.chunk_id,
            r.recording_id,
            r.patient_id,
            r.method,
            r.start_s,
            r.end_s,
            r.padded,
            r.label
        ));
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSummary {
    pub method: SegmentMethod,
    pub recordings: usize,
    pub recordings_with_chunks: usize,
    pub skipped_no_segmentation: usize,
    pub chunks: usize,
    pub padded_chunks: usize,
    pub chunk_samples: usize,
}

/// Cuts preprocessed recordings into chunks; each chunk is min-max
/// normalized again on its own.
pub fn segment(cfg: &PipelineConfig) -> Result<SegmentSummary> {
    let (manifest, rows) = usable_rows(cfg)?;
    let layout = Layout::new(cfg);
    let seg_cfg = cfg.segment_config();
    seg_cfg.validate()?;
    let dir = layout.chunks_dir();
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| PcgError::io(&dir, e))?;
    }
    ensure_dir(&dir)?;

    let mut summary = SegmentSummary {
        method: seg_cfg.method,
        recordings: 0,
        recordings_with_chunks: 0,
        skipped_no_segmentation: 0,
        chunks: 0,
        padded_chunks: 0,
        chunk_samples: seg_cfg.chunk_len(),
    };
    let mut index = Vec::new();
    let mut inputs = vec![FileDigest::of(&manifest)?];
    for r in &rows {
        let Some(label) = binary_label(r.label) else {
            continue;
        };
        let src = layout.preprocessed_wav(&r.recording_id);
        if !src.exists() {
            log::warn!("{}: no preprocessed audio; skipped", r.recording_id);
            continue;
        }
        summary.recordings += 1;
        inputs.push(FileDigest::of(&src)?);
        let w = load_wav(&src)?;
        let origin = ChunkOrigin::new(&r.recording_id, &r.patient_id);
        let chunks = match seg_cfg.method {
            SegmentMethod::Fixed => chunk_fixed(&w, &seg_cfg, &origin)?,
            SegmentMethod::Cycle => {
                let Some(seg) = &r.seg_path else {
                    log::warn!(
                        "{}: no segmentation file; skipped for cycle chunking",
                        r.recording_id
                    );
                    summary.skipped_no_segmentation += 1;
                    continue;
                };
                let seg_path = resolve_path(&manifest, seg);
                inputs.push(FileDigest::of(&seg_path)?);
                let onsets = extract_s1_onsets(&load_segmentation(&seg_path)?);
                chunk_cycles(&w, &onsets, &seg_cfg, &origin)?
            }
        };
        if !chunks.is_empty() {
            summary.recordings_with_chunks += 1;
        }
        for c in chunks {
            let id = c.chunk_id();
            let normalized = minmax_normalize(&c.waveform());
            write_wav(&layout.chunk_wav(&id), &normalized, WavEncoding::Float32)?;
            summary.chunks += 1;
            summary.padded_chunks += usize::from(c.padded);
            index.push(ChunkIndexRow {
                chunk_id: id,
                recording_id: c.recording_id,
                patient_id: c.patient_id,
                method: c.method,
                start_s: c.source_span.0,
                end_s: c.source_span.1,
                padded: c.padded,
                label,
            });
        }
    }
    if summary.skipped_no_segmentation > 0 {
        log::warn!(
            "{} recording(s) without segmentation skipped",
            summary.skipped_no_segmentation
        );
    }
    write_chunk_index(&layout.chunk_index(), &index)?;
    let outputs = vec![FileDigest::of(&layout.chunk_index())?];
    RunRecord::new("segment", cfg, inputs, outputs, &summary).write(&layout)?;
    Ok(summary)
}

fn index_chunk(row: &ChunkIndexRow, w: Waveform) -> Chunk {
    Chunk {
        recording_id: row.recording_id.clone(),
        patient_id: row.patient_id.clone(),
        index: 0,
        sample_rate: w.sample_rate,
        samples: w.samples,
        method: row.method,
        source_span: (row.start_s, row.end_s),
        padded: row.padded,
        stretch_factor: None,
    }
}

fn labels_from_index(index: &[ChunkIndexRow]) -> Vec<LabelRecord> {
    index
        .iter()
        .map(|r| LabelRecord {
            id: r.chunk_id.clone(),
            label: r.label,
            patient_id: r.patient_id.clone(),
            recording_id: r.recording_id.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeaturizeSummary {
    pub chunks: usize,
    pub dimension: usize,
    pub augmented: usize,
    pub empty_mel_filters: usize,
}

/// Pooled mel statistics for every chunk, plus one augmented vector per
/// chunk whose augmentation draw changed anything.
pub fn featurize(cfg: &PipelineConfig) -> Result<FeaturizeSummary> {
    let layout = Layout::new(cfg);
    let index = read_chunk_index(&layout.chunk_index())?;
    let extractor = MelExtractor::new(cfg.feature_config())?;
    let aug_cfg = cfg.augment_config();
    ensure_dir(&layout.features_dir())?;

    let mut features = Vec::with_capacity(index.len());
    let mut augmented = Vec::new();
    for row in &index {
        let w = load_wav(&layout.chunk_wav(&row.chunk_id))?;
        let mel = extractor.compute(&w)?;
        features.push(Embedding {
            id: row.chunk_id.clone(),
            vector: pool_features(&mel)?,
        });
        if cfg.augment.enabled {
            let chunk = index_chunk(row, w);
            let mut rng = chunk_rng(aug_cfg.seed, &row.chunk_id);
            let aug = augment_chunk(&chunk, &aug_cfg, &mut rng)?;
            let aug_mel = if aug.samples == chunk.samples {
                mel.clone()
            } else {
                extractor.compute(&aug.waveform())?
            };
            let masked = augment_spectrogram(&aug_mel, &aug_cfg, &mut rng);
            if masked != mel {
                augmented.push(Embedding {
                    id: row.chunk_id.clone(),
                    vector: pool_features(&masked)?,
                });
            }
        }
    }
    write_embeddings(&layout.features_csv(), &features)?;
    write_labels(&layout.labels_csv(), &labels_from_index(&index))?;
    let aug_path = layout.augmented_csv();
    if cfg.augment.enabled {
        write_embeddings(&aug_path, &augmented)?;
    } else if aug_path.exists() {
        std::fs::remove_file(&aug_path).map_err(|e| PcgError::io(&aug_path, e))?;
    }
    let summary = FeaturizeSummary {
        chunks: features.len(),
        dimension: 2 * extractor.config().n_mels,
        augmented: augmented.len(),
        empty_mel_filters: extractor.filterbank().empty_rows(),
    };
    let inputs = vec![FileDigest::of(&layout.chunk_index())?];
    let outputs = vec![
        FileDigest::of(&layout.features_csv())?,
        FileDigest::of(&layout.labels_csv())?,
    ];
    RunRecord::new("featurize", cfg, inputs, outputs, &summary).write(&layout)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportSummary {
    pub embeddings: usize,
    pub dimension: usize,
}

/// Adopts externally computed chunk embeddings as the feature set. Every
/// embedding id must be a chunk id from the index.
pub fn embed_import(cfg: &PipelineConfig, embeddings: &Path) -> Result<ImportSummary> {
    let layout = Layout::new(cfg);
    let index = read_chunk_index(&layout.chunk_index())?;
    let labels = labels_from_index(&index);
    let known = label_map(&labels);
    let e = load_embeddings(embeddings)?;
    if let Some(bad) = e.iter().find(|x| !known.contains_key(&x.id)) {
        return Err(PcgError::MissingLabel(bad.id.clone()));
    }
    let kept: BTreeSet<&str> = e.iter().map(|x| x.id.as_str()).collect();
    let missing = labels
        .iter()
        .filter(|l| !kept.contains(l.id.as_str()))
        .count();
    if missing > 0 {
        log::warn!("{missing} chunk(s) have no imported embedding");
    }
    let labels: Vec<LabelRecord> = labels
        .into_iter()
        .filter(|l| kept.contains(l.id.as_str()))
        .collect();
    ensure_dir(&layout.features_dir())?;
    write_embeddings(&layout.features_csv(), &e)?;
    write_labels(&layout.labels_csv(), &labels)?;
    let aug_path = layout.augmented_csv();
    if aug_path.exists() {
        std::fs::remove_file(&aug_path).map_err(|e| PcgError::io(&aug_path, e))?;
    }
    let summary = ImportSummary {
        embeddings: e.len(),
        dimension: e.first().map_or(0, |x| x.vector.len()),
    };
    let inputs = vec![
        FileDigest::of(embeddings)?,
        FileDigest::of(&layout.chunk_index())?,
    ];
    let outputs = vec![FileDigest::of(&layout.features_csv())?];
    RunRecord::new("embed-import", cfg, inputs, outputs, &summary).write(&layout)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnFitSummary {
    pub points: usize,
    pub dimension: usize,
    pub k: usize,
    pub model: PathBuf,
}

pub fn knn_fit(
    cfg: &PipelineConfig,
    features: &Path,
    labels: &Path,
    out: &Path,
) -> Result<KnnFitSummary> {
    let e = load_embeddings(features)?;
    let l = label_map(&load_labels(labels)?);
    let model = crate::knn::knn_fit(&e, &l, &cfg.knn)?;
    save_model(out, &model)?;
    let summary = KnnFitSummary {
        points: model.len(),
        dimension: model.dim(),
        k: cfg.knn.k,
        model: out.to_path_buf(),
    };
    let inputs = vec![FileDigest::of(features)?, FileDigest::of(labels)?];
    RunRecord::new("knn-fit", cfg, inputs, vec![FileDigest::of(out)?], &summary)
        .write(&Layout::new(cfg))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnPredictSummary {
    pub queries: usize,
    pub positive: usize,
    pub predictions: PathBuf,
}

/// Scores every query with the model's stored configuration and writes
/// `id,score,label`.
pub fn knn_predict(
    cfg: &PipelineConfig,
    model_path: &Path,
    queries: &Path,
    out: &Path,
) -> Result<KnnPredictSummary> {
    let model = load_model(model_path)?;
    let q = load_embeddings(queries)?;
    let mut text = String::from("id,score,label\n");
    let mut positive = 0;
    for e in &q {
        let p = model.predict(&e.id, &e.vector)?;
        positive += usize::from(p.label);
        text.push_str(&format!("{},{:?},{}\n", p.id, p.score, p.label));
    }
    write_atomic(out, text.as_bytes())?;
    let summary = KnnPredictSummary {
        queries: q.len(),
        positive,
        predictions: out.to_path_buf(),
    };
    let inputs = vec![FileDigest::of(model_path)?, FileDigest::of(queries)?];
    RunRecord::new(
        "knn-predict",
        cfg,
        inputs,
        vec![FileDigest::of(out)?],
        &summary,
    )
    .write(&Layout::new(cfg))?;
    Ok(summary)
}

/// Joins features, labels and (optionally) augmented vectors into CV
/// samples, ordered as in the feature file.
pub fn load_cv_samples(
    features: &Path,
    labels: &Path,
    augmented: Option<&Path>,
) -> Result<Vec<CvSample>> {
    let e = load_embeddings(features)?;
    let labels: HashMap<String, LabelRecord> = load_labels(labels)?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let mut extra: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    if let Some(p) = augmented {
        for a in load_embeddings(p)? {
            extra.entry(a.id).or_default().push(a.vector);
        }
    }
    e.into_iter()
        .map(|x| {
            let l = labels
                .get(&x.id)
                .ok_or_else(|| PcgError::MissingLabel(x.id.clone()))?;
            Ok(CvSample {
                augmented: extra.remove(&x.id).unwrap_or_default(),
                patient_id: l.patient_id.clone(),
                recording_id: l.recording_id.clone(),
                label: l.label,
                id: x.id,
                vector: x.vector,
            })
        })
        .collect()
}

/// Patient-grouped cross-validation over the current feature set.
pub fn cv(cfg: &PipelineConfig) -> Result<CvReport> {
    let layout = Layout::new(cfg);
    let aug = layout.augmented_csv();
    let aug = (cfg.augment.enabled && aug.exists()).then_some(aug);
    let samples = load_cv_samples(&layout.features_csv(), &layout.labels_csv(), aug.as_deref())?;
    let patients = patient_labels(samples.iter().map(|s| (s.patient_id.as_str(), s.label)));
    let folds = make_folds(&patients, cfg.cv.n_folds, cfg.seed)?;
    let report = run_cv(&samples, &folds, &cfg.knn, cfg.cv.aggregation)?;

    let dir = layout.cv_dir();
    ensure_dir(&dir)?;
    write_report_json(&dir.join("report.json"), &report)?;
    write_folds_csv(&dir.join("folds.csv"), &report)?;
    write_confusion_csv(&dir.join("confusion.csv"), &report)?;
    let folds_json =
        serde_json::to_string_pretty(&folds).map_err(|e| PcgError::Other(e.to_string()))?;
    write_atomic(&dir.join("folds.json"), folds_json.as_bytes())?;

    let mut inputs = vec![
        FileDigest::of(&layout.features_csv())?,
        FileDigest::of(&layout.labels_csv())?,
    ];
    if let Some(a) = &aug {
        inputs.push(FileDigest::of(a)?);
    }
    let outputs = vec![FileDigest::of(&dir.join("report.json"))?];
    let summary = serde_json::json!({
        "folds": report.folds.len(),
        "mean_auroc": report.mean_auroc(),
        "aggregation": report.aggregation,
    });
    RunRecord::new("cv", cfg, inputs, outputs, &summary).write(&layout)?;
    Ok(report)
}

/// Human-readable table from a saved CV report.
pub fn render_report(report_json: &Path) -> Result<String> {
    let text = std::fs::read_to_string(report_json).map_err(|e| PcgError::io(report_json, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| PcgError::parse(report_json, e.line(), e.to_string()))?;
    let mut out = format!(
        "aggregation: {}  folds: {}  k: {}  seed: {}\n",
        v["aggregation"].as_str().unwrap_or("?"),
        v["n_folds"],
        v["k"],
        v["seed"]
    );
    out.push_str(&format!(
        "{:<10} {:>8} {:>8} {:>4}\n",
        "metric", "mean", "std", "n"
    ));
    for name in [
        "auroc",
        "precision",
        "recall",
        "f2",
        "mcc",
        "tp",
        "fp",
        "fn",
        "tn",
    ] {
        let m = &v["summary"][name];
        if m.is_null() {
            out.push_str(&format!("{name:<10} {:>8}\n", "n/a"));
            continue;
        }
        out.push_str(&format!(
            "{:<10} {:>8.4} {:>8.4} {:>4}\n",
            name,
            m["mean"].as_f64().unwrap_or(f64::NAN),
            m["std"].as_f64().unwrap_or(f64::NAN),
            m["n"]
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub recordings: usize,
    pub positive_recordings: usize,
    pub manifest: PathBuf,
}

pub fn synth_generate(out_dir: &Path, spec: &DatasetSpec) -> Result<SynthSummary> {
    let rows = generate_dataset(out_dir, spec)?;
    let manifest = out_dir.join("manifest.csv");
    let summary = SynthSummary {
        recordings: rows.len(),
        positive_recordings: rows.iter().filter(|r| r.label == Label::Present).count(),
        manifest: manifest.clone(),
    };
    let spec_json = serde_json::to_vec(spec).map_err(|e| PcgError::Other(e.to_string()))?;
    let record = serde_json::json!({
        "stage": "synth",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": crate::util::sha256_hex(&spec_json),
        "seed": spec.seed,
        "spec": spec,
        "outputs": [FileDigest::of(&manifest)?],
        "summary": &summary,
    });
    let text = serde_json::to_string_pretty(&record).map_err(|e| PcgError::Other(e.to_string()))?;
    write_atomic(&out_dir.join("synth_run.json"), text.as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub ingest: IngestReport,
    pub preprocess: PreprocessSummary,
    pub segment: SegmentSummary,
    pub featurize: Option<FeaturizeSummary>,
    pub import: Option<ImportSummary>,
    pub mean_auroc: Option<f64>,
}

/// Every stage in order: ingest, preprocess, segment, features (pooled mel,
/// or imported embeddings when `paths.embeddings` is set), cross-validation.
pub fn run_all(cfg: &PipelineConfig) -> Result<(RunSummary, CvReport)> {
    cfg.validate()?;
    let ingest = ingest(cfg)?;
    let preprocess = preprocess(cfg)?;
    let segment = segment(cfg)?;
    let (featurize, import) = match &cfg.paths.embeddings {
        Some(p) => (None, Some(embed_import(cfg, p)?)),
        None => (Some(featurize(cfg)?), None),
    };
    let report = cv(cfg)?;
    Ok((
        RunSummary {
            ingest,
            preprocess,
            segment,
            featurize,
            import,
            mean_auroc: report.mean_auroc(),
        },
        report,
    ))
}
