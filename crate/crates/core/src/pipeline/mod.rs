//! Configuration, file layout and stage runners behind the command-line
//! tool. Every stage writes its outputs atomically and leaves a JSON run
//! record (configuration hash, seed, input and output digests) under
//! `runs/` in the work directory.

mod config;
mod layout;
mod record;
mod stages;

pub use config::{
    AugmentSettings, BandpassSettings, CvSettings, DatasetSettings, FeatureSettings, Paths,
    PipelineConfig, Preset, SegmentSettings,
};
pub use layout::Layout;
pub use record::{FileDigest, RunRecord};
pub use stages::{
    cv, embed_import, featurize, ingest, knn_fit, knn_predict, load_cv_samples, preprocess,
    read_chunk_index, render_report, run_all, segment, synth_generate, ChunkIndexRow,
    FeaturizeSummary, ImportSummary, IngestReport, KnnFitSummary, KnnPredictSummary,
    PreprocessSummary, RunSummary, SegmentSummary, SynthSummary, CHUNK_INDEX_HEADER,
};
