use std::path::PathBuf;

use super::config::PipelineConfig;

/// File locations inside the work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Layout {
            root: cfg.paths.work_dir.clone(),
        }
    }

    pub fn root(&self) -> &PathBuf {
        &self.root
    }

    pub fn preprocessed_dir(&self) -> PathBuf {
        self.root.join("preprocessed")
    }

    pub fn preprocessed_wav(&self, recording_id: &str) -> PathBuf {
        self.preprocessed_dir().join(format!("{recording_id}.wav"))
    }

    pub fn chunks_dir(&self) -> PathBuf {
        self.root.join("chunks")
    }

    pub fn chunk_wav(&self, chunk_id: &str) -> PathBuf {
        self.chunks_dir().join(format!("{chunk_id}.wav"))
    }

    pub fn chunk_index(&self) -> PathBuf {
        self.chunks_dir().join("index.csv")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn features_csv(&self) -> PathBuf {
        self.features_dir().join("features.csv")
    }

    pub fn labels_csv(&self) -> PathBuf {
        self.features_dir().join("labels.csv")
    }

    pub fn augmented_csv(&self) -> PathBuf {
        self.features_dir().join("augmented.csv")
    }

    pub fn knn_dir(&self) -> PathBuf {
        self.root.join("knn")
    }

    pub fn cv_dir(&self) -> PathBuf {
        self.root.join("cv")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }
}
