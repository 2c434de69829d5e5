//! Binary classification metrics and patient-grouped cross-validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PcgError, Result};
use crate::knn::{fit_rows, KnnConfig};
use crate::util::{derive_seed, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `(1 + β²)·P·R / (β²·P + R)`, zero when both are zero.
    pub fn f_beta(&self, beta: f64) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        let b2 = beta * beta;
        let den = b2 * p + r;
        if den == 0.0 {
            0.0
        } else {
            (1.0 + b2) * p * r / den
        }
    }

    pub fn f2(&self) -> f64 {
        self.f_beta(2.0)
    }

    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (
            self.tp as f64,
            self.fp as f64,
            self.fn_ as f64,
            self.tn as f64,
        );
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion_matrix(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(PcgError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(PcgError::Empty("confusion matrix"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Probability that a random positive outscores a random negative (ties
/// count one half), computed from average ranks.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(PcgError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PcgError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += avg * order[i..=j].iter().filter(|&&k| labels[k] != 0).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    /// Missing when the evaluated labels contain a single class.
    pub auroc: Option<f64>,
    pub mcc: f64,
    pub f2: f64,
    pub counts: ConfusionMatrix,
}

pub fn compute_metrics(
    cm: &ConfusionMatrix,
    scores: &[f64],
    labels: &[u8],
) -> Result<MetricsReport> {
    let auroc = auroc(scores, labels)?;
    Ok(report(cm, Some(auroc)))
}

fn report(cm: &ConfusionMatrix, auroc: Option<f64>) -> MetricsReport {
    MetricsReport {
        precision: cm.precision(),
        recall: cm.recall(),
        auroc,
        mcc: cm.mcc(),
        f2: cm.f2(),
        counts: *cm,
    }
}

/// Patient → fold map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: BTreeMap<String, usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_of(&self, patient_id: &str) -> Option<usize> {
        self.folds.get(patient_id).copied()
    }

    pub fn patients_in(&self, fold: usize) -> BTreeSet<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

/// Stratified patient-level folds. Patients are ordered by id, shuffled
/// within each class by `seed`, and dealt round-robin: positives first, then
/// negatives continuing from the next fold, so both fold sizes and per-fold
/// class counts differ by at most one.
pub fn make_folds(patients: &[(String, u8)], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(PcgError::InvalidConfig(format!(
            "need at least 2 folds, got {n_folds}"
        )));
    }
    let mut seen = BTreeSet::new();
    for (id, _) in patients {
        if !seen.insert(id.as_str()) {
            return Err(PcgError::DuplicateId(id.clone()));
        }
    }
    if patients.len() < n_folds {
        return Err(PcgError::InvalidConfig(format!(
            "{} patients cannot fill {n_folds} folds",
            patients.len()
        )));
    }
    let mut folds = BTreeMap::new();
    let mut next = 0usize;
    for class in [1u8, 0] {
        let mut ids: Vec<&String> = patients
            .iter()
            .filter(|(_, l)| (*l != 0) == (class == 1))
            .map(|(id, _)| id)
            .collect();
        if ids.is_empty() {
            return Err(PcgError::InvalidConfig(format!(
                "no patients with label {class}; stratified folds need both classes"
            )));
        }
        ids.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"folds", &[class]]));
        ids.shuffle(&mut rng);
        for id in ids {
            folds.insert(id.clone(), next % n_folds);
            next += 1;
        }
    }
    Ok(FoldAssignment {
        folds,
        n_folds,
        seed,
    })
}

/// Patient label = 1 when any of the patient's items is positive.
pub fn patient_labels<'a>(items: impl IntoIterator<Item = (&'a str, u8)>) -> Vec<(String, u8)> {
    let mut map: BTreeMap<String, u8> = BTreeMap::new();
    for (p, l) in items {
        let e = map.entry(p.to_string()).or_insert(0);
        *e = (*e).max(u8::from(l != 0));
    }
    map.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Every chunk is one evaluated item.
    #[default]
    PerChunk,
    /// Chunk scores are averaged per recording before thresholding.
    PerRecordingMeanScore,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::PerChunk => "per_chunk",
            Aggregation::PerRecordingMeanScore => "per_recording_mean_score",
        })
    }
}

impl FromStr for Aggregation {
    type Err = PcgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_chunk" | "chunk" => Ok(Aggregation::PerChunk),
            "per_recording_mean_score" | "recording" => Ok(Aggregation::PerRecordingMeanScore),
            _ => Err(PcgError::InvalidConfig(format!(
                "unknown aggregation `{s}`"
            ))),
        }
    }
}

/// One chunk's feature vector with its grouping keys.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSample {
    pub id: String,
    pub patient_id: String,
    pub recording_id: String,
    pub label: u8,
    pub vector: Vec<f64>,
    /// Extra vectors added to the training set when this chunk is in a
    /// training fold. Never used for validation.
    pub augmented: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub train_patients: usize,
    pub validation_patients: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for fewer than two values.
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std, n })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub aggregation: Aggregation,
    pub n_folds: usize,
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<FoldReport>,
    /// Keyed by metric name (`precision`, `recall`, `auroc`, `mcc`, `f2`,
    /// `tp`, `fp`, `fn`, `tn`).
    pub summary: BTreeMap<String, MeanStd>,
}

impl CvReport {
    pub fn mean_auroc(&self) -> Option<f64> {
        self.summary.get("auroc").map(|m| m.mean)
    }
}

/// Fits on out-of-fold patients and evaluates in-fold chunks, for every
/// fold.
pub fn run_cv(
    samples: &[CvSample],
    folds: &FoldAssignment,
    knn: &KnnConfig,
    aggregation: Aggregation,
) -> Result<CvReport> {
    knn.validate()?;
    if samples.is_empty() {
        return Err(PcgError::Empty("cross-validation samples"));
    }
    let fold_of: Vec<usize> = samples
        .iter()
        .map(|s| {
            folds.fold_of(&s.patient_id).ok_or_else(|| {
                PcgError::InvalidConfig(format!(
                    "patient `{}` has no fold assignment",
                    s.patient_id
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(folds.n_folds);
    for fold in 0..folds.n_folds {
        let (val, train): (Vec<usize>, Vec<usize>) =
            (0..samples.len()).partition(|&i| fold_of[i] == fold);
        if val.is_empty() {
            log::warn!("fold {fold} has no validation samples; skipped");
            continue;
        }
        let train_patients: BTreeSet<&str> = train
            .iter()
            .map(|&i| samples[i].patient_id.as_str())
            .collect();
        let val_patients: BTreeSet<&str> = val
            .iter()
            .map(|&i| samples[i].patient_id.as_str())
            .collect();
        if let Some(p) = train_patients.intersection(&val_patients).next() {
            return Err(PcgError::Other(format!(
                "patient `{p}` appears in training and validation of fold {fold}"
            )));
        }

        let mut rows = Vec::new();
        for &i in &train {
            let s = &samples[i];
            rows.push((s.id.clone(), s.vector.clone(), s.label));
            for (j, v) in s.augmented.iter().enumerate() {
                rows.push((format!("{}#aug{j}", s.id), v.clone(), s.label));
            }
        }
        let n_train = rows.len();
        let model = fit_rows(rows, knn)?;

        let mut scores = Vec::with_capacity(val.len());
        let mut labels = Vec::with_capacity(val.len());
        match aggregation {
            Aggregation::PerChunk => {
                for &i in &val {
                    scores.push(model.score(&samples[i].vector)?);
                    labels.push(samples[i].label);
                }
            }
            Aggregation::PerRecordingMeanScore => {
                let mut order: Vec<&str> = Vec::new();
                let mut acc: HashMap<&str, (f64, usize, u8)> = HashMap::new();
                for &i in &val {
                    let s = &samples[i];
                    let score = model.score(&s.vector)?;
                    let e = acc.entry(&s.recording_id).or_insert_with(|| {
                        order.push(&s.recording_id);
                        (0.0, 0, 0)
                    });
                    e.0 += score;
                    e.1 += 1;
                    e.2 = e.2.max(s.label);
                }
                for r in order {
                    let (sum, n, label) = acc[r];
                    scores.push(sum / n as f64);
                    labels.push(label);
                }
            }
        }
        let preds: Vec<u8> = scores
            .iter()
            .map(|&s| u8::from(s >= knn.threshold))
            .collect();
        let cm = confusion_matrix(&preds, &labels)?;
        let auc = match auroc(&scores, &labels) {
            Ok(a) => Some(a),
            Err(PcgError::SingleClass) => {
                log::warn!(
                    "fold {fold}: validation labels are single-class; AUROC excluded from the mean"
                );
                None
            }
            Err(e) => return Err(e),
        };
        reports.push(FoldReport {
            fold,
            n_train,
            n_validation: val.len(),
            train_patients: train_patients.len(),
            validation_patients: val_patients.len(),
            metrics: report(&cm, auc),
        });
    }

    let mut summary = BTreeMap::new();
    let mut add = |name: &str, f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let vals: Vec<f64> = reports.iter().filter_map(|r| f(&r.metrics)).collect();
        if let Some(ms) = mean_std(&vals) {
            summary.insert(name.to_string(), ms);
        }
    };
    add("precision", &|m| Some(m.precision));
    add("recall", &|m| Some(m.recall));
    add("auroc", &|m| m.auroc);
    add("mcc", &|m| Some(m.mcc));
    add("f2", &|m| Some(m.f2));
    add("tp", &|m| Some(m.counts.tp as f64));
    add("fp", &|m| Some(m.counts.fp as f64));
    add("fn", &|m| Some(m.counts.fn_ as f64));
    add("tn", &|m| Some(m.counts.tn as f64));

    Ok(CvReport {
        aggregation,
        n_folds: folds.n_folds,
        seed: folds.seed,
        k: knn.k,
        folds: reports,
        summary,
    })
}

pub fn write_report_json(path: &Path, report: &CvReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| PcgError::Other(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// One row per fold.
pub fn write_folds_csv(path: &Path, report: &CvReport) -> Result<()> {
    let mut out =
        String::from("fold,n_train,n_validation,tp,fp,fn,tn,precision,recall,f2,mcc,auroc\n");
    for f in &report.folds {
        let m = &f.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f.fold,
            f.n_train,
            f.n_validation,
            m.counts.tp,
            m.counts.fp,
            m.counts.fn_,
            m.counts.tn,
            m.precision,
            m.recall,
            m.f2,
            m.mcc,
            m.auroc.map(|a| a.to_string()).unwrap_or_default()
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Mean ± std of each confusion-matrix cell across folds.
pub fn write_confusion_csv(path: &Path, report: &CvReport) -> Result<()> {
    let mut out = String::from("actual,predicted,mean,std\n");
    for (cell, actual, predicted) in [("tp", 1, 1), ("fn", 1, 0), ("fp", 0, 1), ("tn", 0, 0)] {
        if let Some(ms) = report.summary.get(cell) {
            out.push_str(&format!("{actual},{predicted},{},{}\n", ms.mean, ms.std));
        }
    }
    write_atomic(path, out.as_bytes())
}
