//! C ABI over the pcgkit signal-processing, classification and metric
//! primitives.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`PcgStatus`]; on failure a description is available from
//! [`pcg_last_error_message`] on the same thread. Panics never unwind into
//! the caller and are reported as [`PcgStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pcgkit::dataset::{resample, Waveform};
use pcgkit::eval::{auroc, compute_metrics, confusion_matrix};
use pcgkit::features::{mel_spectrogram, pool_features, FeatureConfig, MelSpectrogram};
use pcgkit::knn::{fit_rows, knn_score, KnnConfig, KnnModel};
use pcgkit::preprocess::{design_bandpass, filter_zero_phase, minmax_normalize, BandpassSpec};
use pcgkit::segment::{
    chunk_cycles, chunk_fixed, compute_stretch_factor, Chunk, ChunkOrigin, SegmentConfig,
    StretchSpec,
};
use pcgkit::PcgError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InputTooShort = 3,
    NotEnoughPoints = 4,
    SingleClass = 5,
    BufferTooSmall = 6,
    Internal = 99,
}

/// Mono signal with its sample rate.
pub struct PcgWaveform(Waveform);

/// Chunks produced by one segmentation call.
pub struct PcgChunkList(Vec<Chunk>);

/// Log-mel spectrogram, `n_mels` rows by `n_frames` columns.
pub struct PcgMelSpectrogram(MelSpectrogram);

/// Fitted k-NN classifier.
pub struct PcgKnnModel {
    model: KnnModel,
    config: KnnConfig,
}

/// Binary classification metrics. `auroc` is NaN when the labels hold a
/// single class.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PcgMetrics {
    pub precision: f64,
    pub recall: f64,
    pub auroc: f64,
    pub mcc: f64,
    pub f2: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(PcgStatus, String);

impl From<PcgError> for Failure {
    fn from(e: PcgError) -> Self {
        let status = match e {
            PcgError::InputTooShort { .. } => PcgStatus::InputTooShort,
            PcgError::NotEnoughPoints { .. } => PcgStatus::NotEnoughPoints,
            PcgError::SingleClass => PcgStatus::SingleClass,
            _ => PcgStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: PcgStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal error".into());
            set_last_error(format!("panic: {msg}"));
            PcgStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(PcgStatus::NullPointer, format!("`{name}` is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(PcgStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(PcgStatus::NullPointer, "output pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(PcgStatus::NullPointer, "output pointer is null");
    }
    *out = value;
    Ok(())
}

unsafe fn copy_into(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return fail(
            PcgStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, need {}", src.len()),
        );
    }
    if !src.is_empty() {
        if out.is_null() {
            return fail(PcgStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pcg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcg_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version contains NUL"),
        };
    VERSION.as_ptr()
}

/// Copies `len` samples into a new waveform.
///
/// # Safety
/// `samples` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_waveform_new(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut PcgWaveform,
) -> PcgStatus {
    guard(|| {
        let s = slice(samples, len, "samples")?;
        let w = Waveform::new(s.to_vec(), sample_rate)?;
        emit(out, PcgWaveform(w))
    })
}

/// # Safety
/// `w` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcg_waveform_free(w: *mut PcgWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcg_waveform_len(w: *const PcgWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Sample rate in Hz, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcg_waveform_sample_rate(w: *const PcgWaveform) -> u32 {
    w.as_ref().map_or(0, |w| w.0.sample_rate)
}

/// Copies the samples into `out`, which must hold at least
/// `pcg_waveform_len(w)` values.
///
/// # Safety
/// `out` must point to `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn pcg_waveform_copy(
    w: *const PcgWaveform,
    out: *mut f64,
    capacity: usize,
) -> PcgStatus {
    guard(|| copy_into(&handle(w, "w")?.0.samples, out, capacity))
}

/// Zero-phase Butterworth bandpass.
///
/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_bandpass(
    w: *const PcgWaveform,
    low_hz: f64,
    high_hz: f64,
    order: usize,
    out: *mut *mut PcgWaveform,
) -> PcgStatus {
    guard(|| {
        let w = &handle(w, "w")?.0;
        let coeffs = design_bandpass(&BandpassSpec {
            low_cut: low_hz,
            high_cut: high_hz,
            order,
            sample_rate: w.sample_rate,
        })?;
        emit(out, PcgWaveform(filter_zero_phase(&coeffs, w)?))
    })
}

/// Min-max normalization to `[0, 1]`.
///
/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_normalize(
    w: *const PcgWaveform,
    out: *mut *mut PcgWaveform,
) -> PcgStatus {
    guard(|| emit(out, PcgWaveform(minmax_normalize(&handle(w, "w")?.0))))
}

/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_resample(
    w: *const PcgWaveform,
    target_sr: u32,
    out: *mut *mut PcgWaveform,
) -> PcgStatus {
    guard(|| {
        let w = &handle(w, "w")?.0;
        if target_sr == 0 {
            return fail(
                PcgStatus::InvalidArgument,
                "target sample rate must be positive",
            );
        }
        emit(out, PcgWaveform(resample(w, target_sr)))
    })
}

/// `(target_duration / cycle_duration) × (target_sr / original_sr)`.
#[no_mangle]
pub extern "C" fn pcg_stretch_factor(
    target_duration: f64,
    cycle_duration: f64,
    target_sr: f64,
    original_sr: f64,
) -> f64 {
    compute_stretch_factor(&StretchSpec {
        target_duration,
        cycle_duration,
        target_sr,
        original_sr,
    })
}

/// Fixed-duration chunks of `seconds` each at the waveform's own rate.
///
/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_chunk_fixed(
    w: *const PcgWaveform,
    seconds: f64,
    out: *mut *mut PcgChunkList,
) -> PcgStatus {
    guard(|| {
        let w = &handle(w, "w")?.0;
        let cfg = SegmentConfig::fixed(seconds, w.sample_rate);
        let chunks = chunk_fixed(w, &cfg, &ChunkOrigin::new("ffi", "ffi"))?;
        emit(out, PcgChunkList(chunks))
    })
}

/// Groups of `n_cycles` heart cycles delimited by S1 onsets (seconds), each
/// stretched to `seconds` at `target_sr`.
///
/// # Safety
/// `onsets` must point to `n_onsets` values; `w` must be a live handle;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_chunk_cycles(
    w: *const PcgWaveform,
    onsets: *const f64,
    n_onsets: usize,
    n_cycles: usize,
    seconds: f64,
    target_sr: u32,
    out: *mut *mut PcgChunkList,
) -> PcgStatus {
    guard(|| {
        let w = &handle(w, "w")?.0;
        let onsets = slice(onsets, n_onsets, "onsets")?;
        let cfg = SegmentConfig::cycle(n_cycles, seconds, target_sr);
        let chunks = chunk_cycles(w, onsets, &cfg, &ChunkOrigin::new("ffi", "ffi"))?;
        emit(out, PcgChunkList(chunks))
    })
}

/// # Safety
/// `list` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcg_chunk_list_len(list: *const PcgChunkList) -> usize {
    list.as_ref().map_or(0, |l| l.0.len())
}

/// Copies chunk `index` out as a new waveform.
///
/// # Safety
/// `list` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_chunk_list_get(
    list: *const PcgChunkList,
    index: usize,
    out: *mut *mut PcgWaveform,
) -> PcgStatus {
    guard(|| {
        let list = &handle(list, "list")?.0;
        match list.get(index) {
            Some(c) => emit(out, PcgWaveform(c.waveform())),
            None => fail(
                PcgStatus::InvalidArgument,
                format!("chunk index {index} out of range ({} chunks)", list.len()),
            ),
        }
    })
}

/// # Safety
/// `list` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcg_chunk_list_free(list: *mut PcgChunkList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Log-mel spectrogram at the waveform's sample rate, upper band edge at
/// Nyquist.
///
/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_mel_spectrogram(
    w: *const PcgWaveform,
    n_mels: usize,
    fft_size: usize,
    hop_length: usize,
    out: *mut *mut PcgMelSpectrogram,
) -> PcgStatus {
    guard(|| {
        let w = &handle(w, "w")?.0;
        let cfg = FeatureConfig {
            n_mels,
            fft_size,
            hop_length,
            sample_rate: w.sample_rate,
            ..FeatureConfig::fixed_mode(w.sample_rate)
        };
        emit(out, PcgMelSpectrogram(mel_spectrogram(w, &cfg)?))
    })
}

/// # Safety
/// `m` must be a live handle; `n_mels` and `n_frames` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_mel_shape(
    m: *const PcgMelSpectrogram,
    n_mels: *mut usize,
    n_frames: *mut usize,
) -> PcgStatus {
    guard(|| {
        let (r, c) = handle(m, "m")?.0.values.dim();
        write_out(n_mels, r)?;
        write_out(n_frames, c)
    })
}

/// Row-major copy (mel band, then frame) in dB.
///
/// # Safety
/// `out` must point to `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn pcg_mel_copy(
    m: *const PcgMelSpectrogram,
    out: *mut f64,
    capacity: usize,
) -> PcgStatus {
    guard(|| {
        let values: Vec<f64> = handle(m, "m")?.0.values.iter().copied().collect();
        copy_into(&values, out, capacity)
    })
}

/// Per-band mean followed by per-band standard deviation over frames
/// (`2 × n_mels` values).
///
/// # Safety
/// `out` must point to `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn pcg_mel_pool(
    m: *const PcgMelSpectrogram,
    out: *mut f64,
    capacity: usize,
) -> PcgStatus {
    guard(|| copy_into(&pool_features(&handle(m, "m")?.0)?, out, capacity))
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcg_mel_free(m: *mut PcgMelSpectrogram) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Fits a Euclidean, uniformly weighted k-NN model on `n` row-major points
/// of dimension `dim` with 0/1 `labels`.
///
/// # Safety
/// `points` must hold `n × dim` values and `labels` `n` values; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_knn_fit(
    points: *const f64,
    labels: *const u8,
    n: usize,
    dim: usize,
    k: usize,
    threshold: f64,
    out: *mut *mut PcgKnnModel,
) -> PcgStatus {
    guard(|| {
        let total = n
            .checked_mul(dim)
            .ok_or_else(|| Failure(PcgStatus::InvalidArgument, "n × dim overflows".into()))?;
        let pts = slice(points, total, "points")?;
        let labels = slice(labels, n, "labels")?;
        if dim == 0 {
            return fail(PcgStatus::InvalidArgument, "dimension must be positive");
        }
        let rows = (0..n)
            .map(|i| {
                (
                    i.to_string(),
                    pts[i * dim..(i + 1) * dim].to_vec(),
                    labels[i],
                )
            })
            .collect();
        let mut config = KnnConfig::fixed_mode();
        config.k = k;
        config.threshold = threshold;
        let model = fit_rows(rows, &config)?;
        emit(out, PcgKnnModel { model, config })
    })
}

/// Fraction of the k nearest training points that are positive.
///
/// # Safety
/// `query` must hold `dim` values; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_knn_score(
    model: *const PcgKnnModel,
    query: *const f64,
    dim: usize,
    score: *mut f64,
) -> PcgStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let q = slice(query, dim, "query")?;
        write_out(score, knn_score(&m.model, q, &m.config)?)
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcg_knn_free(model: *mut PcgKnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve with tied scores counted as one half.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_auroc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> PcgStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        let l = slice(labels, n, "labels")?;
        write_out(out, auroc(s, l)?)
    })
}

/// Confusion counts from `predictions` against `labels`, plus AUROC from
/// `scores`.
///
/// # Safety
/// All arrays must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcg_metrics(
    predictions: *const u8,
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut PcgMetrics,
) -> PcgStatus {
    guard(|| {
        let p = slice(predictions, n, "predictions")?;
        let s = slice(scores, n, "scores")?;
        let l = slice(labels, n, "labels")?;
        let cm = confusion_matrix(p, l)?;
        let r = compute_metrics(&cm, s, l)?;
        write_out(
            out,
            PcgMetrics {
                precision: r.precision,
                recall: r.recall,
                auroc: r.auroc.unwrap_or(f64::NAN),
                mcc: r.mcc,
                f2: r.f2,
                tp: cm.tp,
                fp: cm.fp,
                fn_: cm.fn_,
                tn: cm.tn,
            },
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_codes_are_stable() {
        assert_eq!(PcgStatus::Ok as i32, 0);
        assert_eq!(PcgStatus::Internal as i32, 99);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, PcgStatus::Internal);
        let msg = unsafe { CStr::from_ptr(pcg_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "panic: boom");
    }

    #[test]
    fn error_mapping() {
        assert_eq!(
            Failure::from(PcgError::SingleClass).0,
            PcgStatus::SingleClass
        );
        assert_eq!(
            Failure::from(PcgError::NotEnoughPoints { k: 3, available: 1 }).0,
            PcgStatus::NotEnoughPoints
        );
        assert_eq!(
            Failure::from(PcgError::InvalidConfig("x".into())).0,
            PcgStatus::InvalidArgument
        );
    }

    #[test]
    fn interior_nul_is_sanitized() {
        set_last_error("a\0b".into());
        let msg = unsafe { CStr::from_ptr(pcg_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }
}
