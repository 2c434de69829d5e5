#ifndef PCGKIT_H
#define PCGKIT_H

#include <stddef.h>
#include <stdint.h>

typedef enum PcgStatus {
  PCG_STATUS_OK = 0,
  PCG_STATUS_NULL_POINTER = 1,
  PCG_STATUS_INVALID_ARGUMENT = 2,
  PCG_STATUS_INPUT_TOO_SHORT = 3,
  PCG_STATUS_NOT_ENOUGH_POINTS = 4,
  PCG_STATUS_SINGLE_CLASS = 5,
  PCG_STATUS_BUFFER_TOO_SMALL = 6,
  PCG_STATUS_INTERNAL = 99,
} PcgStatus;

// Chunks produced by one segmentation call.
typedef struct PcgChunkList PcgChunkList;

// Fitted k-NN classifier.
typedef struct PcgKnnModel PcgKnnModel;

// Log-mel spectrogram, `n_mels` rows by `n_frames` columns.
typedef struct PcgMelSpectrogram PcgMelSpectrogram;

// Mono signal with its sample rate.
typedef struct PcgWaveform PcgWaveform;

// Binary classification metrics. `auroc` is NaN when the labels hold a
// single class.
typedef struct PcgMetrics {
  double precision;
  double recall;
  double auroc;
  double mcc;
  double f2;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t tn;
} PcgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. Valid
// until the next failing call on the same thread.
const char *pcg_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pcg_version(void);

// Copies `len` samples into a new waveform.
//
// # Safety
// `samples` must point to `len` readable values; `out` must be writable.
enum PcgStatus pcg_waveform_new(const double *samples,
                                size_t len,
                                uint32_t sample_rate,
                                struct PcgWaveform **out);

// # Safety
// `w` must be null or a handle from this library not yet freed.
void pcg_waveform_free(struct PcgWaveform *w);

// Sample count, or 0 for a null handle.
//
// # Safety
// `w` must be null or a live handle.
size_t pcg_waveform_len(const struct PcgWaveform *w);

// Sample rate in Hz, or 0 for a null handle.
//
// # Safety
// `w` must be null or a live handle.
uint32_t pcg_waveform_sample_rate(const struct PcgWaveform *w);

// Copies the samples into `out`, which must hold at least
// `pcg_waveform_len(w)` values.
//
// # Safety
// `out` must point to `capacity` writable values.
enum PcgStatus pcg_waveform_copy(const struct PcgWaveform *w, double *out, size_t capacity);

// Zero-phase Butterworth bandpass.
//
// # Safety
// `w` must be a live handle; `out` must be writable.
enum PcgStatus pcg_bandpass(const struct PcgWaveform *w,
                            double low_hz,
                            double high_hz,
                            size_t order,
                            struct PcgWaveform **out);

// Min-max normalization to `[0, 1]`.
//
// # Safety
// `w` must be a live handle; `out` must be writable.
enum PcgStatus pcg_normalize(const struct PcgWaveform *w, struct PcgWaveform **out);

// # Safety
// `w` must be a live handle; `out` must be writable.
enum PcgStatus pcg_resample(const struct PcgWaveform *w,
                            uint32_t target_sr,
                            struct PcgWaveform **out);

// `(target_duration / cycle_duration) × (target_sr / original_sr)`.
double pcg_stretch_factor(double target_duration,
                          double cycle_duration,
                          double target_sr,
                          double original_sr);

// Fixed-duration chunks of `seconds` each at the waveform's own rate.
//
// # Safety
// `w` must be a live handle; `out` must be writable.
enum PcgStatus pcg_chunk_fixed(const struct PcgWaveform *w,
                               double seconds,
                               struct PcgChunkList **out);

// Groups of `n_cycles` heart cycles delimited by S1 onsets (seconds), each
// stretched to `seconds` at `target_sr`.
//
// # Safety
// `onsets` must point to `n_onsets` values; `w` must be a live handle;
// `out` must be writable.
enum PcgStatus pcg_chunk_cycles(const struct PcgWaveform *w,
                                const double *onsets,
                                size_t n_onsets,
                                size_t n_cycles,
                                double seconds,
                                uint32_t target_sr,
                                struct PcgChunkList **out);

// # Safety
// `list` must be null or a live handle.
size_t pcg_chunk_list_len(const struct PcgChunkList *list);

// Copies chunk `index` out as a new waveform.
//
// # Safety
// `list` must be a live handle; `out` must be writable.
enum PcgStatus pcg_chunk_list_get(const struct PcgChunkList *list,
                                  size_t index,
                                  struct PcgWaveform **out);

// # Safety
// `list` must be null or a handle from this library not yet freed.
void pcg_chunk_list_free(struct PcgChunkList *list);

// Log-mel spectrogram at the waveform's sample rate, upper band edge at
// Nyquist.
//
// # Safety
// `w` must be a live handle; `out` must be writable.
enum PcgStatus pcg_mel_spectrogram(const struct PcgWaveform *w,
                                   size_t n_mels,
                                   size_t fft_size,
                                   size_t hop_length,
                                   struct PcgMelSpectrogram **out);

// # Safety
// `m` must be a live handle; `n_mels` and `n_frames` must be writable.
enum PcgStatus pcg_mel_shape(const struct PcgMelSpectrogram *m, size_t *n_mels, size_t *n_frames);

// Row-major copy (mel band, then frame) in dB.
//
// # Safety
// `out` must point to `capacity` writable values.
enum PcgStatus pcg_mel_copy(const struct PcgMelSpectrogram *m, double *out, size_t capacity);

// Per-band mean followed by per-band standard deviation over frames
// (`2 × n_mels` values).
//
// # Safety
// `out` must point to `capacity` writable values.
enum PcgStatus pcg_mel_pool(const struct PcgMelSpectrogram *m, double *out, size_t capacity);

// # Safety
// `m` must be null or a handle from this library not yet freed.
void pcg_mel_free(struct PcgMelSpectrogram *m);

// Fits a Euclidean, uniformly weighted k-NN model on `n` row-major points
// of dimension `dim` with 0/1 `labels`.
//
// # Safety
// `points` must hold `n × dim` values and `labels` `n` values; `out` must
// be writable.
enum PcgStatus pcg_knn_fit(const double *points,
                           const uint8_t *labels,
                           size_t n,
                           size_t dim,
                           size_t k,
                           double threshold,
                           struct PcgKnnModel **out);

// Fraction of the k nearest training points that are positive.
//
// # Safety
// `query` must hold `dim` values; `score` must be writable.
enum PcgStatus pcg_knn_score(const struct PcgKnnModel *model,
                             const double *query,
                             size_t dim,
                             double *score);

// # Safety
// `model` must be null or a handle from this library not yet freed.
void pcg_knn_free(struct PcgKnnModel *model);

// Area under the ROC curve with tied scores counted as one half.
//
// # Safety
// `scores` and `labels` must hold `n` values; `out` must be writable.
enum PcgStatus pcg_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

// Confusion counts from `predictions` against `labels`, plus AUROC from
// `scores`.
//
// # Safety
// All arrays must hold `n` values; `out` must be writable.
enum PcgStatus pcg_metrics(const uint8_t *predictions,
                           const double *scores,
                           const uint8_t *labels,
                           size_t n,
                           struct PcgMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCGKIT_H */
