#include <math.h>
#include <stdio.h>
#include <string.h>

#include "pcgkit.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            const char *msg = pcg_last_error_message();                \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,     \
                    msg ? msg : "no error");                           \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    enum { SR = 4000, N = 4000 * 10 };
    static double x[N];
    for (size_t i = 0; i < N; i++) {
        x[i] = sin(2.0 * 3.14159265358979 * 100.0 * (double)i / SR);
    }

    CHECK(strlen(pcg_version()) > 0);

    PcgWaveform *w = NULL, *f = NULL, *n = NULL;
    CHECK(pcg_waveform_new(x, N, SR, &w) == PCG_STATUS_OK);
    CHECK(pcg_bandpass(w, 25.0, 500.0, 5, &f) == PCG_STATUS_OK);
    CHECK(pcg_normalize(f, &n) == PCG_STATUS_OK);
    CHECK(pcg_waveform_len(n) == N);

    PcgChunkList *chunks = NULL;
    CHECK(pcg_chunk_fixed(n, 4.0, &chunks) == PCG_STATUS_OK);
    CHECK(pcg_chunk_list_len(chunks) == 2);

    PcgWaveform *c = NULL;
    CHECK(pcg_chunk_list_get(chunks, 0, &c) == PCG_STATUS_OK);
    PcgMelSpectrogram *m = NULL;
    CHECK(pcg_mel_spectrogram(c, 64, 512, 256, &m) == PCG_STATUS_OK);
    size_t bands = 0, frames = 0;
    CHECK(pcg_mel_shape(m, &bands, &frames) == PCG_STATUS_OK);
    CHECK(bands == 64 && frames == 61);

    double points[] = {0, 0, 0, 1, 5, 5, 5, 6};
    uint8_t labels[] = {0, 0, 1, 1};
    PcgKnnModel *model = NULL;
    CHECK(pcg_knn_fit(points, labels, 4, 2, 2, 0.5, &model) == PCG_STATUS_OK);
    double q[] = {5, 5.5}, score = -1;
    CHECK(pcg_knn_score(model, q, 2, &score) == PCG_STATUS_OK && score == 1.0);

    double scores[] = {0.9, 0.2, 0.8, 0.1};
    uint8_t truth[] = {1, 0, 1, 0}, preds[] = {1, 0, 1, 1};
    PcgMetrics metrics;
    CHECK(pcg_metrics(preds, scores, truth, 4, &metrics) == PCG_STATUS_OK);
    CHECK(metrics.auroc == 1.0 && metrics.fp == 1 && metrics.tn == 1);

    CHECK(pcg_auroc(scores, labels, 0, &score) != PCG_STATUS_OK);
    CHECK(pcg_last_error_message() != NULL);

    pcg_knn_free(model);
    pcg_mel_free(m);
    pcg_waveform_free(c);
    pcg_chunk_list_free(chunks);
    pcg_waveform_free(n);
    pcg_waveform_free(f);
    pcg_waveform_free(w);
    puts("ok");
    return 0;
}
