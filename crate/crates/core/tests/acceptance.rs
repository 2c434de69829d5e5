//! Acceptance checks. Each check prints one `PASS`, `FAIL` or `SKIP` line
//! with its measurement and wall time; the process exits non-zero if any
//! check fails or exceeds its time budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use pcgkit::dataset::Waveform;
use pcgkit::eval::{
    auroc, make_folds, patient_labels, run_cv, Aggregation, ConfusionMatrix, CvSample,
};
use pcgkit::knn::{fit_rows, KnnConfig};
use pcgkit::pipeline::{self, Layout, PipelineConfig, Preset};
use pcgkit::preprocess::{design_bandpass, BandpassSpec};
use pcgkit::segment::{chunk_cycles, chunk_fixed, stretch_to_length, ChunkOrigin, SegmentConfig};
use pcgkit::synth::{DatasetSpec, SynthConfig};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn origin() -> ChunkOrigin {
    ChunkOrigin::new("r", "p")
}

fn noise(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Strictly increasing onsets with 0.25–1.5 s spacing.
fn onsets(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut t = r.random_range(0.0..0.5);
    (0..n)
        .map(|_| {
            let v = t;
            t += r.random_range(0.25..1.5);
            v
        })
        .collect()
}

fn chunk_counts() -> Verdict {
    let mut r = rng(1);
    let rates = [500u32, 1000, 2000, 4000, 8000, 16000];
    let mut mismatches = Vec::new();
    for case in 0..1000 {
        let sr = rates[r.random_range(0..rates.len())];
        let seconds = r.random_range(0.05..3.0);
        let lc = (seconds * sr as f64).round() as usize;
        let mut len = r.random_range(0..60_000usize);
        if case % 10 == 0 && lc >= 20 {
            // Remainder exactly at the 65 % boundary, when representable.
            let rem = (65 * lc) / 100;
            if (100 * rem) % lc == 0 || 100 * rem == 65 * lc {
                len = (len / lc) * lc + rem;
            }
        }
        let w = Waveform::new(vec![0.25; len], sr).unwrap();
        let got = chunk_fixed(&w, &SegmentConfig::fixed(seconds, sr), &origin())
            .unwrap()
            .len();
        let rem = len % lc;
        let want = len / lc + usize::from(100 * rem > 65 * lc);
        if got != want {
            mismatches.push(format!("fixed len={len} lc={lc}: {got} != {want}"));
        }
    }
    // Audio arrives at the segmentation rate, as after preprocessing; the
    // length check below covers rate conversion.
    for _ in 0..1000 {
        let sr = [1000u32, 2000, 4000][r.random_range(0..3)];
        let n_onsets = r.random_range(0..30usize);
        let on = onsets(&mut r, n_onsets);
        let end = on.last().copied().unwrap_or(0.0) + 0.5;
        let w = Waveform::new(noise(&mut r, (end * sr as f64) as usize + 1), sr).unwrap();
        let n_cycles = r.random_range(1..=12usize);
        let cfg = SegmentConfig::cycle(n_cycles, r.random_range(0.05..1.0), sr);
        let got = chunk_cycles(&w, &on, &cfg, &origin()).unwrap().len();
        let want = if n_onsets == 0 {
            0
        } else {
            (n_onsets - 1) / n_cycles
        };
        if got != want {
            mismatches.push(format!(
                "cycle onsets={n_onsets} n={n_cycles}: {got} != {want}"
            ));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "2000 cases, {} mismatches{}",
            mismatches.len(),
            first_few(&mismatches)
        ),
    )
}

fn length_exactness() -> Verdict {
    let mut r = rng(2);
    let rates = [1000u32, 2000, 4000, 8000];
    let (mut chunks, mut bad) = (0usize, Vec::new());
    for _ in 0..500 {
        let src_sr = rates[r.random_range(0..rates.len())];
        let target_sr = rates[r.random_range(0..rates.len())];
        let seconds = r.random_range(0.1..2.5);
        let expect = (seconds * target_sr as f64).round() as usize;
        let n_onsets = r.random_range(2..25usize);
        let on = onsets(&mut r, n_onsets);
        let dur = on.last().unwrap() + r.random_range(0.0..3.0);
        let x = noise(&mut r, (dur * src_sr as f64) as usize + 1);

        let fixed_in = Waveform::new(x.clone(), target_sr).unwrap();
        let fixed = chunk_fixed(
            &fixed_in,
            &SegmentConfig::fixed(seconds, target_sr),
            &origin(),
        )
        .unwrap();
        let w = Waveform::new(x, src_sr).unwrap();
        let cfg = SegmentConfig::cycle(r.random_range(1..=10), seconds, target_sr);
        let cycle = chunk_cycles(&w, &on, &cfg, &origin()).unwrap();
        for c in fixed.iter().chain(&cycle) {
            chunks += 1;
            if c.samples.len() != expect {
                bad.push(format!("{:?} {} != {expect}", c.method, c.samples.len()));
            }
        }
    }
    verdict(
        bad.is_empty() && chunks > 0,
        format!(
            "{chunks} chunks over 500 configurations, {} wrong length{}",
            bad.len(),
            first_few(&bad)
        ),
    )
}

fn filter_response() -> Verdict {
    let coeffs = design_bandpass(&BandpassSpec::with_defaults(4000)).unwrap();
    // Each biquad evaluated on the unit circle from its raw coefficients.
    let gain_db = |f: f64| {
        let w = 2.0 * std::f64::consts::PI * f / 4000.0;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let h = coeffs
            .sections
            .iter()
            .fold(Complex::new(1.0, 0.0), |acc, s| {
                acc * (z1 * s.b[1] + z2 * s.b[2] + s.b[0]) / (z1 * s.a[0] + z2 * s.a[1] + 1.0)
            });
        20.0 * h.norm().log10()
    };
    let (g10, g112, g1500) = (gain_db(10.0), gain_db(112.0), gain_db(1500.0));
    let consistent = [10.0, 112.0, 1500.0]
        .iter()
        .all(|&f| (coeffs.magnitude_db(f) - gain_db(f)).abs() < 1e-9);
    verdict(
        g10 <= -40.0 && g1500 <= -40.0 && g112 >= -1.0 && consistent,
        format!("10 Hz {g10:.1} dB, 112 Hz {g112:.3} dB, 1500 Hz {g1500:.1} dB"),
    )
}

/// Peak of a Hann-windowed, zero-padded spectrum, refined by parabolic
/// interpolation of the log magnitude.
fn dominant_frequency(x: &[f64], sr: f64) -> f64 {
    let n = (x.len() * 16).next_power_of_two();
    let m = x.len() as f64;
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            Complex::new(
                v * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / m).cos()),
                0.0,
            )
        })
        .collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2]
        .iter()
        .map(|c| c.norm().max(1e-300).ln())
        .collect();
    let k = (1..mag.len() - 1)
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .unwrap();
    let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
    let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + delta) * sr / n as f64
}

fn stretch_pitch() -> Verdict {
    let sr = 4000u32;
    let len = 8000;
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for f in [50.0, 100.0, 200.0] {
        let x: Vec<f64> = (0..len)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / sr as f64).sin())
            .collect();
        let w = Waveform::new(x, sr).unwrap();
        for factor in [0.5, 1.0, 2.0] {
            let y = stretch_to_length(&w, (len as f64 * factor).round() as usize).unwrap();
            let got = dominant_frequency(&y.samples, sr as f64);
            let err = (got - f).abs() / f;
            worst = worst.max(err);
            rows.push(format!("{f}×{factor}→{got:.2}"));
        }
    }
    verdict(
        worst <= 0.02,
        format!(
            "max relative error {:.4} % ({})",
            worst * 100.0,
            rows.join(", ")
        ),
    )
}

fn metric_oracles() -> Verdict {
    let mut r = rng(5);
    let mut worst_auc: f64 = 0.0;
    for i in 0..100 {
        let n = r.random_range(2..=200usize);
        let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        labels[0] = 1;
        labels[1] = 0;
        let scores: Vec<f64> = if i % 2 == 0 {
            (0..n)
                .map(|_| r.random_range(0..=10) as f64 / 10.0)
                .collect()
        } else {
            (0..n).map(|_| r.random::<f64>()).collect()
        };
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (sp, _) in scores.iter().zip(&labels).filter(|(_, &l)| l == 1) {
            for (sn, _) in scores.iter().zip(&labels).filter(|(_, &l)| l == 0) {
                pairs += 1.0;
                wins += if sp > sn {
                    1.0
                } else if sp == sn {
                    0.5
                } else {
                    0.0
                };
            }
        }
        worst_auc = worst_auc.max((auroc(&scores, &labels).unwrap() - wins / pairs).abs());
    }

    let mut worst_cm: f64 = 0.0;
    let mut cms: Vec<ConfusionMatrix> = (0..99)
        .map(|i| {
            // Every fifth matrix has an empty margin.
            let mut c = [0u64; 4].map(|_| r.random_range(0..1000u64));
            if i % 5 == 0 {
                c[r.random_range(0..4)] = 0;
                c[r.random_range(0..4)] = 0;
            }
            ConfusionMatrix {
                tp: c[0],
                fp: c[1],
                fn_: c[2],
                tn: c[3],
            }
        })
        .collect();
    cms.push(ConfusionMatrix {
        tp: 3,
        fp: 1,
        fn_: 2,
        tn: 4,
    });
    for cm in &cms {
        let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
        let f2_den = 5.0 * tp + 4.0 * fn_ + fp;
        let f2 = if tp == 0.0 { 0.0 } else { 5.0 * tp / f2_den };
        let margins = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        let mcc = if margins == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / margins.sqrt()
        };
        worst_cm = worst_cm
            .max((cm.f2() - f2).abs())
            .max((cm.mcc() - mcc).abs());
    }
    let worked = cms.last().unwrap();
    let worked_ok = (worked.f2() - 0.625).abs() < 1e-12 && (worked.mcc() - 0.4082).abs() < 5e-5;
    verdict(
        worst_auc <= 1e-12 && worst_cm <= 1e-12 && worked_ok,
        format!(
            "AUROC max |Δ| {worst_auc:.1e}, F2/MCC max |Δ| {worst_cm:.1e}, worked case F2 {} MCC {:.4}",
            worked.f2(),
            worked.mcc()
        ),
    )
}

fn knn_exactness() -> Verdict {
    let mut r = rng(6);
    let (mut queries, mut mismatches, mut tied) = (0usize, 0usize, 0usize);
    for set in 0..100 {
        let n = r.random_range(1..=500usize);
        let d = r.random_range(1..=32usize);
        let grid = set % 2 == 0;
        let draw = |r: &mut ChaCha8Rng| -> Vec<f64> {
            (0..d)
                .map(|_| {
                    if grid {
                        r.random_range(0..3) as f64
                    } else {
                        r.random_range(-1.0..1.0)
                    }
                })
                .collect()
        };
        let points: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut r)).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let k = r.random_range(1..=n.min(25));
        let cfg = KnnConfig {
            k,
            ..KnnConfig::fixed_mode()
        };
        let rows = (0..n)
            .map(|i| (i.to_string(), points[i].clone(), labels[i]))
            .collect();
        let model = fit_rows(rows, &cfg).unwrap();
        for q in 0..20 {
            let query = if q % 4 == 0 {
                points[r.random_range(0..n)].clone()
            } else {
                draw(&mut r)
            };
            let mut order: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (
                        p.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum(),
                        i,
                    )
                })
                .collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            if k < n && order[k - 1].0 == order[k].0 {
                tied += 1;
            }
            let want = order[..k].iter().filter(|(_, i)| labels[*i] == 1).count() as f64 / k as f64;
            queries += 1;
            if model.score(&query).unwrap() != want {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0 && tied > 0,
        format!("{queries} queries on 100 sets, {tied} with ties at the k-th distance, {mismatches} mismatches"),
    )
}

fn cv_integrity() -> Verdict {
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let mut r = rng(1000 + seed);
        let n_patients = r.random_range(20..=200usize);
        let n_folds = if seed % 2 == 0 { 10 } else { 5 };
        let pos_frac = r.random_range(0.1..0.5);
        let mut samples = Vec::new();
        for p in 0..n_patients {
            let label = u8::from(r.random::<f64>() < pos_frac || p == 0);
            let label = if p == 1 { 0 } else { label };
            for rec in 0..r.random_range(1..=4) {
                for c in 0..2 {
                    samples.push(CvSample {
                        id: format!("{p}_{rec}_{c}"),
                        patient_id: format!("P{p}"),
                        recording_id: format!("{p}_{rec}"),
                        label,
                        vector: vec![r.random::<f64>(), r.random::<f64>()],
                        augmented: Vec::new(),
                    });
                }
            }
        }
        samples.shuffle(&mut r);
        let patients = patient_labels(samples.iter().map(|s| (s.patient_id.as_str(), s.label)));
        let folds = make_folds(&patients, n_folds, seed).unwrap();
        for fold in 0..n_folds {
            let val: std::collections::BTreeSet<&str> = samples
                .iter()
                .filter(|s| folds.fold_of(&s.patient_id) == Some(fold))
                .map(|s| s.patient_id.as_str())
                .collect();
            let train: std::collections::BTreeSet<&str> = samples
                .iter()
                .filter(|s| folds.fold_of(&s.patient_id) != Some(fold))
                .map(|s| s.patient_id.as_str())
                .collect();
            if val.intersection(&train).next().is_some()
                || val.len() + train.len() != patients.len()
            {
                failures.push(format!("seed {seed} fold {fold}: overlap"));
            }
            for class in [0u8, 1] {
                let total = patients.iter().filter(|(_, l)| *l == class).count() as f64;
                let got = patients
                    .iter()
                    .filter(|(p, l)| *l == class && folds.fold_of(p) == Some(fold))
                    .count() as f64;
                if (got - total / n_folds as f64).abs() > 1.0 {
                    failures.push(format!(
                        "seed {seed} fold {fold} class {class}: {got} of {total}"
                    ));
                }
            }
        }
        let cfg = KnnConfig {
            k: 3,
            ..KnnConfig::fixed_mode()
        };
        if let Err(e) = run_cv(&samples, &folds, &cfg, Aggregation::PerChunk) {
            failures.push(format!("seed {seed}: {e}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "50 fold generations, {} violations{}",
            failures.len(),
            first_few(&failures)
        ),
    )
}

fn synth_dataset(out: &Path, n_patients: usize, duration: f64, coverage: f64, seed: u64) {
    let spec = DatasetSpec {
        n_patients,
        positive_fraction: 0.2,
        seed,
        template: SynthConfig {
            duration,
            murmur_snr_db: 20.0,
            annotation_coverage: coverage,
            ..SynthConfig::default()
        },
        ..DatasetSpec::default()
    };
    pipeline::synth_generate(out, &spec).unwrap();
}

fn mode_config(preset: Preset, manifest: &Path, work: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::preset(preset);
    cfg.paths.manifest = Some(manifest.to_path_buf());
    cfg.paths.work_dir = work.to_path_buf();
    cfg.seed = 7;
    cfg.cv.n_folds = 10;
    cfg
}

/// Mean AUROC with patient labels permuted, averaged over several
/// permutations.
fn shuffled_auroc(cfg: &PipelineConfig) -> f64 {
    let layout = Layout::new(cfg);
    let aug = layout.augmented_csv();
    let aug = (cfg.augment.enabled && aug.exists()).then_some(aug);
    let samples =
        pipeline::load_cv_samples(&layout.features_csv(), &layout.labels_csv(), aug.as_deref())
            .unwrap();
    let patients = patient_labels(samples.iter().map(|s| (s.patient_id.as_str(), s.label)));
    let mut means = Vec::new();
    for perm in 0..10u64 {
        let mut labels: Vec<u8> = patients.iter().map(|(_, l)| *l).collect();
        labels.shuffle(&mut rng(500 + perm));
        let map: std::collections::HashMap<&str, u8> = patients
            .iter()
            .map(|(p, _)| p.as_str())
            .zip(labels)
            .collect();
        let shuffled: Vec<CvSample> = samples
            .iter()
            .map(|s| CvSample {
                label: map[s.patient_id.as_str()],
                ..s.clone()
            })
            .collect();
        let pl = patient_labels(shuffled.iter().map(|s| (s.patient_id.as_str(), s.label)));
        let folds = make_folds(&pl, cfg.cv.n_folds, cfg.seed + perm).unwrap();
        let report = run_cv(&shuffled, &folds, &cfg.knn, cfg.cv.aggregation).unwrap();
        means.push(report.mean_auroc().unwrap());
    }
    means.iter().sum::<f64>() / means.len() as f64
}

fn separability() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(&data, 40, 30.0, 1.0, 11);
    let manifest = data.join("manifest.csv");
    let mut ok = true;
    let mut parts = Vec::new();
    for preset in [Preset::CnnFixed, Preset::CnnCycle] {
        let cfg = mode_config(preset, &manifest, &dir.path().join(preset.to_string()));
        let (summary, report) = pipeline::run_all(&cfg).unwrap();
        let auc = report.mean_auroc().unwrap_or(f64::NAN);
        let null = shuffled_auroc(&cfg);
        ok &= auc >= 0.95 && (0.4..=0.6).contains(&null);
        parts.push(format!(
            "{preset}: {} chunks, AUROC {auc:.3}, shuffled {null:.3}",
            summary.segment.chunks
        ));
    }
    verdict(ok, parts.join("; "))
}

fn utilization() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut counts = Vec::new();
    for coverage in [1.0, 0.5] {
        let data = dir.path().join(format!("data{coverage}"));
        synth_dataset(&data, 10, 120.0, coverage, 13);
        let cfg = mode_config(
            Preset::CnnCycle,
            &data.join("manifest.csv"),
            &dir.path().join(format!("work{coverage}")),
        );
        pipeline::preprocess(&cfg).unwrap();
        counts.push(pipeline::segment(&cfg).unwrap().chunks);
    }
    let ratio = counts[1] as f64 / counts[0] as f64;
    verdict(
        (ratio - 0.5).abs() <= 0.1,
        format!(
            "cycle chunks {} at full coverage, {} at half, ratio {ratio:.3}",
            counts[0], counts[1]
        ),
    )
}

fn first_few(items: &[String]) -> String {
    if items.is_empty() {
        String::new()
    } else {
        format!(
            " (first: {})",
            items.iter().take(3).cloned().collect::<Vec<_>>().join("; ")
        )
    }
}

fn physionet() -> Verdict {
    let Ok(manifest) = std::env::var("PCG_PHYSIONET_MANIFEST") else {
        return Verdict::Skip("PCG_PHYSIONET_MANIFEST not set".into());
    };
    let mut cfg = PipelineConfig::preset(Preset::CnnCycle);
    cfg.paths.manifest = Some(manifest.into());
    cfg.paths.work_dir = tempfile::tempdir().unwrap().keep();
    let r = pipeline::ingest(&cfg).unwrap();
    let counts = (
        r.total,
        r.unknown_excluded,
        r.positive,
        r.negative,
        r.patients,
    );
    let ok = counts == (3163, 156, 616, 2391, 816)
        && r.labeled_cycles == 62636
        && (r.cycle_usable_fraction - 0.517).abs() <= 0.03;
    verdict(
        ok,
        format!(
            "recordings {} unknown {} positive {} negative {} patients {} cycles {} usable {:.1} %",
            r.total,
            r.unknown_excluded,
            r.positive,
            r.negative,
            r.patients,
            r.labeled_cycles,
            r.cycle_usable_fraction * 100.0
        ),
    )
}

fn main() {
    let checks: [(&str, u64, Check); 10] = [
        ("chunk-count oracles", 5, chunk_counts),
        ("chunk length exactness", 30, length_exactness),
        ("bandpass response", 1, filter_response),
        ("stretch pitch preservation", 5, stretch_pitch),
        ("metric oracle equivalence", 5, metric_oracles),
        ("k-NN exactness", 10, knn_exactness),
        ("CV integrity", 5, cv_integrity),
        ("synthetic end-to-end separability", 120, separability),
        ("annotation coverage utilization", 60, utilization),
        ("PhysioNet 2022 dataset statistics", 600, physionet),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let time = format!("{:.2} s of {budget} s", elapsed.as_secs_f64());
        match v {
            Verdict::Pass(d) if !over => println!("PASS {name}: {d} [{time}]"),
            Verdict::Pass(d) => {
                failed += 1;
                println!("FAIL {name}: over time budget; {d} [{time}]");
            }
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{time}]");
            }
            Verdict::Skip(d) => println!("SKIP {name}: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
