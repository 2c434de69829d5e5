//! Band-limited resampling with a Kaiser-windowed sinc kernel.
//!
//! Output sample `j` is evaluated at input position `j * step`, where `step`
//! is the input-to-output sample-period ratio. The kernel's cutoff follows
//! the lower of the two Nyquist rates so downsampling is alias-free.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::Waveform;

/// Zero crossings of the sinc on each side of the center (at unit cutoff).
const ZERO_CROSSINGS: usize = 24;
/// Kernel table resolution per zero crossing.
const OVERSAMPLE: usize = 512;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower Nyquist rate.
const ROLLOFF: f64 = 0.95;

/// Resamples to `target_sr`. Output length is
/// `round(len * target_sr / sample_rate)`; equal rates return a copy.
pub fn resample(w: &Waveform, target_sr: u32) -> Waveform {
    assert!(target_sr > 0, "target sample rate must be positive");
    if target_sr == w.sample_rate {
        return w.clone();
    }
    let n_out = (w.len() as f64 * target_sr as f64 / w.sample_rate as f64).round() as usize;
    let step = w.sample_rate as f64 / target_sr as f64;
    Waveform {
        samples: sinc_resample(&w.samples, step, n_out),
        sample_rate: target_sr,
    }
}

/// Resamples `x` so the result has exactly `n_out` samples spanning the same
/// time interval.
pub fn resample_to_len(x: &[f64], n_out: usize) -> Vec<f64> {
    if n_out == x.len() {
        return x.to_vec();
    }
    if x.is_empty() || n_out == 0 {
        return vec![0.0; n_out];
    }
    sinc_resample(x, x.len() as f64 / n_out as f64, n_out)
}

fn sinc_resample(x: &[f64], step: f64, n_out: usize) -> Vec<f64> {
    let cutoff = ROLLOFF * (1.0 / step).min(1.0);
    let kernel = KernelTable::shared();
    // Half-width of the kernel in input samples.
    let half = ZERO_CROSSINGS as f64 / cutoff;
    let n = x.len() as isize;

    (0..n_out)
        .map(|j| {
            let t = j as f64 * step;
            let lo = ((t - half).ceil() as isize).max(0);
            let hi = ((t + half).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                let tau = (t - k as f64) * cutoff;
                acc += x[k as usize] * kernel.eval(tau.abs());
            }
            acc * cutoff
        })
        .collect()
}

/// `sinc(tau) * kaiser(tau / ZERO_CROSSINGS)` sampled on a fine grid for
/// `tau` in `[0, ZERO_CROSSINGS]`.
struct KernelTable {
    values: Vec<f64>,
}

impl KernelTable {
    fn shared() -> &'static KernelTable {
        static TABLE: OnceLock<KernelTable> = OnceLock::new();
        TABLE.get_or_init(KernelTable::new)
    }

    fn new() -> Self {
        let len = ZERO_CROSSINGS * OVERSAMPLE + 2;
        let norm = bessel_i0(KAISER_BETA);
        let values = (0..len)
            .map(|i| {
                let tau = i as f64 / OVERSAMPLE as f64;
                let r = tau / ZERO_CROSSINGS as f64;
                if r > 1.0 {
                    return 0.0;
                }
                let win = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                sinc(tau) * win
            })
            .collect();
        KernelTable { values }
    }

    #[inline]
    fn eval(&self, tau: f64) -> f64 {
        let pos = tau * OVERSAMPLE as f64;
        let i = pos as usize;
        if i + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
