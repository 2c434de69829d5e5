//! Digital Butterworth bandpass design realized as second-order sections.
//!
//! The analog lowpass prototype of order `N` is shifted to a bandpass around
//! the pre-warped band edges (giving `2N` poles), mapped through the bilinear
//! transform and grouped into `N` biquads. Every biquad carries one zero at
//! DC and one at Nyquist and is scaled to unit gain at the digital center
//! frequency, so the cascade has exactly 0 dB there.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PcgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    /// Prototype order; the bandpass has twice as many poles.
    pub order: usize,
    pub sample_rate: u32,
}

impl BandpassSpec {
    /// 25–500 Hz, order 5.
    pub fn with_defaults(sample_rate: u32) -> Self {
        BandpassSpec {
            low_cut: 25.0,
            high_cut: 500.0,
            order: 5,
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.order == 0 {
            return Err(PcgError::InvalidConfig(
                "filter order must be positive".into(),
            ));
        }
        if self.sample_rate == 0 {
            return Err(PcgError::InvalidConfig(
                "sample_rate must be positive".into(),
            ));
        }
        if self.high_cut >= nyquist {
            return Err(PcgError::InvalidConfig(format!(
                "high_cut {} Hz must be below Nyquist ({} Hz)",
                self.high_cut, nyquist
            )));
        }
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut) {
            return Err(PcgError::InvalidConfig(format!(
                "need 0 < low_cut < high_cut, got {} and {}",
                self.low_cut, self.high_cut
            )));
        }
        Ok(())
    }
}

/// One biquad `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }
}

/// A cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub sections: Vec<Section>,
    pub sample_rate: u32,
}

impl FilterCoefficients {
    /// Complex frequency response of the cascade at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = 2.0 * PI * freq / self.sample_rate as f64;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq: f64) -> f64 {
        20.0 * self.response(freq).norm().log10()
    }

    pub fn is_stable(&self) -> bool {
        self.sections
            .iter()
            .all(|s| s.poles().iter().all(|p| p.norm() < 1.0))
    }
}

pub fn design_bandpass(spec: &BandpassSpec) -> Result<FilterCoefficients> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let fs2 = 2.0 * fs;
    let n = spec.order;

    let w_lo = fs2 * (PI * spec.low_cut / fs).tan();
    let w_hi = fs2 * (PI * spec.high_cut / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let sections = pair_poles(&poles);
    let f0 = fs / PI * (w0_sq.sqrt() / fs2).atan();
    let z0_inv = Complex64::from_polar(1.0, -2.0 * PI * f0 / fs);
    let mut sections: Vec<Section> = sections
        .into_iter()
        .map(|a| {
            let unscaled = Section {
                b: [1.0, 0.0, -1.0],
                a,
            };
            let g = unscaled.response(z0_inv).norm();
            Section {
                b: [1.0 / g, 0.0, -1.0 / g],
                a,
            }
        })
        .collect();
    // Least resonant sections first.
    sections.sort_by(|x, y| x.a[1].total_cmp(&y.a[1]));

    Ok(FilterCoefficients {
        sections,
        sample_rate: spec.sample_rate,
    })
}

/// Groups conjugate pairs and leftover real poles into `(a1, a2)` pairs.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 2]> {
    const IM_EPS: f64 = 1e-12;
    let mut out = Vec::new();
    let mut real: Vec<f64> = Vec::new();
    for p in poles {
        if p.im.abs() <= IM_EPS {
            real.push(p.re);
        } else if p.im > 0.0 {
            out.push([-2.0 * p.re, p.norm_sqr()]);
        }
    }
    real.sort_by(f64::total_cmp);
    for pair in real.chunks(2) {
        match pair {
            [r1, r2] => out.push([-(r1 + r2), r1 * r2]),
            [r] => out.push([-r, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}
