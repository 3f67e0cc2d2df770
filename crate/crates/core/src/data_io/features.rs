//! Windowed statistical features for raw multichannel signals.
//!
//! A lightweight stand-in for a learned feature extractor. Each output row
//! describes one window and is laid out as
//! `[mean × C | variance × C | log band power band 1 × C | … | band 4 × C]`
//! for `C` channels. The four bands split `(0, Nyquist]` into equal quarters
//! of normalized frequency: `(0, 1/8)`, `[1/8, 1/4)`, `[1/4, 3/8)`, `[3/8, 1/2]`
//! cycles per sample.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const BAND_COUNT: usize = 4;
const LOG_FLOOR: f64 = 1e-12;

/// Band (0-based) of normalized frequency `f` in cycles/sample, `0 < f ≤ 0.5`.
pub fn band_of(f: f64) -> usize {
    ((f / 0.125).floor() as usize).min(BAND_COUNT - 1)
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Mean periodogram power per band of a demeaned, Hann-windowed segment.
fn band_powers(segment: &[f64], taper: &[f64]) -> [f64; BAND_COUNT] {
    let n = segment.len();
    let mean = segment.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = segment.iter().zip(taper).map(|(x, w)| (x - mean) * w).collect();
    let energy: f64 = taper.iter().map(|w| w * w).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut sums = [0.0; BAND_COUNT];
    let mut counts = [0usize; BAND_COUNT];
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, x) in windowed.iter().enumerate() {
            let phase = -2.0 * PI * (k * i) as f64 / n as f64;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        let b = band_of(k as f64 / n as f64);
        sums[b] += (re * re + im * im) / energy;
        counts[b] += 1;
    }
    let mut out = [0.0; BAND_COUNT];
    for b in 0..BAND_COUNT {
        out[b] = if counts[b] > 0 { sums[b] / counts[b] as f64 } else { 0.0 };
    }
    out
}

/// `raw` is channels × samples. Produces one row per window start
/// `0, hop, 2·hop, …` that fits entirely in the signal.
pub fn extract_stat_features(raw: &Matrix, window: usize, hop: usize) -> Result<Matrix> {
    let (channels, samples) = raw.shape();
    if window == 0 || hop == 0 {
        return Err(Error::InvalidInput("window and hop must be positive".into()));
    }
    if window > samples {
        return Err(Error::InvalidInput(format!(
            "window of {window} samples exceeds signal length {samples}"
        )));
    }
    let windows = (samples - window) / hop + 1;
    let taper = hann(window);
    let width = channels * (2 + BAND_COUNT);
    let mut out = Matrix::zeros(windows, width);
    for w in 0..windows {
        let start = w * hop;
        let row = out.row_mut(w);
        for c in 0..channels {
            let seg = &raw.row(c)[start..start + window];
            let mean = seg.iter().sum::<f64>() / window as f64;
            let var = seg.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / window as f64;
            row[c] = mean;
            row[channels + c] = var;
            let powers = band_powers(seg, &taper);
            for (b, p) in powers.iter().enumerate() {
                row[(2 + b) * channels + c] = (p + LOG_FLOOR).ln();
            }
        }
    }
    Ok(out)
}
