//! Spectral distance, correlation, ranking and interval statistics.

use std::f64::consts::{LN_10, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::frontend::stft::{SpecKind, Spectrogram};

/// Scale from cepstral distance to decibels.
pub const MCD_SCALE: f64 = 10.0 * SQRT_2 / LN_10;

/// Sum with a fixed pairwise tree, so the result does not depend on how the
/// inputs were produced.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    match x.len() {
        0 => 0.0,
        1 => x[0],
        n => pairwise_sum(&x[..n / 2]) + pairwise_sum(&x[n / 2..]),
    }
}

pub fn mean(x: &[f64]) -> f64 {
    pairwise_sum(x) / x.len() as f64
}

/// Orthonormal DCT-II coefficients `1..=n_mcc` of one log-mel frame.
pub fn mel_cepstrum(frame: &[f64], n_mcc: usize) -> Vec<f64> {
    let n = frame.len() as f64;
    let norm = (2.0 / n).sqrt();
    (1..=n_mcc)
        .map(|k| {
            let terms: Vec<f64> = frame
                .iter()
                .enumerate()
                .map(|(i, &x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .collect();
            norm * pairwise_sum(&terms)
        })
        .collect()
}

fn check_pair(a: &Spectrogram, b: &Spectrogram) -> Result<()> {
    if a.kind != SpecKind::Mel || b.kind != SpecKind::Mel {
        return Err(contract("metrics expect mel spectrograms"));
    }
    if a.n_bins != b.n_bins || a.n_frames != b.n_frames {
        return Err(contract(format!(
            "spectrogram shapes differ: {}x{} vs {}x{}",
            a.n_bins, a.n_frames, b.n_bins, b.n_frames
        )));
    }
    if a.n_frames == 0 {
        return Err(contract("spectrograms have no frames"));
    }
    Ok(())
}

/// Per-frame mel-cepstral distortion in dB.
pub fn mcd_frames(reference: &Spectrogram, hypothesis: &Spectrogram, n_mcc: usize) -> Result<Vec<f64>> {
    check_pair(reference, hypothesis)?;
    if n_mcc == 0 || n_mcc >= reference.n_bins {
        return Err(contract(format!("n_mcc = {n_mcc} outside 1..{}", reference.n_bins)));
    }
    Ok((0..reference.n_frames)
        .map(|t| {
            let a = mel_cepstrum(&reference.frame(t), n_mcc);
            let b = mel_cepstrum(&hypothesis.frame(t), n_mcc);
            let sq: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).collect();
            MCD_SCALE * pairwise_sum(&sq).sqrt()
        })
        .collect())
}

/// Mean mel-cepstral distortion over frames, in dB.
pub fn mcd(reference: &Spectrogram, hypothesis: &Spectrogram, n_mcc: usize) -> Result<f64> {
    Ok(mean(&mcd_frames(reference, hypothesis, n_mcc)?))
}

/// Pearson correlation of two equally long sequences, times 100.
pub fn pearson100(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(contract("correlation needs two non-empty sequences of equal length"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let cov: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let va: Vec<f64> = a.iter().map(|x| (x - ma) * (x - ma)).collect();
    let vb: Vec<f64> = b.iter().map(|y| (y - mb) * (y - mb)).collect();
    let (va, vb) = (pairwise_sum(&va), pairwise_sum(&vb));
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation("an input has zero variance".into()));
    }
    Ok((100.0 * pairwise_sum(&cov) / (va.sqrt() * vb.sqrt())).clamp(-100.0, 100.0))
}

/// Pearson correlation over all (band, frame) elements, times 100.
pub fn mel_corr(reference: &Spectrogram, hypothesis: &Spectrogram) -> Result<f64> {
    check_pair(reference, hypothesis)?;
    pearson100(&reference.data, &hypothesis.data)
}

/// Zero-based rank of `target` under the ordering of [`crate::phoneme::topk`]:
/// larger scores first, ties to the lower index.
pub fn rank_of(dist: &[f64], target: usize) -> Result<usize> {
    let s = *dist
        .get(target)
        .ok_or_else(|| contract(format!("target {target} outside a {}-way distribution", dist.len())))?;
    Ok(dist
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < target))
        .count())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

/// Mean with a normal-approximation half-width `z * s / sqrt(n)`.
pub fn confidence_interval(samples: &[f64], z: f64) -> Result<Interval> {
    let n = samples.len();
    if n < 2 {
        return Err(contract(format!("confidence interval needs at least 2 samples, got {n}")));
    }
    let m = mean(samples);
    let sq: Vec<f64> = samples.iter().map(|x| (x - m) * (x - m)).collect();
    let s = (pairwise_sum(&sq) / (n - 1) as f64).sqrt();
    Ok(Interval {
        mean: m,
        half_width: z * s / (n as f64).sqrt(),
        n,
    })
}

/// Top-k accuracy in percent from zero-based target ranks.
pub fn topk_accuracy(ranks: &[usize], k: usize, z: f64) -> Result<Interval> {
    if ranks.is_empty() {
        return Err(contract("top-k accuracy over an empty set"));
    }
    if k == 0 {
        return Err(contract("k must be at least 1"));
    }
    let hits: Vec<f64> = ranks.iter().map(|&r| if r < k { 100.0 } else { 0.0 }).collect();
    if hits.len() == 1 {
        return Ok(Interval {
            mean: hits[0],
            half_width: 0.0,
            n: 1,
        });
    }
    confidence_interval(&hits, z)
}
