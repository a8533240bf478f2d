//! Short-time spectral features: Hann-window STFT magnitudes and log-mel bands.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{contract, data, Result};
use crate::frontend::Waveform;

pub const N_FFT: usize = 1024;
pub const WIN_LENGTH: usize = 1024;
pub const HOP: usize = 256;
pub const N_MELS: usize = 80;
pub const N_LINEAR_BINS: usize = N_FFT / 2 + 1;
/// Floor applied before the natural log of mel magnitudes.
pub const MEL_FLOOR: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Linear,
    Mel,
}

/// Frames stored row-major as `[n_bins x n_frames]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub kind: SpecKind,
    pub n_bins: usize,
    pub n_frames: usize,
    pub hop: usize,
    pub win: usize,
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.n_frames + frame]
    }

    pub fn frame(&self, t: usize) -> Vec<f64> {
        (0..self.n_bins).map(|b| self.at(b, t)).collect()
    }

    /// Keeps frames `[start, end)`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Spectrogram {
        assert!(start <= end && end <= self.n_frames);
        let mut data = Vec::with_capacity(self.n_bins * (end - start));
        for b in 0..self.n_bins {
            data.extend_from_slice(&self.data[b * self.n_frames + start..b * self.n_frames + end]);
        }
        Spectrogram {
            n_frames: end - start,
            data,
            ..self.clone()
        }
    }

    /// Concatenates frames of spectrograms with equal bins.
    pub fn concat_frames(parts: &[Spectrogram]) -> Option<Spectrogram> {
        let first = parts.first()?;
        let n_frames = parts.iter().map(|p| p.n_frames).sum();
        let mut data = Vec::with_capacity(first.n_bins * n_frames);
        for b in 0..first.n_bins {
            for p in parts {
                data.extend_from_slice(&p.data[b * p.n_frames..(b + 1) * p.n_frames]);
            }
        }
        Some(Spectrogram {
            n_frames,
            data,
            ..first.clone()
        })
    }
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror index into `[0, len)` without repeating the edge sample.
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Frame count for centre-padded framing.
pub fn n_frames(len: usize, hop: usize) -> usize {
    len / hop + 1
}

/// Magnitude STFT with reflect centre padding, Hann window, FFT size 1024,
/// hop 256.
pub fn linear_spectrogram(w: &Waveform) -> Result<Spectrogram> {
    let x = &w.samples;
    if x.is_empty() {
        return Err(data("cannot take the spectrogram of an empty waveform"));
    }
    let frames = n_frames(x.len(), HOP);
    let window = hann_window(WIN_LENGTH);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(N_FFT);
    let mut out = vec![0.0; N_LINEAR_BINS * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    let half = (N_FFT / 2) as isize;
    for t in 0..frames {
        let start = (t * HOP) as isize - half;
        for (k, b) in buf.iter_mut().enumerate() {
            let v = x[reflect_index(start + k as isize, x.len())];
            *b = Complex::new(v * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (bin, c) in buf.iter().take(N_LINEAR_BINS).enumerate() {
            out[bin * frames + t] = c.norm();
        }
    }
    Ok(Spectrogram {
        kind: SpecKind::Linear,
        n_bins: N_LINEAR_BINS,
        n_frames: frames,
        hop: HOP,
        win: WIN_LENGTH,
        data: out,
    })
}

pub fn hz_to_mel(f: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if f >= MIN_LOG_HZ {
        min_log_mel + (f / MIN_LOG_HZ).ln() / logstep
    } else {
        f / F_SP
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if m >= min_log_mel {
        MIN_LOG_HZ * (logstep * (m - min_log_mel)).exp()
    } else {
        m * F_SP
    }
}

/// Slaney-style area-normalised triangular mel filterbank, `[n_mels x n_bins]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(sample_rate: f64, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let enorm = 2.0 / (hi - lo);
            for k in 0..n_bins {
                let f = k as f64 * sample_rate / n_fft as f64;
                let rise = (f - lo) / (mid - lo);
                let fall = (hi - f) / (hi - mid);
                weights[m * n_bins + k] = rise.min(fall).max(0.0) * enorm;
            }
        }
        Self {
            n_mels,
            n_bins,
            weights,
        }
    }

    /// The filterbank used throughout: 80 bands, 0 Hz to Nyquist at 22.05 kHz.
    pub fn standard() -> Self {
        Self::new(22050.0, N_FFT, N_MELS, 0.0, 11025.0)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }
}

/// Natural-log mel magnitudes, floored at [`MEL_FLOOR`].
pub fn mel_spectrogram(s: &Spectrogram) -> Result<Spectrogram> {
    mel_spectrogram_with(s, &MelFilterbank::standard())
}

pub fn mel_spectrogram_with(s: &Spectrogram, fb: &MelFilterbank) -> Result<Spectrogram> {
    if s.kind != SpecKind::Linear {
        return Err(contract("mel_spectrogram expects a linear spectrogram"));
    }
    if s.n_bins != fb.n_bins {
        return Err(contract(format!(
            "filterbank has {} bins, spectrogram {}",
            fb.n_bins, s.n_bins
        )));
    }
    let t = s.n_frames;
    let mut out = vec![0.0; fb.n_mels * t];
    for m in 0..fb.n_mels {
        let row = fb.row(m);
        let dst = &mut out[m * t..(m + 1) * t];
        for (k, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let src = &s.data[k * t..(k + 1) * t];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += w * v;
            }
        }
        for d in dst.iter_mut() {
            *d = d.max(MEL_FLOOR).ln();
        }
    }
    Ok(Spectrogram {
        kind: SpecKind::Mel,
        n_bins: fb.n_mels,
        n_frames: t,
        hop: s.hop,
        win: s.win,
        data: out,
    })
}

/// Log-mel spectrogram straight from a waveform.
pub fn log_mel(w: &Waveform) -> Result<Spectrogram> {
    mel_spectrogram(&linear_spectrogram(w)?)
}
