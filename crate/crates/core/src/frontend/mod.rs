//! EEG and audio preprocessing, and the spectral features every model consumes.

pub mod filter;
pub mod resample;
pub mod stft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use filter::{Biquad, Sos};
pub use resample::{resample, resampled_len};
pub use stft::{
    linear_spectrogram, log_mel, mel_spectrogram, MelFilterbank, SpecKind, Spectrogram, HOP,
    N_FFT, N_LINEAR_BINS, N_MELS,
};

pub const EEG_RATE_HZ: u32 = 256;
pub const AUDIO_RATE_HZ: u32 = 22050;
pub const MIN_RAW_EEG_RATE_HZ: u32 = 512;

pub const NOTCH_HZ: f64 = 60.0;
pub const NOTCH_Q: f64 = 30.0;
pub const BAND_LOW_HZ: f64 = 0.5;
pub const BAND_HIGH_HZ: f64 = 50.0;
pub const BAND_ORDER: usize = 4;

/// Mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, rate_hz: u32) -> Self {
        Self { samples, rate_hz }
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Multichannel EEG, channel-major `[n_channels x n_samples]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EegRecording {
    pub n_channels: usize,
    pub rate_hz: u32,
    pub subject: String,
    pub data: Vec<f64>,
}

impl EegRecording {
    pub fn new(n_channels: usize, rate_hz: u32, subject: impl Into<String>, data: Vec<f64>) -> Self {
        assert!(n_channels >= 1, "EEG needs at least one channel");
        assert_eq!(data.len() % n_channels, 0, "EEG data is not channel-aligned");
        Self {
            n_channels,
            rate_hz,
            subject: subject.into(),
            data,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / self.n_channels
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.n_samples();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn duration_sec(&self) -> f64 {
        self.n_samples() as f64 / self.rate_hz as f64
    }

    pub fn map_channels(&self, rate_hz: u32, f: impl Fn(&[f64]) -> Vec<f64>) -> EegRecording {
        let mut data = Vec::new();
        for c in 0..self.n_channels {
            data.extend(f(self.channel(c)));
        }
        EegRecording::new(self.n_channels, rate_hz, self.subject.clone(), data)
    }
}

/// Stage slot for ocular-artifact removal. The default does nothing: removal
/// by independent components needs human-labelled components.
pub trait ArtifactRemoval {
    fn apply(&self, eeg: EegRecording) -> EegRecording;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoArtifactRemoval;

impl ArtifactRemoval for NoArtifactRemoval {
    fn apply(&self, eeg: EegRecording) -> EegRecording {
        eeg
    }
}

/// Single-pass Butterworth corner that puts the forward-backward response at
/// -3 dB on `edge_hz`.
fn zero_phase_corner(edge_hz: f64, fs: f64, order: usize, highpass: bool) -> f64 {
    // single-pass power gain of 10^(-0.15) gives -3 dB after squaring
    let ratio = (10f64.powf(0.15) - 1.0).powf(1.0 / (2 * order) as f64);
    let warped = (std::f64::consts::PI * edge_hz / fs).tan();
    let corner = if highpass { warped * ratio } else { warped / ratio };
    corner.atan() * fs / std::f64::consts::PI
}

/// Filter cascade applied at `fs`: 60 Hz notch, then the 0.5-50 Hz band.
pub fn eeg_filters(fs: f64) -> (Sos, Sos) {
    let notch = Sos::notch(NOTCH_HZ, NOTCH_Q, fs);
    let hp = zero_phase_corner(BAND_LOW_HZ, fs, BAND_ORDER, true);
    let lp = zero_phase_corner(BAND_HIGH_HZ, fs, BAND_ORDER, false);
    let band = Sos::butter_highpass(BAND_ORDER, hp, fs).then(Sos::butter_lowpass(BAND_ORDER, lp, fs));
    (notch, band)
}

/// Notch at 60 Hz, 0.5-50 Hz band-pass (both zero-phase), artifact stage,
/// then resampling to 256 Hz.
pub fn preprocess_eeg(raw: &EegRecording) -> Result<EegRecording> {
    preprocess_eeg_with(raw, &NoArtifactRemoval)
}

pub fn preprocess_eeg_with(raw: &EegRecording, artifacts: &dyn ArtifactRemoval) -> Result<EegRecording> {
    if raw.rate_hz < MIN_RAW_EEG_RATE_HZ {
        return Err(Error::Unsupported(format!(
            "EEG sampled at {} Hz; at least {MIN_RAW_EEG_RATE_HZ} Hz is required",
            raw.rate_hz
        )));
    }
    if raw.n_samples() < raw.rate_hz as usize {
        return Err(Error::Unsupported(format!(
            "EEG lasts {:.3} s; at least 1 s is required",
            raw.duration_sec()
        )));
    }
    if let Some(i) = raw.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite EEG sample in channel {}",
            i / raw.n_samples()
        )));
    }
    let fs = raw.rate_hz as f64;
    let (notch, band) = eeg_filters(fs);
    let max_pad = 3 * raw.rate_hz as usize;
    let filtered = raw.map_channels(raw.rate_hz, |x| {
        let y = notch.filtfilt(x, max_pad);
        band.filtfilt(&y, max_pad)
    });
    let cleaned = artifacts.apply(filtered);
    Ok(cleaned.map_channels(EEG_RATE_HZ, |x| resample(x, raw.rate_hz, EEG_RATE_HZ)))
}

/// Band-limited resampling to `target_hz`; downsampling only.
pub fn resample_audio(w: &Waveform, target_hz: u32) -> Result<Waveform> {
    if w.rate_hz < target_hz {
        return Err(Error::Unsupported(format!(
            "upsampling {} Hz to {target_hz} Hz is not supported",
            w.rate_hz
        )));
    }
    Ok(Waveform::new(
        resample(&w.samples, w.rate_hz, target_hz),
        target_hz,
    ))
}
