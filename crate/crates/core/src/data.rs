//! Loading trials from a corpus into model-ready tensors.

use eegspeech_tensor::{Scalar, Tensor};

use crate::corpus::io::{self, AlignedPhone};
use crate::corpus::{CorpusManifest, TrialExample, TrialKey};
use crate::eeg::normalize_rms;
use crate::error::{data, Result};
use crate::frontend::stft::{linear_spectrogram, Spectrogram, HOP};
use crate::frontend::{preprocess_eeg, resample_audio, EegRecording, Waveform, AUDIO_RATE_HZ};
use crate::speech::posterior_input;

/// One trial after the signal frontend.
#[derive(Clone, Debug)]
pub struct PreparedTrial {
    pub key: TrialKey,
    pub id: String,
    /// 256 Hz, filtered.
    pub eeg: EegRecording,
    /// 22.05 kHz.
    pub audio: Waveform,
    pub linear: Spectrogram,
    pub phonemes: Vec<usize>,
    pub alignment: Vec<AlignedPhone>,
}

pub fn prepare_trial(m: &CorpusManifest, t: &TrialExample) -> Result<PreparedTrial> {
    let raw = io::read_eeg(&m.path(&t.eeg), &t.subject)?;
    let eeg = preprocess_eeg(&raw)?;
    let audio = resample_audio(&io::read_wav(&m.path(&t.audio))?, AUDIO_RATE_HZ)?;
    let linear = linear_spectrogram(&audio)?;
    let symbols = io::read_phonemes(&m.path(&t.phonemes))?;
    let refs: Vec<&str> = symbols.iter().map(String::as_str).collect();
    let phonemes = m.inventory.encode(&refs)?;
    let alignment = io::read_alignment(&m.path(&t.alignment))?;
    Ok(PreparedTrial {
        key: t.key(),
        id: t.id.clone(),
        eeg,
        audio,
        linear,
        phonemes,
        alignment,
    })
}

pub fn prepare_all(m: &CorpusManifest, trials: &[&TrialExample]) -> Result<Vec<PreparedTrial>> {
    trials.iter().map(|t| prepare_trial(m, t)).collect()
}

/// Model-ready tensors for one trial.
#[derive(Clone, Debug)]
pub struct Example<T: Scalar> {
    pub key: TrialKey,
    pub id: String,
    /// `[1, N_ch, T]`, unit RMS over the recording.
    pub eeg: Tensor<T>,
    /// `[1, 513, T_spec]`, log-compressed magnitudes.
    pub linear: Tensor<T>,
    pub n_frames: usize,
    /// Waveform zero-padded to `hop * n_frames` samples.
    pub audio: Vec<f64>,
    pub n_audio: usize,
    pub phonemes: Vec<usize>,
}

impl<T: Scalar> Example<T> {
    pub fn from_prepared(p: &PreparedTrial) -> Result<Self> {
        if p.phonemes.is_empty() {
            return Err(data(format!("trial {} has no phonemes", p.id)));
        }
        let eeg = Tensor::from_f64(&[1, p.eeg.n_channels, p.eeg.n_samples()], &normalize_rms(&p.eeg.data));
        let n_frames = p.linear.n_frames;
        let mut audio = p.audio.samples.clone();
        audio.resize(n_frames * HOP, 0.0);
        Ok(Self {
            key: p.key.clone(),
            id: p.id.clone(),
            eeg,
            linear: posterior_input(&p.linear)?,
            n_frames,
            audio,
            n_audio: p.audio.samples.len(),
            phonemes: p.phonemes.clone(),
        })
    }
}
