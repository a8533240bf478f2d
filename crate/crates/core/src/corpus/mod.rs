//! Synthetic paired EEG / speech / phoneme corpus and its held-out split.

pub mod inventory;
pub mod io;
pub mod split;
pub mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, data, Error, Result};
use crate::frontend::{EegRecording, Waveform};
use crate::rng;
pub use inventory::{Attributes, GroupAxis, PhonemeClass, PhonemeInventory};
pub use io::AlignedPhone;
pub use split::{split_grid, SplitAssignment, SplitName, TrialKey};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "corpus.json";
pub const INVENTORY_FILE: &str = "inventory.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_subjects: usize,
    pub n_sentences: usize,
    pub min_phonemes: usize,
    pub max_phonemes: usize,
    pub n_channels: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub eeg_rate_hz: u32,
    pub audio_rate_hz: u32,
    /// Sentences shorter than this are extended with further phonemes.
    pub min_duration_sec: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inventory: Option<PhonemeInventory>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_subjects: 4,
            n_sentences: 48,
            min_phonemes: 8,
            max_phonemes: 14,
            n_channels: 16,
            noise_level: 0.02,
            seed: 0,
            eeg_rate_hz: 512,
            audio_rate_hz: 22050,
            min_duration_sec: 1.0,
            inventory: None,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.n_sentences == 0 {
            return Err(config("subject and sentence counts must be positive"));
        }
        if self.n_channels < 1 {
            return Err(config("EEG channel count must be at least 1"));
        }
        if self.min_phonemes == 0 || self.min_phonemes > self.max_phonemes {
            return Err(config(format!(
                "invalid sentence length range {}..={}",
                self.min_phonemes, self.max_phonemes
            )));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(config("noise_level must be finite and non-negative"));
        }
        if self.eeg_rate_hz < crate::frontend::MIN_RAW_EEG_RATE_HZ {
            return Err(config("eeg_rate_hz must be at least 512"));
        }
        if self.audio_rate_hz < crate::frontend::AUDIO_RATE_HZ {
            return Err(config("audio_rate_hz must be at least 22050"));
        }
        if !(self.min_duration_sec.is_finite() && self.min_duration_sec >= 0.0) {
            return Err(config("min_duration_sec must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn inventory(&self) -> PhonemeInventory {
        self.inventory.clone().unwrap_or_else(PhonemeInventory::english)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialExample {
    pub id: String,
    pub subject: String,
    pub sentence: String,
    pub eeg: String,
    pub audio: String,
    pub phonemes: String,
    pub alignment: String,
}

impl TrialExample {
    pub fn key(&self) -> TrialKey {
        TrialKey::new(self.subject.clone(), self.sentence.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub phonemes: Vec<usize>,
}

/// The trial list plus the context needed to resolve it.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub config: CorpusConfig,
    pub inventory: PhonemeInventory,
    pub subjects: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub trials: Vec<TrialExample>,
}

pub fn subject_id(i: usize) -> String {
    format!("sub{:02}", i + 1)
}

pub fn sentence_id(i: usize) -> String {
    format!("s{:03}", i + 1)
}

fn sample_sentence(cfg: &CorpusConfig, n: usize, index: usize) -> Vec<usize> {
    let mut r = rng::stream(cfg.seed, rng::tag::SENTENCE, index as u64);
    let len = r.gen_range(cfg.min_phonemes..=cfg.max_phonemes);
    let mut ids: Vec<usize> = (0..len).map(|_| r.gen_range(1..=n)).collect();
    let dur = |ids: &[usize]| -> f64 { ids.iter().map(|&i| synth::tone_spec(i, n).duration_sec).sum() };
    while dur(&ids) < cfg.min_duration_sec {
        ids.push(r.gen_range(1..=n));
    }
    ids
}

/// The manifest implied by `cfg`, without touching the filesystem.
pub fn build_manifest(cfg: &CorpusConfig) -> Result<CorpusManifest> {
    cfg.validate()?;
    let inventory = cfg.inventory();
    let n = inventory.len();
    let subjects: Vec<String> = (0..cfg.n_subjects).map(subject_id).collect();
    let sentences: Vec<Sentence> = (0..cfg.n_sentences)
        .map(|i| Sentence {
            id: sentence_id(i),
            phonemes: sample_sentence(cfg, n, i),
        })
        .collect();
    let mut trials = Vec::with_capacity(subjects.len() * sentences.len());
    for subj in &subjects {
        for sent in &sentences {
            let id = format!("{subj}_{}", sent.id);
            trials.push(TrialExample {
                eeg: format!("eeg/{id}.f32"),
                audio: format!("sentences/{}.wav", sent.id),
                phonemes: format!("sentences/{}.phn", sent.id),
                alignment: format!("sentences/{}.tsv", sent.id),
                id,
                subject: subj.clone(),
                sentence: sent.id.clone(),
            });
        }
    }
    Ok(CorpusManifest {
        root: PathBuf::new(),
        config: cfg.clone(),
        inventory,
        subjects,
        sentences,
        trials,
    })
}

/// Audio and alignment of one sentence at the configured audio rate.
pub fn synthesize_sentence(
    cfg: &CorpusConfig,
    inv: &PhonemeInventory,
    ids: &[usize],
) -> (Waveform, Vec<synth::Segment>) {
    let (samples, segs) = synth::synthesize_speech(ids, inv.len(), cfg.audio_rate_hz);
    (Waveform::new(samples, cfg.audio_rate_hz), segs)
}

pub fn eeg_samples_for(cfg: &CorpusConfig, audio_samples: usize) -> usize {
    ((audio_samples as f64) * cfg.eeg_rate_hz as f64 / cfg.audio_rate_hz as f64).round() as usize
}

/// Per-subject mixing matrix `[n_channels x n_phonemes]`.
pub fn subject_mixing(cfg: &CorpusConfig, n: usize, subject_index: usize) -> Vec<f64> {
    let mut r = rng::stream(cfg.seed, rng::tag::MIXING, subject_index as u64);
    synth::orthonormal_mixing(&mut r, cfg.n_channels, n)
}

/// Raw EEG for one trial.
pub fn synthesize_trial_eeg(
    cfg: &CorpusConfig,
    n: usize,
    indicator: &[f64],
    mixing: &[f64],
    subject_index: usize,
    sentence_index: usize,
) -> EegRecording {
    let trial = (subject_index * cfg.n_sentences + sentence_index) as u64;
    let mut r = rng::stream(cfg.seed, rng::tag::NOISE, trial);
    let data = synth::mix_eeg(mixing, cfg.n_channels, indicator, n, cfg.noise_level, &mut r);
    EegRecording::new(cfg.n_channels, cfg.eeg_rate_hz, subject_id(subject_index), data)
}

pub fn alignment_rows(inv: &PhonemeInventory, segs: &[synth::Segment], rate: u32) -> Vec<AlignedPhone> {
    segs.iter()
        .map(|s| AlignedPhone {
            symbol: inv.symbol(s.id).unwrap_or("?").to_string(),
            start_sec: s.start as f64 / rate as f64,
            end_sec: s.end as f64 / rate as f64,
        })
        .collect()
}

/// Writes the whole corpus under `out`, returning its manifest.
pub fn generate_corpus(cfg: &CorpusConfig, out: &Path) -> Result<CorpusManifest> {
    let mut manifest = build_manifest(cfg)?;
    manifest.root = out.to_path_buf();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let inv = &manifest.inventory;
    let n = inv.len();
    let mixings: Vec<Vec<f64>> = (0..cfg.n_subjects).map(|s| subject_mixing(cfg, n, s)).collect();
    for (zi, sent) in manifest.sentences.iter().enumerate() {
        let (wave, segs) = synthesize_sentence(cfg, inv, &sent.phonemes);
        io::write_wav(&out.join(format!("sentences/{}.wav", sent.id)), &wave)?;
        io::write_phonemes(&out.join(format!("sentences/{}.phn", sent.id)), &inv.decode(&sent.phonemes))?;
        io::write_alignment(
            &out.join(format!("sentences/{}.tsv", sent.id)),
            &alignment_rows(inv, &segs, cfg.audio_rate_hz),
        )?;
        let n_eeg = eeg_samples_for(cfg, wave.samples.len());
        let indicator = synth::phoneme_indicator(&segs, n, cfg.audio_rate_hz, cfg.eeg_rate_hz, n_eeg);
        for (si, mixing) in mixings.iter().enumerate() {
            let eeg = synthesize_trial_eeg(cfg, n, &indicator, mixing, si, zi);
            let id = format!("{}_{}", subject_id(si), sent.id);
            io::write_eeg(&out.join(format!("eeg/{id}.f32")), &eeg)?;
        }
    }
    io::write_json(&out.join(INVENTORY_FILE), inv)?;
    let mut snapshot = cfg.clone();
    snapshot.inventory = None;
    io::write_json(&out.join(CONFIG_FILE), &snapshot)?;
    write_manifest(&out.join(MANIFEST_FILE), &manifest.trials)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, trials: &[TrialExample]) -> Result<()> {
    let mut buf = Vec::new();
    for t in trials {
        serde_json::to_writer(&mut buf, t)?;
        buf.write_all(b"\n").expect("write to Vec");
    }
    io::write_bytes(path, &buf)
}

pub fn read_manifest(path: &Path) -> Result<Vec<TrialExample>> {
    let text = io::read_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

impl CorpusManifest {
    /// Opens a corpus from its directory or its `manifest.jsonl`.
    pub fn open(path: &Path) -> Result<Self> {
        let (root, manifest) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (root, path.to_path_buf())
        };
        let trials = read_manifest(&manifest)?;
        let config: CorpusConfig = io::read_json(&root.join(CONFIG_FILE))?;
        let inventory: PhonemeInventory = io::read_json::<PhonemeInventory>(&root.join(INVENTORY_FILE))?.validated()?;
        let mut subjects: Vec<String> = trials.iter().map(|t| t.subject.clone()).collect();
        subjects.sort();
        subjects.dedup();
        let mut by_sentence: BTreeMap<String, String> = BTreeMap::new();
        for t in &trials {
            by_sentence.entry(t.sentence.clone()).or_insert_with(|| t.phonemes.clone());
        }
        let mut sentences = Vec::with_capacity(by_sentence.len());
        for (id, phn) in by_sentence {
            let symbols = io::read_phonemes(&root.join(&phn))?;
            let refs: Vec<&str> = symbols.iter().map(String::as_str).collect();
            sentences.push(Sentence {
                id,
                phonemes: inventory.encode(&refs)?,
            });
        }
        Ok(Self {
            root,
            config,
            inventory,
            subjects,
            sentences,
            trials,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn sentence_ids(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.id.clone()).collect()
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn trial(&self, key: &TrialKey) -> Option<&TrialExample> {
        self.trials
            .iter()
            .find(|t| t.subject == key.subject && t.sentence == key.sentence)
    }

    pub fn split(&self, n_subjects: usize, n_sentences: usize, seed: u64) -> Result<SplitAssignment> {
        split_grid(&self.subjects, &self.sentence_ids(), n_subjects, n_sentences, seed)
    }

    /// Trials of `keys` in manifest order.
    pub fn select(&self, keys: &std::collections::BTreeSet<TrialKey>) -> Vec<&TrialExample> {
        self.trials.iter().filter(|t| keys.contains(&t.key())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CorpusConfig {
        CorpusConfig {
            n_subjects: 2,
            n_sentences: 3,
            n_channels: 4,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn paper_scale_manifest_has_full_grid() {
        let cfg = CorpusConfig {
            n_subjects: 24,
            n_sentences: 440,
            n_channels: 128,
            ..Default::default()
        };
        let m = build_manifest(&cfg).unwrap();
        assert_eq!(m.trials.len(), 10_560);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            CorpusConfig { n_subjects: 0, ..tiny() },
            CorpusConfig { n_sentences: 0, ..tiny() },
            CorpusConfig { n_channels: 0, ..tiny() },
            CorpusConfig { min_phonemes: 5, max_phonemes: 4, ..tiny() },
            CorpusConfig { noise_level: -1.0, ..tiny() },
        ] {
            assert!(matches!(build_manifest(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn sentences_last_at_least_a_second() {
        let m = build_manifest(&CorpusConfig { n_sentences: 40, ..tiny() }).unwrap();
        for s in &m.sentences {
            let d: f64 = s.phonemes.iter().map(|&i| synth::tone_spec(i, 40).duration_sec).sum();
            assert!(d >= 1.0);
            assert!(s.phonemes.len() >= 8);
        }
    }

    #[test]
    fn generate_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_corpus(&tiny(), dir.path()).unwrap();
        let back = CorpusManifest::open(dir.path()).unwrap();
        assert_eq!(back.trials, m.trials);
        assert_eq!(back.sentences, m.sentences);
        assert_eq!(back.inventory, m.inventory);
        assert_eq!(back.config, tiny());
        let via_file = CorpusManifest::open(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(via_file.trials.len(), 6);
    }

    #[test]
    fn unwritable_output_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        fs::write(&file, b"x").unwrap();
        let err = generate_corpus(&tiny(), &file.join("sub")).unwrap_err();
        assert!(err.is_io(), "{err}");
    }
}
