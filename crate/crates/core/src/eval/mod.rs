//! Decoding held-out trials and scoring them: MCD, Mel-Corr, next-phoneme
//! top-k accuracy and the per-group breakdown.

pub mod groups;
pub mod metrics;

use std::fmt::Write as _;
use std::path::Path;

use eegspeech_tensor::{Graph, ParamStore, Scalar};
use serde::{Deserialize, Serialize};

use crate::corpus::io::{write_bytes, write_json, AlignedPhone};
use crate::corpus::{PhonemeInventory, SplitName, TrialKey};
use crate::data::{Example, PreparedTrial};
use crate::error::{config, contract, Result};
use crate::frontend::stft::{log_mel, Spectrogram};
use crate::frontend::{Waveform, AUDIO_RATE_HZ};
use crate::model::Model;
use crate::nn::Ctx;
use crate::phoneme::{topk, END};
use crate::rng;
pub use groups::{group_tables, GroupRow, GroupTable};
pub use metrics::{confidence_interval, mcd, mel_corr, rank_of, topk_accuracy, Interval};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Cepstral coefficients `1..=n_mcc` enter MCD.
    pub n_mcc: usize,
    pub ks: Vec<usize>,
    pub ci_level: f64,
    /// Prior sampling temperature when decoding speech.
    pub temperature: f64,
    /// Splits whose group tables leave out top-3 accuracy.
    pub group_topk_excluded: Vec<SplitName>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_mcc: 13,
            ks: vec![1, 3, 5],
            ci_level: 0.95,
            temperature: 0.667,
            group_topk_excluded: vec![SplitName::UnseenSubject],
        }
    }
}

impl EvalConfig {
    /// Two-sided normal quantile for the supported interval levels.
    pub fn z(&self) -> Result<f64> {
        [(0.90, 1.645), (0.95, 1.96), (0.99, 2.576)]
            .into_iter()
            .find(|(l, _)| (l - self.ci_level).abs() < 1e-12)
            .map(|(_, z)| z)
            .ok_or_else(|| config(format!("unsupported ci_level {}; use 0.90, 0.95 or 0.99", self.ci_level)))
    }

    pub fn validate(&self, output_vocab: usize) -> Result<()> {
        self.z()?;
        if self.n_mcc == 0 {
            return Err(config("n_mcc must be at least 1"));
        }
        if self.ks.is_empty() || self.ks.iter().any(|&k| k == 0 || k > output_vocab) {
            return Err(config(format!("k values must lie in 1..={output_vocab}")));
        }
        if !(self.temperature >= 0.0) {
            return Err(config("temperature must be non-negative"));
        }
        Ok(())
    }
}

/// Model outputs for one trial.
#[derive(Clone, Debug)]
pub struct DecodedTrial {
    pub key: TrialKey,
    pub id: String,
    /// Decoded waveform at 22.05 kHz, as long as the reference.
    pub audio: Vec<f64>,
    pub mel_ref: Spectrogram,
    pub mel_hyp: Spectrogram,
    pub alignment: Vec<AlignedPhone>,
    pub targets: Vec<usize>,
    /// Rank of each target under teacher forcing; empty without a predictor.
    pub ranks: Vec<usize>,
    /// Free-running greedy phoneme sequence; empty without a predictor.
    pub predicted: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct DecodeOptions {
    pub seed: u64,
    pub temperature: f64,
    pub with_phonemes: bool,
}

/// Decodes one trial. `index` selects the sampling stream, so results do not
/// depend on which worker runs the trial.
pub fn decode_trial<T: Scalar>(
    model: &Model,
    store: &ParamStore<T>,
    prepared: &PreparedTrial,
    ex: &Example<T>,
    opts: DecodeOptions,
    index: u64,
) -> Result<DecodedTrial> {
    let g = Graph::new();
    let c = Ctx::new(&g, store);
    let e = model.eeg.encode(&c, g.constant(ex.eeg.clone()))?;
    let mut r = rng::stream(opts.seed, rng::tag::DECODE, index);
    let w = model.speech.decode(&c, e, ex.n_frames, opts.temperature, &mut r)?;
    let mut audio = g.value(w).to_f64_vec();
    audio.truncate(ex.n_audio);
    let mel_hyp = log_mel(&Waveform::new(audio.clone(), AUDIO_RATE_HZ))?;
    let mel_ref = log_mel(&prepared.audio)?;
    let (ranks, predicted) = if opts.with_phonemes {
        let p = &model.phoneme;
        let feats = p.encode(&c, e)?;
        let mem = p.memory(&c, feats);
        let rows = p.teacher_force(&c, &mem, &ex.phonemes)?;
        let ranks = ex
            .phonemes
            .iter()
            .zip(&rows)
            .map(|(&y, &row)| rank_of(&g.value(row).to_f64_vec(), y))
            .collect::<Result<Vec<_>>>()?;
        let mut state = p.initial_state(&c);
        let mut prev = p.bos;
        let mut predicted = Vec::new();
        for _ in 0..g.shape(e)[2] {
            let out = p.step(&c, prev, state, &mem)?;
            let best = topk(&g.value(out.log_probs).to_f64_vec(), 1)?[0];
            if best == END {
                break;
            }
            predicted.push(best);
            prev = best;
            state = out.state;
        }
        (ranks, predicted)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(DecodedTrial {
        key: ex.key.clone(),
        id: ex.id.clone(),
        audio,
        mel_ref,
        mel_hyp,
        alignment: prepared.alignment.clone(),
        targets: ex.phonemes.clone(),
        ranks,
        predicted,
    })
}

/// Decodes every trial on up to `workers` threads. Output order and values
/// are independent of the worker count.
pub fn decode_all<T: Scalar>(
    model: &Model,
    store: &ParamStore<T>,
    prepared: &[PreparedTrial],
    examples: &[Example<T>],
    opts: DecodeOptions,
    workers: usize,
) -> Result<Vec<DecodedTrial>> {
    if prepared.len() != examples.len() {
        return Err(contract("prepared trials and examples differ in number"));
    }
    let n = examples.len();
    let workers = workers.clamp(1, n.max(1));
    let run = |i: usize| decode_trial(model, store, &prepared[i], &examples[i], opts, i as u64);
    if workers == 1 {
        return (0..n).map(run).collect();
    }
    let mut slots: Vec<Option<Result<DecodedTrial>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                s.spawn(move || (w..n).step_by(workers).map(|i| (i, run(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("decode worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every trial decoded")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKRow {
    pub k: usize,
    pub accuracy: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: SplitName,
    pub n_utterances: usize,
    pub mcd: Interval,
    pub mel_corr: Interval,
    pub topk: Vec<TopKRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub variant: String,
    pub seed: u64,
    pub phoneme_predictor: bool,
    pub n_mcc: usize,
    pub ci_level: f64,
    pub mel_corr: String,
    pub frame_assignment: String,
    pub group_topk_excluded: Vec<SplitName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub splits: Vec<SplitReport>,
    pub groups: Vec<GroupTable>,
}

/// Utterance-level MCD and Mel-Corr plus position-level top-k for one split.
pub fn evaluate_split(split: SplitName, trials: &[DecodedTrial], cfg: &EvalConfig, with_topk: bool) -> Result<SplitReport> {
    if trials.is_empty() {
        return Err(contract(format!("split {} has no decoded trials", split.as_str())));
    }
    let z = cfg.z()?;
    let mcds = trials
        .iter()
        .map(|t| mcd(&t.mel_ref, &t.mel_hyp, cfg.n_mcc))
        .collect::<Result<Vec<_>>>()?;
    let corrs = trials
        .iter()
        .map(|t| mel_corr(&t.mel_ref, &t.mel_hyp))
        .collect::<Result<Vec<_>>>()?;
    let ci = |v: &[f64]| -> Result<Interval> {
        if v.len() == 1 {
            Ok(Interval {
                mean: v[0],
                half_width: 0.0,
                n: 1,
            })
        } else {
            confidence_interval(v, z)
        }
    };
    let topk = if with_topk {
        let ranks: Vec<usize> = trials.iter().flat_map(|t| t.ranks.iter().copied()).collect();
        cfg.ks
            .iter()
            .map(|&k| {
                Ok(TopKRow {
                    k,
                    accuracy: topk_accuracy(&ranks, k, z)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(SplitReport {
        split,
        n_utterances: trials.len(),
        mcd: ci(&mcds)?,
        mel_corr: ci(&corrs)?,
        topk,
    })
}

impl EvalReport {
    /// Scores decoded splits, in the order given.
    pub fn build(
        splits: &[(SplitName, Vec<DecodedTrial>)],
        inv: &PhonemeInventory,
        cfg: &EvalConfig,
        variant: &str,
        seed: u64,
        phoneme_predictor: bool,
    ) -> Result<Self> {
        cfg.validate(inv.decoder_vocab())?;
        let mut out = Vec::new();
        let mut tables = Vec::new();
        for (name, trials) in splits {
            out.push(evaluate_split(*name, trials, cfg, phoneme_predictor)?);
            let topk = phoneme_predictor && !cfg.group_topk_excluded.contains(name);
            tables.extend(group_tables(*name, trials, inv, cfg.n_mcc, topk)?);
        }
        Ok(Self {
            metadata: ReportMetadata {
                variant: variant.to_string(),
                seed,
                phoneme_predictor,
                n_mcc: cfg.n_mcc,
                ci_level: cfg.ci_level,
                mel_corr: "pearson over flattened band x frame matrix".into(),
                frame_assignment: "frame centre".into(),
                group_topk_excluded: cfg.group_topk_excluded.clone(),
            },
            splits: out,
            groups: tables,
        })
    }

    pub fn split(&self, name: SplitName) -> Option<&SplitReport> {
        self.splits.iter().find(|s| s.split == name)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("split,metric,k,mean,half_width,n\n");
        for r in &self.splits {
            let sp = r.split.as_str();
            let mut row = |metric: &str, k: &str, i: &Interval| {
                let _ = writeln!(s, "{sp},{metric},{k},{},{},{}", i.mean, i.half_width, i.n);
            };
            row("mcd", "", &r.mcd);
            row("mel_corr", "", &r.mel_corr);
            for t in &r.topk {
                row("topk", &t.k.to_string(), &t.accuracy);
            }
        }
        s
    }

    pub fn group_csv(table: &GroupTable) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("group,n_frames,mcd,mel_corr,n_positions,top3\n");
        for r in &table.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.group,
                r.n_frames,
                opt(r.mcd),
                opt(r.mel_corr),
                r.n_positions,
                opt(r.top3)
            );
        }
        s
    }

    /// Writes `report.json`, `summary.csv` and one CSV per group table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("report.json"), self)?;
        write_bytes(&dir.join("summary.csv"), self.summary_csv().as_bytes())?;
        for t in &self.groups {
            let name = format!("groups_{}_{}.csv", t.split.as_str(), serde_json::to_value(t.axis)?.as_str().unwrap_or("axis"));
            write_bytes(&dir.join(name), Self::group_csv(t).as_bytes())?;
        }
        Ok(())
    }
}
