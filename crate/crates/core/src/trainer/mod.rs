//! Dual-optimizer training: discriminator step, generator step, then the
//! EEG/phoneme step, all from one forward pass per iteration.

pub mod checkpoint;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eegspeech_tensor::{AdamW, AdamWConfig, Gradients, Graph, ParamStore, Scalar, Tensor, Var};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::io::{create_parent, write_json};
use crate::corpus::{CorpusManifest, TrialKey};
use crate::data::{prepare_all, Example, PreparedTrial};
use crate::eeg::recon_loss;
use crate::error::{config, data, Error, Result};
use crate::frontend::stft::HOP;
use crate::model::{Model, ModelConfig, DISC_PREFIX, EEG_PREFIX, PHONEME_PREFIX, SPEECH_PREFIX};
use crate::nn::Ctx;
use crate::phoneme::{ctc_loss, Variant};
use crate::rng::{self, Rng};
use crate::speech::{disc_loss, feature_matching, gen_adv_loss, kl_loss, MelTransform};
pub use checkpoint::{checkpoint_name, Checkpoint, OptState};

pub const CONFIG_SNAPSHOT: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub lambda_ce: f64,
    pub lr: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub iterations: u64,
    pub batch_size: usize,
    pub segment_frames: usize,
    pub seed: u64,
    pub variant: Variant,
    pub enable_phoneme_predictor: bool,
    /// Checkpoint period in iterations; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub heldout_subjects: usize,
    pub heldout_sentences: usize,
    pub split_seed: u64,
    /// Restricts training to this many utterances of the training split.
    pub max_train_utterances: Option<usize>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            lambda_ce: 1.0,
            lr: 2e-4,
            betas: [0.8, 0.99],
            eps: 1e-9,
            weight_decay: 0.01,
            clip_norm: 5.0,
            iterations: 2000,
            batch_size: 1,
            segment_frames: 32,
            seed: 0,
            variant: Variant::Cb1,
            enable_phoneme_predictor: true,
            checkpoint_every: 0,
            heldout_subjects: 1,
            heldout_sentences: 8,
            split_seed: 0,
            max_train_utterances: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.lambda_ce >= 0.0) {
            return Err(config("alpha and lambda_ce must be non-negative"));
        }
        if !(self.lr > 0.0) {
            return Err(config("learning rate must be positive"));
        }
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(config("iterations and batch_size must be at least 1"));
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) || !(self.eps > 0.0) || !(self.clip_norm > 0.0) {
            return Err(config("optimizer constants out of range"));
        }
        if self.max_train_utterances == Some(0) {
            return Err(config("max_train_utterances must be at least 1"));
        }
        self.model_config().validate()
    }

    /// Model configuration with the variant and segment length applied.
    pub fn model_config(&self) -> ModelConfig {
        let mut m = self.model.clone();
        m.predictor.n_conformer_blocks = self.variant.blocks();
        m.speech.segment_frames = self.segment_frames;
        m
    }

    fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.betas[0],
            beta2: self.betas[1],
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = crate::corpus::io::read_json(path)?;
        c.validate()?;
        Ok(c)
    }
}

/// Losses of one iteration, averaged over the batch. Weighted terms
/// (`l_mel`, `l_fm`) include their loss weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepMetrics {
    pub iteration: u64,
    pub l_eeg: f64,
    pub l_ctc: Option<f64>,
    pub l_ce: Option<f64>,
    pub l_total_a: f64,
    pub l_mel: f64,
    pub l_kl: f64,
    pub l_adv_g: f64,
    pub l_fm: f64,
    pub l_disc: f64,
    pub grad_norm_a: f64,
    pub zero_norm_channels: usize,
    pub ctc_infeasible: usize,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl StepMetrics {
    pub fn csv_header(with_phoneme: bool) -> String {
        let mut cols = vec!["iteration", "l_eeg"];
        if with_phoneme {
            cols.extend(["l_ctc", "l_ce"]);
        }
        cols.extend([
            "l_total_a",
            "l_mel",
            "l_kl",
            "l_adv_g",
            "l_fm",
            "l_disc",
            "grad_norm_a",
            "zero_norm_channels",
            "ctc_infeasible",
        ]);
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut v = vec![self.iteration.to_string(), self.l_eeg.to_string()];
        if let (Some(ctc), Some(ce)) = (self.l_ctc, self.l_ce) {
            v.push(ctc.to_string());
            v.push(ce.to_string());
        }
        for x in [self.l_total_a, self.l_mel, self.l_kl, self.l_adv_g, self.l_fm, self.l_disc, self.grad_norm_a] {
            v.push(x.to_string());
        }
        v.push(self.zero_norm_channels.to_string());
        v.push(self.ctc_infeasible.to_string());
        v.join(",")
    }
}

/// Per-example forward results inside the step graph.
struct Parts<T: Scalar> {
    l_eeg: Var,
    zero_norm: usize,
    ctc: Option<(Var, bool)>,
    ce: Option<Var>,
    l_kl: Var,
    w_hat: Var,
    w_real: Tensor<T>,
}

/// Generator-side loss terms for one example.
struct GenLosses {
    mel: Var,
    adv: Var,
    fm: Var,
}

pub struct Trainer<T: Scalar> {
    pub cfg: TrainConfig,
    pub model: Model,
    pub store: ParamStore<T>,
    /// EEG module and phoneme predictor.
    pub opt_a: AdamW<T>,
    /// Speech generator side.
    pub opt_b: AdamW<T>,
    /// Discriminators.
    pub opt_c: AdamW<T>,
    /// Completed iterations.
    pub iteration: u64,
    pub examples: Vec<Example<T>>,
    pub n_phonemes: usize,
    mel: MelTransform<T>,
}

fn finite(term: &str, v: f64, iteration: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            term: term.to_string(),
            iteration,
        })
    }
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: TrainConfig, n_phonemes: usize, examples: Vec<Example<T>>) -> Result<Self> {
        cfg.validate()?;
        if examples.is_empty() {
            return Err(config("the training split is empty"));
        }
        let mut store = ParamStore::new();
        let model = Model::build(&cfg.model_config(), n_phonemes, cfg.seed, &mut store)?;
        let mut a_ids = Model::params(&store, EEG_PREFIX);
        if cfg.enable_phoneme_predictor {
            a_ids.extend(Model::params(&store, PHONEME_PREFIX));
        }
        let opt_a = AdamW::new(&store, a_ids, cfg.adamw());
        let opt_b = AdamW::new(&store, Model::params(&store, SPEECH_PREFIX), cfg.adamw());
        let opt_c = AdamW::new(&store, Model::params(&store, DISC_PREFIX), cfg.adamw());
        Ok(Self {
            cfg,
            model,
            store,
            opt_a,
            opt_b,
            opt_c,
            iteration: 0,
            examples,
            n_phonemes,
            mel: MelTransform::standard(),
        })
    }

    fn phoneme_on(&self) -> bool {
        self.cfg.enable_phoneme_predictor
    }

    /// Example indices for iteration `it` (1-based): a fresh seeded
    /// permutation per pass over the data.
    pub fn batch_indices(&self, it: u64) -> Vec<usize> {
        let n = self.examples.len() as u64;
        let b = self.cfg.batch_size as u64;
        (0..b)
            .map(|j| {
                let k = (it - 1) * b + j;
                let mut perm: Vec<usize> = (0..n as usize).collect();
                perm.shuffle(&mut rng::stream(self.cfg.seed, rng::tag::SHUFFLE, k / n));
                perm[(k % n) as usize]
            })
            .collect()
    }

    fn forward_example(&self, c: &Ctx<T>, ex: &Example<T>, r: &mut Rng) -> Result<Parts<T>> {
        let g = c.g;
        let x = g.constant(ex.eeg.clone());
        let t_eeg = ex.eeg.dim(2);
        let e = self.model.eeg.encode(c, x)?;
        let x_hat = g.slice(self.model.eeg.decode(c, e)?, 2, 0, t_eeg);
        let recon = recon_loss(g, x, x_hat)?;
        let (ctc, ce) = if self.phoneme_on() {
            let p = &self.model.phoneme;
            let feats = p.encode(c, e)?;
            let lp = p.ctc_log_probs(c, feats);
            let ctc = ctc_loss(g, lp, &ex.phonemes);
            let mem = p.memory(c, feats);
            let ce = p.ce_loss(c, &mem, &ex.phonemes)?;
            (Some((ctc.loss, ctc.feasible)), Some(ce))
        } else {
            (None, None)
        };
        let sp = &self.model.speech;
        let e_stop = g.detach(e);
        let t_spec = ex.n_frames;
        let seg = sp.cfg.segment_frames;
        if t_spec < seg {
            return Err(data(format!(
                "trial {} has {t_spec} frames, fewer than the {seg}-frame segment",
                ex.id
            )));
        }
        let lin = g.constant(ex.linear.clone());
        let post = sp.posterior(c, lin, Tensor::randn(&[1, sp.cfg.d_z, t_spec], 1.0, r))?;
        let prior = sp.prior(c, e_stop, t_spec)?;
        let (z_p, logdet) = sp.flow.forward(c, post.z, Some(prior.cond))?;
        let l_kl = kl_loss(g, &post.stats, z_p, logdet, &prior.stats)?;
        let t0 = r.gen_range(0..=t_spec - seg);
        let w_hat = sp.generate_segment(c, g.slice(post.z, 2, t0, t0 + seg))?;
        let w_real = Tensor::from_f64(&[1, 1, seg * HOP], &ex.audio[t0 * HOP..(t0 + seg) * HOP]);
        Ok(Parts {
            l_eeg: recon.loss,
            zero_norm: recon.zero_norm_channels,
            ctc,
            ce,
            l_kl,
            w_hat,
            w_real,
        })
    }

    /// Generator losses against the current discriminator, whose parameters
    /// enter as constants.
    fn gen_losses(&self, g: &Graph<T>, p: &Parts<T>) -> Result<GenLosses> {
        let cf = Ctx::frozen(g, &self.store);
        let real_w = g.constant(p.w_real.clone());
        let real = self.model.disc.forward(&cf, real_w)?;
        let fake = self.model.disc.forward(&cf, p.w_hat)?;
        let sc = &self.model.speech.cfg;
        let mel_hat = self.mel.forward(g, p.w_hat);
        let mel_ref = g.detach(self.mel.forward(g, real_w));
        let l1 = g.mean_all(g.abs(g.sub(mel_hat, mel_ref)));
        Ok(GenLosses {
            mel: g.scale(l1, T::lit(sc.lambda_mel)),
            adv: gen_adv_loss(g, &fake),
            fm: g.scale(feature_matching(g, &real, &fake), T::lit(sc.lambda_fm)),
        })
    }

    fn disc_step(&mut self, g: &Graph<T>, parts: &[Parts<T>]) -> Result<f64> {
        let gd = Graph::new();
        let loss = {
            let cd = Ctx::new(&gd, &self.store);
            let mut total = gd.scalar(T::zero());
            for p in parts {
                let real = self.model.disc.forward(&cd, gd.constant(p.w_real.clone()))?;
                let fake_w = gd.constant((*g.value(p.w_hat)).clone());
                let fake = self.model.disc.forward(&cd, fake_w)?;
                total = gd.add(total, disc_loss(&gd, &real, &fake));
            }
            gd.scale(total, T::lit(1.0 / parts.len() as f64))
        };
        let value = gd.item(loss).as_f64();
        finite("l_disc", value, self.iteration + 1)?;
        let grads = gd.backward(loss);
        self.opt_c.step(&mut self.store, &grads, None);
        Ok(value)
    }

    /// One iteration; returns its metrics.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let start = Instant::now();
        let it = self.iteration + 1;
        let batch = self.batch_indices(it);
        let inv_b = 1.0 / batch.len() as f64;
        let mut r = rng::stream(self.cfg.seed, rng::tag::STEP, it);
        let g = Graph::new();
        let parts = {
            let c = Ctx::new(&g, &self.store);
            batch
                .iter()
                .map(|&i| self.forward_example(&c, &self.examples[i], &mut r))
                .collect::<Result<Vec<_>>>()?
        };
        let l_disc = self.disc_step(&g, &parts)?;

        let mut acc = [0.0f64; 7];
        let mut zero_norm = 0;
        let mut infeasible = 0;
        let mut n_ctc = 0usize;
        let mut l_b = g.scalar(T::zero());
        let mut l_a = g.scalar(T::zero());
        for p in &parts {
            let gl = self.gen_losses(&g, p)?;
            let b = g.add(g.add(gl.mel, p.l_kl), g.add(gl.adv, gl.fm));
            l_b = g.add(l_b, b);
            acc[0] += g.item(gl.mel).as_f64();
            acc[1] += g.item(p.l_kl).as_f64();
            acc[2] += g.item(gl.adv).as_f64();
            acc[3] += g.item(gl.fm).as_f64();
            acc[4] += g.item(p.l_eeg).as_f64();
            zero_norm += p.zero_norm;
            let mut a = p.l_eeg;
            if let Some((ctc, feasible)) = p.ctc {
                if feasible {
                    acc[5] += g.item(ctc).as_f64();
                    n_ctc += 1;
                    a = g.add(a, g.scale(ctc, T::lit(self.cfg.alpha)));
                } else {
                    infeasible += 1;
                }
            }
            if let Some(ce) = p.ce {
                acc[6] += g.item(ce).as_f64();
                a = g.add(a, g.scale(ce, T::lit(self.cfg.lambda_ce)));
            }
            l_a = g.add(l_a, a);
        }
        let l_b = g.scale(l_b, T::lit(inv_b));
        let l_a = g.scale(l_a, T::lit(inv_b));
        let on = self.phoneme_on();
        let m = StepMetrics {
            iteration: it,
            l_eeg: finite("l_eeg", acc[4] * inv_b, it)?,
            l_ctc: if !on {
                None
            } else if n_ctc == 0 {
                Some(f64::INFINITY)
            } else {
                Some(finite("l_ctc", acc[5] / n_ctc as f64, it)?)
            },
            l_ce: if on { Some(finite("l_ce", acc[6] * inv_b, it)?) } else { None },
            l_total_a: finite("l_total_a", g.item(l_a).as_f64(), it)?,
            l_mel: finite("l_mel", acc[0] * inv_b, it)?,
            l_kl: finite("l_kl", acc[1] * inv_b, it)?,
            l_adv_g: finite("l_adv_g", acc[2] * inv_b, it)?,
            l_fm: finite("l_fm", acc[3] * inv_b, it)?,
            l_disc,
            grad_norm_a: 0.0,
            zero_norm_channels: zero_norm,
            ctc_infeasible: infeasible,
            wall_ms: 0.0,
        };

        let grads_b = g.backward(l_b);
        debug_assert!(
            Model::params(&self.store, EEG_PREFIX)
                .iter()
                .all(|&id| grads_b.param(id).is_none_or(|t| t.max_abs() == T::zero())),
            "speech losses reached the EEG module"
        );
        self.opt_b.step(&mut self.store, &grads_b, None);
        let grads_a = g.backward(l_a);
        let norm = self.opt_a.step(&mut self.store, &grads_a, Some(self.cfg.clip_norm)).as_f64();
        self.iteration = it;
        Ok(StepMetrics {
            grad_norm_a: norm,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..m
        })
    }

    /// Gradients of the speech-branch objective (mel, KL, adversarial and
    /// feature matching) at the current parameters, without any update.
    pub fn speech_gradients(&self, example: usize) -> Result<Gradients<T>> {
        let mut r = rng::stream(self.cfg.seed, rng::tag::STEP, self.iteration + 1);
        let g = Graph::new();
        let p = {
            let c = Ctx::new(&g, &self.store);
            self.forward_example(&c, &self.examples[example], &mut r)?
        };
        let gl = self.gen_losses(&g, &p)?;
        let l_b = g.add(g.add(gl.mel, p.l_kl), g.add(gl.adv, gl.fm));
        Ok(g.backward(l_b))
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        let params = self
            .store
            .ids()
            .map(|id| (self.store.name(id).to_string(), self.store.get(id).clone()))
            .collect();
        let opt = |o: &AdamW<T>| {
            let (m, v) = o.moments();
            OptState {
                step: o.step_count(),
                m: m.to_vec(),
                v: v.to_vec(),
            }
        };
        Checkpoint {
            iteration: self.iteration,
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            params,
            optimizers: [opt(&self.opt_a), opt(&self.opt_b), opt(&self.opt_c)],
        }
    }

    /// Rebuilds a trainer from a checkpoint of the same architecture.
    pub fn from_checkpoint(ck: &Checkpoint<T>, n_phonemes: usize, examples: Vec<Example<T>>) -> Result<Self> {
        let mut t = Self::new(ck.config.clone(), n_phonemes, examples)?;
        t.load_params(ck)?;
        for (o, s) in [&mut t.opt_a, &mut t.opt_b, &mut t.opt_c].into_iter().zip(&ck.optimizers) {
            if s.m.len() != o.params().len() {
                return Err(Error::State("checkpoint optimizer does not match the model".into()));
            }
            o.restore(s.step, s.m.clone(), s.v.clone());
        }
        t.iteration = ck.iteration;
        Ok(t)
    }

    pub fn load_params(&mut self, ck: &Checkpoint<T>) -> Result<()> {
        load_params(&mut self.store, ck)
    }
}

/// Copies checkpoint tensors into a store built for the same architecture.
pub fn load_params<T: Scalar>(store: &mut ParamStore<T>, ck: &Checkpoint<T>) -> Result<()> {
    if ck.params.len() != store.len() {
        return Err(Error::State(format!(
            "checkpoint has {} tensors, model {}",
            ck.params.len(),
            store.len()
        )));
    }
    for (id, (name, t)) in store.ids().collect::<Vec<_>>().into_iter().zip(&ck.params) {
        if store.name(id) != name || store.get(id).shape() != t.shape() {
            return Err(Error::State(format!("checkpoint tensor {name} does not match the model")));
        }
        *store.get_mut(id) = t.clone();
    }
    Ok(())
}

/// The model and parameters saved in a checkpoint.
pub fn restore_model<T: Scalar>(ck: &Checkpoint<T>, n_phonemes: usize) -> Result<(Model, ParamStore<T>)> {
    ck.config.validate()?;
    let mut store = ParamStore::new();
    let model = Model::build(&ck.config.model_config(), n_phonemes, ck.config.seed, &mut store)?;
    load_params(&mut store, ck)?;
    Ok((model, store))
}

/// Training keys after the optional utterance cap.
pub fn training_keys(cfg: &TrainConfig, manifest: &CorpusManifest) -> Result<Vec<TrialKey>> {
    let split = manifest.split(cfg.heldout_subjects, cfg.heldout_sentences, cfg.split_seed)?;
    let mut keys: Vec<TrialKey> = split.train.into_iter().collect();
    if let Some(n) = cfg.max_train_utterances {
        keys.shuffle(&mut rng::stream(cfg.split_seed, rng::tag::SPLIT, 2));
        keys.truncate(n);
        keys.sort();
    }
    if keys.is_empty() {
        return Err(config("the training split is empty"));
    }
    Ok(keys)
}

pub fn load_examples<T: Scalar>(manifest: &CorpusManifest, keys: &[TrialKey]) -> Result<(Vec<PreparedTrial>, Vec<Example<T>>)> {
    let set = keys.iter().cloned().collect();
    let trials = manifest.select(&set);
    let prepared = prepare_all(manifest, &trials)?;
    let examples = prepared.iter().map(Example::from_prepared).collect::<Result<Vec<_>>>()?;
    Ok((prepared, examples))
}

pub struct TrainOutcome<T: Scalar> {
    pub trainer: Trainer<T>,
    pub metrics: Vec<StepMetrics>,
    pub final_checkpoint: PathBuf,
}

/// Keeps the header and the rows up to `iteration` of an existing log.
fn truncate_log(path: &Path, iteration: u64) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0
            || line
                .split(',')
                .next()
                .and_then(|s| s.parse::<u64>().ok())
                .is_some_and(|n| n <= iteration);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Runs (or resumes) training into `out`, writing the config snapshot, the
/// metrics CSV, a separate wall-clock log and checkpoints.
pub fn train<T: Scalar>(
    cfg: &TrainConfig,
    manifest: &CorpusManifest,
    out: &Path,
    resume: Option<&Path>,
    mut progress: impl FnMut(&StepMetrics),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let keys = training_keys(cfg, manifest)?;
    let (_, examples) = load_examples::<T>(manifest, &keys)?;
    let n_ph = manifest.inventory.len();
    let mut trainer = match resume {
        Some(p) => {
            let ck = Checkpoint::<T>::load(p)?;
            let mut resumed = ck.config.clone();
            resumed.iterations = cfg.iterations;
            resumed.checkpoint_every = cfg.checkpoint_every;
            if resumed != *cfg {
                return Err(config("resume config differs from the checkpoint beyond iterations"));
            }
            let mut t = Trainer::from_checkpoint(&ck, n_ph, examples)?;
            t.cfg = cfg.clone();
            t
        }
        None => Trainer::new(cfg.clone(), n_ph, examples)?,
    };
    write_json(&out.join(CONFIG_SNAPSHOT), cfg)?;
    let metrics_path = out.join(METRICS_FILE);
    let timing_path = out.join(TIMING_FILE);
    create_parent(&metrics_path)?;
    let (mut metrics_text, mut timing_text) = if resume.is_some() {
        (
            truncate_log(&metrics_path, trainer.iteration)?,
            truncate_log(&timing_path, trainer.iteration)?,
        )
    } else {
        (
            format!("{}\n", StepMetrics::csv_header(cfg.enable_phoneme_predictor)),
            "iteration,wall_ms\n".to_string(),
        )
    };
    let mut metrics = Vec::new();
    let write_logs = |m: &str, t: &str| -> Result<()> {
        let mut f = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        f.write_all(m.as_bytes()).map_err(|e| Error::io(&metrics_path, e))?;
        let mut f = fs::File::create(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
        f.write_all(t.as_bytes()).map_err(|e| Error::io(&timing_path, e))
    };
    while trainer.iteration < cfg.iterations {
        let m = trainer.step()?;
        metrics_text.push_str(&m.csv_row());
        metrics_text.push('\n');
        timing_text.push_str(&format!("{},{:.3}\n", m.iteration, m.wall_ms));
        progress(&m);
        if cfg.checkpoint_every > 0 && m.iteration % cfg.checkpoint_every == 0 && m.iteration < cfg.iterations {
            trainer.checkpoint().save(&out.join(checkpoint_name(m.iteration)))?;
            write_logs(&metrics_text, &timing_text)?;
        }
        metrics.push(m);
    }
    write_logs(&metrics_text, &timing_text)?;
    let final_checkpoint = out.join(checkpoint_name(trainer.iteration));
    trainer.checkpoint().save(&final_checkpoint)?;
    Ok(TrainOutcome {
        trainer,
        metrics,
        final_checkpoint,
    })
}
