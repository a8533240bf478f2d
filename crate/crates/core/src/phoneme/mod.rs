//! Conformer encoder over EEG embeddings with a frame-level CTC head and an
//! attention LSTM decoder for next-phoneme prediction.

pub mod ctc;

use eegspeech_tensor::{Conv1dSpec, ParamId, Scalar, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::nn::{
    sinusoidal_positions, Builder, Conv1d, Ctx, Embedding, FeedForward, LayerNorm, Linear, LstmCell, LstmState,
    MultiHeadAttention,
};

pub use ctc::{ctc_loss, greedy_decode, CtcLoss};

/// Decoder output index meaning "sequence ends".
pub const END: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CB-0")]
    Cb0,
    #[serde(rename = "CB-1")]
    Cb1,
    #[serde(rename = "CB-2")]
    Cb2,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cb0, Variant::Cb1, Variant::Cb2];

    pub fn blocks(self) -> usize {
        match self {
            Variant::Cb0 => 0,
            Variant::Cb1 => 1,
            Variant::Cb2 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cb0 => "CB-0",
            Variant::Cb1 => "CB-1",
            Variant::Cb2 => "CB-2",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    pub n_conformer_blocks: usize,
    pub d_model: usize,
    pub heads: usize,
    pub conv_kernel: usize,
    pub ff_hidden: usize,
    pub decoder_hidden: usize,
    pub embed_dim: usize,
    pub attention_dim: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            n_conformer_blocks: 1,
            d_model: 64,
            heads: 4,
            conv_kernel: 7,
            ff_hidden: 128,
            decoder_hidden: 128,
            embed_dim: 32,
            attention_dim: 64,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_conformer_blocks > 2 {
            return Err(config("conformer blocks must be 0, 1 or 2"));
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(config("predictor width must divide into heads"));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(config("conformer conv kernel must be odd"));
        }
        if [self.d_model, self.ff_hidden, self.decoder_hidden, self.embed_dim, self.attention_dim].contains(&0) {
            return Err(config("predictor dimensions must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ConvModule {
    ln: LayerNorm,
    pw1: Conv1d,
    dw: Conv1d,
    norm: LayerNorm,
    pw2: Conv1d,
}

impl ConvModule {
    fn new<T: Scalar>(b: &mut Builder<T>, d: usize, k: usize) -> Self {
        let one = Conv1dSpec::default();
        Self {
            ln: LayerNorm::new(&mut b.sub("ln"), d),
            pw1: Conv1d::new(&mut b.sub("pw1"), d, 2 * d, 1, one),
            dw: Conv1d::new(&mut b.sub("dw"), d, d, k, Conv1dSpec::same(k, 1).groups(d)),
            norm: LayerNorm::new(&mut b.sub("norm"), d),
            pw2: Conv1d::new(&mut b.sub("pw2"), d, d, 1, one),
        }
    }

    /// `[T, d] -> [T, d]`.
    fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let g = c.g;
        let (t, d) = {
            let s = g.shape(x);
            (s[0], s[1])
        };
        let h = self.ln.forward(c, x);
        let h = g.reshape(g.transpose(h), &[1, d, t]);
        let h = g.glu(self.pw1.forward(c, h), 1);
        let h = self.dw.forward(c, h);
        let h = g.silu(self.norm.forward_channels(c, h));
        let h = self.pw2.forward(c, h);
        g.transpose(g.reshape(h, &[d, t]))
    }
}

#[derive(Clone, Debug)]
struct ConformerBlock {
    ln_ff1: LayerNorm,
    ff1: FeedForward,
    ln_att: LayerNorm,
    att: MultiHeadAttention,
    conv: ConvModule,
    ln_ff2: LayerNorm,
    ff2: FeedForward,
    ln_out: LayerNorm,
}

impl ConformerBlock {
    fn new<T: Scalar>(b: &mut Builder<T>, cfg: &PredictorConfig) -> Self {
        let d = cfg.d_model;
        Self {
            ln_ff1: LayerNorm::new(&mut b.sub("ln_ff1"), d),
            ff1: FeedForward::new(&mut b.sub("ff1"), d, cfg.ff_hidden),
            ln_att: LayerNorm::new(&mut b.sub("ln_att"), d),
            att: MultiHeadAttention::new(&mut b.sub("att"), d, cfg.heads),
            conv: ConvModule::new(&mut b.sub("conv"), d, cfg.conv_kernel),
            ln_ff2: LayerNorm::new(&mut b.sub("ln_ff2"), d),
            ff2: FeedForward::new(&mut b.sub("ff2"), d, cfg.ff_hidden),
            ln_out: LayerNorm::new(&mut b.sub("ln_out"), d),
        }
    }

    fn forward<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Var {
        let g = c.g;
        let half = T::lit(0.5);
        let mut x = g.add(x, g.scale(self.ff1.forward(c, self.ln_ff1.forward(c, x)), half));
        x = g.add(x, self.att.forward(c, self.ln_att.forward(c, x)));
        x = g.add(x, self.conv.forward(c, x));
        x = g.add(x, g.scale(self.ff2.forward(c, self.ln_ff2.forward(c, x)), half));
        self.ln_out.forward(c, x)
    }
}

/// Additive-attention LSTM decoder with input feeding.
#[derive(Clone, Debug)]
struct Decoder {
    embed: Embedding,
    lstm: LstmCell,
    enc_proj: Linear,
    dec_proj: Linear,
    v: ParamId,
    out: Linear,
}

/// Decoder recurrent state: LSTM state plus the previous context vector.
#[derive(Clone, Copy, Debug)]
pub struct DecoderState {
    pub lstm: LstmState,
    pub ctx: Var,
}

/// Encoder features with their attention projection cached.
#[derive(Clone, Copy, Debug)]
pub struct EncoderMemory {
    pub feats: Var,
    keys: Var,
}

pub struct StepOutput {
    /// `[1, V_out]` log-probabilities.
    pub log_probs: Var,
    /// `[1, T]` attention weights.
    pub attention: Var,
    pub state: DecoderState,
}

#[derive(Clone, Debug)]
pub struct PhonemePredictor {
    pub cfg: PredictorConfig,
    input: Linear,
    blocks: Vec<ConformerBlock>,
    ctc_head: Linear,
    dec: Decoder,
    /// CTC vocabulary (blank plus phonemes).
    pub ctc_vocab: usize,
    /// Decoder input vocabulary (adds BOS).
    pub input_vocab: usize,
    /// Decoder output vocabulary (END plus phonemes).
    pub output_vocab: usize,
    pub bos: usize,
}

impl PhonemePredictor {
    /// `n_phonemes` symbols with ids `1..=n`; BOS is `n + 1`.
    pub fn new<T: Scalar>(b: &mut Builder<T>, cfg: &PredictorConfig, d_e: usize, n_phonemes: usize) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let ctc_vocab = n_phonemes + 1;
        let input_vocab = n_phonemes + 2;
        let output_vocab = n_phonemes + 1;
        let h = cfg.decoder_hidden;
        let mut db = b.sub("dec");
        let dec = Decoder {
            embed: Embedding::new(&mut db.sub("embed"), input_vocab, cfg.embed_dim),
            lstm: LstmCell::new(&mut db.sub("lstm"), cfg.embed_dim + d, h),
            enc_proj: Linear::new(&mut db.sub("enc_proj"), d, cfg.attention_dim, false),
            dec_proj: Linear::new(&mut db.sub("dec_proj"), h, cfg.attention_dim, true),
            v: db.randn("v", &[cfg.attention_dim, 1], 1.0 / (cfg.attention_dim as f64).sqrt()),
            out: Linear::new(&mut db.sub("out"), h + d, output_vocab, true),
        };
        Ok(Self {
            cfg: cfg.clone(),
            input: Linear::new(&mut b.sub("input"), d_e, d, true),
            blocks: (0..cfg.n_conformer_blocks)
                .map(|i| ConformerBlock::new(&mut b.sub(&format!("conf{i}")), cfg))
                .collect(),
            ctc_head: Linear::new(&mut b.sub("ctc"), d, ctc_vocab, true),
            dec,
            ctc_vocab,
            input_vocab,
            output_vocab,
            bos: n_phonemes + 1,
        })
    }

    /// `[1, D_e, T] -> [T, d_model]`.
    pub fn encode<T: Scalar>(&self, c: &Ctx<T>, e: Var) -> Result<Var> {
        let g = c.g;
        let s = g.shape(e);
        if s.len() != 3 || s[0] != 1 || s[1] != self.input.d_in || s[2] == 0 {
            return Err(contract(format!("predictor input {s:?} is not [1, {}, T]", self.input.d_in)));
        }
        let x = g.transpose(g.reshape(e, &[s[1], s[2]]));
        let mut h = self.input.forward(c, x);
        if !self.blocks.is_empty() {
            h = g.add(h, g.constant(sinusoidal_positions(s[2], self.cfg.d_model)));
        }
        for blk in &self.blocks {
            h = blk.forward(c, h);
        }
        Ok(h)
    }

    /// Frame-level `[T, V]` log-probabilities for CTC.
    pub fn ctc_log_probs<T: Scalar>(&self, c: &Ctx<T>, feats: Var) -> Var {
        c.g.log_softmax(self.ctc_head.forward(c, feats))
    }

    pub fn memory<T: Scalar>(&self, c: &Ctx<T>, feats: Var) -> EncoderMemory {
        EncoderMemory {
            feats,
            keys: self.dec.enc_proj.forward(c, feats),
        }
    }

    pub fn initial_state<T: Scalar>(&self, c: &Ctx<T>) -> DecoderState {
        DecoderState {
            lstm: self.dec.lstm.zero_state(c),
            ctx: c.g.constant(Tensor::zeros(&[1, self.cfg.d_model])),
        }
    }

    pub fn step<T: Scalar>(&self, c: &Ctx<T>, prev: usize, state: DecoderState, mem: &EncoderMemory) -> Result<StepOutput> {
        if prev >= self.input_vocab || prev == 0 {
            return Err(contract(format!("decoder input id {prev} is not a phoneme or BOS")));
        }
        let g = c.g;
        let d = &self.dec;
        let emb = d.embed.forward(c, &[prev]);
        let x = g.concat(&[emb, state.ctx], 1);
        let lstm = d.lstm.step(c, x, state.lstm);
        let q = d.dec_proj.forward(c, lstm.h);
        let scores = g.matmul(g.tanh(g.add(mem.keys, q)), c.p(d.v));
        let t = g.shape(scores)[0];
        let attention = g.softmax(g.reshape(scores, &[1, t]));
        let ctx = g.matmul(attention, mem.feats);
        let logits = d.out.forward(c, g.concat(&[lstm.h, ctx], 1));
        Ok(StepOutput {
            log_probs: g.log_softmax(logits),
            attention,
            state: DecoderState { lstm, ctx },
        })
    }

    /// Teacher-forced decoder pass. `target` holds phoneme ids `1..=n`; the
    /// inputs are BOS then the target, the outputs the target then END.
    /// Returns one `[1, V_out]` log-probability row per output position.
    pub fn teacher_force<T: Scalar>(&self, c: &Ctx<T>, mem: &EncoderMemory, target: &[usize]) -> Result<Vec<Var>> {
        let mut state = self.initial_state(c);
        let mut prev = self.bos;
        let mut rows = Vec::with_capacity(target.len() + 1);
        for i in 0..=target.len() {
            let out = self.step(c, prev, state, mem)?;
            rows.push(out.log_probs);
            state = out.state;
            if i < target.len() {
                prev = target[i];
            }
        }
        Ok(rows)
    }

    /// Mean cross-entropy of the teacher-forced decoder.
    pub fn ce_loss<T: Scalar>(&self, c: &Ctx<T>, mem: &EncoderMemory, target: &[usize]) -> Result<Var> {
        let g = c.g;
        let rows = self.teacher_force(c, mem, target)?;
        let lp = g.concat(&rows, 0);
        let n = rows.len();
        let idx: Vec<usize> = (0..n)
            .map(|i| {
                let y = if i < target.len() { target[i] } else { END };
                i * self.output_vocab + y
            })
            .collect();
        let picked = g.gather_flat(lp, &idx, &[n]);
        Ok(g.scale(g.mean_all(picked), -T::one()))
    }
}

/// Indices of the `k` largest entries, ties broken by the lower index.
pub fn topk(dist: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > dist.len() {
        return Err(contract(format!("k = {k} outside 1..={}", dist.len())));
    }
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use eegspeech_tensor::{Graph, ParamStore};

    fn build(blocks: usize) -> (ParamStore<f64>, PhonemePredictor) {
        let cfg = PredictorConfig {
            n_conformer_blocks: blocks,
            d_model: 8,
            heads: 2,
            ff_hidden: 16,
            decoder_hidden: 12,
            embed_dim: 4,
            attention_dim: 6,
            ..Default::default()
        };
        let mut ps = ParamStore::new();
        let mut r = rng::stream(1, 0, 0);
        let p = PhonemePredictor::new(&mut Builder::new(&mut ps, &mut r, "phoneme"), &cfg, 5, 6).unwrap();
        (ps, p)
    }

    #[test]
    fn zero_blocks_is_a_projection() {
        let (ps, p) = build(0);
        let g = Graph::new();
        let c = Ctx::new(&g, &ps);
        let mut r = rng::stream(2, 0, 0);
        let e = Tensor::randn(&[1, 5, 9], 1.0, &mut r);
        let h = g.value(p.encode(&c, g.constant(e.clone())).unwrap());
        let x = e.reshape(&[5, 9]).t();
        let w = ps.get(p.input.w);
        let b = ps.get(p.input.b.unwrap());
        let expect = x.matmul(w);
        for t in 0..9 {
            for j in 0..8 {
                assert!((h.at(&[t, j]) - expect.at(&[t, j]) - b.at(&[j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_distribution_and_attention_are_normalised() {
        let (ps, p) = build(2);
        let g = Graph::new();
        let c = Ctx::new(&g, &ps);
        let mut r = rng::stream(3, 0, 0);
        let feats = p.encode(&c, g.constant(Tensor::randn(&[1, 5, 11], 1.0, &mut r))).unwrap();
        assert_eq!(g.shape(feats), vec![11, 8]);
        let mem = p.memory(&c, feats);
        let out = p.step(&c, p.bos, p.initial_state(&c), &mem).unwrap();
        let probs: f64 = g.value(out.log_probs).data().iter().map(|v| v.exp()).sum();
        assert!((probs - 1.0).abs() < 1e-9);
        let att = g.value(out.attention);
        assert!(att.data().iter().all(|&v| v >= 0.0));
        assert!((att.sum() - 1.0).abs() < 1e-9);
        assert!(p.step(&c, 0, out.state, &mem).is_err());
        assert!(p.step(&c, 8, out.state, &mem).is_err());
    }

    #[test]
    fn topk_orders_and_breaks_ties_low() {
        assert_eq!(topk(&[0.1, 0.5, 0.5, 0.2], 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(topk(&[0.0, 1.0, 0.0], 1).unwrap(), vec![1]);
        assert!(topk(&[0.5, 0.5], 3).is_err());
        assert!(topk(&[0.5, 0.5], 0).is_err());
    }
}
