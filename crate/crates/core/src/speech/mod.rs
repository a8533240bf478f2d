//! Conditional variational speech generator: posterior encoder over linear
//! spectrograms, EEG-conditioned prior with a coupling flow, waveform
//! generator and adversarial discriminators.

pub mod discriminator;
pub mod flow;
pub mod generator;
pub mod mel;

use eegspeech_tensor::{Conv1dSpec, Scalar, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::frontend::stft::{SpecKind, Spectrogram, N_LINEAR_BINS};
use crate::nn::{
    interpolate_time, sinusoidal_positions, Builder, Conv1d, Ctx, FeedForward, LayerNorm, Linear, MultiHeadAttention,
    WaveNet,
};
use crate::rng::Rng;

pub use discriminator::{disc_loss, feature_matching, gen_adv_loss, DiscOutput, Discriminators};
pub use flow::Flow;
pub use generator::Generator;
pub use mel::MelTransform;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeechConfig {
    pub d_z: usize,
    pub posterior_hidden: usize,
    pub posterior_layers: usize,
    pub posterior_kernel: usize,
    pub connector_width: usize,
    pub connector_blocks: usize,
    pub connector_heads: usize,
    pub connector_ff: usize,
    pub flow_couplings: usize,
    pub flow_hidden: usize,
    pub flow_layers: usize,
    pub flow_kernel: usize,
    pub gen_channels: usize,
    pub upsample_rates: Vec<usize>,
    pub resblock_kernels: Vec<usize>,
    pub resblock_dilations: Vec<usize>,
    pub disc_periods: Vec<usize>,
    pub segment_frames: usize,
    pub temperature: f64,
    pub lambda_mel: f64,
    pub lambda_fm: f64,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        Self {
            d_z: 64,
            posterior_hidden: 64,
            posterior_layers: 4,
            posterior_kernel: 5,
            connector_width: 64,
            connector_blocks: 4,
            connector_heads: 2,
            connector_ff: 128,
            flow_couplings: 4,
            flow_hidden: 64,
            flow_layers: 2,
            flow_kernel: 5,
            gen_channels: 64,
            upsample_rates: vec![8, 8, 2, 2],
            resblock_kernels: vec![3, 7],
            resblock_dilations: vec![1, 3],
            disc_periods: vec![2, 3],
            segment_frames: 32,
            temperature: 0.667,
            lambda_mel: 45.0,
            lambda_fm: 2.0,
        }
    }
}

impl SpeechConfig {
    pub fn hop(&self) -> usize {
        self.upsample_rates.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_z == 0 || !self.d_z.is_multiple_of(2) {
            return Err(config(format!("latent width must be even, got {}", self.d_z)));
        }
        if self.hop() != crate::frontend::stft::HOP {
            return Err(config(format!(
                "generator upsampling {} must equal the hop {}",
                self.hop(),
                crate::frontend::stft::HOP
            )));
        }
        if self.connector_heads == 0 || !self.connector_width.is_multiple_of(self.connector_heads) {
            return Err(config("connector width must divide into heads"));
        }
        if self.segment_frames == 0 || self.resblock_kernels.is_empty() || self.resblock_dilations.is_empty() {
            return Err(config("speech segment and generator sizes must be non-empty"));
        }
        if self.posterior_layers == 0 || self.flow_layers == 0 {
            return Err(config("WaveNet stacks need at least one layer"));
        }
        Ok(())
    }
}

/// Independent Gaussian per (dim, frame): `[1, D_z, T]` tensors.
#[derive(Clone, Copy, Debug)]
pub struct GaussianFrames {
    pub mu: Var,
    pub logs: Var,
}

pub struct Posterior {
    pub stats: GaussianFrames,
    pub z: Var,
}

pub struct Prior {
    pub stats: GaussianFrames,
    /// Adapted connector features `[1, width, T]` conditioning the flow.
    pub cond: Var,
}

#[derive(Clone, Debug)]
struct ConnectorBlock {
    att: MultiHeadAttention,
    ln1: LayerNorm,
    ff: FeedForward,
    ln2: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct SpeechModule {
    pub cfg: SpeechConfig,
    post_pre: Conv1d,
    post_wn: WaveNet,
    post_proj: Conv1d,
    conn_in: Linear,
    conn_blocks: Vec<ConnectorBlock>,
    conn_proj: Conv1d,
    pub flow: Flow,
    pub generator: Generator,
}

/// `ln(1 + |X|)` of a linear spectrogram as `[1, bins, T]`.
pub fn posterior_input<T: Scalar>(lin: &Spectrogram) -> Result<Tensor<T>> {
    if lin.kind != SpecKind::Linear || lin.n_bins != N_LINEAR_BINS {
        return Err(contract("posterior encoder expects a linear spectrogram"));
    }
    let v: Vec<f64> = lin.data.iter().map(|x| x.ln_1p()).collect();
    Ok(Tensor::from_f64(&[1, lin.n_bins, lin.n_frames], &v))
}

/// Splits `[1, 2D, T]` into mean and log-scale halves.
fn split_stats<T: Scalar>(c: &Ctx<T>, s: Var, d: usize) -> GaussianFrames {
    GaussianFrames {
        mu: c.g.slice(s, 1, 0, d),
        logs: c.g.slice(s, 1, d, 2 * d),
    }
}

impl SpeechModule {
    pub fn new<T: Scalar>(b: &mut Builder<T>, cfg: &SpeechConfig, d_e: usize) -> Result<Self> {
        cfg.validate()?;
        let one = Conv1dSpec::default();
        let h = cfg.posterior_hidden;
        let post_pre = Conv1d::new(&mut b.sub("post.pre"), N_LINEAR_BINS, h, 1, one);
        let post_wn = WaveNet::new(&mut b.sub("post.wn"), h, cfg.posterior_kernel, 1, cfg.posterior_layers, 0);
        let post_proj = Conv1d::new(&mut b.sub("post.proj"), h, 2 * cfg.d_z, 1, one);
        let w = cfg.connector_width;
        let conn_in = Linear::new(&mut b.sub("conn.in"), d_e, w, true);
        let conn_blocks = (0..cfg.connector_blocks)
            .map(|i| {
                let mut bb = b.sub(&format!("conn.b{i}"));
                ConnectorBlock {
                    att: MultiHeadAttention::new(&mut bb.sub("att"), w, cfg.connector_heads),
                    ln1: LayerNorm::new(&mut bb.sub("ln1"), w),
                    ff: FeedForward::new(&mut bb.sub("ff"), w, cfg.connector_ff),
                    ln2: LayerNorm::new(&mut bb.sub("ln2"), w),
                }
            })
            .collect();
        let conn_proj = Conv1d::new(&mut b.sub("conn.proj"), w, 2 * cfg.d_z, 1, one);
        let flow = Flow::new(
            &mut b.sub("flow"),
            cfg.d_z,
            cfg.flow_hidden,
            cfg.flow_kernel,
            cfg.flow_layers,
            cfg.flow_couplings,
            w,
        )?;
        let generator = Generator::new(
            &mut b.sub("gen"),
            cfg.d_z,
            cfg.gen_channels,
            &cfg.upsample_rates,
            &cfg.resblock_kernels,
            &cfg.resblock_dilations,
        );
        Ok(Self {
            cfg: cfg.clone(),
            post_pre,
            post_wn,
            post_proj,
            conn_in,
            conn_blocks,
            conn_proj,
            flow,
            generator,
        })
    }

    /// `x: [1, bins, T]` from [`posterior_input`]; `noise` is the standard
    /// normal draw `[1, D_z, T]` (zeros give `z = mu`).
    pub fn posterior<T: Scalar>(&self, c: &Ctx<T>, x: Var, noise: Tensor<T>) -> Result<Posterior> {
        let g = c.g;
        let s = g.shape(x);
        if s.len() != 3 || s[1] != N_LINEAR_BINS {
            return Err(contract(format!("posterior input {s:?} is not [1, {N_LINEAR_BINS}, T]")));
        }
        if noise.shape() != [1, self.cfg.d_z, s[2]] {
            return Err(contract("posterior noise shape does not match"));
        }
        let h = self.post_pre.forward(c, x);
        let h = self.post_wn.forward(c, h, None);
        let stats = split_stats(c, self.post_proj.forward(c, h), self.cfg.d_z);
        let eps = g.constant(noise);
        let z = g.add(stats.mu, g.mul(g.exp(stats.logs), eps));
        Ok(Posterior { stats, z })
    }

    /// Transformer over the embedding frames, interpolation to `target_t`
    /// frames and projection to the prior.
    pub fn prior<T: Scalar>(&self, c: &Ctx<T>, e: Var, target_t: usize) -> Result<Prior> {
        let g = c.g;
        let s = g.shape(e);
        if s.len() != 3 || s[0] != 1 || s[2] == 0 {
            return Err(contract(format!("connector needs a non-empty [1, D_e, T] embedding, got {s:?}")));
        }
        if target_t == 0 {
            return Err(contract("connector target length must be at least 1"));
        }
        let (d_e, t_e) = (s[1], s[2]);
        let w = self.cfg.connector_width;
        let x = g.transpose(g.reshape(e, &[d_e, t_e]));
        let pos = g.constant(sinusoidal_positions(t_e, w));
        let mut h = g.add(self.conn_in.forward(c, x), pos);
        for blk in &self.conn_blocks {
            h = blk.ln1.forward(c, g.add(h, blk.att.forward(c, h)));
            h = blk.ln2.forward(c, g.add(h, blk.ff.forward(c, h)));
        }
        let feats = g.reshape(g.transpose(h), &[1, w, t_e]);
        let cond = interpolate_time(g, feats, target_t);
        let stats = split_stats(c, self.conn_proj.forward(c, cond), self.cfg.d_z);
        Ok(Prior { stats, cond })
    }

    /// Slice of `segment_frames` latent frames to a waveform segment.
    pub fn generate_segment<T: Scalar>(&self, c: &Ctx<T>, z: Var) -> Result<Var> {
        let s = c.g.shape(z);
        if s.len() != 3 || s[1] != self.cfg.d_z || s[2] != self.cfg.segment_frames {
            return Err(contract(format!(
                "generator segment must be [1, {}, {}], got {s:?}",
                self.cfg.d_z, self.cfg.segment_frames
            )));
        }
        Ok(self.generator.forward(c, z))
    }

    /// Inference path from an embedding: prior sample at `temperature`,
    /// inverse flow, full-length generation. Returns `[1, 1, hop * target_t]`.
    pub fn decode<T: Scalar>(&self, c: &Ctx<T>, e: Var, target_t: usize, temperature: f64, rng: &mut Rng) -> Result<Var> {
        let g = c.g;
        let p = self.prior(c, e, target_t)?;
        let eps = g.constant(Tensor::randn(&[1, self.cfg.d_z, target_t], temperature, rng));
        let z_p = g.add(p.stats.mu, g.mul(g.exp(p.stats.logs), eps));
        let (z, _) = self.flow.inverse(c, z_p, Some(p.cond))?;
        Ok(self.generator.forward(c, z))
    }
}

/// Single-sample KL estimate: mean over (dim, frame) of
/// `logs_p - logs_q - 1/2 + (z_p - mu_p)^2 exp(-2 logs_p) / 2`, minus
/// `logdet / (D T)`.
pub fn kl_loss<T: Scalar>(
    g: &eegspeech_tensor::Graph<T>,
    q: &GaussianFrames,
    z_p: Var,
    logdet: Var,
    p: &GaussianFrames,
) -> Result<Var> {
    let shape = g.shape(z_p);
    for v in [q.mu, q.logs, p.mu, p.logs] {
        if g.shape(v) != shape {
            return Err(contract(format!("KL operand shape {:?} differs from {shape:?}", g.shape(v))));
        }
    }
    let n: usize = shape.iter().product();
    let diff = g.sub(z_p, p.mu);
    let quad = g.mul(g.square(diff), g.exp(g.scale(p.logs, T::lit(-2.0))));
    let per = g.add(g.sub(p.logs, q.logs), g.add_scalar(g.scale(quad, T::lit(0.5)), T::lit(-0.5)));
    Ok(g.sub(g.mean_all(per), g.scale(logdet, T::lit(1.0 / n as f64))))
}
