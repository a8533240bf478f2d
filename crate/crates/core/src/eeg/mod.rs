//! EEG encoder (strided conv blocks plus a state-space layer), mirrored
//! transposed-conv decoder, and the channel-wise cosine reconstruction loss.

pub mod ssm;

use eegspeech_tensor::{Conv1dSpec, Graph, Scalar, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::nn::{Builder, Conv1d, ConvTranspose1d, Ctx, LayerNorm, Linear};
pub use ssm::{SsmLayer, SsmParams};

pub const ENC_KERNEL: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EegConfig {
    pub n_channels: usize,
    /// Output width of each conv block; the last one is the embedding width.
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub ssm_state_dim: usize,
}

impl Default for EegConfig {
    fn default() -> Self {
        Self {
            n_channels: 16,
            channels: vec![64, 64, 64],
            strides: vec![1, 1, 3],
            ssm_state_dim: 16,
        }
    }
}

impl EegConfig {
    pub fn d_e(&self) -> usize {
        *self.channels.last().expect("validated")
    }

    pub fn total_stride(&self) -> usize {
        self.strides.iter().product()
    }

    pub fn frame_rate_hz(&self, eeg_rate: u32) -> f64 {
        eeg_rate as f64 / self.total_stride() as f64
    }

    /// `ceil(samples / r_total)`.
    pub fn frames_for(&self, samples: usize) -> usize {
        samples.div_ceil(self.total_stride())
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.len() != self.strides.len() {
            return Err(config("EEG conv blocks need one stride per channel width"));
        }
        if self.n_channels == 0 || self.ssm_state_dim == 0 || self.channels.contains(&0) {
            return Err(config("EEG dimensions must be at least 1"));
        }
        if self.strides.contains(&0) || !(2..=4).contains(&self.total_stride()) {
            return Err(config(format!(
                "EEG encoder total stride must be 2, 3 or 4, got {}",
                self.total_stride()
            )));
        }
        Ok(())
    }
}

/// Conv, channel layer norm, GLU.
#[derive(Clone, Debug)]
struct EncBlock {
    conv: Conv1d,
    norm: LayerNorm,
    stride: usize,
}

#[derive(Clone, Debug)]
struct DecBlock {
    up: ConvTranspose1d,
    norm: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct EegModule {
    pub cfg: EegConfig,
    enc: Vec<EncBlock>,
    ssm: SsmLayer,
    ssm_out: Linear,
    dec: Vec<DecBlock>,
    dec_out: Conv1d,
}

/// Padding that makes a stride-`s`, kernel-`k` conv emit `ceil(t / s)` frames.
fn strided_same(t: usize, k: usize, s: usize) -> Conv1dSpec {
    let total = s * (t.div_ceil(s) - 1) + k - t;
    let left = ((k - 1) / 2).min(total);
    Conv1dSpec {
        stride: s,
        pad_left: left,
        pad_right: total - left,
        ..Conv1dSpec::default()
    }
}

impl EegModule {
    pub fn new<T: Scalar>(b: &mut Builder<T>, cfg: &EegConfig) -> Result<Self> {
        cfg.validate()?;
        let mut enc = Vec::new();
        let mut c_in = cfg.n_channels;
        for (i, (&c, &s)) in cfg.channels.iter().zip(&cfg.strides).enumerate() {
            let mut bb = b.sub(&format!("enc{i}"));
            enc.push(EncBlock {
                conv: Conv1d::new(&mut bb.sub("conv"), c_in, 2 * c, ENC_KERNEL, Conv1dSpec::default()),
                norm: LayerNorm::new(&mut bb.sub("norm"), 2 * c),
                stride: s,
            });
            c_in = c;
        }
        let d_e = cfg.d_e();
        let ssm = SsmLayer::new(&mut b.sub("ssm"), d_e, cfg.ssm_state_dim)?;
        let ssm_out = Linear::new(&mut b.sub("ssm_out"), d_e, d_e, true);
        let mut dec = Vec::new();
        let n = cfg.channels.len();
        for i in 0..n {
            // mirror: walk the encoder backwards
            let j = n - 1 - i;
            let s = cfg.strides[j];
            let c_out = if j == 0 { cfg.channels[0] } else { cfg.channels[j - 1] };
            let mut bb = b.sub(&format!("dec{i}"));
            dec.push(DecBlock {
                up: ConvTranspose1d::new(&mut bb.sub("up"), cfg.channels[j], 2 * c_out, s + 2, s, (1, 1)),
                norm: LayerNorm::new(&mut bb.sub("norm"), 2 * c_out),
            });
        }
        let dec_out = Conv1d::new(&mut b.sub("dec_out"), cfg.channels[0], cfg.n_channels, 1, Conv1dSpec::default());
        Ok(Self {
            cfg: cfg.clone(),
            enc,
            ssm,
            ssm_out,
            dec,
            dec_out,
        })
    }

    pub fn ssm(&self) -> &SsmLayer {
        &self.ssm
    }

    /// `[B, N_ch, T] -> [B, D_e, ceil(T / r_total)]`.
    pub fn encode<T: Scalar>(&self, c: &Ctx<T>, x: Var) -> Result<Var> {
        let g = c.g;
        let shape = g.shape(x);
        if shape.len() != 3 || shape[1] != self.cfg.n_channels {
            return Err(contract(format!(
                "EEG input shape {shape:?} does not match {} channels",
                self.cfg.n_channels
            )));
        }
        if shape[2] == 0 {
            return Err(contract("empty EEG input"));
        }
        let mut h = x;
        for blk in &self.enc {
            let t = g.shape(h)[2];
            let spec = strided_same(t, ENC_KERNEL, blk.stride);
            let y = g.conv1d(h, c.p(blk.conv.w), blk.conv.b.map(|b| c.p(b)), spec);
            let y = blk.norm.forward_channels(c, y);
            h = g.glu(y, 1);
        }
        let s = self.ssm.forward(c, h);
        let s = g.silu(s);
        let st = g.transpose(s);
        let proj = self.ssm_out.forward(c, st);
        Ok(g.add(h, g.transpose(proj)))
    }

    /// `[B, D_e, T_e] -> [B, N_ch, r_total * T_e]`.
    pub fn decode<T: Scalar>(&self, c: &Ctx<T>, e: Var) -> Result<Var> {
        let g = c.g;
        let shape = g.shape(e);
        if shape.len() != 3 || shape[1] != self.cfg.d_e() {
            return Err(contract(format!(
                "embedding shape {shape:?} does not match width {}",
                self.cfg.d_e()
            )));
        }
        let mut h = e;
        for blk in &self.dec {
            let y = blk.up.forward(c, h);
            let y = blk.norm.forward_channels(c, y);
            h = g.glu(y, 1);
        }
        Ok(self.dec_out.forward(c, h))
    }
}

/// Per-recording unit-RMS scaling of channel-major EEG.
pub fn normalize_rms(data: &[f64]) -> Vec<f64> {
    let rms = (data.iter().map(|v| v * v).sum::<f64>() / data.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        data.iter().map(|v| v / rms).collect()
    } else {
        data.to_vec()
    }
}

/// Output of [`recon_loss`].
pub struct ReconLoss {
    pub loss: Var,
    /// Channels where either input had zero norm (counted as cosine 0).
    pub zero_norm_channels: usize,
}

/// `1 - mean_i cos(x_i, x_hat_i)` over the channels of `[B, C, T]` tensors,
/// averaged over the batch.
pub fn recon_loss<T: Scalar>(g: &Graph<T>, x: Var, x_hat: Var) -> Result<ReconLoss> {
    let shape = g.shape(x);
    if shape != g.shape(x_hat) || shape.len() != 3 {
        return Err(contract(format!(
            "reconstruction shapes differ: {shape:?} vs {:?}",
            g.shape(x_hat)
        )));
    }
    let (rows, len) = (shape[0] * shape[1], shape[2]);
    let n_ch = shape[1];
    let xv = g.value(x).to_f64_vec();
    let yv = g.value(x_hat).to_f64_vec();
    struct Row {
        nx: f64,
        ny: f64,
        cos: f64,
    }
    let mut stats = Vec::with_capacity(rows);
    let mut zero = 0;
    let mut total = 0.0;
    for r in 0..rows {
        let (a, b) = (&xv[r * len..(r + 1) * len], &yv[r * len..(r + 1) * len]);
        let nx = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = if nx > 0.0 && ny > 0.0 {
            a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / (nx * ny)
        } else {
            zero += 1;
            0.0
        };
        total += cos;
        stats.push(Row { nx, ny, cos });
    }
    let batch = shape[0] as f64;
    let value = 1.0 - total / (n_ch as f64 * batch);
    let loss = g.custom(&[x, x_hat], Tensor::scalar(T::lit(value)), move |grad| {
        let scale = -grad.item().as_f64() / (n_ch as f64 * batch);
        let mut gx = vec![0.0; rows * len];
        let mut gy = vec![0.0; rows * len];
        for (r, s) in stats.iter().enumerate() {
            if s.nx == 0.0 || s.ny == 0.0 {
                continue;
            }
            for t in 0..len {
                let i = r * len + t;
                gx[i] = scale * (yv[i] / (s.nx * s.ny) - s.cos * xv[i] / (s.nx * s.nx));
                gy[i] = scale * (xv[i] / (s.nx * s.ny) - s.cos * yv[i] / (s.ny * s.ny));
            }
        }
        vec![
            Some(Tensor::from_f64(&shape, &gx)),
            Some(Tensor::from_f64(&shape, &gy)),
        ]
    });
    Ok(ReconLoss {
        loss,
        zero_norm_channels: zero,
    })
}
