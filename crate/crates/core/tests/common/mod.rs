#![allow(dead_code)]

use std::path::Path;

use eegspeech_core::corpus::{generate_corpus, CorpusConfig, CorpusManifest};
use eegspeech_core::eeg::{EegConfig, SsmParams};
use eegspeech_core::frontend::stft::{SpecKind, Spectrogram};
use eegspeech_core::model::ModelConfig;
use eegspeech_core::nn::{Builder, Ctx};
use eegspeech_core::phoneme::PredictorConfig;
use eegspeech_core::rng;
use eegspeech_core::speech::{Flow, SpeechConfig};
use eegspeech_core::trainer::TrainConfig;
use eegspeech_tensor::{Graph, ParamStore, Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Removes repeats, then blanks (id 0).
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != 0 {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

/// `-log` of the total probability of every length-`t` path over `v`
/// symbols that collapses to `target`.
pub fn ctc_by_enumeration(lp: &[f64], t: usize, v: usize, target: &[usize]) -> f64 {
    let mut terms = Vec::new();
    let mut path = vec![0usize; t];
    loop {
        if collapse(&path) == target {
            terms.push((0..t).map(|i| lp[i * v + path[i]]).sum::<f64>());
        }
        let mut i = 0;
        loop {
            if i == t {
                return -logsumexp(&terms);
            }
            path[i] += 1;
            if path[i] < v {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Row-wise log-softmax of `[t, v]` logits.
pub fn log_softmax_rows(logits: &[f64], v: usize) -> Vec<f64> {
    logits
        .chunks(v)
        .flat_map(|row| {
            let z = logsumexp(row);
            row.iter().map(move |x| x - z)
        })
        .collect()
}

/// MCD straight from the definition: explicit DCT-II basis, plain sums.
pub fn mcd_direct(a: &Spectrogram, b: &Spectrogram, n_mcc: usize) -> f64 {
    let n = a.n_bins;
    let mut total = 0.0;
    for t in 0..a.n_frames {
        let mut sq = 0.0;
        for k in 1..=n_mcc {
            let mut ca = 0.0;
            let mut cb = 0.0;
            for i in 0..n {
                let basis = (2.0 / n as f64).sqrt() * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
                ca += basis * a.at(i, t);
                cb += basis * b.at(i, t);
            }
            sq += (ca - cb).powi(2);
        }
        total += 10.0 / std::f64::consts::LN_10 * (2.0 * sq).sqrt();
    }
    total / a.n_frames as f64
}

pub fn mel(n_bins: usize, n_frames: usize, data: Vec<f64>) -> Spectrogram {
    Spectrogram {
        kind: SpecKind::Mel,
        n_bins,
        n_frames,
        hop: 256,
        win: 1024,
        data,
    }
}

/// Overwrites every parameter under `prefix` with `N(0, std^2)` draws.
pub fn randomize<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, std: f64, rng: &mut impl Rng) {
    for id in store.ids_with_prefix(prefix) {
        let shape = store.get(id).shape().to_vec();
        *store.get_mut(id) = Tensor::randn(&shape, std, rng);
    }
}

pub fn tiny_corpus_config(seed: u64) -> CorpusConfig {
    CorpusConfig {
        n_subjects: 2,
        n_sentences: 4,
        n_channels: 4,
        noise_level: 0.01,
        seed,
        ..Default::default()
    }
}

pub fn tiny_corpus(dir: &Path, seed: u64) -> CorpusManifest {
    generate_corpus(&tiny_corpus_config(seed), dir).unwrap()
}

/// Small model widths that keep a training step in the tens of milliseconds.
pub fn tiny_model(n_channels: usize) -> ModelConfig {
    ModelConfig {
        eeg: EegConfig {
            n_channels,
            channels: vec![8, 8],
            strides: vec![1, 3],
            ssm_state_dim: 4,
        },
        speech: SpeechConfig {
            d_z: 4,
            posterior_hidden: 8,
            posterior_layers: 1,
            posterior_kernel: 3,
            connector_width: 8,
            connector_blocks: 1,
            connector_heads: 2,
            connector_ff: 8,
            flow_couplings: 2,
            flow_hidden: 8,
            flow_layers: 1,
            flow_kernel: 3,
            gen_channels: 16,
            upsample_rates: vec![8, 8, 4],
            resblock_kernels: vec![3],
            resblock_dilations: vec![1],
            segment_frames: 8,
            ..Default::default()
        },
        predictor: PredictorConfig {
            d_model: 8,
            heads: 2,
            conv_kernel: 3,
            ff_hidden: 8,
            decoder_hidden: 8,
            embed_dim: 4,
            attention_dim: 8,
            ..Default::default()
        },
    }
}

pub fn tiny_train_config(n_channels: usize, iterations: u64) -> TrainConfig {
    TrainConfig {
        iterations,
        segment_frames: 8,
        heldout_subjects: 1,
        heldout_sentences: 1,
        model: tiny_model(n_channels),
        ..Default::default()
    }
}

pub fn random_flow(channels: usize, cond: usize, seed: u64) -> (ParamStore<f64>, Flow) {
    let mut store = ParamStore::new();
    let mut r = rng::stream(seed, 0, 0);
    let flow = Flow::new(&mut Builder::new(&mut store, &mut r, "flow"), channels, 8, 3, 2, 4, cond).unwrap();
    // The output projection starts at zero (identity flow); draw it at random.
    randomize(&mut store, "flow.", 0.3, &mut r);
    (store, flow)
}

pub fn flow_forward(store: &ParamStore<f64>, flow: &Flow, z: &Tensor<f64>, cond: Option<&Tensor<f64>>) -> (Vec<f64>, f64) {
    let g = Graph::new();
    let c = Ctx::new(&g, store);
    let cv = cond.map(|t| g.constant(t.clone()));
    let (zp, ld) = flow.forward(&c, g.constant(z.clone()), cv).unwrap();
    (g.value(zp).to_f64_vec(), g.item(ld))
}

/// `log |det A|` by Gaussian elimination with partial pivoting.
pub fn log_abs_det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut acc = 0.0;
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if p != col {
            for k in 0..n {
                a.swap(col * n + k, p * n + k);
            }
        }
        let d = a[col * n + col];
        acc += d.abs().ln();
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            for k in col..n {
                a[i * n + k] -= f * a[col * n + k];
            }
        }
    }
    acc
}

pub fn inf_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_ssm(r: &mut ChaCha8Rng, dim: usize, state: usize) -> SsmParams {
    let mut p = SsmParams::random(dim, state, r);
    // Spread the decay rates so slow and fast modes are both exercised.
    for a in p.a.iter_mut() {
        *a = r.gen_range(-3.0..1.0);
    }
    p
}
