use std::f64::consts::PI;

use eegspeech_tensor::{Graph, Scalar, Tensor, Var};

use crate::frontend::stft::{hann_window, n_frames, MelFilterbank, HOP, MEL_FLOOR, N_FFT, N_LINEAR_BINS};
use crate::nn::reflect_pad;

/// Small constant inside the magnitude square root keeping its gradient finite.
pub const MAG_EPS: f64 = 1e-9;

/// Log-mel spectrogram on the tape, matching the frontend framing.
pub struct MelTransform<T: Scalar> {
    /// Windowed cosine and sine basis `[N_FFT, 2 * N_LINEAR_BINS]`.
    basis: Tensor<T>,
    /// Filterbank transposed to `[N_LINEAR_BINS, n_mels]`.
    fb_t: Tensor<T>,
    pub n_mels: usize,
}

impl<T: Scalar> MelTransform<T> {
    pub fn standard() -> Self {
        let win = hann_window(N_FFT);
        let cols = 2 * N_LINEAR_BINS;
        let mut basis = vec![0.0; N_FFT * cols];
        for k in 0..N_FFT {
            for j in 0..N_LINEAR_BINS {
                let a = 2.0 * PI * (j * k % N_FFT) as f64 / N_FFT as f64;
                basis[k * cols + j] = win[k] * a.cos();
                basis[k * cols + N_LINEAR_BINS + j] = -win[k] * a.sin();
            }
        }
        let fb = MelFilterbank::standard();
        let mut fb_t = vec![0.0; N_LINEAR_BINS * fb.n_mels];
        for m in 0..fb.n_mels {
            for (k, &w) in fb.row(m).iter().enumerate() {
                fb_t[k * fb.n_mels + m] = w;
            }
        }
        Self {
            basis: Tensor::from_f64(&[N_FFT, cols], &basis),
            fb_t: Tensor::from_f64(&[N_LINEAR_BINS, fb.n_mels], &fb_t),
            n_mels: fb.n_mels,
        }
    }

    /// Waveform of any shape with `L` elements -> `[L / hop + 1, n_mels]`.
    pub fn forward(&self, g: &Graph<T>, w: Var) -> Var {
        let len: usize = g.shape(w).iter().product();
        let flat = g.reshape(w, &[1, len]);
        let half = N_FFT / 2;
        let padded = reflect_pad(g, flat, half, half);
        let frames = n_frames(len, HOP);
        let idx: Vec<usize> = (0..frames)
            .flat_map(|t| (0..N_FFT).map(move |k| t * HOP + k))
            .collect();
        let x = g.gather_flat(padded, &idx, &[frames, N_FFT]);
        let spec = g.matmul(x, g.constant(self.basis.clone()));
        let re = g.slice(spec, 1, 0, N_LINEAR_BINS);
        let im = g.slice(spec, 1, N_LINEAR_BINS, 2 * N_LINEAR_BINS);
        let power = g.add_scalar(g.add(g.square(re), g.square(im)), T::lit(MAG_EPS));
        let mag = g.sqrt(power);
        let mel = g.matmul(mag, g.constant(self.fb_t.clone()));
        g.log(g.clamp_min(mel, T::lit(MEL_FLOOR)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{stft, Waveform};

    #[test]
    fn matches_frontend_log_mel() {
        let n = 4096;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 440.0 * i as f64 / 22050.0).sin() * 0.5 + 0.1 * (i as f64 * 0.37).cos())
            .collect();
        let mut lin = stft::linear_spectrogram(&Waveform::new(samples.clone(), 22050)).unwrap();
        lin.data.iter_mut().for_each(|m| *m = (*m * *m + MAG_EPS).sqrt());
        let reference = stft::mel_spectrogram(&lin).unwrap();
        let g = Graph::<f64>::new();
        let w = g.constant(Tensor::from_f64(&[1, 1, n], &samples));
        let mt = MelTransform::<f64>::standard();
        let out = g.value(mt.forward(&g, w));
        assert_eq!(out.shape(), &[reference.n_frames, reference.n_bins]);
        for t in 0..reference.n_frames {
            for m in 0..reference.n_bins {
                let a = out.at(&[t, m]);
                let b = reference.at(m, t);
                assert!((a - b).abs() < 1e-8, "frame {t} band {m}: {a} vs {b}");
            }
        }
    }
}
