//! Deterministic stimulus synthesis: tone-burst speech and mixed-indicator EEG.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::frontend::Sos;

pub const CROSSFADE_SEC: f64 = 0.010;
pub const INDICATOR_CUTOFF_HZ: f64 = 40.0;
const AMP_LOW: f64 = 0.45;
const AMP_HIGH: f64 = 0.25;

/// Frequencies and duration of the burst for the phoneme with id `id`
/// (1-based) in an inventory of `n` symbols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToneSpec {
    pub f_low: f64,
    pub f_high: f64,
    pub duration_sec: f64,
}

pub fn tone_spec(id: usize, n: usize) -> ToneSpec {
    assert!(id >= 1 && id <= n, "phoneme id {id} outside 1..={n}");
    let i = id - 1;
    ToneSpec {
        f_low: 180.0 + 24.0 * i as f64,
        f_high: 1400.0 + 113.0 * ((7 * i) % n) as f64,
        duration_sec: (80 + 10 * ((3 * i) % 9)) as f64 / 1000.0,
    }
}

/// One phoneme occupying samples `[start, end)` of the audio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: usize,
    pub start: usize,
    pub end: usize,
}

/// Sample boundaries of consecutive bursts; they tile `[0, total)`.
pub fn layout(ids: &[usize], n: usize, rate_hz: u32) -> Vec<Segment> {
    let mut t = 0.0;
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let start = (t * rate_hz as f64).round() as usize;
        t += tone_spec(id, n).duration_sec;
        let end = (t * rate_hz as f64).round() as usize;
        out.push(Segment { id, start, end });
    }
    out
}

/// Concatenated two-partial tone bursts with linear crossfades centred on
/// each internal boundary.
pub fn synthesize_speech(ids: &[usize], n: usize, rate_hz: u32) -> (Vec<f64>, Vec<Segment>) {
    let segs = layout(ids, n, rate_hz);
    let total = segs.last().map_or(0, |s| s.end);
    let half = (CROSSFADE_SEC * rate_hz as f64 / 2.0).round() as usize;
    let mut audio = vec![0.0; total];
    for (j, seg) in segs.iter().enumerate() {
        let spec = tone_spec(seg.id, n);
        let first = j == 0;
        let last = j + 1 == segs.len();
        let lo = if first { 0 } else { seg.start.saturating_sub(half) };
        let hi = if last { total } else { (seg.end + half).min(total) };
        for (t, out) in audio.iter_mut().enumerate().take(hi).skip(lo) {
            let mut gain = 1.0;
            if !first && t < seg.start + half {
                gain = ((t + half - seg.start) as f64 + 0.5) / (2 * half) as f64;
            }
            if !last && t + half >= seg.end {
                gain = ((seg.end + half - t) as f64 - 0.5) / (2 * half) as f64;
            }
            let tau = (t as f64 - seg.start as f64) / rate_hz as f64;
            let v = AMP_LOW * (2.0 * PI * spec.f_low * tau).sin()
                + AMP_HIGH * (2.0 * PI * spec.f_high * tau).sin();
            *out += gain * v;
        }
    }
    (audio, segs)
}

/// One-hot phoneme indicator sampled at `eeg_rate`, `[n x n_samples]` with
/// row `id - 1` active inside each segment, low-passed at 40 Hz.
pub fn phoneme_indicator(
    segs: &[Segment],
    n: usize,
    audio_rate: u32,
    eeg_rate: u32,
    n_samples: usize,
) -> Vec<f64> {
    let mut ind = vec![0.0; n * n_samples];
    let mut j = 0;
    for t in 0..n_samples {
        let a = t as f64 * audio_rate as f64 / eeg_rate as f64;
        while j + 1 < segs.len() && a >= segs[j].end as f64 {
            j += 1;
        }
        if let Some(s) = segs.get(j) {
            ind[(s.id - 1) * n_samples + t] = 1.0;
        }
    }
    let lp = Sos::butter_lowpass(4, INDICATOR_CUTOFF_HZ, eeg_rate as f64);
    for row in ind.chunks_mut(n_samples) {
        let y = lp.filtfilt(row, 3 * eeg_rate as usize);
        row.copy_from_slice(&y);
    }
    ind
}

/// Random `[rows x cols]` matrix with orthonormal rows when `rows <= cols`,
/// orthonormal columns otherwise.
pub fn orthonormal_mixing<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let mut m: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    if rows <= cols {
        gram_schmidt(&mut m, rows, cols);
        m
    } else {
        let mut t = transpose(&m, rows, cols);
        gram_schmidt(&mut t, cols, rows);
        transpose(&t, cols, rows)
    }
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

/// Modified Gram-Schmidt over the `k` rows of a row-major `[k x len]` matrix.
fn gram_schmidt(m: &mut [f64], k: usize, len: usize) {
    for i in 0..k {
        for j in 0..i {
            let (head, tail) = m.split_at_mut(i * len);
            let prev = &head[j * len..(j + 1) * len];
            let row = &mut tail[..len];
            let d: f64 = prev.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
            for (r, p) in row.iter_mut().zip(prev) {
                *r -= d * p;
            }
        }
        let row = &mut m[i * len..(i + 1) * len];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
}

/// `mixing [ch x n] * indicator [n x t] + noise`, channel-major.
pub fn mix_eeg<R: Rng>(
    mixing: &[f64],
    n_channels: usize,
    indicator: &[f64],
    n: usize,
    noise_level: f64,
    rng: &mut R,
) -> Vec<f64> {
    let t = indicator.len() / n;
    let mut out = vec![0.0; n_channels * t];
    for c in 0..n_channels {
        let dst = &mut out[c * t..(c + 1) * t];
        for k in 0..n {
            let w = mixing[c * n + k];
            for (d, &x) in dst.iter_mut().zip(&indicator[k * t..(k + 1) * t]) {
                *d += w * x;
            }
        }
    }
    if noise_level > 0.0 {
        for v in &mut out {
            let e: f64 = StandardNormal.sample(rng);
            *v += noise_level * e;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn tone_specs_are_in_range_and_distinct() {
        let n = 40;
        let mut lows = Vec::new();
        for id in 1..=n {
            let s = tone_spec(id, n);
            assert!((0.08..=0.16 + 1e-12).contains(&s.duration_sec));
            assert!(s.f_high < 11025.0);
            lows.push(s.f_low);
        }
        lows.dedup();
        assert_eq!(lows.len(), n);
    }

    #[test]
    fn bursts_tile_and_stay_bounded() {
        let ids = [3, 17, 5];
        let (audio, segs) = synthesize_speech(&ids, 40, 22050);
        assert_eq!(audio.len(), segs[2].end);
        assert_eq!(segs[0].start, 0);
        for w in segs.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!(audio.iter().all(|v| v.abs() <= 0.7 + 1e-12));
    }

    #[test]
    fn mixing_is_orthonormal() {
        let mut r = rng::stream(1, rng::tag::MIXING, 0);
        let m = orthonormal_mixing(&mut r, 4, 10);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..10).map(|k| m[i * 10 + k] * m[j * 10 + k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let m = orthonormal_mixing(&mut r, 10, 4);
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = (0..10).map(|k| m[k * 4 + i] * m[k * 4 + j]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
