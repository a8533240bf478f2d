//! Band-limited rational resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

const ZERO_CROSSINGS: f64 = 16.0;
const ROLLOFF: f64 = 0.94;
const KAISER_BETA: f64 = 8.6;
const MAX_TABLE_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resampling kernel for one `from -> to` rate pair.
struct Kernel {
    /// Cutoff in cycles per input sample.
    fc: f64,
    /// Half-width in input samples.
    half: f64,
    norm_i0: f64,
}

impl Kernel {
    fn new(from: u64, to: u64) -> Self {
        let ratio = (to as f64 / from as f64).min(1.0);
        let fc = 0.5 * ratio * ROLLOFF;
        Self {
            fc,
            half: ZERO_CROSSINGS / (2.0 * fc),
            norm_i0: bessel_i0(KAISER_BETA),
        }
    }

    fn tap(&self, dist: f64) -> f64 {
        let r = dist / self.half;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let win = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.norm_i0;
        2.0 * self.fc * sinc(2.0 * self.fc * dist) * win
    }

    /// Taps for input indices `base - lo ..= base + hi` around fractional
    /// position `base + frac`, normalised to unit DC gain.
    fn taps(&self, frac: f64) -> (isize, Vec<f64>) {
        let lo = (frac - self.half).ceil() as isize;
        let hi = (frac + self.half).floor() as isize;
        let mut t: Vec<f64> = (lo..=hi).map(|k| self.tap(frac - k as f64)).collect();
        let s: f64 = t.iter().sum();
        if s.abs() > 1e-12 {
            for v in &mut t {
                *v /= s;
            }
        }
        (lo, t)
    }
}

/// Output length for `n` input samples, rounded to the nearest sample.
pub fn resampled_len(n: usize, from: u32, to: u32) -> usize {
    ((n as u64 * to as u64 + from as u64 / 2) / from as u64) as usize
}

/// Resamples `x` from `from` Hz to `to` Hz. Linear in `x`; samples outside
/// the signal are treated as zero.
pub fn resample(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    assert!(from > 0 && to > 0, "rates must be positive");
    if from == to {
        return x.to_vec();
    }
    let g = gcd(from as u64, to as u64);
    let (up, down) = (to as u64 / g, from as u64 / g);
    let kernel = Kernel::new(from as u64, to as u64);
    let n_out = resampled_len(x.len(), from, to);
    let table: Option<Vec<(isize, Vec<f64>)>> = (up <= MAX_TABLE_PHASES)
        .then(|| (0..up).map(|p| kernel.taps(p as f64 / up as f64)).collect());
    let n = x.len() as isize;
    (0..n_out as u64)
        .map(|i| {
            let num = i * down;
            let base = (num / up) as isize;
            let phase = num % up;
            let owned;
            let (lo, taps) = match &table {
                Some(t) => (t[phase as usize].0, &t[phase as usize].1),
                None => {
                    owned = kernel.taps(phase as f64 / up as f64);
                    (owned.0, &owned.1)
                }
            };
            let mut acc = 0.0;
            for (j, &w) in taps.iter().enumerate() {
                let idx = base + lo + j as isize;
                if idx >= 0 && idx < n {
                    acc += w * x[idx as usize];
                }
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_rates_match() {
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(resample(&x, 22050, 22050), x);
    }

    #[test]
    fn length_rounding() {
        assert_eq!(resampled_len(44100, 44100, 22050), 22050);
        assert_eq!(resampled_len(1001, 512, 256), 501);
        assert_eq!(resampled_len(48000, 48000, 22050), 22050);
    }

    #[test]
    fn dc_is_preserved_in_the_interior() {
        let x = vec![1.0; 2000];
        let y = resample(&x, 48000, 22050);
        for v in &y[100..y.len() - 100] {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }
}
