//! Second-order-section IIR filters and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

/// One biquad section in direct form II transposed, `a0` normalised to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn lowpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    /// Second-order notch with quality factor `q`.
    pub fn notch(center_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    /// DC gain.
    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `u` produce a constant output.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let s2 = self.b[2] * u - self.a[1] * y;
        let s1 = (self.b[1] + self.b[2]) * u - (self.a[0] + self.a[1]) * y;
        [s1, s2]
    }

    fn run(&self, x: &mut [f64], mut s: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + s[0];
            s[0] = b1 * xin - a1 * y + s[1];
            s[1] = b2 * xin - a2 * y;
            *v = y;
        }
    }

    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z1 + self.a[1] * z2;
        num / den
    }
}

/// Cascade of biquads.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

fn butterworth_qs(order: usize) -> Vec<f64> {
    assert!(order >= 2 && order.is_multiple_of(2), "only even Butterworth orders are supported");
    (0..order / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

impl Sos {
    pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::lowpass(cutoff_hz, q, fs))
                .collect(),
        }
    }

    pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::highpass(cutoff_hz, q, fs))
                .collect(),
        }
    }

    pub fn notch(center_hz: f64, q: f64, fs: f64) -> Self {
        Self {
            sections: vec![Biquad::notch(center_hz, q, fs)],
        }
    }

    pub fn then(mut self, other: Sos) -> Self {
        self.sections.extend(other.sections);
        self
    }

    /// Complex frequency response of the cascade (single pass).
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(freq_hz, fs))
    }

    /// Magnitude of the forward-backward response, `|H|^2`.
    pub fn zero_phase_gain(&self, freq_hz: f64, fs: f64) -> f64 {
        self.response(freq_hz, fs).norm_sqr()
    }

    /// Causal filtering, initial state steady for a constant input `x[0] * init_scale`.
    fn run_steady(&self, x: &mut [f64]) {
        let mut u = x.first().copied().unwrap_or(0.0);
        for s in &self.sections {
            let zi = s.steady_state(u);
            s.run(x, zi);
            u *= s.dc_gain();
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0, 0.0]);
        }
        y
    }

    /// Zero-phase filtering: odd-reflection padding, steady-state initial
    /// conditions, forward pass, backward pass. Linear in `x`.
    pub fn filtfilt(&self, x: &[f64], max_pad: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = max_pad.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
        self.run_steady(&mut ext);
        ext.reverse();
        self.run_steady(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_is_minus_3db_at_cutoff() {
        let fs = 512.0;
        let lp = Sos::butter_lowpass(4, 50.0, fs);
        let hp = Sos::butter_highpass(4, 5.0, fs);
        assert!((lp.response(50.0, fs).norm_sqr() - 0.5).abs() < 1e-9);
        assert!((hp.response(5.0, fs).norm_sqr() - 0.5).abs() < 1e-9);
        assert!((lp.response(0.0, fs).norm() - 1.0).abs() < 1e-12);
        assert!(hp.response(0.0, fs).norm() < 1e-12);
    }

    #[test]
    fn notch_nulls_center() {
        let n = Sos::notch(60.0, 30.0, 512.0);
        assert!(n.response(60.0, 512.0).norm() < 1e-12);
        assert!((n.response(10.0, 512.0).norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn filtfilt_passes_constant_through_lowpass() {
        let lp = Sos::butter_lowpass(4, 10.0, 256.0);
        let y = lp.filtfilt(&[3.0; 100], 300);
        assert!(y.iter().all(|v| (v - 3.0).abs() < 1e-9));
    }

    #[test]
    fn filtfilt_has_no_delay() {
        // a symmetric bump stays centred after zero-phase smoothing
        let x: Vec<f64> = (0..201)
            .map(|i| (-((i as f64 - 100.0) / 10.0).powi(2)).exp())
            .collect();
        let y = Sos::butter_lowpass(4, 20.0, 256.0).filtfilt(&x, 200);
        let argmax = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 100);
    }
}
