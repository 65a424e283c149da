//! Iterative radix-2 FFT over power-of-two sizes.

use num_complex::Complex64;

pub struct Fft {
    n: usize,
    // exp(-2πi k / n) for k < n/2
    twiddles: Vec<Complex64>,
}

impl Fft {
    /// `n` must be a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2, "FFT size must be a power of two, got {n}");
        let twiddles = (0..n / 2)
            .map(|k| {
                let phase = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect();
        Self { n, twiddles }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    /// Inverse transform including the 1/n scaling.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n);

        // bit-reversal permutation
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }

        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            len *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ph = -2.0 * PI * (k * t) as f64 / n as f64;
                    acc += v * Complex64::new(ph.cos(), ph.sin());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[2usize, 8, 64, 256] {
            let x: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(((i * 37 + 11) % 17) as f64 - 8.0, ((i * 53) % 13) as f64 - 6.0))
                .collect();
            let want = naive_dft(&x);
            let mut got = x.clone();
            Fft::new(n).forward(&mut got);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let n = 512;
        let x: Vec<Complex64> =
            (0..n).map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())).collect();
        let fft = Fft::new(n);
        let mut buf = x.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
