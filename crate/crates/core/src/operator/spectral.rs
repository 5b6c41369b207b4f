//! Fourier-symbol backend for periodic grids.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Multiplies the discrete Fourier modes of `u` by `symbol(|ξ_k|)`, where
/// ξ_k = 2πk / period for the signed frequency index k.
pub fn apply_symbol(u: &[f64], period: f64, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = u.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = u.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = (2.0 * PI * signed / period).abs();
        let m = if xi == 0.0 { 0.0 } else { symbol(xi) };
        *c *= m;
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn fft_rows(buf: &mut [Complex<f64>], m: usize, plan: &dyn rustfft::Fft<f64>) {
    for row in buf.chunks_mut(m) {
        plan.process(row);
    }
}

fn transpose(buf: &[Complex<f64>], m: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); m * m];
    for r in 0..m {
        for c in 0..m {
            out[c * m + r] = buf[r * m + c];
        }
    }
    out
}

fn fft2(buf: Vec<Complex<f64>>, m: usize, plan: &dyn rustfft::Fft<f64>) -> Vec<Complex<f64>> {
    let mut b = buf;
    fft_rows(&mut b, m, plan);
    let mut t = transpose(&b, m);
    fft_rows(&mut t, m, plan);
    transpose(&t, m)
}

/// Aperiodic 2-D convolution `out_i = Σ_j K(i - j) u_j` on an n×n grid, with
/// K given on offsets |k₁|, |k₂| < n. Uses a zero-padded 2n×2n FFT.
#[derive(Clone)]
pub struct Conv2d {
    n: usize,
    m: usize,
    kernel_hat: Vec<Complex<f64>>,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Conv2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Conv2d").field("n", &self.n).finish()
    }
}

impl Conv2d {
    /// `kernel(k1, k2)` for signed offsets.
    pub fn new(n: usize, kernel: impl Fn(isize, isize) -> f64) -> Self {
        let m = 2 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut buf = vec![Complex::new(0.0, 0.0); m * m];
        let ni = n as isize;
        for k2 in -(ni - 1)..ni {
            for k1 in -(ni - 1)..ni {
                let r = k2.rem_euclid(m as isize) as usize;
                let c = k1.rem_euclid(m as isize) as usize;
                buf[r * m + c] = Complex::new(kernel(k1, k2), 0.0);
            }
        }
        let kernel_hat = fft2(buf, m, fwd.as_ref());
        Self { n, m, kernel_hat, fwd, inv }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        assert_eq!(u.len(), n * n);
        let mut buf = vec![Complex::new(0.0, 0.0); m * m];
        for i2 in 0..n {
            for i1 in 0..n {
                buf[i2 * m + i1] = Complex::new(u[i2 * n + i1], 0.0);
            }
        }
        let mut b = fft2(buf, m, self.fwd.as_ref());
        for (x, k) in b.iter_mut().zip(&self.kernel_hat) {
            *x *= k;
        }
        let b = fft2(b, m, self.inv.as_ref());
        let scale = 1.0 / (m * m) as f64;
        let mut out = vec![0.0; n * n];
        for i2 in 0..n {
            for i1 in 0..n {
                out[i2 * n + i1] = b[i2 * m + i1].re * scale;
            }
        }
        out
    }
}

/// Symmetric Toeplitz product `out_i = Σ_{j≠i} t_{|i-j|} u_j` by circulant
/// embedding.
#[derive(Clone)]
pub struct Conv1d {
    n: usize,
    kernel_hat: Vec<Complex<f64>>,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Conv1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Conv1d").field("n", &self.n).finish()
    }
}

impl Conv1d {
    /// `t[0]` is ignored.
    pub fn new(t: &[f64]) -> Self {
        let n = t.len();
        let m = 2 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for k in 1..n {
            buf[k] = Complex::new(t[k], 0.0);
            buf[m - k] = Complex::new(t[k], 0.0);
        }
        fwd.process(&mut buf);
        Self { n, kernel_hat: buf, fwd, inv }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (b, &x) in buf.iter_mut().zip(u) {
            *b = Complex::new(x, 0.0);
        }
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        buf[..n].iter().map(|c| c.re / m as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn conv1d_matches_direct(t in prop::collection::vec(-1.0..1.0f64, 2..40), seed in 0u64..1000) {
            let n = t.len();
            let u: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
            let fast = Conv1d::new(&t).apply(&u);
            for i in 0..n {
                let direct: f64 = (0..n).filter(|&j| j != i).map(|j| t[i.abs_diff(j)] * u[j]).sum();
                prop_assert!((fast[i] - direct).abs() < 1e-12 * (1.0 + direct.abs()) * n as f64);
            }
        }

        #[test]
        fn conv2d_matches_direct(n in 2usize..9, seed in 0u64..1000) {
            let kern = |a: isize, b: isize| 1.0 / (1.0 + (a * a + 2 * b * b) as f64) + 0.1 * b as f64;
            let u: Vec<f64> = (0..n * n).map(|i| ((i as u64 * 104729 + seed) % 97) as f64 / 48.0 - 1.0).collect();
            let fast = Conv2d::new(n, kern).apply(&u);
            for i2 in 0..n {
                for i1 in 0..n {
                    let mut direct = 0.0;
                    for j2 in 0..n {
                        for j1 in 0..n {
                            direct += kern(i1 as isize - j1 as isize, i2 as isize - j2 as isize) * u[j2 * n + j1];
                        }
                    }
                    prop_assert!((fast[i2 * n + i1] - direct).abs() < 1e-11 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn symbol_of_mean_is_zero() {
        let u = vec![3.0; 32];
        let out = apply_symbol(&u, 5.0, |xi| xi * xi);
        assert!(out.iter().all(|v| v.abs() < 1e-13));
    }
}
