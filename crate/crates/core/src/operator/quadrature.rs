//! Singular-integral quadrature for (-Δ)^s on uniform 1-D grids.
//!
//! With g(z) = 2u(x) - u(x+z) - u(x-z) the operator is
//! c₁(s) ∫₀^∞ g(z) z^{-1-2s} dz. Writing g = z² q with q even and smooth,
//! the integral becomes ∫ q(z) z^{1-2s} dz, which is evaluated by
//! interpolating q linearly between grid offsets z = kh and integrating the
//! hat functions against z^{1-2s} exactly (product integration). The value
//! q(0) = -u''(x) is Richardson-extrapolated from q(h) and q(2h). Beyond the
//! point where both x ± z have left the grid, g is constant and the tail is
//! integrated in closed form.

use rayon::prelude::*;

use crate::special::gl10;

/// Weights in units of h^{-2s}: the integral at a node is
/// `h^{-2s} * (Σ_{k<K} full[k] g_k + left_half[K] g_K + g_∞ K^{-2s}/(2s))`.
#[derive(Debug, Clone)]
pub struct OffsetWeights {
    pub s: f64,
    /// Index 0 unused.
    pub full: Vec<f64>,
    /// Weight of offset K when K is the last resolved offset.
    pub left_half: Vec<f64>,
}

fn full_hat_moment(k: usize, p: f64) -> f64 {
    let g = gl10();
    let kf = k as f64;
    let left = if k == 1 {
        1.0 / (p + 2.0)
    } else {
        g.integrate(kf - 1.0, kf, |t| (t - kf + 1.0) * t.powf(p))
    };
    let right = g.integrate(kf, kf + 1.0, |t| (kf + 1.0 - t) * t.powf(p));
    left + right
}

fn left_half_moment(k: usize, p: f64) -> f64 {
    let kf = k as f64;
    if k == 1 {
        1.0 / (p + 2.0)
    } else {
        gl10().integrate(kf - 1.0, kf, |t| (t - kf + 1.0) * t.powf(p))
    }
}

/// Raw hat moments against t^p: `left[k] = ∫_{k-1}^k (t-k+1) t^p dt` and
/// `right[k] = ∫_k^{k+1} (k+1-t) t^p dt`, for k in 0..=kmax (left[0] = 0).
pub(crate) fn hat_moments(p: f64, kmax: usize) -> (Vec<f64>, Vec<f64>) {
    let g = gl10();
    let left: Vec<f64> = (0..=kmax)
        .into_par_iter()
        .map(|k| if k == 0 { 0.0 } else { left_half_moment(k, p) })
        .collect();
    let right: Vec<f64> = (0..=kmax)
        .into_par_iter()
        .map(|k| {
            let kf = k as f64;
            if k == 0 {
                1.0 / (p + 1.0) - 1.0 / (p + 2.0)
            } else {
                g.integrate(kf, kf + 1.0, |t| (kf + 1.0 - t) * t.powf(p))
            }
        })
        .collect();
    (left, right)
}

impl OffsetWeights {
    /// Weights for offsets 1..=kmax.
    pub fn new(s: f64, kmax: usize) -> Self {
        let p = 1.0 - 2.0 * s;
        let b0 = 1.0 / (p + 1.0) - 1.0 / (p + 2.0);
        let kmax = kmax.max(2);
        let moments: Vec<f64> = (1..=kmax).into_par_iter().map(|k| full_hat_moment(k, p)).collect();
        let halves: Vec<f64> = (1..=kmax).into_par_iter().map(|k| left_half_moment(k, p)).collect();
        let mut full = vec![0.0; kmax + 1];
        let mut left_half = vec![0.0; kmax + 1];
        for k in 1..=kmax {
            let k2 = (k * k) as f64;
            full[k] = moments[k - 1] / k2;
            left_half[k] = halves[k - 1] / k2;
        }
        // q(0) ≈ (4 q(h) - q(2h)) / 3
        let c1 = b0 * 4.0 / 3.0;
        let c2 = -b0 / 3.0 / 4.0;
        full[1] += c1;
        full[2] += c2;
        left_half[2] += c2;
        Self { s, full, left_half }
    }

    pub fn tail(&self, k: usize) -> f64 {
        (k as f64).powf(-2.0 * self.s) / (2.0 * self.s)
    }
}

/// A symmetric operator on a non-periodic grid:
/// `out_i = diag_i u_i - Σ_{j≠i} toeplitz_{|i-j|} u_j - lcoef_i L - rcoef_i R`
/// where L, R are the far-field values.
#[derive(Debug, Clone)]
pub struct Toeplitz1d {
    pub diag: Vec<f64>,
    pub toeplitz: Vec<f64>,
    pub lcoef: Vec<f64>,
    pub rcoef: Vec<f64>,
}

impl Toeplitz1d {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], toeplitz: vec![0.0; n], lcoef: vec![0.0; n], rcoef: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Adds `scale * c₁(s)`-free fractional part; caller folds the constant
    /// and h^{-2s} into `scale`.
    pub fn add_fractional(&mut self, w: &OffsetWeights, scale: f64) {
        let n = self.n();
        for k in 1..n {
            self.toeplitz[k] += scale * w.full[k];
        }
        let mut cum = vec![0.0; n + 1];
        for k in 1..=n {
            cum[k] = cum[k - 1] + w.full[k];
        }
        for i in 0..n {
            let kk = i.max(n - 1 - i) + 1;
            // offsets k < kk; right neighbour leaves the grid for k >= n-i,
            // left neighbour for k > i
            let mut d = 2.0 * cum[kk - 1];
            let mut r = cum[kk - 1] - cum[(n - i - 1).min(kk - 1)];
            let mut l = cum[kk - 1] - cum[i.min(kk - 1)];
            let last = w.left_half[kk] + w.tail(kk);
            d += 2.0 * last;
            l += last;
            r += last;
            self.diag[i] += scale * d;
            self.lcoef[i] += scale * l;
            self.rcoef[i] += scale * r;
        }
    }

    /// Adds `scale * (2u_i - u_{i-1} - u_{i+1}) / h²` (h folded into scale).
    pub fn add_second_difference(&mut self, scale: f64) {
        let n = self.n();
        self.toeplitz[1] += scale;
        for i in 0..n {
            self.diag[i] += 2.0 * scale;
        }
        self.lcoef[0] += scale;
        self.rcoef[n - 1] += scale;
    }

    pub fn apply_with_tails(&self, u: &[f64], left: f64, right: f64) -> Vec<f64> {
        let n = self.n();
        assert_eq!(u.len(), n);
        let t = &self.toeplitz;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..i {
                    acc += t[i - j] * u[j];
                }
                for j in i + 1..n {
                    acc += t[j - i] * u[j];
                }
                self.diag[i] * u[i] - acc - self.lcoef[i] * left - self.rcoef[i] * right
            })
            .collect()
    }
}

/// Circulant operator on a periodic grid: `out_i = Σ_j c_j u_{(i+j) mod n}`.
#[derive(Debug, Clone)]
pub struct Circulant1d {
    pub coef: Vec<f64>,
}

/// Number of periods whose images are summed explicitly.
pub const PERIODIC_IMAGES: usize = 64;

impl Circulant1d {
    pub fn zeros(n: usize) -> Self {
        Self { coef: vec![0.0; n] }
    }

    pub fn add_fractional(&mut self, w: &OffsetWeights, kmax: usize, scale: f64) {
        let n = self.coef.len();
        for k in 1..=kmax {
            let a = if k == kmax { w.left_half[k] } else { w.full[k] };
            self.coef[0] += 2.0 * scale * a;
            self.coef[k % n] -= scale * a;
            self.coef[(n - k % n) % n] -= scale * a;
        }
        // beyond the last image g ≈ 2(u_i - mean)
        let t = 2.0 * w.tail(kmax);
        self.coef[0] += scale * t;
        for c in self.coef.iter_mut() {
            *c -= scale * t / n as f64;
        }
    }

    pub fn add_second_difference(&mut self, scale: f64) {
        let n = self.coef.len();
        self.coef[0] += 2.0 * scale;
        self.coef[1] -= scale;
        self.coef[n - 1] -= scale;
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.coef.len();
        assert_eq!(u.len(), n);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for (j, c) in self.coef.iter().enumerate() {
                    acc += c * u[(i + j) % n];
                }
                acc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_offset_weights_approach_power_law() {
        let s = 0.3;
        let w = OffsetWeights::new(s, 500);
        let k = 400.0_f64;
        let expect = k.powf(1.0 - 2.0 * s) / (k * k);
        assert!((w.full[400] / expect - 1.0).abs() < 1e-5);
    }

    #[test]
    fn weights_positive_beyond_extrapolation() {
        for &s in &[0.05, 0.3, 0.5, 0.8, 0.95] {
            let w = OffsetWeights::new(s, 100);
            assert!(w.full[1] > 0.0);
            assert!(w.full[3..].iter().all(|&a| a > 0.0));
        }
    }
}
