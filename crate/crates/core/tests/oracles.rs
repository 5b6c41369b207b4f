//! Independent numerical oracles for the operator and energy routines.

use std::f64::consts::PI;

use fraclayer::constants::{c_ns, phi};
use fraclayer::energy::{claim41_integral, kinetic_s};
use fraclayer::grid::{GridFunction, Tail};
use fraclayer::operator::{frac_laplacian_quadrature_all, frac_laplacian_spectral};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson on [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (depth < 44 && (left + right - whole).abs() <= 15.0 * tol) {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ∫_0^∞ (1 - cos t) t^{-1-2s} dt by quadrature; 1 - cos t is formed as
/// 2 sin²(t/2) to keep it accurate near zero.
fn cosine_integral(s: f64) -> f64 {
    // t = e^τ on (0, 1]
    let near = simpson(&|tau: f64| 2.0 * (0.5 * tau.exp()).sin().powi(2) * (-2.0 * s * tau).exp(), -60.0, 0.0, 1e-15)
        + (-60.0 * (2.0 - 2.0 * s)).exp() / (4.0 - 4.0 * s);
    let g = |t: f64| (1.0 - t.cos()) * t.powf(-1.0 - 2.0 * s);
    let periods = 100;
    let t_end = 2.0 * PI * periods as f64;
    let mut far = simpson(&g, 1.0, 2.0 * PI, 1e-13);
    for p in 1..periods {
        far += simpson(&g, 2.0 * PI * p as f64, 2.0 * PI * (p + 1) as f64, 1e-13);
    }
    // asymptotic tail past a whole number of periods
    let a = 1.0 + 2.0 * s;
    far += t_end.powf(-2.0 * s) / (2.0 * s) - a * t_end.powf(-a - 1.0);
    near + far
}

#[test]
fn cosine_symbol_by_direct_integration() {
    // (-Δ)^s cos(kx) = 2 c(s) k^{2s} cos(kx) ∫_0^∞ (1 - cos t) t^{-1-2s} dt
    for &s in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        let sym1 = 2.0 * c_ns(1, s).unwrap() * cosine_integral(s);
        assert!((sym1 - 1.0).abs() < 1e-6, "s={s}: {sym1}");
        for &k in &[1.0f64, 2.0, 4.0] {
            let sym = sym1 * k.powf(2.0 * s);
            let u = GridFunction::periodic(2.0 * PI, 128, |x| (k * x).cos()).unwrap();
            let lu = frac_laplacian_spectral(&u, s).unwrap();
            let err = u.values().iter().zip(lu.values()).map(|(c, l)| (l - sym * c).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6 * sym, "s={s} k={k}: {err}");
        }
    }
}

#[test]
fn periodic_quadrature_against_symbol() {
    for &s in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        let u = GridFunction::periodic(2.0 * PI, 1024, |x| (2.0 * x).cos()).unwrap();
        let q = frac_laplacian_quadrature_all(&u, s).unwrap();
        let expect = 2f64.powf(2.0 * s);
        let err = u.values().iter().zip(q.values()).map(|(c, l)| (l - expect * c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3 * expect, "s={s}: {err}");
    }
}

#[test]
fn half_laplacian_of_arctan_layer() {
    let u = GridFunction::from_fn_1d(200.0, 4096, Tail::Layer, |x| 2.0 / PI * x.atan()).unwrap();
    let q = frac_laplacian_quadrature_all(&u, 0.5).unwrap();
    for i in 0..u.n() {
        let x = u.x(i);
        if x.abs() <= 10.0 {
            // harmonic extension arg(1 + λ + ix)·2/π; its normal derivative
            let exact = 2.0 * x / (PI * (1.0 + x * x));
            assert!((q.values()[i] - exact).abs() < 1e-4, "x={x}");
        }
    }
}

/// K^s(u, B_R) = c/4 [∬_{Ω×Ω} + 2∬_{Ω×CΩ}] for u supported in Ω.
fn monte_carlo_kinetic(s: f64, r: f64, u: &dyn Fn(f64) -> f64, samples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..samples {
        let x: f64 = rng.random_range(-r..r);
        let y: f64 = rng.random_range(-r..r);
        let d = (u(x) - u(y)).powi(2) * (x - y).abs().powf(-1.0 - 2.0 * s) * 4.0 * r * r;
        acc += d;
        acc2 += d * d;
    }
    let n = samples as f64;
    let mean = acc / n;
    let se = ((acc2 / n - mean * mean) / n).sqrt();
    // Ω × CΩ: the inner integral over |y| > R is closed form
    let cross = simpson(
        &|x: f64| if u(x) == 0.0 { 0.0 } else { u(x).powi(2) * ((r - x).powf(-2.0 * s) + (r + x).powf(-2.0 * s)) / (2.0 * s) },
        -r,
        r,
        1e-12,
    );
    let c = c_ns(1, s).unwrap();
    (0.25 * c * (mean + 2.0 * cross), 0.25 * c * se)
}

#[test]
fn kinetic_against_monte_carlo() {
    let bump = |x: f64| if x.abs() < 3.0 { (1.0 - x * x / 9.0).powi(4) } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    for &s in &[0.25, 0.4] {
        let u = GridFunction::from_fn_1d(12.0, 961, Tail::Zero, bump).unwrap();
        let k = kinetic_s(&u, s, 4.0).unwrap();
        let (mc, se) = monte_carlo_kinetic(s, 4.0, &bump, 2_000_000, &mut rng);
        assert!((k - mc).abs() < 4.0 * se + 1e-3 * mc, "s={s}: {k} vs {mc} ± {se}");
        assert!(se < 1e-2 * mc);
    }
}

#[test]
fn claim41_against_adaptive_quadrature() {
    // Fubini turns ∫_0^{2R} ∫_d^∞ f(t) dt dd into ∫_0^∞ f(t) min(t, 2R) dt
    // with f(t) = min(1, t) t^{-1-2s}; each piece in t = e^τ
    for &s in &[0.25, 0.5, 0.75] {
        for &r in &[2.0f64, 16.0, 128.0] {
            let f = |t: f64| t.min(1.0) * t.powf(-1.0 - 2.0 * s) * t.min(2.0 * r) * t;
            let lo = -60.0;
            let hi = (2.0 * r).ln() + 60.0;
            let mut v = simpson(&|tau: f64| f(tau.exp()), lo, 0.0, 1e-14);
            v += simpson(&|tau: f64| f(tau.exp()), 0.0, (2.0 * r).ln(), 1e-12);
            v += simpson(&|tau: f64| f(tau.exp()), (2.0 * r).ln(), hi, 1e-12);
            // remainders below e^lo and above e^hi
            v += (lo * (2.0 - 2.0 * s)).exp() / (2.0 - 2.0 * s) + 2.0 * r * (-2.0 * s * hi).exp() / (2.0 * s);
            let v = 2.0 * c_ns(1, s).unwrap() * v;
            let got = claim41_integral(1, s, r).unwrap();
            assert!((got - v).abs() < 1e-5 * v, "s={s} R={r}: {got} vs {v}");
            assert!(got / phi(1, s, r).unwrap() < 10.0);
        }
    }
}
