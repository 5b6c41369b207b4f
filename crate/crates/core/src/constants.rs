//! Normalization constants and the energy growth benchmark.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::special::gamma;

/// Normalization constant of the singular-integral form of (-Δ)^s in ℝⁿ.
pub fn c_ns(n: usize, s: f64) -> Result<f64> {
    if n < 1 {
        return domain(format!("dimension must be >= 1, got {n}"));
    }
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s must lie in (0,1), got {s}"));
    }
    let nf = n as f64;
    Ok(PI.powf(-0.5 * nf) * 4f64.powf(s) * gamma(0.5 * (nf + 2.0 * s)) / gamma(2.0 - s)
        * s
        * (1.0 - s))
}

/// Φ_{n,s}(R) = R^{n-1}(R^{1-2s}-1)/(1-2s), or R^{n-1} log R at s = 1/2.
pub fn phi(n: usize, s: f64, r: f64) -> Result<f64> {
    if r < 2.0 {
        return domain(format!("phi needs R >= 2, got {r}"));
    }
    if !(s > 0.0 && s <= 1.0) {
        return domain(format!("phi needs s in (0,1], got {s}"));
    }
    let lead = r.powi(n as i32 - 1);
    let e = 1.0 - 2.0 * s;
    let ln_r = r.ln();
    // (R^e - 1)/e = ln R * expm1(e ln R)/(e ln R); the ratio is evaluated by
    // series when e ln R is tiny so both branches agree at s = 1/2.
    let x = e * ln_r;
    let ratio = if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    };
    Ok(lead * ln_r * ratio)
}

/// p_{n,s}: the constant making ∫ P_s(x, λ) dx = 1.
pub fn poisson_norm(n: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("s must lie in (0,1), got {s}"));
    }
    let nf = n as f64;
    Ok(gamma(0.5 * (nf + 2.0 * s)) / (PI.powf(0.5 * nf) * gamma(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_ns_half_is_one_over_pi() {
        assert!((c_ns(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn c_ns_quarter() {
        // Γ(3/4)/Γ(7/4) = 4/3 exactly.
        let expect = PI.powf(-0.5) * 2f64.sqrt() * (4.0 / 3.0) * 0.25 * 0.75;
        assert!((c_ns(1, 0.25).unwrap() - expect).abs() < 1e-13);
        assert!((c_ns(1, 0.25).unwrap() - 0.199_471_1).abs() < 1e-7);
    }

    #[test]
    fn c_ns_vanishes_at_ends_and_rejects_domain() {
        assert!(c_ns(1, 1.0 - 1e-9).unwrap() < 1e-8);
        assert!(c_ns(1, 1e-9).unwrap() < 1e-8);
        assert!(c_ns(1, 1.0).is_err());
        assert!(c_ns(1, 0.0).is_err());
        assert!(c_ns(0, 0.5).is_err());
    }

    #[test]
    fn phi_values() {
        assert!((phi(1, 0.5, 4.0).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert!((phi(2, 0.5, 10.0).unwrap() - 10.0 * 10f64.ln()).abs() < 1e-12);
        assert!((phi(1, 0.75, 1e12).unwrap() - 2.0).abs() < 1e-5);
        assert!(phi(1, 0.5, 1.5).is_err());
    }

    #[test]
    fn phi_continuous_across_half() {
        // Φ(1/2 + ε) = log R (1 - ε log R) + O(ε²)
        for &r in &[2.0, 4.0, 100.0] {
            let l = f64::ln(r);
            for &eps in &[1e-6, -1e-6, 1e-7, -3e-6] {
                let first = l * (1.0 - eps * l);
                assert!((phi(1, 0.5 + eps, r).unwrap() - first).abs() < 1e-9, "R={r} eps={eps}");
            }
        }
    }

    #[test]
    fn phi_decreasing_in_s() {
        for &r in &[2.0, 4.0, 16.0, 256.0] {
            let vals: Vec<f64> = (0..50)
                .map(|i| phi(1, 0.05 + 0.95 * i as f64 / 49.0, r).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]), "R={r}");
        }
    }

    #[test]
    fn c_ns_over_s_one_minus_s_bounded() {
        let mut worst: f64 = 0.0;
        for i in 0..=90 {
            let s = 0.05 + 0.01 * i as f64;
            worst = worst.max(c_ns(1, s).unwrap() / (s * (1.0 - s)));
        }
        assert!(worst < 3.0, "{worst}");
    }

    #[test]
    fn poisson_norm_cauchy() {
        assert!((poisson_norm(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
    }
}
