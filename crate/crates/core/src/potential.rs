//! Double-well potentials with wells at ±1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// W(u) = (1 - u²)² / 4
    Quartic,
    /// W(u) = (1 + cos πu) / π²
    PeierlsNabarro,
    /// W(u) = Σ cₖ uᵏ
    Polynomial { coeffs: Vec<f64> },
}

impl Potential {
    pub fn w(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => 0.25 * (1.0 - u * u).powi(2),
            Potential::PeierlsNabarro => (1.0 + (PI * u).cos()) / (PI * PI),
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
        }
    }

    pub fn dw(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => -u * (1.0 - u * u),
            Potential::PeierlsNabarro => -(PI * u).sin() / PI,
            Potential::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c),
        }
    }

    pub fn d2w(&self, u: f64) -> f64 {
        match self {
            Potential::Quartic => 3.0 * u * u - 1.0,
            Potential::PeierlsNabarro => -(PI * u).cos(),
            Potential::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + (k * (k - 1)) as f64 * c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Quartic => "quartic",
            Potential::PeierlsNabarro => "peierls_nabarro",
            Potential::Polynomial { .. } => "polynomial",
        }
    }
}

/// One line of a [`validate_potential`] report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub checks: Vec<Check>,
}

impl PotentialReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the well conditions, positivity between the wells and the
/// consistency of W' and W'' with central differences.
pub fn validate_potential(p: &Potential) -> PotentialReport {
    let wells = p.w(1.0).abs().max(p.w(-1.0).abs());
    let mut min_inside = f64::INFINITY;
    for i in 1..200 {
        let t = -1.0 + 2.0 * i as f64 / 200.0;
        min_inside = min_inside.min(p.w(t));
    }
    let h = 1e-5;
    let mut d1: f64 = 0.0;
    let mut d2: f64 = 0.0;
    for i in 0..=300 {
        let t = -1.5 + 3.0 * i as f64 / 300.0;
        let fd1 = (p.w(t + h) - p.w(t - h)) / (2.0 * h);
        let fd2 = (p.dw(t + h) - p.dw(t - h)) / (2.0 * h);
        d1 = d1.max((fd1 - p.dw(t)).abs());
        d2 = d2.max((fd2 - p.d2w(t)).abs());
    }
    PotentialReport {
        checks: vec![
            Check { name: "wells_at_pm1", passed: wells <= 1e-12, worst: wells },
            Check { name: "positive_inside", passed: min_inside > 0.0, worst: min_inside },
            Check { name: "dw_consistent", passed: d1 <= 1e-6, worst: d1 },
            Check { name: "d2w_consistent", passed: d2 <= 1e-6, worst: d2 },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_passes() {
        assert!(validate_potential(&Potential::Quartic).all_pass());
    }

    #[test]
    fn peierls_nabarro_passes() {
        let p = Potential::PeierlsNabarro;
        assert!(validate_potential(&p).all_pass());
        assert!((p.dw(0.3) + (PI * 0.3).sin() / PI).abs() < 1e-15);
    }

    #[test]
    fn u_squared_fails_wells() {
        let r = validate_potential(&Potential::Polynomial { coeffs: vec![0.0, 0.0, 1.0] });
        assert!(!r.all_pass());
        assert!(!r.checks[0].passed);
        assert!((r.checks[0].worst - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_matches_quartic() {
        let poly = Potential::Polynomial { coeffs: vec![0.25, 0.0, -0.5, 0.0, 0.25] };
        for i in 0..=20 {
            let u = -1.0 + 0.1 * i as f64;
            assert!((poly.w(u) - Potential::Quartic.w(u)).abs() < 1e-14);
            assert!((poly.dw(u) - Potential::Quartic.dw(u)).abs() < 1e-14);
            assert!((poly.d2w(u) - Potential::Quartic.d2w(u)).abs() < 1e-14);
        }
    }
}
