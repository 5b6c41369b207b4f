//! Finite atomic spectral measures μ on [s_*, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// One fractional order with its probability weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: f64,
    pub weight: f64,
}

/// μ = Σ wᵢ δ_{sᵢ} + lap_mass · δ₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    lap_mass: f64,
    s_star: f64,
}

impl SpectralMeasure {
    /// Builds a measure from `(s, weight)` pairs. Atoms are sorted; the mass
    /// at s = 1 must be passed as `lap_mass`.
    pub fn new(atoms: &[(f64, f64)], lap_mass: f64) -> Result<Self> {
        let mut list: Vec<Atom> = atoms.iter().map(|&(s, weight)| Atom { s, weight }).collect();
        list.sort_by(|a, b| a.s.total_cmp(&b.s));
        for a in &list {
            if !a.s.is_finite() || a.s <= 0.0 {
                return Err(Error::Measure(format!("atom order {} must be in (0,1)", a.s)));
            }
            if a.s >= 1.0 {
                return Err(Error::Measure(format!(
                    "atom at s = {} is not allowed; put that mass in lap_mass",
                    a.s
                )));
            }
            if !(a.weight > 0.0) {
                return Err(Error::Measure(format!("atom weight {} must be > 0", a.weight)));
            }
        }
        if list.windows(2).any(|w| w[0].s == w[1].s) {
            return Err(Error::Measure("duplicate atom orders".into()));
        }
        if !(lap_mass >= 0.0) {
            return Err(Error::Measure(format!("lap_mass {lap_mass} must be >= 0")));
        }
        let total: f64 = list.iter().map(|a| a.weight).sum::<f64>() + lap_mass;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Measure(format!("total mass {total} != 1")));
        }
        let s_star = list.first().map_or(1.0, |a| a.s);
        Ok(Self { atoms: list, lap_mass, s_star })
    }

    /// Single atom of unit mass.
    pub fn single(s: f64) -> Result<Self> {
        Self::new(&[(s, 1.0)], 0.0)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn lap_mass(&self) -> f64 {
        self.lap_mass
    }

    /// Lower end of the support. Equals 1 for the pure Laplacian.
    pub fn s_star(&self) -> f64 {
        self.s_star
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum::<f64>() + self.lap_mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorts_and_finds_s_star() {
        let m = SpectralMeasure::new(&[(0.7, 0.5), (0.3, 0.5)], 0.0).unwrap();
        assert_eq!(m.atoms()[0].s, 0.3);
        assert_eq!(m.s_star(), 0.3);
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(SpectralMeasure::new(&[(0.5, 0.9)], 0.0).is_err());
        assert!(SpectralMeasure::new(&[(1.0, 1.0)], 0.0).is_err());
        assert!(SpectralMeasure::new(&[(0.5, 0.5), (0.5, 0.5)], 0.0).is_err());
        assert!(SpectralMeasure::new(&[(0.5, -0.5), (0.6, 1.5)], 0.0).is_err());
        assert!(SpectralMeasure::new(&[(0.5, 1.0)], -0.1).is_err());
    }

    #[test]
    fn lap_mass_counts() {
        let m = SpectralMeasure::new(&[(0.3, 0.4), (0.7, 0.4)], 0.2).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(m.lap_mass(), 0.2);
    }

    proptest! {
        #[test]
        fn normalized_weights_accepted(ws in proptest::collection::vec(0.01f64..1.0, 1..6), lap in 0.0f64..0.5) {
            let total: f64 = ws.iter().sum();
            let atoms: Vec<(f64, f64)> = ws.iter().enumerate()
                .map(|(i, w)| (0.05 + 0.15 * i as f64, (1.0 - lap) * w / total))
                .collect();
            let m = SpectralMeasure::new(&atoms, lap).unwrap();
            prop_assert!((m.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!(m.atoms().iter().all(|a| a.s >= m.s_star()));
        }
    }
}
