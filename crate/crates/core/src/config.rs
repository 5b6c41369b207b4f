//! Run configuration: TOML schema, shipped presets and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Tail;
use crate::measure::SpectralMeasure;
use crate::operator::{QUAD_S_MAX, QUAD_S_MIN};
use crate::potential::{validate_potential, Potential};
use crate::solver::SolverConfig;
use crate::symmetry::{GrowthKind, Init2d, Solve2dConfig};

pub const PRESETS: [(&str, &str); 5] = [
    ("pn-half", include_str!("../presets/pn-half.toml")),
    ("quartic-mix", include_str!("../presets/quartic-mix.toml")),
    ("quartic-lowS", include_str!("../presets/quartic-lowS.toml")),
    ("quartic-withLap", include_str!("../presets/quartic-withLap.toml")),
    ("quartic-highS", include_str!("../presets/quartic-highS.toml")),
];

pub const DEFAULT_PRESET: &str = "pn-half";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// `[s, weight]` pairs
    pub atoms: Vec<[f64; 2]>,
    pub lap_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "X")]
    pub x: f64,
    pub n: usize,
    pub tail: Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCheckConfig {
    pub s_values: Vec<f64>,
    pub symbol_k: Vec<u32>,
    pub symbol_n: usize,
    pub consistency_n: usize,
    pub consistency_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub r_list: Vec<f64>,
    pub claim41_s: Vec<f64>,
    pub claim41_r: Vec<f64>,
    pub ibp_r: f64,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    pub lambda_rows: usize,
    pub lambda_max: f64,
    pub csv_stride: usize,
    pub r_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    pub n: usize,
    pub half_width: f64,
    pub direction: [f64; 2],
    pub init: Init2d,
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub growth: GrowthKind,
    pub r_list: Vec<f64>,
}

/// Every key is required; presets supply complete files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub measure: MeasureConfig,
    pub potential: Potential,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub operator_check: OperatorCheckConfig,
    pub energy: EnergyConfig,
    pub extension: ExtensionConfig,
    pub symmetry: SymmetryConfig,
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<Config> {
    match PRESETS.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => Config::from_toml(text),
        None => Err(Error::Config(format!("unknown preset `{name}`; known: {}", preset_names().join(", ")))),
    }
}

impl Default for Config {
    fn default() -> Self {
        preset(DEFAULT_PRESET).expect("shipped preset parses")
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn ascending(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!("{name} must be a nonempty ascending list")));
    }
    Ok(())
}

impl Config {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn measure(&self) -> Result<SpectralMeasure> {
        let atoms: Vec<(f64, f64)> = self.measure.atoms.iter().map(|a| (a[0], a[1])).collect();
        SpectralMeasure::new(&atoms, self.measure.lap_mass)
    }

    pub fn solve_2d(&self) -> Solve2dConfig {
        let s = &self.symmetry;
        Solve2dConfig {
            n: s.n,
            half_width: s.half_width,
            direction: s.direction,
            init: s.init,
            step: s.step,
            tol: s.tol,
            max_iters: s.max_iters,
            layer: self.solver.clone(),
        }
    }

    /// Everything that can be rejected before a run starts.
    pub fn validate(&self) -> Result<()> {
        let m = self.measure()?;
        for a in m.atoms() {
            if !(QUAD_S_MIN..=QUAD_S_MAX).contains(&a.s) {
                return Err(Error::Domain(format!(
                    "atom s = {} outside the quadrature range [{QUAD_S_MIN}, {QUAD_S_MAX}]",
                    a.s
                )));
            }
        }
        let report = validate_potential(&self.potential);
        if !report.all_pass() {
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            return Err(Error::Config(format!("potential fails: {}", failed.join(", "))));
        }
        positive("grid.X", self.grid.x)?;
        if self.grid.n < 3 {
            return Err(Error::Config("grid.n must be at least 3".into()));
        }
        self.solver.validate()?;
        self.energy.solver.validate()?;

        let oc = &self.operator_check;
        for &s in &oc.s_values {
            if !(QUAD_S_MIN..=QUAD_S_MAX).contains(&s) {
                return Err(Error::Domain(format!(
                    "operator_check s = {s} outside the quadrature range [{QUAD_S_MIN}, {QUAD_S_MAX}]"
                )));
            }
        }
        if oc.s_values.is_empty() || oc.symbol_k.is_empty() {
            return Err(Error::Config("operator_check lists must be nonempty".into()));
        }
        if !oc.symbol_n.is_power_of_two() || !oc.consistency_n.is_power_of_two() {
            return Err(Error::Config("operator_check grid sizes must be powers of two".into()));
        }
        if oc.symbol_k.iter().any(|&k| k == 0 || 2 * k as usize >= oc.symbol_n) {
            return Err(Error::Config("symbol_k must lie in 1..symbol_n/2".into()));
        }
        positive("operator_check.consistency_period", oc.consistency_period)?;

        let e = &self.energy;
        ascending("energy.r_list", &e.r_list)?;
        ascending("energy.claim41_r", &e.claim41_r)?;
        if e.r_list.len() < 3 || e.r_list.windows(2).any(|w| (w[1] / w[0] - 2.0).abs() > 1e-9) {
            return Err(Error::Config("energy.r_list must hold at least three dyadic radii".into()));
        }
        if e.claim41_r[0] < 2.0 {
            return Err(Error::Config("energy.claim41_r starts below 2".into()));
        }
        for &s in &e.claim41_s {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Domain(format!("claim41 s = {s} must be in (0,1)")));
            }
        }
        let t_max = e.solver.r_schedule.last().copied().unwrap_or(0.0);
        if e.r_list.last().copied().unwrap_or(0.0) >= t_max {
            return Err(Error::Config("energy.r_list must stay inside the last solver box".into()));
        }
        positive("energy.ibp_r", e.ibp_r)?;

        let x = &self.extension;
        if x.lambda_rows < 8 || x.csv_stride == 0 {
            return Err(Error::Config("extension.lambda_rows >= 8 and csv_stride >= 1 required".into()));
        }
        positive("extension.lambda_max", x.lambda_max)?;
        ascending("extension.r_list", &x.r_list)?;

        let s = &self.symmetry;
        if s.n > 128 || s.n < 11 {
            return Err(Error::Config(format!("symmetry.n = {} must lie in 11..=128", s.n)));
        }
        positive("symmetry.half_width", s.half_width)?;
        positive("symmetry.step", s.step)?;
        positive("symmetry.tol", s.tol)?;
        if !(s.direction[1] > 0.0) {
            return Err(Error::Config("symmetry.direction needs a positive second component".into()));
        }
        ascending("symmetry.r_list", &s.r_list)?;
        if self.grid.tail == Tail::Periodic {
            return Err(Error::Config("grid.tail must be a layer-type tail".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_roundtrip() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            let back = Config::from_toml(&c.to_toml()).unwrap();
            assert_eq!(c, back, "{name}");
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let text = PRESETS[0].1.replace("atoms = [[0.5, 1.0]]", "atoms = [[0.5, 0.7]]");
        assert!(matches!(Config::from_toml(&text), Err(Error::Measure(_))));
    }

    #[test]
    fn out_of_range_s_is_a_domain_error() {
        let text = PRESETS[0].1.replace("s_values = [0.1,", "s_values = [0.99,");
        assert!(matches!(Config::from_toml(&text), Err(Error::Domain(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{}\nextra = 1\n", PRESETS[0].1);
        assert!(Config::from_toml(&text).is_err());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn preset_measures() {
        let m = preset("quartic-withLap").unwrap().measure().unwrap();
        assert_eq!(m.lap_mass(), 0.2);
        assert_eq!(m.s_star(), 0.3);
        assert_eq!(preset("quartic-highS").unwrap().measure().unwrap().s_star(), 0.75);
    }
}
