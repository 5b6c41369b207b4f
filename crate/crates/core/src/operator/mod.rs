//! Discrete (-Δ)^s, the mixture L = Σ wᵢ(-Δ)^{sᵢ} + μ({1})(-Δ), and the
//! regularized L_δ = δ(-Δ) + (1-δ)L.

pub mod quad2d;
pub mod quadrature;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::constants::c_ns;
use crate::error::{domain, Error, Result};
use crate::grid::{GridFunction, Tail};
use crate::measure::SpectralMeasure;
use crate::reduce::sup_norm;

pub use quadrature::{Circulant1d, OffsetWeights, Toeplitz1d, PERIODIC_IMAGES};

/// Admissible orders for the quadrature backend.
pub const QUAD_S_MIN: f64 = 0.05;
pub const QUAD_S_MAX: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Quadrature,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub measure: SpectralMeasure,
    pub delta: f64,
    pub backend: Backend,
}

impl OperatorSpec {
    pub fn new(measure: SpectralMeasure, delta: f64, backend: Backend) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return domain(format!("delta must be in [0,1], got {delta}"));
        }
        Ok(Self { measure, delta, backend })
    }
}

pub(crate) fn check_quad_s(s: f64) -> Result<()> {
    if !(QUAD_S_MIN..=QUAD_S_MAX).contains(&s) {
        return domain(format!("quadrature backend needs s in [{QUAD_S_MIN}, {QUAD_S_MAX}], got {s}"));
    }
    Ok(())
}

/// Grids larger than this apply the Toeplitz part by FFT.
const FFT_THRESHOLD: usize = 512;

/// Assembled linear operator for a fixed 1-D grid.
#[derive(Debug, Clone)]
pub enum Assembled1d {
    Open { op: Toeplitz1d, tail: Tail, conv: Option<spectral::Conv1d> },
    Periodic(Circulant1d),
}

impl Assembled1d {
    /// Assembles `frac_weight · Σ wᵢ c(sᵢ)(-Δ)^{sᵢ} + lap_weight · (-Δ_h)` using the
    /// quadrature backend.
    pub fn build(grid: &GridFunction, measure: &SpectralMeasure, frac_weight: f64, lap_weight: f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Grid("1-D operator on a 2-D grid".into()));
        }
        let n = grid.n();
        let h = grid.h();
        for a in measure.atoms() {
            check_quad_s(a.s)?;
        }
        if grid.tail() == Tail::Periodic {
            let kmax = PERIODIC_IMAGES * n;
            let mut op = Circulant1d::zeros(n);
            for a in measure.atoms() {
                let w = OffsetWeights::new(a.s, kmax);
                let scale = frac_weight * a.weight * c_ns(1, a.s)? * h.powf(-2.0 * a.s);
                op.add_fractional(&w, kmax, scale);
            }
            if lap_weight != 0.0 {
                op.add_second_difference(lap_weight / (h * h));
            }
            Ok(Assembled1d::Periodic(op))
        } else {
            let mut op = Toeplitz1d::zeros(n);
            for a in measure.atoms() {
                let w = OffsetWeights::new(a.s, n);
                let scale = frac_weight * a.weight * c_ns(1, a.s)? * h.powf(-2.0 * a.s);
                op.add_fractional(&w, scale);
            }
            if lap_weight != 0.0 {
                op.add_second_difference(lap_weight / (h * h));
            }
            let conv = (n > FFT_THRESHOLD).then(|| spectral::Conv1d::new(&op.toeplitz));
            Ok(Assembled1d::Open { op, tail: grid.tail(), conv })
        }
    }

    /// Assembles L_δ for `spec` (quadrature backend).
    pub fn for_spec(grid: &GridFunction, spec: &OperatorSpec) -> Result<Self> {
        let d = spec.delta;
        Self::build(grid, &spec.measure, 1.0 - d, d + (1.0 - d) * spec.measure.lap_mass())
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Assembled1d::Periodic(op) => op.apply(u),
            Assembled1d::Open { op, tail, conv } => {
                let (l, r) = match tail {
                    Tail::Layer => (-1.0, 1.0),
                    Tail::Zero => (0.0, 0.0),
                    _ => (u[0], u[u.len() - 1]),
                };
                match conv {
                    None => op.apply_with_tails(u, l, r),
                    Some(c) => {
                        let t = c.apply(u);
                        (0..u.len())
                            .map(|i| op.diag[i] * u[i] - t[i] - op.lcoef[i] * l - op.rcoef[i] * r)
                            .collect()
                    }
                }
            }
        }
    }

    /// Diagonal entries, used for step-size heuristics.
    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Assembled1d::Periodic(op) => vec![op.coef[0]; op.coef.len()],
            Assembled1d::Open { op, .. } => op.diag.clone(),
        }
    }
}

/// (-Δ)^s u at a single node by singular-integral quadrature.
pub fn frac_laplacian_quadrature(u: &GridFunction, s: f64, x_index: usize) -> Result<f64> {
    check_quad_s(s)?;
    if u.tail() == Tail::Periodic {
        return Err(Error::Backend { backend: "quadrature (single node)", tail: u.tail().to_string() });
    }
    if u.dim() != 1 || x_index >= u.n() {
        return Err(Error::Grid(format!("node {x_index} outside 1-D grid")));
    }
    let n = u.n();
    let w = OffsetWeights::new(s, n);
    let i = x_index as isize;
    let kk = x_index.max(n - 1 - x_index) + 1;
    let g = |k: usize| 2.0 * u.at(i) - u.at(i + k as isize) - u.at(i - k as isize);
    let mut acc = 0.0;
    for k in 1..kk {
        acc += w.full[k] * g(k);
    }
    acc += (w.left_half[kk] + w.tail(kk)) * g(kk);
    Ok(c_ns(1, s)? * u.h().powf(-2.0 * s) * acc)
}

/// (-Δ)^s u at every node by quadrature (periodic grids use image sums).
pub fn frac_laplacian_quadrature_all(u: &GridFunction, s: f64) -> Result<GridFunction> {
    let m = SpectralMeasure::single(s)?;
    let op = Assembled1d::build(u, &m, 1.0, 0.0)?;
    Ok(u.with_values(op.apply(u.values())))
}

/// (-Δ)^s u via the Fourier symbol |ξ|^{2s}; periodic grids only.
pub fn frac_laplacian_spectral(u: &GridFunction, s: f64) -> Result<GridFunction> {
    if u.tail() != Tail::Periodic || u.dim() != 1 {
        return Err(Error::Backend { backend: "spectral", tail: u.tail().to_string() });
    }
    if !u.n().is_power_of_two() {
        return Err(Error::Grid(format!("spectral backend needs a power-of-two grid, got {}", u.n())));
    }
    if !(s > 0.0 && s <= 1.0) {
        return domain(format!("s must be in (0,1], got {s}"));
    }
    Ok(u.with_values(spectral::apply_symbol(u.values(), u.period(), |xi| xi.powf(2.0 * s))))
}

/// Centered second-difference Laplacian, -Δ_h u, using the declared tails.
pub fn neg_laplacian_h(u: &GridFunction) -> Vec<f64> {
    let h2 = u.h() * u.h();
    let n = u.n();
    if u.dim() == 1 {
        (0..n as isize).map(|i| (2.0 * u.at(i) - u.at(i - 1) - u.at(i + 1)) / h2).collect()
    } else {
        let v = u.values();
        let at = |i1: isize, i2: isize| -> f64 {
            let c1 = i1.clamp(0, n as isize - 1) as usize;
            let c2 = i2.clamp(0, n as isize - 1) as usize;
            v[c2 * n + c1]
        };
        let mut out = vec![0.0; n * n];
        for i2 in 0..n as isize {
            for i1 in 0..n as isize {
                out[i2 as usize * n + i1 as usize] =
                    (4.0 * at(i1, i2) - at(i1 - 1, i2) - at(i1 + 1, i2) - at(i1, i2 - 1) - at(i1, i2 + 1)) / h2;
            }
        }
        out
    }
}

/// L_δ u for a 1-D grid function with either backend.
pub fn apply_l(spec: &OperatorSpec, u: &GridFunction) -> Result<GridFunction> {
    if u.dim() != 1 {
        return Err(Error::Grid("apply_l handles 1-D grids; use quad2d for 2-D".into()));
    }
    match spec.backend {
        Backend::Quadrature => {
            let op = Assembled1d::for_spec(u, spec)?;
            Ok(u.with_values(op.apply(u.values())))
        }
        Backend::Spectral => {
            let d = spec.delta;
            let mut out = vec![0.0; u.n()];
            for a in spec.measure.atoms() {
                let v = frac_laplacian_spectral(u, a.s)?;
                for (o, x) in out.iter_mut().zip(v.values()) {
                    *o += (1.0 - d) * a.weight * x;
                }
            }
            let lap = d + (1.0 - d) * spec.measure.lap_mass();
            if lap != 0.0 {
                for (o, x) in out.iter_mut().zip(neg_laplacian_h(u)) {
                    *o += lap * x;
                }
            }
            Ok(u.with_values(out))
        }
    }
}

/// Sup-norm discrepancy between the quadrature and spectral backends,
/// relative to the spectral result.
pub fn backend_consistency(u: &GridFunction, s: f64) -> Result<f64> {
    let spec = frac_laplacian_spectral(u, s)?;
    let quad = frac_laplacian_quadrature_all(u, s)?;
    let scale = sup_norm(spec.values());
    let diff: Vec<f64> = spec.values().iter().zip(quad.values()).map(|(a, b)| a - b).collect();
    let d = sup_norm(&diff);
    if scale == 0.0 {
        return Ok(d);
    }
    Ok(d / scale)
}
