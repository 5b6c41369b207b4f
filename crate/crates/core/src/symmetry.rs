//! One-dimensional symmetry diagnostics in the plane: the quotients
//! σ = ∂₁ũ_s/∂₂ũ_s built from s-extensions, the Liouville functional D(R),
//! the growth hypothesis, a direction fit for 2-D grid functions and a
//! projected-gradient solver for monotone 2-D candidates.
//!
//! Liouville quantities are evaluated for fields of the form
//! u(x) = u₀(a·x): the 2-D s-extension of such a field is the 1-D extension
//! of u₀ evaluated at a·x, so the sheets come from [`crate::extension`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::extension::{calibrate_d, neumann_flux, ExtensionField};
use crate::grid::{GridFunction, Profile1d, Tail};
use crate::measure::SpectralMeasure;
use crate::operator::quad2d::{Exterior, Quad2d};
use crate::potential::Potential;
use crate::reduce::{pairwise_sum, sup_norm};
use crate::solver::{continuation_solve, projected_gradient, Descent, SolverConfig};

/// Sampling points per half-width of B_R for the cylinder integrals.
pub const LIOUVILLE_SAMPLES: usize = 32;
/// Nodes with ∂₂u below this fraction of sup|∇u| are masked.
pub const PHI_FLOOR: f64 = 1e-8;
/// Width of the pinned boundary frame of the 2-D solver.
pub const FRAME: usize = 4;

/// Growth function F in the hypothesis ∫(φσ)² ≤ C R² F(R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    /// F(R) = log R, so that R²F(R) = R² log R.
    LogR,
    /// F(R) = R² log R.
    R2LogR,
}

impl GrowthKind {
    pub fn f(&self, r: f64) -> f64 {
        match self {
            GrowthKind::LogR => r.ln(),
            GrowthKind::R2LogR => r * r * r.ln(),
        }
    }
}

fn unit(a: [f64; 2]) -> Result<[f64; 2]> {
    let n = a[0].hypot(a[1]);
    if !(n > 0.0 && n.is_finite()) {
        return domain("direction must be a nonzero vector");
    }
    Ok([a[0] / n, a[1] / n])
}

/// Four-point Lagrange interpolation of nodal values on x₀ + i h.
fn cubic(vals: &[f64], x0: f64, h: f64, t: f64) -> f64 {
    let n = vals.len();
    let p = (t - x0) / h;
    let i = (p.floor() as isize).clamp(1, n as isize - 3);
    let f = p - i as f64;
    let v = |k: isize| vals[(i + k) as usize];
    let (a, b, c, d) = (v(-1), v(0), v(1), v(2));
    -f * (f - 1.0) * (f - 2.0) / 6.0 * a + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * b
        - (f + 1.0) * f * (f - 2.0) / 2.0 * c
        + (f + 1.0) * f * (f - 1.0) / 6.0 * d
}

/// Extension sheets of a planar field u(x) = u₀(a·x), with the calibrated
/// d(s) of each atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleData {
    /// 1-D sheets ũ₀,s(t, λ) of the profile
    pub field: ExtensionField,
    pub direction: [f64; 2],
    pub d: Vec<f64>,
    pub growth: GrowthKind,
    /// sup|∇u| of the trace
    pub grad_scale: f64,
    pub d_values: Vec<(f64, f64)>,
}

impl LiouvilleData {
    /// Requires a nondecreasing profile and a₂ > 0, so that φ = ∂₂ũ ≥ 0.
    pub fn embedded(field: ExtensionField, direction: [f64; 2], growth: GrowthKind) -> Result<Self> {
        let a = unit(direction)?;
        if a[1] <= 0.0 {
            return domain("the monotone direction needs a₂ > 0");
        }
        let u = field.trace.values();
        let h = field.trace.h();
        if u.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::NotMonotone("profile of the embedded layer decreases".into()));
        }
        let grad_scale = u.windows(2).map(|w| (w[1] - w[0]) / h).fold(0.0, f64::max);
        let d = field.sheets.iter().map(|sh| calibrate_d(sh.s).map(|c| c.d)).collect::<Result<Vec<f64>>>()?;
        Ok(Self { field, direction: a, d, growth, grad_scale, d_values: Vec::new() })
    }

    fn check_measure(&self, m: &SpectralMeasure) -> Result<()> {
        let same = m.atoms().len() == self.field.sheets.len()
            && m.atoms().iter().zip(&self.field.sheets).all(|(a, s)| a.s == s.s);
        if same {
            Ok(())
        } else {
            Err(Error::Measure("data sheets do not match the atoms of the measure".into()))
        }
    }

    fn row_eval(&self, atom: usize, j: usize, t: f64) -> f64 {
        let f = &self.field;
        cubic(f.row(&f.sheets[atom], j), -f.trace.half_width(), f.trace.h(), t)
    }

    /// (∂₁ũ, ∂₂ũ) at a point with a·x = t on row j.
    fn grad_x(&self, atom: usize, j: usize, t: f64) -> (f64, f64) {
        let dl = self.field.trace.h();
        let [a1, a2] = self.direction;
        let d = |ai: f64| (self.row_eval(atom, j, t + dl * ai) - self.row_eval(atom, j, t - dl * ai)) / (2.0 * dl);
        (d(a1), d(a2))
    }
}

/// Per-point integrands on one cylinder C_R.
struct CylinderSums {
    /// ∫ λ^a φ²|∇σ|²
    dirichlet_sigma: f64,
    /// ∫ λ^a (φσ)²
    mass: f64,
    /// ∫ λ^a |∇ũ|²
    energy: f64,
    masked: usize,
}

fn sample_points(r: f64) -> Vec<([f64; 2], f64)> {
    let k = LIOUVILLE_SAMPLES as isize;
    let hs = r / LIOUVILLE_SAMPLES as f64;
    let mut out = Vec::new();
    for i2 in -k..=k {
        for i1 in -k..=k {
            let x = [i1 as f64 * hs, i2 as f64 * hs];
            if x[0].hypot(x[1]) > r * (1.0 + 1e-12) {
                continue;
            }
            let w1 = if i1.abs() == k { 0.5 } else { 1.0 };
            let w2 = if i2.abs() == k { 0.5 } else { 1.0 };
            out.push((x, w1 * w2 * hs * hs));
        }
    }
    out
}

fn cylinder_sums(data: &LiouvilleData, atom: usize, r: f64) -> Result<CylinderSums> {
    let f = &data.field;
    let lam = &f.lambda.values;
    let top = *lam.last().expect("nonempty");
    if r > top * (1.0 + 1e-12) || r > f.trace.half_width() - 4.0 * f.trace.h() {
        return domain(format!("C_{r} is not inside the sampled box"));
    }
    let s = f.sheets[atom].s;
    let a = 1.0 - 2.0 * s;
    let floor = PHI_FLOOR * data.grad_scale;
    let dl = f.trace.h();
    let [a1, a2] = data.direction;
    let rows: Vec<usize> = (1..lam.len() - 1).filter(|&j| lam[j] < r).collect();
    if rows.is_empty() {
        return domain("λ-grid starts above R");
    }
    let last = *rows.last().expect("nonempty");
    let sigma = |j: usize, t: f64| -> Option<f64> {
        let (g1, g2) = data.grad_x(atom, j, t);
        (g2 >= floor).then(|| g1 / g2)
    };
    let pts = sample_points(r);
    let per_point: Vec<Result<(f64, f64, f64, usize)>> = pts
        .par_iter()
        .map(|&(x, w)| {
            let t = a1 * x[0] + a2 * x[1];
            // (log λ, λ·[σ-part, mass, energy]) plus the bottom terms
            let mut samples: Vec<(f64, [f64; 3])> = Vec::new();
            let mut bottom = [0.0; 3];
            let mut masked = 0;
            for &j in &rows {
                let l = lam[j];
                let (g1, g2) = data.grad_x(atom, j, t);
                if g2 < -floor {
                    return Err(Error::NotMonotone(format!("∂₂ũ = {g2:e} < 0 at x = {x:?}, λ = {l}")));
                }
                let gl = f.drow(&f.sheets[atom], j);
                let ul = cubic(gl, -f.trace.half_width(), dl, t);
                let wl = l.powf(a);
                let energy = wl * (g1 * g1 + g2 * g2 + ul * ul);
                let mass = wl * g1 * g1;
                let sig = match (
                    sigma(j, t),
                    sigma(j, t + dl * a1),
                    sigma(j, t - dl * a1),
                    sigma(j, t + dl * a2),
                    sigma(j, t - dl * a2),
                    sigma(j - 1, t),
                    sigma(j + 1, t),
                ) {
                    (Some(_), Some(p1), Some(m1), Some(p2), Some(m2), Some(lm), Some(lp)) => {
                        let s1 = (p1 - m1) / (2.0 * dl);
                        let s2 = (p2 - m2) / (2.0 * dl);
                        let sl = (lp - lm) / (lam[j + 1] - lam[j - 1]);
                        Some((wl * g2 * g2 * (s1 * s1 + s2 * s2), wl * g2 * g2 * sl * sl))
                    }
                    _ => None,
                };
                let (sx, sl) = sig.unwrap_or_else(|| {
                    masked += 1;
                    (0.0, 0.0)
                });
                if j == rows[0] {
                    bottom = [
                        sx * l / (2.0 - 2.0 * s) + sl * l / (2.0 * s),
                        mass * l / (2.0 - 2.0 * s),
                        wl * (g1 * g1 + g2 * g2) * l / (2.0 - 2.0 * s) + wl * ul * ul * l / (2.0 * s),
                    ];
                }
                samples.push((l.ln(), [l * (sx + sl), l * mass, l * energy]));
            }
            // close the λ-integral at R by linear interpolation of the last gap
            if last + 1 < lam.len() && samples.len() >= 2 {
                let n = samples.len();
                let (t0, v0) = samples[n - 2];
                let (t1, v1) = samples[n - 1];
                let tr = r.ln();
                if tr > t1 {
                    let fr = (tr - t0) / (t1 - t0);
                    let mut v = [0.0; 3];
                    for k in 0..3 {
                        v[k] = (1.0 - fr) * v0[k] / t0.exp() * r + fr * v1[k] / t1.exp() * r;
                    }
                    samples.push((tr, v));
                }
            }
            let mut acc = bottom;
            for win in samples.windows(2) {
                let dt = win[1].0 - win[0].0;
                for k in 0..3 {
                    acc[k] += 0.5 * dt * (win[0].1[k] + win[1].1[k]);
                }
            }
            Ok((w * acc[0], w * acc[1], w * acc[2], masked))
        })
        .collect();
    let per_point: Vec<(f64, f64, f64, usize)> = per_point.into_iter().collect::<Result<_>>()?;
    let col = |k: usize| -> f64 {
        let v: Vec<f64> = per_point
            .iter()
            .map(|p| match k {
                0 => p.0,
                1 => p.1,
                _ => p.2,
            })
            .collect();
        pairwise_sum(&v)
    };
    Ok(CylinderSums {
        dirichlet_sigma: col(0),
        mass: col(1),
        energy: col(2),
        masked: per_point.iter().map(|p| p.3).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleValue {
    pub r: f64,
    /// D(R) = Σ wᵢ d(sᵢ) ∫_{C_R} λ^{1−2sᵢ} φᵢ²|∇σᵢ|²
    pub d: f64,
    /// Σ wᵢ d(sᵢ) ∫_{C_R} λ^{1−2sᵢ}|∇ũᵢ|², the scale D is compared with
    pub normalization: f64,
    pub masked: usize,
}

/// ∫_{C_R} λ^{1−2s} φ²|∇σ|² for one atom, without weights.
pub fn liouville_d_atom(data: &LiouvilleData, atom: usize, r: f64) -> Result<f64> {
    if atom >= data.field.sheets.len() {
        return domain(format!("no sheet {atom}"));
    }
    Ok(cylinder_sums(data, atom, r)?.dirichlet_sigma)
}

pub fn liouville_d(data: &LiouvilleData, m: &SpectralMeasure, r: f64) -> Result<LiouvilleValue> {
    data.check_measure(m)?;
    let mut d = Vec::new();
    let mut norm = Vec::new();
    let mut masked = 0;
    for (i, a) in m.atoms().iter().enumerate() {
        let c = cylinder_sums(data, i, r)?;
        d.push(a.weight * data.d[i] * c.dirichlet_sigma);
        norm.push(a.weight * data.d[i] * c.energy);
        masked += c.masked;
    }
    Ok(LiouvilleValue { r, d: pairwise_sum(&d), normalization: pairwise_sum(&norm), masked })
}

/// D(R) over a list of radii, recorded in `data.d_values`.
pub fn liouville_table(data: &mut LiouvilleData, m: &SpectralMeasure, r_list: &[f64]) -> Result<Vec<LiouvilleValue>> {
    let vals = r_list.iter().map(|&r| liouville_d(data, m, r)).collect::<Result<Vec<_>>>()?;
    data.d_values = vals.iter().map(|v| (v.r, v.d)).collect();
    Ok(vals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: f64,
    pub mass: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub growth: GrowthKind,
    pub rows: Vec<GrowthRow>,
    /// Σ_{j=1}^{k} 1/F(2^{j+1}) for k = 1..=20
    pub partial_sums: Vec<f64>,
}

pub fn growth_partial_sums(g: GrowthKind, terms: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=terms)
        .map(|j| {
            acc += 1.0 / g.f(2f64.powi(j as i32 + 1));
            acc
        })
        .collect()
}

/// Σ wᵢ d(sᵢ) ∫_{C_R} λ^{1−2sᵢ}(φσ)² against R²F(R).
pub fn growth_check(data: &LiouvilleData, m: &SpectralMeasure, r_list: &[f64]) -> Result<GrowthTable> {
    data.check_measure(m)?;
    let mut rows = Vec::new();
    for &r in r_list {
        let mut terms = Vec::new();
        for (i, a) in m.atoms().iter().enumerate() {
            terms.push(a.weight * data.d[i] * cylinder_sums(data, i, r)?.mass);
        }
        let mass = pairwise_sum(&terms);
        let bound = r * r * data.growth.f(r);
        rows.push(GrowthRow { r, mass, bound, ratio: mass / bound });
    }
    Ok(GrowthTable { growth: data.growth, rows, partial_sums: growth_partial_sums(data.growth, 20) })
}

/// sup over sample points of B_R of |σ̲ Σ wᵢ d(sᵢ)(∂₁gᵢ ∂₂u − ∂₂gᵢ ∂₁u)|,
/// gᵢ the Neumann flux of atom i, relative to σ̲ Σ wᵢ d(sᵢ)|∇gᵢ||∇u|.
pub fn sigma_flux_combination(data: &LiouvilleData, m: &SpectralMeasure, r: f64) -> Result<f64> {
    data.check_measure(m)?;
    let f = &data.field;
    let x0 = -f.trace.half_width();
    let h = f.trace.h();
    let [a1, a2] = data.direction;
    let fluxes: Vec<Vec<f64>> = (0..m.atoms().len())
        .map(|i| neumann_flux(f, i).map(|fl| fl.values.into_values()))
        .collect::<Result<_>>()?;
    let u = f.trace.values();
    let d = |vals: &[f64], t: f64, ai: f64| (cubic(vals, x0, h, t + h * ai) - cubic(vals, x0, h, t - h * ai)) / (2.0 * h);
    let floor = PHI_FLOOR * data.grad_scale;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, _) in sample_points(r) {
        let t = a1 * x[0] + a2 * x[1];
        let (u1, u2) = (d(u, t, a1), d(u, t, a2));
        if u2 < floor {
            continue;
        }
        let sig = u1 / u2;
        let mut comb = 0.0;
        let mut mag = 0.0;
        for (i, a) in m.atoms().iter().enumerate() {
            let (g1, g2) = (d(&fluxes[i], t, a1), d(&fluxes[i], t, a2));
            comb += a.weight * data.d[i] * (g1 * u2 - g2 * u1);
            mag += a.weight * data.d[i] * g1.hypot(g2) * u1.hypot(u2);
        }
        worst = worst.max((sig * comb).abs());
        scale = scale.max((sig * mag).abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryMeasure {
    pub a: [f64; 2],
    pub misalignment: f64,
    pub masked: usize,
}

/// Direction fit with the default margin of one node.
pub fn symmetry_measure_2d(u: &GridFunction) -> Result<SymmetryMeasure> {
    symmetry_measure_2d_with_margin(u, 1)
}

/// Central-difference gradients at nodes at least `margin` from the edge.
fn interior_gradients(u: &GridFunction, margin: usize) -> Result<Vec<(f64, f64)>> {
    if u.dim() != 2 {
        return Err(Error::Grid("symmetry measure needs a 2-D grid".into()));
    }
    let n = u.n();
    let margin = margin.max(1);
    if n <= 2 * margin + 1 {
        return Err(Error::Grid("grid too small for the margin".into()));
    }
    let h = u.h();
    let v = u.values();
    let mut grads = Vec::new();
    for i2 in margin..n - margin {
        for i1 in margin..n - margin {
            let k = i2 * n + i1;
            grads.push(((v[k + 1] - v[k - 1]) / (2.0 * h), (v[k + n] - v[k - n]) / (2.0 * h)));
        }
    }
    Ok(grads)
}

fn misfit(grads: &[(f64, f64)], ratio: f64, floor: f64, sup_grad: f64) -> f64 {
    let dev: Vec<f64> = grads.iter().filter(|g| g.1 >= floor).map(|g| g.0 - ratio * g.1).collect();
    sup_norm(&dev) / sup_grad
}

/// a ∝ (median ∂₁u/∂₂u, 1) and sup|∂₁u − (a₁/a₂)∂₂u| / sup|∇u| over nodes at
/// least `margin` away from the edge.
pub fn symmetry_measure_2d_with_margin(u: &GridFunction, margin: usize) -> Result<SymmetryMeasure> {
    let grads = interior_gradients(u, margin)?;
    let sup_grad = grads.iter().map(|g| g.0.hypot(g.1)).fold(0.0, f64::max);
    let floor = PHI_FLOOR * sup_grad;
    if let Some(g) = grads.iter().find(|g| g.1 < -floor) {
        return Err(Error::NotMonotone(format!("∂₂u = {:e} < 0 in the interior", g.1)));
    }
    let mut ratios: Vec<f64> = grads.iter().filter(|g| g.1 >= floor && g.1 > 0.0).map(|g| g.0 / g.1).collect();
    let masked = grads.len() - ratios.len();
    if ratios.is_empty() {
        return domain("∂₂u vanishes on the whole interior");
    }
    ratios.sort_by(f64::total_cmp);
    let k = ratios.len();
    let med = if k % 2 == 1 { ratios[k / 2] } else { 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]) };
    let a = unit([med, 1.0])?;
    Ok(SymmetryMeasure { a, misalignment: misfit(&grads, med, floor, sup_grad), masked })
}

/// sup|∂₁u − (a₁/a₂)∂₂u| / sup|∇u| for a prescribed direction.
pub fn misalignment_against(u: &GridFunction, a: [f64; 2], margin: usize) -> Result<f64> {
    let a = unit(a)?;
    if a[1] <= 0.0 {
        return domain("the monotone direction needs a₂ > 0");
    }
    let grads = interior_gradients(u, margin)?;
    let sup_grad = grads.iter().map(|g| g.0.hypot(g.1)).fold(0.0, f64::max);
    Ok(misfit(&grads, a[0] / a[1], PHI_FLOOR * sup_grad, sup_grad))
}

/// v(y) = u(Q y) with Q e₂ = a, on the largest centred square inside the
/// rotated box, at the same spacing. Bicubic interpolation.
pub fn rotate_2d(u: &GridFunction, a: [f64; 2]) -> Result<GridFunction> {
    if u.dim() != 2 {
        return Err(Error::Grid("rotation needs a 2-D grid".into()));
    }
    let a = unit(a)?;
    let h = u.h();
    let x0 = u.half_width();
    let half = ((x0 - 2.0 * h) / std::f64::consts::SQRT_2 / h).floor();
    let n = 2 * half as usize + 1;
    let n0 = u.n();
    let vals = u.values();
    let rows: Vec<Vec<f64>> = (0..n0).map(|i2| vals[i2 * n0..(i2 + 1) * n0].to_vec()).collect();
    let at = |p: [f64; 2]| -> f64 {
        // interpolate along x₁ in four rows, then along x₂
        let q = (p[1] + x0) / h;
        let i = (q.floor() as isize).clamp(1, n0 as isize - 3);
        let col: Vec<f64> = (i - 1..=i + 2).map(|r| cubic(&rows[r as usize], -x0, h, p[0])).collect();
        cubic(&col, -x0 + (i - 1) as f64 * h, h, p[1])
    };
    GridFunction::from_fn_2d(half * h, n, u.tail(), |y1, y2| {
        at([y1 * a[1] + y2 * a[0], -y1 * a[0] + y2 * a[1]])
    })
}

/// Initial guess of the 2-D solver inside the pinned frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init2d {
    /// the profile along x₂, ignoring the tilt
    Axis,
    /// the tilted profile itself
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solve2dConfig {
    pub n: usize,
    pub half_width: f64,
    pub direction: [f64; 2],
    pub init: Init2d,
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// continuation settings for the 1-D profile used as boundary data
    pub layer: SolverConfig,
}

impl Default for Solve2dConfig {
    fn default() -> Self {
        Self {
            n: 96,
            half_width: 6.0,
            direction: [1.0, 2.0],
            init: Init2d::Axis,
            step: 0.05,
            tol: 1e-6,
            max_iters: 20_000,
            layer: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solve2d {
    pub u: GridFunction,
    /// the 1-D profile u₀ defining the boundary data u₀(a·x)
    pub profile: GridFunction,
    pub direction: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
    pub flat: bool,
    pub residual: f64,
}

impl Solve2d {
    /// u₀(a·x) on the solver grid.
    pub fn rotated_profile(&self) -> Result<GridFunction> {
        let p = Profile1d::new(self.profile.clone())?;
        let a = self.direction;
        GridFunction::from_fn_2d(self.u.half_width(), self.u.n(), Tail::Layer, |x1, x2| p.eval(a[0] * x1 + a[1] * x2))
    }
}

/// Minimizes the 2-D energy on an n×n box with exterior and a pinned frame
/// of [`FRAME`] nodes given by the 1-D layer along `direction`.
pub fn solve_2d_monotone(m: &SpectralMeasure, p: &Potential, cfg: &Solve2dConfig) -> Result<Solve2d> {
    if cfg.n > 128 || cfg.n < 2 * FRAME + 3 {
        return domain(format!("2-D grids are limited to {}..=128 nodes per axis", 2 * FRAME + 3));
    }
    let a = unit(cfg.direction)?;
    if a[1] <= 0.0 {
        return domain("the monotone direction needs a₂ > 0");
    }
    let layer = continuation_solve(&cfg.layer, m, p)?;
    let profile = Profile1d::new(layer.profile.u.clone())?;
    solve_2d_with_profile(m, p, cfg, profile)
}

/// As [`solve_2d_monotone`] with a given 1-D profile.
pub fn solve_2d_with_profile(m: &SpectralMeasure, p: &Potential, cfg: &Solve2dConfig, profile: Profile1d) -> Result<Solve2d> {
    let a = unit(cfg.direction)?;
    let n = cfg.n;
    let exact = GridFunction::from_fn_2d(cfg.half_width, n, Tail::Layer, |x1, x2| profile.eval(a[0] * x1 + a[1] * x2))?;
    let ext = Exterior::Profile { profile: profile.clone(), a };
    let op = Quad2d::build(&exact, m, 1.0, m.lap_mass(), &ext)?;
    let apply = |u: &[f64]| op.apply(u);
    let inside = |i: usize| i >= FRAME && i < n - FRAME;
    let free: Vec<usize> = (0..n * n).filter(|&k| inside(k % n) && inside(k / n)).collect();
    let mut u0 = exact.values().to_vec();
    if cfg.init == Init2d::Axis {
        for &k in &free {
            u0[k] = profile.eval(exact.x(k / n));
        }
    }
    let opts = Descent { step: cfg.step, tol: cfg.tol, max_iters: cfg.max_iters };
    let out = projected_gradient(&apply, &free, p, u0, opts, |_, _, _, _| {})?;
    Ok(Solve2d {
        u: exact.with_values(out.u),
        profile: profile.grid().clone(),
        direction: a,
        iterations: out.iterations,
        converged: out.converged,
        flat: out.flat,
        residual: out.residual,
    })
}

/// sup over columns x₁ of sup_x₂ |u(x₁, x₂) − u₀(x₂)| on the free nodes.
pub fn row_profile_error(sol: &Solve2d) -> Result<f64> {
    let e = sol.rotated_profile()?;
    let n = sol.u.n();
    let inside = |i: usize| i >= FRAME && i < n - FRAME;
    let diff: Vec<f64> = (0..n * n)
        .filter(|&k| inside(k % n) && inside(k / n))
        .map(|k| sol.u.values()[k] - e.values()[k])
        .collect();
    Ok(sup_norm(&diff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub direction: [f64; 2],
    pub fitted: SymmetryMeasure,
    pub misalignment_vs_profile: f64,
    pub profile_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub liouville: Vec<LiouvilleValue>,
    pub growth: GrowthTable,
    pub sigma_flux_combination: f64,
}

pub fn write_report_json(path: &std::path::Path, report: &SymmetryReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}
