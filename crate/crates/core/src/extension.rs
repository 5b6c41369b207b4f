//! Poisson-kernel s-extensions ũ_s(·, λ) = P_s(·, λ) ∗ u of a 1-D trace,
//! their Neumann flux, the calibration of d(s), and extended energies on
//! cylinders C_R = B_R × [0, R).
//!
//! The trace is the piecewise-linear interpolant of the grid values with the
//! declared constant tails. Hat functions are integrated against P_s exactly
//! through the double antiderivative Ψ of the kernel when λ is comparable to
//! h, and by Gauss-Legendre panels otherwise.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{phi, poisson_norm};
use crate::energy::{ball_indices, total_energy};
use crate::error::{domain, Error, Result};
use crate::grid::{GridFunction, Tail};
use crate::measure::SpectralMeasure;
use crate::operator::spectral::Conv1d;
use crate::operator::{check_quad_s, frac_laplacian_quadrature_all, neg_laplacian_h};
use crate::potential::Potential;
use crate::reduce::{pairwise_sum, sup_norm};
use crate::special::{beta_reg, solve_dense, GaussLegendre};

/// Rows with λ below `EXACT_LAMBDA * h` use the closed-form hat integrals
/// for offsets below `EXACT_OFFSETS`.
const EXACT_LAMBDA: f64 = 8.0;
const EXACT_OFFSETS: usize = 32;
const PERIODIC_IMAGES: usize = 64;

/// P_s(x, λ) in 1-D.
pub fn poisson_kernel(s: f64, x: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return domain(format!("lambda must be > 0, got {lambda}"));
    }
    Ok(Kernel::new(s)?.p(x, lambda))
}

/// P_s(x, λ) for x ∈ ℝⁿ given |x|.
pub fn poisson_kernel_n(n: usize, s: f64, abs_x: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return domain(format!("lambda must be > 0, got {lambda}"));
    }
    let p = poisson_norm(n, s)?;
    Ok(p * lambda.powf(2.0 * s) * (abs_x * abs_x + lambda * lambda).powf(-0.5 * (n as f64 + 2.0 * s)))
}

/// One-dimensional kernel in the scaled variable ζ = x/λ.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    s: f64,
    p: f64,
}

impl Kernel {
    fn new(s: f64) -> Result<Self> {
        Ok(Self { s, p: poisson_norm(1, s)? })
    }

    fn phat(&self, z: f64) -> f64 {
        self.p * (1.0 + z * z).powf(-0.5 - self.s)
    }

    fn p(&self, x: f64, lambda: f64) -> f64 {
        self.phat(x / lambda) / lambda
    }

    fn dp(&self, x: f64, lambda: f64) -> f64 {
        let z = x / lambda;
        let z2 = z * z;
        self.phat(z) / (lambda * lambda) * (2.0 * self.s * z2 - 1.0) / (1.0 + z2)
    }

    /// ∫_{-∞}^ζ phat.
    fn cdf(&self, z: f64) -> f64 {
        let w = z * z / (1.0 + z * z);
        let half = 0.5 * beta_reg(0.5, self.s, w);
        if z >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    /// ∫_0^ζ t phat(t) dt.
    fn first_moment(&self, z: f64) -> f64 {
        let l = (z * z).ln_1p();
        let e = 0.5 - self.s;
        let x = e * l;
        let ratio = if x.abs() < 1e-8 { 1.0 + 0.5 * x } else { x.exp_m1() / x };
        self.p * 0.5 * l * ratio
    }

    /// Ψ(x) with Ψ'' = P(·, λ).
    fn psi(&self, x: f64, lambda: f64) -> f64 {
        let z = x / lambda;
        x * self.cdf(z) - lambda * self.first_moment(z)
    }

    fn dpsi(&self, x: f64, lambda: f64) -> f64 {
        -self.first_moment(x / lambda)
    }
}

fn gl4() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(4))
}

/// ∫ hat(t) f(d - t) dt over the full hat [-h, h].
fn hat_gl(h: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = gl4();
    g.integrate(-h, 0.0, |t| (1.0 + t / h) * f(d - t)) + g.integrate(0.0, h, |t| (1.0 - t / h) * f(d - t))
}

/// ∫_0^h (1 - t/h) f(d - t) dt.
fn half_hat_gl(h: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    gl4().integrate(0.0, h, |t| (1.0 - t / h) * f(d - t))
}

/// Hat weights W(k) and ∂_λW(k) for offsets k = 0..len.
fn hat_weights(k: &Kernel, h: f64, lambda: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let exact_row = lambda < EXACT_LAMBDA * h;
    (0..len)
        .into_par_iter()
        .map(|j| {
            let d = j as f64 * h;
            if exact_row && j < EXACT_OFFSETS {
                let w = (k.psi(d + h, lambda) - 2.0 * k.psi(d, lambda) + k.psi(d - h, lambda)) / h;
                let dw = (k.dpsi(d + h, lambda) - 2.0 * k.dpsi(d, lambda) + k.dpsi(d - h, lambda)) / h;
                (w, dw)
            } else {
                (hat_gl(h, d, |x| k.p(x, lambda)), hat_gl(h, d, |x| k.dp(x, lambda)))
            }
        })
        .unzip()
}

/// (tail mass, half-hat weight) and their λ-derivatives for a grid end at
/// signed distance d = x - end (d ≤ 0 inside).
fn end_terms(k: &Kernel, h: f64, lambda: f64, d: f64) -> [f64; 4] {
    let z = d / lambda;
    let mass = k.cdf(z);
    let dmass = -(d / (lambda * lambda)) * k.phat(z);
    let exact = lambda < EXACT_LAMBDA * h && d.abs() < EXACT_OFFSETS as f64 * h;
    let (half, dhalf) = if exact {
        (
            mass - (k.psi(d, lambda) - k.psi(d - h, lambda)) / h,
            dmass - (k.dpsi(d, lambda) - k.dpsi(d - h, lambda)) / h,
        )
    } else {
        (half_hat_gl(h, d, |x| k.p(x, lambda)), half_hat_gl(h, d, |x| k.dp(x, lambda)))
    };
    [mass, half, dmass, dhalf]
}

/// λ-grid with row 0 at λ = 0 followed by a geometric sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
}

impl LambdaGrid {
    /// `rows` positive values from `lambda_min` to `lambda_max`.
    pub fn geometric(lambda_min: f64, lambda_max: f64, rows: usize) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max > lambda_min) || rows < 3 {
            return domain("need 0 < lambda_min < lambda_max and at least three rows");
        }
        let rho = (lambda_max / lambda_min).powf(1.0 / (rows - 1) as f64);
        let mut values = vec![0.0];
        values.extend((0..rows).map(|j| lambda_min * rho.powi(j as i32)));
        *values.last_mut().expect("nonempty") = lambda_max;
        Ok(Self { values })
    }

    /// λ_min = h/4, Λ = `lambda_max`, about 200 rows.
    pub fn default_for(h: f64, lambda_max: f64) -> Result<Self> {
        Self::geometric(0.25 * h, lambda_max, 200)
    }

    pub fn ratio(&self) -> f64 {
        self.values[2] / self.values[1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// ũ_s and ∂_λũ_s on the (x, λ) grid, row-major by λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub s: f64,
    pub values: Vec<f64>,
    pub dlambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionField {
    pub trace: GridFunction,
    pub lambda: LambdaGrid,
    pub sheets: Vec<Sheet>,
}

impl ExtensionField {
    /// Assembles a field from precomputed sheets.
    pub fn from_sheets(trace: GridFunction, lambda: LambdaGrid, sheets: Vec<Sheet>) -> Result<Self> {
        let size = trace.n() * lambda.len();
        if trace.dim() != 1 || sheets.iter().any(|s| s.values.len() != size || s.dlambda.len() != size) {
            return Err(Error::Grid("sheet size does not match the (x, λ) grid".into()));
        }
        Ok(Self { trace, lambda, sheets })
    }

    pub fn n(&self) -> usize {
        self.trace.n()
    }

    pub fn row<'a>(&self, sheet: &'a Sheet, j: usize) -> &'a [f64] {
        let n = self.n();
        &sheet.values[j * n..(j + 1) * n]
    }

    pub fn drow<'a>(&self, sheet: &'a Sheet, j: usize) -> &'a [f64] {
        let n = self.n();
        &sheet.dlambda[j * n..(j + 1) * n]
    }
}

fn extend_row_open(k: &Kernel, u: &GridFunction, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.n();
    let h = u.h();
    let x0 = u.half_width();
    let (w, dw) = hat_weights(k, h, lambda, n);
    let vals = u.values();
    let conv = |wt: &[f64]| -> Vec<f64> {
        let c = Conv1d::new(wt);
        let t = c.apply(vals);
        t.iter().zip(vals).map(|(a, v)| a + wt[0] * v).collect::<Vec<f64>>()
    };
    let mut row = conv(&w);
    let mut drow = conv(&dw);
    let (ul, ur) = u.tail_values();
    let ends: Vec<([f64; 4], [f64; 4])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = u.x(i);
            (end_terms(k, h, lambda, x - x0), end_terms(k, h, lambda, -x - x0))
        })
        .collect();
    for (i, (r, l)) in ends.iter().enumerate() {
        row[i] += ur * r[0] - vals[n - 1] * r[1] + ul * l[0] - vals[0] * l[1];
        drow[i] += ur * r[2] - vals[n - 1] * r[3] + ul * l[2] - vals[0] * l[3];
    }
    (row, drow)
}

fn extend_row_periodic(k: &Kernel, u: &GridFunction, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = u.n();
    let h = u.h();
    let kmax = PERIODIC_IMAGES * n;
    let (w, dw) = hat_weights(k, h, lambda, kmax + 1);
    let mut c = vec![0.0; n];
    let mut dc = vec![0.0; n];
    c[0] += w[0];
    dc[0] += dw[0];
    for j in 1..=kmax {
        c[j % n] += w[j];
        c[(n - j % n) % n] += w[j];
        dc[j % n] += dw[j];
        dc[(n - j % n) % n] += dw[j];
    }
    // images beyond kmax see the mean
    let edge = (kmax as f64 + 0.5) * h;
    let z = edge / lambda;
    let far = 2.0 * (1.0 - k.cdf(z));
    let dfar = 2.0 * (edge / (lambda * lambda)) * k.phat(z);
    let vals = u.values();
    let mean = pairwise_sum(vals) / n as f64;
    let apply = |c: &[f64], extra: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for (r, cr) in c.iter().enumerate() {
                    acc += cr * vals[(i + r) % n];
                }
                acc + extra * mean
            })
            .collect()
    };
    (apply(&c, far), apply(&dc, dfar))
}

/// One sheet per atom of `m`.
pub fn extend(u: &GridFunction, m: &SpectralMeasure, lambda: &LambdaGrid) -> Result<ExtensionField> {
    if u.dim() != 1 {
        return Err(Error::Grid("extensions are built from 1-D traces".into()));
    }
    let mut sheets = Vec::new();
    for a in m.atoms() {
        sheets.push(extend_sheet(u, a.s, lambda)?);
    }
    ExtensionField::from_sheets(u.clone(), lambda.clone(), sheets)
}

pub fn extend_sheet(u: &GridFunction, s: f64, lambda: &LambdaGrid) -> Result<Sheet> {
    check_quad_s(s)?;
    let k = Kernel::new(s)?;
    let n = u.n();
    let mut values = Vec::with_capacity(n * lambda.len());
    let mut dlambda = Vec::with_capacity(n * lambda.len());
    for &l in &lambda.values {
        if l == 0.0 {
            values.extend_from_slice(u.values());
            dlambda.extend(std::iter::repeat_n(f64::NAN, n));
            continue;
        }
        let (r, d) = match u.tail() {
            Tail::Periodic => extend_row_periodic(&k, u, l),
            _ => extend_row_open(&k, u, l),
        };
        values.extend(r);
        dlambda.extend(d);
    }
    Ok(Sheet { s, values, dlambda })
}

/// Upper end of the λ window used for the flux fit.
pub const FLUX_LAMBDA_MAX: f64 = 0.5;
/// Lower end of the flux window in units of h.
pub const FLUX_LAMBDA_MIN_H: f64 = 1.0;
/// Relative agreement required between the two fit windows.
pub const FLUX_TOL: f64 = 1e-3;

/// −λ^{1−2s}∂_λũ_s extrapolated to λ = 0, without the d(s) factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flux {
    pub values: GridFunction,
    /// sup-distance between the extrapolations from the full window and
    /// from the window without its first row, relative to sup|flux|.
    pub spread: f64,
    pub converged: bool,
}

/// Exponents of the small-λ expansion of λ^{1−2s}∂_λũ_s, with near-duplicates
/// removed.
fn flux_exponents(s: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for e in [0.0, 2.0 - 2.0 * s, 2.0, 4.0 - 2.0 * s, 4.0, 6.0 - 2.0 * s] {
        if out.iter().all(|o| (o - e).abs() > 0.05) {
            out.push(e);
        }
    }
    out
}

/// Weights c_j with Σ c_j g(λ_j) = least-squares value at λ = 0.
fn extrapolation_weights(lambdas: &[f64], exps: &[f64]) -> Option<Vec<f64>> {
    let m = exps.len();
    let basis: Vec<Vec<f64>> = lambdas.iter().map(|&l| exps.iter().map(|&e| l.powf(e)).collect()).collect();
    let mut g = vec![vec![0.0; m]; m];
    for row in &basis {
        for a in 0..m {
            for b in 0..m {
                g[a][b] += row[a] * row[b];
            }
        }
    }
    let mut e0 = vec![0.0; m];
    e0[0] = 1.0;
    let y = solve_dense(g, e0)?;
    Some(basis.iter().map(|row| row.iter().zip(&y).map(|(b, y)| b * y).sum()).collect())
}

fn flux_rows(f: &ExtensionField, lo: f64, hi: f64) -> Vec<usize> {
    (1..f.lambda.len())
        .filter(|&j| {
            let l = f.lambda.values[j];
            l >= lo * (1.0 - 1e-12) && l <= hi
        })
        .collect()
}

/// Flux fitted on the rows λ ∈ [h, FLUX_LAMBDA_MAX].
pub fn neumann_flux(f: &ExtensionField, atom: usize) -> Result<Flux> {
    neumann_flux_window(f, atom, FLUX_LAMBDA_MIN_H * f.trace.h(), FLUX_LAMBDA_MAX)
}

/// Flux fitted on the rows λ ∈ [lo, hi].
pub fn neumann_flux_window(f: &ExtensionField, atom: usize, lo: f64, hi: f64) -> Result<Flux> {
    let sheet = f
        .sheets
        .get(atom)
        .ok_or_else(|| Error::Domain(format!("no sheet {atom}")))?;
    let rows = flux_rows(f, lo, hi);
    let exps = flux_exponents(sheet.s);
    if rows.len() < exps.len() + 4 {
        return domain("λ-grid has too few rows in the flux window");
    }
    let lams: Vec<f64> = rows.iter().map(|&j| f.lambda.values[j]).collect();
    let singular = || Error::Domain("flux fit is singular".into());
    let c_full = extrapolation_weights(&lams, &exps).ok_or_else(singular)?;
    let c_late = extrapolation_weights(&lams[1..], &exps).ok_or_else(singular)?;
    let n = f.n();
    let (full, late): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut a = 0.0;
            let mut b = 0.0;
            for (r, &j) in rows.iter().enumerate() {
                let l = f.lambda.values[j];
                let g = -l.powf(1.0 - 2.0 * sheet.s) * f.drow(sheet, j)[i];
                a += c_full[r] * g;
                if r > 0 {
                    b += c_late[r - 1] * g;
                }
            }
            (a, b)
        })
        .unzip();
    // the kink of the truncated trace at ±X is not a smooth feature
    let x0 = f.trace.half_width() - 1.0;
    let diff: Vec<f64> = (0..n)
        .map(|i| if f.trace.x(i).abs() <= x0 || f.trace.tail() == Tail::Periodic { full[i] - late[i] } else { 0.0 })
        .collect();
    let scale = sup_norm(&full);
    let spread = if scale > 0.0 { sup_norm(&diff) / scale } else { sup_norm(&diff) };
    Ok(Flux { values: f.trace.with_values(full), spread, converged: spread <= FLUX_TOL })
}

/// Grid of the calibration problems: zero tails on [-40, 40], h = 0.05.
pub const CALIBRATION_X: f64 = 40.0;
pub const CALIBRATION_N: usize = 1601;
/// Calibration fit is compared on |x| ≤ 8.
pub const CALIBRATION_WINDOW: f64 = 8.0;
pub const CALIBRATION_TOL: f64 = 1e-2;

/// The fixed test family for the d(s) fit.
pub fn calibration_family() -> [fn(f64) -> f64; 3] {
    [
        |x| (-x * x).exp(),
        |x| x * (-x * x).exp(),
        |x| (-0.25 * x * x).exp() * x.cos(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub s: f64,
    pub d: f64,
    /// max over the family of sup|d·flux − (−Δ)^s u| / sup|(−Δ)^s u| on the window
    pub residual: f64,
    pub trusted: bool,
}

/// Flux and quadrature operator of one test function on the calibration grid.
pub fn flux_and_operator(u: fn(f64) -> f64, s: f64) -> Result<(GridFunction, GridFunction)> {
    let g = GridFunction::from_fn_1d(CALIBRATION_X, CALIBRATION_N, Tail::Zero, u)?;
    let lambda = LambdaGrid::default_for(g.h(), CALIBRATION_X)?;
    let sheet = extend_sheet(&g, s, &lambda)?;
    let f = ExtensionField::from_sheets(g.clone(), lambda, vec![sheet])?;
    let flux = neumann_flux(&f, 0)?.values;
    let q = frac_laplacian_quadrature_all(&g, s)?;
    Ok((flux, q))
}

fn window(g: &GridFunction) -> Vec<usize> {
    (0..g.n()).filter(|&i| g.x(i).abs() <= CALIBRATION_WINDOW + 1e-9).collect()
}

/// Relative sup misfit of d·flux against the operator on the window.
pub fn calibration_misfit(d: f64, flux: &GridFunction, q: &GridFunction) -> f64 {
    let idx = window(q);
    let err: Vec<f64> = idx.iter().map(|&i| d * flux.values()[i] - q.values()[i]).collect();
    let scale: Vec<f64> = idx.iter().map(|&i| q.values()[i]).collect();
    sup_norm(&err) / sup_norm(&scale)
}

fn calibrate_uncached(s: f64) -> Result<Calibration> {
    let fam = calibration_family();
    let pairs: Vec<Result<(GridFunction, GridFunction)>> = fam.par_iter().map(|&u| flux_and_operator(u, s)).collect();
    let pairs: Vec<(GridFunction, GridFunction)> = pairs.into_iter().collect::<Result<_>>()?;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for (flux, q) in &pairs {
        for i in window(q) {
            num.push(flux.values()[i] * q.values()[i]);
            den.push(flux.values()[i] * flux.values()[i]);
        }
    }
    let d = pairwise_sum(&num) / pairwise_sum(&den);
    let residual = pairs.iter().map(|(f, q)| calibration_misfit(d, f, q)).fold(0.0, f64::max);
    Ok(Calibration { s, d, residual, trusted: residual <= CALIBRATION_TOL })
}

fn calibration_cache() -> &'static Mutex<HashMap<u64, Calibration>> {
    static C: OnceLock<Mutex<HashMap<u64, Calibration>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Least-squares d(s) with (−Δ)^s u ≈ d·flux over the test family.
pub fn calibrate_d(s: f64) -> Result<Calibration> {
    check_quad_s(s)?;
    if let Some(c) = calibration_cache().lock().expect("cache").get(&s.to_bits()) {
        return Ok(*c);
    }
    let c = calibrate_uncached(s)?;
    calibration_cache().lock().expect("cache").insert(s.to_bits(), c);
    Ok(c)
}

/// Rows used by the PDE residual: λ ∈ [2h, X/4], excluding the first and
/// last rows of the grid.
fn residual_rows(f: &ExtensionField) -> Vec<usize> {
    let h = f.trace.h();
    let top = 0.25 * f.trace.half_width();
    (2..f.lambda.len() - 1)
        .filter(|&j| {
            let l = f.lambda.values[j];
            l >= 2.0 * h * (1.0 - 1e-12) && l <= top
        })
        .collect()
}

/// sup over the interior of λ·|∂_xxũ + λ^{-a}∂_λ(λ^a∂_λũ)| / sup|∇ũ| with
/// a = 1 − 2s, on |x| ≤ X/2 (whole period for periodic traces).
pub fn weighted_pde_residual(f: &ExtensionField, atom: usize) -> Result<f64> {
    let sheet = f
        .sheets
        .get(atom)
        .ok_or_else(|| Error::Domain(format!("no sheet {atom}")))?;
    let a = 1.0 - 2.0 * sheet.s;
    let n = f.n();
    let h = f.trace.h();
    let periodic = f.trace.tail() == Tail::Periodic;
    let xs: Vec<usize> = if periodic {
        (0..n).collect()
    } else {
        (2..n - 2).filter(|&i| f.trace.x(i).abs() <= 0.5 * f.trace.half_width()).collect()
    };
    let rows = residual_rows(f);
    if rows.is_empty() || xs.is_empty() {
        return domain("no interior nodes for the PDE residual");
    }
    let lam = &f.lambda.values;
    let at = |row: &[f64], i: usize, k: isize| -> f64 {
        let j = i as isize + k;
        if periodic {
            row[j.rem_euclid(n as isize) as usize]
        } else {
            row[j as usize]
        }
    };
    let per_row: Vec<(f64, f64)> = rows
        .par_iter()
        .map(|&j| {
            let (lm, l0, lp) = (lam[j - 1], lam[j], lam[j + 1]);
            let (um, u0, up) = (f.row(sheet, j - 1), f.row(sheet, j), f.row(sheet, j + 1));
            let d0 = f.drow(sheet, j);
            let (hm, hp) = ((lm * l0).sqrt(), (l0 * lp).sqrt());
            let mut res: f64 = 0.0;
            let mut grad: f64 = 0.0;
            for &i in &xs {
                let uxx = (-at(u0, i, -2) + 16.0 * at(u0, i, -1) - 30.0 * u0[i] + 16.0 * at(u0, i, 1) - at(u0, i, 2))
                    / (12.0 * h * h);
                let fp = hp.powf(a) * (up[i] - u0[i]) / (lp - l0);
                let fm = hm.powf(a) * (u0[i] - um[i]) / (l0 - lm);
                let div = (fp - fm) / (0.5 * (lp - lm));
                res = res.max((l0 * (uxx + div / l0.powf(a))).abs());
                let ux = (at(u0, i, -2) - 8.0 * at(u0, i, -1) + 8.0 * at(u0, i, 1) - at(u0, i, 2)) / (12.0 * h);
                grad = grad.max(ux.hypot(d0[i]));
            }
            (res, grad)
        })
        .collect();
    let res = per_row.iter().map(|r| r.0).fold(0.0, f64::max);
    let grad = per_row.iter().map(|r| r.1).fold(0.0, f64::max);
    // a flat sheet has only rounding noise to normalize by
    let flat = grad <= 1e-10 * sup_norm(f.trace.values()).max(1.0);
    Ok(if flat { res } else { res / grad })
}

/// Small-λ behavior of ũ − u at a node of a piecewise-linear trace.
fn trace_basis(s: f64, l: f64) -> [f64; TRACE_ROWS] {
    if (2.0 * s - 1.0).abs() < 0.05 {
        [1.0, l, l * l.ln(), l * l]
    } else {
        [1.0, l.powf(2.0 * s), l, l * l]
    }
}

const TRACE_ROWS: usize = 4;

/// sup|ũ(x, 0⁺) − u| with ũ(x, 0⁺) extrapolated from the first four
/// positive rows. Open traces jump to their tail value at ±X, so the two
/// end nodes are skipped there.
pub fn trace_defect(f: &ExtensionField, atom: usize) -> Result<f64> {
    let sheet = f
        .sheets
        .get(atom)
        .ok_or_else(|| Error::Domain(format!("no sheet {atom}")))?;
    if f.lambda.len() <= TRACE_ROWS {
        return domain("too few positive λ rows");
    }
    let m: Vec<Vec<f64>> = (1..=TRACE_ROWS).map(|j| trace_basis(sheet.s, f.lambda.values[j]).to_vec()).collect();
    // c with Σ_j c_j ũ(λ_j) = coefficient of the constant term
    let mt: Vec<Vec<f64>> = (0..TRACE_ROWS).map(|a| (0..TRACE_ROWS).map(|b| m[b][a]).collect()).collect();
    let mut e0 = vec![0.0; TRACE_ROWS];
    e0[0] = 1.0;
    let c = solve_dense(mt, e0).ok_or_else(|| Error::Domain("trace fit is singular".into()))?;
    let n = f.n();
    let range = if f.trace.tail() == Tail::Periodic { 0..n } else { 1..n - 1 };
    let err: Vec<f64> = range
        .map(|i| {
            let ext: f64 = (0..TRACE_ROWS).map(|k| c[k] * f.row(sheet, k + 1)[i]).sum();
            ext - f.trace.values()[i]
        })
        .collect();
    Ok(sup_norm(&err))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBound {
    pub s: f64,
    pub range: (f64, f64),
    pub trace_range: (f64, f64),
    pub max_principle: bool,
    pub sup_grad_x: f64,
    pub trace_sup_grad: f64,
    pub grad_x_bound: bool,
    /// sup over positive rows of λ·|∇ũ|
    pub sup_lambda_grad: f64,
}

const BOUND_SLACK: f64 = 1e-10;

/// Bounds on |ũ_s|, |∇_xũ_s| and λ|∇ũ_s| from the maximum principle.
pub fn gradient_bound_check(f: &ExtensionField) -> Vec<GradientBound> {
    let u = f.trace.values();
    let (ul, ur) = f.trace.tail_values();
    let periodic = f.trace.tail() == Tail::Periodic;
    let mut lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !periodic {
        lo = lo.min(ul).min(ur);
        hi = hi.max(ul).max(ur);
    }
    let h = f.trace.h();
    let n = f.n();
    let slope = |row: &[f64]| -> f64 {
        let mut m: f64 = (0..n - 1).map(|i| (row[i + 1] - row[i]).abs()).fold(0.0, f64::max);
        if periodic {
            m = m.max((row[0] - row[n - 1]).abs());
        }
        m / h
    };
    let trace_grad = slope(u);
    f.sheets
        .par_iter()
        .map(|sheet| {
            let mut rlo = f64::INFINITY;
            let mut rhi = f64::NEG_INFINITY;
            let mut gx: f64 = 0.0;
            let mut lg: f64 = 0.0;
            for j in 0..f.lambda.len() {
                let row = f.row(sheet, j);
                for &v in row {
                    rlo = rlo.min(v);
                    rhi = rhi.max(v);
                }
                let sx = slope(row);
                gx = gx.max(sx);
                if j > 0 {
                    let dl = sup_norm(f.drow(sheet, j));
                    lg = lg.max(f.lambda.values[j] * sx.hypot(dl));
                }
            }
            GradientBound {
                s: sheet.s,
                range: (rlo, rhi),
                trace_range: (lo, hi),
                max_principle: rlo >= lo - BOUND_SLACK && rhi <= hi + BOUND_SLACK,
                sup_grad_x: gx,
                trace_sup_grad: trace_grad,
                grad_x_bound: gx <= trace_grad * (1.0 + BOUND_SLACK) + BOUND_SLACK,
                sup_lambda_grad: lg,
            }
        })
        .collect()
}

/// ∫_{C_R} λ^{1−2s}|∇ũ_s|² for one sheet.
pub fn cylinder_dirichlet(f: &ExtensionField, atom: usize, r: f64) -> Result<f64> {
    let sheet = f
        .sheets
        .get(atom)
        .ok_or_else(|| Error::Domain(format!("no sheet {atom}")))?;
    let (il, ir) = ball_indices(&f.trace, r)?;
    let lam = &f.lambda.values;
    let top = *lam.last().expect("nonempty");
    if r > top * (1.0 + 1e-12) {
        return domain(format!("cylinder height {r} exceeds the λ-grid ({top})"));
    }
    let a = 1.0 - 2.0 * sheet.s;
    let h = f.trace.h();
    let below: Vec<usize> = (1..lam.len()).filter(|&j| lam[j] < r).collect();
    let last = *below.last().ok_or_else(|| Error::Domain("λ-grid starts above R".into()))?;
    let cut = if last + 1 < lam.len() { Some(last + 1) } else { None };
    let per_node: Vec<f64> = (il..=ir)
        .into_par_iter()
        .map(|i| {
            let parts = |j: usize| -> (f64, f64) {
                let row = f.row(sheet, j);
                let ux = (row[i - 2] - 8.0 * row[i - 1] + 8.0 * row[i + 1] - row[i + 2]) / (12.0 * h);
                let ul = f.drow(sheet, j)[i];
                let w = lam[j].powf(a);
                (w * ux * ux, w * ul * ul)
            };
            // (log λ, λ·integrand) samples
            let mut pts: Vec<(f64, f64)> = below
                .iter()
                .map(|&j| {
                    let (gx, gl) = parts(j);
                    (lam[j].ln(), lam[j] * (gx + gl))
                })
                .collect();
            if let Some(jc) = cut {
                let (gx0, gl0) = parts(last);
                let (gx1, gl1) = parts(jc);
                let t = (r.ln() - lam[last].ln()) / (lam[jc].ln() - lam[last].ln());
                let g = (1.0 - t) * (gx0 + gl0) + t * (gx1 + gl1);
                pts.push((r.ln(), r * g));
            }
            let mut acc: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).collect();
            // λ^a ũ_x² ~ λ^a and λ^a ũ_λ² ~ λ^{-a} below the first row
            let (gx, gl) = parts(1);
            acc.push(gx * lam[1] / (2.0 - 2.0 * sheet.s) + gl * lam[1] / (2.0 * sheet.s));
            let wt = if i == il || i == ir { 0.5 * h } else { h };
            wt * pairwise_sum(&acc)
        })
        .collect();
    Ok(pairwise_sum(&per_node))
}

fn check_atoms(f: &ExtensionField, m: &SpectralMeasure) -> Result<()> {
    let same = f.sheets.len() == m.atoms().len() && f.sheets.iter().zip(m.atoms()).all(|(sh, a)| sh.s == a.s);
    if same {
        Ok(())
    } else {
        Err(Error::Measure("field sheets do not match the atoms of the measure".into()))
    }
}

/// ∫_{B_R} |u'|² of the piecewise-linear trace.
fn trace_dirichlet(u: &GridFunction, r: f64) -> Result<f64> {
    let (il, ir) = ball_indices(u, r)?;
    let v = u.values();
    let cells: Vec<f64> = (il..ir).map(|j| (v[j + 1] - v[j]).powi(2) / u.h()).collect();
    Ok(pairwise_sum(&cells))
}

/// K̃(ũ, C_R) = ½ Σ wᵢ d(sᵢ) ∫_{C_R} λ^{1−2sᵢ}|∇ũᵢ|² + ½ μ({1}) ∫_{B_R}|u'|².
pub fn extended_kinetic(f: &ExtensionField, m: &SpectralMeasure, r: f64) -> Result<f64> {
    check_atoms(f, m)?;
    let mut terms = Vec::new();
    for (i, a) in m.atoms().iter().enumerate() {
        let d = calibrate_d(a.s)?.d;
        terms.push(0.5 * a.weight * d * cylinder_dirichlet(f, i, r)?);
    }
    if m.lap_mass() > 0.0 {
        terms.push(0.5 * m.lap_mass() * trace_dirichlet(&f.trace, r)?);
    }
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderRow {
    pub r: f64,
    pub k_tilde: f64,
    pub k_ball: f64,
    pub diff: f64,
    pub phi: f64,
    pub diff_over_phi: f64,
    /// Ẽ(ũ, C_R) = K̃ + ∫_{B_R} W(u)
    pub e_tilde: f64,
    pub e_tilde_over_phi: f64,
}

/// K̃ on cylinders against K on their bottoms, scaled by Φ_{1,s*}(R).
pub fn cylinder_ball_compare(f: &ExtensionField, m: &SpectralMeasure, p: &Potential, r_list: &[f64]) -> Result<Vec<CylinderRow>> {
    let mut rows = Vec::new();
    for &r in r_list {
        let k_tilde = extended_kinetic(f, m, r)?;
        let e = total_energy(&f.trace, m, p, r)?;
        let k_ball = e.total - e.potential;
        let diff = (k_tilde - k_ball).abs();
        let phi = phi(1, m.s_star(), r)?;
        let e_tilde = k_tilde + e.potential;
        rows.push(CylinderRow {
            r,
            k_tilde,
            k_ball,
            diff,
            phi,
            diff_over_phi: diff / phi,
            e_tilde,
            e_tilde_over_phi: e_tilde / phi,
        });
    }
    Ok(rows)
}

/// Σ wᵢ d(sᵢ) fluxᵢ + μ({1})(−Δ_h u) + W'(u) on the trace grid.
pub fn neumann_closure(f: &ExtensionField, m: &SpectralMeasure, p: &Potential) -> Result<GridFunction> {
    check_atoms(f, m)?;
    let n = f.n();
    let mut acc = vec![0.0; n];
    for (i, a) in m.atoms().iter().enumerate() {
        let d = calibrate_d(a.s)?.d;
        let flux = neumann_flux(f, i)?;
        for (x, v) in acc.iter_mut().zip(flux.values.values()) {
            *x += a.weight * d * v;
        }
    }
    if m.lap_mass() > 0.0 {
        for (x, v) in acc.iter_mut().zip(neg_laplacian_h(&f.trace)) {
            *x += m.lap_mass() * v;
        }
    }
    for (x, u) in acc.iter_mut().zip(f.trace.values()) {
        *x += p.dw(*u);
    }
    Ok(f.trace.with_values(acc))
}

/// sup of the closure on |x| ≤ X − 2.
pub fn neumann_closure_sup(f: &ExtensionField, m: &SpectralMeasure, p: &Potential) -> Result<f64> {
    let c = neumann_closure(f, m, p)?;
    let lim = f.trace.half_width() - 2.0;
    let v: Vec<f64> = (0..c.n()).filter(|&i| c.x(i).abs() <= lim).map(|i| c.values()[i]).collect();
    Ok(sup_norm(&v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSummary {
    pub s: f64,
    pub weight: f64,
    pub d: f64,
    pub calibration_residual: f64,
    pub pde_residual: f64,
    pub trace_defect: f64,
    pub flux_spread: f64,
    pub flux_converged: bool,
    /// sup|d·flux − (−Δ)^s u| / sup|(−Δ)^s u| on |x| ≤ X/2, open grids only
    pub flux_error: Option<f64>,
    pub bounds: GradientBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSummary {
    pub n: usize,
    pub lambda_rows: usize,
    pub lambda_ratio: f64,
    pub atoms: Vec<AtomSummary>,
    pub closure_sup: Option<f64>,
}

pub fn summarize(f: &ExtensionField, m: &SpectralMeasure, p: Option<&Potential>) -> Result<ExtensionSummary> {
    check_atoms(f, m)?;
    let bounds = gradient_bound_check(f);
    let mut atoms = Vec::new();
    for (i, a) in m.atoms().iter().enumerate() {
        let cal = calibrate_d(a.s)?;
        let flux = neumann_flux(f, i)?;
        let flux_error = if f.trace.tail() == Tail::Periodic {
            None
        } else {
            let q = frac_laplacian_quadrature_all(&f.trace, a.s)?;
            let lim = 0.5 * f.trace.half_width();
            let idx: Vec<usize> = (0..f.n()).filter(|&j| f.trace.x(j).abs() <= lim).collect();
            let err: Vec<f64> = idx.iter().map(|&j| cal.d * flux.values.values()[j] - q.values()[j]).collect();
            let scale: Vec<f64> = idx.iter().map(|&j| q.values()[j]).collect();
            Some(sup_norm(&err) / sup_norm(&scale))
        };
        atoms.push(AtomSummary {
            s: a.s,
            weight: a.weight,
            d: cal.d,
            calibration_residual: cal.residual,
            pde_residual: weighted_pde_residual(f, i)?,
            trace_defect: trace_defect(f, i)?,
            flux_spread: flux.spread,
            flux_converged: flux.converged,
            flux_error,
            bounds: bounds[i].clone(),
        });
    }
    let closure_sup = match p {
        Some(p) if f.trace.tail() != Tail::Periodic => Some(neumann_closure_sup(f, m, p)?),
        _ => None,
    };
    Ok(ExtensionSummary { n: f.n(), lambda_rows: f.lambda.len(), lambda_ratio: f.lambda.ratio(), atoms, closure_sup })
}

/// Flat CSV `x,lambda,s,value`, keeping every `stride`-th x node.
pub fn write_field_csv(path: &std::path::Path, f: &ExtensionField, stride: usize) -> Result<()> {
    use std::io::Write;
    let stride = stride.max(1);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,lambda,s,value")?;
    for sheet in &f.sheets {
        for (j, &l) in f.lambda.values.iter().enumerate() {
            let row = f.row(sheet, j);
            for i in (0..f.n()).step_by(stride) {
                writeln!(w, "{},{},{},{}", f.trace.x(i), l, sheet.s, row[i])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &std::path::Path, summary: &ExtensionSummary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn arctan_field(s: f64) -> ExtensionField {
        let u = GridFunction::from_fn_1d(40.0, 801, Tail::Layer, |x| 2.0 / PI * x.atan()).unwrap();
        let lg = LambdaGrid::default_for(u.h(), 20.0).unwrap();
        extend(&u, &SpectralMeasure::single(s).unwrap(), &lg).unwrap()
    }

    #[test]
    fn cauchy_kernel_closed_form() {
        for (x, l) in [(0.0, 1.0), (0.3, 0.2), (-2.0, 5.0)] {
            let p = poisson_kernel(0.5, x, l).unwrap();
            assert!((p - l / (PI * (x * x + l * l))).abs() < 1e-14);
        }
        assert!(poisson_kernel(0.5, 0.0, 0.0).is_err());
        assert!(poisson_kernel(0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn kernel_cdf_and_antiderivatives() {
        let k = Kernel::new(0.3).unwrap();
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-14);
        let g = GaussLegendre::new(20);
        let mass = g.integrate_composite(-2.0, 1.5, 40, |z| k.phat(z));
        assert!((k.cdf(1.5) - k.cdf(-2.0) - mass).abs() < 1e-12);
        let m1 = g.integrate_composite(0.0, 3.0, 40, |z| z * k.phat(z));
        assert!((k.first_moment(3.0) - m1).abs() < 1e-12);
        // Ψ'' = P by central differences
        let (x, l, e) = (0.4, 0.7, 1e-3);
        let d2 = (k.psi(x + e, l) - 2.0 * k.psi(x, l) + k.psi(x - e, l)) / (e * e);
        assert!((d2 - k.p(x, l)).abs() < 1e-5);
        let dl = (k.psi(x, l + e) - k.psi(x, l - e)) / (2.0 * e);
        assert!((dl - k.dpsi(x, l)).abs() < 1e-7);
    }

    #[test]
    fn hat_weights_agree_between_routes() {
        let k = Kernel::new(0.65).unwrap();
        let h = 0.1;
        let l = 0.3;
        for j in [0usize, 1, 5, 20] {
            let d = j as f64 * h;
            let exact = (k.psi(d + h, l) - 2.0 * k.psi(d, l) + k.psi(d - h, l)) / h;
            let g = GaussLegendre::new(20);
            let quad = g.integrate_composite(-h, 0.0, 8, |t| (1.0 + t / h) * k.p(d - t, l))
                + g.integrate_composite(0.0, h, 8, |t| (1.0 - t / h) * k.p(d - t, l));
            assert!((exact - quad).abs() < 1e-11, "j={j}: {exact} vs {quad}");
        }
    }

    #[test]
    fn constant_trace_gives_constant_sheets() {
        let u = GridFunction::from_fn_1d(10.0, 101, Tail::Flat, |_| 0.7).unwrap();
        let lg = LambdaGrid::default_for(u.h(), 5.0).unwrap();
        let m = SpectralMeasure::new(&[(0.3, 0.5), (0.8, 0.5)], 0.0).unwrap();
        let f = extend(&u, &m, &lg).unwrap();
        for sh in &f.sheets {
            assert!(sh.values.iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
        assert!(weighted_pde_residual(&f, 0).unwrap() < 1e-9);
        for b in gradient_bound_check(&f) {
            assert!(b.max_principle && b.grad_x_bound);
        }
    }

    #[test]
    fn row_zero_is_the_trace() {
        let f = arctan_field(0.4);
        assert_eq!(f.row(&f.sheets[0], 0), f.trace.values());
    }

    #[test]
    fn max_principle_on_layer() {
        for s in [0.2, 0.5, 0.9] {
            let f = arctan_field(s);
            let b = &gradient_bound_check(&f)[0];
            assert!(b.max_principle, "{b:?}");
            assert!(b.grad_x_bound, "{b:?}");
        }
    }

    #[test]
    fn noise_sheet_fails_pde() {
        use rand::{Rng, SeedableRng};
        let mut f = arctan_field(0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for v in f.sheets[0].values.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        assert!(weighted_pde_residual(&f, 0).unwrap() > 0.5);
    }

    #[test]
    fn flux_exponents_drop_duplicates() {
        assert_eq!(flux_exponents(0.5), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(flux_exponents(0.0).len(), 4);
    }

    #[test]
    fn lambda_grid_shape() {
        let g = LambdaGrid::default_for(0.1, 50.0).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g.values[0], 0.0);
        assert!((g.values[1] - 0.025).abs() < 1e-15);
        assert_eq!(*g.values.last().unwrap(), 50.0);
        assert!(LambdaGrid::geometric(1.0, 0.5, 10).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let f = arctan_field(0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field_csv(&path, &f, 100).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 9 * f.lambda.len());
        assert!(text.starts_with("x,lambda,s,value"));
    }
}
