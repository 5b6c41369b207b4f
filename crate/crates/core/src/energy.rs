//! Nonlocal energies on Ω = B_R: K^s, K, E, the scalar product, the
//! exterior flux term and the kernel integral bounded in the energy estimate.
//!
//! Interior double integrals use the same hat-function product integration
//! in the offset variable as the operator; the part of CΩ beyond the grid is
//! integrated in closed form with the constant far-field values.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{c_ns, phi};
use crate::error::{domain, Error, Result};
use crate::grid::{GridFunction, Tail};
use crate::measure::SpectralMeasure;
use crate::operator::quadrature::hat_moments;
use crate::operator::{check_quad_s, Assembled1d};
use crate::potential::Potential;
use crate::reduce::pairwise_sum;
use crate::special::{gl10, gl20};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_atom_kinetic: Vec<(f64, f64)>,
    pub lap_kinetic: f64,
    pub potential: f64,
    pub total: f64,
    pub r: f64,
    pub phi_ref: f64,
}

/// Node indices (iL, iR) of ±R on a 1-D grid.
pub(crate) fn ball_indices(u: &GridFunction, r: f64) -> Result<(usize, usize)> {
    if u.dim() != 1 {
        return Err(Error::Grid("energies are implemented on 1-D grids".into()));
    }
    if u.tail() == Tail::Periodic {
        return Err(Error::Backend { backend: "energy", tail: u.tail().to_string() });
    }
    if !(r > 0.0) || r > u.half_width() - 2.0 + 1e-9 {
        return domain(format!("R = {r} must lie in (0, X-2] with X = {}", u.half_width()));
    }
    let h = u.h();
    let t = (r + u.half_width()) / h;
    let ir = t.round();
    if (t - ir).abs() > 1e-6 {
        return domain(format!("R = {r} is not a grid node (h = {h})"));
    }
    let ir = ir as usize;
    Ok((u.n() - 1 - ir, ir))
}

fn trap_weight(i: usize, il: usize, ir: usize, h: f64) -> f64 {
    if i == il || i == ir {
        0.5 * h
    } else {
        h
    }
}

/// (c/2)[∬_{Ω×Ω} + 2∬_{Ω×CΩ}] (u(x)-u(y))(v(x)-v(y)) |x-y|^{-1-2s}.
fn bilinear_s(u: &GridFunction, v: &GridFunction, s: f64, r: f64) -> Result<f64> {
    check_quad_s(s)?;
    if !u.same_grid(v) {
        return Err(Error::Grid("scalar product needs a shared grid".into()));
    }
    let (il, ir) = ball_indices(u, r)?;
    let n = u.n();
    let h = u.h();
    let p = 1.0 - 2.0 * s;
    let (left, right) = hat_moments(p, n);
    let b0 = right[0];
    let (ul, ur) = u.tail_values();
    let (vl, vr) = v.tail_values();
    let uu = u.values();
    let vv = v.values();
    let per_node: Vec<f64> = (il..=ir)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut q = [[0.0; 2]; 2];
            for (di, &d) in [1isize, -1].iter().enumerate() {
                let kd = if d > 0 { n - 1 - i } else { i };
                let kb = if d > 0 { ir - i } else { i - il };
                let a = |k: usize| {
                    let j = (i as isize + d * k as isize) as usize;
                    (uu[i] - uu[j]) * (vv[i] - vv[j])
                };
                q[di][0] = a(1);
                q[di][1] = a(2) / 4.0;
                for k in 1..=kd {
                    let wl = if k <= kb { 1.0 } else { 2.0 };
                    let wr = if k < kb { 1.0 } else { 2.0 };
                    let mut m = left[k] * wl;
                    if k < kd {
                        m += right[k] * wr;
                    }
                    acc += a(k) / (k * k) as f64 * m;
                }
                let (ut, vt) = if d > 0 { (ur, vr) } else { (ul, vl) };
                let a_inf = (uu[i] - ut) * (vv[i] - vt);
                acc += 2.0 * a_inf * (kd as f64).powf(-2.0 * s) / (2.0 * s);
            }
            // q(0) = u'v' from both directions
            let q1 = 0.5 * (q[0][0] + q[1][0]);
            let q2 = 0.5 * (q[0][1] + q[1][1]);
            let q0 = (4.0 * q1 - q2) / 3.0;
            let wp = if ir > i { 1.0 } else { 2.0 };
            let wm = if i > il { 1.0 } else { 2.0 };
            acc += b0 * q0 * (wp + wm);
            trap_weight(i, il, ir, h) * acc * h.powf(-2.0 * s)
        })
        .collect();
    Ok(0.5 * c_ns(1, s)? * pairwise_sum(&per_node))
}

/// ∫_Ω u'v' with u, v piecewise linear.
fn bilinear_lap(u: &GridFunction, v: &GridFunction, r: f64) -> Result<f64> {
    let (il, ir) = ball_indices(u, r)?;
    let h = u.h();
    let (a, b) = (u.values(), v.values());
    let cells: Vec<f64> = (il..ir).map(|j| (a[j + 1] - a[j]) * (b[j + 1] - b[j]) / h).collect();
    Ok(pairwise_sum(&cells))
}

/// K^s(u, B_R).
pub fn kinetic_s(u: &GridFunction, s: f64, r: f64) -> Result<f64> {
    Ok(0.5 * bilinear_s(u, u, s, r)?)
}

/// ⟨u, v⟩ on B_R for the measure m; the s = 1 mass contributes ∫_Ω u'v'.
pub fn scalar_product(u: &GridFunction, v: &GridFunction, m: &SpectralMeasure, r: f64) -> Result<f64> {
    let mut terms = Vec::new();
    for a in m.atoms() {
        terms.push(a.weight * bilinear_s(u, v, a.s, r)?);
    }
    if m.lap_mass() > 0.0 {
        terms.push(m.lap_mass() * bilinear_lap(u, v, r)?);
    }
    Ok(pairwise_sum(&terms))
}

/// ∫_Ω W(u) by the trapezoid rule.
pub fn potential_energy(u: &GridFunction, p: &Potential, r: f64) -> Result<f64> {
    let (il, ir) = ball_indices(u, r)?;
    let h = u.h();
    let vals: Vec<f64> = (il..=ir).map(|i| trap_weight(i, il, ir, h) * p.w(u.values()[i])).collect();
    Ok(pairwise_sum(&vals))
}

pub fn total_energy(u: &GridFunction, m: &SpectralMeasure, p: &Potential, r: f64) -> Result<EnergyBreakdown> {
    let mut per_atom = Vec::new();
    for a in m.atoms() {
        per_atom.push((a.s, kinetic_s(u, a.s, r)?));
    }
    let lap_kinetic = if m.lap_mass() > 0.0 { 0.5 * bilinear_lap(u, u, r)? } else { 0.0 };
    let potential = potential_energy(u, p, r)?;
    let mut terms: Vec<f64> = m.atoms().iter().zip(&per_atom).map(|(a, k)| a.weight * k.1).collect();
    terms.push(m.lap_mass() * lap_kinetic);
    terms.push(potential);
    let total = pairwise_sum(&terms);
    let phi_ref = if r >= 2.0 { phi(1, m.s_star(), r)? } else { f64::NAN };
    Ok(EnergyBreakdown { per_atom_kinetic: per_atom, lap_kinetic, potential, total, r, phi_ref })
}

/// ∫_Ω (u(x)-u(y)) |x-y|^{-1-2s} dy for x outside [-R, R], in the variable
/// τ = log|x-y|.
fn exterior_inner(u: &GridFunction, x: f64, r: f64, s: f64) -> f64 {
    let (d, sign) = if x > 0.0 { (x - r, -1.0) } else { (-r - x, 1.0) };
    let ux = u.interp(x);
    let (t0, t1) = (d.ln(), (d + 2.0 * r).ln());
    let panels = ((t1 - t0) / 0.5).ceil().max(1.0) as usize;
    gl10().integrate_composite(t0, t1, panels, |t| {
        let c = t.exp();
        (ux - u.interp(x + sign * c)) * c.powf(-2.0 * s)
    })
}

/// c₁(s) ∫_{CΩ} dx ∫_Ω dy (u(x)-u(y)) |x-y|^{-1-2s} v(x).
pub fn nonlocal_flux(u: &GridFunction, v: &GridFunction, s: f64, r: f64) -> Result<f64> {
    check_quad_s(s)?;
    if !u.same_grid(v) {
        return Err(Error::Grid("flux needs a shared grid".into()));
    }
    let (il, ir) = ball_indices(u, r)?;
    let x0 = u.half_width();
    let h = u.h();
    let span = x0 - r;
    let d1 = span.min(1.0);
    // d = d1 σ^m removes the d^{1-2s} endpoint behaviour of the inner integral
    let m = 2.0 / (2.0 - 2.0 * s);
    let (ul, ur) = u.tail_values();
    let (vl, vr) = v.tail_values();
    let mut sides = Vec::new();
    for &side in &[1.0, -1.0] {
        let f = |d: f64| {
            let x = side * (r + d);
            v.interp(x) * exterior_inner(u, x, r, s)
        };
        let near = gl20().integrate_composite(0.0, 1.0, 4, |sig| {
            let d = d1 * sig.powf(m);
            f(d) * d1 * m * sig.powf(m - 1.0)
        });
        let panels = ((span - d1) / 0.5).ceil().max(1.0) as usize;
        let mid = if span > d1 { gl10().integrate_composite(d1, span, panels, f) } else { 0.0 };
        // x beyond the grid: constant tails, x-integral in closed form
        let (ut, vt) = if side > 0.0 { (ur, vr) } else { (ul, vl) };
        let far: Vec<f64> = (il..=ir)
            .map(|i| {
                let y = u.x(i);
                let dist = x0 - side * y;
                trap_weight(i, il, ir, h) * (ut - u.values()[i]) * dist.powf(-2.0 * s) / (2.0 * s)
            })
            .collect();
        sides.push(near + mid + vt * pairwise_sum(&far));
    }
    Ok(c_ns(1, s)? * pairwise_sum(&sides))
}

/// Relative defect of ⟨u,v⟩ = ∫_Ω v Lu + Σ wᵢ flux_{sᵢ} (+ the classical
/// boundary term [u'v] for the s = 1 mass).
pub fn verify_ibp(u: &GridFunction, v: &GridFunction, m: &SpectralMeasure, r: f64) -> Result<f64> {
    let (il, ir) = ball_indices(u, r)?;
    let h = u.h();
    let lhs = scalar_product(u, v, m, r)?;
    let op = Assembled1d::build(u, m, 1.0, m.lap_mass())?;
    let lu = op.apply(u.values());
    let bulk: Vec<f64> = (il..=ir).map(|i| trap_weight(i, il, ir, h) * lu[i] * v.values()[i]).collect();
    let mut rhs = vec![pairwise_sum(&bulk)];
    for a in m.atoms() {
        rhs.push(a.weight * nonlocal_flux(u, v, a.s, r)?);
    }
    if m.lap_mass() > 0.0 {
        let uu = u.values();
        let du = |i: usize| (uu[i + 1] - uu[i - 1]) / (2.0 * h);
        rhs.push(m.lap_mass() * (du(ir) * v.values()[ir] - du(il) * v.values()[il]));
    }
    let rhs = pairwise_sum(&rhs);
    Ok((lhs - rhs).abs() / lhs.abs().max(1.0))
}

/// ∫_D^∞ min(1, t) t^{-1-2s} dt.
fn min_kernel_tail(d: f64, s: f64) -> f64 {
    if d >= 1.0 {
        return d.powf(-2.0 * s) / (2.0 * s);
    }
    let e = 1.0 - 2.0 * s;
    let near = if e.abs() < 1e-12 { -d.ln() } else { (1.0 - d.powf(e)) / e };
    near + 1.0 / (2.0 * s)
}

/// ∫_0^L g(D) dD for g with a D^{1-2s} or log singularity at 0.
fn graded_integral(len: f64, s: f64, g: impl Fn(f64) -> f64) -> f64 {
    let d1 = len.min(1.0);
    let m = 2.0 / (2.0 - 2.0 * s);
    let near = gl20().integrate_composite(0.0, 1.0, 4, |sig| g(d1 * sig.powf(m)) * d1 * m * sig.powf(m - 1.0));
    let far = if len > d1 {
        let (a, b) = (d1.ln(), len.ln());
        let panels = ((b - a) / 0.5).ceil() as usize;
        gl20().integrate_composite(a, b, panels, |t| g(t.exp()) * t.exp())
    } else {
        0.0
    };
    near + far
}

/// c_n(s) ∫_{B_R} ∫_{CB_R} min{1, |x-y|} |x-y|^{-n-2s} dy dx for n ∈ {1, 2}.
pub fn claim41_integral(n: usize, s: f64, r: f64) -> Result<f64> {
    if r < 2.0 {
        return domain(format!("R = {r} must be >= 2"));
    }
    let c = c_ns(n, s)?;
    match n {
        1 => Ok(c * 2.0 * graded_integral(2.0 * r, s, |d| min_kernel_tail(d, s))),
        2 => {
            let inner = |d: f64| {
                // node at distance d from the circle; θ measured from the
                // outward normal, graded towards θ = 0
                let rho = r - d;
                let rb = |th: f64| -> f64 {
                    let st = th.sin();
                    (r * r - rho * rho * st * st).max(0.0).sqrt() - rho * th.cos()
                };
                let mut cuts = vec![0.0];
                let mut t = (d.max(1e-12) / r).sqrt();
                while t < PI {
                    cuts.push(t);
                    t *= 2.0;
                }
                cuts.push(PI);
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    acc += gl10().integrate(w[0], w[1], |th| min_kernel_tail(rb(th), s));
                }
                2.0 * acc * 2.0 * PI * rho
            };
            Ok(c * graded_integral(r, s, inner))
        }
        _ => domain(format!("dimension {n} not supported")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(c: f64, w: f64) -> impl Fn(f64) -> f64 {
        move |x| (-(x - c) * (x - c) / (w * w)).exp()
    }

    fn layer_grid(x0: f64, n: usize) -> GridFunction {
        GridFunction::from_fn_1d(x0, n, Tail::Layer, |x| 2.0 / PI * x.atan()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn kinetic_is_half_the_form(s in 0.1..0.9f64, c in -2.0..2.0f64, w in 0.5..3.0f64) {
            let u = GridFunction::from_fn_1d(12.0, 241, Tail::Zero, bump(c, w)).unwrap();
            let m = SpectralMeasure::single(s).unwrap();
            let k = kinetic_s(&u, s, 6.0).unwrap();
            let form = scalar_product(&u, &u, &m, 6.0).unwrap();
            prop_assert!(k >= 0.0);
            prop_assert!((k - 0.5 * form).abs() <= 1e-10 * k.abs());
        }

        #[test]
        fn cauchy_schwarz(s in 0.1..0.9f64, c1 in -3.0..3.0f64, c2 in -3.0..3.0f64, w in 0.5..3.0f64) {
            let u = GridFunction::from_fn_1d(12.0, 241, Tail::Layer, |x| (x + c1).tanh()).unwrap();
            let v = GridFunction::from_fn_1d(12.0, 241, Tail::Layer, move |x| bump(c2, w)(x) + ((x - c2) / w).tanh()).unwrap();
            let m = SpectralMeasure::new(&[(s, 0.8)], 0.2).unwrap();
            let uv = scalar_product(&u, &v, &m, 8.0).unwrap();
            let uu = scalar_product(&u, &u, &m, 8.0).unwrap();
            let vv = scalar_product(&v, &v, &m, 8.0).unwrap();
            prop_assert!(uv * uv <= uu * vv * (1.0 + 1e-12));
        }

        #[test]
        fn kinetic_grows_with_the_ball(s in 0.1..0.9f64, c in -3.0..3.0f64) {
            let u = GridFunction::from_fn_1d(20.0, 401, Tail::Layer, |x| ((x - c) / 1.5).tanh()).unwrap();
            let mut prev = 0.0;
            for r in [1.0, 2.0, 4.0, 8.0, 16.0] {
                let k = kinetic_s(&u, s, r).unwrap();
                prop_assert!(k >= prev);
                prev = k;
            }
        }
    }

    #[test]
    fn dilation_law() {
        // u_λ(x) = u(x/λ) on B_{λR}: K^s scales by λ^{1-2s}
        let lam = 2.0;
        for s in [0.25, 0.5, 0.75] {
            let u = GridFunction::from_fn_1d(16.0, 641, Tail::Zero, bump(0.0, 1.0)).unwrap();
            let ul = GridFunction::from_fn_1d(32.0, 1281, Tail::Zero, |x| bump(0.0, 1.0)(x / lam)).unwrap();
            let k = kinetic_s(&u, s, 4.0).unwrap();
            let kl = kinetic_s(&ul, s, 8.0).unwrap();
            let ratio = kl / (lam.powf(1.0 - 2.0 * s) * k);
            assert!((ratio - 1.0).abs() < 0.02, "s={s}: {ratio}");
        }
    }

    #[test]
    fn quartic_potential_energy_closed_form() {
        let u = GridFunction::from_fn_1d(20.0, 801, Tail::Layer, |x| (x / 2f64.sqrt()).tanh()).unwrap();
        for r in [1.0, 5.0, 10.0] {
            let t = (r / 2f64.sqrt()).tanh();
            let exact = 2f64.sqrt() / 2.0 * (t - t * t * t / 3.0);
            let got = potential_energy(&u, &Potential::Quartic, r).unwrap();
            assert!((got - exact).abs() < 1e-4, "R={r}: {got} vs {exact}");
        }
    }

    #[test]
    fn claim41_ratio_uniform_in_s() {
        let mut ratios = Vec::new();
        for i in 0..6 {
            let s = 0.25 + 0.1 * i as f64;
            for k in 1..=8 {
                let r = 2f64.powi(k);
                ratios.push(claim41_integral(1, s, r).unwrap() / phi(1, s, r).unwrap());
            }
        }
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 10.0, "{}", max / min);
        assert!(claim41_integral(1, 0.5, 1.0).is_err());
    }

    #[test]
    fn total_energy_sums_parts() {
        let u = layer_grid(30.0, 601);
        let m = SpectralMeasure::new(&[(0.3, 0.5), (0.7, 0.3)], 0.2).unwrap();
        let e = total_energy(&u, &m, &Potential::PeierlsNabarro, 10.0).unwrap();
        let sum = 0.5 * e.per_atom_kinetic[0].1 + 0.3 * e.per_atom_kinetic[1].1 + 0.2 * e.lap_kinetic + e.potential;
        assert!((e.total - sum).abs() < 1e-12 * e.total);
        assert!((e.phi_ref - phi(1, 0.3, 10.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn radius_must_be_a_node() {
        let u = layer_grid(10.0, 201);
        assert!(kinetic_s(&u, 0.5, 3.05).is_err());
        assert!(kinetic_s(&u, 0.5, 9.0).is_err());
        assert!(kinetic_s(&u, 0.99, 3.0).is_err());
    }
}
