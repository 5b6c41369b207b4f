//! Constrained minimization of the truncated energy
//! Q(u) = ½ u·L_δ u + Σ W(u) over |u| ≤ 1 with u ≡ ±1 outside (-R, R),
//! continuation in R and δ, and the diagnostics used to certify layers.

use serde::{Deserialize, Serialize};

use crate::constants::phi;
use crate::energy::{total_energy, EnergyBreakdown};
use crate::error::{domain, Error, Result};
use crate::grid::{GridFunction, Tail};
use crate::measure::SpectralMeasure;
use crate::operator::{Assembled1d, Backend, OperatorSpec};
use crate::potential::Potential;
use crate::reduce::{pairwise_dot, pairwise_sum, sup_norm};

/// Iterations with energy decrease below `FLAT_DECREASE` before the run is
/// declared converged-flat.
const FLAT_WINDOW: usize = 50;
const FLAT_DECREASE: f64 = 1e-14;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub delta_schedule: Vec<f64>,
    pub r_schedule: Vec<f64>,
    /// Grid spacing shared by all stages.
    pub h: f64,
    /// Initial step; later steps are Barzilai-Borwein.
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub projection_box: [f64; 2],
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta_schedule: vec![1e-2, 1e-3, 0.0],
            r_schedule: vec![25.0, 50.0, 100.0],
            h: 0.1,
            step: 0.05,
            tol: 1e-6,
            max_iters: 20000,
            projection_box: [-1.0, 1.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_schedule.is_empty() || self.r_schedule.is_empty() {
            return Err(Error::Config("schedules must be nonempty".into()));
        }
        if !(self.tol > 0.0) || !(self.step > 0.0) || !(self.h > 0.0) {
            return Err(Error::Config("tol, step and h must be positive".into()));
        }
        if self.delta_schedule.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::Config("delta values must lie in [0,1]".into()));
        }
        if self.delta_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("delta schedule must be descending".into()));
        }
        if self.r_schedule.windows(2).any(|w| w[1] < w[0]) || self.r_schedule.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("R schedule must be positive and ascending".into()));
        }
        if self.projection_box != [-1.0, 1.0] {
            return Err(Error::Config("projection box must be [-1, 1]".into()));
        }
        Ok(())
    }

    /// (R, δ) per stage: stage k uses the k-th entry of each schedule,
    /// holding the last entry of the shorter one.
    pub fn stages(&self) -> Vec<(f64, f64)> {
        let k = self.r_schedule.len().max(self.delta_schedule.len());
        (0..k)
            .map(|i| {
                let r = self.r_schedule[i.min(self.r_schedule.len() - 1)];
                let d = self.delta_schedule[i.min(self.delta_schedule.len() - 1)];
                (r, d)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub stage: usize,
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub monotone_defect: f64,
    pub odd_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub u: GridFunction,
    pub residual: f64,
    pub monotone_defect: f64,
    pub odd_defect: f64,
    pub limits: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
    /// Stopped on the stagnation rule rather than the tolerance.
    pub flat: bool,
    pub energy: f64,
    pub log: Vec<IterRecord>,
}

/// Options for the projected-gradient loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Descent {
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
}

pub(crate) struct DescentOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub flat: bool,
    pub q: f64,
    pub residual: f64,
}

fn clamp1(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking
/// for Q(u) = ½ u_F·(A u)_F + ½ u_F·c_F + Σ_F W(u), where A is affine
/// through the pinned values and c_F = (A u)_F at u_F = 0.
pub(crate) fn projected_gradient(
    apply: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    free: &[usize],
    pot: &Potential,
    u0: Vec<f64>,
    opts: Descent,
    mut on_iter: impl FnMut(usize, f64, f64, &[f64]),
) -> Result<DescentOutcome> {
    let mut u = u0;
    for &i in free {
        u[i] = clamp1(u[i]);
    }
    let mut zeroed = u.clone();
    for &i in free {
        zeroed[i] = 0.0;
    }
    let az = apply(&zeroed);
    let c: Vec<f64> = free.iter().map(|&i| az[i]).collect();
    let eval = |u: &[f64], au: &[f64]| -> (f64, Vec<f64>) {
        let quad: Vec<f64> = free.iter().zip(&c).map(|(&i, ci)| 0.5 * u[i] * (au[i] + ci)).collect();
        let wsum: Vec<f64> = free.iter().map(|&i| pot.w(u[i])).collect();
        let g: Vec<f64> = free.iter().map(|&i| au[i] + pot.dw(u[i])).collect();
        (pairwise_sum(&quad) + pairwise_sum(&wsum), g)
    };
    let (mut q, mut g) = eval(&u, &apply(&u));
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut flat_count = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut flat = false;
    loop {
        let pg: Vec<f64> = free.iter().zip(&g).map(|(&i, gi)| u[i] - clamp1(u[i] - gi)).collect();
        let pgn = sup_norm(&pg);
        on_iter(iterations, q, pgn, &u);
        if pgn <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        let uf: Vec<f64> = free.iter().map(|&i| u[i]).collect();
        let mut alpha = opts.step;
        if let Some((pu, pgr)) = &prev {
            let s: Vec<f64> = uf.iter().zip(pu).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pgr).map(|(a, b)| a - b).collect();
            let sy = pairwise_dot(&s, &y);
            if sy > 0.0 {
                alpha = (pairwise_dot(&s, &s) / sy).clamp(1e-12, 1e12);
            }
        }
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = u.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = clamp1(u[i] - alpha * g[k]);
            }
            let slope: Vec<f64> = free.iter().zip(&g).map(|(&i, gi)| gi * (trial[i] - u[i])).collect();
            let slope = pairwise_sum(&slope);
            let at = apply(&trial);
            let (qt, gt) = eval(&trial, &at);
            if qt <= q + ARMIJO * slope {
                accepted = Some((trial, qt, gt));
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        let Some((trial, qt, gt)) = accepted else {
            flat = true;
            break;
        };
        if qt > q {
            return Err(Error::DescentViolated { iter: iterations, before: q, after: qt });
        }
        if q - qt < FLAT_DECREASE * q.abs().max(1.0) {
            flat_count += 1;
        } else {
            flat_count = 0;
        }
        prev = Some((uf, g));
        u = trial;
        q = qt;
        g = gt;
        if flat_count >= FLAT_WINDOW {
            flat = true;
            break;
        }
    }
    let residual = sup_norm(&g);
    Ok(DescentOutcome { u, iterations, converged, flat, q, residual })
}

/// (monotone_defect, odd_defect) of a 1-D profile on a symmetric grid.
pub fn sliding_check(u: &GridFunction) -> Result<(f64, f64)> {
    if u.dim() != 1 {
        return Err(Error::Grid("sliding check needs a 1-D profile".into()));
    }
    let v = u.values();
    let n = v.len();
    let min_slope = v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let monotone = (-min_slope).max(0.0);
    let odd = (0..n).map(|i| (v[i] + v[n - 1 - i]).abs()).fold(0.0, f64::max);
    Ok((monotone, odd))
}

/// Grid on [-R, R] with spacing close to `h` (R is always a node).
pub fn stage_grid_size(r: f64, h: f64) -> usize {
    (2.0 * r / h).round() as usize + 1
}

/// clamp(x / R, -1, 1) on the stage grid.
pub fn ramp_init(r: f64, h: f64) -> Result<GridFunction> {
    GridFunction::from_fn_1d(r, stage_grid_size(r, h), Tail::Layer, |x| (x / r).clamp(-1.0, 1.0))
}

fn layer_operator(m: &SpectralMeasure, delta: f64, grid: &GridFunction) -> Result<Assembled1d> {
    let spec = OperatorSpec::new(m.clone(), delta, Backend::Quadrature)?;
    Assembled1d::for_spec(grid, &spec)
}

/// Minimizes the truncated energy on the grid of `init` (half-width R),
/// with u ≡ -1 left and +1 right of the box and the endpoints pinned.
pub fn solve_truncated(
    m: &SpectralMeasure,
    p: &Potential,
    delta: f64,
    init: &GridFunction,
    step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<LayerProfile> {
    solve_stage(m, p, delta, init, Descent { step, tol, max_iters }, 0)
}

fn solve_stage(
    m: &SpectralMeasure,
    p: &Potential,
    delta: f64,
    init: &GridFunction,
    opts: Descent,
    stage: usize,
) -> Result<LayerProfile> {
    if init.dim() != 1 || init.tail() != Tail::Layer {
        return Err(Error::Grid("initial profile must be 1-D with layer tails".into()));
    }
    if init.values().iter().any(|v| v.abs() > 1.0 + 1e-12) {
        return domain("initial profile must satisfy |u| <= 1");
    }
    let n = init.n();
    let op = layer_operator(m, delta, init)?;
    let apply = |u: &[f64]| op.apply(u);
    let free: Vec<usize> = (1..n - 1).collect();
    let mut u0 = init.values().to_vec();
    u0[0] = -1.0;
    u0[n - 1] = 1.0;
    let h = init.h();
    let mut log = Vec::new();
    let out = projected_gradient(&apply, &free, p, u0, opts, |iter, q, gn, u| {
        let g = init.with_values(u.to_vec());
        let (mono, odd) = sliding_check(&g).unwrap_or((f64::NAN, f64::NAN));
        log.push(IterRecord { stage, iter, energy: h * q, grad_norm: gn, monotone_defect: mono, odd_defect: odd });
    })?;
    let u = init.with_values(out.u);
    let (monotone_defect, odd_defect) = sliding_check(&u)?;
    let limits = (u.values()[0], u.values()[n - 1]);
    Ok(LayerProfile {
        u,
        residual: out.residual,
        monotone_defect,
        odd_defect,
        limits,
        iterations: out.iterations,
        converged: out.converged,
        flat: out.flat,
        energy: h * out.q,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub r: f64,
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flat: bool,
    pub residual: f64,
    pub energy: f64,
    pub monotone_defect: f64,
    pub odd_defect: f64,
    /// Largest second difference |u_{i+1} - 2u_i + u_{i-1}| / h².
    pub max_second_difference: f64,
    /// Sup change against the previous stage on the common interval.
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub profile: LayerProfile,
    pub stages: Vec<StageSummary>,
}

pub fn max_second_difference(u: &GridFunction) -> f64 {
    let v = u.values();
    let h2 = u.h() * u.h();
    v.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs() / h2).fold(0.0, f64::max)
}

/// Runs the stages of `cfg`, warm-starting each from the linear
/// interpolation of the previous profile with ±1 beyond its box.
pub fn continuation_solve(cfg: &SolverConfig, m: &SpectralMeasure, p: &Potential) -> Result<Continuation> {
    cfg.validate()?;
    let opts = Descent { step: cfg.step, tol: cfg.tol, max_iters: cfg.max_iters };
    let mut prev: Option<LayerProfile> = None;
    let mut stages = Vec::new();
    let mut log = Vec::new();
    for (k, (r, delta)) in cfg.stages().into_iter().enumerate() {
        let init = match &prev {
            None => ramp_init(r, cfg.h)?,
            Some(pr) => {
                let old = &pr.u;
                GridFunction::from_fn_1d(r, stage_grid_size(r, cfg.h), Tail::Layer, |x| old.interp(x))?
            }
        };
        let prof = solve_stage(m, p, delta, &init, opts, k).map_err(|e| Error::Stage { stage: k, source: Box::new(e) })?;
        let change = match &prev {
            None => f64::NAN,
            Some(pr) => {
                let lim = pr.u.half_width().min(r);
                prof.u
                    .coords()
                    .iter()
                    .zip(prof.u.values())
                    .filter(|(x, _)| x.abs() <= lim)
                    .map(|(x, v)| (v - pr.u.interp(*x)).abs())
                    .fold(0.0, f64::max)
            }
        };
        stages.push(StageSummary {
            stage: k,
            r,
            delta,
            iterations: prof.iterations,
            converged: prof.converged,
            flat: prof.flat,
            residual: prof.residual,
            energy: prof.energy,
            monotone_defect: prof.monotone_defect,
            odd_defect: prof.odd_defect,
            max_second_difference: max_second_difference(&prof.u),
            change,
        });
        log.extend(prof.log.iter().cloned());
        prev = Some(prof);
    }
    let mut profile = prev.expect("at least one stage");
    profile.log = log;
    Ok(Continuation { profile, stages })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub r: f64,
    pub energy: EnergyBreakdown,
    pub phi: f64,
    pub ratio: f64,
}

/// E(u, B_R) against Φ_{1,s*}(R) for each R.
pub fn energy_scaling_scan(u: &LayerProfile, m: &SpectralMeasure, p: &Potential, r_list: &[f64]) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    for &r in r_list {
        let e = total_energy(&u.u, m, p, r)?;
        let ph = phi(1, m.s_star(), r)?;
        rows.push(ScanRow { r, phi: ph, ratio: e.total / ph, energy: e });
    }
    Ok(rows)
}

/// max/min of the ratio column.
pub fn ratio_spread(rows: &[ScanRow]) -> f64 {
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    max / min
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Growth exponent of E(u, B_R) on a dyadic sweep: the log-log slope of the
/// increments E(2R) - E(R). Φ_{1,s} predicts 1 - 2s (zero for log growth,
/// negative for bounded energies).
pub fn growth_exponent(rows: &[ScanRow]) -> Result<f64> {
    if rows.len() < 3 {
        return domain("need at least three radii");
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in rows.windows(2) {
        if (w[1].r / w[0].r - 2.0).abs() > 1e-9 {
            return domain("radii must be dyadic");
        }
        let inc = w[1].energy.total - w[0].energy.total;
        if !(inc > 0.0) {
            return Err(Error::NotMonotone(format!("E(B_R) not increasing at R = {}", w[0].r)));
        }
        xs.push(w[0].r);
        ys.push(inc);
    }
    Ok(log_log_slope(&xs, &ys))
}

/// ψ = 1 on |x| ≤ R-2, R-1-|x| on R-2 ≤ |x| ≤ R, -1 beyond.
pub fn psi(r: f64, x: f64) -> f64 {
    let a = x.abs();
    if a <= r - 2.0 {
        1.0
    } else if a <= r {
        r - 1.0 - a
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorRow {
    pub r: f64,
    pub trivial_lower: f64,
    pub competitor: f64,
    pub phi: f64,
}

/// Energies of the stalled state u ≡ 0 (bounded below by ∫W(0)) and of the
/// competitor w = max{0, ψ}, both on (-R, R).
pub fn competitor_energy_test(m: &SpectralMeasure, p: &Potential, r: f64, h: f64) -> Result<CompetitorRow> {
    if r < 4.0 {
        return domain(format!("R = {r} must be >= 4"));
    }
    let x0 = r + 4.0;
    let n = (2.0 * x0 / h).round() as usize + 1;
    let w = GridFunction::from_fn_1d(x0, n, Tail::Zero, |x| psi(r, x).max(0.0))?;
    let e = total_energy(&w, m, p, r)?;
    Ok(CompetitorRow { r, trivial_lower: 2.0 * r * p.w(0.0), competitor: e.total, phi: phi(1, m.s_star(), r)? })
}

pub fn write_log_csv(path: &std::path::Path, log: &[IterRecord]) -> Result<()> {
    let mut s = String::from("stage,iter,energy,grad_norm,monotone_defect,odd_defect\n");
    for r in log {
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e}\n",
            r.stage, r.iter, r.energy, r.grad_norm, r.monotone_defect, r.odd_defect
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_profile_csv(path: &std::path::Path, u: &GridFunction) -> Result<()> {
    let mut s = String::from("x,u\n");
    for (x, v) in u.coords().iter().zip(u.values()) {
        s.push_str(&format!("{x:e},{v:e}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_scan_csv(path: &std::path::Path, rows: &[ScanRow]) -> Result<()> {
    let mut s = String::from("R");
    if let Some(r0) = rows.first() {
        for (sv, _) in &r0.energy.per_atom_kinetic {
            s.push_str(&format!(",K_s{sv}"));
        }
    }
    s.push_str(",lap_kinetic,potential,total,phi_ref,ratio\n");
    for r in rows {
        s.push_str(&format!("{}", r.r));
        for (_, k) in &r.energy.per_atom_kinetic {
            s.push_str(&format!(",{k:e}"));
        }
        s.push_str(&format!(
            ",{:e},{:e},{:e},{:e},{:e}\n",
            r.energy.lap_kinetic, r.energy.potential, r.energy.total, r.phi, r.ratio
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}
