//! Subcommand runners, run manifests and exit-code mapping.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{preset, Config, DEFAULT_PRESET};
use crate::constants::phi;
use crate::energy::{claim41_integral, verify_ibp};
use crate::error::{Error, Result};
use crate::extension::{cylinder_ball_compare, extend, summarize, write_field_csv, write_summary_json, LambdaGrid};
use crate::grid::{GridFunction, Profile1d};
use crate::measure::SpectralMeasure;
use crate::operator::{backend_consistency, frac_laplacian_quadrature_all, frac_laplacian_spectral};
use crate::potential::Potential;
use crate::reduce::sup_norm;
use crate::solver::{
    continuation_solve, energy_scaling_scan, growth_exponent, ratio_spread, write_log_csv, write_profile_csv,
    write_scan_csv, Continuation, SolverConfig,
};
use crate::symmetry::{
    growth_check, liouville_table, misalignment_against, row_profile_error, sigma_flux_combination,
    solve_2d_with_profile, symmetry_measure_2d, write_report_json, LiouvilleData, SymmetryReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

pub const MANIFEST: &str = "manifest.json";

pub const SYMBOL_TOL: f64 = 1e-10;
pub const CONSISTENCY_TOL: f64 = 1e-3;
pub const PN_OPERATOR_TOL: f64 = 1e-4;
pub const PN_OPERATOR_WINDOW: f64 = 10.0;
pub const PN_LAYER_TOL: f64 = 2e-2;
pub const ODD_TOL: f64 = 1e-3;
pub const RESIDUAL_TOL: f64 = 1e-3;
pub const SPREAD_TOL: f64 = 10.0;
pub const EXPONENT_TOL: f64 = 0.1;
pub const IBP_TOL: f64 = 1e-2;
pub const TRACE_TOL: f64 = 1e-4;
pub const PDE_TOL: f64 = 5e-2;
pub const D_HALF_TOL: f64 = 1e-3;
pub const FLUX_MATCH_TOL: f64 = 1e-2;
pub const CLOSURE_TOL: f64 = 5e-2;
pub const MISALIGNMENT_TOL: f64 = 5e-3;
pub const ROW_TOL: f64 = 1e-3;
pub const LIOUVILLE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    OperatorCheck,
    SolveLayer,
    EnergyScan,
    Extend,
    Symmetry,
    All,
}

impl Command {
    fn stages(self) -> Vec<Command> {
        match self {
            Command::All => vec![
                Command::OperatorCheck,
                Command::SolveLayer,
                Command::EnergyScan,
                Command::Extend,
                Command::Symmetry,
            ],
            c => vec![c],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Command::OperatorCheck => "operator-check",
            Command::SolveLayer => "solve-layer",
            Command::EnergyScan => "energy-scan",
            Command::Extend => "extend",
            Command::Symmetry => "symmetry",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, clap::Parser)]
#[command(name = "fraclayer", about = "Layer solutions for mixtures of fractional Laplacians")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// shipped preset, used when no --config is given
    #[arg(long)]
    pub preset: Option<String>,
}

/// One pass/fail line. Boolean checks store 1 for true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub fraclayer: String,
    pub manifest: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub preset: Option<String>,
    pub config_path: Option<String>,
    pub threads: usize,
    pub seed: u64,
    pub versions: Versions,
    pub config: Config,
    /// "running", "ok", "violation" or "error"
    pub status: String,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    pub timings: Vec<StageTime>,
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    fn check(&mut self, stage: Command, name: impl Into<String>, value: f64, tol: f64) {
        let pass = value < tol;
        self.checks.push(Check { stage: stage.name().into(), name: name.into(), value, tol, pass });
    }

    fn flag(&mut self, stage: Command, name: impl Into<String>, ok: bool) {
        let value = if ok { 1.0 } else { 0.0 };
        self.checks.push(Check { stage: stage.name().into(), name: name.into(), value, tol: 1.0, pass: ok });
    }
}

/// Config errors and out-of-range parameters map to 3, everything else that
/// stops a run to 2.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Measure(_) | Error::Grid(_) | Error::Backend { .. } => EXIT_CONFIG,
        Error::Stage { source, .. } => exit_code_for(source),
        _ => EXIT_VIOLATION,
    }
}

pub fn resolve_config(args: &Args) -> Result<(Config, Option<String>)> {
    match (&args.config, &args.preset) {
        (Some(_), Some(_)) => Err(Error::Config("pass either --config or --preset, not both".into())),
        (Some(path), None) => Ok((Config::from_file(path)?, None)),
        (None, Some(name)) => Ok((preset(name)?, Some(name.clone()))),
        (None, None) => Ok((preset(DEFAULT_PRESET)?, Some(DEFAULT_PRESET.into()))),
    }
}

/// Parses, runs and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    let (cfg, preset_name) = match resolve_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    if args.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_CONFIG;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return EXIT_CONFIG;
    }
    let mut manifest = RunManifest {
        command: args.command,
        preset: preset_name,
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        threads: args.threads,
        seed: cfg.seed,
        versions: Versions { fraclayer: env!("CARGO_PKG_VERSION").into(), manifest: 1 },
        config: cfg.clone(),
        status: "running".into(),
        error: None,
        artifacts: Vec::new(),
        checks: Vec::new(),
        timings: Vec::new(),
    };
    if let Err(e) = manifest.write(&args.out) {
        eprintln!("error: {e}");
        return EXIT_VIOLATION;
    }
    let outcome = pool.install(|| execute(args.command, &cfg, &args.out, &mut manifest));
    let code = match outcome {
        Ok(()) if manifest.checks.iter().all(|c| c.pass) => {
            manifest.status = "ok".into();
            EXIT_OK
        }
        Ok(()) => {
            manifest.status = "violation".into();
            for c in manifest.checks.iter().filter(|c| !c.pass) {
                eprintln!("violated: {} {} = {:e} (tol {:e})", c.stage, c.name, c.value, c.tol);
            }
            EXIT_VIOLATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.status = "error".into();
            manifest.error = Some(e.to_string());
            exit_code_for(&e)
        }
    };
    if let Err(e) = manifest.write(&args.out) {
        eprintln!("error: {e}");
        return EXIT_VIOLATION;
    }
    code
}

/// State shared between the stages of one run.
struct Ctx<'a> {
    cfg: &'a Config,
    m: SpectralMeasure,
    out: &'a Path,
    layer: Option<Continuation>,
}

impl Ctx<'_> {
    fn layer(&mut self) -> Result<&Continuation> {
        if self.layer.is_none() {
            self.layer = Some(continuation_solve(&self.cfg.solver, &self.m, &self.cfg.potential)?);
        }
        Ok(self.layer.as_ref().expect("just solved"))
    }

    fn artifact(&self, manifest: &mut RunManifest, name: &str) -> PathBuf {
        manifest.artifacts.push(name.into());
        self.out.join(name)
    }
}

fn execute(cmd: Command, cfg: &Config, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let mut ctx = Ctx { cfg, m: cfg.measure()?, out, layer: None };
    for stage in cmd.stages() {
        let t = Instant::now();
        let res = match stage {
            Command::OperatorCheck => operator_check(&ctx, manifest),
            Command::SolveLayer => solve_layer(&mut ctx, manifest),
            Command::EnergyScan => energy_scan(&ctx, manifest),
            Command::Extend => extension(&mut ctx, manifest),
            Command::Symmetry => symmetry(&mut ctx, manifest),
            Command::All => unreachable!("expanded above"),
        };
        manifest.timings.push(StageTime { stage: stage.name().into(), seconds: t.elapsed().as_secs_f64() });
        res?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    write_text(path, &text)
}

pub fn layer_exact(x: f64) -> f64 {
    2.0 / PI * x.atan()
}

/// Band-limited periodic input for the backend comparison.
fn band_limited(period: f64, x: f64) -> f64 {
    let w = 2.0 * PI / period;
    (w * x).cos() + 0.5 * (3.0 * w * x).sin() - 0.25 * (5.0 * w * x).cos()
}

fn operator_check(ctx: &Ctx, manifest: &mut RunManifest) -> Result<()> {
    let oc = &ctx.cfg.operator_check;
    let stage = Command::OperatorCheck;
    let mut csv = String::from("case,s,k,expected,measured,error,tol,pass\n");
    let mut row = |manifest: &mut RunManifest, case: &str, s: f64, k: u32, expected: f64, measured: f64, err: f64, tol: f64| {
        let pass = err < tol;
        csv.push_str(&format!("{case},{s},{k},{expected:e},{measured:e},{err:e},{tol:e},{pass}\n"));
        manifest.check(stage, format!("{case} s={s} k={k}"), err, tol);
    };
    for &s in &oc.s_values {
        for &k in &oc.symbol_k {
            let kf = k as f64;
            let u = GridFunction::periodic(2.0 * PI, oc.symbol_n, |x| (kf * x).cos())?;
            let lu = frac_laplacian_spectral(&u, s)?;
            let expected = kf.powf(2.0 * s);
            let diff: Vec<f64> = u.values().iter().zip(lu.values()).map(|(c, l)| l - expected * c).collect();
            let err = sup_norm(&diff) / expected;
            // least-squares multiplier of cos(kx)
            let dot = |a: &[f64]| -> f64 { a.iter().zip(u.values()).map(|(x, y)| x * y).sum() };
            let measured = dot(lu.values()) / dot(u.values());
            row(manifest, "symbol", s, k, expected, measured, err, SYMBOL_TOL);
        }
        let p = oc.consistency_period;
        let u = GridFunction::periodic(p, oc.consistency_n, |x| band_limited(p, x))?;
        let err = backend_consistency(&u, s)?;
        row(manifest, "consistency", s, 0, 0.0, err, err, CONSISTENCY_TOL);
    }
    let g = &ctx.cfg.grid;
    let u = GridFunction::from_fn_1d(g.x, g.n, g.tail, layer_exact)?;
    let q = frac_laplacian_quadrature_all(&u, 0.5)?;
    let mut worst: f64 = 0.0;
    for i in 0..u.n() {
        if u.x(i).abs() <= PN_OPERATOR_WINDOW {
            let exact = (PI * u.values()[i]).sin() / PI;
            worst = worst.max((q.values()[i] - exact).abs());
        }
    }
    row(manifest, "pn_closed_form", 0.5, 0, 0.0, worst, worst, PN_OPERATOR_TOL);
    let path = ctx.artifact(manifest, "operator_check.csv");
    write_text(&path, &csv)
}

#[derive(Debug, Clone, Serialize)]
struct LayerSummary {
    potential: String,
    n: usize,
    half_width: f64,
    residual: f64,
    monotone_defect: f64,
    odd_defect: f64,
    limits: (f64, f64),
    iterations: usize,
    converged: bool,
    flat: bool,
    energy: f64,
    /// sup |u - (2/π) arctan x| when the run is the half-Laplacian PN problem
    pn_error: Option<f64>,
}

fn is_pn_half(m: &SpectralMeasure, p: &Potential, solver: &SolverConfig) -> bool {
    *p == Potential::PeierlsNabarro
        && m.lap_mass() == 0.0
        && m.atoms().len() == 1
        && m.atoms()[0].s == 0.5
        && solver.delta_schedule.last() == Some(&0.0)
}

fn write_stages_csv(path: &Path, c: &Continuation) -> Result<()> {
    let mut s = String::from(
        "stage,R,delta,iterations,converged,flat,residual,energy,monotone_defect,odd_defect,max_second_difference,change\n",
    );
    for st in &c.stages {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            st.stage,
            st.r,
            st.delta,
            st.iterations,
            st.converged,
            st.flat,
            st.residual,
            st.energy,
            st.monotone_defect,
            st.odd_defect,
            st.max_second_difference,
            st.change
        ));
    }
    write_text(path, &s)
}

fn solve_layer(ctx: &mut Ctx, manifest: &mut RunManifest) -> Result<()> {
    let stage = Command::SolveLayer;
    let pn = is_pn_half(&ctx.m, &ctx.cfg.potential, &ctx.cfg.solver);
    let c = ctx.layer()?.clone();
    let p = &c.profile;
    let pn_error = pn.then(|| {
        let d: Vec<f64> = p.u.coords().iter().zip(p.u.values()).map(|(x, v)| v - layer_exact(*x)).collect();
        sup_norm(&d)
    });
    manifest.flag(stage, "converged", p.converged);
    manifest.check(stage, "residual", p.residual, RESIDUAL_TOL);
    manifest.flag(stage, "monotone", p.monotone_defect == 0.0);
    manifest.check(stage, "odd_defect", p.odd_defect, ODD_TOL);
    if let Some(e) = pn_error {
        manifest.check(stage, "pn_error", e, PN_LAYER_TOL);
    }
    let summary = LayerSummary {
        potential: ctx.cfg.potential.name().into(),
        n: p.u.n(),
        half_width: p.u.half_width(),
        residual: p.residual,
        monotone_defect: p.monotone_defect,
        odd_defect: p.odd_defect,
        limits: p.limits,
        iterations: p.iterations,
        converged: p.converged,
        flat: p.flat,
        energy: p.energy,
        pn_error,
    };
    write_profile_csv(&ctx.artifact(manifest, "profile.csv"), &p.u)?;
    write_log_csv(&ctx.artifact(manifest, "log.csv"), &p.log)?;
    write_stages_csv(&ctx.artifact(manifest, "stages.csv"), &c)?;
    write_json(&ctx.artifact(manifest, "layer.json"), &summary)
}

#[derive(Debug, Clone, Serialize)]
struct EnergySummary {
    s_star: f64,
    ratio_spread: f64,
    growth_exponent: f64,
    expected_exponent: f64,
    claim41_spreads: Vec<(f64, f64)>,
    ibp_residual: f64,
}

fn energy_scan(ctx: &Ctx, manifest: &mut RunManifest) -> Result<()> {
    let stage = Command::EnergyScan;
    let e = &ctx.cfg.energy;
    let p = &ctx.cfg.potential;
    let c = continuation_solve(&e.solver, &ctx.m, p)?;
    let rows = energy_scaling_scan(&c.profile, &ctx.m, p, &e.r_list)?;
    let spread = ratio_spread(&rows);
    let exponent = growth_exponent(&rows)?;
    let s_star = ctx.m.s_star();
    let expected = 1.0 - 2.0 * s_star;
    manifest.check(stage, "ratio_spread", spread, SPREAD_TOL);
    manifest.check(stage, "exponent_error", (exponent - expected).abs(), EXPONENT_TOL);

    let mut claim = String::from("s,R,integral,phi,ratio\n");
    let mut spreads = Vec::new();
    for &s in &e.claim41_s {
        let mut ratios = Vec::new();
        for &r in &e.claim41_r {
            let v = claim41_integral(1, s, r)?;
            let ph = phi(1, s, r)?;
            claim.push_str(&format!("{s},{r},{v:e},{ph:e},{:e}\n", v / ph));
            ratios.push(v / ph);
        }
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        manifest.check(stage, format!("claim41_spread s={s}"), max / min, SPREAD_TOL);
        spreads.push((s, max / min));
    }

    let u = &c.profile.u;
    // off-centre so that the pairing with an odd layer is not zero by symmetry
    let vals = u.coords().iter().map(|x| (-(x - 1.0) * (x - 1.0) / 16.0).exp()).collect();
    let v = GridFunction::new(1, u.half_width(), u.n(), vals, crate::grid::Tail::Zero)?;
    let ibp = verify_ibp(u, &v, &ctx.m, e.ibp_r)?;
    manifest.check(stage, "ibp_residual", ibp, IBP_TOL);

    write_scan_csv(&ctx.artifact(manifest, "scan.csv"), &rows)?;
    write_text(&ctx.artifact(manifest, "claim41.csv"), &claim)?;
    let summary = EnergySummary {
        s_star,
        ratio_spread: spread,
        growth_exponent: exponent,
        expected_exponent: expected,
        claim41_spreads: spreads,
        ibp_residual: ibp,
    };
    write_json(&ctx.artifact(manifest, "energy.json"), &summary)
}

fn lambda_grid(ctx: &Ctx, h: f64) -> Result<LambdaGrid> {
    let x = &ctx.cfg.extension;
    LambdaGrid::geometric(0.25 * h, x.lambda_max, x.lambda_rows)
}

fn extension(ctx: &mut Ctx, manifest: &mut RunManifest) -> Result<()> {
    let stage = Command::Extend;
    let u = ctx.layer()?.profile.u.clone();
    let lg = lambda_grid(ctx, u.h())?;
    let f = extend(&u, &ctx.m, &lg)?;
    let p = &ctx.cfg.potential;
    let summary = summarize(&f, &ctx.m, Some(p))?;
    for a in &summary.atoms {
        let s = a.s;
        manifest.check(stage, format!("trace_defect s={s}"), a.trace_defect, TRACE_TOL);
        manifest.flag(stage, format!("max_principle s={s}"), a.bounds.max_principle);
        manifest.check(stage, format!("pde_residual s={s}"), a.pde_residual, PDE_TOL);
        manifest.flag(stage, format!("calibration_trusted s={s}"), a.calibration_residual < crate::extension::CALIBRATION_TOL);
        manifest.flag(stage, format!("flux_converged s={s}"), a.flux_converged);
        if let Some(err) = a.flux_error {
            manifest.check(stage, format!("flux_error s={s}"), err, FLUX_MATCH_TOL);
        }
        if s == 0.5 {
            manifest.check(stage, "d_half", (a.d - 1.0).abs(), D_HALF_TOL);
        }
    }
    if let Some(c) = summary.closure_sup {
        manifest.check(stage, "neumann_closure", c, CLOSURE_TOL);
    }
    let rows = cylinder_ball_compare(&f, &ctx.m, p, &ctx.cfg.extension.r_list)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.diff_over_phi).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    manifest.check(stage, "cylinder_spread", max / min, SPREAD_TOL);

    let mut cyl = String::from("R,K_tilde,K_ball,diff,phi,diff_over_phi,E_tilde,E_tilde_over_phi\n");
    for r in &rows {
        cyl.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.r, r.k_tilde, r.k_ball, r.diff, r.phi, r.diff_over_phi, r.e_tilde, r.e_tilde_over_phi
        ));
    }
    write_field_csv(&ctx.artifact(manifest, "extension_field.csv"), &f, ctx.cfg.extension.csv_stride)?;
    write_summary_json(&ctx.artifact(manifest, "extension.json"), &summary)?;
    write_text(&ctx.artifact(manifest, "cylinder.csv"), &cyl)
}

fn symmetry(ctx: &mut Ctx, manifest: &mut RunManifest) -> Result<()> {
    let stage = Command::Symmetry;
    let s2 = ctx.cfg.solve_2d();
    let u1 = ctx.layer()?.profile.u.clone();
    let sol = solve_2d_with_profile(&ctx.m, &ctx.cfg.potential, &s2, Profile1d::new(u1.clone())?)?;
    let fitted = symmetry_measure_2d(&sol.u)?;
    let mis = misalignment_against(&sol.u, s2.direction, 1)?;
    let row_err = row_profile_error(&sol)?;
    manifest.flag(stage, "converged", sol.converged);
    manifest.check(stage, "misalignment", mis, MISALIGNMENT_TOL);
    manifest.check(stage, "profile_error", row_err, ROW_TOL);

    let lg = lambda_grid(ctx, u1.h())?;
    let field = extend(&u1, &ctx.m, &lg)?;
    let mut data = LiouvilleData::embedded(field, s2.direction, ctx.cfg.symmetry.growth)?;
    let r_list = &ctx.cfg.symmetry.r_list;
    let liouville = liouville_table(&mut data, &ctx.m, r_list)?;
    let floor = liouville
        .iter()
        .map(|v| if v.normalization > 0.0 { v.d.abs() / v.normalization } else { v.d.abs() })
        .fold(0.0, f64::max);
    manifest.check(stage, "liouville_floor", floor, LIOUVILLE_FLOOR);
    let growth = growth_check(&data, &ctx.m, r_list)?;
    let first = growth.rows.first().map_or(0.0, |r| r.ratio);
    let max = growth.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let bounded = if first > 0.0 { max / first } else { 1.0 };
    manifest.check(stage, "growth_ratio_spread", bounded, SPREAD_TOL);
    let comb = sigma_flux_combination(&data, &ctx.m, r_list[0])?;

    let report = SymmetryReport {
        direction: s2.direction,
        fitted,
        misalignment_vs_profile: mis,
        profile_error: row_err,
        converged: sol.converged,
        iterations: sol.iterations,
        liouville,
        growth,
        sigma_flux_combination: comb,
    };
    let mut grid = String::from("x1,x2,u\n");
    let n = sol.u.n();
    for i2 in 0..n {
        for i1 in 0..n {
            grid.push_str(&format!("{:e},{:e},{:e}\n", sol.u.x(i1), sol.u.x(i2), sol.u.values()[i2 * n + i1]));
        }
    }
    write_text(&ctx.artifact(manifest, "symmetry_u.csv"), &grid)?;
    write_report_json(&ctx.artifact(manifest, "symmetry.json"), &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Measure("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::NotMonotone("x".into())), EXIT_VIOLATION);
        let nested = Error::Stage { stage: 1, source: Box::new(Error::Domain("x".into())) };
        assert_eq!(exit_code_for(&nested), EXIT_CONFIG);
    }

    #[test]
    fn both_sources_rejected() {
        let args = Args {
            command: Command::OperatorCheck,
            config: Some("a.toml".into()),
            out: "out".into(),
            threads: 1,
            preset: Some("pn-half".into()),
        };
        assert!(resolve_config(&args).is_err());
    }

    #[test]
    fn operator_check_default_passes() {
        let dir = tempfile::tempdir().unwrap();
        let args = Args {
            command: Command::OperatorCheck,
            config: None,
            out: dir.path().to_path_buf(),
            threads: 2,
            preset: None,
        };
        assert_eq!(run(&args), EXIT_OK);
        let csv = std::fs::read_to_string(dir.path().join("operator_check.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with("true")));
        let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.status, "ok");
    }
}
