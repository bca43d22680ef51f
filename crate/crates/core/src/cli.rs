//! Command-line front end.
//!
//! Exit codes: 0 when every verdict passes, 1 when a verification fails
//! (the first failing inequality goes to standard error), 2 for usage and
//! configuration errors.

use crate::bounds::{verify_apriori_all, verify_explicit_convergence, verify_slow_variation};
use crate::certificate::{
    auxiliary_constants, check_quasi_hyperbolic, feasibility_region_scan, fit_constants, scan_to_csv, ConstantsLedger,
    ScanGrid,
};
use crate::cocycle::{orbit, OrbitSegment};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::foliation::{
    curves_to_csv, curves_to_svg, foliation_grid, image_orthogonality_deviation, seed_orthogonality, Field,
    IMAGE_ORTHOGONALITY_TOL_RAD,
};
use crate::frame::frame_of_cocycle;
use crate::oracle::{oracle_sweep, OracleOptions};
use crate::report::{csv_field, fmt17, BoundReport, InequalityCheck};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "hypcoords",
    version,
    about = "Finite-time hyperbolic coordinates, certificates and bound verification for planar maps",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate a map and dump the orbit with the log norm, log |det| and
    /// co-eccentricity of every derivative product DΦ^i.
    Orbit(OrbitCmd),
    /// Order-k hyperbolic coordinates e^(k), f^(k) for k = 1..K, from the
    /// closed-form SVD of the derivative cocycle.
    Frames(OrbitCmd),
    /// Fit a constants ledger (or read one with --ledger) and check the
    /// quasi-hyperbolicity certificate index by index. Writes the ledger and
    /// the per-index report.
    Certify(CertCmd),
    /// Evaluate the derived constants Q0, K1, Q1..Q4, Q̃1..Q̃4, Q and K2 of a
    /// fitted or supplied ledger.
    AuxConstants(CertCmd),
    /// Check the a-priori convergence bounds on e^(k) − e^(i) and the
    /// pushforwards e^(k)_i at every pair i ≤ k, and the explicit exponential
    /// bounds implied by a passing certificate.
    VerifyConvergence(CertCmd),
    /// Check the slow-variation chain for the derivative of the frame field
    /// at order k, using a finite-difference estimate with a Richardson
    /// stability check.
    VerifyVariation(VariationCmd),
    /// Integrate finite-time stable and unstable curves through a seed
    /// lattice, check orthogonality at the seeds and of their images under
    /// Φ^k, and export CSV and SVG.
    Foliate(FoliateCmd),
    /// Cross-check the closed-form SVD against the critical-angle formula and
    /// a brute-force angular grid on seeded random matrices.
    OracleCheck(OracleCmd),
    /// Scan rate constants for the structural inequalities a ledger of the
    /// given flavor must satisfy.
    ScanConstants(ScanCmd),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Configuration file of `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $HYPCOORDS_OUT, else ./hypcoords-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats: csv, json or both.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct MapArgs {
    /// Map name: henon, standard, lorenz2d, linear or cubic.
    #[arg(long)]
    pub map: Option<String>,
    /// Hénon parameter a.
    #[arg(long)]
    pub a: Option<f64>,
    /// Hénon parameter b.
    #[arg(long)]
    pub b: Option<f64>,
    /// Standard-map parameter K.
    #[arg(long = "K")]
    pub big_k: Option<f64>,
    /// Linear map entries m11,m12,m21,m22.
    #[arg(long)]
    pub matrix: Option<String>,
    /// Any map parameter as name=value; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
}

#[derive(Args, Debug, Default)]
pub struct OrbitArgs {
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    /// Iterates applied to (x0, y0) before the orbit starts.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Orbit length and maximal order.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct LedgerArgs {
    /// Certificate flavor: NS, I, II or both.
    #[arg(long)]
    pub flavor: Option<String>,
    /// Multiplicative slack of the fitted rates (> 1).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Check this ledger file instead of fitting one.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OrbitCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub orbit: OrbitArgs,
}

#[derive(Args, Debug)]
pub struct CertCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub orbit: OrbitArgs,
    #[command(flatten)]
    pub ledger: LedgerArgs,
}

#[derive(Args, Debug)]
pub struct VariationCmd {
    #[command(flatten)]
    pub cert: CertCmd,
    /// Finite-difference step; the Richardson check also uses h/2.
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FoliateCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub map: MapArgs,
    /// Order of the frame field.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed rectangle x_min,x_max,y_min,y_max.
    #[arg(long)]
    pub rect: Option<String>,
    /// Seed lattice spacing.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Arclength of each half-curve.
    #[arg(long)]
    pub half_length: Option<f64>,
    /// Integrator step.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OracleCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random matrices.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Angular grid size N of the brute-force oracle.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ScanCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub flavor: Option<String>,
    /// Fixed upper rate Γ.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Points per scanned axis.
    #[arg(long)]
    pub n: Option<usize>,
}

type Overrides = Vec<(&'static str, String)>;

fn put<T: ToString>(o: &mut Overrides, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        o.push((key, v.to_string()));
    }
}

impl Common {
    fn overrides(&self, o: &mut Overrides) {
        put(o, "out", &self.out.as_ref().map(|p| p.display().to_string()));
        put(o, "format", &self.format);
    }
}

impl MapArgs {
    fn overrides(&self, o: &mut Overrides) -> Result<()> {
        put(o, "map", &self.map);
        put(o, "param.a", &self.a);
        put(o, "param.b", &self.b);
        put(o, "param.K", &self.big_k);
        put(o, "matrix", &self.matrix);
        for p in &self.params {
            let (n, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--param expects name=value, got `{p}`")))?;
            o.push(("param", format!("{}={}", n.trim(), v.trim())));
        }
        Ok(())
    }
}

impl OrbitArgs {
    fn overrides(&self, o: &mut Overrides) {
        put(o, "x0", &self.x0);
        put(o, "y0", &self.y0);
        put(o, "burn_in", &self.burn_in);
        put(o, "k", &self.k);
    }
}

impl LedgerArgs {
    fn overrides(&self, o: &mut Overrides) {
        put(o, "flavor", &self.flavor);
        put(o, "eta", &self.eta);
        put(o, "ledger", &self.ledger.as_ref().map(|p| p.display().to_string()));
    }
}

impl CertCmd {
    fn overrides(&self, o: &mut Overrides) -> Result<()> {
        self.common.overrides(o);
        self.map.overrides(o)?;
        self.orbit.overrides(o);
        self.ledger.overrides(o);
        Ok(())
    }
}

/// Loads the config file, then applies flag overrides and validates.
fn build_config(config: &Option<PathBuf>, overrides: Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_kv(&text)?;
    }
    for (k, v) in overrides {
        if k == "param" {
            let (n, v) = v.split_once('=').expect("built as name=value");
            cfg.set(&format!("param.{n}"), v)?;
        } else {
            cfg.set(k, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Result of a subcommand: `Err` reasons are verification failures.
type Verdict = std::result::Result<(), String>;

fn verdict_of(rep: &BoundReport) -> Verdict {
    match rep.first_failure() {
        None => Ok(()),
        Some(f) => Err(f),
    }
}

struct Output {
    dir: PathBuf,
    format: OutputFormat,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.resolved_out_dir();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, format: cfg.format })
    }

    fn file(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.dir.join(name), body)?;
        Ok(())
    }

    fn csv(&self, stem: &str, body: &str) -> Result<()> {
        if self.format.csv() {
            self.file(&format!("{stem}.csv"), body)?;
        }
        Ok(())
    }

    fn json(&self, stem: &str, body: &str) -> Result<()> {
        if self.format.json() {
            let mut s = body.to_string();
            if !s.ends_with('\n') {
                s.push('\n');
            }
            self.file(&format!("{stem}.json"), &s)?;
        }
        Ok(())
    }

    fn report(&self, stem: &str, rep: &BoundReport) -> Result<()> {
        self.csv(stem, &rep.to_csv())?;
        self.json(stem, &rep.to_json())
    }
}

fn orbit_of(cfg: &RunConfig) -> Result<OrbitSegment> {
    let spec = cfg.map_spec()?;
    let start = cfg.start(&spec)?;
    orbit(&spec, start, cfg.k)
}

fn ledger_of(cfg: &RunConfig, o: &OrbitSegment) -> Result<ConstantsLedger> {
    match &cfg.ledger {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ConstantsLedger::from_kv(&text)
        }
        None => fit_constants(o, cfg.flavor, cfg.eta),
    }
}

fn run_orbit(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let out = Output::new(cfg)?;
    let c = &o.cocycle;
    let mut csv = String::from("i,x,y,log_norm,log_abs_det,log_coecc\n");
    for (i, p) in o.points.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{},{},{},{}",
            fmt17(p.x),
            fmt17(p.y),
            fmt17(c.log_norm(i)),
            fmt17(c.log_abs_det(i)),
            fmt17(c.log_coecc(i))
        )
        .unwrap();
    }
    out.csv("orbit", &csv)?;
    let j = json!({
        "map": o.spec.name,
        "parameters": o.spec.parameters,
        "k": o.k(),
        "points": o.points.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "log_norm": (0..=o.k()).map(|i| c.log_norm(i)).collect::<Vec<_>>(),
        "log_abs_det": (0..=o.k()).map(|i| c.log_abs_det(i)).collect::<Vec<_>>(),
        "log_coecc": (0..=o.k()).map(|i| c.log_coecc(i)).collect::<Vec<_>>(),
    });
    out.json("orbit", &serde_json::to_string_pretty(&j).unwrap())?;
    Ok(Ok(()))
}

fn run_frames(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let out = Output::new(cfg)?;
    let mut csv = String::from("k,ex,ey,fx,fy,theta,log_sigma_max,log_sigma_min,coecc,low_confidence,status\n");
    let mut frames = Vec::new();
    let mut first_missing = None;
    for k in 1..=o.k() {
        match frame_of_cocycle(&o.cocycle, k) {
            Ok(f) => {
                writeln!(
                    csv,
                    "{k},{},{},{},{},{},{},{},{},{},ok",
                    fmt17(f.e.x),
                    fmt17(f.e.y),
                    fmt17(f.f.x),
                    fmt17(f.f.y),
                    fmt17(f.theta),
                    fmt17(f.sigma_max),
                    fmt17(f.sigma_min),
                    fmt17(f.coecc),
                    f.low_confidence
                )
                .unwrap();
                frames.push(json!(f));
            }
            Err(e) => {
                writeln!(csv, "{k},,,,,,,,,,{}", csv_field(&e.to_string())).unwrap();
                frames.push(json!({ "k": k, "error": e.to_string() }));
                first_missing.get_or_insert(e.to_string());
            }
        }
    }
    out.csv("frames", &csv)?;
    out.json("frames", &serde_json::to_string_pretty(&frames).unwrap())?;
    Ok(first_missing.map_or(Ok(()), Err))
}

fn run_certify(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let ledger = match ledger_of(cfg, &o) {
        Ok(l) => l,
        Err(Error::Infeasible(why)) => return Ok(Err(why)),
        Err(e) => return Err(e),
    };
    let out = Output::new(cfg)?;
    out.file("ledger.kv", &ledger.to_kv())?;
    let rep = check_quasi_hyperbolic(&o, &ledger);
    out.csv("certificate", &rep.to_csv())?;
    out.json("certificate", &rep.to_json())?;
    Ok(rep.first_failure().map_or(Ok(()), Err))
}

fn run_aux(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let ledger = match ledger_of(cfg, &o) {
        Ok(l) => l,
        Err(Error::Infeasible(why)) => return Ok(Err(why)),
        Err(e) => return Err(e),
    };
    let aux = match auxiliary_constants(&ledger) {
        Ok(a) => a,
        Err(Error::DomainViolation(why)) => return Ok(Err(why)),
        Err(e) => return Err(e),
    };
    let out = Output::new(cfg)?;
    let mut csv = String::from("name,value\n");
    for (n, v) in aux.members() {
        writeln!(csv, "{n},{}", fmt17(v)).unwrap();
    }
    out.csv("aux", &csv)?;
    out.json("aux", &serde_json::to_string_pretty(&aux).unwrap())?;
    Ok(Ok(()))
}

/// Fits (or reads) the ledger and its auxiliary constants, mapping
/// certificate-level failures to a verdict.
fn certified(cfg: &RunConfig, o: &OrbitSegment) -> Result<std::result::Result<(ConstantsLedger, crate::certificate::AuxiliaryConstants), String>> {
    let ledger = match ledger_of(cfg, o) {
        Ok(l) => l,
        Err(Error::Infeasible(why)) => return Ok(Err(why)),
        Err(e) => return Err(e),
    };
    match auxiliary_constants(&ledger) {
        Ok(a) => Ok(Ok((ledger, a))),
        Err(Error::DomainViolation(why)) => Ok(Err(why)),
        Err(e) => Err(e),
    }
}

fn run_convergence(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let out = Output::new(cfg)?;
    let mut rep = verify_apriori_all(&o.cocycle, o.k(), &o.spec.name)?;
    let (ledger, aux) = match certified(cfg, &o)? {
        Ok(x) => x,
        Err(why) => {
            out.report("convergence", &rep)?;
            return Ok(Err(why));
        }
    };
    match verify_explicit_convergence(&o, &ledger, &aux) {
        Ok(r) => rep.merge(r),
        Err(Error::CertificateRequired(why)) => {
            out.report("convergence", &rep)?;
            return Ok(Err(why));
        }
        Err(e) => return Err(e),
    }
    out.report("convergence", &rep)?;
    Ok(verdict_of(&rep))
}

fn run_variation(cfg: &RunConfig) -> Result<Verdict> {
    let o = orbit_of(cfg)?;
    let (ledger, aux) = match certified(cfg, &o)? {
        Ok(x) => x,
        Err(why) => return Ok(Err(why)),
    };
    let rep = match verify_slow_variation(&o, &ledger, &aux, cfg.h) {
        Ok(r) => r,
        Err(Error::CertificateRequired(why)) => return Ok(Err(why)),
        Err(e) => return Err(e),
    };
    let out = Output::new(cfg)?;
    out.report("variation", &rep)?;
    Ok(verdict_of(&rep))
}

fn run_foliate(cfg: &RunConfig) -> Result<Verdict> {
    let spec = cfg.map_spec()?;
    let rect = cfg.rect()?;
    let opts = cfg.grid_options();
    let eg = foliation_grid(&spec, &rect, cfg.k, Field::Stable, &opts)?;
    let fg = foliation_grid(&spec, &rect, cfg.k, Field::Unstable, &opts)?;
    let mut rep = seed_orthogonality(&eg, &fg);
    let mut unresolved = Vec::new();
    let mut img = InequalityCheck::new("|∠(Φ^k e-curve, Φ^k f-curve) − π/2| at seeds ≤ 1e-3 rad", 0.0);
    for (n, ec) in eg.curves.iter().enumerate() {
        if let Some(fc) = fg.curves.iter().find(|c| c.seed() == ec.seed()) {
            let a = image_orthogonality_deviation(&spec, ec, fc, cfg.k)?;
            if a.resolution < IMAGE_ORTHOGONALITY_TOL_RAD {
                img.push(Some(n), Some(cfg.k), a.deviation, IMAGE_ORTHOGONALITY_TOL_RAD);
            } else {
                unresolved.push((ec.seed(), format!("image angle unresolvable in double precision (±{:.1e} rad)", a.resolution)));
            }
        }
    }
    rep.add(img);
    let out = Output::new(cfg)?;
    let curves: Vec<_> = eg.curves.iter().chain(fg.curves.iter()).cloned().collect();
    out.csv("foliation", &curves_to_csv(&curves))?;
    out.file("foliation.svg", &curves_to_svg(&curves, &rect))?;
    out.report("foliation_report", &rep)?;
    let mut skipped = String::from("field,x,y,reason\n");
    for (field, list) in [("e", &eg.failures), ("f", &fg.failures), ("e+f", &unresolved)] {
        for (s, why) in list {
            writeln!(skipped, "{field},{},{},{}", fmt17(s.x), fmt17(s.y), csv_field(why)).unwrap();
        }
    }
    out.file("foliation_skipped.csv", &skipped)?;
    Ok(verdict_of(&rep))
}

fn run_oracle(cfg: &RunConfig) -> Result<Verdict> {
    let opts = OracleOptions { seed: cfg.seed, trials: cfg.trials, grid_n: cfg.grid, ..Default::default() };
    let rep = oracle_sweep(&opts)?;
    let out = Output::new(cfg)?;
    out.report("oracle", &rep)?;
    Ok(verdict_of(&rep))
}

fn run_scan(cfg: &RunConfig) -> Result<Verdict> {
    let n = cfg.scan_n;
    let lin = ScanGrid::linspace;
    let grid = ScanGrid {
        gamma: cfg.scan_gamma,
        ratio: lin(0.05, 0.95, n),
        c: lin(0.05, 0.95, n),
        b: lin(0.05, 0.95, n),
        gamma_tilde: lin(1.0, 2.0, n),
        c_tilde: lin(0.1, 1.0, n),
    };
    let cells = feasibility_region_scan(cfg.flavor, &grid)?;
    let out = Output::new(cfg)?;
    out.csv("scan", &scan_to_csv(&cells))?;
    let feasible = cells.iter().filter(|c| c.feasible).count();
    let summary = json!({
        "flavor": cfg.flavor,
        "gamma": cfg.scan_gamma,
        "points_per_axis": n,
        "cells": cells.len(),
        "feasible": feasible,
    });
    out.json("scan", &serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(Ok(()))
}

fn dispatch(cmd: &Command) -> Result<Verdict> {
    let mut o = Overrides::new();
    match cmd {
        Command::Orbit(c) | Command::Frames(c) => {
            c.common.overrides(&mut o);
            c.map.overrides(&mut o)?;
            c.orbit.overrides(&mut o);
            let cfg = build_config(&c.common.config, o)?;
            if matches!(cmd, Command::Orbit(_)) {
                run_orbit(&cfg)
            } else {
                run_frames(&cfg)
            }
        }
        Command::Certify(c) | Command::AuxConstants(c) | Command::VerifyConvergence(c) => {
            c.overrides(&mut o)?;
            let cfg = build_config(&c.common.config, o)?;
            match cmd {
                Command::Certify(_) => run_certify(&cfg),
                Command::AuxConstants(_) => run_aux(&cfg),
                _ => run_convergence(&cfg),
            }
        }
        Command::VerifyVariation(c) => {
            c.cert.overrides(&mut o)?;
            put(&mut o, "h", &c.h);
            run_variation(&build_config(&c.cert.common.config, o)?)
        }
        Command::Foliate(c) => {
            c.common.overrides(&mut o);
            c.map.overrides(&mut o)?;
            put(&mut o, "k", &c.k);
            put(&mut o, "rect", &c.rect);
            put(&mut o, "spacing", &c.spacing);
            put(&mut o, "half_length", &c.half_length);
            put(&mut o, "step", &c.step);
            run_foliate(&build_config(&c.common.config, o)?)
        }
        Command::OracleCheck(c) => {
            c.common.overrides(&mut o);
            put(&mut o, "seed", &c.seed);
            put(&mut o, "trials", &c.trials);
            put(&mut o, "grid", &c.grid);
            run_oracle(&build_config(&c.common.config, o)?)
        }
        Command::ScanConstants(c) => {
            c.common.overrides(&mut o);
            put(&mut o, "flavor", &c.flavor);
            put(&mut o, "scan_gamma", &c.gamma);
            put(&mut o, "scan_n", &c.n);
            run_scan(&build_config(&c.common.config, o)?)
        }
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::BadParameter(_) | Error::UnknownMap(_))
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match dispatch(&cli.command) {
        Ok(Ok(())) => EXIT_PASS,
        Ok(Err(why)) => {
            eprintln!("verification failed: {why}");
            EXIT_FAIL
        }
        Err(e) if is_usage_error(&e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

