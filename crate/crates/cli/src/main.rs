//! `riemann-kit` command-line harness.
//!
//! Exit codes: 0 every enabled check passed, 1 a check failed (or a runtime
//! error), 2 bad configuration or inadmissible parameters, 3 a sufficient
//! condition could not be verified.

use clap::{Args, Parser, Subcommand};
use riemann_kit::config::{RunConfig, SystemId};
use riemann_kit::fluid::{ElementOptions, FluidElementKind, FluidParams};
use riemann_kit::report::{self, to_json};
use riemann_kit::superpose::Status;
use riemann_kit::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "riemann-kit", version, about = "Riemann-invariant analysis and closed-form solution verification")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Residuals of a closed-form family on a seeded sample, plus span_check.
    Verify(Common),
    /// Roots of the characteristic determinant in a spatial direction.
    Dispersion(Common),
    /// Characteristic vectors of a wave (or a named fluid element).
    Elements(Common),
    /// Certify a decomposition spec, integrate its reduced system, write the table.
    Superpose(Common),
    /// The full acceptance suite.
    Report(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    system: Option<SystemId>,
    #[arg(long)]
    family: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    /// Report file (JSON); superpose also writes the table next to it as .csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the grid sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Negate the system's source term; a sound harness must then fail.
    #[arg(long)]
    negative_control: bool,
    /// Shorthand for the family parameter `a` (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    /// State u for dispersion/elements (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    state: Option<Vec<f64>>,
    /// Spatial direction (dispersion) or full wave vector (elements).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    /// Fluid element kind for `elements` (E, A, E0, A0, H0).
    #[arg(long)]
    kind: Option<String>,
}

/// Failure with its exit code.
struct Fail(u8, String);

impl Fail {
    fn config(e: impl std::fmt::Display) -> Self {
        Fail(2, e.to_string())
    }

    /// Parse and configuration errors are the user's input even when they
    /// surface late; everything else is a runtime failure.
    fn runtime(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Config(_) => Fail(2, e.to_string()),
            _ => Fail(1, e.to_string()),
        }
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Unverified => 3,
    }
}

fn load(c: &Common) -> Result<RunConfig, Fail> {
    let mut cfg = match (&c.config, c.system) {
        (Some(p), _) => RunConfig::from_file(p).map_err(Fail::config)?,
        (None, Some(s)) => RunConfig::new(s),
        (None, None) => return Err(Fail(2, "either --config or --system is required".into())),
    };
    if let (Some(s), Some(_)) = (c.system, &c.config) {
        cfg.system = s;
    }
    if let Some(f) = &c.family {
        cfg.family = Some(f.clone());
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = c.tol {
        cfg.tol = Some(t);
    }
    if let Some(h) = c.fd_step {
        cfg.fd_step = h;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.negative_control |= c.negative_control;
    if let Some(a) = &c.a {
        if cfg.params.is_null() {
            cfg.params = serde_json::json!({});
        }
        let obj = cfg.params.as_object_mut().ok_or_else(|| Fail(2, "params must be a JSON object".into()))?;
        obj.insert("a".into(), serde_json::json!(a));
    }
    Ok(cfg)
}

fn emit(cfg: &RunConfig, json: &str) -> Result<(), Fail> {
    match &cfg.out {
        Some(p) => std::fs::write(p, json).map_err(|e| Fail(1, format!("{p}: {e}"))),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn verify(c: &Common) -> Result<u8, Fail> {
    let cfg = load(c)?;
    let seed = cfg.validate().map_err(Fail::config)?;
    let fam = cfg.build_family().map_err(Fail::config)?;
    log::info!("verifying {} with n = {}, seed = {seed}", fam.id, cfg.n);
    let rep = report::verify_family(&fam, cfg.n, seed, cfg.fd_step, cfg.negative_control).map_err(Fail::runtime)?;
    eprintln!(
        "{} {}: max residual {:.3e} (tol {:.0e}), span residual {}",
        if rep.pass { "PASS" } else { "FAIL" },
        rep.family,
        rep.max_residual,
        rep.tol,
        rep.span_residual.map_or("n/a".into(), |s| format!("{s:.3e}")),
    );
    emit(&cfg, &to_json(&rep))?;
    Ok(if rep.pass { 0 } else { 1 })
}

fn point(c: &Common, cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>, Option<String>, Option<ElementOptions>), Fail> {
    let p = cfg.point.clone();
    let state = c.state.clone().or_else(|| p.as_ref().map(|p| p.state.clone())).ok_or_else(|| Fail(2, "a state is required (--state or config `point`)".into()))?;
    let dir = c.direction.clone().or_else(|| p.as_ref().map(|p| p.direction.clone())).unwrap_or_default();
    let kind = c.kind.clone().or_else(|| p.as_ref().and_then(|p| p.kind.clone()));
    Ok((state, dir, kind, p.and_then(|p| p.options)))
}

fn fluid_params(cfg: &RunConfig) -> Result<FluidParams, Fail> {
    let get = |k: &str| cfg.params.get(k).cloned();
    let arr = |k: &str| -> Result<[f64; 3], Fail> { get(k).map_or(Ok([0.0; 3]), |v| serde_json::from_value(v).map_err(Fail::config)) };
    Ok(FluidParams { kappa: get("kappa").and_then(|v| v.as_f64()).unwrap_or(1.4), g: arr("g")?, omega: arr("omega")? })
}

fn dispersion(c: &Common) -> Result<u8, Fail> {
    let cfg = load(c)?;
    cfg.validate().map_err(Fail::config)?;
    let sys = cfg.build_system().map_err(Fail::config)?;
    let (u, dir, _, _) = point(c, &cfg)?;
    let kappa = if cfg.system == SystemId::Fluid { Some(fluid_params(&cfg)?.kappa) } else { None };
    let rep = report::dispersion_report(cfg.system, &sys, &u, &dir, kappa).map_err(|e| Fail(1, e.to_string()))?;
    for r in &rep.roots {
        eprintln!("{:>24.16e}  ×{}  {}", r.root, r.multiplicity, r.label.as_deref().unwrap_or(""));
    }
    emit(&cfg, &to_json(&rep))?;
    Ok(0)
}

fn elements(c: &Common) -> Result<u8, Fail> {
    let cfg = load(c)?;
    cfg.validate().map_err(Fail::config)?;
    let sys = cfg.build_system().map_err(Fail::config)?;
    let (u, wave, kind, opts) = point(c, &cfg)?;
    let fk = match kind {
        Some(k) if cfg.system == SystemId::Fluid => {
            let kind: FluidElementKind = k.parse().map_err(Fail::config)?;
            Some((kind, fluid_params(&cfg)?, opts.unwrap_or_default()))
        }
        Some(_) => return Err(Fail(2, "--kind applies to the fluid system only".into())),
        None => None,
    };
    let rep = report::elements_report(&sys, &u, &wave, fk).map_err(Fail::runtime)?;
    eprintln!("rank S(λ) = {}, {} homogeneous vector(s), inhomogeneous residual {:.3e}", rep.symbol_rank, rep.homogeneous.len(), rep.inhomogeneous_residual);
    emit(&cfg, &to_json(&rep))?;
    Ok(0)
}

fn superpose(c: &Common) -> Result<u8, Fail> {
    let cfg = load(c)?;
    let seed = cfg.validate().map_err(Fail::config)?;
    let sys = cfg.build_system().map_err(Fail::config)?;
    let sc = cfg.superpose.as_ref().ok_or_else(|| Fail(2, "superpose needs a `superpose` section in the config".into()))?;
    let (cert, table) = report::run_superpose(&sys, sc, cfg.base_dir.as_deref(), seed).map_err(Fail::runtime)?;
    for f in &cert.failures {
        eprintln!("check: {f}");
    }
    eprintln!("status: {:?}", cert.status);
    if let (Some(t), Some(out)) = (&table, &cfg.out) {
        let csv = Path::new(out).with_extension("csv");
        std::fs::write(&csv, t.to_csv()).map_err(|e| Fail(1, format!("{}: {e}", csv.display())))?;
        log::info!("table written to {}", csv.display());
    } else if table.is_some() {
        log::warn!("no --out given; the solution table is not written");
    }
    emit(&cfg, &to_json(&cert))?;
    Ok(status_code(cert.status))
}

fn suite(c: &Common) -> Result<u8, Fail> {
    let seed = match &c.config {
        Some(_) => load(c)?.validate().map_err(Fail::config)?,
        None => c.seed.ok_or_else(|| Fail(2, "a seed is required (--seed)".into()))?,
    };
    let rep = report::run_suite(seed).map_err(Fail::runtime)?;
    let mut worst = Status::Pass;
    for cr in &rep.criteria {
        eprintln!("{}", cr.line());
        worst = worst.and(cr.status);
    }
    let json = to_json(&rep);
    match &c.out {
        Some(p) => std::fs::write(p, &json).map_err(|e| Fail(1, format!("{}: {e}", p.display())))?,
        None => print!("{json}"),
    }
    Ok(status_code(worst))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIEMANN_KIT_LOG", "warn")).format_timestamp(None).init();
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Command::Verify(c) | Command::Dispersion(c) | Command::Elements(c) | Command::Superpose(c) | Command::Report(c) => c,
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match &cli.cmd {
        Command::Verify(c) => verify(c),
        Command::Dispersion(c) => dispersion(c),
        Command::Elements(c) => elements(c),
        Command::Superpose(c) => superpose(c),
        Command::Report(c) => suite(c),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
