//! `incoh`: Liouvillian spectra, one-particle bound states, coherence dynamics,
//! string solutions and the toy density-of-states model from the command line.
//!
//! Every run writes its tables plus `manifest.json` (resolved parameters, tool
//! version, SHA-256 of each output) into `--out`. Exit codes: 0 ok, 2 config
//! error, 3 numerical failure, 4 acceptance-check failure.

mod check;
mod commands;
mod output;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use incoh_core::spectral::DEFAULT_DENSE_LIMIT;
use serde_json::{json, Value};

use output::{Format, Output};
use settings::{Settings, Sweep};

#[derive(Parser)]
#[command(name = "incoh", version, about = "Incoherent modes of dephasing lattice bosons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Full Liouvillian spectrum with mode metrics and the QC gap report.
    Spectrum,
    /// One-particle bound states over the momentum grid.
    SingleParticle,
    /// Density-modulation relaxation or random-state coherence decay.
    Dynamics,
    /// String solutions over a scan of p.
    Bethe,
    /// Two-band density-of-states model for Γ₁(t).
    Toydos,
    /// Run the desk-scale acceptance gates, or validate the given output files.
    Check {
        /// CSV tables or manifest.json files to validate instead of running the gates.
        files: Vec<PathBuf>,
    },
}

/// Flags override values from `--config`; unset values take per-command defaults.
#[derive(Args)]
struct Opts {
    /// Flat `key = value` file; keys are the long flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// hardcore | bose-hubbard
    #[arg(long, global = true)]
    model: Option<String>,
    /// Number of sites.
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    /// Number of particles.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Hopping amplitude.
    #[arg(long = "J", global = true, allow_negative_numbers = true)]
    j: Option<f64>,
    /// Dephasing rate.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// On-site interaction (Bose-Hubbard only).
    #[arg(long = "U", global = true, allow_negative_numbers = true)]
    u: Option<f64>,
    /// Modulation wave number.
    #[arg(long, global = true, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Modulation amplitude.
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta_n: Option<f64>,
    /// Final time.
    #[arg(long, global = true)]
    tmax: Option<f64>,
    /// First time of the toy-model log grid.
    #[arg(long, global = true)]
    tmin: Option<f64>,
    /// Largest integrator step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Spacing of the output samples.
    #[arg(long, global = true)]
    sample_dt: Option<f64>,
    /// First random-state seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of random pure states (seeds seed, seed+1, …).
    #[arg(long, global = true)]
    ensemble: Option<u64>,
    /// modulated | random
    #[arg(long, global = true)]
    init: Option<String>,
    /// rk4 | expansion
    #[arg(long, global = true)]
    method: Option<String>,
    /// parameter=start:stop:step, e.g. J=0.2:0.3:0.01
    #[arg(long, global = true)]
    sweep: Option<Sweep>,
    /// String order.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Number of p intervals in the string scan.
    #[arg(long, global = true)]
    scan_p: Option<usize>,
    /// Ring length for the string residual column.
    #[arg(long = "residual-L", global = true)]
    residual_l: Option<usize>,
    /// Low-band exponent of the toy model.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Band width of the toy model.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Low-band weight of the toy model.
    #[arg(long, global = true)]
    a0: Option<f64>,
    /// High-band weight of the toy model.
    #[arg(long, global = true)]
    a1: Option<f64>,
    /// Log-grid points of the toy model.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads for sweep points (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Validate the outputs and fail with exit code 4 if a check fails.
    #[arg(long, global = true)]
    check: bool,
}

impl Opts {
    fn flags(&self) -> BTreeMap<String, String> {
        let mut f = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                f.insert(k.to_string(), v);
            }
        };
        let s = |x: &Option<f64>| x.map(|v| v.to_string());
        put("model", self.model.clone());
        put("L", self.l.map(|v| v.to_string()));
        put("N", self.n.map(|v| v.to_string()));
        put("J", s(&self.j));
        put("gamma", s(&self.gamma));
        put("U", s(&self.u));
        put("k", s(&self.k));
        put("delta-n", s(&self.delta_n));
        put("tmax", s(&self.tmax));
        put("tmin", s(&self.tmin));
        put("dt", s(&self.dt));
        put("sample-dt", s(&self.sample_dt));
        put("seed", self.seed.map(|v| v.to_string()));
        put("ensemble", self.ensemble.map(|v| v.to_string()));
        put("init", self.init.clone());
        put("method", self.method.clone());
        put("sweep", self.sweep.as_ref().map(|v| v.to_string()));
        put("m", self.m.map(|v| v.to_string()));
        put("scan-p", self.scan_p.map(|v| v.to_string()));
        put("residual-L", self.residual_l.map(|v| v.to_string()));
        put("eta", s(&self.eta));
        put("delta", s(&self.delta));
        put("a0", s(&self.a0));
        put("a1", s(&self.a1));
        put("points", self.points.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|v| v.display().to_string()));
        put("format", self.format.map(|v| v.to_string()));
        put("jobs", self.jobs.map(|v| v.to_string()));
        f
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) | Failure::Io(_) => 3,
            Failure::Check(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "output error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<incoh_core::Error> for Failure {
    fn from(e: incoh_core::Error) -> Self {
        use incoh_core::Error as E;
        match e {
            E::InvalidArguments(_) | E::DimensionMismatch { .. } | E::SizeLimit { .. } | E::StepSize { .. } => {
                Failure::Config(e.to_string())
            }
            E::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Shared run state: worker pool, dense size cap, and whether to self-check.
pub struct Context {
    pub pool: rayon::ThreadPool,
    pub dense_limit: usize,
    pub check: bool,
}

fn dense_limit() -> Result<usize, Failure> {
    match std::env::var("INCOH_DENSE_LIMIT") {
        Ok(v) => v.trim().parse().map_err(|e| Failure::Config(format!("INCOH_DENSE_LIMIT = {v:?}: {e}"))),
        Err(_) => Ok(DEFAULT_DENSE_LIMIT),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut s = Settings::load(cli.opts.config.as_deref(), cli.opts.flags())?;
    let out_dir: PathBuf = s.get::<String>("out", "out".into())?.into();
    let format: Format = s.get("format", Format::Csv)?;
    let jobs: usize = s.get("jobs", 1)?;
    let limit = dense_limit()?;
    s.note("INCOH_DENSE_LIMIT", limit);
    // sequential kernels keep results independent of the thread count
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Config(format!("cannot start {jobs} workers: {e}")))?;
    let ctx = Context { pool, dense_limit: limit, check: cli.opts.check };

    if let Command::Check { files } = &cli.command {
        let gates = if files.is_empty() { check::gates(&ctx) } else { check::files(files) };
        for g in &gates {
            println!("check {} {} {}", g.name, if g.pass { "PASS" } else { "FAIL" }, g.detail);
        }
        let failed: Vec<&str> = gates.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect();
        println!("check: {} of {} pass", gates.len() - failed.len(), gates.len());
        return if failed.is_empty() { Ok(()) } else { Err(Failure::Check(failed.join(", "))) };
    }

    let mut out = Output::new(&out_dir, format)?;
    let (name, summary) = match cli.command {
        Command::Spectrum => ("spectrum", commands::spectrum(&mut s, &ctx, &mut out)?),
        Command::SingleParticle => ("single-particle", commands::single_particle(&mut s, &ctx, &mut out)?),
        Command::Dynamics => ("dynamics", commands::dynamics(&mut s, &ctx, &mut out)?),
        Command::Bethe => ("bethe", commands::bethe(&mut s, &ctx, &mut out)?),
        Command::Toydos => ("toydos", commands::toydos(&mut s, &ctx, &mut out)?),
        Command::Check { .. } => unreachable!(),
    };
    let mut problems = if ctx.check { out.validate() } else { vec![] };
    if ctx.check && summary.get("checks_ok").and_then(Value::as_bool) == Some(false) {
        problems.push("numerical self-checks failed (see the JSON report)".into());
    }
    let params = Value::Object(s.resolved().iter().map(|(k, v)| (k.clone(), json!(v))).collect());
    let manifest = out.finish(name, params, summary)?;
    println!("{}", manifest.display());
    if problems.is_empty() { Ok(()) } else { Err(Failure::Check(problems.join("; "))) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("incoh: {e}");
            ExitCode::from(e.code())
        }
    }
}
