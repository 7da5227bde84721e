//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{compare_adi, composite_observable, verify_interpolation, InterpolationReport};
use crate::balancer::{approximate_balance, realify, BalancingResult, Guarantee, Truncation};
use crate::bundled;
use crate::error::{Error, Result};
use crate::gramian_quadrature::{log_spaced_steps, run_quadrature_with, LowRankFactor, QuadratureOptions};
use crate::linalg::C64;
use crate::system_model::{load_system, GramianKind, LtiSystem};
use crate::tableau::{assemble_composite, predict_expansion_points, resolve_tableau, side_points, ButcherTableau, ExpansionPointSet, Side, TableauJson};

/// Tolerance for the ADI comparison.
pub const ADI_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Pass = 0,
    Runtime = 1,
    Config = 2,
    HypothesisUnverified = 3,
}

impl ExitCode {
    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::UnknownTableau(_)
            | Error::InvalidTableau(_)
            | Error::InvalidAdiParameter(_)
            | Error::InvalidAdiShift(_)
            | Error::InvalidStepSize(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::Json(_) => ExitCode::Config,
            Error::RankDeficient { .. } => ExitCode::HypothesisUnverified,
            _ => ExitCode::Runtime,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rkmor", version, about = "Runge-Kutta gramian quadrature and approximate balanced truncation for SISO systems")]
#[command(after_help = "Log verbosity is controlled by RUST_LOG (e.g. RUST_LOG=debug).\nExit codes: 0 pass, 1 runtime failure, 2 configuration error, 3 hypothesis unverified.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce a system with approximate balancing and write the reduced model.
    Reduce(ReduceArgs),
    /// Print the predicted interpolation points as CSV.
    ExpansionPoints(PointsArgs),
    /// Reduce, then check moment matching at the predicted points.
    Verify(ReduceArgs),
    /// Compare low-rank ADI with one step of the equivalent DIRK method.
    CompareAdi(AdiArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Matrix Market file with A (n×n).
    #[arg(long, value_name = "PATH", requires_all = ["system_b", "system_c"], conflicts_with = "bundled")]
    pub system_a: Option<PathBuf>,
    /// Matrix Market file with B (n×1).
    #[arg(long, value_name = "PATH")]
    pub system_b: Option<PathBuf>,
    /// Matrix Market file with C (1×n).
    #[arg(long, value_name = "PATH")]
    pub system_c: Option<PathBuf>,
    /// Bundled system: diagonal-N, diffusion-N (N = 20, 100, 400) or random-N.
    #[arg(long, value_name = "NAME")]
    pub bundled: Option<String>,
    /// Seed for random bundled systems.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct QuadratureArgs {
    /// Controllability tableau: built-in name or JSON file.
    #[arg(long, default_value = "gauss-legendre-2")]
    pub tableau_c: String,
    /// Observability tableau: built-in name or JSON file.
    #[arg(long, default_value = "gauss-legendre-2")]
    pub tableau_o: String,
    /// Controllability step sizes: comma list, or schedule N:MIN:MAX[:log|lin].
    #[arg(long, value_name = "STEPS", allow_hyphen_values = true)]
    pub steps_c: Option<String>,
    /// Observability step sizes: comma list, or schedule N:MIN:MAX[:log|lin].
    #[arg(long, value_name = "STEPS", allow_hyphen_values = true)]
    pub steps_o: Option<String>,
    /// Schedule for sides without explicit steps.
    #[arg(long, default_value = "20:1e-2:1e2:log")]
    pub schedule: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub quadrature: QuadratureArgs,
    /// full, threshold:TAU or order:R.
    #[arg(long, default_value = "full")]
    pub truncation: String,
    /// Relative tolerance for moment matching.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Output directory for reduced matrices and metadata.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Replace V and W by real bases (needs conjugate-closed shifts).
    #[arg(long)]
    pub realify: bool,
    /// Write Z after every quadrature step into OUT/factors.
    #[arg(long, requires = "out")]
    pub dump_factors: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PointsArgs {
    /// Controllability tableau: built-in name or JSON file.
    #[arg(long)]
    pub tableau_c: Option<String>,
    /// Observability tableau: built-in name or JSON file.
    #[arg(long)]
    pub tableau_o: Option<String>,
    /// Controllability step sizes, as for reduce.
    #[arg(long, value_name = "STEPS", allow_hyphen_values = true)]
    pub steps_c: Option<String>,
    /// Observability step sizes, as for reduce.
    #[arg(long, value_name = "STEPS", allow_hyphen_values = true)]
    pub steps_o: Option<String>,
    #[arg(long, default_value = "20:1e-2:1e2:log")]
    pub schedule: String,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GramianArg {
    Controllability,
    Observability,
}

#[derive(Debug, Clone, Args)]
pub struct AdiArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// ADI parameters with negative real part, e.g. "-1,-2+1i,-2-1i".
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: String,
    #[arg(long, value_enum, default_value = "controllability")]
    pub gramian: GramianArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

/// N step sizes spread over [min, max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub spacing: Spacing,
}

impl Schedule {
    pub fn steps(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => log_spaced_steps(self.n, self.min, self.max),
            Spacing::Linear if self.n == 1 => vec![self.min],
            Spacing::Linear => (0..self.n).map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64).collect(),
        }
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("schedule '{s}': expected N:MIN:MAX[:log|lin]"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let n = parts[0].parse().map_err(|_| bad())?;
        let min: f64 = parts[1].parse().map_err(|_| bad())?;
        let max: f64 = parts[2].parse().map_err(|_| bad())?;
        let spacing = match parts.get(3) {
            None | Some(&"log") => Spacing::Log,
            Some(&"lin") | Some(&"linear") => Spacing::Linear,
            _ => return Err(bad()),
        };
        if !(min > 0.0 && max >= min && max.is_finite()) {
            return Err(Error::InvalidStepSize(if min > 0.0 { max } else { min }));
        }
        Ok(Schedule { n, min, max, spacing })
    }
}

/// A comma-separated list of positive numbers or an N:MIN:MAX schedule.
pub fn parse_steps(s: &str) -> Result<Vec<f64>> {
    let steps = if s.contains(':') {
        s.parse::<Schedule>()?.steps()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("step size '{t}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?
    };
    crate::tableau::validate_steps(&steps)?;
    Ok(steps)
}

/// `a`, `a+bi`, `a-bi`, `bi`, with `i` or `j` as imaginary unit.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim().replace(' ', "");
    let bad = || Error::InvalidArgument(format!("'{s}' is not a complex number"));
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| match x {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => x.parse::<f64>().map_err(|_| bad()),
    };
    match split {
        Some(k) => Ok(C64::new(body[..k].parse::<f64>().map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

pub fn parse_complex_list(s: &str) -> Result<Vec<C64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_complex).collect()
}

/// Fully resolved settings of a reduce or verify run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemSource,
    pub tableau_c: (String, ButcherTableau),
    pub tableau_o: (String, ButcherTableau),
    pub steps_c: Vec<f64>,
    pub steps_o: Vec<f64>,
    pub truncation: Truncation,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub realify: bool,
    pub dump_factors: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSource {
    Files { a: PathBuf, b: PathBuf, c: PathBuf },
    Bundled(String),
}

impl SystemArgs {
    fn source(&self) -> Result<SystemSource> {
        match (&self.bundled, &self.system_a, &self.system_b, &self.system_c) {
            (Some(name), None, None, None) => Ok(SystemSource::Bundled(name.clone())),
            (None, Some(a), Some(b), Some(c)) => Ok(SystemSource::Files { a: a.clone(), b: b.clone(), c: c.clone() }),
            _ => Err(Error::InvalidArgument("give either --bundled or all of --system-a, --system-b, --system-c".into())),
        }
    }
}

impl SystemSource {
    pub fn load(&self, seed: u64) -> Result<LtiSystem> {
        match self {
            SystemSource::Files { a, b, c } => load_system(a, b, c),
            SystemSource::Bundled(name) => bundled::by_name(name, seed),
        }
    }
}

impl RunConfig {
    pub fn from_args(args: &ReduceArgs) -> Result<Self> {
        let q = &args.quadrature;
        let default_steps = q.schedule.parse::<Schedule>()?.steps();
        let side = |s: &Option<String>| s.as_deref().map(parse_steps).unwrap_or_else(|| Ok(default_steps.clone()));
        if !(args.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", args.tol)));
        }
        Ok(RunConfig {
            system: args.system.source()?,
            tableau_c: (q.tableau_c.clone(), resolve_tableau(&q.tableau_c)?),
            tableau_o: (q.tableau_o.clone(), resolve_tableau(&q.tableau_o)?),
            steps_c: side(&q.steps_c)?,
            steps_o: side(&q.steps_o)?,
            truncation: args.truncation.parse()?,
            tol: args.tol,
            out: args.out.clone(),
            seed: args.system.seed,
            realify: args.realify,
            dump_factors: args.dump_factors,
        })
    }
}

#[derive(Debug, Serialize)]
struct TableauEcho {
    name: String,
    tableau: TableauJson,
    steps: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    n: usize,
    r: usize,
    truncation: String,
    guarantee: &'a Guarantee,
    realified: bool,
    sigma: &'a [f64],
    sigma_all: &'a [f64],
    controllability: TableauEcho,
    observability: TableauEcho,
    expansion_points: &'a ExpansionPointSet,
    finite_expansion_points: usize,
    composite_observable: HypothesisFlags,
    seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisFlags {
    pub controllability: Option<bool>,
    pub observability: Option<bool>,
}

impl HypothesisFlags {
    pub fn verified(&self) -> bool {
        self.controllability == Some(true) && self.observability == Some(true)
    }
}

/// Everything a reduce run produces.
#[derive(Debug)]
pub struct ReduceOutcome {
    pub system: LtiSystem,
    pub z_c: LowRankFactor,
    pub z_o: LowRankFactor,
    pub result: BalancingResult,
    pub points: ExpansionPointSet,
    pub observability: HypothesisFlags,
}

fn composite_flag(t: &ButcherTableau, steps: &[f64]) -> Result<Option<bool>> {
    let composite = assemble_composite(t, steps)?;
    if composite.beta_tilde_hat.iter().any(|&w| w <= 0.0) {
        return Ok(Some(false));
    }
    let eigs = composite.eigenvalues_by_block(t);
    Ok(composite_observable(&composite, &eigs))
}

/// Loads, checks stability, runs both quadratures concurrently, balances and
/// (optionally) realifies. Writes artifacts when `out` is set.
pub fn reduce(cfg: &RunConfig) -> Result<ReduceOutcome> {
    let system = cfg.system.load(cfg.seed)?;
    system.assert_stable()?;
    let factor_dir = match (&cfg.out, cfg.dump_factors) {
        (Some(out), true) => {
            let d = out.join("factors");
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            Some(d)
        }
        _ => None,
    };
    let opts = QuadratureOptions { dump_dir: factor_dir, ..Default::default() };
    let (zc, zo) = std::thread::scope(|scope| {
        let c = scope.spawn(|| run_quadrature_with(&system, GramianKind::Controllability, &cfg.tableau_c.1, &cfg.steps_c, &opts));
        let o = run_quadrature_with(&system, GramianKind::Observability, &cfg.tableau_o.1, &cfg.steps_o, &opts);
        (c.join().expect("quadrature thread panicked"), o)
    });
    let (z_c, z_o) = (zc?, zo?);
    log::info!("factors: {} and {} columns", z_c.k(), z_o.k());
    let mut result = approximate_balance(&system, &z_c, &z_o, cfg.truncation)?;
    if cfg.realify {
        result = realify(&system, &result)?;
    }
    let points = predict_expansion_points(&cfg.tableau_c.1, &cfg.steps_c, &cfg.tableau_o.1, &cfg.steps_o);
    let observability = HypothesisFlags {
        controllability: composite_flag(&cfg.tableau_c.1, &cfg.steps_c)?,
        observability: composite_flag(&cfg.tableau_o.1, &cfg.steps_o)?,
    };
    let outcome = ReduceOutcome { system, z_c, z_o, result, points, observability };
    if let Some(out) = &cfg.out {
        write_artifacts(cfg, &outcome, out)?;
    }
    Ok(outcome)
}

fn write_artifacts(cfg: &RunConfig, o: &ReduceOutcome, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    o.result.reduced.write_matrix_market(out, "reduced")?;
    let meta = Metadata {
        n: o.system.n(),
        r: o.result.r,
        truncation: cfg.truncation.to_string(),
        guarantee: &o.result.guarantee,
        realified: o.result.realified,
        sigma: &o.result.sigma,
        sigma_all: &o.result.sigma_all,
        controllability: TableauEcho { name: cfg.tableau_c.0.clone(), tableau: cfg.tableau_c.1.to_json(), steps: cfg.steps_c.clone() },
        observability: TableauEcho { name: cfg.tableau_o.0.clone(), tableau: cfg.tableau_o.1.to_json(), steps: cfg.steps_o.clone() },
        expansion_points: &o.points,
        finite_expansion_points: o.points.finite_count(),
        composite_observable: o.observability,
        seed: cfg.seed,
    };
    write_file(&out.join("metadata.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    write_file(&out.join("expansion_points.csv"), &o.points.to_csv())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn report_error(err: &mut dyn Write, e: &Error) -> ExitCode {
    let code = ExitCode::for_error(e);
    let _ = writeln!(err, "error: {e}");
    code
}

pub fn cmd_reduce(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode {
    match reduce(cfg) {
        Ok(o) => {
            let r = &o.result;
            let _ = writeln!(out, "n = {}, r = {} ({} + {} factor columns)", o.system.n(), r.r, o.z_c.k(), o.z_o.k());
            let _ = writeln!(out, "sigma: {:.3e} .. {:.3e}", r.sigma[0], r.sigma[r.r - 1]);
            let _ = writeln!(out, "finite expansion points: {}", o.points.finite_count());
            if let Guarantee::OutsideGuarantees(reason) = &r.guarantee {
                let _ = writeln!(out, "outside interpolation guarantees: {reason}");
            }
            if let Some(dir) = &cfg.out {
                let _ = writeln!(out, "wrote {}", dir.display());
            }
            ExitCode::Pass
        }
        Err(e) => report_error(err, &e),
    }
}

pub fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode {
    let outcome = match reduce(cfg) {
        Ok(o) => o,
        Err(e) => return report_error(err, &e),
    };
    let report: InterpolationReport = match verify_interpolation(&outcome.system, &outcome.result, &outcome.points, cfg.tol) {
        Ok(r) => r,
        Err(e) => return report_error(err, &e),
    };
    let _ = write!(out, "{}", report.to_table());
    if let Some(dir) = &cfg.out {
        if let Err(e) = write_file(&dir.join("interpolation_report.json"), &(report.to_json() + "\n")) {
            return report_error(err, &e);
        }
    }
    if report.guarantee.holds() && !outcome.observability.verified() {
        let _ = writeln!(err, "hypothesis unverified: composite observability {:?}", outcome.observability);
        return ExitCode::HypothesisUnverified;
    }
    if report.passed {
        ExitCode::Pass
    } else {
        ExitCode::Runtime
    }
}

pub fn cmd_expansion_points(args: &PointsArgs, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode {
    let run = || -> Result<ExpansionPointSet> {
        let default_steps = args.schedule.parse::<Schedule>()?.steps();
        let explicit = args.tableau_c.is_some() || args.steps_c.is_some() || args.tableau_o.is_some() || args.steps_o.is_some();
        let mut points = Vec::new();
        for (side, t, s) in [(Side::Input, &args.tableau_c, &args.steps_c), (Side::Output, &args.tableau_o, &args.steps_o)] {
            if explicit && t.is_none() && s.is_none() {
                continue;
            }
            let tableau = resolve_tableau(t.as_deref().unwrap_or("gauss-legendre-2"))?;
            let steps = match s {
                Some(s) => parse_steps(s)?,
                None => default_steps.clone(),
            };
            points.extend(side_points(&tableau, &steps, side));
        }
        Ok(ExpansionPointSet { points })
    };
    match run() {
        Ok(set) => {
            let csv = set.to_csv();
            match &args.out {
                Some(dir) => {
                    let path = dir.join("expansion_points.csv");
                    if let Err(e) = fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)).and_then(|_| write_file(&path, &csv)) {
                        return report_error(err, &e);
                    }
                    let _ = writeln!(out, "wrote {}", path.display());
                }
                None => {
                    let _ = write!(out, "{csv}");
                }
            }
            ExitCode::Pass
        }
        Err(e) => report_error(err, &e),
    }
}

pub fn cmd_compare_adi(args: &AdiArgs, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode {
    let run = || -> Result<f64> {
        let alphas = parse_complex_list(&args.alphas)?;
        if let Some(&bad) = alphas.iter().find(|a| !(a.re < 0.0)) {
            return Err(Error::InvalidAdiShift(bad));
        }
        let sys = args.system.source()?.load(args.system.seed)?;
        let kind = match args.gramian {
            GramianArg::Controllability => GramianKind::Controllability,
            GramianArg::Observability => GramianKind::Observability,
        };
        Ok(compare_adi(&sys, kind, &alphas)?.relative_difference)
    };
    match run() {
        Ok(diff) => {
            let ok = diff <= ADI_TOL;
            let _ = writeln!(out, "relative difference {diff:.3e} (tol {ADI_TOL:.0e}): {}", if ok { "PASS" } else { "FAIL" });
            if ok {
                ExitCode::Pass
            } else {
                ExitCode::Runtime
            }
        }
        Err(e) => report_error(err, &e),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let code = match &cli.command {
        Command::Reduce(a) | Command::Verify(a) => match RunConfig::from_args(a) {
            Ok(cfg) if matches!(cli.command, Command::Reduce(_)) => cmd_reduce(&cfg, out, err),
            Ok(cfg) => cmd_verify(&cfg, out, err),
            Err(e) => report_error(err, &e),
        },
        Command::ExpansionPoints(a) => cmd_expansion_points(a, out, err),
        Command::CompareAdi(a) => cmd_compare_adi(a, out, err),
    };
    code as i32
}
