//! Argument parsing and command dispatch for the `tdelay` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use tdelay::axis::{parse_float_list, AxisSpec};
use tdelay::charfunc::{laplace_empirical, z_perfect_hankel, z_ratio_mc, ZPoint};
use tdelay::coupling::{Coupling, DelayKind};
use tdelay::ensembles::SymmetryClass;
use tdelay::observables::{
    rescale, sample_batch, summary, EmpiricalDistribution, RescaleMode, SamplerConfig,
};
use tdelay::oracles::{self, GridFunction};
use tdelay::verify::{run_suite, Suite, VerificationReport};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "TDELAY_WORKERS";

/// Largest number of raw values written by `--dump`.
pub const DUMP_CAP: usize = 10_000_000;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] tdelay::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(
                tdelay::Error::InvalidParameter { .. }
                | tdelay::Error::UnsupportedSymmetry(_)
                | tdelay::Error::Parse { .. },
            ) => EXIT_USAGE,
            _ => EXIT_FAIL,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "tdelay", version, about = "Time-delay statistics of chaotic cavities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo sampling into a histogram CSV and a summary JSON.
    Sample(SampleArgs),
    /// Tabulate an exact result on a grid.
    Exact(ExactArgs),
    /// Characteristic function of the rescaled Wigner time (beta = 2).
    Charfunc(CharfuncArgs),
    /// Run the acceptance suite and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CouplingArgs {
    /// Coupling constant g > 0 (g = 1 is perfect coupling).
    #[arg(long, conflicts_with = "transmission")]
    pub coupling: Option<f64>,
    /// Transmission coefficient T in (0, 1].
    #[arg(long)]
    pub transmission: Option<f64>,
}

impl CouplingArgs {
    pub fn resolve(&self) -> CliResult<Coupling> {
        match (self.coupling, self.transmission) {
            (Some(_), Some(_)) => Err(usage("--coupling and --transmission are mutually exclusive")),
            (Some(g), None) => Ok(Coupling::new(g)?),
            (None, Some(t)) => Ok(Coupling::from_transmission(t)?),
            (None, None) => Ok(Coupling::perfect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Observable {
    Wigner,
    Proper,
    Partial,
    Heuristic,
}

impl From<Observable> for DelayKind {
    fn from(o: Observable) -> Self {
        match o {
            Observable::Wigner => DelayKind::Wigner,
            Observable::Proper => DelayKind::Proper,
            Observable::Partial => DelayKind::Partial,
            Observable::Heuristic => DelayKind::Heuristic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rescale {
    None,
    T,
    S,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub observable: Observable,
    #[arg(long, default_value_t = 2)]
    pub beta: u8,
    #[arg(long)]
    pub channels: usize,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; overrides TDELAY_WORKERS.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Histogram bins: log:LO:HI:COUNT, lin:LO:HI:COUNT or a list of edges.
    #[arg(long, default_value = "log:1e-6:1e6:240")]
    pub bins: String,
    /// Variable to histogram.
    #[arg(long, value_enum, default_value_t = Rescale::None)]
    pub rescale: Rescale,
    /// Partial times from full matrix samples instead of uniform phases.
    #[arg(long)]
    pub partial_from_matrices: bool,
    /// Histogram CSV path (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary JSON path (stderr if absent).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write raw values, one per line, to this path.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    VarWigner,
    VarPartial,
    CovPartial,
    PdfPartial,
    PdfPartialWeak,
    PdfPartialExact,
    PdfProperExact,
    PdfPerfect,
    TailCoeffs,
    Cutoffs,
    WidthPdf,
    Selberg,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    #[arg(long, default_value_t = 2)]
    pub beta: u8,
    #[arg(long)]
    pub channels: usize,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    /// Evaluation grid; densities default to log:1e-3:1e3:121.
    #[arg(long)]
    pub grid: Option<String>,
    /// Second Selberg exponent.
    #[arg(long, default_value_t = 2.0)]
    pub selberg_beta: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CharfuncArgs {
    #[arg(long, default_value_t = 2)]
    pub beta: u8,
    #[arg(long)]
    pub channels: usize,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    /// Comma-separated values of p.
    #[arg(long, default_value = "0,0.1,1,10")]
    pub p: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Perfect-coupling Hankel determinant instead of Monte Carlo.
    #[arg(long)]
    pub perfect: bool,
    /// Also estimate the transform directly from sampled Wigner times.
    #[arg(long)]
    pub laplace: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "core")]
    pub suite: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Worker count from the flag, else from the environment.
pub fn resolve_workers(flag: Option<usize>) -> CliResult<Option<usize>> {
    let w = match flag {
        Some(w) => Some(w),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| usage(format!("{WORKERS_ENV}={v} is not a worker count")))?),
            Err(_) => None,
        },
    };
    if w == Some(0) {
        return Err(usage("worker count must be at least 1"));
    }
    Ok(w)
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Checks every textual option of a parsed command without running it.
pub fn validate(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sample(a) => {
            SymmetryClass::new(a.beta)?;
            a.coupling.resolve()?;
            a.bins.parse::<AxisSpec>()?.edges()?;
        }
        Command::Exact(a) => {
            SymmetryClass::new(a.beta)?;
            a.coupling.resolve()?;
            if let Some(g) = &a.grid {
                g.parse::<AxisSpec>()?;
            }
        }
        Command::Charfunc(a) => {
            a.coupling.resolve()?;
            parse_float_list(&a.p)?;
        }
        Command::Verify(a) => {
            a.suite.parse::<Suite>()?;
        }
    }
    Ok(())
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Sample(a) => cmd_sample(&a).map(|_| EXIT_PASS),
        Command::Exact(a) => cmd_exact(&a).map(|_| EXIT_PASS),
        Command::Charfunc(a) => cmd_charfunc(&a).map(|_| EXIT_PASS),
        Command::Verify(a) => cmd_verify(&a).map(|r| if r.pass { EXIT_PASS } else { EXIT_FAIL }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub observable: String,
    pub beta: u8,
    pub channels: usize,
    pub g: f64,
    pub transmission: f64,
    pub rescale: String,
    pub samples: usize,
    pub seed: u64,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub rejected: usize,
    pub underflow: u64,
    pub overflow: u64,
}

pub fn cmd_sample(a: &SampleArgs) -> CliResult<SampleSummary> {
    let beta = SymmetryClass::new(a.beta)?;
    let coupling = a.coupling.resolve()?;
    let kind = DelayKind::from(a.observable);
    let matrix = matches!(kind, DelayKind::Wigner | DelayKind::Proper)
        || (kind == DelayKind::Partial && a.partial_from_matrices);
    if matrix && beta == SymmetryClass::Symplectic {
        return Err(usage(format!("matrix sampling of `{kind}` times is not available at beta = 4")));
    }
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let axis: AxisSpec = a.bins.parse()?;
    let workers = resolve_workers(a.workers)?;
    let cfg = SamplerConfig {
        partial_from_matrices: a.partial_from_matrices,
        ..SamplerConfig::new(kind, beta, a.channels, coupling, a.samples, a.seed)
    };
    let mut batch = sample_batch(&cfg, workers)?;
    batch = match a.rescale {
        Rescale::None => batch,
        Rescale::T => rescale(&batch, RescaleMode::T)?,
        Rescale::S => rescale(&batch, RescaleMode::S)?,
    };
    let mut dist = EmpiricalDistribution::from_axis(&axis)?;
    for chunk in batch.values.chunks(tdelay::parallel::BATCH_SIZE) {
        dist.accumulate(chunk);
    }
    dist.write_csv(open_output(&a.output)?)?;
    if let Some(path) = &a.dump {
        let mut w = BufWriter::new(File::create(path)?);
        for v in batch.values.iter().take(DUMP_CAP) {
            writeln!(w, "{v:e}")?;
        }
        w.flush()?;
    }
    let s = summary(&batch.values, a.seed)?;
    let out = SampleSummary {
        observable: kind.to_string(),
        beta: a.beta,
        channels: a.channels,
        g: coupling.g(),
        transmission: coupling.transmission(),
        rescale: a.rescale.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
        samples: a.samples,
        seed: a.seed,
        count: s.count,
        mean: s.mean,
        variance: s.variance,
        se_mean: s.se_mean,
        se_variance: s.se_variance,
        rejected: batch.rejected,
        underflow: dist.underflow(),
        overflow: dist.overflow(),
    };
    let json = serde_json::to_string_pretty(&out).map_err(|e| CliError::Io(e.into()))?;
    match &a.summary {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => eprintln!("{json}"),
    }
    Ok(out)
}

/// Output of `exact`: a tabulated function or a set of named constants.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactOutput {
    Grid(GridFunction),
    Named { quantity: String, beta: u8, channels: usize, coupling: Option<f64>, rows: Vec<(String, f64)> },
}

impl ExactOutput {
    pub fn write_csv<W: Write>(&self, mut w: W) -> CliResult<()> {
        match self {
            ExactOutput::Grid(g) => g.write_csv(&mut w)?,
            ExactOutput::Named { quantity, beta, channels, coupling, rows } => {
                writeln!(w, "# quantity={quantity}")?;
                writeln!(w, "# beta={beta}")?;
                writeln!(w, "# channels={channels}")?;
                if let Some(g) = coupling {
                    writeln!(w, "# coupling={g}")?;
                }
                writeln!(w, "x,value")?;
                for (name, v) in rows {
                    writeln!(w, "{name},{v:e}")?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn grid_or(spec: &Option<String>, default: &str) -> CliResult<Vec<f64>> {
    let s = spec.as_deref().unwrap_or(default);
    Ok(s.parse::<AxisSpec>()?.points())
}

fn require_unitary(beta: SymmetryClass, what: &str) -> CliResult<()> {
    if beta != SymmetryClass::Unitary {
        return Err(usage(format!("{what} is available for beta = 2 only")));
    }
    Ok(())
}

pub fn exact(a: &ExactArgs) -> CliResult<ExactOutput> {
    let beta = SymmetryClass::new(a.beta)?;
    let n = a.channels;
    let coupling = a.coupling.resolve()?;
    let g_bar = coupling.g_bar();
    let g_meta = Some(coupling.g());
    let name = a.quantity.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let tab = |x: Vec<f64>, f: &(dyn Fn(f64) -> tdelay::Result<f64> + Sync)| -> CliResult<ExactOutput> {
        Ok(ExactOutput::Grid(GridFunction::tabulate(name.clone(), a.beta, n, g_meta, x, f)?))
    };
    let density_grid = || grid_or(&a.grid, "log:1e-3:1e3:121");
    let t_grid = || -> CliResult<Vec<f64>> {
        match &a.grid {
            Some(s) => Ok(s.parse::<AxisSpec>()?.points()),
            None => Ok(vec![coupling.transmission()]),
        }
    };
    match a.quantity {
        Quantity::VarWigner | Quantity::VarPartial | Quantity::CovPartial => {
            let ts = t_grid()?;
            if beta == SymmetryClass::Unitary {
                let f = match a.quantity {
                    Quantity::VarWigner => oracles::var_wigner_unitary,
                    Quantity::VarPartial => oracles::var_partial_unitary,
                    _ => oracles::cov_partial_unitary,
                };
                tab(ts, &|t| f(n, t))
            } else {
                if ts.iter().any(|&t| t != 1.0) {
                    return Err(usage(format!("{name} at T < 1 is available for beta = 2 only")));
                }
                let v = match a.quantity {
                    Quantity::VarWigner => oracles::var_wigner_perfect(beta, n)?,
                    Quantity::VarPartial => oracles::var_partial_perfect(beta, n)?,
                    _ => oracles::cov_partial_perfect(beta, n)?,
                };
                tab(ts, &|_| Ok(v))
            }
        }
        Quantity::PdfPartial => tab(density_grid()?, &|t| oracles::pdf_partial(beta, n, g_bar, t)),
        Quantity::PdfPartialWeak => tab(density_grid()?, &|t| oracles::pdf_partial_weak(beta, n, t)),
        Quantity::PdfPartialExact => {
            require_unitary(beta, "the derivative formula for the partial-time density")?;
            tab(density_grid()?, &|t| oracles::pdf_partial_unitary_exact(n, g_bar, t))
        }
        Quantity::PdfProperExact => {
            require_unitary(beta, "the exact proper-time marginal")?;
            tab(density_grid()?, &|t| oracles::pdf_proper_unitary_exact(n, g_bar, t))
        }
        Quantity::PdfPerfect => tab(density_grid()?, &|t| oracles::pdf_partial_perfect(beta, n, t)),
        Quantity::WidthPdf => tab(grid_or(&a.grid, "log:1e-3:1e2:101")?, &|y| oracles::resonance_width_pdf(beta, n, y)),
        Quantity::Selberg => {
            let alphas = grid_or(&a.grid, &format!("{n}"))?;
            tab(alphas, &|al| oracles::selberg_cauchy_norm(n, al, a.selberg_beta))
        }
        Quantity::TailCoeffs => {
            let c = oracles::tail_coefficients(beta, n)?;
            let mut rows = vec![("a".to_string(), c.a), ("b".to_string(), c.b), ("c_tilde".to_string(), c.c_tilde)];
            if let Some(cn) = c.c {
                rows.push(("c".to_string(), cn));
            }
            Ok(ExactOutput::Named { quantity: name, beta: a.beta, channels: n, coupling: None, rows })
        }
        Quantity::Cutoffs => {
            let c = oracles::cutoffs(beta, n, g_bar)?;
            let mut rows = vec![
                ("t_low".to_string(), c.t_low),
                ("t_low_partial".to_string(), c.t_low_partial),
                ("t_up".to_string(), c.t_up),
            ];
            if !coupling.is_perfect() {
                rows.push(("tau_star".to_string(), oracles::wigner_crossover(n, coupling.canonical().g())?));
            }
            Ok(ExactOutput::Named { quantity: name, beta: a.beta, channels: n, coupling: g_meta, rows })
        }
    }
}

pub fn cmd_exact(a: &ExactArgs) -> CliResult<ExactOutput> {
    let out = exact(a)?;
    out.write_csv(open_output(&a.output)?)?;
    Ok(out)
}

pub fn charfunc(a: &CharfuncArgs) -> CliResult<Vec<ZPoint>> {
    if a.beta != 2 {
        return Err(usage("the characteristic function is available for beta = 2 only"));
    }
    let n = a.channels;
    let ps = parse_float_list(&a.p)?;
    if let Some(p) = ps.iter().find(|p| **p < 0.0) {
        return Err(usage(format!("p = {p} must be non-negative")));
    }
    let coupling = a.coupling.resolve()?;
    let workers = resolve_workers(a.workers)?;
    let mut points = if a.perfect {
        if !coupling.is_perfect() {
            return Err(usage("--perfect requires g = 1"));
        }
        ps.iter()
            .map(|&p| Ok(ZPoint { p, z_ratio: z_perfect_hankel(n, p)?.value(), se: 0.0, method: "hankel".into() }))
            .collect::<tdelay::Result<Vec<_>>>()?
    } else {
        z_ratio_mc(n, coupling.g(), &ps, a.samples, a.seed, workers)?.points
    };
    if a.laplace {
        let cfg = SamplerConfig::new(DelayKind::Wigner, SymmetryClass::Unitary, n, coupling, a.samples, a.seed);
        let batch = sample_batch(&cfg, workers)?;
        for &p in &ps {
            let (z, se) = laplace_empirical(&batch, p)?;
            points.push(ZPoint { p, z_ratio: z, se, method: "laplace".into() });
        }
    }
    Ok(points)
}

pub fn cmd_charfunc(a: &CharfuncArgs) -> CliResult<Vec<ZPoint>> {
    let points = charfunc(a)?;
    let mut w = open_output(&a.output)?;
    serde_json::to_writer_pretty(&mut w, &points).map_err(|e| CliError::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(points)
}

pub fn cmd_verify(a: &VerifyArgs) -> CliResult<VerificationReport> {
    let suite: Suite = a.suite.parse().map_err(|e: tdelay::Error| usage(e.to_string()))?;
    let workers = resolve_workers(a.workers)?;
    let report = run_suite(suite, a.seed, workers)?;
    let mut w = open_output(&a.output)?;
    w.write_all(report.to_json()?.as_bytes())?;
    writeln!(w)?;
    w.flush()?;
    Ok(report)
}
