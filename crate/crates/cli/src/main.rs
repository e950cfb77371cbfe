//! Command-line front end for jackknife-free pseudo-observations.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use pseudo_core::fit::FitOptions;
use pseudo_core::jackknife::jackknife_pch;
use pseudo_core::param_pseudo::pseudo_param;
use pseudo_core::sim::{benchmark, monte_carlo, MethodChoice, Scenario, ScenarioConfig};
use pseudo_core::{
    fit, fit_gee, jackknife_km, km_fit, load_interval_dataset, load_right_censored_dataset,
    CutGrid, GeeOptions, Link, PseudoVector, Target,
};

#[derive(Parser, Debug)]
#[command(
    name = "pseudo",
    version,
    about = "Pseudo-observations for survival and RMST regression"
)]
struct Cli {
    /// Seed for every randomized computation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-subject pseudo-observations, written as `id,pseudo`.
    Pseudo(PseudoArgs),
    /// Fit the piecewise-constant hazard model and report the estimate.
    Fit(FitArgs),
    /// Regress pseudo-observations on covariates (GEE, sandwich errors).
    Regress(RegressArgs),
    /// Monte-Carlo comparison of fast and jackknife pseudo-regression.
    Simulate(SimulateArgs),
    /// Time fast against jackknife pseudo-values on one simulated sample.
    Bench(BenchArgs),
    /// Step-function CSV of the estimated survival and hazard, for plotting.
    Curve(CurveArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Rc,
    Ic,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TargetKind {
    Surv,
    Rmst,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PseudoMethod {
    Fast,
    Jackknife,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SimMethod {
    Fast,
    Jackknife,
    Both,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScenarioArg {
    Rc,
    Ic1,
    Ic2,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum LinkArg {
    Identity,
    Cloglog,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Args, Debug)]
struct PseudoArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, value_enum)]
    target: TargetKind,
    /// Time point for `--target surv`.
    #[arg(long)]
    t: Option<f64>,
    /// Horizon for `--target rmst`; `inf` is allowed for `--kind ic`.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value = "fast")]
    method: PseudoMethod,
    /// Interior cut points of the pch model, comma-separated (required for `--kind ic`).
    #[arg(long, value_delimiter = ',')]
    cuts: Option<Vec<f64>>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Interval-censored data with columns `left,right`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    cuts: Vec<f64>,
    /// Refuse to fit when a piece fails the identifiability diagnostics.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// Pseudo-value CSV as written by `pseudo` (`id,pseudo`).
    #[arg(long)]
    pseudo: PathBuf,
    /// Covariate CSV with a header row, one row per subject in the same order.
    #[arg(long)]
    covariates: PathBuf,
    /// Covariate columns to use (default: all except `id`).
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "identity")]
    link: LinkArg,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Run the full 500-replication protocol (overrides `--reps`).
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value = "both")]
    method: SimMethod,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Include wall-clock time columns (makes the output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, value_delimiter = ',')]
    cuts: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Invalid flag combination detected before any computation.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Exit code and machine-readable name for an error chain.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return (2, "InvalidArguments");
        }
        if let Some(e) = cause.downcast_ref::<pseudo_core::Error>() {
            return (if e.is_input_error() { 2 } else { 3 }, e.code());
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return (2, "Io");
        }
        if cause.downcast_ref::<csv::Error>().is_some() {
            return (2, "ParseError");
        }
    }
    (3, "Internal")
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn grid_from(cuts: &[f64]) -> Result<CutGrid> {
    Ok(CutGrid::new(cuts.to_vec())?)
}

fn target_from(args: &PseudoArgs) -> Result<Target> {
    let target = match args.target {
        TargetKind::Surv => {
            Target::Survival(args.t.ok_or_else(|| usage("--target surv requires --t"))?)
        }
        TargetKind::Rmst => Target::Rmst(
            args.tau
                .ok_or_else(|| usage("--target rmst requires --tau"))?,
        ),
    };
    target.validate()?;
    Ok(target)
}

fn run_pseudo(args: &PseudoArgs) -> Result<()> {
    let target = target_from(args)?;
    let pseudo: PseudoVector = match args.kind {
        Kind::Rc => {
            if args.cuts.is_some() {
                return Err(usage("--cuts applies to --kind ic only"));
            }
            let data = load_right_censored_dataset(open(&args.data)?)?;
            match args.method {
                PseudoMethod::Fast => pseudo_core::km::km_pseudo(&km_fit(&data)?, target)?,
                PseudoMethod::Jackknife => jackknife_km(&data, target)?,
            }
        }
        Kind::Ic => {
            let cuts = args
                .cuts
                .as_ref()
                .ok_or_else(|| usage("--kind ic requires --cuts"))?;
            let grid = grid_from(cuts)?;
            let data = load_interval_dataset(open(&args.data)?)?;
            let options = FitOptions::default();
            match args.method {
                PseudoMethod::Fast => pseudo_param(&fit(&data, &grid, &options)?, &data, target)?,
                PseudoMethod::Jackknife => {
                    let out = jackknife_pch(&data, &grid, target, &options)?;
                    if let Some((l, e)) = out.failures.into_iter().next() {
                        return Err(anyhow::Error::new(e).context(format!(
                            "leave-one-out refit without subject {} failed",
                            l + 1
                        )));
                    }
                    out.pseudo
                }
            }
        }
    };
    let mut out = output(args.out.as_deref())?;
    pseudo.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let grid = grid_from(&args.cuts)?;
    let data = load_interval_dataset(open(&args.data)?)?;
    let options = FitOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        strict: args.strict,
        ..FitOptions::default()
    };
    let f = fit(&data, &grid, &options)?;
    let n = f.n as f64;
    let cov = pseudo_core::observed_information(&f)
        .ok()
        .and_then(|i| i.try_inverse());
    let mut out = output(None)?;
    writeln!(
        out,
        "n = {} | loglik = {} | iterations = {} | max |score| = {:e}",
        f.n, f.loglik, f.iterations, f.grad_norm
    )?;
    writeln!(out, "piece,lower,upper,alpha,se")?;
    for k in 0..grid.pieces() {
        let se = cov.as_ref().map_or(f64::NAN, |c| (c[(k, k)] / n).sqrt());
        writeln!(
            out,
            "{},{},{},{},{}",
            k + 1,
            grid.lower(k),
            grid.upper(k),
            f.alpha()[k],
            se
        )?;
    }
    writeln!(out, "observed information (per subject):")?;
    for row in f.info.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(out, "  {}", cells.join(" "))?;
    }
    writeln!(out, "identifiability diagnostics:")?;
    for c in &f.conditions {
        let verdict = if c.violated() { "VIOLATED" } else { "ok" };
        writeln!(
            out,
            "  piece {}: {} finite intervals overlap, {} left endpoints beyond its start: {verdict}",
            c.piece + 1,
            c.finite_hits,
            c.left_beyond
        )?;
    }
    if cov.is_none() {
        writeln!(
            out,
            "warning: information is numerically singular; standard errors unavailable"
        )?;
    }
    out.flush()?;
    Ok(())
}

fn read_pseudo(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("pseudo"))
        .ok_or_else(|| pseudo_core::Error::Parse {
            row: 0,
            message: format!("{} has no `pseudo` column", path.display()),
        })?;
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(col).unwrap_or("").trim();
        values.push(cell.parse::<f64>().map_err(|_| pseudo_core::Error::Parse {
            row: i + 1,
            message: format!("cannot parse pseudo-value {cell:?}"),
        })?);
    }
    Ok(values)
}

fn read_covariates(path: &Path, columns: Option<&[String]>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let selected: Vec<usize> = match columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| usage(format!("covariate column {c:?} not found")))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&j| !headers[j].eq_ignore_ascii_case("id"))
            .collect(),
    };
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        for &j in &selected {
            let cell = rec.get(j).unwrap_or("").trim();
            rows.push(cell.parse::<f64>().map_err(|_| pseudo_core::Error::Parse {
                row: i + 1,
                message: format!("cannot parse covariate {:?} value {cell:?}", headers[j]),
            })?);
        }
    }
    let p = selected.len();
    let n = rows.len().checked_div(p).unwrap_or(0);
    let names = selected.iter().map(|&j| headers[j].clone()).collect();
    Ok((names, DMatrix::from_row_slice(n, p, &rows)))
}

fn run_regress(args: &RegressArgs) -> Result<()> {
    let y = read_pseudo(&args.pseudo)?;
    let (mut names, mut x) = read_covariates(&args.covariates, args.columns.as_deref())?;
    if x.ncols() > 0 && x.nrows() != y.len() {
        return Err(pseudo_core::Error::DimensionMismatch(format!(
            "{} pseudo-values but {} covariate rows",
            y.len(),
            x.nrows()
        ))
        .into());
    }
    if !args.no_intercept {
        x = x.insert_column(0, 1.0);
        if x.nrows() == 0 {
            x = DMatrix::from_element(y.len(), 1, 1.0);
        }
        names.insert(0, "(Intercept)".into());
    }
    let link = match args.link {
        LinkArg::Identity => Link::Identity,
        LinkArg::Cloglog => Link::Cloglog,
    };
    let g = fit_gee(&y, &x, Some(names), link, &GeeOptions::default())?;
    let mut out = output(args.out.as_deref())?;
    g.write_wald_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn scenario(arg: ScenarioArg) -> Scenario {
    match arg {
        ScenarioArg::Rc => Scenario::Rc,
        ScenarioArg::Ic1 => Scenario::Ic1,
        ScenarioArg::Ic2 => Scenario::Ic2,
    }
}

fn run_simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    let config = ScenarioConfig::new(scenario(args.scenario), args.n, seed);
    config.validate()?;
    let reps = if args.full { 500 } else { args.reps };
    if reps < 2 {
        return Err(usage("--reps must be at least 2"));
    }
    let method = match args.method {
        SimMethod::Fast => MethodChoice::Fast,
        SimMethod::Jackknife => MethodChoice::Jackknife,
        SimMethod::Both => MethodChoice::Both,
    };
    let report = monte_carlo(&config, method, reps)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => report.write_csv(&mut out, args.timing)?,
        Format::Text => write!(out, "{}", report.to_text(args.timing))?,
    }
    if let Some(d) = report.max_method_difference() {
        log::info!("max |beta_fast - beta_jackknife| = {d:e}");
    }
    out.flush()?;
    Ok(())
}

fn run_bench(args: &BenchArgs, seed: u64) -> Result<()> {
    let report = benchmark(&ScenarioConfig::new(scenario(args.scenario), args.n, seed))?;
    let mut out = output(args.out.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run_curve(args: &CurveArgs) -> Result<()> {
    let mut out = output(args.out.as_deref())?;
    match args.kind {
        Kind::Rc => {
            if args.cuts.is_some() {
                return Err(usage("--cuts applies to --kind ic only"));
            }
            let data = load_right_censored_dataset(open(&args.data)?)?;
            let km = km_fit(&data)?;
            // right-continuous steps: the value holds from t until the next row
            writeln!(out, "t,survival,cum_hazard")?;
            for (t, s) in km.curve() {
                writeln!(out, "{t},{s},{}", km.cum_hazard_at(t))?;
            }
        }
        Kind::Ic => {
            let cuts = args
                .cuts
                .as_ref()
                .ok_or_else(|| usage("--kind ic requires --cuts"))?;
            let data = load_interval_dataset(open(&args.data)?)?;
            let f = fit(&data, &grid_from(cuts)?, &FitOptions::default())?;
            let grid = f.model.grid();
            // one row per piece start; the hazard is constant until the next row
            writeln!(out, "t,survival,hazard")?;
            for k in 0..grid.pieces() {
                let lo = grid.lower(k);
                writeln!(out, "{lo},{},{}", f.model.survival(lo), f.alpha()[k])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match &cli.command {
        Command::Pseudo(a) => run_pseudo(a),
        Command::Fit(a) => run_fit(a),
        Command::Regress(a) => run_regress(a),
        Command::Simulate(a) => run_simulate(a, cli.seed),
        Command::Bench(a) => run_bench(a, cli.seed),
        Command::Curve(a) => run_curve(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error[InvalidArguments]: {}",
                line.trim_start_matches("error: ")
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, name) = classify(&e);
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{name}]: {msg}");
            ExitCode::from(code)
        }
    }
}
