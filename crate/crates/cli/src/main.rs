mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use rank1_spectra::ensemble::{esd_histogram, run_trials, summarize_samples, Distribution, Sampler};
use rank1_spectra::moments::{limiting_even_moment, moment_lower_bound, moment_upper_bound};
use rank1_spectra::radius::{
    build_pencil, moment_root, pencil_moments, radius_lower_bound, radius_upper_bound, sdp_lower_bound, DEFAULT_TOL,
};
use rank1_spectra::sigma::{limiting_averages, parse_sigma_spec, sigma_stats, sigma_values, SigmaSpec};
use rank1_spectra::validation::{run_validation, ValidationOptions};
use rank1_spectra::Error;

use report::{document, emit, num, opt_num, pretty, rows_csv, Manifest, Row};

const LIMIT_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "rank1-spectra", version, about = "Spectra of symmetric random matrices with rank-one variance profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Limiting even moments, with finite-n bounds when --n is given.
    Moments {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        max_order: usize,
        #[arg(long)]
        n: Option<usize>,
        /// Almost-sure entry bound K for the upper bound (default: max sigma).
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Monte Carlo spectra: report.json and esd.csv in --out.
    Simulate {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "rademacher")]
        dist: Distribution,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 10)]
        max_order: usize,
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral radius bounds and the Hankel pencil lower bound.
    Radius {
        #[arg(long)]
        sigma: String,
        /// Comma-separated moment orders s.
        #[arg(long, value_delimiter = ',')]
        orders: Vec<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 14)]
        sbar: usize,
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle cross-checks; exits 0 iff every check passes.
    Validate {
        #[arg(long)]
        deep: bool,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("RANK1_SPECTRA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| usage(format!("RANK1_SPECTRA_THREADS must be a non-negative integer, got '{raw}'")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn even_order(max_order: usize) -> CliResult<usize> {
    if max_order < 2 || max_order % 2 != 0 {
        return Err(usage(format!("--max-order must be even and at least 2, got {max_order}")));
    }
    Ok(max_order / 2)
}

/// Limiting averages `Λ_1..Λ_k`, or `None` for an explicit vector.
fn limits(spec: &SigmaSpec, k: usize) -> CliResult<Option<(Vec<f64>, bool)>> {
    match limiting_averages(spec, k, LIMIT_TOL) {
        Ok(l) => {
            let converged = l.all_converged();
            Ok(Some((l.values, converged)))
        }
        Err(Error::NoLimit) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Resolves `n` for explicit vectors, which fix it by their length.
fn resolve_n(spec: &SigmaSpec, n: Option<usize>) -> Option<usize> {
    match (spec, n) {
        (_, Some(n)) => Some(n),
        (SigmaSpec::Explicit(v), None) => Some(v.len()),
        _ => None,
    }
}

fn entry_bound(bound: Option<f64>, sigma_max: f64) -> CliResult<f64> {
    match bound {
        None => Ok(sigma_max),
        Some(k) if k.is_finite() && k >= sigma_max => Ok(k),
        Some(k) => Err(usage(format!("--bound must be at least max sigma = {sigma_max}, got {k}"))),
    }
}

/// Even-order rows for `s = 1..=s_max`.
fn moment_rows(spec: &SigmaSpec, s_max: usize, n: Option<usize>, bound: Option<f64>) -> CliResult<Vec<Row>> {
    let limit = limits(spec, s_max)?;
    let finite = match resolve_n(spec, n) {
        Some(n) => {
            let values = sigma_values(spec, n)?;
            let stats = sigma_stats(&values, s_max)?;
            let k = entry_bound(bound, stats.sigma_max)?;
            Some((values, stats, k))
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(s_max);
    for s in 1..=s_max {
        let mut row = Row {
            order: 2 * s,
            ..Row::default()
        };
        if let Some((lambdas, converged)) = &limit {
            row.limit = Some(limiting_even_moment(lambdas, s)?);
            if !converged {
                row.flags.push("limit_unconverged");
            }
        } else {
            row.flags.push("no_limit");
        }
        if let Some((values, stats, k)) = &finite {
            let m_finite = limiting_even_moment(&stats.normalized_sums(), s)?;
            row.finite_formula = Some(m_finite);
            if values.len() > s {
                let lower = moment_lower_bound(values, s)?;
                row.lower = Some(lower.value);
                if lower.vacuous {
                    row.flags.push("lower_vacuous");
                }
                let m = row.limit.unwrap_or(m_finite);
                let upper = moment_upper_bound(values.len(), s, *k, stats.sigma_max, stats.sigma_min, m)?;
                row.upper = Some(upper.value);
                if upper.overflow {
                    row.flags.push("upper_overflow");
                }
            } else {
                row.flags.push("n_le_s");
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_moments(
    manifest: &Manifest,
    sigma: &str,
    max_order: usize,
    n: Option<usize>,
    bound: Option<f64>,
    out: Option<&std::path::Path>,
    format: Format,
) -> CliResult<()> {
    let s_max = even_order(max_order)?;
    let spec = parse_sigma_spec(sigma)?;
    if n == Some(0) {
        return Err(usage("--n must be at least 1"));
    }
    let rows = moment_rows(&spec, s_max, n, bound)?;
    let m = manifest.to_json();
    let text = match format {
        Format::Csv => rows_csv(&m, &rows),
        Format::Json => {
            let mut payload = Map::new();
            payload.insert("n".into(), json!(resolve_n(&spec, n)));
            payload.insert("moments".into(), Value::Array(rows.iter().map(Row::to_json).collect()));
            pretty(&document(m, payload))
        }
    };
    emit(out, &text)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    manifest: &Manifest,
    sigma: &str,
    n: usize,
    trials: usize,
    dist: Distribution,
    seed: u64,
    bins: usize,
    max_order: usize,
    bound: Option<f64>,
    out: &std::path::Path,
) -> CliResult<()> {
    let s_max = even_order(max_order)?;
    if trials == 0 || n == 0 || bins == 0 {
        return Err(usage("--trials, --n and --bins must be at least 1"));
    }
    let spec = parse_sigma_spec(sigma)?;
    let values = sigma_values(&spec, n)?;
    let sigma_max = values.iter().copied().fold(0.0, f64::max);
    let k = bound.unwrap_or_else(|| dist.default_bound(sigma_max));
    let sampler = Sampler::new(values, dist, k)?;
    let samples = run_trials(&sampler, seed, trials)?;
    let mc = summarize_samples(&samples, max_order);
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    let hist = esd_histogram(&pooled, bins, None)?;

    let even = moment_rows(&spec, s_max, Some(n), Some(k.max(sigma_max)))?;
    let mut rows = Vec::with_capacity(max_order);
    for order in 1..=max_order {
        let emp = mc.moments[order - 1];
        let mut row = if order % 2 == 0 {
            even[order / 2 - 1].clone()
        } else {
            Row {
                order,
                limit: Some(0.0),
                ..Row::default()
            }
        };
        row.empirical_mean = Some(emp.mean);
        row.empirical_stderr = emp.stderr;
        if let (Some(limit), Some(se)) = (row.limit, emp.stderr) {
            if (emp.mean - limit).abs() > 3.0 * se {
                row.flags.push("gap_gt_3se");
            }
        }
        rows.push(row);
    }

    std::fs::create_dir_all(out)?;
    let m = manifest.to_json();
    let mut payload = Map::new();
    payload.insert(
        "simulation".into(),
        json!({
            "n": n,
            "trials": trials,
            "distribution": dist.name(),
            "bound": num(k),
            "truncation": num(sampler.truncation()),
        }),
    );
    payload.insert("moments".into(), Value::Array(rows.iter().map(Row::to_json).collect()));
    payload.insert(
        "radius".into(),
        json!({
            "mean": num(mc.radius.mean),
            "stderr": opt_num(mc.radius.stderr),
            "min": num(mc.radius.min),
            "max": num(mc.radius.max),
        }),
    );
    payload.insert("histogram_outside".into(), json!(hist.outside));
    std::fs::write(out.join("report.json"), pretty(&document(m.clone(), payload)))?;

    let mut csv = format!("# manifest: {m}\nbin_lo,bin_hi,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        csv.push_str(&format!("{:.16e},{:.16e},{c}\n", hist.edges[i], hist.edges[i + 1]));
    }
    std::fs::write(out.join("esd.csv"), csv)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_radius(
    manifest: &Manifest,
    sigma: &str,
    orders: &[usize],
    n: Option<usize>,
    sbar: usize,
    bound: Option<f64>,
    tol: f64,
    out: Option<&std::path::Path>,
) -> CliResult<()> {
    if sbar == 0 {
        return Err(usage("--sbar must be at least 1"));
    }
    if orders.contains(&0) {
        return Err(usage("--orders must be positive"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage(format!("--tol must be positive, got {tol}")));
    }
    let spec = parse_sigma_spec(sigma)?;
    let n = resolve_n(&spec, n);
    if n == Some(0) {
        return Err(usage("--n must be at least 1"));
    }
    let s_top = orders.iter().copied().max().unwrap_or(0).max(2 * sbar + 1);

    // Without a limit, the finite-n averages stand in for Λ.
    let (lambdas, source) = match limits(&spec, s_top)? {
        Some((l, _)) => (l, "limit"),
        None => {
            let values = sigma_values(&spec, n.expect("explicit vectors fix n"))?;
            (sigma_stats(&values, s_top)?.normalized_sums(), "finite_average")
        }
    };

    let mut bounds = Vec::new();
    for &s in orders {
        let m = limiting_even_moment(&lambdas, s)?;
        let mut entry = Map::new();
        entry.insert("s".into(), json!(s));
        entry.insert("moment".into(), num(m));
        entry.insert("moment_root".into(), num(moment_root(m, s)));
        if let Some(n) = n {
            let values = sigma_values(&spec, n)?;
            let stats = sigma_stats(&values, 1)?;
            let k = entry_bound(bound, stats.sigma_max)?;
            let lower = radius_lower_bound(&values, s)?;
            let upper = radius_upper_bound(n, s, k, stats.sigma_max, stats.sigma_min, m)?;
            entry.insert("lower".into(), num(lower.value));
            entry.insert("lower_vacuous".into(), json!(lower.vacuous));
            entry.insert("upper".into(), num(upper.value));
            entry.insert("upper_ln".into(), num(upper.ln_value));
            entry.insert("upper_overflow".into(), json!(upper.overflow));
            entry.insert("ln_theta".into(), num(upper.moment.ln_theta));
        }
        bounds.push(Value::Object(entry));
    }

    let pencil = build_pencil(&pencil_moments(&lambdas, sbar)?, sbar)?;
    let sol = sdp_lower_bound(&pencil, tol)?;
    let root_m = limiting_even_moment(&lambdas, s_top)?;

    let mut payload = Map::new();
    payload.insert(
        "radius".into(),
        json!({
            "n": n,
            "moment_source": source,
            "bounds": bounds,
            "sdp": {
                "s_bar": sbar,
                "beta": num(sol.beta),
                "sqrt_beta": num(sol.sqrt_beta),
                "beta_eigen": num(sol.beta_eigen),
                "method_agreement": num(sol.method_agreement),
                "condition_estimate": num(sol.condition_estimate),
                "iterations": sol.iterations,
            },
            "moment_root_limit": { "s": s_top, "value": num(moment_root(root_m, s_top)) },
        }),
    );
    emit(out, &pretty(&document(manifest.to_json(), payload)))?;
    Ok(())
}

fn cmd_validate(deep: bool, trials: usize, seed: u64) -> CliResult<()> {
    let options = ValidationOptions {
        deep,
        walk_trials: trials.max(2),
        seed,
        ..ValidationOptions::default()
    };
    let report = run_validation(&options)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime("validation failed".into()))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let args: Vec<String> = std::env::args().collect();
    let manifest = |command: &str, sigma: &str, seed: Option<u64>| Manifest {
        command: command.into(),
        args: args.clone(),
        sigma: Some(sigma.into()),
        seed,
    };
    match cli.command {
        Command::Moments {
            sigma,
            max_order,
            n,
            bound,
            out,
            format,
        } => cmd_moments(&manifest("moments", &sigma, None), &sigma, max_order, n, bound, out.as_deref(), format),
        Command::Simulate {
            sigma,
            n,
            trials,
            dist,
            seed,
            bins,
            max_order,
            bound,
            out,
        } => cmd_simulate(
            &manifest("simulate", &sigma, Some(seed)),
            &sigma,
            n,
            trials,
            dist,
            seed,
            bins,
            max_order,
            bound,
            &out,
        ),
        Command::Radius {
            sigma,
            orders,
            n,
            sbar,
            bound,
            tol,
            out,
        } => cmd_radius(&manifest("radius", &sigma, None), &sigma, &orders, n, sbar, bound, tol, out.as_deref()),
        Command::Validate { deep, trials, seed } => cmd_validate(deep, trials, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
