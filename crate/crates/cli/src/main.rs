//! `umom`: estimators, deviation experiments and exact decompositions from
//! flat `key=value` config files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use umom::config::{distribution_from_config, estimator_from_config, FlatConfig};
use umom::devlab::{default_t_grid, render_report, run_report, ExperimentConfig, ReportFormat};
use umom::estimators::{breakdown_fraction, breakdown_scan};
use umom::rng::stream;
use umom::selftest::identity_suite;
use umom::ustat::{Decomposition, Kernel, ScalarFn};
use umom::{EstimatorSpec, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "umom", version, about = "Median-of-means and U-statistic estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format for `tails` and `variance`.
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "csv", "plotdata"])]
    format: String,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Point estimate for the sample in `data`.
    Estimate,
    /// Deviation tail curve and sub-Gaussian fit.
    Tails,
    /// Variance ratio N E(mu_hat - mu)^2 / sigma^2.
    Variance,
    /// Exact Hoeffding decomposition of a built-in kernel.
    Decompose,
    /// Finite-sample breakdown scan of the exact U-MOM estimator.
    Breakdown,
    /// Exact-identity suite.
    Selftest,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config { .. } => 2,
        Error::CapExceeded { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    if let Command::Selftest = cli.command {
        return selftest(cli);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config { key: "--config".into(), message: "a config file is required".into() })?;
    let mut cfg = FlatConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config { key: "--config".into(), message: format!("{}: {io}", path.display()) },
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    match cli.command {
        Command::Estimate => estimate(cli, &mut cfg, base),
        Command::Tails => experiment(cli, &mut cfg, true),
        Command::Variance => experiment(cli, &mut cfg, false),
        Command::Decompose => decompose(cli, &mut cfg),
        Command::Breakdown => breakdown(cli, &mut cfg, base),
        Command::Selftest => unreachable!(),
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// Seed from `--seed`, else the `seed` key.
fn seed(cli: &Cli, cfg: &mut FlatConfig, required: bool) -> Result<Option<u64>> {
    let from_file = cfg.parsed::<u64>("seed")?;
    let seed = cli.seed.or(from_file);
    if required && seed.is_none() {
        return Err(config_err("seed", "missing required key (or pass --seed)"));
    }
    Ok(seed)
}

// Parameter errors are reported against the key that carries the parameter.
fn validate_estimator(spec: &EstimatorSpec, n: usize) -> Result<()> {
    spec.validate(n).map_err(|e| match e {
        Error::CapExceeded { .. } => e,
        Error::InvalidK { .. } => config_err("k", e.to_string()),
        Error::EmptyInput => config_err("n", e.to_string()),
        other => {
            let key = match spec {
                EstimatorSpec::IncompleteUmom { subsets: 0, .. } => "subsets",
                EstimatorSpec::SampleMean | EstimatorSpec::Mom { .. } => "estimator",
                _ => "m",
            };
            config_err(key, other.to_string())
        }
    })
}

fn read_data(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err("data", format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| config_err("data", format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn data_path(cfg: &mut FlatConfig, base: &Path) -> Result<Option<PathBuf>> {
    Ok(cfg.get("data").map(|p| {
        let p = PathBuf::from(p);
        if p.is_relative() { base.join(p) } else { p }
    }))
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn estimate(cli: &Cli, cfg: &mut FlatConfig, base: &Path) -> Result<u8> {
    let path = data_path(cfg, base)?.ok_or_else(|| config_err("data", "missing required key"))?;
    let spec = estimator_from_config(cfg)?;
    let seed = seed(cli, cfg, spec.is_randomized())?;
    cfg.finish()?;
    let sample = read_data(&path)?;
    validate_estimator(&spec, sample.len())?;
    let value = spec.estimate(&sample, &mut stream(seed.unwrap_or(0), 0))?;
    println!("{value:?}");
    if let Some(out) = &cli.out {
        #[derive(Serialize)]
        struct Estimate<'a> {
            estimator: &'a EstimatorSpec,
            #[serde(rename = "N")]
            n: usize,
            estimate: f64,
        }
        std::fs::write(out, to_json(&Estimate { estimator: &spec, n: sample.len(), estimate: value })?)?;
    }
    Ok(0)
}

fn experiment(cli: &Cli, cfg: &mut FlatConfig, tails: bool) -> Result<u8> {
    let distribution = distribution_from_config(cfg)?;
    let estimator = estimator_from_config(cfg)?;
    let n: usize = cfg.require_parsed("n")?;
    let replications: usize = cfg.require_parsed("replications")?;
    let t_grid = cfg.f64_list("t_grid")?.unwrap_or_else(default_t_grid);
    let fit_min: Option<f64> = cfg.parsed("fit_min")?;
    let fit_max: Option<f64> = cfg.parsed("fit_max")?;
    let seed = seed(cli, cfg, true)?.unwrap_or_default();
    cfg.finish()?;

    if tails && replications < umom::devlab::MIN_TAIL_REPLICATIONS {
        return Err(config_err("replications", "tail estimation needs at least 100 replications"));
    }
    if replications < 2 {
        return Err(config_err("replications", "at least 2 replications are needed"));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(config_err("t_grid", "must be a nonempty, strictly increasing list of reals >= 0"));
    }
    validate_estimator(&estimator, n)?;
    let fit_range = match (fit_min, fit_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(t_grid[0]), hi.unwrap_or(t_grid[t_grid.len() - 1]))),
    };
    let config = ExperimentConfig { distribution, estimator, n, replications, seed, t_grid };
    let report = run_report(&config, fit_range, cli.threads)?;
    let format: ReportFormat = cli.format.parse()?;
    let rendered = render_report(&report, format)?;

    if tails {
        if cli.out.is_some() {
            match &report.fit {
                Some(f) => println!("L_hat {:?}\nintercept {:?}\nr_squared {:?}", f.l_hat, f.intercept, f.r_squared),
                None => println!("fit unavailable: {}", report.fit_error.as_deref().unwrap_or("")),
            }
        }
        emit(cli, &rendered)?;
    } else {
        println!("{:?}", report.summary.variance_ratio);
        if let Some(out) = &cli.out {
            std::fs::write(out, rendered)?;
        }
    }
    Ok(0)
}

fn kernel_from_config(cfg: &mut FlatConfig, law_mean: f64) -> Result<Kernel> {
    let name = cfg.require("kernel")?;
    let m: usize = cfg.require_parsed("m")?;
    if m == 0 {
        return Err(config_err("m", "kernel order must be at least 1"));
    }
    Ok(match name.as_str() {
        "mean" => Kernel::mean(m),
        "product" => {
            let g = match cfg.get("g").as_deref().unwrap_or("identity") {
                "identity" => ScalarFn::Identity,
                "square" => ScalarFn::Square,
                "abs" => ScalarFn::Abs,
                other => return Err(config_err("g", format!("unknown function {other:?} (identity, square, abs)"))),
            };
            Kernel::product(m, g)
        }
        "shifted_sign" => Kernel::shifted_sign(m, cfg.parsed_or("shift", 0.0)?),
        "centered_product" => Kernel::centered_product(m, cfg.parsed_or("mu", law_mean)?),
        other => {
            return Err(config_err(
                "kernel",
                format!("unknown kernel {other:?} (mean, product, shifted_sign, centered_product)"),
            ))
        }
    })
}

fn decompose(cli: &Cli, cfg: &mut FlatConfig) -> Result<u8> {
    let spec = distribution_from_config(cfg)?;
    let law = spec
        .as_discrete()
        .ok_or_else(|| config_err("dist", "decompose needs a finite-support law (discrete or rademacher)"))?;
    let kernel = kernel_from_config(cfg, law.mean())?;
    let n: usize = cfg.require_parsed("n")?;
    cfg.finish()?;
    if n < kernel.order() {
        return Err(config_err("n", format!("N={n} is below the kernel order {}", kernel.order())));
    }
    let report = Decomposition::new(&kernel, &law)?.report(n)?;
    emit(cli, &to_json(&report)?)?;
    Ok(0)
}

fn breakdown(cli: &Cli, cfg: &mut FlatConfig, base: &Path) -> Result<u8> {
    let m: usize = cfg.require_parsed("m")?;
    let outlier: f64 = cfg.parsed_or("outlier", 1e12)?;
    let sample = match data_path(cfg, base)? {
        Some(path) => {
            let seed = seed(cli, cfg, true)?.unwrap_or_default();
            cfg.finish()?;
            (read_data(&path)?, seed)
        }
        None => {
            let dist = distribution_from_config(cfg)?;
            let n: usize = cfg.require_parsed("n")?;
            let seed = seed(cli, cfg, true)?.unwrap_or_default();
            cfg.finish()?;
            // stream u64::MAX is reserved for the clean sample
            (dist.sample(n, &mut stream(seed, u64::MAX))?, seed)
        }
    };
    let (sample, seed) = sample;
    if m == 0 || m > sample.len() {
        return Err(config_err("m", format!("m must be in 1..={}", sample.len())));
    }
    let scan = breakdown_scan(&sample, m, outlier, seed)?;
    let n = scan.n;
    let observed = scan.rows.iter().find(|r| !r.within_clean_range).map(|r| r.corrupted);
    println!(
        "N={n} m={m}: predicted first unbounded c = {}, observed = {}, asymptotic fraction 1-(1/2)^(1/m) = {:.6}",
        fmt_opt(scan.first_unbounded),
        fmt_opt(observed),
        breakdown_fraction(m)
    );
    for r in &scan.rows {
        println!(
            "c={:<3} estimate={:<24?} clean range [{:?}, {:?}] predicted_bounded={} within={}",
            r.corrupted, r.estimate, r.clean_min, r.clean_max, r.predicted_bounded, r.within_clean_range
        );
    }
    if let Some(out) = &cli.out {
        std::fs::write(out, to_json(&scan)?)?;
    }
    Ok(0)
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or("none".into(), |v| v.to_string())
}

fn selftest(cli: &Cli) -> Result<u8> {
    if let Some(path) = &cli.config {
        FlatConfig::load(path)?.finish()?;
    }
    let report = identity_suite()?;
    for c in &report.checks {
        println!(
            "{} {:<50} cases={:<4} max residual {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.max_residual
        );
    }
    if let Some(out) = &cli.out {
        std::fs::write(out, to_json(&report)?)?;
    }
    Ok(if report.passed { 0 } else { 4 })
}
