//! Seeded Monte Carlo experiments on estimator deviations.
//!
//! Replication `r` draws its sample and any estimator randomness from
//! `rng::stream(seed, r)`, so results do not depend on scheduling or on the
//! number of worker threads.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{feller_g, DistributionSpec, FELLER_BUDGET};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::rng;
use crate::sum::CompensatedSum;

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Fewest exceedances for a tail point to enter the fit.
pub const MIN_TAIL_COUNT: f64 = 20.0;

/// Minimum replications for tail estimation.
pub const MIN_TAIL_REPLICATIONS: usize = 100;

/// 16 equally spaced points in `[1, 8]`.
pub fn default_t_grid() -> Vec<f64> {
    linspace(1.0, 8.0, 16)
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub estimator: EstimatorSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be positive"));
        }
        check_grid(&self.t_grid)?;
        self.estimator.validate(self.n)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("t_grid must not be empty"));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid("t_grid values must be finite and >= 0"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("t_grid must be strictly increasing"));
    }
    Ok(())
}

/// One estimate per replication, in replication order.
///
/// `threads` selects a dedicated pool size; `None` uses the global pool.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<f64>> {
    config.validate()?;
    let sampler = config.distribution.sampler();
    let work = || -> Vec<Result<f64>> {
        (0..config.replications as u64)
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(config.n),
                |buf, r| {
                    let mut rng = rng::stream(config.seed, r);
                    sampler.fill(config.n, &mut rng, buf);
                    config
                        .estimator
                        .estimate(buf, &mut rng)
                        .map_err(|e| Error::Replication { index: r, source: Box::new(e) })
                },
            )
            .collect()
    };
    let results = match threads {
        None => work(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?
            .install(work),
    };
    results.into_iter().collect()
}

/// Two-sided score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub t: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub wilson_lo: Vec<f64>,
    pub wilson_hi: Vec<f64>,
    pub replications: usize,
}

impl TailCurve {
    /// Builds a curve from exceedance counts.
    pub fn from_counts(t: Vec<f64>, counts: &[usize], replications: usize) -> Result<Self> {
        if t.len() != counts.len() {
            return Err(Error::invalid("t and counts differ in length"));
        }
        if replications == 0 || counts.iter().any(|&c| c > replications) {
            return Err(Error::invalid("counts must lie in 0..=replications"));
        }
        let p_hat = counts.iter().map(|&c| c as f64 / replications as f64).collect();
        let (wilson_lo, wilson_hi) = counts.iter().map(|&c| wilson_interval(c, replications)).unzip();
        Ok(Self { t, p_hat, wilson_lo, wilson_hi, replications })
    }

    /// Builds a curve from probabilities, as if observed over `replications`
    /// trials; counts are not rounded.
    pub fn from_probabilities(t: Vec<f64>, p: &[f64], replications: usize) -> Result<Self> {
        if t.len() != p.len() || replications == 0 {
            return Err(Error::invalid("t and p differ in length or replications is 0"));
        }
        let n = replications as f64;
        let z2 = Z_95 * Z_95;
        let mut lo = Vec::with_capacity(p.len());
        let mut hi = Vec::with_capacity(p.len());
        for &q in p {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::invalid(format!("probability {q} outside [0, 1]")));
            }
            let denom = 1.0 + z2 / n;
            let center = (q + z2 / (2.0 * n)) / denom;
            let half = Z_95 / denom * (q * (1.0 - q) / n + z2 / (4.0 * n * n)).sqrt();
            lo.push((center - half).clamp(0.0, q));
            hi.push((center + half).clamp(q, 1.0));
        }
        Ok(Self { t, p_hat: p.to_vec(), wilson_lo: lo, wilson_hi: hi, replications })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Empirical `P(sqrt(N) |mu_hat - mu| >= sigma sqrt(t))` on `t_grid`.
pub fn tail_curve(estimates: &[f64], mu: f64, sigma: f64, n: usize, t_grid: &[f64]) -> Result<TailCurve> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_grid(t_grid)?;
    let root_n = (n as f64).sqrt();
    let mut dev: Vec<f64> = estimates.iter().map(|e| root_n * (e - mu).abs()).collect();
    dev.sort_unstable_by(f64::total_cmp);
    let counts: Vec<usize> = t_grid
        .iter()
        .map(|&t| {
            let threshold = sigma * t.sqrt();
            dev.len() - dev.partition_point(|&d| d < threshold)
        })
        .collect();
    TailCurve::from_counts(t_grid.to_vec(), &counts, estimates.len())
}

/// Fit of `p(t) = A exp(-t / L)` to a tail curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubGaussianFit {
    #[serde(rename = "L_hat")]
    pub l_hat: f64,
    /// Intercept of `-ln p` against `t`, i.e. `-ln A`.
    pub intercept: f64,
    /// `A = exp(-intercept)`.
    pub prefactor: f64,
    pub r_squared: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points_used: usize,
}

/// Weighted least squares of `-ln p_hat` on `t` over `[t_min, t_max]`.
///
/// Only points with `p_hat * replications >= 20` are used. Each point is
/// weighted by the inverse square of its Wilson half-width on the log scale.
pub fn fit_subgaussian_constant(curve: &TailCurve, t_min: f64, t_max: f64) -> Result<SubGaussianFit> {
    let reps = curve.replications as f64;
    let mut pts = Vec::new();
    for i in 0..curve.len() {
        let (t, p) = (curve.t[i], curve.p_hat[i]);
        if t < t_min || t > t_max || p * reps < MIN_TAIL_COUNT {
            continue;
        }
        let half = 0.5 * (curve.wilson_hi[i].ln() - curve.wilson_lo[i].ln());
        if !(half > 0.0) || !half.is_finite() {
            continue;
        }
        pts.push((t, -p.ln(), 1.0 / (half * half)));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { found: pts.len(), needed: 3 });
    }
    let sw: CompensatedSum = pts.iter().map(|p| p.2).sum();
    let sw = sw.value();
    let wmean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        pts.iter().map(|p| p.2 * f(p)).sum::<CompensatedSum>().value() / sw
    };
    let tbar = wmean(&|p| p.0);
    let ybar = wmean(&|p| p.1);
    let stt = wmean(&|p| (p.0 - tbar) * (p.0 - tbar));
    let sty = wmean(&|p| (p.0 - tbar) * (p.1 - ybar));
    let syy = wmean(&|p| (p.1 - ybar) * (p.1 - ybar));
    let slope = sty / stt;
    if !(slope > 0.0) {
        return Err(Error::NonpositiveSlope(slope));
    }
    let intercept = ybar - slope * tbar;
    let sse = wmean(&|p| {
        let r = p.1 - intercept - slope * p.0;
        r * r
    });
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SubGaussianFit {
        l_hat: 1.0 / slope,
        intercept,
        prefactor: (-intercept).exp(),
        r_squared,
        t_min,
        t_max,
        points_used: pts.len(),
    })
}

/// `N mean((mu_hat - mu)^2) / sigma^2`, centered on the true mean.
pub fn variance_ratio(estimates: &[f64], mu: f64, sigma: f64, n: usize) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::invalid("variance_ratio needs at least 2 estimates"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(n as f64 * mean_squared_error(estimates, mu) / (sigma * sigma))
}

pub fn mean_squared_error(estimates: &[f64], mu: f64) -> f64 {
    let acc: CompensatedSum = estimates.iter().map(|e| (e - mu) * (e - mu)).sum();
    acc.value() / estimates.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: f64,
    pub sd: f64,
    pub mse: f64,
    pub variance_ratio: f64,
}

impl EstimateSummary {
    pub fn new(estimates: &[f64], mu: f64, sigma: f64, n: usize) -> Result<Self> {
        let mean = crate::sum::mean(estimates);
        let ss: CompensatedSum = estimates.iter().map(|e| (e - mean) * (e - mean)).sum();
        Ok(Self {
            mean,
            sd: (ss.value() / (estimates.len() as f64 - 1.0)).sqrt(),
            mse: mean_squared_error(estimates, mu),
            variance_ratio: variance_ratio(estimates, mu, sigma, n)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summary: EstimateSummary,
    pub tail_curve: TailCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<SubGaussianFit>,
    /// Why the fit is absent, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    /// `k g(N/k)^2` with `k` blocks (MOM) or `k = floor(N/m)` (U-MOM variants).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feller_diagnostic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
    pub version: String,
}

/// Block count used for the Feller diagnostic.
fn diagnostic_blocks(estimator: &EstimatorSpec, n: usize) -> Option<usize> {
    match *estimator {
        EstimatorSpec::SampleMean => None,
        EstimatorSpec::Mom { k, .. } => Some(k),
        EstimatorSpec::ExactUmom { m }
        | EstimatorSpec::HodgesLehmann { m }
        | EstimatorSpec::IncompleteUmom { m, .. } => Some(n / m),
    }
}

/// Runs the experiment and assembles the report. The fit range defaults to
/// the full grid; a failed fit is recorded in `fit_error`.
pub fn run_report(
    config: &ExperimentConfig,
    fit_range: Option<(f64, f64)>,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let estimates = run_experiment(config, threads)?;
    build_report(config, &estimates, fit_range)
}

pub fn build_report(
    config: &ExperimentConfig,
    estimates: &[f64],
    fit_range: Option<(f64, f64)>,
) -> Result<ExperimentReport> {
    let (mu, sigma) = (config.distribution.mean(), config.distribution.sd());
    let summary = EstimateSummary::new(estimates, mu, sigma, config.n)?;
    let tail = tail_curve(estimates, mu, sigma, config.n, &config.t_grid)?;
    let (t_min, t_max) = fit_range.unwrap_or((config.t_grid[0], config.t_grid[config.t_grid.len() - 1]));
    let (fit, fit_error) = match fit_subgaussian_constant(&tail, t_min, t_max) {
        Ok(f) => (Some(f), None),
        Err(e @ (Error::InsufficientPoints { .. } | Error::NonpositiveSlope(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let feller_diagnostic = match diagnostic_blocks(&config.estimator, config.n) {
        Some(k) if k >= 1 && config.n / k >= 1 => {
            let mut rng = rng::stream(config.seed, u64::MAX);
            let g = feller_g(&config.distribution, config.n / k, FELLER_BUDGET, &mut rng)?;
            Some(k as f64 * g * g)
        }
        _ => None,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        summary,
        tail_curve: tail,
        fit,
        fit_error,
        feller_diagnostic,
        wall_clock_seconds: None,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Plotdata,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(Error::invalid(format!("unknown format {other:?} (json, csv, plotdata)"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Plotdata => "plotdata",
        })
    }
}

/// CSV with header `t,p_hat,wilson_lo,wilson_hi`.
pub fn tail_csv(curve: &TailCurve) -> String {
    let mut out = String::from("t,p_hat,wilson_lo,wilson_hi\n");
    for i in 0..curve.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            curve.t[i], curve.p_hat[i], curve.wilson_lo[i], curve.wilson_hi[i]
        ));
    }
    out
}

/// Lines of `t -ln(p_hat)`; points with `p_hat = 0` are omitted.
pub fn tail_plotdata(curve: &TailCurve) -> String {
    let mut out = String::new();
    for (t, p) in curve.t.iter().zip(&curve.p_hat) {
        if *p > 0.0 {
            // + 0.0 turns -0 into 0
            out.push_str(&format!("{} {}\n", t, -p.ln() + 0.0));
        }
    }
    out
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        ReportFormat::Csv => tail_csv(&report.tail_curve),
        ReportFormat::Plotdata => tail_plotdata(&report.tail_curve),
    })
}

pub fn export_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    fs::write(path, render_report(report, format)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
