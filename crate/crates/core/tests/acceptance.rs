//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Seeds are fixed as 1000 + criterion number.

use std::process::ExitCode;
use std::time::Instant;

use itertools::Itertools;
use umom::devlab::{
    build_report, linspace, render_report, run_experiment, run_report, ExperimentConfig,
    ExperimentReport, ReportFormat,
};
use umom::estimators::breakdown_scan;
use umom::rng::{derive, stream};
use umom::selftest::identity_suite;
use umom::sum::CompensatedSum;
use umom::ustat::{blocked_average, u_statistic_exact, Decomposition, Kernel, ScalarFn};
use umom::{DiscreteFinite, DistributionSpec, EstimatorSpec};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn student_t5() -> DistributionSpec {
    DistributionSpec::student_t(5.0, 0.0, 1.0).unwrap()
}

fn gaussian() -> DistributionSpec {
    DistributionSpec::gaussian(0.0, 1.0).unwrap()
}

/// Experiments run for criteria 3-7, kept for the determinism rerun.
#[derive(Default)]
struct Ledger {
    runs: Vec<(ExperimentConfig, Option<(f64, f64)>, Vec<f64>)>,
}

impl Ledger {
    fn run(&mut self, config: ExperimentConfig, fit: Option<(f64, f64)>) -> ExperimentReport {
        let estimates = run_experiment(&config, Some(1)).unwrap();
        let report = build_report(&config, &estimates, fit).unwrap();
        self.runs.push((config, fit, estimates));
        report
    }
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn c1() -> Outcome {
    let start = Instant::now();
    let report = identity_suite().unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = report.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    let failing: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    outcome(
        report.passed && secs <= 5.0,
        format!(
            "{} identity families, max residual {worst:.2e}, {secs:.2} s{}",
            report.checks.len(),
            if failing.is_empty() { String::new() } else { format!(", failing: {failing:?}") }
        ),
    )
}

fn c2() -> Outcome {
    let xs = [1.5, -0.3, 2.2, 0.7];
    let k = Kernel::product(2, ScalarFn::Identity);
    let u = u_statistic_exact(&xs, &k).unwrap();
    let perms: Vec<Vec<usize>> = (0..4).permutations(4).collect();
    let avg: CompensatedSum = perms.iter().map(|p| blocked_average(&xs, &k, p).unwrap()).sum();
    let err = (avg.value() / perms.len() as f64 - u).abs();
    outcome(perms.len() == 24 && err <= 1e-12, format!("|avg W - U| = {err:.2e} over {} permutations", perms.len()))
}

fn ratio_check(ledger: &mut Ledger, config: ExperimentConfig, lo: f64, hi: f64) -> Outcome {
    let report = ledger.run(config, None);
    let r = report.summary.variance_ratio;
    outcome(in_band(r, lo, hi), format!("variance ratio {r:.4} (band [{lo}, {hi}])"))
}

fn c3(ledger: &mut Ledger) -> Outcome {
    let config = ExperimentConfig {
        distribution: student_t5(),
        estimator: EstimatorSpec::Mom { k: 100, shuffle: false },
        n: 50_000,
        replications: 2000,
        seed: 1003,
        t_grid: linspace(1.0, 8.0, 16),
    };
    ratio_check(ledger, config, 1.40, 1.75)
}

fn c4(ledger: &mut Ledger) -> Outcome {
    let config = ExperimentConfig {
        distribution: student_t5(),
        estimator: EstimatorSpec::IncompleteUmom { m: 200, subsets: 200_000, with_replacement: true },
        n: 20_000,
        replications: 2000,
        seed: 1004,
        t_grid: linspace(1.0, 8.0, 16),
    };
    ratio_check(ledger, config, 0.90, 1.12)
}

fn c5(ledger: &mut Ledger) -> Outcome {
    let config = ExperimentConfig {
        distribution: gaussian(),
        estimator: EstimatorSpec::ExactUmom { m: 2 },
        n: 2000,
        replications: 1000,
        seed: 1005,
        t_grid: linspace(1.0, 8.0, 16),
    };
    ratio_check(ledger, config, 1.00, 1.10)
}

fn fit_check(ledger: &mut Ledger, config: ExperimentConfig, range: (f64, f64), lo: f64, hi: f64) -> (bool, String) {
    let name = config.distribution.name();
    let report = ledger.run(config, Some(range));
    match report.fit {
        Some(f) => (
            in_band(f.l_hat, lo, hi),
            format!("{name}: L_hat {:.4} (A {:.3}, r2 {:.4}, {} points)", f.l_hat, f.prefactor, f.r_squared, f.points_used),
        ),
        None => (false, format!("{name}: fit failed: {}", report.fit_error.unwrap_or_default())),
    }
}

fn c6(ledger: &mut Ledger) -> Outcome {
    let config = ExperimentConfig {
        distribution: student_t5(),
        estimator: EstimatorSpec::Mom { k: 200, shuffle: false },
        n: 20_000,
        replications: 100_000,
        seed: 1006,
        t_grid: linspace(2.0, 8.0, 25),
    };
    let (ok, detail) = fit_check(ledger, config, (2.0, 8.0), 2.5, 4.0);
    outcome(ok, format!("{detail} (band [2.5, 4.0])"))
}

fn c7(ledger: &mut Ledger) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for dist in [gaussian(), student_t5()] {
        let config = ExperimentConfig {
            distribution: dist,
            estimator: EstimatorSpec::IncompleteUmom { m: 40, subsets: 10_000, with_replacement: true },
            n: 2000,
            replications: 20_000,
            seed: 1007,
            t_grid: linspace(1.5, 5.0, 15),
        };
        let (pass, detail) = fit_check(ledger, config, (1.5, 5.0), 1.5, 2.6);
        ok &= pass;
        details.push(detail);
    }
    outcome(ok, format!("{} (band [1.5, 2.6])", details.join("; ")))
}

fn c8() -> Outcome {
    let clean = gaussian().sample(12, &mut stream(1008, u64::MAX)).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for m in [2, 3] {
        let scan = breakdown_scan(&clean, m, 1e12, 1008).unwrap();
        let consistent = scan.consistent(1e6) && scan.first_unbounded.is_some();
        ok &= consistent;
        details.push(format!(
            "m={m}: first unbounded c={} ({})",
            scan.first_unbounded.map_or("none".into(), |c| c.to_string()),
            if consistent { "as predicted" } else { "MISMATCH" }
        ));
    }
    outcome(ok, details.join("; "))
}

fn c9() -> Outcome {
    let law = DiscreteFinite::new(vec![(-1.0, 0.3), (2.0, 0.7)]).unwrap();
    let spec = DistributionSpec::discrete(law.clone()).unwrap();
    let d = Decomposition::new(&Kernel::centered_product(2, law.mean()), &law).unwrap();
    let sampler = spec.sampler();
    let reps = 10_000;
    let mut sds = Vec::new();
    for n in [200usize, 400, 800] {
        let mut buf = Vec::with_capacity(n);
        let terms: Vec<f64> = (0..reps)
            .map(|r| {
                sampler.fill(n, &mut stream(derive(1009, n as u64), r), &mut buf);
                d.hoeffding_term(&buf, 2).unwrap()
            })
            .collect();
        let mean = umom::sum::mean(&terms);
        let ss: CompensatedSum = terms.iter().map(|t| (t - mean) * (t - mean)).sum();
        sds.push((ss.value() / (reps as f64 - 1.0)).sqrt());
    }
    let ratios = [sds[1] / sds[0], sds[2] / sds[1]];
    let ok = ratios.iter().all(|r| in_band(*r, 0.5 * 0.8, 0.5 * 1.2));
    outcome(ok, format!("sd ratios on doubling N: {:.4}, {:.4} (target 0.5 +- 20%)", ratios[0], ratios[1]))
}

fn c10(ledger: &Ledger) -> Outcome {
    let mut mismatches = Vec::new();
    for (config, fit, estimates) in &ledger.runs {
        // the heaviest run is compared on a replication prefix
        let config = if matches!(config.estimator, EstimatorSpec::IncompleteUmom { m: 200, .. }) {
            ExperimentConfig { replications: 200, ..config.clone() }
        } else {
            config.clone()
        };
        let first = build_report(&config, &estimates[..config.replications], *fit).unwrap();
        let rerun = run_report(&config, *fit, Some(8)).unwrap();
        for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata] {
            if render_report(&first, format).unwrap() != render_report(&rerun, format).unwrap() {
                mismatches.push(format!("{} {} {format}", config.estimator.name(), config.seed));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{} experiments rerun with 8 threads; mismatches: {mismatches:?}", ledger.runs.len()),
    )
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut all = true;
    let mut report = |index: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.passed;
        println!(
            "criterion {index:>2} {} {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "exact-identity suite", &mut c1);
    report(2, "average of blocked kernels over permutations", &mut c2);
    report(3, "MOM limiting variance (target pi/2)", &mut || c3(&mut ledger));
    report(4, "incomplete U-MOM variance (target 1)", &mut || c4(&mut ledger));
    report(5, "Hodges-Lehmann variance (target pi/3)", &mut || c5(&mut ledger));
    report(6, "MOM tail constant (target pi)", &mut || c6(&mut ledger));
    report(7, "incomplete U-MOM tail constant (target 2)", &mut || c7(&mut ledger));
    report(8, "finite-sample breakdown", &mut c8);
    report(9, "degenerate-component scaling", &mut c9);
    report(10, "determinism across thread counts", &mut || c10(&ledger));
    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria FAILED");
        ExitCode::FAILURE
    }
}
