//! Exact-identity suite over small finite laws.
//!
//! Every built-in kernel is decomposed for orders `m = 2..=4` under 2-, 3-
//! and 4-atom laws and sample sizes `N = 6..=12`, and each identity of the
//! Hoeffding decomposition is checked against an absolute tolerance.

use serde::{Deserialize, Serialize};

use crate::distributions::DiscreteFinite;
use crate::error::Result;
use crate::ustat::{hajek_gap_bound, u_variance_brute, Decomposition, Kernel, ScalarFn};

pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    /// Description of the worst case.
    pub worst_case: String,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

struct Tally {
    name: &'static str,
    cases: usize,
    worst: f64,
    worst_case: String,
    tolerance: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            cases: 0,
            worst: 0.0,
            worst_case: String::new(),
            tolerance,
        }
    }

    fn record(&mut self, residual: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        // NaN counts as a failure
        if !(residual <= self.worst) {
            self.worst = residual;
            self.worst_case = case();
        }
    }

    fn finish(self) -> IdentityCheck {
        IdentityCheck {
            name: self.name.to_string(),
            cases: self.cases,
            max_residual: self.worst,
            worst_case: self.worst_case,
            tolerance: self.tolerance,
            passed: self.worst <= self.tolerance,
        }
    }
}

/// The laws used by the suite.
pub fn suite_laws() -> Vec<DiscreteFinite> {
    let atoms: [&[(f64, f64)]; 3] = [
        &[(-1.0, 0.3), (2.0, 0.7)],
        &[(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)],
        &[(-1.5, 0.1), (-0.5, 0.4), (1.0, 0.3), (2.0, 0.2)],
    ];
    atoms
        .iter()
        .map(|a| DiscreteFinite::new(a.to_vec()).expect("suite law is valid"))
        .collect()
}

/// The built-in kernels of order `m`, parameterized for `law`.
pub fn suite_kernels(m: usize, law: &DiscreteFinite) -> Vec<Kernel> {
    vec![
        Kernel::mean(m),
        Kernel::product(m, ScalarFn::Identity),
        Kernel::shifted_sign(m, 0.25),
        Kernel::centered_product(m, law.mean()),
    ]
}

pub fn identity_suite() -> Result<SelfTestReport> {
    let tol = IDENTITY_TOLERANCE;
    let mut variance = Tally::new("kernel variance = sum_j C(m,j) delta_j^2", tol);
    let mut brute = Tally::new("Var U: decomposition vs exhaustive enumeration", tol);
    let mut orthogonality = Tally::new("orthogonality of projections", tol);
    let mut reconstruction = Tally::new("h - Eh = sum of projections", tol);
    let mut gap = Tally::new("var_gap = var_u - var_s", tol);
    let mut bound = Tally::new("Var(U - S) <= hajek_gap_bound (excess)", tol);

    for law in suite_laws() {
        for m in 2..=4 {
            for kernel in suite_kernels(m, &law) {
                let d = Decomposition::new(&kernel, &law)?;
                let label = |n: Option<usize>| {
                    let n = n.map(|n| format!(" N={n}")).unwrap_or_default();
                    format!("{} m={m} atoms={}{n}", kernel.name(), law.len())
                };
                let (orth, recon) = d.orthogonality_and_reconstruction();
                orthogonality.record(orth, || label(None));
                reconstruction.record(recon, || label(None));
                for n in 6..=12 {
                    let report = d.report(n)?;
                    variance.record(report.variance_identity_residual(), || label(Some(n)));
                    gap.record(report.gap_identity_residual(), || label(Some(n)));
                    let limit = hajek_gap_bound(report.var_h, n, m)?;
                    bound.record((report.var_gap - limit).max(0.0), || label(Some(n)));
                    let exhaustive = u_variance_brute(&kernel, &law, n)?;
                    brute.record((exhaustive - report.var_u).abs(), || label(Some(n)));
                }
            }
        }
    }
    let checks: Vec<IdentityCheck> = [variance, brute, orthogonality, reconstruction, gap, bound]
        .into_iter()
        .map(Tally::finish)
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfTestReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_residual_fails() {
        let mut t = Tally::new("x", 1.0);
        t.record(0.5, || "a".into());
        t.record(f64::NAN, || "b".into());
        let c = t.finish();
        assert!(!c.passed);
        assert_eq!(c.worst_case, "b");
    }

    #[test]
    fn laws_have_two_to_four_atoms() {
        let sizes: Vec<usize> = suite_laws().iter().map(DiscreteFinite::len).collect();
        assert_eq!(sizes, vec![2, 3, 4]);
    }
}
