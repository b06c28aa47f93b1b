//! Exact U-statistics and Hoeffding decompositions over finite-support laws.
//!
//! For a symmetric kernel `h` of order `m` and a law `P` with finitely many
//! atoms, [`Decomposition`] tabulates the conditional expectations
//! `E h(y_1, .., y_i, Y_{i+1}, .., Y_m)` on every atom tuple. The projections
//! `pi_j h` follow by inclusion–exclusion over these tables, so every
//! projection, variance and identity below is an exact finite sum.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{discrete_expectation, DiscreteFinite, EXPECTATION_CAP};
use crate::error::{Error, Result};
use crate::subsets::{binomial, binomial_f64, check_cap, next_lex, SUBSET_CAP};
use crate::sum::CompensatedSum;

/// Scalar factor of a [`KernelKind::Product`] kernel.
#[derive(Clone)]
pub enum ScalarFn {
    Identity,
    Square,
    Abs,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ScalarFn {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity => x,
            ScalarFn::Square => x * x,
            ScalarFn::Abs => x.abs(),
            ScalarFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Identity => write!(f, "Identity"),
            ScalarFn::Square => write!(f, "Square"),
            ScalarFn::Abs => write!(f, "Abs"),
            ScalarFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelKind {
    /// Average of the arguments.
    Mean,
    /// Product of `g(x_i)`.
    Product(ScalarFn),
    /// `sign(sqrt(m) (mean(args) - shift))` with `sign(0) = +1`.
    ShiftedSign { shift: f64 },
    /// Product of `(x_i - mu)`; completely degenerate when `mu` is the mean.
    CenteredProduct { mu: f64 },
    Constant(f64),
    /// Caller-supplied function; must be symmetric in its arguments.
    Custom { name: String, f: KernelFn },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Mean => write!(f, "Mean"),
            KernelKind::Product(g) => write!(f, "Product({g:?})"),
            KernelKind::ShiftedSign { shift } => write!(f, "ShiftedSign {{ shift: {shift} }}"),
            KernelKind::CenteredProduct { mu } => write!(f, "CenteredProduct {{ mu: {mu} }}"),
            KernelKind::Constant(c) => write!(f, "Constant({c})"),
            KernelKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A permutation-symmetric function of `order` real arguments.
#[derive(Clone, Debug)]
pub struct Kernel {
    order: usize,
    kind: KernelKind,
    sup_norm: Option<f64>,
}

impl Kernel {
    fn build(order: usize, kind: KernelKind, sup_norm: Option<f64>) -> Self {
        assert!(order >= 1, "kernel order must be at least 1");
        Self {
            order,
            kind,
            sup_norm,
        }
    }

    pub fn mean(order: usize) -> Self {
        Self::build(order, KernelKind::Mean, None)
    }

    pub fn product(order: usize, g: ScalarFn) -> Self {
        Self::build(order, KernelKind::Product(g), None)
    }

    pub fn shifted_sign(order: usize, shift: f64) -> Self {
        Self::build(order, KernelKind::ShiftedSign { shift }, Some(1.0))
    }

    pub fn centered_product(order: usize, mu: f64) -> Self {
        Self::build(order, KernelKind::CenteredProduct { mu }, None)
    }

    pub fn constant(order: usize, c: f64) -> Self {
        Self::build(order, KernelKind::Constant(c), Some(c.abs()))
    }

    pub fn custom(
        order: usize,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        sup_norm: Option<f64>,
    ) -> Self {
        Self::build(
            order,
            KernelKind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            sup_norm,
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// Declared `sup |h|`, when known.
    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn name(&self) -> String {
        match &self.kind {
            KernelKind::Mean => "mean".into(),
            KernelKind::Product(_) => "product".into(),
            KernelKind::ShiftedSign { .. } => "shifted_sign".into(),
            KernelKind::CenteredProduct { .. } => "centered_product".into(),
            KernelKind::Constant(_) => "constant".into(),
            KernelKind::Custom { name, .. } => name.clone(),
        }
    }

    /// Evaluates the kernel. Panics if `args.len() != order`.
    pub fn eval(&self, args: &[f64]) -> f64 {
        let mut scratch = Vec::with_capacity(args.len());
        self.eval_with(args, &mut scratch)
    }

    /// As [`Kernel::eval`], reusing `scratch`.
    ///
    /// Built-in kernels reduce their arguments in sorted order so that the
    /// value is bit-for-bit independent of argument order.
    pub fn eval_with(&self, args: &[f64], scratch: &mut Vec<f64>) -> f64 {
        assert_eq!(args.len(), self.order, "kernel of order {} got {} arguments", self.order, args.len());
        let sorted = |scratch: &mut Vec<f64>| {
            scratch.clear();
            scratch.extend_from_slice(args);
            scratch.sort_unstable_by(f64::total_cmp);
        };
        match &self.kind {
            KernelKind::Mean => {
                sorted(scratch);
                scratch.iter().sum::<CompensatedSum>().value() / self.order as f64
            }
            KernelKind::Product(g) => {
                scratch.clear();
                scratch.extend(args.iter().map(|&x| g.apply(x)));
                scratch.sort_unstable_by(f64::total_cmp);
                scratch.iter().product()
            }
            KernelKind::ShiftedSign { shift } => {
                sorted(scratch);
                let mean = scratch.iter().sum::<CompensatedSum>().value() / self.order as f64;
                if (self.order as f64).sqrt() * (mean - shift) >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            KernelKind::CenteredProduct { mu } => {
                scratch.clear();
                scratch.extend(args.iter().map(|&x| x - mu));
                scratch.sort_unstable_by(f64::total_cmp);
                scratch.iter().product()
            }
            KernelKind::Constant(c) => *c,
            KernelKind::Custom { f, .. } => f(args),
        }
    }
}

/// Exact U-statistic: the average of `kernel` over all `C(N, m)` subsets.
pub fn u_statistic_exact(sample: &[f64], kernel: &Kernel) -> Result<f64> {
    u_statistic_exact_capped(sample, kernel, SUBSET_CAP)
}

pub fn u_statistic_exact_capped(sample: &[f64], kernel: &Kernel, cap: u128) -> Result<f64> {
    let n = sample.len();
    let m = kernel.order();
    if m > n {
        return Err(Error::invalid(format!("kernel order {m} exceeds sample size {n}")));
    }
    let count = check_cap(n, m, cap)?;
    let mut idx: Vec<usize> = (0..m).collect();
    let mut args = vec![0.0; m];
    let mut scratch = Vec::with_capacity(m);
    let mut acc = CompensatedSum::new();
    loop {
        for (a, &i) in args.iter_mut().zip(&idx) {
            *a = sample[i];
        }
        acc.add(kernel.eval_with(&args, &mut scratch));
        if !next_lex(&mut idx, n) {
            break;
        }
    }
    Ok(acc.value() / count as f64)
}

/// `(pi_j h)(points)` by inclusion–exclusion, each expectation over
/// `P^{m - |I|}` evaluated by [`discrete_expectation`].
///
/// The points need not be atoms of `law`; the formula is evaluated as is.
pub fn hoeffding_projection(
    kernel: &Kernel,
    law: &DiscreteFinite,
    j: usize,
    points: &[f64],
) -> Result<f64> {
    let m = kernel.order();
    if j == 0 || j > m {
        return Err(Error::invalid(format!("projection order j={j} must be in 1..={m}")));
    }
    if points.len() != j {
        return Err(Error::invalid(format!("expected {j} points, got {}", points.len())));
    }
    let mut acc = CompensatedSum::new();
    for mask in 0u32..(1 << j) {
        let fixed: Vec<f64> = (0..j).filter(|b| mask >> b & 1 == 1).map(|b| points[b]).collect();
        let free = m - fixed.len();
        let e = discrete_expectation(
            law,
            |ys| {
                let mut args = fixed.clone();
                args.extend_from_slice(ys);
                kernel.eval(&args)
            },
            free,
        )?;
        let sign = if (j - fixed.len()) % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * e);
    }
    Ok(acc.value())
}

/// Variances of the Hoeffding decomposition of `U_{N,m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// `delta_j^2` for `j = 1..=m`.
    pub delta_sq: Vec<f64>,
    pub var_h: f64,
    pub var_u: f64,
    pub var_s: f64,
    pub var_gap: f64,
    pub orthogonality_residual: f64,
}

impl DecompositionReport {
    /// `|var_h - sum_j C(m,j) delta_j^2|`.
    pub fn variance_identity_residual(&self) -> f64 {
        let total: CompensatedSum = self
            .delta_sq
            .iter()
            .enumerate()
            .map(|(i, d)| binomial_f64(self.m as u64, i as u64 + 1) * d)
            .sum();
        (self.var_h - total.value()).abs()
    }

    /// `|var_gap - (var_u - var_s)|`.
    pub fn gap_identity_residual(&self) -> f64 {
        (self.var_gap - (self.var_u - self.var_s)).abs()
    }
}

/// Precomputed conditional-expectation and projection tables of a kernel
/// under a finite law.
#[derive(Clone, Debug)]
pub struct Decomposition {
    kernel: Kernel,
    law: DiscreteFinite,
    // cond[i][idx]: E h(y_idx, Y_{i+1..m}), idx in base-s digits
    cond: Vec<Vec<f64>>,
    // proj[j][idx]: (pi_j h)(y_idx)
    proj: Vec<Vec<f64>>,
}

impl Decomposition {
    pub fn new(kernel: &Kernel, law: &DiscreteFinite) -> Result<Self> {
        let m = kernel.order();
        let s = law.len();
        let required = (s as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if required > EXPECTATION_CAP {
            return Err(Error::CapExceeded {
                required,
                cap: EXPECTATION_CAP,
            });
        }
        let values = law.values();
        let probs = law.probs();

        let mut top = Vec::with_capacity(s.pow(m as u32));
        let mut digits = vec![0usize; m];
        let mut args = vec![0.0; m];
        let mut scratch = Vec::with_capacity(m);
        for idx in 0..s.pow(m as u32) {
            digits_of(idx, s, &mut digits);
            for (a, &d) in args.iter_mut().zip(&digits) {
                *a = values[d];
            }
            top.push(kernel.eval_with(&args, &mut scratch));
        }
        let mut cond = vec![Vec::new(); m + 1];
        cond[m] = top;
        for i in (0..m).rev() {
            let above = &cond[i + 1];
            let level: Vec<f64> = (0..s.pow(i as u32))
                .map(|idx| {
                    (0..s)
                        .map(|a| probs[a] * above[idx * s + a])
                        .sum::<CompensatedSum>()
                        .value()
                })
                .collect();
            cond[i] = level;
        }

        let mut proj = vec![Vec::new(); m + 1];
        for (j, table) in proj.iter_mut().enumerate().skip(1) {
            let size = s.pow(j as u32);
            table.reserve(size);
            for idx in 0..size {
                digits_of(idx, s, &mut digits[..j]);
                let mut acc = CompensatedSum::new();
                for mask in 0u32..(1 << j) {
                    let mut sub = 0usize;
                    let mut len = 0usize;
                    for (b, &d) in digits[..j].iter().enumerate() {
                        if mask >> b & 1 == 1 {
                            sub = sub * s + d;
                            len += 1;
                        }
                    }
                    let sign = if (j - len) % 2 == 0 { 1.0 } else { -1.0 };
                    acc.add(sign * cond[len][sub]);
                }
                table.push(acc.value());
            }
        }
        Ok(Self {
            kernel: kernel.clone(),
            law: law.clone(),
            cond,
            proj,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn law(&self) -> &DiscreteFinite {
        &self.law
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    /// `E h(Y_1, .., Y_m)`.
    pub fn kernel_mean(&self) -> f64 {
        self.cond[0][0]
    }

    /// `(pi_j h)` at atom indices.
    pub fn projection_at(&self, j: usize, atoms: &[usize]) -> f64 {
        let s = self.law.len();
        let idx = atoms.iter().fold(0, |acc, &a| acc * s + a);
        self.proj[j][idx]
    }

    /// `(pi_j h)(points)` for points in the support of the law.
    pub fn projection(&self, j: usize, points: &[f64]) -> Result<f64> {
        self.check_j(j, 1)?;
        if points.len() != j {
            return Err(Error::invalid(format!("expected {j} points, got {}", points.len())));
        }
        let atoms = self.law.indices_of(points)?;
        Ok(self.projection_at(j, &atoms))
    }

    fn check_j(&self, j: usize, min: usize) -> Result<()> {
        let m = self.order();
        if j < min || j > m {
            return Err(Error::invalid(format!("projection order j={j} must be in {min}..={m}")));
        }
        Ok(())
    }

    fn tuple_weight(&self, idx: usize, len: usize) -> f64 {
        let s = self.law.len();
        let probs = self.law.probs();
        let mut w = 1.0;
        let mut rest = idx;
        for _ in 0..len {
            w *= probs[rest % s];
            rest /= s;
        }
        w
    }

    /// `delta_j^2 = Var (pi_j h)(Y_1, .., Y_j)` for `j = 1..=m`.
    pub fn delta_sq(&self) -> Vec<f64> {
        (1..=self.order())
            .map(|j| {
                let table = &self.proj[j];
                let mut first = CompensatedSum::new();
                let mut second = CompensatedSum::new();
                for (idx, &v) in table.iter().enumerate() {
                    let w = self.tuple_weight(idx, j);
                    first.add(w * v);
                    second.add(w * v * v);
                }
                second.value() - first.value() * first.value()
            })
            .collect()
    }

    /// `Var h(Y_1, .., Y_m)` computed directly from kernel values.
    pub fn kernel_variance(&self) -> f64 {
        let m = self.order();
        let mean = self.kernel_mean();
        self.cond[m]
            .iter()
            .enumerate()
            .map(|(idx, &h)| self.tuple_weight(idx, m) * (h - mean) * (h - mean))
            .sum::<CompensatedSum>()
            .value()
    }

    /// Largest `|E[pi h(Y_J) pi h(Y_J')]|` over distinct nonempty `J, J'`,
    /// and largest pointwise error of `h - E h = sum_J pi h(y_J)`.
    pub fn orthogonality_and_reconstruction(&self) -> (f64, f64) {
        let m = self.order();
        let s = self.law.len();
        let masks = (1usize << m) - 1;
        let mut cross = vec![CompensatedSum::new(); masks * masks];
        let mut terms = vec![0.0; masks];
        let mut digits = vec![0usize; m];
        let mut reconstruction: f64 = 0.0;
        let mean = self.kernel_mean();
        for idx in 0..s.pow(m as u32) {
            digits_of(idx, s, &mut digits);
            let w = self.tuple_weight(idx, m);
            let mut total = CompensatedSum::new();
            for mask in 1..=masks {
                let mut sub = 0usize;
                let mut len = 0usize;
                for (b, &d) in digits.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        sub = sub * s + d;
                        len += 1;
                    }
                }
                let v = self.proj[len][sub];
                terms[mask - 1] = v;
                total.add(v);
            }
            let h = self.cond[m][idx];
            reconstruction = reconstruction.max((h - mean - total.value()).abs());
            for a in 0..masks {
                for b in a + 1..masks {
                    cross[a * masks + b].add(w * terms[a] * terms[b]);
                }
            }
        }
        let orthogonality = cross.iter().map(|c| c.value().abs()).fold(0.0, f64::max);
        (orthogonality, reconstruction)
    }

    /// Full variance report for sample size `n >= m`.
    pub fn report(&self, n: usize) -> Result<DecompositionReport> {
        let m = self.order();
        if n < m {
            return Err(Error::invalid(format!("sample size N={n} is below kernel order m={m}")));
        }
        let delta_sq = self.delta_sq();
        let coef = |j: usize| {
            let c = binomial_f64(m as u64, j as u64);
            c * c / binomial_f64(n as u64, j as u64)
        };
        let var_u: CompensatedSum = delta_sq.iter().enumerate().map(|(i, d)| coef(i + 1) * d).sum();
        let var_gap: CompensatedSum = delta_sq
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, d)| coef(i + 1) * d)
            .sum();
        let var_s = (m * m) as f64 * delta_sq[0] / n as f64;
        let (orthogonality_residual, _) = self.orthogonality_and_reconstruction();
        Ok(DecompositionReport {
            m,
            n,
            var_h: self.kernel_variance(),
            var_u: var_u.value(),
            var_s,
            var_gap: var_gap.value(),
            orthogonality_residual,
            delta_sq,
        })
    }

    /// `S_{N,m} = (m/N) sum_i h^{(1)}(X_i)` with `h^{(1)}` the centered first projection.
    pub fn hajek(&self, sample: &[f64]) -> Result<f64> {
        if sample.is_empty() {
            return Err(Error::EmptyInput);
        }
        let atoms = self.law.indices_of(sample)?;
        let acc: CompensatedSum = atoms.iter().map(|&a| self.proj[1][a]).sum();
        Ok(self.order() as f64 / sample.len() as f64 * acc.value())
    }

    /// `sum_{|J| = j} (pi_j h)(X_J)` over all `j`-subsets of the sample.
    ///
    /// Computed from atom counts: a multiset of atoms with multiplicities
    /// `c_a` is realized by `prod_a C(n_a, c_a)` index subsets.
    pub fn degenerate_sum(&self, sample: &[f64], j: usize) -> Result<f64> {
        self.check_j(j, 1)?;
        if j > sample.len() {
            return Err(Error::invalid(format!("j={j} exceeds sample size {}", sample.len())));
        }
        let s = self.law.len();
        let mut counts = vec![0u64; s];
        for a in self.law.indices_of(sample)? {
            counts[a] += 1;
        }
        let mut tuple = vec![0usize; j];
        let mut acc = CompensatedSum::new();
        loop {
            let mut weight = 1.0;
            let mut start = 0;
            while start < j {
                let a = tuple[start];
                let mut end = start;
                while end < j && tuple[end] == a {
                    end += 1;
                }
                weight *= binomial_f64(counts[a], (end - start) as u64);
                start = end;
            }
            if weight != 0.0 {
                acc.add(weight * self.projection_at(j, &tuple));
            }
            // next nondecreasing tuple
            let mut pos = j;
            loop {
                if pos == 0 {
                    return Ok(acc.value());
                }
                pos -= 1;
                if tuple[pos] + 1 < s {
                    let v = tuple[pos] + 1;
                    for t in &mut tuple[pos..] {
                        *t = v;
                    }
                    break;
                }
            }
        }
    }

    /// `V_{N,j} = (C(m,j)/C(N,j))^{1/2} sum_{|J| = j} (pi_j h)(X_J)`.
    pub fn realize(&self, sample: &[f64], j: usize) -> Result<f64> {
        let total = self.degenerate_sum(sample, j)?;
        let n = sample.len() as u64;
        let scale = (binomial_f64(self.order() as u64, j as u64) / binomial_f64(n, j as u64)).sqrt();
        Ok(scale * total)
    }

    /// The `j`-th term `C(m,j) U^{(j)}_{N,m}` of the decomposition of `U_{N,m}`.
    pub fn hoeffding_term(&self, sample: &[f64], j: usize) -> Result<f64> {
        let total = self.degenerate_sum(sample, j)?;
        let n = sample.len() as u64;
        Ok(binomial_f64(self.order() as u64, j as u64) / binomial_f64(n, j as u64) * total)
    }
}

fn digits_of(mut idx: usize, s: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = idx % s;
        idx /= s;
    }
}

/// Exact decomposition report; see [`Decomposition::report`].
pub fn decomposition_report(
    kernel: &Kernel,
    law: &DiscreteFinite,
    n: usize,
) -> Result<DecompositionReport> {
    Decomposition::new(kernel, law)?.report(n)
}

/// Hájek projection `S_{N,m}` of the U-statistic of `sample`.
pub fn hajek_statistic(sample: &[f64], kernel: &Kernel, law: &DiscreteFinite) -> Result<f64> {
    Decomposition::new(kernel, law)?.hajek(sample)
}

/// Realized degenerate component `V_{N,j}`; see [`Decomposition::realize`].
pub fn realize_degenerate_component(
    sample: &[f64],
    kernel: &Kernel,
    law: &DiscreteFinite,
    j: usize,
) -> Result<f64> {
    Decomposition::new(kernel, law)?.realize(sample, j)
}

/// `Var U_{N,m}` under `X_i ~ law` i.i.d., by exhaustive enumeration.
///
/// Outcomes in `law^N` are grouped by atom counts (the U-statistic depends
/// only on the multiset of values); each group is weighted by its
/// multinomial probability and its U-statistic is evaluated over all
/// `C(N, m)` subsets of a representative sample.
pub fn u_variance_brute(kernel: &Kernel, law: &DiscreteFinite, n: usize) -> Result<f64> {
    let m = kernel.order();
    if n < m {
        return Err(Error::invalid(format!("sample size N={n} is below kernel order m={m}")));
    }
    let s = law.len();
    let classes = binomial((n + s - 1) as u64, (s - 1) as u64);
    let required = classes.saturating_mul(binomial(n as u64, m as u64));
    if required > EXPECTATION_CAP {
        return Err(Error::CapExceeded {
            required,
            cap: EXPECTATION_CAP,
        });
    }
    let mut outcomes: Vec<(f64, f64)> = Vec::with_capacity(classes as usize);
    let mut counts = vec![0usize; s];
    counts[0] = n;
    let mut sample = Vec::with_capacity(n);
    loop {
        let mut weight = 1.0;
        let mut left = n as u64;
        for (a, &c) in counts.iter().enumerate() {
            weight *= binomial_f64(left, c as u64) * law.probs()[a].powi(c as i32);
            left -= c as u64;
        }
        sample.clear();
        for (a, &c) in counts.iter().enumerate() {
            sample.extend(std::iter::repeat_n(law.values()[a], c));
        }
        outcomes.push((weight, u_statistic_exact(&sample, kernel)?));
        if !next_composition(&mut counts) {
            break;
        }
    }
    let mean: CompensatedSum = outcomes.iter().map(|(w, u)| w * u).sum();
    let mean = mean.value();
    let var: CompensatedSum = outcomes.iter().map(|(w, u)| w * (u - mean) * (u - mean)).sum();
    Ok(var.value())
}

// Successor in the walk over compositions of sum(counts) into counts.len()
// parts, from (n, 0, .., 0) to (0, .., 0, n).
fn next_composition(counts: &mut [usize]) -> bool {
    let s = counts.len();
    let Some(i) = (0..s.saturating_sub(1)).rev().find(|&i| counts[i] > 0) else {
        return false;
    };
    let tail: usize = counts[i + 1..].iter().sum();
    counts[i] -= 1;
    counts[i + 1..].fill(0);
    counts[i + 1] = tail + 1;
    true
}

/// `|Var U_{N,m}(brute force) - report.var_u|`.
pub fn u_variance_identity(
    report: &DecompositionReport,
    law: &DiscreteFinite,
    kernel: &Kernel,
    n: usize,
) -> Result<f64> {
    if report.n != n || report.m != kernel.order() {
        return Err(Error::invalid(format!(
            "report is for (m={}, N={}), asked for (m={}, N={n})",
            report.m,
            report.n,
            kernel.order()
        )));
    }
    Ok((u_variance_brute(kernel, law, n)? - report.var_u).abs())
}

/// Upper bound `var_h (m/N)^2 (1 - m/N)^{-1}` on `Var(U_{N,m} - S_{N,m})`.
pub fn hajek_gap_bound(var_h: f64, n: usize, m: usize) -> Result<f64> {
    if m >= n {
        return Err(Error::invalid(format!("hajek_gap_bound needs m < N, got m={m}, N={n}")));
    }
    let r = m as f64 / n as f64;
    Ok(var_h * r * r / (1.0 - r))
}

/// `W_pi`: average of the kernel over consecutive blocks of the permuted
/// sample, `floor(N/m)` blocks.
pub fn blocked_average(sample: &[f64], kernel: &Kernel, permutation: &[usize]) -> Result<f64> {
    let n = sample.len();
    let m = kernel.order();
    if permutation.len() != n {
        return Err(Error::InvalidPermutation(format!(
            "length {} does not match sample size {n}",
            permutation.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in permutation {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(format!("index {p} is out of range or repeated")));
        }
        seen[p] = true;
    }
    if n < m {
        return Err(Error::invalid(format!("sample size N={n} is below kernel order m={m}")));
    }
    let k = n / m;
    let mut args = vec![0.0; m];
    let mut scratch = Vec::with_capacity(m);
    let mut acc = CompensatedSum::new();
    for block in permutation.chunks_exact(m).take(k) {
        for (a, &i) in args.iter_mut().zip(block) {
            *a = sample[i];
        }
        acc.add(kernel.eval_with(&args, &mut scratch));
    }
    Ok(acc.value() / k as f64)
}
