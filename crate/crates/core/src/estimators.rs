//! Mean estimators: sample mean, median of means, the permutation-invariant
//! median of means over all `m`-subsets (U-MOM, which is the generalized
//! Hodges–Lehmann estimator), and its incomplete randomized version.

use std::collections::HashSet;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::subsets::{self, SubsetSampler, SUBSET_CAP};
use crate::sum::{self, CompensatedSum};

/// Median of `values`; the midpoint of the two central order statistics for
/// even lengths. The input is left untouched.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = values.to_vec();
    Ok(median_in_place(&mut buf))
}

/// Median by selection; reorders `buf`. Panics on an empty slice.
pub fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    assert!(n > 0, "median of an empty slice");
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        below + (upper - below) / 2.0
    }
}

/// Median of `k` block means over disjoint blocks of `floor(N/k)` points.
///
/// Trailing indices that do not fill a block are dropped. With `rng`, the
/// indices are shuffled before blocking; otherwise natural order is used.
pub fn mom_estimate(sample: &[f64], k: usize, rng: Option<&mut dyn RngCore>) -> Result<f64> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if k == 0 || (k > 1 && k > n / 2) {
        return Err(Error::InvalidK { k, n });
    }
    let block = n / k;
    let mut means = Vec::with_capacity(k);
    match rng {
        None => {
            for chunk in sample.chunks_exact(block).take(k) {
                means.push(sum::mean(chunk));
            }
        }
        Some(rng) => {
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            for chunk in order.chunks_exact(block).take(k) {
                let acc: CompensatedSum = chunk.iter().map(|&i| sample[i]).sum();
                means.push(acc.value() / block as f64);
            }
        }
    }
    Ok(median_in_place(&mut means))
}

/// Median over the means of all `C(N, m)` subsets of size `m`.
pub fn exact_umom(sample: &[f64], m: usize) -> Result<f64> {
    exact_umom_capped(sample, m, SUBSET_CAP)
}

pub fn exact_umom_capped(sample: &[f64], m: usize, cap: u128) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut means = subsets::subset_means(sample, m, cap)?;
    Ok(median_in_place(&mut means))
}

fn check_subset_size(n: usize, m: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "subset size m={m} must satisfy 1 <= m <= N={n}"
        )));
    }
    Ok(())
}

/// Median of the means of `count` subsets of size `m` drawn uniformly with
/// replacement (a subset may be drawn more than once).
///
/// One word is taken from `rng` as a key; subset `s` is then drawn from its
/// own stream derived from `(key, s)`.
pub fn incomplete_umom<R: Rng + ?Sized>(
    sample: &[f64],
    m: usize,
    count: usize,
    rng: &mut R,
) -> Result<f64> {
    check_subset_size(sample.len(), m)?;
    if count == 0 {
        return Err(Error::invalid("subset count must be at least 1"));
    }
    let key = rng.next_u64();
    let mut sampler = SubsetSampler::new(sample.len());
    let inv_m = 1.0 / m as f64;
    let mut means = Vec::with_capacity(count);
    for s in 0..count {
        let mut stream = rng::stream(key, s as u64);
        let mut acc = CompensatedSum::new();
        sampler.draw_each(m, &mut stream, |i| acc.add(sample[i as usize]));
        means.push(acc.value() * inv_m);
    }
    Ok(median_in_place(&mut means))
}

/// As [`incomplete_umom`], but the `count` subsets are distinct.
pub fn incomplete_umom_distinct<R: Rng + ?Sized>(
    sample: &[f64],
    m: usize,
    count: usize,
    rng: &mut R,
) -> Result<f64> {
    check_subset_size(sample.len(), m)?;
    if count == 0 {
        return Err(Error::invalid("subset count must be at least 1"));
    }
    let total = subsets::binomial(sample.len() as u64, m as u64);
    if count as u128 > total {
        return Err(Error::invalid(format!(
            "cannot draw {count} distinct subsets, only {total} exist"
        )));
    }
    let key = rng.next_u64();
    let mut sampler = SubsetSampler::new(sample.len());
    let mut idx = Vec::with_capacity(m);
    let mut seen: HashSet<Vec<u32>> = HashSet::with_capacity(count);
    let mut means = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while means.len() < count {
        let mut stream = rng::stream(key, attempt);
        attempt += 1;
        sampler.draw(m, &mut stream, &mut idx);
        idx.sort_unstable();
        if seen.insert(idx.clone()) {
            let acc: CompensatedSum = idx.iter().map(|&i| sample[i as usize]).sum();
            means.push(acc.value() / m as f64);
        }
    }
    Ok(median_in_place(&mut means))
}

/// Asymptotic breakdown point `1 - (1/2)^{1/m}` of the U-MOM estimator.
pub fn breakdown_fraction(m: usize) -> f64 {
    assert!(m >= 1, "breakdown_fraction needs m >= 1");
    -(-(2f64.ln()) / m as f64).exp_m1()
}

/// Asymptotic variance `m sigma^2 arctan(1 / sqrt(m^2 - 1))` of the
/// generalized Hodges–Lehmann estimator under normal data.
pub fn hl_asymptotic_variance(m: usize, sigma: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::invalid(format!("hl_asymptotic_variance needs m >= 2, got {m}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let mf = m as f64;
    Ok(mf * sigma * sigma * (1.0 / (mf * mf - 1.0).sqrt()).atan())
}

/// Copy of `sample` with `count` distinct uniformly chosen entries set to `value`.
pub fn contaminate<R: Rng + ?Sized>(
    sample: &[f64],
    count: usize,
    value: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(contaminate_positions(sample, count, value, rng)?.0)
}

fn contaminate_positions<R: Rng + ?Sized>(
    sample: &[f64],
    count: usize,
    value: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if count > sample.len() {
        return Err(Error::CountTooLarge {
            count,
            n: sample.len(),
        });
    }
    let positions = rand::seq::index::sample(rng, sample.len(), count).into_vec();
    let mut out = sample.to_vec();
    for &i in &positions {
        out[i] = value;
    }
    Ok((out, positions))
}

/// Which estimator to run, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorSpec {
    SampleMean,
    Mom {
        k: usize,
        #[serde(default)]
        shuffle: bool,
    },
    ExactUmom {
        m: usize,
    },
    IncompleteUmom {
        m: usize,
        subsets: usize,
        #[serde(default = "default_true")]
        with_replacement: bool,
    },
    /// Generalized Hodges–Lehmann; identical to `ExactUmom`.
    HodgesLehmann {
        m: usize,
    },
}

fn default_true() -> bool {
    true
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::SampleMean => "sample_mean",
            EstimatorSpec::Mom { .. } => "mom",
            EstimatorSpec::ExactUmom { .. } => "exact_umom",
            EstimatorSpec::IncompleteUmom { .. } => "incomplete_umom",
            EstimatorSpec::HodgesLehmann { .. } => "hodges_lehmann",
        }
    }

    /// Whether evaluation consumes randomness.
    pub fn is_randomized(&self) -> bool {
        matches!(
            self,
            EstimatorSpec::Mom { shuffle: true, .. } | EstimatorSpec::IncompleteUmom { .. }
        )
    }

    /// Checks the parameters against a sample size.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        match *self {
            EstimatorSpec::SampleMean => Ok(()),
            EstimatorSpec::Mom { k, .. } => {
                if k == 0 || (k > 1 && k > n / 2) {
                    Err(Error::InvalidK { k, n })
                } else {
                    Ok(())
                }
            }
            EstimatorSpec::ExactUmom { m } | EstimatorSpec::HodgesLehmann { m } => {
                check_subset_size(n, m)?;
                subsets::check_cap(n, m, SUBSET_CAP).map(|_| ())
            }
            EstimatorSpec::IncompleteUmom { m, subsets, .. } => {
                check_subset_size(n, m)?;
                if subsets == 0 {
                    return Err(Error::invalid("subset count must be at least 1"));
                }
                Ok(())
            }
        }
    }

    pub fn estimate<R: Rng>(&self, sample: &[f64], rng: &mut R) -> Result<f64> {
        match *self {
            EstimatorSpec::SampleMean => {
                if sample.is_empty() {
                    Err(Error::EmptyInput)
                } else {
                    Ok(sum::mean(sample))
                }
            }
            EstimatorSpec::Mom { k, shuffle } => {
                if shuffle {
                    mom_estimate(sample, k, Some(rng))
                } else {
                    mom_estimate(sample, k, None)
                }
            }
            EstimatorSpec::ExactUmom { m } | EstimatorSpec::HodgesLehmann { m } => {
                exact_umom(sample, m)
            }
            EstimatorSpec::IncompleteUmom {
                m,
                subsets,
                with_replacement,
            } => {
                if with_replacement {
                    incomplete_umom(sample, m, subsets, rng)
                } else {
                    incomplete_umom_distinct(sample, m, subsets, rng)
                }
            }
        }
    }
}

/// One row of a finite-sample breakdown scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub corrupted: usize,
    pub estimate: f64,
    pub clean_min: f64,
    pub clean_max: f64,
    /// `C(N - c, m) > C(N, m) / 2`: clean subsets hold the median rank.
    pub predicted_bounded: bool,
    pub within_clean_range: bool,
}

/// Result of [`breakdown_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownScan {
    pub n: usize,
    pub m: usize,
    pub outlier: f64,
    pub rows: Vec<BreakdownRow>,
    /// Smallest corruption count at which the clean subsets lose the majority.
    pub first_unbounded: Option<usize>,
    /// `1 - (1/2)^{1/m}`.
    pub asymptotic_fraction: f64,
}

impl BreakdownScan {
    /// Every row behaves as the subset-count criterion predicts: bounded rows
    /// stay within the clean range and the first unbounded row exceeds `escape`.
    pub fn consistent(&self, escape: f64) -> bool {
        self.rows.iter().all(|r| {
            if r.predicted_bounded {
                r.within_clean_range
            } else if Some(r.corrupted) == self.first_unbounded {
                r.estimate.abs() > escape
            } else {
                true
            }
        })
    }
}

/// Exact U-MOM under `c = 0..N` corrupted entries set to `outlier`.
///
/// Positions for each `c` come from stream `c` under `seed`.
pub fn breakdown_scan(sample: &[f64], m: usize, outlier: f64, seed: u64) -> Result<BreakdownScan> {
    let n = sample.len();
    check_subset_size(n, m)?;
    let total = subsets::binomial(n as u64, m as u64);
    let mut rows = Vec::with_capacity(n + 1);
    for c in 0..=n {
        let (dirty, positions) =
            contaminate_positions(sample, c, outlier, &mut rng::stream(seed, c as u64))?;
        let estimate = exact_umom(&dirty, m)?;
        let mut is_dirty = vec![false; n];
        for &i in &positions {
            is_dirty[i] = true;
        }
        let clean = dirty.iter().zip(&is_dirty).filter(|(_, &d)| !d).map(|(&x, _)| x);
        let (clean_min, clean_max) = clean.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        let clean_subsets = subsets::binomial((n - c) as u64, m as u64);
        let predicted_bounded = 2 * clean_subsets > total;
        rows.push(BreakdownRow {
            corrupted: c,
            estimate,
            clean_min,
            clean_max,
            predicted_bounded,
            within_clean_range: clean_min <= estimate && estimate <= clean_max,
        });
    }
    let first_unbounded = rows.iter().find(|r| !r.predicted_bounded).map(|r| r.corrupted);
    Ok(BreakdownScan {
        n,
        m,
        outlier,
        rows,
        first_unbounded,
        asymptotic_fraction: breakdown_fraction(m),
    })
}
