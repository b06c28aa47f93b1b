//! Sampleable laws with known moments, finite-support laws for exact
//! expectations, and the Feller function `g(m)`.

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf, StudentsT as StudentsTCdf};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Monte Carlo draws used by [`feller_g`] when the law has no finite support.
pub const FELLER_BUDGET: usize = 1_000_000;

/// Cap on weighted evaluations in [`discrete_expectation`].
pub const EXPECTATION_CAP: u128 = 10_000_000;

const PROB_TOLERANCE: f64 = 1e-12;

/// A law with finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteFinite {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteFinite {
    /// Atoms as `(value, probability)`; values strictly increasing,
    /// probabilities positive and summing to one.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::invalid("a finite law needs at least 2 atoms"));
        }
        for w in atoms.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::invalid(format!(
                    "atom values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::invalid(format!("atom value {v} is not finite")));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("atom probability {p} not in (0, 1]")));
            }
        }
        let total: CompensatedSum = atoms.iter().map(|a| a.1).sum();
        if (total.value() - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::invalid(format!(
                "atom probabilities sum to {}, not 1",
                total.value()
            )));
        }
        let (values, probs) = atoms.into_iter().unzip();
        Ok(Self { values, probs })
    }

    /// Equally likely atoms at the given (strictly increasing) values.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&v| (v, p)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum::<CompensatedSum>().value()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.atoms()
            .map(|(v, p)| p * (v - mu) * (v - mu))
            .sum::<CompensatedSum>()
            .value()
    }

    pub fn abs_moment_about(&self, center: f64, q: f64) -> f64 {
        self.atoms()
            .map(|(v, p)| p * (v - center).abs().powf(q))
            .sum::<CompensatedSum>()
            .value()
    }

    /// Index of the atom equal to `value`.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values
            .binary_search_by(|v| v.total_cmp(&value))
            .ok()
    }

    /// Atom indices of every entry of `sample`.
    pub fn indices_of(&self, sample: &[f64]) -> Result<Vec<usize>> {
        sample
            .iter()
            .map(|&x| self.index_of(x).ok_or(Error::ValueNotInSupport(x)))
            .collect()
    }
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteFinite {
    type Error = Error;
    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<DiscreteFinite> for Vec<(f64, f64)> {
    fn from(d: DiscreteFinite) -> Self {
        d.values.into_iter().zip(d.probs).collect()
    }
}

/// The law families the lab can draw from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Law {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    StudentT {
        dof: f64,
        location: f64,
        scale: f64,
    },
    /// Pareto with tail index `alpha`, scaled by `scale` and shifted so that
    /// its mean is exactly `mean`.
    Pareto {
        alpha: f64,
        mean: f64,
        scale: f64,
    },
    LogNormal {
        logmean: f64,
        logsd: f64,
    },
    Rademacher,
    Discrete {
        atoms: DiscreteFinite,
    },
    /// With probability `epsilon` the draw is `outlier_value`, else a draw
    /// from `base`.
    Contaminated {
        base: Box<DistributionSpec>,
        epsilon: f64,
        outlier_value: f64,
    },
}

/// A validated law together with its exact mean and variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Law", into = "Law")]
pub struct DistributionSpec {
    law: Law,
    mean: f64,
    variance: f64,
}

impl TryFrom<Law> for DistributionSpec {
    type Error = Error;
    fn try_from(law: Law) -> Result<Self> {
        Self::new(law)
    }
}

impl From<DistributionSpec> for Law {
    fn from(d: DistributionSpec) -> Self {
        d.law
    }
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name}={x} is not finite")))
    }
}

impl DistributionSpec {
    pub fn new(law: Law) -> Result<Self> {
        let (mean, variance) = match &law {
            Law::Gaussian { mean, sd } => {
                finite("mean", *mean)?;
                finite("sd", *sd)?;
                (*mean, sd * sd)
            }
            Law::StudentT {
                dof,
                location,
                scale,
            } => {
                finite("location", *location)?;
                finite("scale", *scale)?;
                if !(*dof > 2.0) || !dof.is_finite() {
                    return Err(Error::invalid(format!(
                        "student_t needs finite dof > 2 for a finite variance, got {dof}"
                    )));
                }
                (*location, scale * scale * dof / (dof - 2.0))
            }
            Law::Pareto { alpha, mean, scale } => {
                finite("mean", *mean)?;
                finite("scale", *scale)?;
                if !(*alpha > 2.0) || !alpha.is_finite() {
                    return Err(Error::invalid(format!(
                        "pareto needs finite tail index alpha > 2, got {alpha}"
                    )));
                }
                let a = *alpha;
                (*mean, scale * scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0)))
            }
            Law::LogNormal { logmean, logsd } => {
                finite("logmean", *logmean)?;
                finite("logsd", *logsd)?;
                let s2 = logsd * logsd;
                (
                    (logmean + s2 / 2.0).exp(),
                    s2.exp_m1() * (2.0 * logmean + s2).exp(),
                )
            }
            Law::Rademacher => (0.0, 1.0),
            Law::Discrete { atoms } => (atoms.mean(), atoms.variance()),
            Law::Contaminated {
                base,
                epsilon,
                outlier_value,
            } => {
                finite("outlier_value", *outlier_value)?;
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::invalid(format!("epsilon={epsilon} not in [0, 1)")));
                }
                let e = *epsilon;
                let d = base.mean - outlier_value;
                (
                    (1.0 - e) * base.mean + e * outlier_value,
                    (1.0 - e) * base.variance + e * (1.0 - e) * d * d,
                )
            }
        };
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid(format!(
                "law must have a finite positive variance, got {variance}"
            )));
        }
        Ok(Self {
            law,
            mean,
            variance,
        })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Self::new(Law::Gaussian { mean, sd })
    }

    pub fn student_t(dof: f64, location: f64, scale: f64) -> Result<Self> {
        Self::new(Law::StudentT {
            dof,
            location,
            scale,
        })
    }

    pub fn pareto(alpha: f64, mean: f64, scale: f64) -> Result<Self> {
        Self::new(Law::Pareto { alpha, mean, scale })
    }

    pub fn lognormal(logmean: f64, logsd: f64) -> Result<Self> {
        Self::new(Law::LogNormal { logmean, logsd })
    }

    pub fn rademacher() -> Self {
        Self::new(Law::Rademacher).expect("rademacher is valid")
    }

    pub fn discrete(atoms: DiscreteFinite) -> Result<Self> {
        Self::new(Law::Discrete { atoms })
    }

    pub fn contaminated(base: DistributionSpec, epsilon: f64, outlier_value: f64) -> Result<Self> {
        Self::new(Law::Contaminated {
            base: Box::new(base),
            epsilon,
            outlier_value,
        })
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    /// Config name of the law, e.g. `student_t`.
    pub fn name(&self) -> &'static str {
        match self.law {
            Law::Gaussian { .. } => "gaussian",
            Law::StudentT { .. } => "student_t",
            Law::Pareto { .. } => "pareto",
            Law::LogNormal { .. } => "lognormal",
            Law::Rademacher => "rademacher",
            Law::Discrete { .. } => "discrete",
            Law::Contaminated { .. } => "contaminated",
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn true_moments(&self) -> TrueMoments<'_> {
        TrueMoments { spec: self }
    }

    /// Supremum of absolute moment orders that exist (`inf` when all do).
    pub fn moment_limit(&self) -> f64 {
        match &self.law {
            Law::StudentT { dof, .. } => *dof,
            Law::Pareto { alpha, .. } => *alpha,
            Law::Contaminated { base, .. } => base.moment_limit(),
            _ => f64::INFINITY,
        }
    }

    /// The same law as a [`DiscreteFinite`], when it has finite support.
    pub fn as_discrete(&self) -> Option<DiscreteFinite> {
        match &self.law {
            Law::Rademacher => Some(DiscreteFinite {
                values: vec![-1.0, 1.0],
                probs: vec![0.5, 0.5],
            }),
            Law::Discrete { atoms } => Some(atoms.clone()),
            Law::Contaminated {
                base,
                epsilon,
                outlier_value,
            } => {
                let b = base.as_discrete()?;
                let mut atoms: Vec<(f64, f64)> =
                    b.atoms().map(|(v, p)| (v, p * (1.0 - epsilon))).collect();
                if *epsilon > 0.0 {
                    match atoms.iter_mut().find(|a| a.0 == *outlier_value) {
                        Some(a) => a.1 += epsilon,
                        None => atoms.push((*outlier_value, *epsilon)),
                    }
                    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
                }
                Some(DiscreteFinite {
                    values: atoms.iter().map(|a| a.0).collect(),
                    probs: atoms.iter().map(|a| a.1).collect(),
                })
            }
            _ => None,
        }
    }

    /// A prepared sampler for repeated draws.
    pub fn sampler(&self) -> Sampler {
        let kind = match &self.law {
            Law::Gaussian { mean, sd } => {
                SamplerKind::Gaussian(rand_distr::Normal::new(*mean, *sd).expect("validated"))
            }
            Law::StudentT {
                dof,
                location,
                scale,
            } => SamplerKind::StudentT {
                t: rand_distr::StudentT::new(*dof).expect("validated"),
                location: *location,
                scale: *scale,
            },
            Law::Pareto { alpha, mean, scale } => SamplerKind::Pareto {
                p: rand_distr::Pareto::new(1.0, *alpha).expect("validated"),
                shift: mean - scale * alpha / (alpha - 1.0),
                scale: *scale,
            },
            Law::LogNormal { logmean, logsd } => SamplerKind::LogNormal(
                rand_distr::LogNormal::new(*logmean, *logsd).expect("validated"),
            ),
            Law::Rademacher => SamplerKind::Rademacher,
            Law::Discrete { atoms } => SamplerKind::Discrete {
                index: WeightedIndex::new(atoms.probs()).expect("validated"),
                values: atoms.values().to_vec(),
            },
            Law::Contaminated {
                base,
                epsilon,
                outlier_value,
            } => SamplerKind::Contaminated {
                base: Box::new(base.sampler()),
                epsilon: *epsilon,
                outlier_value: *outlier_value,
            },
        };
        Sampler { kind }
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let sampler = self.sampler();
        Ok((0..n).map(|_| sampler.draw(rng)).collect())
    }

    /// `E|X - center|^q`.
    pub fn abs_moment_about(&self, center: f64, q: f64) -> Result<f64> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::invalid(format!("moment order q={q} must be >= 0")));
        }
        let limit = self.moment_limit();
        if q >= limit {
            return Err(Error::MomentDoesNotExist { q, limit });
        }
        if q == 0.0 {
            return Ok(1.0);
        }
        let central = center == self.mean;
        let value = match &self.law {
            Law::Gaussian { sd, .. } if central => sd.powf(q) * normal_abs_moment(q),
            Law::StudentT { dof, scale, .. } if central => {
                let nu = *dof;
                scale.powf(q)
                    * (0.5 * q * nu.ln() + ln_gamma((q + 1.0) / 2.0) + ln_gamma((nu - q) / 2.0)
                        - 0.5 * PI.ln()
                        - ln_gamma(nu / 2.0))
                    .exp()
            }
            Law::Gaussian { mean, sd } => {
                let d = NormalCdf::new(*mean, *sd).expect("validated");
                quantile_moment(
                    |u| d.inverse_cdf(u),
                    |v| 2.0 * mean - d.inverse_cdf(v),
                    d.cdf(center),
                    center,
                    q,
                )
            }
            Law::StudentT {
                dof,
                location,
                scale,
            } => {
                let d = StudentsTCdf::new(*location, *scale, *dof).expect("validated");
                quantile_moment(
                    |u| d.inverse_cdf(u),
                    |v| 2.0 * location - d.inverse_cdf(v),
                    d.cdf(center),
                    center,
                    q,
                )
            }
            Law::Pareto { alpha, mean, scale } => {
                let shift = mean - scale * alpha / (alpha - 1.0);
                let split = if center <= shift + scale {
                    0.0
                } else {
                    1.0 - ((center - shift) / scale).powf(-alpha)
                };
                quantile_moment(
                    |u| shift + scale * (1.0 - u).powf(-1.0 / alpha),
                    |v| shift + scale * v.powf(-1.0 / alpha),
                    split,
                    center,
                    q,
                )
            }
            Law::LogNormal { logmean, logsd } => {
                let z = NormalCdf::new(0.0, 1.0).expect("standard normal");
                let split = if center <= 0.0 {
                    0.0
                } else {
                    z.cdf((center.ln() - logmean) / logsd)
                };
                quantile_moment(
                    |u| (logmean + logsd * z.inverse_cdf(u)).exp(),
                    |v| (logmean - logsd * z.inverse_cdf(v)).exp(),
                    split,
                    center,
                    q,
                )
            }
            Law::Rademacher => 0.5 * ((-1.0 - center).abs().powf(q) + (1.0 - center).abs().powf(q)),
            Law::Discrete { atoms } => atoms.abs_moment_about(center, q),
            Law::Contaminated {
                base,
                epsilon,
                outlier_value,
            } => {
                (1.0 - epsilon) * base.abs_moment_about(center, q)?
                    + epsilon * (outlier_value - center).abs().powf(q)
            }
        };
        Ok(value)
    }
}

/// Closed-form and numerically integrated moments of a [`DistributionSpec`].
#[derive(Clone, Copy, Debug)]
pub struct TrueMoments<'a> {
    spec: &'a DistributionSpec,
}

impl TrueMoments<'_> {
    pub fn mean(&self) -> f64 {
        self.spec.mean
    }

    pub fn variance(&self) -> f64 {
        self.spec.variance
    }

    /// `E|X - mu|^q`; errors when the moment does not exist.
    pub fn abs_central_moment(&self, q: f64) -> Result<f64> {
        self.spec.abs_moment_about(self.spec.mean, q)
    }
}

/// `E|Z|^q` for standard normal `Z`.
fn normal_abs_moment(q: f64) -> f64 {
    (0.5 * q * 2f64.ln() + ln_gamma((q + 1.0) / 2.0) - 0.5 * PI.ln()).exp()
}

/// `int_0^1 |Q(u) - c|^q du`, split where `Q` crosses `c`.
///
/// `lower(u) = Q(u)` is used below the split and `upper(v) = Q(1 - v)` above
/// it, so both tails are integrated against an endpoint at zero.
fn quantile_moment(
    lower: impl Fn(f64) -> f64,
    upper: impl Fn(f64) -> f64,
    split: f64,
    center: f64,
    q: f64,
) -> f64 {
    // v = w^4 flattens integrable power singularities at the tail endpoint
    let tail = |g: &dyn Fn(f64) -> f64, width: f64| {
        let f = |w: f64| {
            let w3 = w * w * w;
            (g(w3 * w) - center).abs().powf(q) * 4.0 * w3
        };
        quadrature::double_exponential::integrate(f, 0.0, width.powf(0.25), 1e-13).integral
    };
    let mut total = 0.0;
    if split > 0.0 {
        total += tail(&lower, split);
    }
    if split < 1.0 {
        total += tail(&upper, 1.0 - split);
    }
    total
}

/// Prepared sampler; see [`DistributionSpec::sampler`].
#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Gaussian(rand_distr::Normal<f64>),
    StudentT {
        t: rand_distr::StudentT<f64>,
        location: f64,
        scale: f64,
    },
    Pareto {
        p: rand_distr::Pareto<f64>,
        shift: f64,
        scale: f64,
    },
    LogNormal(rand_distr::LogNormal<f64>),
    Rademacher,
    Discrete {
        index: WeightedIndex<f64>,
        values: Vec<f64>,
    },
    Contaminated {
        base: Box<Sampler>,
        epsilon: f64,
        outlier_value: f64,
    },
}

impl Sampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Gaussian(d) => d.sample(rng),
            SamplerKind::StudentT { t, location, scale } => location + scale * t.sample(rng),
            SamplerKind::Pareto { p, shift, scale } => shift + scale * p.sample(rng),
            SamplerKind::LogNormal(d) => d.sample(rng),
            SamplerKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SamplerKind::Discrete { index, values } => values[index.sample(rng)],
            SamplerKind::Contaminated {
                base,
                epsilon,
                outlier_value,
            } => {
                if rng.random::<f64>() < *epsilon {
                    *outlier_value
                } else {
                    base.draw(rng)
                }
            }
        }
    }

    /// Replaces the contents of `out` with `n` draws.
    pub fn fill<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..n).map(|_| self.draw(rng)));
    }
}

impl Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng)
    }
}

/// `g(m) = m^{-1/2} E[Z^2 min(|Z|, sqrt(m))]` for the standardized law `Z`.
///
/// Exact for finite-support laws, otherwise a Monte Carlo average over
/// `budget` draws.
pub fn feller_g<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    m: usize,
    budget: usize,
    rng: &mut R,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("feller_g needs m >= 1"));
    }
    let root_m = (m as f64).sqrt();
    let (mu, sigma) = (spec.mean(), spec.sd());
    let integrand = |x: f64| {
        let z = (x - mu) / sigma;
        z * z * z.abs().min(root_m)
    };
    let expectation = match spec.as_discrete() {
        Some(p) => p.atoms().map(|(v, w)| w * integrand(v)).sum::<CompensatedSum>().value(),
        None => {
            if budget == 0 {
                return Err(Error::invalid("feller_g Monte Carlo budget must be positive"));
            }
            let sampler = spec.sampler();
            let acc: CompensatedSum = (0..budget).map(|_| integrand(sampler.draw(rng))).sum();
            acc.value() / budget as f64
        }
    };
    Ok(expectation / root_m)
}

/// Exact `E f(Y_1, .., Y_d)` for `Y_i` i.i.d. from `law`, by full enumeration.
pub fn discrete_expectation(
    law: &DiscreteFinite,
    f: impl Fn(&[f64]) -> f64,
    d: usize,
) -> Result<f64> {
    discrete_expectation_capped(law, f, d, EXPECTATION_CAP)
}

pub fn discrete_expectation_capped(
    law: &DiscreteFinite,
    f: impl Fn(&[f64]) -> f64,
    d: usize,
    cap: u128,
) -> Result<f64> {
    let s = law.len();
    let required = (s as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    if d == 0 {
        return Ok(f(&[]));
    }
    let mut digits = vec![0usize; d];
    let mut args = vec![law.values[0]; d];
    let mut acc = CompensatedSum::new();
    loop {
        let w: f64 = digits.iter().map(|&i| law.probs[i]).product();
        acc.add(w * f(&args));
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(acc.value());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < s {
                args[pos] = law.values[digits[pos]];
                break;
            }
            digits[pos] = 0;
            args[pos] = law.values[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn three_atoms() -> DiscreteFinite {
        DiscreteFinite::new(vec![(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)]).unwrap()
    }

    #[test]
    fn discrete_validation() {
        assert!(DiscreteFinite::new(vec![(1.0, 1.0)]).is_err());
        assert!(DiscreteFinite::new(vec![(1.0, 0.5), (0.0, 0.5)]).is_err());
        assert!(DiscreteFinite::new(vec![(0.0, 0.5), (1.0, 0.6)]).is_err());
        assert!(DiscreteFinite::new(vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(DiscreteFinite::new(vec![(0.0, 0.5), (1.0, 0.5 + 1e-13)]).is_ok());
    }

    #[test]
    fn degenerate_laws_rejected() {
        assert!(DistributionSpec::gaussian(0.0, 0.0).is_err());
        assert!(DistributionSpec::student_t(2.0, 0.0, 1.0).is_err());
        assert!(DistributionSpec::pareto(1.5, 0.0, 1.0).is_err());
        assert!(DistributionSpec::contaminated(DistributionSpec::rademacher(), 1.0, 3.0).is_err());
    }

    #[test]
    fn rademacher_sample_is_deterministic_signs() {
        let spec = DistributionSpec::rademacher();
        let a = spec.sample(3, &mut stream(7, 0)).unwrap();
        let b = spec.sample(3, &mut stream(7, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x == 1.0 || x == -1.0));
        assert!(spec.sample(0, &mut stream(7, 0)).is_err());
    }

    #[test]
    fn dominant_atom_dominates() {
        let p = DiscreteFinite::new(vec![(0.0, 1e-3), (5.0, 1.0 - 1e-3)]).unwrap();
        let spec = DistributionSpec::discrete(p).unwrap();
        let xs = spec.sample(100_000, &mut stream(3, 1)).unwrap();
        let fives = xs.iter().filter(|&&x| x == 5.0).count();
        assert!(fives > 99_700);
        assert!((crate::sum::mean(&xs) - 5.0).abs() < 0.01);
    }

    #[test]
    fn gaussian_mean_within_clt_margin() {
        let n = 1_000_000;
        let xs = DistributionSpec::gaussian(0.0, 1.0)
            .unwrap()
            .sample(n, &mut stream(11, 0))
            .unwrap();
        assert!(crate::sum::mean(&xs).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn closed_form_moments() {
        let r = DistributionSpec::rademacher();
        assert_eq!(r.true_moments().mean(), 0.0);
        assert_eq!(r.true_moments().variance(), 1.0);
        for q in [0.5, 1.0, 3.0, 7.5] {
            assert!((r.true_moments().abs_central_moment(q).unwrap() - 1.0).abs() < 1e-15);
        }
        let g = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let m3 = g.true_moments().abs_central_moment(3.0).unwrap();
        assert!((m3 - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-12);
        let t3 = DistributionSpec::student_t(3.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            t3.true_moments().abs_central_moment(4.0),
            Err(Error::MomentDoesNotExist { .. })
        ));
        // E T^2 = nu / (nu - 2)
        let t5 = DistributionSpec::student_t(5.0, 1.0, 2.0).unwrap();
        assert!((t5.true_moments().abs_central_moment(2.0).unwrap() - t5.variance()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_moments_match_variance() {
        for spec in [
            DistributionSpec::pareto(4.5, 1.0, 2.0).unwrap(),
            DistributionSpec::lognormal(0.2, 0.6).unwrap(),
            DistributionSpec::contaminated(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 0.1, 4.0)
                .unwrap(),
            DistributionSpec::contaminated(DistributionSpec::student_t(5.0, 0.0, 1.0).unwrap(), 0.05, -3.0)
                .unwrap(),
        ] {
            let v = spec.true_moments().abs_central_moment(2.0).unwrap();
            assert!((v - spec.variance()).abs() < 1e-8 * spec.variance(), "{spec:?}: {v}");
        }
        // gaussian moment about a non-mean point: E(Z - 1)^2 = 2
        let g = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        assert!((g.abs_moment_about(1.0, 2.0).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pareto_mean_is_exact() {
        let spec = DistributionSpec::pareto(3.0, 2.5, 1.0).unwrap();
        assert_eq!(spec.mean(), 2.5);
        let m1 = spec.abs_moment_about(0.0, 1.0).unwrap();
        // support is above the mean minus 1.5, so E|X| = E X when the support is positive
        assert!((m1 - 2.5).abs() < 1e-9);
    }

    #[test]
    fn feller_g_rademacher_closed_form() {
        let r = DistributionSpec::rademacher();
        let mut rng = stream(0, 0);
        assert!((feller_g(&r, 4, 10, &mut rng).unwrap() - 0.5).abs() < 1e-15);
        assert!((feller_g(&r, 100, 10, &mut rng).unwrap() - 0.1).abs() < 1e-15);
        assert!(feller_g(&r, 0, 10, &mut rng).is_err());
    }

    #[test]
    fn feller_g_gaussian_large_m() {
        let g = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let m = 10_000usize;
        let value = feller_g(&g, m, FELLER_BUDGET, &mut stream(5, 0)).unwrap();
        let scaled = (m as f64).sqrt() * value;
        // sd of |Z|^3 is sqrt(15 - 8/pi) ~ 3.55; 5 sigma margin
        let target = 2.0 * (2.0 / PI).sqrt();
        assert!((scaled - target).abs() < 5.0 * 3.55 / 1000.0, "{scaled}");
    }

    #[test]
    fn feller_g_discrete_monotone_and_bounded() {
        let p = three_atoms();
        let spec = DistributionSpec::discrete(p).unwrap();
        let m3 = spec.true_moments().abs_central_moment(3.0).unwrap();
        let mut rng = stream(0, 0);
        let mut prev_scaled = 0.0;
        let mut prev = f64::INFINITY;
        for m in 1..200 {
            let g = feller_g(&spec, m, 1, &mut rng).unwrap();
            assert!(g > 0.0 && g <= 1.0);
            assert!(g <= prev + 1e-15);
            let scaled = (m as f64).sqrt() * g;
            assert!(scaled >= prev_scaled - 1e-15);
            assert!(scaled <= m3 + 1e-12);
            prev = g;
            prev_scaled = scaled;
        }
    }

    #[test]
    fn expectation_identities() {
        let p = three_atoms();
        let mu = p.mean();
        let var = p.variance();
        let e = discrete_expectation(&p, |y| y[0] * y[1], 2).unwrap();
        assert!((e - mu * mu).abs() < 1e-15);
        let e = discrete_expectation(&p, |y| (y[0] - mu).powi(2), 1).unwrap();
        assert!((e - var).abs() < 1e-15);
        for d in 0..5 {
            assert_eq!(discrete_expectation(&p, |_| 2.5, d).unwrap(), 2.5);
        }
        assert!(matches!(
            discrete_expectation(&p, |_| 0.0, 15),
            Err(Error::CapExceeded { required: 14_348_907, .. })
        ));
    }

    #[test]
    fn expectation_agrees_with_monte_carlo() {
        let p = three_atoms();
        let spec = DistributionSpec::discrete(p.clone()).unwrap();
        let f = |y: &[f64]| y[0] * y[1].abs() + y[2] * y[2];
        let exact = discrete_expectation(&p, f, 3).unwrap();
        let second = discrete_expectation(&p, |y| f(y).powi(2), 3).unwrap();
        let sd = (second - exact * exact).sqrt();
        let n = 1_000_000;
        let sampler = spec.sampler();
        let mut rng = stream(21, 0);
        let acc: CompensatedSum = (0..n)
            .map(|_| {
                let y = [sampler.draw(&mut rng), sampler.draw(&mut rng), sampler.draw(&mut rng)];
                f(&y)
            })
            .sum();
        let mc = acc.value() / n as f64;
        assert!((mc - exact).abs() <= 5.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn contamination_fraction() {
        let spec =
            DistributionSpec::contaminated(DistributionSpec::gaussian(0.0, 1.0).unwrap(), 0.1, 1e6)
                .unwrap();
        let n = 200_000;
        let xs = spec.sample(n, &mut stream(4, 4)).unwrap();
        let hits = xs.iter().filter(|&&x| x == 1e6).count() as f64 / n as f64;
        let se = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((hits - 0.1).abs() < 5.0 * se);
    }

    #[test]
    fn contaminated_discrete_collapses_to_atoms() {
        let spec = DistributionSpec::contaminated(DistributionSpec::rademacher(), 0.2, 1.0).unwrap();
        let d = spec.as_discrete().unwrap();
        assert_eq!(d.values(), &[-1.0, 1.0]);
        assert!((d.probs()[0] - 0.4).abs() < 1e-15);
        assert!((d.mean() - spec.mean()).abs() < 1e-15);
        assert!((d.variance() - spec.variance()).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let spec = DistributionSpec::contaminated(
            DistributionSpec::student_t(5.0, 0.0, 1.0).unwrap(),
            0.05,
            10.0,
        )
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: DistributionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"dist":"student_t","dof":1.5,"location":0.0,"scale":1.0}"#;
        assert!(serde_json::from_str::<DistributionSpec>(bad).is_err());
    }
}
