//! Exponential-family noise priors.
//!
//! Every family is written in canonical form
//! `p(y; eta) = h(y) exp(<eta, T(y)> - A(eta))`. Maximum-likelihood fits solve
//! `grad A(eta) = mean T` in closed form, which is what makes the region
//! descriptor's domain-derivative term vanish: the boundary speed reduces to
//! the log-likelihood ratio of the two region models.

use std::f64::consts::PI;
use std::sync::Once;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Open01, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Pixel, RegionMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Reals,
    NonNegativeReals,
    NonNegativeIntegers,
    Binary,
}

impl Support {
    pub fn describe(self) -> &'static str {
        match self {
            Support::Reals => "reals",
            Support::NonNegativeReals => "nonnegative reals",
            Support::NonNegativeIntegers => "nonnegative integers",
            Support::Binary => "{0, 1}",
        }
    }
}

/// A shipped exponential-family member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseFamily {
    GaussianMeanVar,
    GaussianKnownVar { variance: f64 },
    Rayleigh,
    Poisson,
    Exponential,
    Bernoulli,
}

/// Sufficient statistic value, first `k` entries meaningful.
pub type Stat = [f64; 2];

static POISSON_ROUNDING: Once = Once::new();

impl NoiseFamily {
    pub const ALL_NAMES: [&'static str; 6] = [
        "gaussian-mean-var",
        "gaussian-known-var",
        "rayleigh",
        "poisson",
        "exponential",
        "bernoulli",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::GaussianMeanVar => "gaussian-mean-var",
            NoiseFamily::GaussianKnownVar { .. } => "gaussian-known-var",
            NoiseFamily::Rayleigh => "rayleigh",
            NoiseFamily::Poisson => "poisson",
            NoiseFamily::Exponential => "exponential",
            NoiseFamily::Bernoulli => "bernoulli",
        }
    }

    /// Parse a family name; `gaussian-known-var` needs its variance.
    pub fn from_name(name: &str, variance: Option<f64>) -> Result<Self> {
        let fam = match name {
            "gaussian-mean-var" => NoiseFamily::GaussianMeanVar,
            "gaussian-known-var" => NoiseFamily::GaussianKnownVar {
                variance: variance.ok_or_else(|| {
                    Error::InvalidParam("gaussian-known-var requires a variance".into())
                })?,
            },
            "rayleigh" => NoiseFamily::Rayleigh,
            "poisson" => NoiseFamily::Poisson,
            "exponential" => NoiseFamily::Exponential,
            "bernoulli" => NoiseFamily::Bernoulli,
            other => {
                return Err(Error::InvalidParam(format!(
                    "unknown noise family {other:?}; expected one of {:?}",
                    Self::ALL_NAMES
                )))
            }
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if let NoiseFamily::GaussianKnownVar { variance } = self {
            if !(variance.is_finite() && *variance > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "gaussian-known-var variance must be positive, got {variance}"
                )));
            }
        }
        Ok(())
    }

    /// Natural-parameter dimension.
    pub fn k(&self) -> usize {
        match self {
            NoiseFamily::GaussianMeanVar => 2,
            _ => 1,
        }
    }

    pub fn support(&self) -> Support {
        match self {
            NoiseFamily::GaussianMeanVar | NoiseFamily::GaussianKnownVar { .. } => Support::Reals,
            NoiseFamily::Rayleigh | NoiseFamily::Exponential => Support::NonNegativeReals,
            NoiseFamily::Poisson => Support::NonNegativeIntegers,
            NoiseFamily::Bernoulli => Support::Binary,
        }
    }

    fn support_error(&self, y: f64) -> Error {
        Error::Support {
            family: self.name(),
            value: y,
            support: self.support().describe(),
        }
    }

    /// Map an observed intensity into the family support. Poisson rounds to
    /// the nearest integer (warning once per process).
    pub fn coerce(&self, y: f64) -> Result<f64> {
        match self.support() {
            Support::Reals => Ok(y),
            Support::NonNegativeReals => {
                if y >= 0.0 {
                    Ok(y)
                } else {
                    Err(self.support_error(y))
                }
            }
            Support::NonNegativeIntegers => {
                let r = y.round();
                if r < 0.0 {
                    return Err(self.support_error(y));
                }
                if r != y {
                    POISSON_ROUNDING.call_once(|| {
                        log::warn!(
                            "poisson model on non-integer intensities: rounding to nearest integer"
                        )
                    });
                }
                Ok(r)
            }
            Support::Binary => {
                if y == 0.0 || y == 1.0 {
                    Ok(y)
                } else {
                    Err(self.support_error(y))
                }
            }
        }
    }

    /// `T(y)`.
    pub fn sufficient_stat(&self, y: f64) -> Result<Stat> {
        let y = self.coerce(y)?;
        Ok(self.stat_unchecked(y))
    }

    #[inline]
    fn stat_unchecked(&self, y: f64) -> Stat {
        match self {
            NoiseFamily::GaussianMeanVar => [y, y * y],
            NoiseFamily::Rayleigh => [y * y, 0.0],
            _ => [y, 0.0],
        }
    }

    /// `ln h(y)` for an already coerced value.
    #[inline]
    fn log_carrier(&self, y: f64) -> f64 {
        match self {
            NoiseFamily::GaussianMeanVar => -0.5 * (2.0 * PI).ln(),
            NoiseFamily::GaussianKnownVar { variance } => {
                -y * y / (2.0 * variance) - 0.5 * (2.0 * PI * variance).ln()
            }
            NoiseFamily::Rayleigh => y.ln(),
            NoiseFamily::Poisson => -ln_gamma(y + 1.0),
            NoiseFamily::Exponential | NoiseFamily::Bernoulli => 0.0,
        }
    }

    fn in_domain(&self, eta: &Stat) -> bool {
        let finite = eta[..self.k()].iter().all(|v| v.is_finite());
        finite
            && match self {
                NoiseFamily::GaussianMeanVar => eta[1] < 0.0,
                NoiseFamily::Rayleigh | NoiseFamily::Exponential => eta[0] < 0.0,
                _ => true,
            }
    }

    /// Log-partition `A(eta)`.
    fn log_partition_unchecked(&self, eta: &Stat) -> f64 {
        match self {
            NoiseFamily::GaussianMeanVar => {
                -eta[0] * eta[0] / (4.0 * eta[1]) - 0.5 * (-2.0 * eta[1]).ln()
            }
            NoiseFamily::GaussianKnownVar { variance } => 0.5 * variance * eta[0] * eta[0],
            NoiseFamily::Rayleigh => -(-2.0 * eta[0]).ln(),
            NoiseFamily::Poisson => eta[0].exp(),
            NoiseFamily::Exponential => -(-eta[0]).ln(),
            NoiseFamily::Bernoulli => {
                // softplus
                let e = eta[0];
                e.max(0.0) + (-e.abs()).exp().ln_1p()
            }
        }
    }

    /// `grad A(eta)`, i.e. the model mean of `T`.
    fn grad_log_partition_unchecked(&self, eta: &Stat) -> Stat {
        match self {
            NoiseFamily::GaussianMeanVar => {
                let mean = -eta[0] / (2.0 * eta[1]);
                let var = -1.0 / (2.0 * eta[1]);
                [mean, mean * mean + var]
            }
            NoiseFamily::GaussianKnownVar { variance } => [variance * eta[0], 0.0],
            NoiseFamily::Rayleigh | NoiseFamily::Exponential => [-1.0 / eta[0], 0.0],
            NoiseFamily::Poisson => [eta[0].exp(), 0.0],
            NoiseFamily::Bernoulli => [1.0 / (1.0 + (-eta[0]).exp()), 0.0],
        }
    }
}

/// Classical parameterization, used in configs and logs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalParams {
    Gaussian { mean: f64, variance: f64 },
    Rayleigh { sigma2: f64 },
    Poisson { lambda: f64 },
    Exponential { rate: f64 },
    Bernoulli { p: f64 },
}

/// A family together with a natural parameter inside its domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaturalParams {
    family: NoiseFamily,
    eta: Stat,
}

impl NaturalParams {
    pub fn new(family: NoiseFamily, eta: &[f64]) -> Result<Self> {
        family.validate()?;
        if eta.len() != family.k() {
            return Err(Error::Domain {
                family: family.name(),
                eta: eta.to_vec(),
            });
        }
        let mut e = [0.0; 2];
        e[..eta.len()].copy_from_slice(eta);
        if !family.in_domain(&e) {
            return Err(Error::Domain {
                family: family.name(),
                eta: eta.to_vec(),
            });
        }
        Ok(Self { family, eta: e })
    }

    pub fn from_classical(family: NoiseFamily, params: ClassicalParams) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("{params:?} invalid for {}", family.name()));
        let eta: Vec<f64> = match (family, params) {
            (NoiseFamily::GaussianMeanVar, ClassicalParams::Gaussian { mean, variance }) => {
                if !(variance > 0.0) {
                    return Err(bad());
                }
                vec![mean / variance, -0.5 / variance]
            }
            (
                NoiseFamily::GaussianKnownVar { variance: known },
                ClassicalParams::Gaussian { mean, variance },
            ) => {
                if variance != known {
                    return Err(bad());
                }
                vec![mean / known]
            }
            (NoiseFamily::Rayleigh, ClassicalParams::Rayleigh { sigma2 }) => {
                if !(sigma2 > 0.0) {
                    return Err(bad());
                }
                vec![-0.5 / sigma2]
            }
            (NoiseFamily::Poisson, ClassicalParams::Poisson { lambda }) => {
                if !(lambda > 0.0) {
                    return Err(bad());
                }
                vec![lambda.ln()]
            }
            (NoiseFamily::Exponential, ClassicalParams::Exponential { rate }) => {
                if !(rate > 0.0) {
                    return Err(bad());
                }
                vec![-rate]
            }
            (NoiseFamily::Bernoulli, ClassicalParams::Bernoulli { p }) => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(bad());
                }
                vec![(p / (1.0 - p)).ln()]
            }
            _ => return Err(bad()),
        };
        Self::new(family, &eta)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta[..self.family.k()]
    }

    pub fn classical(&self) -> ClassicalParams {
        let e = &self.eta;
        match self.family {
            NoiseFamily::GaussianMeanVar => {
                let variance = -0.5 / e[1];
                ClassicalParams::Gaussian {
                    mean: e[0] * variance,
                    variance,
                }
            }
            NoiseFamily::GaussianKnownVar { variance } => ClassicalParams::Gaussian {
                mean: e[0] * variance,
                variance,
            },
            NoiseFamily::Rayleigh => ClassicalParams::Rayleigh {
                sigma2: -0.5 / e[0],
            },
            NoiseFamily::Poisson => ClassicalParams::Poisson { lambda: e[0].exp() },
            NoiseFamily::Exponential => ClassicalParams::Exponential { rate: -e[0] },
            NoiseFamily::Bernoulli => ClassicalParams::Bernoulli {
                p: 1.0 / (1.0 + (-e[0]).exp()),
            },
        }
    }

    pub fn log_partition(&self) -> f64 {
        self.family.log_partition_unchecked(&self.eta)
    }

    /// Model mean of the sufficient statistic.
    pub fn grad_log_partition(&self) -> Vec<f64> {
        self.family.grad_log_partition_unchecked(&self.eta)[..self.family.k()].to_vec()
    }

    #[inline]
    fn dot(&self, t: &Stat) -> f64 {
        match self.family.k() {
            2 => self.eta[0] * t[0] + self.eta[1] * t[1],
            _ => self.eta[0] * t[0],
        }
    }

    /// `ln h(y) + <eta, T(y)> - A(eta)`.
    pub fn log_pdf(&self, y: f64) -> Result<f64> {
        let y = self.family.coerce(y)?;
        let t = self.family.stat_unchecked(y);
        Ok(self.family.log_carrier(y) + self.dot(&t) - self.log_partition())
    }

    /// Draw one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.classical() {
            ClassicalParams::Gaussian { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("positive variance")
                .sample(rng),
            ClassicalParams::Rayleigh { sigma2 } => {
                let u: f64 = rng.sample(Open01);
                (-2.0 * sigma2 * u.ln()).sqrt()
            }
            ClassicalParams::Poisson { lambda } => {
                Poisson::new(lambda).expect("positive rate").sample(rng)
            }
            ClassicalParams::Exponential { rate } => {
                Exp::new(rate).expect("positive rate").sample(rng)
            }
            ClassicalParams::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Running sum of `T(y)` over a region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SufficientStats {
    family: NoiseFamily,
    sum: Stat,
    n: usize,
}

impl SufficientStats {
    pub fn new(family: NoiseFamily) -> Self {
        Self {
            family,
            sum: [0.0; 2],
            n: 0,
        }
    }

    pub fn from_samples(family: NoiseFamily, samples: &[f64]) -> Result<Self> {
        let mut s = Self::new(family);
        for &y in samples {
            s.add(y)?;
        }
        Ok(s)
    }

    pub fn add(&mut self, y: f64) -> Result<()> {
        let t = self.family.sufficient_stat(y)?;
        self.sum[0] += t[0];
        self.sum[1] += t[1];
        self.n += 1;
        Ok(())
    }

    pub fn remove(&mut self, y: f64) -> Result<()> {
        let t = self.family.sufficient_stat(y)?;
        self.sum[0] -= t[0];
        self.sum[1] -= t[1];
        self.n -= 1;
        Ok(())
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mean_t(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum[..self.family.k()].iter().map(|s| s / n).collect()
    }

    /// Closed-form ML estimate solving `grad A(eta) = mean T`.
    pub fn ml_estimate(&self) -> Result<NaturalParams> {
        let fam = self.family;
        let fail = |cause: String| Error::Estimation {
            family: fam.name(),
            cause,
        };
        if self.n < fam.k() || self.n == 0 {
            return Err(fail(format!(
                "need at least {} samples, got {}",
                fam.k().max(1),
                self.n
            )));
        }
        let n = self.n as f64;
        let m0 = self.sum[0] / n;
        let m1 = self.sum[1] / n;
        let params = match fam {
            NoiseFamily::GaussianMeanVar => {
                let variance = m1 - m0 * m0;
                if !(variance > 1e-12 * m1.abs().max(1.0)) {
                    return Err(fail("zero sample variance".into()));
                }
                ClassicalParams::Gaussian { mean: m0, variance }
            }
            NoiseFamily::GaussianKnownVar { variance } => {
                ClassicalParams::Gaussian { mean: m0, variance }
            }
            NoiseFamily::Rayleigh => {
                if !(m0 > 0.0) {
                    return Err(fail("all samples are zero".into()));
                }
                ClassicalParams::Rayleigh { sigma2: 0.5 * m0 }
            }
            NoiseFamily::Poisson => {
                if !(m0 > 0.0) {
                    return Err(fail("all samples are zero".into()));
                }
                ClassicalParams::Poisson { lambda: m0 }
            }
            NoiseFamily::Exponential => {
                if !(m0 > 0.0) {
                    return Err(fail("all samples are zero".into()));
                }
                ClassicalParams::Exponential { rate: 1.0 / m0 }
            }
            NoiseFamily::Bernoulli => {
                if !(m0 > 0.0 && m0 < 1.0) {
                    return Err(fail(format!("degenerate sample proportion {m0}")));
                }
                ClassicalParams::Bernoulli { p: m0 }
            }
        };
        NaturalParams::from_classical(fam, params)
    }
}

pub fn sufficient_stat(family: NoiseFamily, y: f64) -> Result<Vec<f64>> {
    Ok(family.sufficient_stat(y)?[..family.k()].to_vec())
}

pub fn ml_estimate(family: NoiseFamily, samples: &[f64]) -> Result<NaturalParams> {
    SufficientStats::from_samples(family, samples)?.ml_estimate()
}

/// `log p(y; eta_in) - log p(y; eta_out)`: the outward normal speed that
/// decreases the two-region noise energy.
pub fn log_likelihood_ratio(
    eta_in: &NaturalParams,
    eta_out: &NaturalParams,
    y: f64,
) -> Result<f64> {
    let tag = |region: &'static str| {
        move |e: Error| Error::RegionSupport {
            region,
            source: Box::new(e),
        }
    };
    if eta_in.family == eta_out.family {
        // carriers cancel
        let y = eta_in.family.coerce(y).map_err(tag("inside"))?;
        let t = eta_in.family.stat_unchecked(y);
        let k = eta_in.family.k();
        let dot: f64 = (0..k)
            .map(|j| (eta_in.eta[j] - eta_out.eta[j]) * t[j])
            .sum();
        return Ok(dot - (eta_in.log_partition() - eta_out.log_partition()));
    }
    let lin = eta_in.log_pdf(y).map_err(tag("inside"))?;
    let lout = eta_out.log_pdf(y).map_err(tag("outside"))?;
    Ok(lin - lout)
}

pub fn noise_speed(
    image: &ImageGrid,
    eta_in: &NaturalParams,
    eta_out: &NaturalParams,
    pixel: Pixel,
) -> Result<f64> {
    log_likelihood_ratio(eta_in, eta_out, image.get(pixel.x, pixel.y))
}

/// ML fits of both regions of a partition.
pub fn fit_regions(
    image: &ImageGrid,
    mask: &RegionMask,
    family_in: NoiseFamily,
    family_out: NoiseFamily,
) -> Result<(NaturalParams, NaturalParams)> {
    mask.same_size(&RegionMask::empty(image.width(), image.height())?)?;
    let mut s_in = SufficientStats::new(family_in);
    let mut s_out = SufficientStats::new(family_out);
    for (&y, &inside) in image.data().iter().zip(mask.data()) {
        if inside {
            s_in.add(y)?;
        } else {
            s_out.add(y)?;
        }
    }
    if s_in.n() == 0 {
        return Err(Error::EmptyRegion("inside"));
    }
    if s_out.n() == 0 {
        return Err(Error::EmptyRegion("outside"));
    }
    Ok((s_in.ml_estimate()?, s_out.ml_estimate()?))
}

/// Sum of `-log p` over both regions with parameters re-fit on `mask`.
pub fn noise_energy(
    image: &ImageGrid,
    mask: &RegionMask,
    family_in: NoiseFamily,
    family_out: NoiseFamily,
) -> Result<f64> {
    let (eta_in, eta_out) = fit_regions(image, mask, family_in, family_out)?;
    noise_energy_with(image, mask, &eta_in, &eta_out)
}

pub fn noise_energy_with(
    image: &ImageGrid,
    mask: &RegionMask,
    eta_in: &NaturalParams,
    eta_out: &NaturalParams,
) -> Result<f64> {
    let mut e = 0.0;
    for (&y, &inside) in image.data().iter().zip(mask.data()) {
        e -= if inside {
            eta_in.log_pdf(y)?
        } else {
            eta_out.log_pdf(y)?
        };
    }
    Ok(e)
}
