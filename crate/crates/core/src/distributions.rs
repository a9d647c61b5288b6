//! Step distributions of the random walks.
//!
//! Every law carries an exact survival function and an exact sampler. The
//! Pareto, Weibull and lognormal-type laws are monotone transforms of a
//! standard exponential `E`: `x_m exp(E / alpha)`, `E^{1/tau}` and
//! `exp((E / lambda)^{1/gamma})`. Drawing `E` by ziggurat rather than as
//! `-ln U` is more than twice as fast as inverse transform and leaves the
//! laws unchanged.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::ldtheory::normal_survival;
use crate::rng::open01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("cannot parse law spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}

/// The step-law families.
///
/// Pareto tails are pure powers; the unit-scale symmetric Pareto has
/// `P(|X| > x) = x^{-alpha}` for `x >= 1` and puts mass `p_plus` on the
/// positive half line. With `standardized` set it is divided by its exact
/// standard deviation `sqrt(alpha / (alpha - 2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LawKind {
    StdNormal,
    SymmetricPareto {
        alpha: f64,
        p_plus: f64,
        standardized: bool,
    },
    ParetoPositive {
        alpha: f64,
        x_m: f64,
    },
    StdLogNormal,
    /// `P(X > x) = exp(-x^tau)` on `x > 0`.
    WeibullType {
        tau: f64,
    },
    /// `P(X > x) = exp(-lambda (log x)^gamma)` on `x >= 1`.
    LogNormalType {
        gamma: f64,
        lambda: f64,
    },
    /// `E - 1` with `E` standard exponential.
    CenteredExponential,
}

/// A validated step law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StepLaw {
    kind: LawKind,
}

/// Exact first two moments. `None` means undefined; an infinite variance is
/// reported as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

fn positive(name: &'static str, value: f64) -> Result<f64, LawError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(LawError::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

impl StepLaw {
    pub fn new(kind: LawKind) -> Result<Self, LawError> {
        match kind {
            LawKind::StdNormal | LawKind::StdLogNormal | LawKind::CenteredExponential => {}
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => {
                positive("alpha", alpha)?;
                if !(0.0..=1.0).contains(&p_plus) {
                    return Err(LawError::InvalidParameter {
                        name: "p_plus",
                        value: p_plus,
                        reason: "must lie in [0, 1]",
                    });
                }
                if standardized && alpha <= 2.0 {
                    return Err(LawError::InvalidParameter {
                        name: "alpha",
                        value: alpha,
                        reason: "standardization needs a finite variance (alpha > 2)",
                    });
                }
                if standardized && p_plus != 0.5 {
                    return Err(LawError::InvalidParameter {
                        name: "p_plus",
                        value: p_plus,
                        reason: "a standardized law must be centered (p_plus = 0.5)",
                    });
                }
            }
            LawKind::ParetoPositive { alpha, x_m } => {
                positive("alpha", alpha)?;
                positive("x_m", x_m)?;
            }
            LawKind::WeibullType { tau } => {
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(LawError::InvalidParameter {
                        name: "tau",
                        value: tau,
                        reason: "must lie in (0, 1)",
                    });
                }
            }
            LawKind::LogNormalType { gamma, lambda } => {
                if !(gamma.is_finite() && gamma > 1.0) {
                    return Err(LawError::InvalidParameter {
                        name: "gamma",
                        value: gamma,
                        reason: "must exceed 1",
                    });
                }
                positive("lambda", lambda)?;
            }
        }
        Ok(StepLaw { kind })
    }

    pub fn std_normal() -> Self {
        StepLaw {
            kind: LawKind::StdNormal,
        }
    }

    pub fn std_lognormal() -> Self {
        StepLaw {
            kind: LawKind::StdLogNormal,
        }
    }

    pub fn centered_exponential() -> Self {
        StepLaw {
            kind: LawKind::CenteredExponential,
        }
    }

    pub fn symmetric_pareto(alpha: f64, p_plus: f64, standardized: bool) -> Result<Self, LawError> {
        Self::new(LawKind::SymmetricPareto {
            alpha,
            p_plus,
            standardized,
        })
    }

    pub fn pareto_positive(alpha: f64, x_m: f64) -> Result<Self, LawError> {
        Self::new(LawKind::ParetoPositive { alpha, x_m })
    }

    pub fn weibull_type(tau: f64) -> Result<Self, LawError> {
        Self::new(LawKind::WeibullType { tau })
    }

    pub fn lognormal_type(gamma: f64, lambda: f64) -> Result<Self, LawError> {
        Self::new(LawKind::LogNormalType { gamma, lambda })
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// Tail index of the Pareto variants.
    pub fn pareto_alpha(&self) -> Option<f64> {
        match self.kind {
            LawKind::SymmetricPareto { alpha, .. } | LawKind::ParetoPositive { alpha, .. } => {
                Some(alpha)
            }
            _ => None,
        }
    }

    /// Right-tail weight: `P(X > x) / P(|X| > x)` for large `x`.
    pub fn p_plus(&self) -> f64 {
        match self.kind {
            LawKind::SymmetricPareto { p_plus, .. } => p_plus,
            LawKind::StdNormal => 0.5,
            _ => 1.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        matches!(
            self.kind,
            LawKind::ParetoPositive { .. }
                | LawKind::StdLogNormal
                | LawKind::WeibullType { .. }
                | LawKind::LogNormalType { .. }
        )
    }

    /// Mean 0 and variance 1.
    pub fn is_standardized(&self) -> bool {
        match self.kind {
            LawKind::StdNormal | LawKind::CenteredExponential => true,
            LawKind::SymmetricPareto { standardized, .. } => standardized,
            _ => false,
        }
    }

    /// Scale of `|X|` for the symmetric Pareto: the lower end of its support.
    fn sym_pareto_scale(alpha: f64, standardized: bool) -> f64 {
        if standardized {
            ((alpha - 2.0) / alpha).sqrt()
        } else {
            1.0
        }
    }

    /// Exact `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.kind {
            LawKind::StdNormal => normal_survival(x),
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => {
                let s = Self::sym_pareto_scale(alpha, standardized);
                if x >= s {
                    p_plus * (x / s).powf(-alpha)
                } else if x >= -s {
                    p_plus
                } else {
                    1.0 - (1.0 - p_plus) * (-x / s).powf(-alpha)
                }
            }
            LawKind::ParetoPositive { alpha, x_m } => {
                if x < x_m {
                    1.0
                } else {
                    (x / x_m).powf(-alpha)
                }
            }
            LawKind::StdLogNormal => {
                if x <= 0.0 {
                    1.0
                } else {
                    normal_survival(x.ln())
                }
            }
            LawKind::WeibullType { tau } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x.powf(tau)).exp()
                }
            }
            LawKind::LogNormalType { gamma, lambda } => {
                if x <= 1.0 {
                    1.0
                } else {
                    (-lambda * x.ln().powf(gamma)).exp()
                }
            }
            LawKind::CenteredExponential => {
                if x < -1.0 {
                    1.0
                } else {
                    (-(x + 1.0)).exp()
                }
            }
        }
    }

    /// Exact `P(|X| > x)`.
    pub fn two_sided(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 {
            return 1.0;
        }
        match self.kind {
            LawKind::StdNormal => 2.0 * normal_survival(x),
            LawKind::SymmetricPareto {
                alpha,
                standardized,
                ..
            } => {
                let s = Self::sym_pareto_scale(alpha, standardized);
                if x < s {
                    1.0
                } else {
                    (x / s).powf(-alpha)
                }
            }
            LawKind::CenteredExponential => {
                let lower = if x < 1.0 { -(x - 1.0).exp_m1() } else { 0.0 };
                (-(x + 1.0)).exp() + lower
            }
            _ => self.survival(x),
        }
    }

    /// The point `x` with `P(X > x) = u`, for the laws sampled by inverse
    /// transform. `None` for the normal-based laws.
    pub fn inverse_survival(&self, u: f64) -> Option<f64> {
        if !(u > 0.0 && u < 1.0) {
            return None;
        }
        match self.kind {
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => {
                let s = Self::sym_pareto_scale(alpha, standardized);
                if u <= p_plus {
                    Some(s * (u / p_plus).powf(-1.0 / alpha))
                } else {
                    Some(-s * ((1.0 - u) / (1.0 - p_plus)).powf(-1.0 / alpha))
                }
            }
            LawKind::ParetoPositive { alpha, x_m } => Some(x_m * u.powf(-1.0 / alpha)),
            LawKind::WeibullType { tau } => Some((-u.ln()).powf(1.0 / tau)),
            LawKind::LogNormalType { gamma, lambda } => {
                Some((-u.ln() / lambda).powf(1.0 / gamma).exp())
            }
            LawKind::CenteredExponential => Some(-u.ln() - 1.0),
            LawKind::StdNormal | LawKind::StdLogNormal => None,
        }
    }

    pub fn moments(&self) -> Moments {
        match self.kind {
            LawKind::StdNormal | LawKind::CenteredExponential => Moments {
                mean: Some(0.0),
                variance: Some(1.0),
            },
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => {
                let s = Self::sym_pareto_scale(alpha, standardized);
                let mean = (alpha > 1.0).then(|| s * (2.0 * p_plus - 1.0) * alpha / (alpha - 1.0));
                let variance = if alpha > 2.0 {
                    let m = mean.unwrap_or(0.0);
                    s * s * alpha / (alpha - 2.0) - m * m
                } else {
                    f64::INFINITY
                };
                Moments {
                    mean,
                    variance: Some(variance),
                }
            }
            LawKind::ParetoPositive { alpha, x_m } => {
                let mean = (alpha > 1.0).then(|| alpha * x_m / (alpha - 1.0));
                let variance = if alpha > 2.0 {
                    x_m * x_m * alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0))
                } else {
                    f64::INFINITY
                };
                Moments {
                    mean,
                    variance: Some(variance),
                }
            }
            LawKind::StdLogNormal => {
                let e = std::f64::consts::E;
                Moments {
                    mean: Some(e.sqrt()),
                    variance: Some(e * e - e),
                }
            }
            LawKind::WeibullType { tau } => {
                let m1 = libm::tgamma(1.0 + 1.0 / tau);
                let m2 = libm::tgamma(1.0 + 2.0 / tau);
                Moments {
                    mean: Some(m1),
                    variance: Some(m2 - m1 * m1),
                }
            }
            LawKind::LogNormalType { gamma, lambda } => {
                // E X^j = 1 + j * int_0^inf exp(j t - lambda t^gamma) dt  (x = e^t)
                let m1 = 1.0 + log_tail_integral(1.0, gamma, lambda);
                let m2 = 1.0 + 2.0 * log_tail_integral(2.0, gamma, lambda);
                Moments {
                    mean: Some(m1),
                    variance: Some(m2 - m1 * m1),
                }
            }
        }
    }

    pub fn mean(&self) -> Option<f64> {
        self.moments().mean
    }

    /// Sampler with the law's constants precomputed.
    pub fn sampler(&self) -> Sampler {
        let kind = match self.kind {
            LawKind::StdNormal => SamplerKind::Normal,
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => SamplerKind::SymPareto {
                inv_alpha: 1.0 / alpha,
                scale: Self::sym_pareto_scale(alpha, standardized),
                p_plus,
            },
            LawKind::ParetoPositive { alpha, x_m } => SamplerKind::Pareto {
                inv_alpha: 1.0 / alpha,
                x_m,
            },
            LawKind::StdLogNormal => SamplerKind::LogNormal,
            LawKind::WeibullType { tau } => SamplerKind::Weibull { inv_tau: 1.0 / tau },
            LawKind::LogNormalType { gamma, lambda } => SamplerKind::LogNormalType {
                inv_gamma: 1.0 / gamma,
                inv_lambda: 1.0 / lambda,
            },
            LawKind::CenteredExponential => SamplerKind::CenteredExp,
        };
        Sampler { kind }
    }

    /// One draw. Repeated calls should go through [`StepLaw::sampler`].
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().draw(rng)
    }
}

/// `int_0^inf exp(k t - lambda t^gamma) dt` by composite Simpson on the
/// region where the integrand is not negligible.
fn log_tail_integral(k: f64, gamma: f64, lambda: f64) -> f64 {
    let log_f = |t: f64| k * t - lambda * t.powf(gamma);
    // mode of the exponent
    let t_mode = (k / (lambda * gamma)).powf(1.0 / (gamma - 1.0));
    let peak = log_f(t_mode);
    if peak > 700.0 {
        return f64::INFINITY;
    }
    let mut upper = (2.0 * t_mode).max(1.0);
    while log_f(upper) > peak - 60.0 {
        upper *= 1.5;
    }
    let panels = 20_000;
    let h = upper / panels as f64;
    let f = |t: f64| (log_f(t) - peak).exp();
    let mut acc = f(0.0) + f(upper);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0 * peak.exp()
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Normal,
    SymPareto {
        inv_alpha: f64,
        scale: f64,
        p_plus: f64,
    },
    Pareto {
        inv_alpha: f64,
        x_m: f64,
    },
    LogNormal,
    Weibull {
        inv_tau: f64,
    },
    LogNormalType {
        inv_gamma: f64,
        inv_lambda: f64,
    },
    CenteredExp,
}

/// Draws from a [`StepLaw`].
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    kind: SamplerKind,
}

#[inline(always)]
fn exp1<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// Attaches a sign that is positive with probability `p_plus`; the fair
/// case takes one random bit and avoids a data-dependent branch.
#[inline(always)]
fn signed<R: RngCore + ?Sized>(magnitude: f64, p_plus: f64, rng: &mut R) -> f64 {
    if p_plus == 0.5 {
        let sign = (rng.next_u64() >> 63) << 63;
        f64::from_bits(magnitude.to_bits() ^ sign)
    } else {
        let s = if open01(rng) < p_plus { 1.0 } else { -1.0 };
        magnitude.copysign(s)
    }
}

/// Plain or Neumaier-compensated sum of `n` draws of `step`.
#[inline(always)]
fn sum_of<R: RngCore + ?Sized>(
    n: u64,
    compensated: bool,
    rng: &mut R,
    mut step: impl FnMut(&mut R) -> f64,
) -> f64 {
    if compensated {
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        for _ in 0..n {
            let x = step(rng);
            let t = sum + x;
            if sum.abs() >= x.abs() {
                carry += (sum - t) + x;
            } else {
                carry += (x - t) + sum;
            }
            sum = t;
        }
        sum + carry
    } else {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += step(rng);
        }
        sum
    }
}

impl Sampler {
    #[inline]
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            SamplerKind::Normal => StandardNormal.sample(rng),
            SamplerKind::SymPareto {
                inv_alpha,
                scale,
                p_plus,
            } => signed(scale * (exp1(rng) * inv_alpha).exp(), p_plus, rng),
            SamplerKind::Pareto { inv_alpha, x_m } => x_m * (exp1(rng) * inv_alpha).exp(),
            SamplerKind::LogNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z.exp()
            }
            SamplerKind::Weibull { inv_tau } => exp1(rng).powf(inv_tau),
            SamplerKind::LogNormalType {
                inv_gamma,
                inv_lambda,
            } => (exp1(rng) * inv_lambda).powf(inv_gamma).exp(),
            SamplerKind::CenteredExp => exp1(rng) - 1.0,
        }
    }

    /// Sum of `n` consecutive draws, the same values [`Sampler::draw`]
    /// would give, with the law dispatched once outside the loop.
    /// `compensated` selects Neumaier summation.
    pub fn sum<R: RngCore + ?Sized>(&self, n: u64, compensated: bool, rng: &mut R) -> f64 {
        match self.kind {
            SamplerKind::Normal => sum_of(n, compensated, rng, |r| StandardNormal.sample(r)),
            SamplerKind::SymPareto {
                inv_alpha,
                scale,
                p_plus,
            } => sum_of(n, compensated, rng, |r| {
                signed(scale * (exp1(r) * inv_alpha).exp(), p_plus, r)
            }),
            SamplerKind::Pareto { inv_alpha, x_m } => {
                sum_of(n, compensated, rng, |r| x_m * (exp1(r) * inv_alpha).exp())
            }
            _ => sum_of(n, compensated, rng, |r| self.draw(r)),
        }
    }
}

impl fmt::Display for StepLaw {
    /// Canonical law spec, parseable by [`StepLaw::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LawKind::StdNormal => write!(f, "normal"),
            LawKind::SymmetricPareto {
                alpha,
                p_plus,
                standardized,
            } => {
                write!(f, "pareto-sym:alpha={alpha},p_plus={p_plus}")?;
                if standardized {
                    write!(f, ",std")?;
                }
                Ok(())
            }
            LawKind::ParetoPositive { alpha, x_m } => write!(f, "pareto:alpha={alpha},xm={x_m}"),
            LawKind::StdLogNormal => write!(f, "lognormal"),
            LawKind::WeibullType { tau } => write!(f, "weibull:tau={tau}"),
            LawKind::LogNormalType { gamma, lambda } => {
                write!(f, "lognormal-type:gamma={gamma},lambda={lambda}")
            }
            LawKind::CenteredExponential => write!(f, "exp-centered"),
        }
    }
}

impl FromStr for StepLaw {
    type Err = LawError;

    /// Parses compact specs such as `normal`, `pareto-sym:alpha=3,std`,
    /// `pareto:alpha=1.5,xm=1`, `weibull:tau=0.5`,
    /// `lognormal-type:gamma=1.5,lambda=1`, `lognormal`, `exp-centered`.
    fn from_str(spec: &str) -> Result<Self, LawError> {
        let err = |reason: String| LawError::Parse {
            spec: spec.to_string(),
            reason,
        };
        let (name, rest) = match spec.trim().split_once(':') {
            Some((name, rest)) => (name.trim(), rest.trim()),
            None => (spec.trim(), ""),
        };
        let mut params: Vec<(String, Option<f64>)> = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((key, value)) => {
                    let value: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("`{}` is not a number", value.trim())))?;
                    params.push((key.trim().to_ascii_lowercase(), Some(value)));
                }
                None => params.push((item.to_ascii_lowercase(), None)),
            }
        }
        let mut used = vec![false; params.len()];
        let mut take = |keys: &[&str]| -> Option<Option<f64>> {
            params.iter().enumerate().find_map(|(i, (k, v))| {
                if keys.contains(&k.as_str()) {
                    used[i] = true;
                    Some(*v)
                } else {
                    None
                }
            })
        };
        let mut value = |keys: &[&str], default: Option<f64>| -> Result<f64, LawError> {
            match take(keys) {
                Some(Some(v)) => Ok(v),
                Some(None) => Err(err(format!("`{}` needs a value", keys[0]))),
                None => default.ok_or_else(|| err(format!("missing `{}`", keys[0]))),
            }
        };
        let law = match name.to_ascii_lowercase().as_str() {
            "normal" | "std-normal" | "stdnormal" => StepLaw::std_normal(),
            "pareto-sym" | "symmetric-pareto" => {
                let alpha = value(&["alpha"], None)?;
                let p_plus = value(&["p_plus", "p+", "pplus"], Some(0.5))?;
                let standardized = match take(&["std", "standardized"]) {
                    Some(None) => true,
                    Some(Some(v)) => v != 0.0,
                    None => false,
                };
                StepLaw::symmetric_pareto(alpha, p_plus, standardized)?
            }
            "pareto" | "pareto-pos" => {
                let alpha = value(&["alpha"], None)?;
                let x_m = value(&["xm", "x_m"], Some(1.0))?;
                StepLaw::pareto_positive(alpha, x_m)?
            }
            "lognormal" | "std-lognormal" => StepLaw::std_lognormal(),
            "weibull" | "weibull-type" => StepLaw::weibull_type(value(&["tau"], None)?)?,
            "lognormal-type" | "ln-type" => {
                let gamma = value(&["gamma"], None)?;
                let lambda = value(&["lambda"], Some(1.0))?;
                StepLaw::lognormal_type(gamma, lambda)?
            }
            "exp-centered" | "centered-exponential" => StepLaw::centered_exponential(),
            other => return Err(err(format!("unknown law family `{other}`"))),
        };
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(err(format!("unexpected parameter `{}`", params[i].0)));
        }
        Ok(law)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use crate::stats::dkw_threshold;

    fn all_laws() -> Vec<StepLaw> {
        vec![
            StepLaw::std_normal(),
            StepLaw::symmetric_pareto(3.0, 0.5, true).unwrap(),
            StepLaw::symmetric_pareto(1.5, 0.7, false).unwrap(),
            StepLaw::pareto_positive(1.5, 2.0).unwrap(),
            StepLaw::std_lognormal(),
            StepLaw::weibull_type(0.5).unwrap(),
            StepLaw::lognormal_type(1.5, 1.0).unwrap(),
            StepLaw::centered_exponential(),
        ]
    }

    #[test]
    fn sampling_is_deterministic_given_state() {
        let law = StepLaw::std_normal();
        let a = law.sample(&mut substream(11, Domain::Walk, 0, 0));
        let b = law.sample(&mut substream(11, Domain::Walk, 0, 0));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn weibull_inverse_transform_identity() {
        let law = StepLaw::weibull_type(0.5).unwrap();
        let x = law.inverse_survival((-2.0f64).exp()).unwrap();
        assert!((x - 4.0).abs() < 1e-12);
    }

    #[test]
    fn survival_examples() {
        assert_eq!(StepLaw::std_normal().survival(0.0), 0.5);
        let w = StepLaw::weibull_type(0.5).unwrap();
        assert!((w.survival(4.0) - 0.1353352832366127).abs() < 1e-15);
        let sp = StepLaw::symmetric_pareto(3.0, 0.5, true).unwrap();
        assert!((sp.two_sided(1.0) - 3f64.powf(-1.5)).abs() < 1e-15);
        assert!((sp.two_sided(1.0) - 0.19245).abs() < 1e-5);
    }

    #[test]
    fn moment_examples() {
        let m = StepLaw::std_normal().moments();
        assert_eq!((m.mean, m.variance), (Some(0.0), Some(1.0)));
        let m = StepLaw::pareto_positive(1.5, 1.0).unwrap().moments();
        assert!((m.mean.unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(m.variance, Some(f64::INFINITY));
        let m = StepLaw::std_lognormal().moments();
        let e = std::f64::consts::E;
        assert!((m.mean.unwrap() - e.sqrt()).abs() < 1e-15);
        assert!((m.variance.unwrap() - (e * e - e)).abs() < 1e-13);
        let m = StepLaw::symmetric_pareto(0.8, 0.5, false)
            .unwrap()
            .moments();
        assert_eq!(m.mean, None);
        assert_eq!(m.variance, Some(f64::INFINITY));
        let m = StepLaw::symmetric_pareto(3.0, 0.5, true).unwrap().moments();
        assert_eq!(m.mean, Some(0.0));
        assert!((m.variance.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lognormal_type_moments_match_gaussian_integral() {
        // gamma = 2: int_0^inf e^{kt - l t^2} dt = sqrt(pi/l) e^{k^2/(4l)} Phi(k / sqrt(2l))
        let lambda = 0.8;
        let law = StepLaw::lognormal_type(2.0, lambda).unwrap();
        let closed = |k: f64| {
            (std::f64::consts::PI / lambda).sqrt()
                * (k * k / (4.0 * lambda)).exp()
                * (1.0 - normal_survival(k / (2.0 * lambda).sqrt()))
        };
        let m1 = 1.0 + closed(1.0);
        let m2 = 1.0 + 2.0 * closed(2.0);
        let m = law.moments();
        assert!((m.mean.unwrap() / m1 - 1.0).abs() < 1e-9);
        assert!((m.variance.unwrap() / (m2 - m1 * m1) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn standardization_rejected_without_variance() {
        assert!(StepLaw::symmetric_pareto(2.0, 0.5, true).is_err());
        assert!(StepLaw::symmetric_pareto(1.5, 0.5, true).is_err());
        assert!(StepLaw::symmetric_pareto(3.0, 0.7, true).is_err());
        assert!(StepLaw::weibull_type(1.0).is_err());
        assert!(StepLaw::lognormal_type(1.0, 1.0).is_err());
        assert!(StepLaw::pareto_positive(-1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_transform_round_trip() {
        let laws = [
            StepLaw::weibull_type(0.3).unwrap(),
            StepLaw::lognormal_type(1.5, 2.0).unwrap(),
            StepLaw::pareto_positive(2.5, 3.0).unwrap(),
        ];
        for law in laws {
            for u in [0.5, 0.1, 0.01] {
                let x = law.inverse_survival(u).unwrap();
                assert!((law.survival(x) / u - 1.0).abs() < 1e-13, "{law} at {u}");
            }
        }
    }

    #[test]
    fn survival_limits_and_monotonicity() {
        for law in all_laws() {
            assert_eq!(law.survival(f64::NEG_INFINITY), 1.0, "{law}");
            assert_eq!(law.survival(f64::INFINITY), 0.0, "{law}");
            let mut prev = 1.0;
            for i in -400..=400 {
                let x = i as f64 * 0.05;
                let s = law.survival(x);
                assert!((0.0..=1.0).contains(&s));
                assert!(s <= prev + 1e-15, "{law} not monotone at {x}");
                prev = s;
            }
        }
    }

    #[test]
    fn sampler_agrees_with_survival_within_dkw_band() {
        let draws = 1_000_000;
        let band = dkw_threshold(draws, 1e-3).unwrap();
        for (j, law) in all_laws().into_iter().enumerate() {
            let sampler = law.sampler();
            let mut rng = substream(2024, Domain::Walk, j as u64, 0);
            let mut xs: Vec<f64> = (0..draws).map(|_| sampler.draw(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let grid: Vec<f64> = [0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.98]
                .iter()
                .map(|&q| xs[(q * draws as f64) as usize])
                .collect();
            for x in grid {
                let above = xs.len() - xs.partition_point(|&v| v <= x);
                let emp = above as f64 / draws as f64;
                assert!(
                    (emp - law.survival(x)).abs() <= band,
                    "{law}: empirical {emp} vs {} at {x}",
                    law.survival(x)
                );
            }
        }
    }

    #[test]
    fn standardized_pareto_sample_moments() {
        for (alpha, band) in [(3.0, 0.05), (5.0, 0.05)] {
            let law = StepLaw::symmetric_pareto(alpha, 0.5, true).unwrap();
            let sampler = law.sampler();
            let mut rng = substream(99, Domain::Walk, (alpha * 10.0) as u64, 0);
            let n = 1_000_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = sampler.draw(&mut rng);
                s1 += x;
                s2 += x * x;
            }
            let mean = s1 / n as f64;
            let var = s2 / n as f64 - mean * mean;
            assert!(mean.abs() < 0.01, "alpha={alpha} mean {mean}");
            assert!((var - 1.0).abs() < band, "alpha={alpha} variance {var}");
        }
    }

    #[test]
    fn standardized_pareto_near_two_first_absolute_moment() {
        // For alpha close to 2 the sample variance misses a mass of order
        // n^{(2 - alpha) / alpha} in the tail, so check E|X| = s alpha / (alpha - 1)
        // instead, whose estimator has finite variance.
        let alpha = 2.2;
        let law = StepLaw::symmetric_pareto(alpha, 0.5, true).unwrap();
        let sampler = law.sampler();
        let mut rng = substream(99, Domain::Walk, 22, 0);
        let n = 1_000_000;
        let (mut s1, mut a1) = (0.0, 0.0);
        for _ in 0..n {
            let x = sampler.draw(&mut rng);
            s1 += x;
            a1 += x.abs();
        }
        let s = ((alpha - 2.0) / alpha).sqrt();
        let expected = s * alpha / (alpha - 1.0);
        assert!((s1 / n as f64).abs() < 0.01);
        assert!((a1 / n as f64 / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for law in all_laws() {
            let again: StepLaw = law.to_string().parse().unwrap();
            assert_eq!(again, law);
        }
        let law: StepLaw = "pareto-sym:alpha=3,std".parse().unwrap();
        assert!(law.is_standardized());
        assert!("pareto-sym:alpha=3,bogus=1".parse::<StepLaw>().is_err());
        assert!("cauchy".parse::<StepLaw>().is_err());
        assert!("weibull".parse::<StepLaw>().is_err());
    }
}
